#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <string>

#include "dimap/raster.hpp"
#include "dimap/road_graph.hpp"

namespace dimap::metrics {

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

struct PrReport {
  ConfusionCounts counts;
  double precision = 0.0;
  double recall = 0.0;
  double f_score = 0.0;
};

// Percentages over the sampled pairs.
struct ConnectivityReport {
  std::size_t n_pairs = 0;
  double correct = 0.0;
  double too_long = 0.0;
  double too_short = 0.0;
  double no_connection = 0.0;
};

ConfusionCounts confusion(const raster::BinaryMask& pred, const raster::BinaryMask& truth);

// TP / (TP + FP + FN); 1 when neither mask has a positive.
double iou(const raster::BinaryMask& pred, const raster::BinaryMask& truth);

// Mean of per-class IoU over target classes drawn from {1, 2}.
double mean_iou(const raster::Mask& pred, const raster::Mask& truth, const std::set<int>& target_classes);

// Precision/recall/F from counts; a zero denominator yields 0.
PrReport pr_from_counts(ConfusionCounts c);

PrReport subsegment_pr(const graph::RoadGraph& pred, const graph::RoadGraph& truth, double l,
                       std::optional<double> radius = std::nullopt);

struct ConnectivityParams {
  std::size_t n_pairs = 1000;
  std::uint64_t seed = 0;
  double rel_tol = 0.05;
  double snap_radius = 20.0;
};

// Samples node pairs connected in truth (uniform over connected pairs), snaps
// both ends to the nearest pred node within snap_radius and classifies the
// predicted shortest path length against the true one.
ConnectivityReport connectivity(const graph::RoadGraph& pred, const graph::RoadGraph& truth,
                                const ConnectivityParams& params);

std::string to_text(const PrReport& r);
std::string to_json(const PrReport& r);
std::string to_text(const ConnectivityReport& r);
std::string to_json(const ConnectivityReport& r);

}  // namespace dimap::metrics

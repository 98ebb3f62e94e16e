#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dimap/geo_io.hpp"
#include "dimap/raster.hpp"
#include "dimap/road_graph.hpp"

namespace dimap::synth {

// Axis-aligned building covering pixel centres col0..col1 x row0..row1.
struct Rect {
  int col0, row0, col1, row1;
  friend bool operator==(const Rect&, const Rect&) = default;
};

struct Scenario {
  std::uint64_t seed = 0;
  int extent = 0;             // raster is extent x extent pixels
  double slice_length = 0.0;  // l, in pixels
  double gsd = 0.5;           // meters per pixel of the exported world frame
  graph::RoadGraph truth_graph{Units::Pixels};
  std::vector<Rect> buildings;
  // Indices into slice_edges(truth_graph, slice_length) and into buildings;
  // filled by apply_damage, sorted ascending.
  std::vector<std::size_t> damaged_subsegments;
  std::vector<std::size_t> damaged_buildings;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

struct GenerateParams {
  int extent = 512;
  // 0 gives no roads; otherwise a spanning tree of the perturbed grid plus
  // each remaining grid link with this probability.
  double road_density = 0.3;
  int building_count = 40;
  double slice_length = 40.0;
};

// Perturbed rectilinear road grid and non-overlapping rectangular buildings
// kept at least kBuildingSetback pixels from every road centreline. Throws
// GenerationError when the buildings cannot be placed.
Scenario generate(std::uint64_t seed, const GenerateParams& params = {});

inline constexpr double kBuildingSetback = 24.0;

// Pixel frame -> meters, north up, origin at the lower-left raster corner.
geo::GeoTransform scenario_transform(const Scenario& s);

// Roads (tagged residential) and buildings in the meters frame.
geo::VectorLayer to_vector_layer(const Scenario& s);
geo::VectorLayer to_vector_layer(const Scenario& s, const graph::RoadGraph& roads,
                                 const std::vector<std::size_t>& building_subset);

raster::Mask rasterize_scenario(const Scenario& s);

struct DamagedPair {
  raster::Mask pre;
  raster::Mask post;
};

// Damages round(fraction * n) of the truth sub-segments and the same fraction
// of buildings, chosen uniformly with the given seed. The record is stored in
// s. The post mask rasterizes whatever survives.
DamagedPair apply_damage(Scenario& s, double fraction, std::uint64_t seed);

// Truth graph with the damaged sub-segments removed.
graph::RoadGraph post_truth_graph(const Scenario& s);

// Erases road pixels of a post mask with discs of radius 6..10 centred on the
// surviving road centrelines until at least fraction of its road pixels are
// gone. Gap centres stay 20 px away from edge ends and 30 px from each other.
raster::Mask inject_gaps(const raster::Mask& post, const graph::RoadGraph& roads, double fraction,
                         std::uint64_t seed);

std::string damage_manifest(const Scenario& s);

// Writes osm.geojson (meters), truth.geojson and truth_post.geojson (graphs,
// pixel frame), pre.png, post.png with world files, and damage.txt.
void export_scenario(const Scenario& s, const DamagedPair& masks, const std::filesystem::path& dir);

}  // namespace dimap::synth

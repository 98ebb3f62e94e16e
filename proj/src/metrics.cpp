#include "dimap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include "dimap/errors.hpp"
#include "json.hpp"
#include "spatial_hash.hpp"

namespace dimap::metrics {

namespace {

void check_same_shape(const raster::BinaryMask& a, const raster::BinaryMask& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw InputError("prediction and truth masks differ in size");
  }
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

// Index of the nearest node within radius, ties to the lower index.
class NodeSnapper {
 public:
  NodeSnapper(const graph::RoadGraph& g, double radius) : g_(g), radius_(radius), grid_(radius > 0.0 ? radius : 1.0) {
    for (std::size_t i = 0; i < g.nodes().size(); ++i) grid_.insert(g.nodes()[i].pos, i);
  }

  std::optional<std::size_t> snap(Point p) const {
    std::vector<std::size_t> cand;
    grid_.query(p, radius_, cand);
    std::optional<std::size_t> best;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i : cand) {
      const double d = distance(p, g_.nodes()[i].pos);
      if (d > radius_) continue;
      if (d < best_d || (d == best_d && best && i < *best)) {
        best_d = d;
        best = i;
      }
    }
    return best;
  }

 private:
  const graph::RoadGraph& g_;
  double radius_;
  SpatialHashGrid grid_;
};

class DistanceCache {
 public:
  explicit DistanceCache(const graph::RoadGraph& g) : g_(g) {}

  double get(std::size_t src, std::size_t dst) {
    auto it = cache_.find(src);
    if (it == cache_.end()) {
      it = cache_.emplace(src, graph::shortest_path_lengths(g_, g_.nodes()[src].id)).first;
    }
    return it->second[dst];
  }

 private:
  const graph::RoadGraph& g_;
  std::unordered_map<std::size_t, std::vector<double>> cache_;
};

}  // namespace

ConfusionCounts confusion(const raster::BinaryMask& pred, const raster::BinaryMask& truth) {
  check_same_shape(pred, truth);
  ConfusionCounts c;
  auto p = pred.bits();
  auto t = truth.bits();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] && t[i]) ++c.tp;
    else if (p[i]) ++c.fp;
    else if (t[i]) ++c.fn;
  }
  return c;
}

double iou(const raster::BinaryMask& pred, const raster::BinaryMask& truth) {
  const ConfusionCounts c = confusion(pred, truth);
  const std::size_t denom = c.tp + c.fp + c.fn;
  if (denom == 0) return 1.0;
  return static_cast<double>(c.tp) / static_cast<double>(denom);
}

double mean_iou(const raster::Mask& pred, const raster::Mask& truth, const std::set<int>& target_classes) {
  if (target_classes.empty()) throw InputError("mean IoU needs at least one target class");
  if (pred.width() != truth.width() || pred.height() != truth.height()) {
    throw InputError("prediction and truth masks differ in size");
  }
  double sum = 0.0;
  for (int code : target_classes) {
    if (code != 1 && code != 2) throw InputError("target classes must be 1 (building) or 2 (road)");
    sum += iou(raster::class_mask(pred, code), raster::class_mask(truth, code));
  }
  return sum / static_cast<double>(target_classes.size());
}

PrReport pr_from_counts(ConfusionCounts c) {
  PrReport r;
  r.counts = c;
  if (c.tp + c.fp > 0) r.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0) r.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  if (r.precision + r.recall > 0.0) r.f_score = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

PrReport subsegment_pr(const graph::RoadGraph& pred, const graph::RoadGraph& truth, double l,
                       std::optional<double> radius) {
  if (pred.units() != truth.units()) throw InputError("prediction and truth graphs are in different frames");
  const auto sp = graph::slice_edges(pred, l);
  const auto st = graph::slice_edges(truth, l);
  const auto c = graph::match_subsegments(sp, st, radius);
  return pr_from_counts({c.pairs.size(), c.unmatched_a.size(), c.unmatched_b.size()});
}

ConnectivityReport connectivity(const graph::RoadGraph& pred, const graph::RoadGraph& truth,
                                const ConnectivityParams& params) {
  if (params.n_pairs < 1) throw InputError("connectivity needs n_pairs >= 1");
  if (!(params.rel_tol > 0.0 && params.rel_tol < 1.0)) throw InputError("rel_tol must lie in (0, 1)");
  if (!(params.snap_radius >= 0.0)) throw InputError("snap radius must be >= 0");
  if (pred.units() != truth.units()) throw InputError("prediction and truth graphs are in different frames");

  // Connected components of truth.
  const auto& tn = truth.nodes();
  std::unordered_map<graph::NodeId, std::size_t> index;
  for (std::size_t i = 0; i < tn.size(); ++i) index.emplace(tn[i].id, i);
  std::vector<std::size_t> parent(tn.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& e : truth.edges()) {
    const std::size_t a = find(index.at(e.a));
    const std::size_t b = find(index.at(e.b));
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  std::vector<std::vector<std::size_t>> comps;
  std::unordered_map<std::size_t, std::size_t> comp_of_root;
  for (std::size_t i = 0; i < tn.size(); ++i) {
    const std::size_t root = find(i);
    auto [it, fresh] = comp_of_root.emplace(root, comps.size());
    if (fresh) comps.emplace_back();
    comps[it->second].push_back(i);
  }
  std::vector<std::size_t> eligible;
  std::vector<std::uint64_t> cumulative;
  std::uint64_t total = 0;
  for (std::size_t c = 0; c < comps.size(); ++c) {
    const std::uint64_t n = comps[c].size();
    if (n < 2) continue;
    total += n * (n - 1);
    eligible.push_back(c);
    cumulative.push_back(total);
  }
  if (eligible.empty()) throw InputError("truth graph has fewer than 2 connected nodes");

  std::mt19937_64 rng(params.seed);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(params.n_pairs);
  for (std::size_t k = 0; k < params.n_pairs; ++k) {
    const std::uint64_t u = std::uniform_int_distribution<std::uint64_t>(0, total - 1)(rng);
    const std::size_t slot =
        static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    const auto& members = comps[eligible[slot]];
    const std::size_t n = members.size();
    const std::size_t i = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    std::size_t j = std::uniform_int_distribution<std::size_t>(0, n - 2)(rng);
    if (j >= i) ++j;
    pairs.emplace_back(members[i], members[j]);
  }

  const NodeSnapper snapper(pred, params.snap_radius);
  DistanceCache truth_dist(truth);
  DistanceCache pred_dist(pred);
  std::size_t correct = 0, too_long = 0, too_short = 0, none = 0;
  for (const auto& [s, d] : pairs) {
    const double dt = truth_dist.get(s, d);
    const auto ps = snapper.snap(tn[s].pos);
    const auto pd = snapper.snap(tn[d].pos);
    if (!ps || !pd) {
      ++none;
      continue;
    }
    const double dp = pred_dist.get(*ps, *pd);
    if (std::isinf(dp)) ++none;
    else if (std::abs(dp - dt) <= params.rel_tol * dt) ++correct;
    else if (dp < dt) ++too_short;
    else ++too_long;
  }

  const double n = static_cast<double>(params.n_pairs);
  ConnectivityReport r;
  r.n_pairs = params.n_pairs;
  r.correct = 100.0 * static_cast<double>(correct) / n;
  r.too_long = 100.0 * static_cast<double>(too_long) / n;
  r.too_short = 100.0 * static_cast<double>(too_short) / n;
  r.no_connection = 100.0 * static_cast<double>(none) / n;
  return r;
}

std::string to_text(const PrReport& r) {
  return "tp=" + std::to_string(r.counts.tp) + "\nfp=" + std::to_string(r.counts.fp) +
         "\nfn=" + std::to_string(r.counts.fn) + "\nprecision=" + fmt(r.precision) +
         "\nrecall=" + fmt(r.recall) + "\nf_score=" + fmt(r.f_score) + "\n";
}

std::string to_json(const PrReport& r) {
  nlohmann::json j = {{"tp", r.counts.tp},       {"fp", r.counts.fp},   {"fn", r.counts.fn},
                      {"precision", r.precision}, {"recall", r.recall}, {"f_score", r.f_score}};
  return j.dump(2) + "\n";
}

std::string to_text(const ConnectivityReport& r) {
  return "n_pairs=" + std::to_string(r.n_pairs) + "\ncorrect=" + fmt(r.correct) +
         "\ntoo_long=" + fmt(r.too_long) + "\ntoo_short=" + fmt(r.too_short) +
         "\nno_connection=" + fmt(r.no_connection) + "\n";
}

std::string to_json(const ConnectivityReport& r) {
  nlohmann::json j = {{"n_pairs", r.n_pairs},     {"correct", r.correct},
                      {"too_long", r.too_long},   {"too_short", r.too_short},
                      {"no_connection", r.no_connection}};
  return j.dump(2) + "\n";
}

}  // namespace dimap::metrics

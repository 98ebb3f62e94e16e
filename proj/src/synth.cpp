#include "dimap/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "dimap/errors.hpp"

namespace dimap::synth {

namespace {

constexpr int kGridMargin = 16;
constexpr int kBorder = 2;
constexpr int kMinSide = 14;
constexpr int kMaxSide = 36;
constexpr int kPlacementAttempts = 2000;

struct DisjointSet {
  std::vector<std::size_t> parent;
  explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[std::max(a, b)] = std::min(a, b);
    return true;
  }
};

// Grid line positions: spacings k*l - u keep the last slice of each link
// close to a full l, so every sub-segment is long enough to show up in a
// change mask.
std::vector<int> grid_lines(std::mt19937_64& rng, int extent, double l) {
  std::uniform_int_distribution<int> k_dist(2, 3);
  std::uniform_int_distribution<int> u_dist(3, 5);
  std::vector<int> lines{kGridMargin};
  while (true) {
    const int step = static_cast<int>(std::lround(k_dist(rng) * l)) - u_dist(rng);
    const int next = lines.back() + std::max(step, 8);
    if (next > extent - 1 - kGridMargin) break;
    lines.push_back(next);
  }
  if (lines.size() < 2) lines.push_back(extent - 1 - kGridMargin);
  return lines;
}

double box_segment_distance(const Rect& r, Point a, Point b) {
  const double x0 = r.col0 - 0.5, x1 = r.col1 + 0.5, y0 = r.row0 - 0.5, y1 = r.row1 + 0.5;
  auto inside = [&](Point p) { return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1; };
  if (inside(a) || inside(b)) return 0.0;
  const Point corners[4] = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
  // Proper crossing of the segment with a box side.
  auto cross = [](Point o, Point p, Point q) { return (p.x - o.x) * (q.y - o.y) - (p.y - o.y) * (q.x - o.x); };
  double best = INFINITY;
  for (int k = 0; k < 4; ++k) {
    const Point c = corners[k];
    const Point d = corners[(k + 1) % 4];
    const double d1 = cross(a, b, c), d2 = cross(a, b, d), d3 = cross(c, d, a), d4 = cross(c, d, b);
    if (((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0))) return 0.0;
    best = std::min({best, point_segment_distance(c, a, b), point_segment_distance(a, c, d),
                     point_segment_distance(b, c, d)});
  }
  return best;
}

bool rects_clear(const Rect& a, const Rect& b, int gap) {
  return a.col1 + gap < b.col0 || b.col1 + gap < a.col0 || a.row1 + gap < b.row0 || b.row1 + gap < a.row0;
}

Point point_at(const std::vector<Point>& pl, double s) {
  for (std::size_t i = 0; i + 1 < pl.size(); ++i) {
    const double seg = distance(pl[i], pl[i + 1]);
    if (s <= seg || i + 2 == pl.size()) {
      const double t = seg > 0.0 ? std::clamp(s / seg, 0.0, 1.0) : 0.0;
      return pl[i] + t * (pl[i + 1] - pl[i]);
    }
    s -= seg;
  }
  return pl.back();
}

std::vector<std::size_t> sample_subset(std::mt19937_64& rng, std::size_t n, double fraction) {
  const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(std::min(k, n));
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::string join(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace

Scenario generate(std::uint64_t seed, const GenerateParams& params) {
  if (params.extent < 64) throw InputError("scenario extent must be >= 64 px");
  if (!(params.road_density >= 0.0)) throw InputError("road density must be >= 0");
  if (params.building_count < 0) throw InputError("building count must be >= 0");
  if (!(params.slice_length > 0.0)) throw InputError("slice length must be > 0");

  Scenario s;
  s.seed = seed;
  s.extent = params.extent;
  s.slice_length = params.slice_length;
  std::mt19937_64 rng(seed);

  if (params.road_density > 0.0) {
    const auto xs = grid_lines(rng, params.extent, params.slice_length);
    const auto ys = grid_lines(rng, params.extent, params.slice_length);
    const std::size_t nx = xs.size(), ny = ys.size();
    std::uniform_int_distribution<int> jitter(-1, 1);
    std::vector<Point> pos(nx * ny);
    for (std::size_t j = 0; j < ny; ++j) {
      for (std::size_t i = 0; i < nx; ++i) {
        const int dx = jitter(rng);
        const int dy = jitter(rng);
        pos[j * nx + i] = {double(xs[i] + dx), double(ys[j] + dy)};
      }
    }
    std::vector<std::pair<std::size_t, std::size_t>> links;
    for (std::size_t j = 0; j < ny; ++j) {
      for (std::size_t i = 0; i < nx; ++i) {
        if (i + 1 < nx) links.emplace_back(j * nx + i, j * nx + i + 1);
        if (j + 1 < ny) links.emplace_back(j * nx + i, (j + 1) * nx + i);
      }
    }
    std::vector<std::size_t> order(links.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<char> keep(links.size(), 0);
    DisjointSet ds(pos.size());
    std::vector<std::size_t> spare;
    for (auto k : order) {
      if (ds.unite(links[k].first, links[k].second)) {
        keep[k] = 1;
      } else {
        spare.push_back(k);
      }
    }
    std::bernoulli_distribution extra(std::min(1.0, params.road_density));
    for (auto k : spare) keep[k] = extra(rng) ? 1 : 0;

    std::vector<char> used(pos.size(), 0);
    for (std::size_t k = 0; k < links.size(); ++k) {
      if (keep[k]) used[links[k].first] = used[links[k].second] = 1;
    }
    std::vector<graph::NodeId> id(pos.size(), -1);
    for (std::size_t v = 0; v < pos.size(); ++v) {
      if (used[v]) id[v] = s.truth_graph.add_node(pos[v]);
    }
    for (std::size_t k = 0; k < links.size(); ++k) {
      if (keep[k]) s.truth_graph.connect(id[links[k].first], id[links[k].second]);
    }
  }

  const int hi = params.extent - 1 - kBorder;
  std::uniform_int_distribution<int> side(kMinSide, kMaxSide);
  for (int b = 0; b < params.building_count; ++b) {
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
      const int w = side(rng);
      const int h = side(rng);
      if (hi - w + 1 < kBorder || hi - h + 1 < kBorder) continue;
      const int c0 = std::uniform_int_distribution<int>(kBorder, hi - w + 1)(rng);
      const int r0 = std::uniform_int_distribution<int>(kBorder, hi - h + 1)(rng);
      const Rect r{c0, r0, c0 + w - 1, r0 + h - 1};
      bool ok = std::all_of(s.buildings.begin(), s.buildings.end(),
                            [&](const Rect& o) { return rects_clear(r, o, 2); });
      for (const auto& e : s.truth_graph.edges()) {
        if (!ok) break;
        for (std::size_t i = 0; ok && i + 1 < e.geometry.size(); ++i) {
          ok = box_segment_distance(r, e.geometry[i], e.geometry[i + 1]) >= kBuildingSetback;
        }
      }
      if (ok) {
        s.buildings.push_back(r);
        placed = true;
      }
    }
    if (!placed) {
      throw GenerationError("could not place building " + std::to_string(b + 1) + " of " +
                            std::to_string(params.building_count) + " after " +
                            std::to_string(kPlacementAttempts) + " attempts");
    }
  }
  return s;
}

geo::GeoTransform scenario_transform(const Scenario& s) {
  return geo::GeoTransform(s.gsd, 0.0, 0.0, 0.0, -s.gsd, s.gsd * s.extent);
}

geo::VectorLayer to_vector_layer(const Scenario& s, const graph::RoadGraph& roads,
                                 const std::vector<std::size_t>& building_subset) {
  const auto gt = scenario_transform(s);
  geo::VectorLayer layer;
  layer.units = Units::Meters;
  for (const auto& e : roads.edges()) {
    geo::Road road{{}, "residential"};
    for (const auto& p : e.geometry) road.points.push_back(gt.pixel_to_world(p));
    layer.roads.push_back(std::move(road));
  }
  for (auto i : building_subset) {
    const Rect& r = s.buildings.at(i);
    const double x0 = r.col0 - 0.5, x1 = r.col1 + 0.5, y0 = r.row0 - 0.5, y1 = r.row1 + 0.5;
    std::vector<Point> ring;
    for (const Point p : {Point{x0, y0}, Point{x1, y0}, Point{x1, y1}, Point{x0, y1}, Point{x0, y0}}) {
      ring.push_back(gt.pixel_to_world(p));
    }
    layer.buildings.push_back(geo::Building{{std::move(ring)}, "yes"});
  }
  return layer;
}

geo::VectorLayer to_vector_layer(const Scenario& s) {
  std::vector<std::size_t> all(s.buildings.size());
  std::iota(all.begin(), all.end(), 0);
  return to_vector_layer(s, s.truth_graph, all);
}

namespace {

raster::Mask rasterize_layer(const Scenario& s, const geo::VectorLayer& layer) {
  geo::RasterizeParams rp;
  rp.gsd = s.gsd;
  return geo::rasterize(layer, scenario_transform(s), s.extent, s.extent, rp).mask;
}

}  // namespace

raster::Mask rasterize_scenario(const Scenario& s) { return rasterize_layer(s, to_vector_layer(s)); }

DamagedPair apply_damage(Scenario& s, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw InputError("damage fraction must be in [0, 1]");
  std::mt19937_64 rng(seed);
  const auto sliced = graph::slice_edges(s.truth_graph, s.slice_length);
  s.damaged_subsegments = sample_subset(rng, sliced.sub_segments.size(), fraction);
  s.damaged_buildings = sample_subset(rng, s.buildings.size(), fraction);

  std::vector<std::size_t> standing;
  for (std::size_t i = 0; i < s.buildings.size(); ++i) {
    if (!std::binary_search(s.damaged_buildings.begin(), s.damaged_buildings.end(), i)) standing.push_back(i);
  }
  DamagedPair out{rasterize_scenario(s), raster::Mask(s.extent, s.extent)};
  out.post = rasterize_layer(s, to_vector_layer(s, post_truth_graph(s), standing));
  return out;
}

graph::RoadGraph post_truth_graph(const Scenario& s) {
  const auto sliced = graph::slice_edges(s.truth_graph, s.slice_length);
  return graph::remove_subsegments(s.truth_graph, sliced, s.damaged_subsegments);
}

raster::Mask inject_gaps(const raster::Mask& post, const graph::RoadGraph& roads, double fraction,
                         std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw InputError("gap fraction must be in [0, 1)");
  constexpr double kEndClearance = 20.0;
  constexpr double kSeparation = 30.0;
  constexpr int kMaxAttempts = 200000;

  std::vector<std::uint8_t> labels(post.labels().begin(), post.labels().end());
  const std::size_t road_pixels = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 2));
  const double target = fraction * static_cast<double>(road_pixels);
  if (target <= 0.0) return post;

  std::vector<const graph::Edge*> usable;
  std::vector<double> weights;
  for (const auto& e : roads.edges()) {
    if (e.length > 2.0 * kEndClearance) {
      usable.push_back(&e);
      weights.push_back(e.length - 2.0 * kEndClearance);
    }
  }
  if (usable.empty()) throw GenerationError("no road long enough to hold a gap");

  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> radius_dist(6, 10);
  std::vector<Point> centres;
  std::size_t erased = 0;
  const int w = post.width();
  const int h = post.height();
  for (int attempt = 0; attempt < kMaxAttempts && static_cast<double>(erased) < target; ++attempt) {
    const graph::Edge& e = *usable[pick(rng)];
    const double s = kEndClearance + unit(rng) * (e.length - 2.0 * kEndClearance);
    const int rad = radius_dist(rng);
    const Point c = point_at(e.geometry, s);
    const bool crowded = std::any_of(centres.begin(), centres.end(),
                                     [&](Point o) { return distance(o, c) < kSeparation; });
    if (crowded) continue;
    centres.push_back(c);
    const int c0 = std::max(0, static_cast<int>(std::floor(c.x - rad)));
    const int c1 = std::min(w - 1, static_cast<int>(std::ceil(c.x + rad)));
    const int r0 = std::max(0, static_cast<int>(std::floor(c.y - rad)));
    const int r1 = std::min(h - 1, static_cast<int>(std::ceil(c.y + rad)));
    for (int r = r0; r <= r1; ++r) {
      for (int col = c0; col <= c1; ++col) {
        auto& v = labels[static_cast<std::size_t>(r) * w + col];
        if (v == 2 && distance({double(col), double(r)}, c) <= rad) {
          v = 0;
          ++erased;
        }
      }
    }
  }
  if (static_cast<double>(erased) < target) {
    throw GenerationError("could not erase " + std::to_string(target) + " road pixels with separated gaps");
  }
  return raster::Mask(w, h, std::move(labels));
}

std::string damage_manifest(const Scenario& s) {
  std::ostringstream out;
  out.precision(17);
  const auto n = graph::slice_edges(s.truth_graph, s.slice_length).sub_segments.size();
  out << "seed " << s.seed << "\n"
      << "extent " << s.extent << "\n"
      << "slice_length " << s.slice_length << "\n"
      << "subsegments " << n << "\n"
      << "damaged_subsegments " << join(s.damaged_subsegments) << "\n"
      << "buildings " << s.buildings.size() << "\n"
      << "damaged_buildings " << join(s.damaged_buildings) << "\n";
  return out.str();
}

void export_scenario(const Scenario& s, const DamagedPair& masks, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const auto gt = scenario_transform(s);
  geo::write_text_file(dir / "osm.geojson", geo::serialize_geojson(to_vector_layer(s)));
  geo::write_text_file(dir / "truth.geojson", graph::to_geojson(s.truth_graph));
  geo::write_text_file(dir / "truth_post.geojson", graph::to_geojson(post_truth_graph(s)));
  geo::write_raster(dir / "pre.png", masks.pre, gt);
  geo::write_raster(dir / "post.png", masks.post, gt);
  geo::write_text_file(dir / "damage.txt", damage_manifest(s));
}

}  // namespace dimap::synth

#pragma once

// Shared generators and brute-force oracles for the test suites. Oracles are
// written from the textbook definitions, independent of the library code.

#include <cmath>
#include <cstdint>
#include <deque>
#include <random>
#include <vector>

#include "dimap/raster.hpp"
#include "dimap/road_graph.hpp"

namespace testsupport {

using dimap::Point;
using dimap::raster::BinaryMask;
using dimap::raster::Mask;

inline BinaryMask random_binary(std::mt19937_64& rng, int w, int h, double density) {
  std::bernoulli_distribution on(density);
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(w) * h);
  for (auto& b : bits) b = on(rng) ? 1 : 0;
  return BinaryMask(w, h, std::move(bits));
}

inline Mask random_labels(std::mt19937_64& rng, int w, int h) {
  std::uniform_int_distribution<int> code(0, 2);
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(w) * h);
  for (auto& v : labels) v = static_cast<std::uint8_t>(code(rng));
  return Mask(w, h, std::move(labels));
}

// A few random filled rectangles and thick strokes: shapes closer to road
// and building masks than white noise.
inline BinaryMask random_shapes(std::mt19937_64& rng, int w, int h) {
  BinaryMask m(w, h);
  std::uniform_int_distribution<int> count(1, 4);
  std::uniform_int_distribution<int> xs(0, w - 1), ys(0, h - 1), thick(1, 4);
  const int n = count(rng);
  for (int k = 0; k < n; ++k) {
    const int x0 = xs(rng), y0 = ys(rng), x1 = xs(rng), y1 = ys(rng), t = thick(rng);
    const int steps = std::max(std::abs(x1 - x0), std::abs(y1 - y0)) + 1;
    for (int s = 0; s < steps; ++s) {
      const double f = steps == 1 ? 0.0 : double(s) / (steps - 1);
      const int cx = static_cast<int>(std::lround(x0 + f * (x1 - x0)));
      const int cy = static_cast<int>(std::lround(y0 + f * (y1 - y0)));
      for (int dy = -t; dy <= t; ++dy)
        for (int dx = -t; dx <= t; ++dx)
          if (cx + dx >= 0 && cy + dy >= 0 && cx + dx < w && cy + dy < h) m.set(cx + dx, cy + dy, true);
    }
  }
  return m;
}

// Set-union definition: a pixel is on when any pixel of the window around it is.
inline BinaryMask oracle_dilate(const BinaryMask& m, int size, int iterations) {
  BinaryMask cur = m;
  const int r = size / 2;
  for (int it = 0; it < iterations; ++it) {
    BinaryMask next(m.width(), m.height());
    for (int y = 0; y < m.height(); ++y)
      for (int x = 0; x < m.width(); ++x) {
        bool any = false;
        for (int dy = -r; dy <= r && !any; ++dy)
          for (int dx = -r; dx <= r && !any; ++dx) any = cur.get(x + dx, y + dy);
        next.set(x, y, any);
      }
    cur = next;
  }
  return cur;
}

// A pixel survives when the whole window around it is on; outside is off.
inline BinaryMask oracle_erode(const BinaryMask& m, int size, int iterations) {
  BinaryMask cur = m;
  const int r = size / 2;
  for (int it = 0; it < iterations; ++it) {
    BinaryMask next(m.width(), m.height());
    for (int y = 0; y < m.height(); ++y)
      for (int x = 0; x < m.width(); ++x) {
        bool all = true;
        for (int dy = -r; dy <= r && all; ++dy)
          for (int dx = -r; dx <= r && all; ++dx) all = cur.get(x + dx, y + dy);
        next.set(x, y, all);
      }
    cur = next;
  }
  return cur;
}

inline BinaryMask oracle_change(const Mask& pre, const Mask& post) {
  BinaryMask out(pre.width(), pre.height());
  for (int y = 0; y < pre.height(); ++y)
    for (int x = 0; x < pre.width(); ++x) {
      const int a = pre.at(x, y);
      const int b = post.at(x, y);
      out.set(x, y, (a == 1 || a == 2) && b == 0);
    }
  return out;
}

// 8-connected components by breadth-first flood fill: per-pixel component
// index (-1 for background) and component areas.
struct OracleComponents {
  std::vector<int> comp;
  std::vector<std::size_t> areas;
};

inline OracleComponents oracle_components(const BinaryMask& m) {
  const int w = m.width(), h = m.height();
  OracleComponents out{std::vector<int>(static_cast<std::size_t>(w) * h, -1), {}};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!m.at(x, y) || out.comp[y * w + x] >= 0) continue;
      const int id = static_cast<int>(out.areas.size());
      out.areas.push_back(0);
      std::deque<std::pair<int, int>> q{{x, y}};
      out.comp[y * w + x] = id;
      while (!q.empty()) {
        auto [cx, cy] = q.front();
        q.pop_front();
        ++out.areas[id];
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = cx + dx, ny = cy + dy;
            if (m.get(nx, ny) && out.comp[ny * w + nx] < 0) {
              out.comp[ny * w + nx] = id;
              q.emplace_back(nx, ny);
            }
          }
      }
    }
  return out;
}

inline double oracle_polyline_length(const std::vector<Point>& pts) {
  double s = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) s += std::hypot(pts[i].x - pts[i - 1].x, pts[i].y - pts[i - 1].y);
  return s;
}

// Random connected-ish graph: random points in a box, random polylines between
// them with a few interior vertices.
inline dimap::graph::RoadGraph random_graph(std::mt19937_64& rng, int nodes, int edges, double extent) {
  std::uniform_real_distribution<double> coord(0.0, extent);
  std::uniform_int_distribution<int> pick(0, nodes - 1), interior(0, 4);
  dimap::graph::RoadGraph g;
  std::vector<dimap::graph::NodeId> ids;
  for (int i = 0; i < nodes; ++i) ids.push_back(g.add_node({coord(rng), coord(rng)}));
  for (int e = 0; e < edges; ++e) {
    const int a = pick(rng);
    int b = pick(rng);
    if (b == a) b = (a + 1) % nodes;
    std::vector<Point> geom{g.node(ids[a]).pos};
    const int k = interior(rng);
    for (int i = 0; i < k; ++i) geom.push_back({coord(rng), coord(rng)});
    geom.push_back(g.node(ids[b]).pos);
    g.add_edge(ids[a], ids[b], geom);
  }
  return g;
}

}  // namespace testsupport

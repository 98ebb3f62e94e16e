#include "dimap/skeleton.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <utility>

#include "dimap/errors.hpp"

namespace dimap::skeleton {

namespace {

// Clockwise from north: P2..P9 in Zhang-Suen notation.
constexpr std::array<std::array<int, 2>, 8> kRing = {{
    {0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}}};

std::array<int, 8> ring(const BinaryMask& m, int c, int r) {
  std::array<int, 8> v{};
  for (std::size_t k = 0; k < 8; ++k) v[k] = m.get(c + kRing[k][0], r + kRing[k][1]) ? 1 : 0;
  return v;
}

// Yokoi connectivity number for 8-connected foreground. 1 means deleting the
// pixel changes neither foreground nor background topology.
int connectivity_number(const std::array<int, 8>& p) {
  // Yokoi order x1..x8 = E, NE, N, NW, W, SW, S, SE, as complements.
  const int x[9] = {1 - p[2], 1 - p[1], 1 - p[0], 1 - p[7], 1 - p[6], 1 - p[5], 1 - p[4], 1 - p[3], 1 - p[2]};
  int n = 0;
  for (int k = 0; k < 8; k += 2) n += x[k] - x[k] * x[k + 1] * x[(k + 2) % 8];
  return n;
}

bool zhang_suen_pass(BinaryMask& m, bool first) {
  std::vector<std::size_t> doomed;
  const int w = m.width();
  for (int r = 0; r < m.height(); ++r) {
    for (int c = 0; c < w; ++c) {
      if (!m.at(c, r)) continue;
      const auto p = ring(m, c, r);
      int b = 0;
      int a = 0;
      for (std::size_t k = 0; k < 8; ++k) {
        b += p[k];
        if (p[k] == 0 && p[(k + 1) % 8] == 1) ++a;
      }
      if (b < 2 || b > 6 || a != 1) continue;
      // p[0]=N p[2]=E p[4]=S p[6]=W
      if (first) {
        if (p[0] * p[2] * p[4] != 0 || p[2] * p[4] * p[6] != 0) continue;
      } else {
        if (p[0] * p[2] * p[6] != 0 || p[0] * p[4] * p[6] != 0) continue;
      }
      doomed.push_back(static_cast<std::size_t>(r) * w + c);
    }
  }
  // Parallel deletion can erase a whole 2x2 block; committing the candidates
  // one at a time, each only while still a simple non-end pixel, keeps every
  // component connected.
  bool changed = false;
  for (auto i : doomed) {
    const int c = static_cast<int>(i % w);
    const int r = static_cast<int>(i / w);
    const auto p = ring(m, c, r);
    int b = 0;
    for (int v : p) b += v;
    if (b < 2 || connectivity_number(p) != 1) continue;
    m.bits()[i] = 0;
    changed = true;
  }
  return changed;
}

bool staircase_pass(BinaryMask& m) {
  bool changed = false;
  for (int r = 0; r < m.height(); ++r) {
    for (int c = 0; c < m.width(); ++c) {
      if (!m.at(c, r)) continue;
      const auto p = ring(m, c, r);
      int b = 0;
      for (int v : p) b += v;
      if (b < 2) continue;
      const bool corner = (p[0] && p[2]) || (p[2] && p[4]) || (p[4] && p[6]) || (p[6] && p[0]);
      if (!corner || connectivity_number(p) != 1) continue;
      m.set(c, r, false);
      changed = true;
    }
  }
  return changed;
}

std::size_t pixel_index(const BinaryMask& m, Pixel p) {
  return static_cast<std::size_t>(p.row) * static_cast<std::size_t>(m.width()) +
         static_cast<std::size_t>(p.col);
}

Point centre(Pixel p) { return {static_cast<double>(p.col), static_cast<double>(p.row)}; }

}  // namespace

BinaryMask thin(const BinaryMask& mask) {
  BinaryMask m = mask;
  bool changed = true;
  while (changed) {
    changed = false;
    while (true) {
      const bool a = zhang_suen_pass(m, true);
      const bool b = zhang_suen_pass(m, false);
      if (!a && !b) break;
      changed = true;
    }
    if (staircase_pass(m)) changed = true;
  }
  return m;
}

std::vector<Pixel> m_neighbors(const BinaryMask& mask, Pixel p) {
  // E, SE, S, SW, W, NW, N, NE
  static constexpr std::array<std::array<int, 2>, 8> order = {{
      {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}}};
  std::vector<Pixel> out;
  for (const auto& d : order) {
    const int c = p.col + d[0];
    const int r = p.row + d[1];
    if (!mask.get(c, r)) continue;
    if (d[0] != 0 && d[1] != 0) {
      if (mask.get(p.col + d[0], p.row) || mask.get(p.col, p.row + d[1])) continue;
    }
    out.push_back({c, r});
  }
  return out;
}

std::vector<PixelChain> trace_chains(const BinaryMask& skel, std::vector<Pixel>* nodes_out) {
  const int w = skel.width();
  const int h = skel.height();
  const std::size_t n = skel.size();
  std::vector<std::uint8_t> degree(n, 0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (skel.at(c, r)) degree[pixel_index(skel, {c, r})] = static_cast<std::uint8_t>(m_neighbors(skel, {c, r}).size());
    }
  }
  std::vector<char> is_node(n, 0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::size_t i = pixel_index(skel, {c, r});
      if (skel.at(c, r) && degree[i] != 2) is_node[i] = 1;
    }
  }

  // Components with no node pixel are pure cycles: anchor each at its first
  // pixel in row-major order.
  {
    std::vector<char> seen(n, 0);
    std::vector<Pixel> stack;
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const std::size_t i = pixel_index(skel, {c, r});
        if (!skel.at(c, r) || seen[i]) continue;
        bool has_node = false;
        seen[i] = 1;
        stack.push_back({c, r});
        while (!stack.empty()) {
          const Pixel p = stack.back();
          stack.pop_back();
          has_node = has_node || is_node[pixel_index(skel, p)];
          for (const Pixel q : m_neighbors(skel, p)) {
            const std::size_t qi = pixel_index(skel, q);
            if (!seen[qi]) {
              seen[qi] = 1;
              stack.push_back(q);
            }
          }
        }
        if (!has_node) is_node[i] = 1;
      }
    }
  }

  std::vector<Pixel> nodes;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (is_node[pixel_index(skel, {c, r})]) nodes.push_back({c, r});
    }
  }

  std::vector<char> visited(n, 0);
  std::vector<PixelChain> chains;
  for (const Pixel start : nodes) {
    const std::size_t si = pixel_index(skel, start);
    for (const Pixel first : m_neighbors(skel, start)) {
      const std::size_t fi = pixel_index(skel, first);
      if (is_node[fi]) {
        if (si < fi) chains.push_back({start, first});
        continue;
      }
      if (visited[fi]) continue;
      PixelChain chain{start, first};
      visited[fi] = 1;
      Pixel prev = start;
      Pixel cur = first;
      while (true) {
        const auto nb = m_neighbors(skel, cur);
        if (nb.size() != 2) throw InvariantError("chain pixel without mixed degree 2");
        const Pixel next = nb[0] == prev ? nb[1] : nb[0];
        chain.push_back(next);
        const std::size_t ni = pixel_index(skel, next);
        if (is_node[ni]) break;
        if (visited[ni]) throw InvariantError("chain re-entered a traced pixel");
        visited[ni] = 1;
        prev = cur;
        cur = next;
      }
      chains.push_back(std::move(chain));
    }
  }
  if (nodes_out) *nodes_out = std::move(nodes);
  return chains;
}

graph::RoadGraph extract_graph(const BinaryMask& skel) {
  std::vector<Pixel> nodes;
  const auto chains = trace_chains(skel, &nodes);
  graph::RoadGraph g(Units::Pixels);
  std::vector<graph::NodeId> ids(skel.size(), -1);
  for (const Pixel p : nodes) ids[pixel_index(skel, p)] = g.add_node(centre(p));
  for (const auto& chain : chains) {
    std::vector<Point> geom;
    geom.reserve(chain.size());
    for (const Pixel p : chain) geom.push_back(centre(p));
    g.add_edge(ids[pixel_index(skel, chain.front())], ids[pixel_index(skel, chain.back())], std::move(geom));
  }
  return g;
}

std::vector<Point> simplify_rdp(std::span<const Point> polyline, double epsilon) {
  if (polyline.size() < 2) throw InputError("polyline simplification needs >= 2 points");
  if (!(epsilon >= 0.0)) throw InputError("simplification epsilon must be >= 0");
  std::vector<char> keep(polyline.size(), 0);
  keep.front() = keep.back() = 1;
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, polyline.size() - 1}};
  while (!stack.empty()) {
    const auto [first, last] = stack.back();
    stack.pop_back();
    double dmax = -1.0;
    std::size_t imax = first;
    for (std::size_t i = first + 1; i < last; ++i) {
      const double d = point_segment_distance(polyline[i], polyline[first], polyline[last]);
      if (d > dmax) {
        dmax = d;
        imax = i;
      }
    }
    if (imax != first && dmax > epsilon) {
      keep[imax] = 1;
      stack.emplace_back(first, imax);
      stack.emplace_back(imax, last);
    }
  }
  std::vector<Point> out;
  for (std::size_t i = 0; i < polyline.size(); ++i) {
    if (keep[i]) out.push_back(polyline[i]);
  }
  return out;
}

graph::RoadGraph mask_to_graph(const BinaryMask& mask, const GraphBuildParams& params) {
  const BinaryMask grown = raster::dilate(mask, raster::StructuringElement(params.kernel),
                                          params.dilate_iterations);
  const graph::RoadGraph traced = extract_graph(thin(grown));
  graph::RoadGraph g(traced.units());
  for (const auto& n : traced.nodes()) g.add_node(n.id, n.pos);
  for (const auto& e : traced.edges()) {
    auto pts = simplify_rdp(e.geometry, params.rdp_epsilon);
    // A loop smaller than epsilon collapses onto its anchor.
    if (polyline_length(pts) > 0.0) g.add_edge(e.id, e.a, e.b, std::move(pts));
  }
  return g.without_isolated_nodes();
}

}  // namespace dimap::skeleton

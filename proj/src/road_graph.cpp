#include "dimap/road_graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <set>
#include <tuple>

#include "dimap/errors.hpp"
#include "spatial_hash.hpp"

namespace dimap::graph {

namespace {

bool near_equal(Point a, Point b) {
  const double scale = 1.0 + std::max({std::abs(a.x), std::abs(a.y), std::abs(b.x), std::abs(b.y)});
  return std::abs(a.x - b.x) <= 1e-9 * scale && std::abs(a.y - b.y) <= 1e-9 * scale;
}

void check_same_frame(Units a, Units b) {
  if (a != b) {
    throw InputError("graphs are in different frames: " + std::string(to_string(a)) + " vs " +
                     std::string(to_string(b)));
  }
}

// Appends pts to dst, skipping a leading point equal to dst's last point.
void append_joined(std::vector<Point>& dst, const std::vector<Point>& pts) {
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i == 0 && !dst.empty() && dst.back() == pts[0]) continue;
    dst.push_back(pts[i]);
  }
}

std::vector<SubSegment> slice_edge(const Edge& e, double l) {
  const auto& pts = e.geometry;
  const double total = e.length;
  const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(total / l - 1e-9)));

  std::vector<SubSegment> out;
  out.reserve(n);
  auto finish = [&](std::vector<Point>& cur, double len) {
    SubSegment s{e.id, out.size(), cur.front(), cur.back(), len, std::move(cur)};
    out.push_back(std::move(s));
    cur.clear();
  };

  std::vector<Point> cur{pts.front()};
  std::size_t k = 1;
  auto next_cut = [&] { return k < n ? static_cast<double>(k) * l : std::numeric_limits<double>::infinity(); };
  double s0 = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double seg = distance(pts[i - 1], pts[i]);
    const double s1 = s0 + seg;
    while (next_cut() < s1) {
      const double t = (next_cut() - s0) / seg;
      const Point p{pts[i - 1].x + t * (pts[i].x - pts[i - 1].x),
                    pts[i - 1].y + t * (pts[i].y - pts[i - 1].y)};
      cur.push_back(p);
      finish(cur, l);
      cur.push_back(p);
      ++k;
    }
    if (cur.back() != pts[i]) cur.push_back(pts[i]);
    if (next_cut() == s1 && i + 1 < pts.size()) {
      finish(cur, l);
      cur.push_back(pts[i]);
      ++k;
    }
    s0 = s1;
  }
  const double last = total - static_cast<double>(out.size()) * l;
  finish(cur, out.empty() ? total : last);
  if (out.size() != n) {
    throw InvariantError("edge " + std::to_string(e.id) + " sliced into " +
                         std::to_string(out.size()) + " pieces, expected " + std::to_string(n));
  }
  return out;
}

}  // namespace

NodeId RoadGraph::add_node(Point pos) {
  const NodeId id = next_node_;
  add_node(id, pos);
  return id;
}

void RoadGraph::add_node(NodeId id, Point pos) {
  if (!std::isfinite(pos.x) || !std::isfinite(pos.y)) throw InputError("node coordinates must be finite");
  if (node_index_.contains(id)) throw InputError("duplicate node id " + std::to_string(id));
  node_index_.emplace(id, nodes_.size());
  nodes_.push_back(Node{id, pos});
  next_node_ = std::max(next_node_, id + 1);
}

EdgeId RoadGraph::add_edge(NodeId a, NodeId b, std::vector<Point> geometry) {
  const EdgeId id = next_edge_;
  add_edge(id, a, b, std::move(geometry));
  return id;
}

void RoadGraph::add_edge(EdgeId id, NodeId a, NodeId b, std::vector<Point> geometry) {
  if (edge_index_.contains(id)) throw InputError("duplicate edge id " + std::to_string(id));
  if (!has_node(a) || !has_node(b)) {
    throw InputError("edge " + std::to_string(id) + " references a missing node");
  }
  if (geometry.size() < 2) throw InputError("edge " + std::to_string(id) + " needs >= 2 points");
  const Point pa = node(a).pos;
  const Point pb = node(b).pos;
  if (!near_equal(geometry.front(), pa) || !near_equal(geometry.back(), pb)) {
    throw InputError("edge " + std::to_string(id) + " geometry does not start/end at its nodes");
  }
  geometry.front() = pa;
  geometry.back() = pb;
  const double len = polyline_length(geometry);
  if (!(len > 0.0)) throw InputError("edge " + std::to_string(id) + " has zero length");
  edge_index_.emplace(id, edges_.size());
  edges_.push_back(Edge{id, a, b, std::move(geometry), len});
  next_edge_ = std::max(next_edge_, id + 1);
}

EdgeId RoadGraph::connect(NodeId a, NodeId b) {
  return add_edge(a, b, {node(a).pos, node(b).pos});
}

const Node& RoadGraph::node(NodeId id) const {
  auto it = node_index_.find(id);
  if (it == node_index_.end()) throw InputError("unknown node id " + std::to_string(id));
  return nodes_[it->second];
}

std::size_t RoadGraph::degree(NodeId id) const {
  (void)node(id);
  std::size_t d = 0;
  for (const auto& e : edges_) d += (e.a == id) + (e.b == id);
  return d;
}

double RoadGraph::total_length() const {
  double t = 0.0;
  for (const auto& e : edges_) t += e.length;
  return t;
}

RoadGraph RoadGraph::without_isolated_nodes() const {
  std::set<NodeId> used;
  for (const auto& e : edges_) {
    used.insert(e.a);
    used.insert(e.b);
  }
  RoadGraph out(units_);
  for (const auto& n : nodes_) {
    if (used.contains(n.id)) out.add_node(n.id, n.pos);
  }
  for (const auto& e : edges_) out.add_edge(e.id, e.a, e.b, e.geometry);
  return out;
}

bool operator==(const RoadGraph& x, const RoadGraph& y) {
  if (x.units_ != y.units_ || x.nodes_.size() != y.nodes_.size() ||
      x.edges_.size() != y.edges_.size()) {
    return false;
  }
  for (std::size_t i = 0; i < x.nodes_.size(); ++i) {
    if (x.nodes_[i].id != y.nodes_[i].id || x.nodes_[i].pos != y.nodes_[i].pos) return false;
  }
  for (std::size_t i = 0; i < x.edges_.size(); ++i) {
    const Edge& a = x.edges_[i];
    const Edge& b = y.edges_[i];
    if (a.id != b.id || a.a != b.a || a.b != b.b || a.geometry != b.geometry) return false;
  }
  return true;
}

SlicedGraph slice_edges(const RoadGraph& g, double l) {
  if (!(l > 0.0) || !std::isfinite(l)) throw InputError("slice length must be > 0");
  SlicedGraph out;
  out.slice_length = l;
  out.units = g.units();
  for (const auto& e : g.edges()) {
    auto pieces = slice_edge(e, l);
    std::move(pieces.begin(), pieces.end(), std::back_inserter(out.sub_segments));
  }
  return out;
}

double subsegment_distance(const SubSegment& a, const SubSegment& b) {
  const double straight = std::max(distance(a.v1, b.v1), distance(a.v2, b.v2));
  const double crossed = std::max(distance(a.v1, b.v2), distance(a.v2, b.v1));
  return std::min(straight, crossed);
}

Correspondence match_subsegments(const SlicedGraph& a, const SlicedGraph& b,
                                 std::optional<double> radius) {
  const double l = a.slice_length;
  if (std::abs(l - b.slice_length) > 1e-12 * std::max(l, b.slice_length)) {
    throw InputError("sub-segment graphs sliced with different lengths");
  }
  check_same_frame(a.units, b.units);
  const double r = radius.value_or(l / 2.0);
  if (!(r > 0.0)) throw InputError("match radius must be > 0");

  // Either pairing puts a.v1 next to one of b's vertices, so indexing both
  // vertices of b and querying around a.v1 finds every admissible candidate.
  SpatialHashGrid grid(l > 0.0 ? l : r);
  for (std::size_t j = 0; j < b.sub_segments.size(); ++j) {
    grid.insert(b.sub_segments[j].v1, j);
    grid.insert(b.sub_segments[j].v2, j);
  }

  std::vector<std::tuple<double, std::size_t, std::size_t>> admissible;
  std::vector<std::size_t> cand;
  for (std::size_t i = 0; i < a.sub_segments.size(); ++i) {
    const SubSegment& sa = a.sub_segments[i];
    cand.clear();
    grid.query(sa.v1, r, cand);
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
    for (std::size_t j : cand) {
      const double d = subsegment_distance(sa, b.sub_segments[j]);
      if (d < r) admissible.emplace_back(d, i, j);
    }
  }
  std::sort(admissible.begin(), admissible.end());

  std::vector<char> used_a(a.sub_segments.size(), 0);
  std::vector<char> used_b(b.sub_segments.size(), 0);
  Correspondence c;
  for (const auto& [d, i, j] : admissible) {
    if (used_a[i] || used_b[j]) continue;
    used_a[i] = used_b[j] = 1;
    c.pairs.emplace_back(i, j);
  }
  std::sort(c.pairs.begin(), c.pairs.end());
  for (std::size_t i = 0; i < used_a.size(); ++i) {
    if (!used_a[i]) c.unmatched_a.push_back(i);
  }
  for (std::size_t j = 0; j < used_b.size(); ++j) {
    if (!used_b[j]) c.unmatched_b.push_back(j);
  }
  return c;
}

RoadGraph remove_subsegments(const RoadGraph& g, const SlicedGraph& sliced,
                             std::span<const std::size_t> removed) {
  const auto& subs = sliced.sub_segments;
  std::vector<char> drop(subs.size(), 0);
  for (std::size_t idx : removed) {
    if (idx >= subs.size()) {
      throw InputError("sub-segment index " + std::to_string(idx) + " out of range");
    }
    drop[idx] = 1;
  }

  NodeId next_node = 0;
  for (const auto& n : g.nodes()) next_node = std::max(next_node, n.id + 1);
  EdgeId next_edge = 0;
  for (const auto& e : g.edges()) next_edge = std::max(next_edge, e.id + 1);

  struct PendingEdge {
    EdgeId id;
    NodeId a;
    NodeId b;
    std::vector<Point> geometry;
  };
  std::vector<PendingEdge> edges;
  std::vector<Node> new_nodes;

  std::size_t pos = 0;
  for (const auto& e : g.edges()) {
    const std::size_t begin = pos;
    while (pos < subs.size() && subs[pos].parent_edge == e.id) ++pos;
    if (pos == begin) throw InputError("sliced graph does not match edge " + std::to_string(e.id));
    const std::size_t end = pos;

    if (std::none_of(drop.begin() + begin, drop.begin() + end, [](char c) { return c != 0; })) {
      edges.push_back({e.id, e.a, e.b, e.geometry});
      continue;
    }
    std::size_t k = begin;
    while (k < end) {
      if (drop[k]) {
        ++k;
        continue;
      }
      const std::size_t run_begin = k;
      std::vector<Point> geom;
      while (k < end && !drop[k]) append_joined(geom, subs[k++].geometry);
      NodeId a = e.a;
      NodeId b = e.b;
      if (run_begin != begin) {
        a = next_node++;
        new_nodes.push_back({a, geom.front()});
      }
      if (k != end) {
        b = next_node++;
        new_nodes.push_back({b, geom.back()});
      }
      edges.push_back({next_edge++, a, b, std::move(geom)});
    }
  }
  if (pos != subs.size()) throw InputError("sliced graph has sub-segments of unknown edges");

  std::set<NodeId> touched_before;
  for (const auto& e : g.edges()) {
    touched_before.insert(e.a);
    touched_before.insert(e.b);
  }
  std::set<NodeId> touched_after;
  for (const auto& e : edges) {
    touched_after.insert(e.a);
    touched_after.insert(e.b);
  }

  RoadGraph out(g.units());
  for (const auto& n : g.nodes()) {
    // Drop only nodes whose last edge was removed; isolated inputs pass through.
    if (touched_before.contains(n.id) && !touched_after.contains(n.id)) continue;
    out.add_node(n.id, n.pos);
  }
  for (const auto& n : new_nodes) out.add_node(n.id, n.pos);
  for (auto& e : edges) out.add_edge(e.id, e.a, e.b, std::move(e.geometry));
  return out;
}

std::vector<std::size_t> changed_subsegments(const RoadGraph& osm, const RoadGraph& change,
                                             double l, std::optional<double> radius) {
  check_same_frame(osm.units(), change.units());
  const SlicedGraph so = slice_edges(osm, l);
  const SlicedGraph sc = slice_edges(change, l);
  const Correspondence c = match_subsegments(so, sc, radius);
  std::vector<std::size_t> out;
  out.reserve(c.pairs.size());
  for (const auto& p : c.pairs) out.push_back(p.first);
  return out;
}

RoadGraph register_diff(const RoadGraph& osm, const RoadGraph& change, double l,
                        std::optional<double> radius) {
  const auto removed = changed_subsegments(osm, change, l, radius);
  return remove_subsegments(osm, slice_edges(osm, l), removed);
}

std::vector<double> shortest_path_lengths(const RoadGraph& g, NodeId src) {
  const auto& nodes = g.nodes();
  std::unordered_map<NodeId, std::size_t> index;
  for (std::size_t i = 0; i < nodes.size(); ++i) index.emplace(nodes[i].id, i);
  auto it = index.find(src);
  if (it == index.end()) throw InputError("unknown node id " + std::to_string(src));

  std::vector<std::vector<std::pair<std::size_t, double>>> adj(nodes.size());
  for (const auto& e : g.edges()) {
    if (e.a == e.b) continue;
    const std::size_t ia = index.at(e.a);
    const std::size_t ib = index.at(e.b);
    adj[ia].emplace_back(ib, e.length);
    adj[ib].emplace_back(ia, e.length);
  }

  std::vector<double> dist(nodes.size(), std::numeric_limits<double>::infinity());
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[it->second] = 0.0;
  pq.emplace(0.0, it->second);
  while (!pq.empty()) {
    const auto [d, u] = pq.top();
    pq.pop();
    if (d > dist[u]) continue;
    for (const auto& [v, w] : adj[u]) {
      if (d + w < dist[v]) {
        dist[v] = d + w;
        pq.emplace(dist[v], v);
      }
    }
  }
  return dist;
}

std::optional<double> shortest_path_length(const RoadGraph& g, NodeId src, NodeId dst) {
  if (!g.has_node(dst)) throw InputError("unknown node id " + std::to_string(dst));
  const auto dist = shortest_path_lengths(g, src);
  for (std::size_t i = 0; i < g.nodes().size(); ++i) {
    if (g.nodes()[i].id == dst) {
      if (std::isinf(dist[i])) return std::nullopt;
      return dist[i];
    }
  }
  return std::nullopt;
}

RoadGraph graph_from_polylines(std::span<const std::vector<Point>> polylines, Units units) {
  using Key = std::pair<double, double>;
  std::map<Key, int> occurrences;
  std::map<Key, bool> endpoint;
  std::vector<std::vector<Point>> cleaned;
  for (const auto& pl : polylines) {
    std::vector<Point> c;
    for (const auto& p : pl) {
      if (c.empty() || c.back() != p) c.push_back(p);
    }
    if (c.size() < 2) continue;
    for (const auto& p : c) ++occurrences[{p.x, p.y}];
    endpoint[{c.front().x, c.front().y}] = true;
    endpoint[{c.back().x, c.back().y}] = true;
    cleaned.push_back(std::move(c));
  }

  RoadGraph g(units);
  std::map<Key, NodeId> ids;
  auto node_at = [&](Point p) {
    const Key k{p.x, p.y};
    auto it = ids.find(k);
    if (it != ids.end()) return it->second;
    const NodeId id = g.add_node(p);
    ids.emplace(k, id);
    return id;
  };
  auto is_node = [&](Point p) {
    const Key k{p.x, p.y};
    return endpoint.contains(k) || occurrences[k] >= 2;
  };

  for (const auto& pl : cleaned) {
    std::vector<Point> piece{pl.front()};
    NodeId start = node_at(pl.front());
    for (std::size_t i = 1; i < pl.size(); ++i) {
      piece.push_back(pl[i]);
      if (i + 1 == pl.size() || is_node(pl[i])) {
        const NodeId end = node_at(pl[i]);
        if (polyline_length(piece) > 0.0) g.add_edge(start, end, piece);
        piece = {pl[i]};
        start = end;
      }
    }
  }
  return g;
}

}  // namespace dimap::graph

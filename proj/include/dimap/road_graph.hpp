#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dimap/geometry.hpp"

namespace dimap::graph {

using NodeId = std::int64_t;
using EdgeId = std::int64_t;

struct Node {
  NodeId id;
  Point pos;
};

struct Edge {
  EdgeId id;
  NodeId a;
  NodeId b;
  std::vector<Point> geometry;  // first point at node a, last at node b
  double length;                // arc length of geometry
};

// Spatial road network. Nodes and edges keep insertion order, which is the
// order used by slicing and serialization.
class RoadGraph {
 public:
  explicit RoadGraph(Units units = Units::Pixels) : units_(units) {}

  Units units() const { return units_; }

  NodeId add_node(Point pos);
  void add_node(NodeId id, Point pos);

  // The geometry must start at a's position and end at b's position (within
  // 1e-9) and have positive length. The endpoints are snapped exactly.
  EdgeId add_edge(NodeId a, NodeId b, std::vector<Point> geometry);
  void add_edge(EdgeId id, NodeId a, NodeId b, std::vector<Point> geometry);
  // Straight two-point edge.
  EdgeId connect(NodeId a, NodeId b);

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  bool empty() const { return nodes_.empty() && edges_.empty(); }

  bool has_node(NodeId id) const { return node_index_.contains(id); }
  const Node& node(NodeId id) const;
  std::size_t degree(NodeId id) const;

  double total_length() const;

  // Returns a copy without nodes that no edge touches.
  RoadGraph without_isolated_nodes() const;

  // Rebuilds every edge geometry through fn (e.g. simplification), keeping ids.
  template <typename Fn>
  RoadGraph map_geometry(Fn&& fn) const {
    RoadGraph out(units_);
    for (const auto& n : nodes_) out.add_node(n.id, n.pos);
    for (const auto& e : edges_) out.add_edge(e.id, e.a, e.b, fn(e.geometry));
    return out;
  }

  RoadGraph with_units(Units units) const {
    RoadGraph g = *this;
    g.units_ = units;
    return g;
  }

  friend bool operator==(const RoadGraph& x, const RoadGraph& y);

 private:
  Units units_;
  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::unordered_map<NodeId, std::size_t> node_index_;
  std::unordered_map<EdgeId, std::size_t> edge_index_;
  NodeId next_node_ = 0;
  EdgeId next_edge_ = 0;
};

struct SubSegment {
  EdgeId parent_edge;
  std::size_t piece;  // position along the parent edge, from node a
  Point v1;
  Point v2;
  double length;
  std::vector<Point> geometry;  // v1 ... v2 along the parent polyline
};

struct SlicedGraph {
  std::vector<SubSegment> sub_segments;
  double slice_length = 0.0;
  Units units = Units::Pixels;
};

// Cuts every edge into ceil(L/l) pieces of arc length l, the last one taking
// the remainder. Sub-segments are ordered by edge, then along the edge.
SlicedGraph slice_edges(const RoadGraph& g, double l);

struct Correspondence {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (index in a, index in b), sorted by a
  std::vector<std::size_t> unmatched_a;
  std::vector<std::size_t> unmatched_b;
};

// Distance between two sub-segments under the better of the two vertex
// pairings: min over pairings of the larger vertex distance.
double subsegment_distance(const SubSegment& a, const SubSegment& b);

// Pairs sub-segments whose vertices lie pairwise closer than radius (default
// l/2). Each sub-segment is matched at most once; admissible pairs are taken
// greedily by increasing distance, ties by lower (a, b) index.
Correspondence match_subsegments(const SlicedGraph& a, const SlicedGraph& b,
                                 std::optional<double> radius = std::nullopt);

// Rebuilds g without the listed sub-segments of sliced (which must come from
// slice_edges(g, ...)). Edges are split at the removed spans, new boundary
// nodes take fresh ids and nodes left without edges are dropped.
RoadGraph remove_subsegments(const RoadGraph& g, const SlicedGraph& sliced,
                             std::span<const std::size_t> removed);

// Indices into slice_edges(osm, l) of the sub-segments that correspond to a
// sub-segment of the change graph.
std::vector<std::size_t> changed_subsegments(const RoadGraph& osm, const RoadGraph& change,
                                             double l, std::optional<double> radius = std::nullopt);

// OSM graph with every sub-segment that corresponds to the change graph removed.
RoadGraph register_diff(const RoadGraph& osm, const RoadGraph& change, double l,
                        std::optional<double> radius = std::nullopt);

// Dijkstra over edge lengths. nullopt when dst is unreachable.
std::optional<double> shortest_path_length(const RoadGraph& g, NodeId src, NodeId dst);

// Single-source distances indexed like g.nodes(); unreachable entries are +inf.
std::vector<double> shortest_path_lengths(const RoadGraph& g, NodeId src);

// Builds a graph from polylines. Polyline endpoints and vertices shared by
// several polylines (exact coordinate equality) become nodes; polylines are
// split at those nodes. Zero-length pieces are dropped.
RoadGraph graph_from_polylines(std::span<const std::vector<Point>> polylines, Units units);

// GeoJSON FeatureCollection: one LineString per edge with properties
// edge_id, node_a, node_b, length; isolated nodes as Points with node_id;
// the frame in a top-level "units" member and node order in "node_order".
std::string to_geojson(const RoadGraph& g);
RoadGraph graph_from_geojson(std::string_view text);
// True when the document carries the node/edge properties written by to_geojson.
bool is_graph_geojson(std::string_view text);

}  // namespace dimap::graph

#include <map>
#include <set>
#include <string>

#include "json.hpp"

#include "dimap/errors.hpp"
#include "dimap/road_graph.hpp"

namespace dimap::graph {

using nlohmann::json;

namespace {

json point_json(Point p) { return json::array({p.x, p.y}); }

Point point_from(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() < 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ParseError("expected [x, y] coordinate at " + where);
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

json parse_document(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("malformed JSON at byte " + std::to_string(e.byte) + ": " + e.what());
  }
}

}  // namespace

std::string to_geojson(const RoadGraph& g) {
  json features = json::array();
  std::set<NodeId> used;
  for (const auto& e : g.edges()) {
    used.insert(e.a);
    used.insert(e.b);
    json coords = json::array();
    for (const auto& p : e.geometry) coords.push_back(point_json(p));
    features.push_back({{"type", "Feature"},
                        {"geometry", {{"type", "LineString"}, {"coordinates", coords}}},
                        {"properties",
                         {{"edge_id", e.id}, {"node_a", e.a}, {"node_b", e.b}, {"length", e.length}}}});
  }
  for (const auto& n : g.nodes()) {
    if (used.contains(n.id)) continue;
    features.push_back({{"type", "Feature"},
                        {"geometry", {{"type", "Point"}, {"coordinates", point_json(n.pos)}}},
                        {"properties", {{"node_id", n.id}}}});
  }
  // Node order drives pair sampling and snapping ties downstream, so it is
  // kept explicitly rather than inferred from feature order.
  json order = json::array();
  for (const auto& n : g.nodes()) order.push_back(n.id);
  json doc = {{"type", "FeatureCollection"},
              {"units", std::string(to_string(g.units()))},
              {"node_order", order},
              {"features", features}};
  return doc.dump(1) + "\n";
}

bool is_graph_geojson(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error&) {
    return false;
  }
  if (!doc.is_object() || !doc.contains("features") || !doc["features"].is_array()) return false;
  for (const auto& f : doc["features"]) {
    if (!f.is_object() || !f.contains("properties") || !f["properties"].is_object()) return false;
    const auto& p = f["properties"];
    if (!(p.contains("edge_id") && p.contains("node_a") && p.contains("node_b")) && !p.contains("node_id")) {
      return false;
    }
  }
  return true;
}

RoadGraph graph_from_geojson(std::string_view text) {
  const json doc = parse_document(text);
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" || !doc.contains("features") ||
      !doc["features"].is_array()) {
    throw ParseError("graph document must be a FeatureCollection with a features array");
  }
  const Units units = doc.contains("units") ? units_from_string(doc["units"].get<std::string>()) : Units::Pixels;
  RoadGraph g(units);

  struct PendingEdge {
    EdgeId id;
    NodeId a, b;
    std::vector<Point> geometry;
  };
  std::vector<PendingEdge> edges;
  std::map<NodeId, Point> seen;
  std::vector<NodeId> order;
  auto note_node = [&](NodeId id, Point p, const std::string& where) {
    auto it = seen.find(id);
    if (it == seen.end()) {
      seen.emplace(id, p);
      order.push_back(id);
    } else if (it->second != p) {
      throw ParseError("node " + std::to_string(id) + " has inconsistent coordinates at " + where);
    }
  };

  const auto& features = doc["features"];
  for (std::size_t i = 0; i < features.size(); ++i) {
    const std::string where = "/features/" + std::to_string(i);
    const auto& f = features[i];
    if (!f.is_object() || !f.contains("geometry") || !f.contains("properties")) {
      throw ParseError("feature without geometry/properties at " + where);
    }
    const auto& geom = f["geometry"];
    const auto& props = f["properties"];
    const std::string type = geom.value("type", "");
    try {
      if (type == "LineString") {
        std::vector<Point> pts;
        const auto& coords = geom.at("coordinates");
        for (std::size_t k = 0; k < coords.size(); ++k) {
          pts.push_back(point_from(coords[k], where + "/geometry/coordinates/" + std::to_string(k)));
        }
        if (pts.size() < 2) throw ParseError("LineString with fewer than 2 points at " + where);
        const NodeId a = props.at("node_a").get<NodeId>();
        const NodeId b = props.at("node_b").get<NodeId>();
        note_node(a, pts.front(), where);
        note_node(b, pts.back(), where);
        edges.push_back({props.at("edge_id").get<EdgeId>(), a, b, std::move(pts)});
      } else if (type == "Point") {
        note_node(props.at("node_id").get<NodeId>(), point_from(geom.at("coordinates"), where), where);
      } else {
        throw ParseError("unsupported geometry type '" + type + "' in graph document at " + where);
      }
    } catch (const json::exception& e) {
      throw ParseError("bad graph feature at " + where + ": " + e.what());
    }
  }
  // Without a node_order member, nodes come in order of first appearance.
  if (doc.contains("node_order")) {
    const auto& listed = doc["node_order"];
    if (!listed.is_array()) throw ParseError("node_order must be an array at /node_order");
    std::vector<NodeId> explicit_order;
    for (std::size_t i = 0; i < listed.size(); ++i) {
      if (!listed[i].is_number_integer()) {
        throw ParseError("node id expected at /node_order/" + std::to_string(i));
      }
      const NodeId id = listed[i].get<NodeId>();
      if (!seen.contains(id)) {
        throw ParseError("node " + std::to_string(id) + " has no feature at /node_order/" + std::to_string(i));
      }
      explicit_order.push_back(id);
    }
    if (std::set<NodeId>(explicit_order.begin(), explicit_order.end()).size() != seen.size() ||
        explicit_order.size() != seen.size()) {
      throw ParseError("node_order must list every node exactly once at /node_order");
    }
    order = std::move(explicit_order);
  }
  for (NodeId id : order) g.add_node(id, seen.at(id));
  for (auto& e : edges) g.add_edge(e.id, e.a, e.b, std::move(e.geometry));
  return g;
}

}  // namespace dimap::graph

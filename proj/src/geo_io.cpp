#include "dimap/geo_io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dimap/errors.hpp"
#include "image_io.hpp"
#include "json.hpp"

namespace dimap::geo {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 7> kRoadClasses = {
    "motorway", "trunk", "primary", "secondary", "tertiary", "residential", "service"};

Point coordinate(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() < 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ParseError("expected [x, y] position at " + where);
  }
  const Point p{j[0].get<double>(), j[1].get<double>()};
  if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw ParseError("non-finite coordinate at " + where);
  return p;
}

std::vector<Point> coordinate_list(const json& j, const std::string& where) {
  if (!j.is_array()) throw ParseError("expected a coordinate array at " + where);
  std::vector<Point> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(coordinate(j[i], where + "/" + std::to_string(i)));
  return out;
}

json coords_json(const std::vector<Point>& pts) {
  json a = json::array();
  for (const auto& p : pts) a.push_back(json::array({p.x, p.y}));
  return a;
}

// Tag value as text; absent, null and false count as untagged.
std::string tag_value(const json& props, const char* key) {
  if (!props.is_object() || !props.contains(key)) return {};
  const json& v = props[key];
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "yes" : "";
  if (v.is_number()) return v.dump();
  return {};
}

void add_polygon(VectorLayer& layer, const json& rings, const std::string& tag, const std::string& where,
                 std::vector<std::string>& warnings) {
  if (!rings.is_array() || rings.empty()) throw ParseError("expected polygon rings at " + where);
  Building b{{}, tag};
  for (std::size_t r = 0; r < rings.size(); ++r) {
    auto ring = coordinate_list(rings[r], where + "/" + std::to_string(r));
    if (ring.size() < 4 || ring.front() != ring.back()) {
      warnings.push_back("skipped polygon with an open or degenerate ring at " + where);
      return;
    }
    b.rings.push_back(std::move(ring));
  }
  layer.buildings.push_back(std::move(b));
}

// Even-odd crossings of the horizontal line through y with all rings.
std::vector<double> scanline_crossings(const std::vector<std::vector<Point>>& rings, double y) {
  std::vector<double> xs;
  for (const auto& ring : rings) {
    for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
      const Point p = ring[i];
      const Point q = ring[i + 1];
      if ((p.y > y) != (q.y > y)) xs.push_back(p.x + (y - p.y) * (q.x - p.x) / (q.y - p.y));
    }
  }
  std::sort(xs.begin(), xs.end());
  return xs;
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

}  // namespace

GeoTransform::GeoTransform(double a, double b, double c, double d, double e, double f)
    : a_(a), b_(b), c_(c), d_(d), e_(e), f_(f) {
  for (double v : {a, b, c, d, e, f}) {
    if (!std::isfinite(v)) throw InputError("geotransform coefficients must be finite");
  }
  if (a * e - b * d == 0.0) throw InputError("geotransform is not invertible (a*e - b*d == 0)");
}

Point GeoTransform::pixel_to_world(Point px) const {
  return {a_ * px.x + b_ * px.y + c_, d_ * px.x + e_ * px.y + f_};
}

Point GeoTransform::world_to_pixel(Point world) const {
  const double det = a_ * e_ - b_ * d_;
  const double x = world.x - c_;
  const double y = world.y - f_;
  return {(e_ * x - b_ * y) / det, (a_ * y - d_ * x) / det};
}

bool is_road_class(std::string_view highway) {
  constexpr std::string_view link = "_link";
  if (highway.size() > link.size() && highway.substr(highway.size() - link.size()) == link) {
    highway.remove_suffix(link.size());
  }
  return std::find(kRoadClasses.begin(), kRoadClasses.end(), highway) != kRoadClasses.end();
}

ParsedLayer parse_geojson(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("malformed GeoJSON at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("type") || doc["type"] != "FeatureCollection") {
    throw ParseError("GeoJSON root must be a FeatureCollection at /");
  }
  if (!doc.contains("features") || !doc["features"].is_array()) {
    throw ParseError("FeatureCollection without a features array at /features");
  }

  ParsedLayer out;
  if (doc.contains("units")) {
    if (!doc["units"].is_string()) throw ParseError("units must be a string at /units");
    try {
      out.layer.units = units_from_string(doc["units"].get<std::string>());
    } catch (const InputError& e) {
      throw ParseError(std::string(e.what()) + " at /units");
    }
  }

  const json& features = doc["features"];
  for (std::size_t i = 0; i < features.size(); ++i) {
    const std::string where = "/features/" + std::to_string(i);
    const json& f = features[i];
    if (!f.is_object()) throw ParseError("feature is not an object at " + where);
    if (!f.contains("geometry") || f["geometry"].is_null()) {
      out.warnings.push_back("skipped feature without geometry at " + where);
      continue;
    }
    const json& geom = f["geometry"];
    if (!geom.is_object() || !geom.contains("type") || !geom["type"].is_string()) {
      throw ParseError("geometry without a type at " + where + "/geometry");
    }
    const json props = f.contains("properties") ? f["properties"] : json();
    const std::string type = geom["type"].get<std::string>();
    const std::string cwhere = where + "/geometry/coordinates";
    const json coords = geom.contains("coordinates") ? geom["coordinates"] : json();

    if (type == "LineString" || type == "MultiLineString") {
      const std::string highway = tag_value(props, "highway");
      if (highway.empty() || !is_road_class(highway)) {
        out.warnings.push_back("ignored line feature (highway='" + highway + "') at " + where);
        continue;
      }
      std::vector<std::vector<Point>> lines;
      if (type == "LineString") {
        lines.push_back(coordinate_list(coords, cwhere));
      } else {
        if (!coords.is_array()) throw ParseError("expected line arrays at " + cwhere);
        for (std::size_t k = 0; k < coords.size(); ++k) {
          lines.push_back(coordinate_list(coords[k], cwhere + "/" + std::to_string(k)));
        }
      }
      for (auto& pts : lines) {
        if (pts.size() < 2) {
          out.warnings.push_back("skipped line with fewer than 2 points at " + where);
          continue;
        }
        out.layer.roads.push_back(Road{std::move(pts), highway});
      }
    } else if (type == "Polygon" || type == "MultiPolygon") {
      const std::string building = tag_value(props, "building");
      if (building.empty() || building == "no") {
        out.warnings.push_back("ignored polygon without a building tag at " + where);
        continue;
      }
      if (type == "Polygon") {
        add_polygon(out.layer, coords, building, cwhere, out.warnings);
      } else {
        if (!coords.is_array()) throw ParseError("expected polygon arrays at " + cwhere);
        for (std::size_t k = 0; k < coords.size(); ++k) {
          add_polygon(out.layer, coords[k], building, cwhere + "/" + std::to_string(k), out.warnings);
        }
      }
    } else {
      out.warnings.push_back("skipped unsupported geometry type '" + type + "' at " + where);
    }
  }
  return out;
}

std::string serialize_geojson(const VectorLayer& layer) {
  json features = json::array();
  for (const auto& r : layer.roads) {
    features.push_back({{"type", "Feature"},
                        {"geometry", {{"type", "LineString"}, {"coordinates", coords_json(r.points)}}},
                        {"properties", {{"highway", r.highway}}}});
  }
  for (const auto& b : layer.buildings) {
    json rings = json::array();
    for (const auto& ring : b.rings) rings.push_back(coords_json(ring));
    features.push_back({{"type", "Feature"},
                        {"geometry", {{"type", "Polygon"}, {"coordinates", rings}}},
                        {"properties", {{"building", b.tag}}}});
  }
  json doc = {{"type", "FeatureCollection"},
              {"units", std::string(to_string(layer.units))},
              {"features", features}};
  return doc.dump(1) + "\n";
}

RasterizeResult rasterize(const VectorLayer& layer, const GeoTransform& gt, int width, int height,
                          const RasterizeParams& params) {
  if (!(params.road_buffer >= 0.0)) throw InputError("road buffer must be >= 0");
  if (!(params.gsd > 0.0)) throw InputError("ground sampling distance must be > 0");
  RasterizeResult out{raster::Mask(width, height), {}};
  raster::Mask& mask = out.mask;

  for (std::size_t bi = 0; bi < layer.buildings.size(); ++bi) {
    std::vector<std::vector<Point>> rings;
    double ymin = INFINITY, ymax = -INFINITY;
    for (const auto& ring : layer.buildings[bi].rings) {
      std::vector<Point> px;
      for (const auto& p : ring) {
        px.push_back(gt.world_to_pixel(p));
        ymin = std::min(ymin, px.back().y);
        ymax = std::max(ymax, px.back().y);
      }
      rings.push_back(std::move(px));
    }
    if (rings.empty() || rings.front().size() < 4) {
      out.warnings.push_back("skipped degenerate building " + std::to_string(bi));
      continue;
    }
    const int r0 = std::max(0, static_cast<int>(std::floor(ymin)));
    const int r1 = std::min(height - 1, static_cast<int>(std::ceil(ymax)));
    for (int r = r0; r <= r1; ++r) {
      const auto xs = scanline_crossings(rings, static_cast<double>(r));
      for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
        // Centre c is inside when an odd number of crossings lie strictly to its right.
        const int c0 = std::max(0, static_cast<int>(std::ceil(xs[k])));
        const int c1 = std::min(width - 1, static_cast<int>(std::ceil(xs[k + 1])) - 1);
        for (int c = c0; c <= c1; ++c) mask.set(c, r, 1);
      }
    }
  }

  const double radius = params.road_buffer / params.gsd;
  for (std::size_t ri = 0; ri < layer.roads.size(); ++ri) {
    std::vector<Point> px;
    for (const auto& p : layer.roads[ri].points) px.push_back(gt.world_to_pixel(p));
    if (px.size() < 2 || polyline_length(px) == 0.0) {
      out.warnings.push_back("skipped zero-length road " + std::to_string(ri));
      continue;
    }
    for (std::size_t i = 0; i + 1 < px.size(); ++i) {
      const Point a = px[i];
      const Point b = px[i + 1];
      const int c0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - radius)));
      const int c1 = std::min(width - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + radius)));
      const int r0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - radius)));
      const int r1 = std::min(height - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + radius)));
      for (int r = r0; r <= r1; ++r) {
        for (int c = c0; c <= c1; ++c) {
          if (point_segment_distance({double(c), double(r)}, a, b) <= radius) mask.set(c, r, 2);
        }
      }
    }
  }
  return out;
}

graph::RoadGraph road_graph(const VectorLayer& layer, const GeoTransform& gt) {
  std::vector<std::vector<Point>> lines;
  lines.reserve(layer.roads.size());
  for (const auto& r : layer.roads) {
    std::vector<Point> px;
    for (const auto& p : r.points) px.push_back(gt.world_to_pixel(p));
    lines.push_back(std::move(px));
  }
  return graph::graph_from_polylines(lines, Units::Pixels);
}

std::filesystem::path world_file_path(const std::filesystem::path& raster) {
  std::string ext = raster.extension().string();
  std::filesystem::path out = raster;
  if (ext.size() >= 3) {
    out.replace_extension(std::string{'.', ext[1], ext.back(), 'w'});
  } else {
    out.replace_extension(".wld");
  }
  return out;
}

GeoTransform read_world_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open world file " + path.string());
  std::array<double, 6> v{};
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path.string() + ": expected 6 lines, got " + std::to_string(i));
    const char* begin = line.data();
    const char* end = line.data() + line.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(*begin))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(end[-1]))) --end;
    auto res = std::from_chars(begin, end, v[i]);
    if (res.ec != std::errc() || res.ptr != end) {
      throw ParseError(path.string() + ": line " + std::to_string(i + 1) + " is not a number");
    }
  }
  // Line order: a, d, b, e, c, f.
  return GeoTransform(v[0], v[2], v[4], v[1], v[3], v[5]);
}

void write_world_file(const std::filesystem::path& path, const GeoTransform& gt) {
  std::string text;
  for (double v : {gt.a(), gt.d(), gt.b(), gt.e(), gt.c(), gt.f()}) text += format_double(v) + "\n";
  write_text_file(path, text);
}

GeoRaster read_raster(const std::filesystem::path& path) {
  auto img = detail::read_gray8(path);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    if (img.pixels[i] > raster::kMaxClassCode) {
      throw InputError(path.string() + ": label " + std::to_string(img.pixels[i]) + " at pixel (" +
                       std::to_string(i % img.width) + ", " + std::to_string(i / img.width) +
                       ") is outside {0,1,2}");
    }
  }
  GeoRaster out{raster::Mask(img.width, img.height, std::move(img.pixels)), GeoTransform::identity(), {}};
  const auto wf = world_file_path(path);
  if (std::filesystem::exists(wf)) {
    out.transform = read_world_file(wf);
  } else {
    out.warnings.push_back("no world file " + wf.string() + "; assuming identity geotransform");
  }
  return out;
}

void write_raster(const std::filesystem::path& path, const raster::Mask& mask, const GeoTransform& gt) {
  detail::GrayImage img{mask.width(), mask.height(), {mask.labels().begin(), mask.labels().end()}};
  detail::write_gray8(path, img);
  write_world_file(world_file_path(path), gt);
}

GeoBinaryRaster read_binary_raster(const std::filesystem::path& path) {
  auto img = detail::read_gray8(path);
  for (auto& v : img.pixels) {
    if (v != 0 && v != 1 && v != 255) {
      throw InputError(path.string() + ": binary raster value " + std::to_string(v) + " is not 0, 1 or 255");
    }
    v = v ? 1 : 0;
  }
  GeoBinaryRaster out{raster::BinaryMask(img.width, img.height, std::move(img.pixels)),
                      GeoTransform::identity(), {}};
  const auto wf = world_file_path(path);
  if (std::filesystem::exists(wf)) {
    out.transform = read_world_file(wf);
  } else {
    out.warnings.push_back("no world file " + wf.string() + "; assuming identity geotransform");
  }
  return out;
}

void write_binary_raster(const std::filesystem::path& path, const raster::BinaryMask& mask,
                         const GeoTransform& gt) {
  detail::GrayImage img{mask.width(), mask.height(), {}};
  img.pixels.reserve(mask.size());
  for (auto b : mask.bits()) img.pixels.push_back(b ? 255 : 0);
  detail::write_gray8(path, img);
  write_world_file(world_file_path(path), gt);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace dimap::geo

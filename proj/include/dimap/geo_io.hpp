#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dimap/geometry.hpp"
#include "dimap/raster.hpp"
#include "dimap/road_graph.hpp"

namespace dimap::geo {

// world_x = a*col + b*row + c ; world_y = d*col + e*row + f, where integer
// (col, row) address pixel centres.
class GeoTransform {
 public:
  // Throws InputError when a*e - b*d == 0.
  GeoTransform(double a, double b, double c, double d, double e, double f);

  static GeoTransform identity() { return GeoTransform(1, 0, 0, 0, 1, 0); }

  Point pixel_to_world(Point px) const;
  Point world_to_pixel(Point world) const;

  double a() const { return a_; }
  double b() const { return b_; }
  double c() const { return c_; }
  double d() const { return d_; }
  double e() const { return e_; }
  double f() const { return f_; }

  friend bool operator==(const GeoTransform&, const GeoTransform&) = default;

 private:
  double a_, b_, c_, d_, e_, f_;
};

struct Road {
  std::vector<Point> points;
  std::string highway;
  friend bool operator==(const Road&, const Road&) = default;
};

struct Building {
  std::vector<std::vector<Point>> rings;  // outer ring first, then holes; each closed
  std::string tag = "yes";
  friend bool operator==(const Building&, const Building&) = default;
};

struct VectorLayer {
  Units units = Units::Degrees;
  std::vector<Road> roads;
  std::vector<Building> buildings;
  friend bool operator==(const VectorLayer&, const VectorLayer&) = default;
};

struct ParsedLayer {
  VectorLayer layer;
  std::vector<std::string> warnings;
};

// Road classes kept from OSM: motorway, trunk, primary, secondary, tertiary,
// residential, service and their _link variants.
bool is_road_class(std::string_view highway);

// Reads a GeoJSON FeatureCollection. An optional top-level "units" member
// ("degrees", "meters", "pixels") tags the frame; degrees by default.
ParsedLayer parse_geojson(std::string_view text);
std::string serialize_geojson(const VectorLayer& layer);

struct RasterizeParams {
  double road_buffer = 2.0;  // stroke radius in meters
  double gsd = 0.5;          // meters per pixel
};

struct RasterizeResult {
  raster::Mask mask;
  std::vector<std::string> warnings;
};

// Buildings are filled with the even-odd rule (code 1), then roads are stroked
// with a disc of radius road_buffer / gsd pixels (code 2). A pixel belongs to
// a shape when its centre does.
RasterizeResult rasterize(const VectorLayer& layer, const GeoTransform& gt, int width, int height,
                          const RasterizeParams& params = {});

// Road polylines converted into a pixel-frame graph through gt.
graph::RoadGraph road_graph(const VectorLayer& layer, const GeoTransform& gt);

// Sidecar next to a raster: ".png" -> ".pgw", ".pgm" -> ".pmw".
std::filesystem::path world_file_path(const std::filesystem::path& raster);
GeoTransform read_world_file(const std::filesystem::path& path);
void write_world_file(const std::filesystem::path& path, const GeoTransform& gt);

struct GeoRaster {
  raster::Mask mask;
  GeoTransform transform;
  std::vector<std::string> warnings;
};

struct GeoBinaryRaster {
  raster::BinaryMask mask;
  GeoTransform transform;
  std::vector<std::string> warnings;
};

// 8-bit grayscale PNG or PGM (by extension) holding class codes {0,1,2}, plus
// a world file. A missing world file yields the identity transform and a warning.
GeoRaster read_raster(const std::filesystem::path& path);
void write_raster(const std::filesystem::path& path, const raster::Mask& mask, const GeoTransform& gt);

// Binary masks are stored as {0, 255}; 1 is also read as positive.
GeoBinaryRaster read_binary_raster(const std::filesystem::path& path);
void write_binary_raster(const std::filesystem::path& path, const raster::BinaryMask& mask,
                         const GeoTransform& gt);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace dimap::geo

#include <filesystem>
#include <map>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "dimap/geo_io.hpp"
#include "dimap/road_graph.hpp"
#include "json.hpp"

using namespace dimap;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("dimap_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string s(const fs::path& p) { return p.string(); }

// Every regular file under dir, keyed by relative path.
std::map<std::string, std::string> snapshot(const fs::path& dir, bool skip_manifests = false) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), dir).string();
    if (skip_manifests && rel.find(".manifest.json") != std::string::npos) continue;
    files[rel] = geo::read_text_file(entry.path());
  }
  return files;
}

// Horizontal road band rows 18..22 across a 60x40 raster.
raster::Mask straight_road() {
  raster::Mask m(60, 40);
  for (int y = 18; y <= 22; ++y)
    for (int x = 5; x < 55; ++x) m.set(x, y, 2);
  return m;
}

void write_pixel_graph(const fs::path& path, const graph::RoadGraph& g) {
  geo::write_text_file(path, graph::to_geojson(g));
}

graph::RoadGraph grid_graph() {
  graph::RoadGraph g;
  const auto a = g.add_node({20, 20});
  const auto b = g.add_node({260, 20});
  const auto c = g.add_node({260, 140});
  g.connect(a, b);
  g.connect(b, c);
  return g;
}

}  // namespace

TEST_CASE("usage and input errors exit 2") {
  const auto dir = scratch("errors");
  const auto missing = s(dir / "nope.geojson");
  auto r = invoke({"rasterize", "--geojson", missing, "--out", s(dir / "o.png"), "--width", "4", "--height", "4"});
  CHECK(r.code == cli::kExitInput);
  CHECK(r.err.find(missing) != std::string::npos);

  geo::write_raster(dir / "a.png", raster::Mask(10, 10), geo::GeoTransform::identity());
  geo::write_raster(dir / "b.png", raster::Mask(12, 10), geo::GeoTransform::identity());
  r = invoke({"diff", "--pre", s(dir / "a.png"), "--post", s(dir / "b.png"), "--out-dir", s(dir / "d")});
  CHECK(r.code == cli::kExitInput);

  r = invoke({"evaluate", "--pred", s(dir / "a.png"), "--truth", s(dir / "a.png"), "--mode", "bogus"});
  CHECK(r.code == cli::kExitInput);
  CHECK(r.err.find("bogus") != std::string::npos);

  CHECK(invoke({}).code == cli::kExitInput);
  CHECK(invoke({"frobnicate"}).code == cli::kExitInput);
  CHECK(invoke({"diff", "--pre", s(dir / "a.png")}).code == cli::kExitInput);
  CHECK(invoke({"diff", "--pre", s(dir / "a.png"), "--post", s(dir / "a.png"), "--out-dir", s(dir / "d"),
             "--kernel", "4"}).code == cli::kExitInput);

  r = invoke({"--version"});
  CHECK(r.code == cli::kExitOk);
  CHECK(r.out.find(cli::kVersion) != std::string::npos);
  CHECK(invoke({"--help"}).code == cli::kExitOk);
}

TEST_CASE("rasterize writes mask and world file") {
  const auto dir = scratch("rasterize");
  geo::write_text_file(dir / "osm.geojson", R"({"type":"FeatureCollection","features":[
    {"type":"Feature","properties":{"highway":"residential"},
     "geometry":{"type":"LineString","coordinates":[[100,195],[110,195]]}},
    {"type":"Feature","properties":{"highway":"footpath"},
     "geometry":{"type":"LineString","coordinates":[[100,190],[110,190]]}}]})");
  geo::write_text_file(dir / "foot.geojson", R"({"type":"FeatureCollection","features":[
    {"type":"Feature","properties":{"highway":"footpath"},
     "geometry":{"type":"LineString","coordinates":[[100,190],[110,190]]}}]})");
  const auto r = invoke({"rasterize", "--geojson", s(dir / "osm.geojson"), "--out", s(dir / "m.png"), "--width",
                      "24", "--height", "24", "--gt", "0.5,0,100,0,-0.5,200"});
  REQUIRE(r.code == 0);
  const auto m = geo::read_raster(dir / "m.png");
  CHECK(m.warnings.empty());
  CHECK(m.transform == geo::GeoTransform(0.5, 0, 100, 0, -0.5, 200));
  CHECK(m.mask.at(10, 10) == 2);
  CHECK(m.mask.at(10, 20) == 0);
  CHECK(fs::exists(dir / "m.png.manifest.json"));

  REQUIRE(invoke({"rasterize", "--geojson", s(dir / "foot.geojson"), "--out", s(dir / "f.png"), "--reference",
               s(dir / "m.png")}).code == 0);
  CHECK(geo::read_raster(dir / "f.png").mask == raster::Mask(24, 24));
}

TEST_CASE("diff of identical rasters is empty") {
  const auto dir = scratch("diff");
  geo::write_raster(dir / "pre.png", straight_road(), geo::GeoTransform::identity());
  const auto r = invoke({"diff", "--pre", s(dir / "pre.png"), "--post", s(dir / "pre.png"), "--out-dir",
                      s(dir / "out"), "--cell-size", "16", "--debug"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("changed_pixels=0") != std::string::npos);
  CHECK(geo::read_binary_raster(dir / "out/change.png").mask.empty());
  CHECK(geo::read_binary_raster(dir / "out/road_change.png").mask.empty());
  const auto hm = json::parse(geo::read_text_file(dir / "out/heatmap.json"));
  CHECK(hm["total"] == 0);
  CHECK(hm["cols"] == 4);
  CHECK(hm["rows"] == 3);
  CHECK(fs::exists(dir / "out/debug_raw.png"));
  CHECK(fs::exists(dir / "out/diff.manifest.json"));

  // Removing the road yields a change covering it.
  geo::write_raster(dir / "post.png", raster::Mask(60, 40), geo::GeoTransform::identity());
  REQUIRE(invoke({"diff", "--pre", s(dir / "pre.png"), "--post", s(dir / "post.png"), "--out-dir",
               s(dir / "out2")}).code == 0);
  const auto change = geo::read_binary_raster(dir / "out2/road_change.png").mask;
  CHECK(change.at(30, 20));
  CHECK_FALSE(change.at(30, 5));
}

TEST_CASE("extract-graph examples") {
  const auto dir = scratch("extract");
  geo::write_raster(dir / "road.png", straight_road(), geo::GeoTransform::identity());
  REQUIRE(invoke({"extract-graph", "--mask", s(dir / "road.png"), "--out", s(dir / "g.geojson")}).code == 0);
  const auto g = graph::graph_from_geojson(geo::read_text_file(dir / "g.geojson"));
  CHECK(g.nodes().size() == 2);
  CHECK(g.edges().size() == 1);

  raster::Mask cross(61, 61);
  for (int i = 5; i < 56; ++i)
    for (int t = -2; t <= 2; ++t) cross.set(i, 30 + t, 2), cross.set(30 + t, i, 2);
  geo::write_raster(dir / "cross.png", cross, geo::GeoTransform::identity());
  REQUIRE(invoke({"extract-graph", "--mask", s(dir / "cross.png"), "--out", s(dir / "c.geojson")}).code == 0);
  const auto c = graph::graph_from_geojson(geo::read_text_file(dir / "c.geojson"));
  CHECK(c.nodes().size() == 5);
  CHECK(c.edges().size() == 4);

  geo::write_raster(dir / "empty.png", raster::Mask(20, 20), geo::GeoTransform::identity());
  REQUIRE(invoke({"extract-graph", "--mask", s(dir / "empty.png"), "--out", s(dir / "e.geojson")}).code == 0);
  const auto doc = json::parse(geo::read_text_file(dir / "e.geojson"));
  CHECK(doc["type"] == "FeatureCollection");
  CHECK(doc["features"].empty());
}

TEST_CASE("register with empty and full change") {
  const auto dir = scratch("register");
  const auto osm = grid_graph();
  write_pixel_graph(dir / "osm.geojson", osm);
  write_pixel_graph(dir / "none.geojson", graph::RoadGraph{});
  REQUIRE(invoke({"register", "--osm", s(dir / "osm.geojson"), "--change", s(dir / "none.geojson"), "--out",
               s(dir / "same.geojson")}).code == 0);
  CHECK(graph::graph_from_geojson(geo::read_text_file(dir / "same.geojson")) == osm);

  REQUIRE(invoke({"register", "--osm", s(dir / "osm.geojson"), "--change", s(dir / "osm.geojson"), "--out",
               s(dir / "gone.geojson")}).code == 0);
  CHECK(graph::graph_from_geojson(geo::read_text_file(dir / "gone.geojson")).empty());

  write_pixel_graph(dir / "meters.geojson", osm.with_units(Units::Meters));
  CHECK(invoke({"register", "--osm", s(dir / "osm.geojson"), "--change", s(dir / "meters.geojson"), "--out",
             s(dir / "x.geojson")}).code == cli::kExitInput);
}

TEST_CASE("evaluate modes") {
  const auto dir = scratch("evaluate");
  write_pixel_graph(dir / "t.geojson", grid_graph());
  write_pixel_graph(dir / "empty.geojson", graph::RoadGraph{});
  auto r = invoke({"evaluate", "--mode", "pr", "--pred", s(dir / "t.geojson"), "--truth", s(dir / "t.geojson"),
                "--out", s(dir / "pr.json")});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("f_score=1") != std::string::npos);
  CHECK(json::parse(geo::read_text_file(dir / "pr.json"))["f_score"] == 1.0);

  r = invoke({"evaluate", "--mode", "connectivity", "--pred", s(dir / "empty.geojson"), "--truth",
           s(dir / "t.geojson"), "--pairs", "50"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("no_connection=100") != std::string::npos);

  geo::write_raster(dir / "m.png", straight_road(), geo::GeoTransform::identity());
  r = invoke({"evaluate", "--mode", "iou", "--pred", s(dir / "m.png"), "--truth", s(dir / "m.png")});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("mean_iou=1") != std::string::npos);
}

TEST_CASE("loss command") {
  const auto dir = scratch("loss");
  geo::write_text_file(dir / "inst.txt", "alpha 0\nweights 1 1\npixel 0 0 0\n");
  const auto r = invoke({"loss", "--instance", s(dir / "inst.txt"), "--out", s(dir / "loss.json")});
  REQUIRE(r.code == 0);
  const auto doc = json::parse(geo::read_text_file(dir / "loss.json"));
  CHECK(doc["loss"].get<double>() == doctest::Approx(std::log(2.0)));
  CHECK(doc["gradient"][0][0].get<double>() == doctest::Approx(-0.5));
  geo::write_text_file(dir / "bad.txt", "pixel 5 0 0\n");
  CHECK(invoke({"loss", "--instance", s(dir / "bad.txt")}).code == cli::kExitInput);
}

TEST_CASE("synth with zero damage gives identical masks") {
  const auto dir = scratch("synth0");
  REQUIRE(invoke({"synth", "--out-dir", s(dir), "--seed", "4", "--extent", "256", "--buildings", "6", "--damage",
               "0"}).code == 0);
  CHECK(geo::read_text_file(dir / "pre.png") == geo::read_text_file(dir / "post.png"));
  for (const char* f : {"osm.geojson", "truth.geojson", "truth_post.geojson", "pre.pgw", "damage.txt",
                        "synth.manifest.json"})
    CHECK(fs::exists(dir / f));
  CHECK(geo::parse_geojson(geo::read_text_file(dir / "osm.geojson")).warnings.empty());
}

TEST_CASE("commands are byte-deterministic") {
  const auto dir = scratch("determinism");
  const std::vector<std::string> synth{"synth", "--out-dir", s(dir / "scn"), "--seed", "7", "--extent", "320",
                                       "--buildings", "8", "--slice-length", "60", "--damage", "0.1",
                                       "--gap-fraction", "0.05"};
  const std::vector<std::string> pipeline{"pipeline", "--osm", s(dir / "scn/osm.geojson"), "--post",
                                          s(dir / "scn/post.png"), "--truth", s(dir / "scn/truth_post.geojson"),
                                          "--out-dir", s(dir / "run"), "--slice-length", "60", "--pairs", "200"};
  REQUIRE(invoke(synth).code == 0);
  REQUIRE(invoke(pipeline).code == 0);
  const auto first = snapshot(dir);
  REQUIRE(invoke(synth).code == 0);
  REQUIRE(invoke(pipeline).code == 0);
  CHECK(snapshot(dir) == first);
  CHECK(first.count("run/eval_diff_pr.json") == 1);
  CHECK(first.count("run/pipeline.manifest.json") == 1);

  const auto manifest = json::parse(first.at("run/pipeline.manifest.json"));
  CHECK(manifest["command"] == "pipeline");
  CHECK(manifest["version"] == cli::kVersion);
  CHECK(manifest["inputs"].size() == 3);
  for (const auto& [path, hash] : manifest["inputs"].items()) CHECK(hash.get<std::string>().size() == 64);
}

TEST_CASE("pipeline equals the manual command sequence") {
  const auto dir = scratch("compose");
  REQUIRE(invoke({"synth", "--out-dir", s(dir / "scn"), "--seed", "9", "--extent", "320", "--buildings", "6",
               "--slice-length", "60", "--damage", "0.1"}).code == 0);
  const auto osm = s(dir / "scn/osm.geojson"), post = s(dir / "scn/post.png"),
             truth = s(dir / "scn/truth_post.geojson");
  REQUIRE(invoke({"pipeline", "--osm", osm, "--post", post, "--truth", truth, "--out-dir", s(dir / "auto"),
               "--slice-length", "60"}).code == 0);

  const auto m = dir / "manual";
  auto p = [&](const char* f) { return s(m / f); };
  REQUIRE(invoke({"rasterize", "--geojson", osm, "--reference", post, "--out", p("pre_rasterized.png")}).code == 0);
  REQUIRE(invoke({"diff", "--pre", p("pre_rasterized.png"), "--post", post, "--out-dir", s(m)}).code == 0);
  REQUIRE(invoke({"extract-graph", "--mask", post, "--out", p("post_graph.geojson")}).code == 0);
  REQUIRE(invoke({"extract-graph", "--mask", p("road_change.png"), "--out", p("change_graph.geojson")}).code == 0);
  REQUIRE(invoke({"register", "--osm", osm, "--change", p("change_graph.geojson"), "--reference", post, "--out",
               p("diff_graph.geojson"), "--slice-length", "60"}).code == 0);
  for (const std::string which : {"diff", "post"}) {
    const auto pred = s(m / (which + "_graph.geojson"));
    REQUIRE(invoke({"evaluate", "--mode", "pr", "--pred", pred, "--truth", truth, "--slice-length", "60", "--out",
                 s(m / ("eval_" + which + "_pr.json"))}).code == 0);
    REQUIRE(invoke({"evaluate", "--mode", "connectivity", "--pred", pred, "--truth", truth, "--slice-length", "60",
                 "--out", s(m / ("eval_" + which + "_connectivity.json"))}).code == 0);
  }
  const auto a = snapshot(dir / "auto", true), b = snapshot(m, true);
  CHECK(a.size() == b.size());
  CHECK(a == b);
}

TEST_CASE("config file supplies defaults and the command line wins") {
  const auto dir = scratch("config");
  geo::write_text_file(dir / "run.cfg", "# scenario\nseed = 3\nextent = 200\nbuildings = 2\ndamage = 0\n");
  REQUIRE(invoke({"--config", s(dir / "run.cfg"), "synth", "--out-dir", s(dir / "a")}).code == 0);
  REQUIRE(invoke({"synth", "--out-dir", s(dir / "b"), "--seed", "3", "--extent", "200", "--buildings", "2",
               "--damage", "0"}).code == 0);
  CHECK(snapshot(dir / "a", true) == snapshot(dir / "b", true));

  REQUIRE(invoke({"--config", s(dir / "run.cfg"), "synth", "--out-dir", s(dir / "c"), "--seed", "4"}).code == 0);
  CHECK(geo::read_text_file(dir / "c/damage.txt").find("seed 4\n") == 0);

  geo::write_text_file(dir / "bad.cfg", "no equals sign here\n");
  CHECK(invoke({"--config", s(dir / "bad.cfg"), "synth", "--out-dir", s(dir / "d")}).code == cli::kExitInput);
}

#include "cli.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "dimap/errors.hpp"
#include "dimap/geo_io.hpp"
#include "dimap/metrics.hpp"
#include "dimap/raster.hpp"
#include "dimap/road_graph.hpp"
#include "dimap/seg_loss.hpp"
#include "dimap/skeleton.hpp"
#include "dimap/synth.hpp"
#include "json.hpp"

namespace dimap::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v) {
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

std::string sha256_file(const fs::path& path) {
  const std::string data = geo::read_text_file(path);
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (!EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr)) {
    throw IoError("sha256 failed for " + path.string());
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

// Flags and their effective values, the tool version and input hashes. No
// clock or host data, so reruns reproduce the file.
void write_manifest(const fs::path& path, const CLI::App& cmd, const std::vector<fs::path>& inputs) {
  json options = json::object();
  for (const CLI::Option* opt : cmd.get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config") continue;
    if (opt->count() > 0) {
      const auto& res = opt->results();
      std::string v;
      for (std::size_t i = 0; i < res.size(); ++i) v += (i ? "," : "") + res[i];
      options[name] = v;
    } else {
      options[name] = opt->get_default_str();
    }
  }
  json hashes = json::object();
  for (const auto& p : inputs) hashes[p.string()] = sha256_file(p);
  const json doc = {{"command", cmd.get_name()}, {"version", kVersion}, {"options", options}, {"inputs", hashes}};
  geo::write_text_file(path, doc.dump(1) + "\n");
}

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

void print_warnings(std::ostream& err, const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) err << "warning: " << w << "\n";
}

struct Frame {
  int width;
  int height;
  geo::GeoTransform gt;
};

// Size and geotransform of an existing label or binary raster.
Frame raster_frame(const fs::path& path) {
  try {
    auto r = geo::read_raster(path);
    return {r.mask.width(), r.mask.height(), r.transform};
  } catch (const InputError&) {
    auto r = geo::read_binary_raster(path);
    return {r.mask.width(), r.mask.height(), r.transform};
  }
}

geo::GeoTransform parse_gt(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double x = 0.0;
    auto res = std::from_chars(item.data(), item.data() + item.size(), x);
    if (res.ec != std::errc() || res.ptr != item.data() + item.size()) {
      throw InputError("--gt expects six comma-separated numbers, got '" + text + "'");
    }
    v.push_back(x);
  }
  if (v.size() != 6) throw InputError("--gt expects six comma-separated numbers, got '" + text + "'");
  return geo::GeoTransform(v[0], v[1], v[2], v[3], v[4], v[5]);
}

// Graph GeoJSON is taken as is; an OSM-style layer is converted to the pixel
// frame of the reference raster (or used directly when already in pixels).
graph::RoadGraph load_graph(const fs::path& path, const std::string& reference, std::ostream& err) {
  const std::string text = geo::read_text_file(path);
  if (graph::is_graph_geojson(text)) return graph::graph_from_geojson(text);
  auto parsed = geo::parse_geojson(text);
  print_warnings(err, parsed.warnings);
  if (!reference.empty()) return geo::road_graph(parsed.layer, raster_frame(reference).gt);
  if (parsed.layer.units == Units::Pixels) return geo::road_graph(parsed.layer, geo::GeoTransform::identity());
  throw InputError(path.string() + " is in " + std::string(to_string(parsed.layer.units)) +
                   "; pass --reference RASTER to place it in pixel space");
}

// Road class of a label raster, or the positives of a {0,255} mask.
raster::BinaryMask load_graph_source(const fs::path& path, std::ostream& err) {
  try {
    auto r = geo::read_raster(path);
    print_warnings(err, r.warnings);
    return raster::class_mask(r.mask, 2);
  } catch (const InputError&) {
    auto r = geo::read_binary_raster(path);
    print_warnings(err, r.warnings);
    return r.mask;
  }
}

bool has_raster_ext(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".pgm";
}

// key = value lines become --key=value arguments placed before the explicit
// ones, so the command line wins.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> explicit_args;
  std::optional<std::string> config;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config = args[i].substr(9);
    } else {
      explicit_args.push_back(args[i]);
    }
  }
  if (!config) return args;
  if (explicit_args.empty()) throw InputError("--config needs a command before it");

  std::set<std::string> given;
  for (const auto& a : explicit_args) {
    if (a.rfind("--", 0) == 0) given.insert(a.substr(2, a.find('=') == std::string::npos ? std::string::npos : a.find('=') - 2));
  }
  std::vector<std::string> out{explicit_args.front()};
  std::istringstream in(geo::read_text_file(*config));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InputError(*config + ":" + std::to_string(lineno) + ": expected key = value");
    }
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (given.contains(key)) continue;
    out.push_back("--" + key + "=" + value);
  }
  out.insert(out.end(), explicit_args.begin() + 1, explicit_args.end());
  return out;
}

struct ChangeOptions {
  int kernel = 5;
  int dilate_iterations = 6;
  bool dilate_pre = false;
  int open_kernel = 5;
  std::size_t min_blob_area = 64;
  int cell_size = 64;

  void add(CLI::App* cmd) {
    cmd->add_option("--kernel", kernel, "Dilation kernel side (odd)");
    cmd->add_option("--dilate-iterations", dilate_iterations, "Dilation iterations");
    cmd->add_flag("--dilate-pre", dilate_pre, "Also dilate the pre-disaster masks");
    cmd->add_option("--open-kernel", open_kernel, "Opening kernel side (odd)");
    cmd->add_option("--min-blob-area", min_blob_area, "Smallest change blob kept, in pixels");
    cmd->add_option("--cell-size", cell_size, "Heatmap cell side in pixels");
  }
  std::vector<std::string> args() const {
    std::vector<std::string> a{"--kernel", std::to_string(kernel), "--dilate-iterations",
                               std::to_string(dilate_iterations), "--open-kernel", std::to_string(open_kernel),
                               "--min-blob-area", std::to_string(min_blob_area), "--cell-size",
                               std::to_string(cell_size)};
    if (dilate_pre) a.push_back("--dilate-pre");
    return a;
  }
};

struct GraphOptions {
  int kernel = 5;
  int dilate_iterations = 2;
  double rdp_epsilon = 3.0;

  void add(CLI::App* cmd, const std::string& prefix = "") {
    cmd->add_option("--" + prefix + "kernel", kernel, "Dilation kernel side before thinning");
    cmd->add_option("--" + prefix + "dilate-iterations", dilate_iterations, "Dilation iterations before thinning");
    cmd->add_option("--rdp-epsilon", rdp_epsilon, "Polyline simplification tolerance in pixels");
  }
  skeleton::GraphBuildParams params() const { return {kernel, dilate_iterations, rdp_epsilon}; }
  // Flags as extract-graph spells them.
  std::vector<std::string> args() const {
    return {"--kernel", std::to_string(kernel), "--dilate-iterations", std::to_string(dilate_iterations),
            "--rdp-epsilon", fmt(rdp_epsilon)};
  }
};

struct MatchOptions {
  double slice_length = 40.0;
  double match_radius = -1.0;

  void add(CLI::App* cmd) {
    cmd->add_option("--slice-length", slice_length, "Sub-segment length l in pixels");
    cmd->add_option("--match-radius", match_radius, "Correspondence radius in pixels (negative: l/2)");
  }
  std::optional<double> radius() const {
    return match_radius < 0.0 ? std::nullopt : std::optional<double>(match_radius);
  }
  std::vector<std::string> args() const {
    return {"--slice-length", fmt(slice_length), "--match-radius", fmt(match_radius)};
  }
};

struct ConnOptions {
  std::uint64_t seed = 0;
  std::size_t pairs = 1000;
  double rel_tol = 0.05;
  double snap_radius = -1.0;

  void add(CLI::App* cmd) {
    cmd->add_option("--seed", seed, "Pair sampling seed");
    cmd->add_option("--pairs", pairs, "Number of sampled node pairs");
    cmd->add_option("--rel-tol", rel_tol, "Relative path length tolerance");
    cmd->add_option("--snap-radius", snap_radius, "Node snapping radius in pixels (negative: l/2)");
  }
  std::vector<std::string> args() const {
    return {"--seed", std::to_string(seed), "--pairs", std::to_string(pairs), "--rel-tol", fmt(rel_tol),
            "--snap-radius", fmt(snap_radius)};
  }
};

std::string heatmap_csv(const raster::ChangeHeatmap& hm) {
  std::string out;
  for (int r = 0; r < hm.rows; ++r) {
    for (int c = 0; c < hm.cols; ++c) {
      if (c) out += ',';
      out += std::to_string(hm.at(c, r));
    }
    out += '\n';
  }
  return out;
}

std::string heatmap_json(const raster::ChangeHeatmap& hm) {
  json counts = json::array();
  for (int r = 0; r < hm.rows; ++r) {
    json row = json::array();
    for (int c = 0; c < hm.cols; ++c) row.push_back(hm.at(c, r));
    counts.push_back(row);
  }
  const json doc = {{"cell_size", hm.cell_size}, {"cols", hm.cols}, {"rows", hm.rows},
                    {"total", hm.total()}, {"counts", counts}};
  return doc.dump(1) + "\n";
}

raster::BinaryMask mask_and(const raster::BinaryMask& a, const raster::BinaryMask& b) {
  std::vector<std::uint8_t> bits(a.size());
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = a.bits()[i] && b.bits()[i];
  return raster::BinaryMask(a.width(), a.height(), std::move(bits));
}

struct LoadedLoss {
  loss::LossInstance instance;
  loss::LossParams params;
};

// Lines: "alpha A", optional "weights w0 w1 ...", then one "pixel T s0 s1 ..."
// line per pixel with its target class T and raw scores.
LoadedLoss parse_loss_instance(const fs::path& path) {
  std::istringstream in(geo::read_text_file(path));
  std::string line;
  int lineno = 0;
  loss::LossParams params;
  std::vector<double> scores;
  std::vector<std::size_t> targets;
  std::size_t classes = 0;
  auto fail = [&](const std::string& why) {
    throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    std::vector<double> vals;
    std::string tok;
    while (ls >> tok) {
      double v = 0.0;
      auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) fail("'" + tok + "' is not a number");
      vals.push_back(v);
    }
    if (key == "alpha") {
      if (vals.size() != 1) fail("alpha takes one value");
      params.alpha = vals[0];
    } else if (key == "weights") {
      if (vals.empty()) fail("weights needs at least one value");
      params.weights = vals;
    } else if (key == "pixel") {
      if (vals.size() < 3) fail("pixel needs a target and at least two scores");
      const double t = vals[0];
      if (t < 0 || t != static_cast<double>(static_cast<std::size_t>(t))) fail("target must be a class index");
      if (classes == 0) classes = vals.size() - 1;
      if (vals.size() - 1 != classes) fail("every pixel needs the same number of scores");
      targets.push_back(static_cast<std::size_t>(t));
      scores.insert(scores.end(), vals.begin() + 1, vals.end());
    } else {
      fail("unknown key '" + key + "'");
    }
  }
  if (targets.empty()) throw ParseError(path.string() + ": no pixel lines");
  const std::size_t pixels = targets.size();
  loss::LossInstance inst(pixels, classes, std::move(scores), std::move(targets));
  if (params.weights.empty()) {
    std::vector<double> counts(classes, 0.0);
    for (std::size_t i = 0; i < inst.pixels(); ++i) counts[inst.target(i)] += 1.0;
    for (auto& c : counts) c = std::max(c, 1.0);
    params.weights = loss::class_weights(counts);
  }
  return {std::move(inst), std::move(params)};
}

class Cli {
 public:
  Cli(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

  int run(const std::vector<std::string>& raw_args) {
    CLI::App app{"Disaster impact mapping from segmentation masks and OSM road data", "dimap"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);
    app.add_option("--config", config_, "key = value file with flag defaults for the command");

    std::vector<std::string> args;
    try {
      args = expand_config(raw_args);
    } catch (const std::exception& e) {
      err_ << "error: " << e.what() << "\n";
      return kExitInput;
    }

    add_rasterize(app);
    add_diff(app);
    add_extract(app);
    add_register(app);
    add_evaluate(app);
    add_synth(app);
    add_loss(app);
    add_pipeline(app);

    std::vector<const char*> argv{"dimap"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForVersion&) {
      out_ << kVersion << "\n";
      return kExitOk;
    } catch (const CLI::CallForHelp&) {
      out_ << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
      return kExitOk;
    } catch (const CLI::ParseError& e) {
      err_ << "error: " << e.what() << "\n";
      return kExitInput;
    }

    try {
      action_();
      return kExitOk;
    } catch (const InvariantError& e) {
      err_ << "internal error: " << e.what() << "\n";
      return kExitInternal;
    } catch (const ParseError& e) {
      err_ << "error: " << e.what() << "\n";
      return kExitInput;
    } catch (const IoError& e) {
      err_ << "error: " << e.what() << "\n";
      return kExitInput;
    } catch (const GenerationError& e) {
      err_ << "error: " << e.what() << "\n";
      return kExitInput;
    } catch (const std::invalid_argument& e) {
      err_ << "error: " << e.what() << "\n";
      return kExitInput;
    } catch (const fs::filesystem_error& e) {
      err_ << "error: " << e.what() << "\n";
      return kExitInput;
    } catch (const std::exception& e) {
      err_ << "internal error: " << e.what() << "\n";
      return kExitInternal;
    }
  }

 private:
  // Runs another command through the public entry point so composite
  // commands behave exactly like the manual sequence.
  void sub(const std::vector<std::string>& args) {
    const int code = cli::run(args, out_, err_);
    if (code == kExitInternal) throw InvariantError(args.front() + " failed");
    if (code != kExitOk) throw InputError(args.front() + " failed");
  }

  void add_rasterize(CLI::App& app) {
    auto* cmd = app.add_subcommand("rasterize", "Burn an OSM GeoJSON layer into a class-code raster");
    cmd->add_option("--geojson", r_.geojson, "Input GeoJSON")->required();
    cmd->add_option("--out", r_.out, "Output raster (.png or .pgm)")->required();
    cmd->add_option("--reference", r_.reference, "Raster whose size and world file define the grid");
    cmd->add_option("--width", r_.width, "Raster width");
    cmd->add_option("--height", r_.height, "Raster height");
    cmd->add_option("--gt", r_.gt, "Geotransform a,b,c,d,e,f");
    cmd->add_option("--road-buffer", r_.road_buffer, "Road stroke radius in meters");
    cmd->add_option("--gsd", r_.gsd, "Meters per pixel");
    cmd->callback([this, cmd] {
      action_ = [this, cmd] {
        const auto parsed = geo::parse_geojson(geo::read_text_file(r_.geojson));
        print_warnings(err_, parsed.warnings);
        std::vector<fs::path> inputs{r_.geojson};
        std::optional<Frame> frame;
        if (!r_.reference.empty()) {
          frame = raster_frame(r_.reference);
          inputs.emplace_back(r_.reference);
        }
        int w = frame ? frame->width : r_.width;
        int h = frame ? frame->height : r_.height;
        if (cmd->count("--width")) w = r_.width;
        if (cmd->count("--height")) h = r_.height;
        if (w < 1 || h < 1) throw InputError("rasterize needs --reference or --width and --height");
        geo::GeoTransform gt = frame ? frame->gt : geo::GeoTransform::identity();
        if (!r_.gt.empty()) {
          gt = parse_gt(r_.gt);
        } else if (!frame && parsed.layer.units != Units::Pixels) {
          throw InputError("a " + std::string(to_string(parsed.layer.units)) +
                           " layer needs --gt or --reference");
        }
        const auto res = geo::rasterize(parsed.layer, gt, w, h, {r_.road_buffer, r_.gsd});
        print_warnings(err_, res.warnings);
        ensure_parent(r_.out);
        geo::write_raster(r_.out, res.mask, gt);
        write_manifest(r_.out + ".manifest.json", *cmd, inputs);
      };
    });
  }

  void add_diff(CLI::App& app) {
    auto* cmd = app.add_subcommand("diff", "Change mask and damage heatmap from pre/post label rasters");
    cmd->add_option("--pre", d_.pre, "Pre-disaster label raster")->required();
    cmd->add_option("--post", d_.post, "Post-disaster label raster")->required();
    cmd->add_option("--out-dir", d_.out_dir, "Output directory")->required();
    cmd->add_flag("--debug", d_.debug, "Also write the intermediate masks");
    d_.change.add(cmd);
    cmd->callback([this, cmd] {
      action_ = [this, cmd] {
        const auto pre = geo::read_raster(d_.pre);
        const auto post = geo::read_raster(d_.post);
        print_warnings(err_, pre.warnings);
        print_warnings(err_, post.warnings);
        raster::ChangeParams p;
        p.kernel = d_.change.kernel;
        p.dilate_iterations = d_.change.dilate_iterations;
        p.dilate_pre = d_.change.dilate_pre;
        p.open_kernel = d_.change.open_kernel;
        p.min_blob_area = d_.change.min_blob_area;
        const auto st = raster::detect_changes(pre.mask, post.mask, p);
        const auto road_change = mask_and(st.filtered, raster::class_mask(st.pre_dilated, 2));
        const auto hm = raster::damage_heatmap(st.filtered, d_.change.cell_size);
        const fs::path dir = d_.out_dir;
        fs::create_directories(dir);
        geo::write_binary_raster(dir / "change.png", st.filtered, pre.transform);
        geo::write_binary_raster(dir / "road_change.png", road_change, pre.transform);
        geo::write_text_file(dir / "heatmap.csv", heatmap_csv(hm));
        geo::write_text_file(dir / "heatmap.json", heatmap_json(hm));
        if (d_.debug) {
          geo::write_raster(dir / "debug_pre_dilated.png", st.pre_dilated, pre.transform);
          geo::write_raster(dir / "debug_post_dilated.png", st.post_dilated, pre.transform);
          geo::write_binary_raster(dir / "debug_raw.png", st.raw, pre.transform);
          geo::write_binary_raster(dir / "debug_opened.png", st.opened, pre.transform);
        }
        out_ << "changed_pixels=" << st.filtered.count() << "\n";
        write_manifest(dir / "diff.manifest.json", *cmd, {d_.pre, d_.post});
      };
    });
  }

  void add_extract(CLI::App& app) {
    auto* cmd = app.add_subcommand("extract-graph", "Road graph from a label raster or binary mask");
    cmd->add_option("--mask", e_.mask, "Label raster (road class used) or {0,255} mask")->required();
    cmd->add_option("--out", e_.out, "Output graph GeoJSON")->required();
    e_.graph.add(cmd);
    cmd->callback([this, cmd] {
      action_ = [this, cmd] {
        const auto src = load_graph_source(e_.mask, err_);
        const auto g = skeleton::mask_to_graph(src, e_.graph.params());
        ensure_parent(e_.out);
        geo::write_text_file(e_.out, graph::to_geojson(g));
        out_ << "nodes=" << g.nodes().size() << " edges=" << g.edges().size() << "\n";
        write_manifest(e_.out + ".manifest.json", *cmd, {e_.mask});
      };
    });
  }

  void add_register(CLI::App& app) {
    auto* cmd = app.add_subcommand("register", "Remove changed sub-segments from the OSM road graph");
    cmd->add_option("--osm", g_.osm, "OSM layer or graph GeoJSON")->required();
    cmd->add_option("--change", g_.change, "Change graph GeoJSON or change mask raster")->required();
    cmd->add_option("--out", g_.out, "Output graph GeoJSON")->required();
    cmd->add_option("--reference", g_.reference, "Raster defining the pixel frame of a world-unit OSM layer");
    g_.match.add(cmd);
    g_.graph.add(cmd);
    cmd->callback([this, cmd] {
      action_ = [this, cmd] {
        std::vector<fs::path> inputs{g_.osm, g_.change};
        if (!g_.reference.empty()) inputs.emplace_back(g_.reference);
        const auto osm = load_graph(g_.osm, g_.reference, err_);
        graph::RoadGraph change;
        if (has_raster_ext(g_.change)) {
          change = skeleton::mask_to_graph(load_graph_source(g_.change, err_), g_.graph.params());
        } else {
          change = load_graph(g_.change, g_.reference, err_);
        }
        if (osm.units() != change.units()) {
          throw InputError("frame mismatch: OSM graph in " + std::string(to_string(osm.units())) +
                           ", change graph in " + std::string(to_string(change.units())));
        }
        const auto removed = graph::changed_subsegments(osm, change, g_.match.slice_length, g_.match.radius());
        const auto sliced = graph::slice_edges(osm, g_.match.slice_length);
        const auto diff = graph::remove_subsegments(osm, sliced, removed);
        ensure_parent(g_.out);
        geo::write_text_file(g_.out, graph::to_geojson(diff));
        out_ << "removed_subsegments=" << removed.size() << " of " << sliced.sub_segments.size() << "\n";
        write_manifest(g_.out + ".manifest.json", *cmd, inputs);
      };
    });
  }

  void add_evaluate(CLI::App& app) {
    auto* cmd = app.add_subcommand("evaluate", "IoU, sub-segment precision/recall or connectivity report");
    cmd->add_option("--pred", v_.pred, "Predicted raster or graph")->required();
    cmd->add_option("--truth", v_.truth, "Reference raster or graph")->required();
    cmd->add_option("--mode", v_.mode, "iou, pr or connectivity")->required();
    cmd->add_option("--out", v_.out, "Write the JSON report here");
    cmd->add_option("--reference", v_.reference, "Raster defining the pixel frame of world-unit layers");
    cmd->add_option("--classes", v_.classes, "Classes averaged by mean IoU");
    v_.match.add(cmd);
    v_.conn.add(cmd);
    cmd->callback([this, cmd] {
      action_ = [this, cmd] {
        std::vector<fs::path> inputs{v_.pred, v_.truth};
        if (!v_.reference.empty()) inputs.emplace_back(v_.reference);
        std::string text;
        std::string js;
        if (v_.mode == "iou") {
          evaluate_iou(text, js);
        } else if (v_.mode == "pr" || v_.mode == "connectivity") {
          const auto pred = load_graph(v_.pred, v_.reference, err_);
          const auto truth = load_graph(v_.truth, v_.reference, err_);
          if (v_.mode == "pr") {
            const auto r = metrics::subsegment_pr(pred, truth, v_.match.slice_length, v_.match.radius());
            text = metrics::to_text(r);
            js = metrics::to_json(r);
          } else {
            metrics::ConnectivityParams p;
            p.n_pairs = v_.conn.pairs;
            p.seed = v_.conn.seed;
            p.rel_tol = v_.conn.rel_tol;
            p.snap_radius = v_.conn.snap_radius < 0.0 ? v_.match.slice_length / 2.0 : v_.conn.snap_radius;
            const auto r = metrics::connectivity(pred, truth, p);
            text = metrics::to_text(r);
            js = metrics::to_json(r);
          }
        } else {
          throw InputError("unknown mode '" + v_.mode + "' (expected iou, pr or connectivity)");
        }
        out_ << text;
        if (!v_.out.empty()) {
          ensure_parent(v_.out);
          geo::write_text_file(v_.out, js);
          write_manifest(v_.out + ".manifest.json", *cmd, inputs);
        }
      };
    });
  }

  void evaluate_iou(std::string& text, std::string& js) {
    const auto pred = geo::read_raster(v_.pred).mask;
    const auto truth = geo::read_raster(v_.truth).mask;
    if (pred.width() != truth.width() || pred.height() != truth.height()) {
      throw InputError("pred and truth rasters differ in size");
    }
    const std::set<int> classes(v_.classes.begin(), v_.classes.end());
    json per_class = json::object();
    std::ostringstream t;
    t.precision(10);
    for (int c : classes) {
      const double v = metrics::iou(raster::class_mask(pred, c), raster::class_mask(truth, c));
      per_class[std::to_string(c)] = v;
      t << "iou_class_" << c << "=" << v << "\n";
    }
    const double m = metrics::mean_iou(pred, truth, classes);
    t << "mean_iou=" << m << "\n";
    text = t.str();
    js = json({{"iou", per_class}, {"mean_iou", m}}).dump(1) + "\n";
  }

  void add_synth(CLI::App& app) {
    auto* cmd = app.add_subcommand("synth", "Generate a seeded synthetic disaster scenario");
    cmd->add_option("--out-dir", s_.out_dir, "Output directory")->required();
    cmd->add_option("--seed", s_.seed, "Scenario seed");
    cmd->add_option("--extent", s_.gen.extent, "Raster side in pixels");
    cmd->add_option("--road-density", s_.gen.road_density, "Probability of extra grid links (0: no roads)");
    cmd->add_option("--buildings", s_.gen.building_count, "Number of buildings");
    cmd->add_option("--slice-length", s_.gen.slice_length, "Sub-segment length l in pixels");
    cmd->add_option("--damage", s_.damage, "Fraction of sub-segments and buildings destroyed");
    cmd->add_option("--damage-seed", s_.damage_seed, "Damage sampling seed");
    cmd->add_option("--gap-fraction", s_.gap_fraction, "Fraction of surviving road pixels erased in post.png");
    cmd->add_option("--gap-seed", s_.gap_seed, "Gap sampling seed");
    cmd->callback([this, cmd] {
      action_ = [this, cmd] {
        auto s = synth::generate(s_.seed, s_.gen);
        auto masks = synth::apply_damage(s, s_.damage, s_.damage_seed);
        if (s_.gap_fraction > 0.0) {
          masks.post = synth::inject_gaps(masks.post, synth::post_truth_graph(s), s_.gap_fraction, s_.gap_seed);
        }
        synth::export_scenario(s, masks, s_.out_dir);
        out_ << "subsegments=" << graph::slice_edges(s.truth_graph, s.slice_length).sub_segments.size()
             << " damaged=" << s.damaged_subsegments.size() << " buildings=" << s.buildings.size() << "\n";
        write_manifest(fs::path(s_.out_dir) / "synth.manifest.json", *cmd, {});
      };
    });
  }

  void add_loss(CLI::App& app) {
    auto* cmd = app.add_subcommand("loss", "Evaluate the segmentation loss and its gradient");
    cmd->add_option("--instance", l_.instance, "Instance file (alpha / weights / pixel lines)")->required();
    cmd->add_option("--alpha", l_.alpha, "Override the Jaccard weight alpha");
    cmd->add_flag("--literal", l_.literal, "Use raw exp(score) memberships in the Jaccard term");
    cmd->add_option("--out", l_.out, "Write loss and gradient as JSON here");
    cmd->callback([this, cmd] {
      action_ = [this, cmd] {
        auto [inst, params] = parse_loss_instance(l_.instance);
        if (cmd->count("--alpha")) params.alpha = l_.alpha;
        if (l_.literal) params.jaccard = loss::JaccardInput::Exponential;
        const double value = loss::seg_loss(inst, params);
        const auto grad = loss::seg_loss_grad(inst, params);
        out_ << "loss=" << fmt(value) << "\n";
        json g = json::array();
        for (std::size_t i = 0; i < inst.pixels(); ++i) {
          out_ << "grad[" << i << "]=";
          json row = json::array();
          for (std::size_t c = 0; c < inst.classes(); ++c) {
            out_ << (c ? " " : "") << fmt(grad[i * inst.classes() + c]);
            row.push_back(grad[i * inst.classes() + c]);
          }
          out_ << "\n";
          g.push_back(row);
        }
        if (!l_.out.empty()) {
          ensure_parent(l_.out);
          geo::write_text_file(l_.out, json({{"loss", value}, {"alpha", params.alpha},
                                             {"weights", params.weights}, {"gradient", g}})
                                               .dump(1) + "\n");
          write_manifest(l_.out + ".manifest.json", *cmd, {l_.instance});
        }
      };
    });
  }

  void add_pipeline(CLI::App& app) {
    auto* cmd = app.add_subcommand("pipeline", "rasterize, diff, extract-graph, register and evaluate in one go");
    cmd->add_option("--osm", p_.osm, "OSM GeoJSON")->required();
    cmd->add_option("--post", p_.post, "Post-disaster label raster")->required();
    cmd->add_option("--pre", p_.pre, "Pre-disaster label raster (default: rasterized OSM)");
    cmd->add_option("--truth", p_.truth, "Reference post-disaster road graph for evaluation");
    cmd->add_option("--out-dir", p_.out_dir, "Output directory")->required();
    cmd->add_option("--road-buffer", p_.road_buffer, "Road stroke radius in meters");
    cmd->add_option("--gsd", p_.gsd, "Meters per pixel");
    p_.change.add(cmd);
    p_.graph.add(cmd, "graph-");
    p_.match.add(cmd);
    p_.conn.add(cmd);
    cmd->callback([this, cmd] {
      action_ = [this, cmd] {
        const fs::path dir = p_.out_dir;
        fs::create_directories(dir);
        auto path = [&](const char* name) { return (dir / name).string(); };
        std::string pre = p_.pre;
        if (pre.empty()) {
          pre = path("pre_rasterized.png");
          sub({"rasterize", "--geojson", p_.osm, "--reference", p_.post, "--out", pre, "--road-buffer",
               fmt(p_.road_buffer), "--gsd", fmt(p_.gsd)});
        }
        auto with = [](std::vector<std::string> a, const std::vector<std::string>& b) {
          a.insert(a.end(), b.begin(), b.end());
          return a;
        };
        sub(with({"diff", "--pre", pre, "--post", p_.post, "--out-dir", dir.string()}, p_.change.args()));
        const auto graph_args = p_.graph.args();
        sub(with({"extract-graph", "--mask", p_.post, "--out", path("post_graph.geojson")}, graph_args));
        sub(with({"extract-graph", "--mask", path("road_change.png"), "--out", path("change_graph.geojson")},
                 graph_args));
        sub(with({"register", "--osm", p_.osm, "--change", path("change_graph.geojson"), "--reference", p_.post,
                  "--out", path("diff_graph.geojson")},
                 p_.match.args()));
        if (!p_.truth.empty()) {
          for (const char* which : {"diff", "post"}) {
            const std::string pred = path(which == std::string("diff") ? "diff_graph.geojson" : "post_graph.geojson");
            sub(with({"evaluate", "--mode", "pr", "--pred", pred, "--truth", p_.truth, "--reference", p_.post,
                      "--out", path((std::string("eval_") + which + "_pr.json").c_str())},
                     p_.match.args()));
            sub(with(with({"evaluate", "--mode", "connectivity", "--pred", pred, "--truth", p_.truth,
                           "--reference", p_.post, "--out",
                           path((std::string("eval_") + which + "_connectivity.json").c_str())},
                          p_.match.args()),
                     p_.conn.args()));
          }
        }
        std::vector<fs::path> inputs{p_.osm, p_.post};
        if (!p_.pre.empty()) inputs.emplace_back(p_.pre);
        if (!p_.truth.empty()) inputs.emplace_back(p_.truth);
        write_manifest(dir / "pipeline.manifest.json", *cmd, inputs);
      };
    });
  }

  std::ostream& out_;
  std::ostream& err_;
  std::string config_;
  std::function<void()> action_;

  struct {
    std::string geojson, out, reference, gt;
    int width = 0, height = 0;
    double road_buffer = 2.0, gsd = 0.5;
  } r_;
  struct {
    std::string pre, post, out_dir;
    bool debug = false;
    ChangeOptions change;
  } d_;
  struct {
    std::string mask, out;
    GraphOptions graph;
  } e_;
  struct {
    std::string osm, change, out, reference;
    MatchOptions match;
    GraphOptions graph;
  } g_;
  struct {
    std::string pred, truth, mode, out, reference;
    std::vector<int> classes{1, 2};
    MatchOptions match;
    ConnOptions conn;
  } v_;
  struct {
    std::string out_dir;
    std::uint64_t seed = 0;
    synth::GenerateParams gen;
    double damage = 0.05;
    std::uint64_t damage_seed = 1;
    double gap_fraction = 0.0;
    std::uint64_t gap_seed = 2;
  } s_;
  struct {
    std::string instance, out;
    double alpha = 0.0;
    bool literal = false;
  } l_;
  struct {
    std::string osm, post, pre, truth, out_dir;
    double road_buffer = 2.0, gsd = 0.5;
    ChangeOptions change;
    GraphOptions graph;
    MatchOptions match;
    ConnOptions conn;
  } p_;
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Cli cli(out, err);
  return cli.run(args);
}

}  // namespace dimap::cli

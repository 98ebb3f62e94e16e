#include "image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <string>

#include "dimap/errors.hpp"

namespace dimap::geo::detail {

namespace {

std::string lower_ext(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

GrayImage read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw ParseError(path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_GRAY;
  GrayImage out;
  out.width = static_cast<int>(image.width);
  out.height = static_cast<int>(image.height);
  out.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw ParseError(path.string() + ": " + msg);
  }
  return out;
}

void write_png(const std::filesystem::path& path, const GrayImage& img) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, img.pixels.data(), 0, nullptr)) {
    throw IoError(path.string() + ": " + image.message);
  }
}

// Next whitespace-delimited header token, skipping '#' comments.
std::string pgm_token(std::istream& in) {
  std::string tok;
  char ch;
  while (in.get(ch)) {
    if (ch == '#') {
      std::string rest;
      std::getline(in, rest);
      if (!tok.empty()) break;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(ch);
  }
  return tok;
}

int pgm_int(std::istream& in, const std::filesystem::path& path, const char* what) {
  const std::string tok = pgm_token(in);
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ParseError(path.string() + ": bad PGM " + what + " '" + tok + "'");
  }
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string magic = pgm_token(in);
  if (magic != "P2" && magic != "P5") throw ParseError(path.string() + ": not a PGM file");
  GrayImage out;
  out.width = pgm_int(in, path, "width");
  out.height = pgm_int(in, path, "height");
  const int maxval = pgm_int(in, path, "maxval");
  if (out.width < 1 || out.height < 1 || maxval < 1 || maxval > 255) {
    throw ParseError(path.string() + ": unsupported PGM header");
  }
  const std::size_t n = static_cast<std::size_t>(out.width) * out.height;
  out.pixels.resize(n);
  if (magic == "P5") {
    in.read(reinterpret_cast<char*>(out.pixels.data()), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) throw ParseError(path.string() + ": truncated PGM data");
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const int v = pgm_int(in, path, "sample");
      if (v < 0 || v > maxval) throw ParseError(path.string() + ": PGM sample out of range");
      out.pixels[i] = static_cast<std::uint8_t>(v);
    }
  }
  return out;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P2\n" << img.width << ' ' << img.height << "\n255\n";
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      if (c) out << ' ';
      out << static_cast<int>(img.pixels[static_cast<std::size_t>(r) * img.width + c]);
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

GrayImage read_gray8(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("raster not found: " + path.string());
  const std::string ext = lower_ext(path);
  if (ext == ".png") return read_png(path);
  if (ext == ".pgm") return read_pgm(path);
  throw InputError("unsupported raster extension '" + ext + "' (use .png or .pgm)");
}

void write_gray8(const std::filesystem::path& path, const GrayImage& img) {
  const std::string ext = lower_ext(path);
  if (ext == ".png") return write_png(path, img);
  if (ext == ".pgm") return write_pgm(path, img);
  throw InputError("unsupported raster extension '" + ext + "' (use .png or .pgm)");
}

}  // namespace dimap::geo::detail

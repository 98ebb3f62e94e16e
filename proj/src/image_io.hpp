#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace dimap::geo::detail {

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major
};

// PNG via libpng, PGM (P2 written, P2/P5 read) by hand; chosen by extension.
GrayImage read_gray8(const std::filesystem::path& path);
void write_gray8(const std::filesystem::path& path, const GrayImage& img);

}  // namespace dimap::geo::detail

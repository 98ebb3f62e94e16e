#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "dimap/geometry.hpp"

namespace dimap {

// Uniform grid bucketing of point-tagged items.
class SpatialHashGrid {
 public:
  explicit SpatialHashGrid(double cell_size) : cell_(cell_size) {}

  void insert(Point p, std::size_t item) { cells_[key(cell_of(p.x), cell_of(p.y))].push_back(item); }

  // Appends items of every cell overlapping the square [p - r, p + r]. The
  // caller filters by exact distance; an item may appear more than once.
  void query(Point p, double r, std::vector<std::size_t>& out) const {
    const std::int64_t c0 = cell_of(p.x - r), c1 = cell_of(p.x + r);
    const std::int64_t r0 = cell_of(p.y - r), r1 = cell_of(p.y + r);
    for (std::int64_t cy = r0; cy <= r1; ++cy) {
      for (std::int64_t cx = c0; cx <= c1; ++cx) {
        auto it = cells_.find(key(cx, cy));
        if (it != cells_.end()) out.insert(out.end(), it->second.begin(), it->second.end());
      }
    }
  }

 private:
  std::int64_t cell_of(double v) const { return static_cast<std::int64_t>(std::floor(v / cell_)); }

  static std::uint64_t key(std::int64_t cx, std::int64_t cy) {
    return (static_cast<std::uint64_t>(cx) << 32) ^ (static_cast<std::uint64_t>(cy) & 0xffffffffULL);
  }

  double cell_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells_;
};

}  // namespace dimap

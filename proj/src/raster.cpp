#include "dimap/raster.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "dimap/errors.hpp"

namespace dimap::raster {

namespace {

void check_dims(int width, int height) {
  if (width < 1 || height < 1) {
    throw InputError("raster dimensions must be positive, got " + std::to_string(width) + "x" +
                     std::to_string(height));
  }
}

std::size_t area(int width, int height) {
  return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
}

// One axis of a separable square morphology pass. For dilation a pixel is set
// when any pixel of the window is set; for erosion when the whole window lies
// inside the raster and is set.
void window_pass(std::span<const std::uint8_t> in, std::span<std::uint8_t> out, int width,
                 int height, int radius, bool horizontal, bool dilation) {
  const int lines = horizontal ? height : width;
  const int len = horizontal ? width : height;
  const std::size_t stride = horizontal ? 1 : static_cast<std::size_t>(width);
  std::vector<int> prefix(static_cast<std::size_t>(len) + 1);
  for (int line = 0; line < lines; ++line) {
    const std::size_t base = horizontal ? static_cast<std::size_t>(line) * width
                                        : static_cast<std::size_t>(line);
    prefix[0] = 0;
    for (int i = 0; i < len; ++i) prefix[i + 1] = prefix[i] + in[base + i * stride];
    for (int i = 0; i < len; ++i) {
      const int lo = i - radius;
      const int hi = i + radius;
      bool v;
      if (dilation) {
        v = prefix[std::min(hi + 1, len)] - prefix[std::max(lo, 0)] > 0;
      } else {
        v = lo >= 0 && hi < len && prefix[hi + 1] - prefix[lo] == 2 * radius + 1;
      }
      out[base + i * stride] = v ? 1 : 0;
    }
  }
}

BinaryMask morph(const BinaryMask& mask, StructuringElement se, int iterations, bool dilation) {
  if (iterations < 0) throw InputError("iterations must be >= 0");
  BinaryMask cur = mask;
  if (se.radius() == 0) return cur;
  std::vector<std::uint8_t> tmp(mask.size());
  for (int it = 0; it < iterations; ++it) {
    window_pass(cur.bits(), tmp, mask.width(), mask.height(), se.radius(), true, dilation);
    window_pass(tmp, cur.bits(), mask.width(), mask.height(), se.radius(), false, dilation);
  }
  return cur;
}

int find_root(std::vector<int>& parent, int x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

void unite(std::vector<int>& parent, int a, int b) {
  a = find_root(parent, a);
  b = find_root(parent, b);
  if (a == b) return;
  if (a < b) parent[b] = a; else parent[a] = b;
}

}  // namespace

Mask::Mask(int width, int height, std::uint8_t fill) : width_(width), height_(height) {
  check_dims(width, height);
  if (fill > kMaxClassCode) throw InputError("class code out of range: " + std::to_string(fill));
  labels_.assign(area(width, height), fill);
}

Mask::Mask(int width, int height, std::vector<std::uint8_t> labels)
    : width_(width), height_(height), labels_(std::move(labels)) {
  check_dims(width, height);
  if (labels_.size() != area(width, height)) {
    throw InputError("label grid has " + std::to_string(labels_.size()) + " entries, expected " +
                     std::to_string(area(width, height)));
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] > kMaxClassCode) {
      throw InputError("class code " + std::to_string(labels_[i]) + " at pixel " +
                       std::to_string(i) + " is outside {0,1,2}");
    }
  }
}

void Mask::set(int col, int row, std::uint8_t code) {
  if (code > kMaxClassCode) throw InputError("class code out of range: " + std::to_string(code));
  labels_[index(col, row)] = code;
}

BinaryMask::BinaryMask(int width, int height, bool fill) : width_(width), height_(height) {
  check_dims(width, height);
  bits_.assign(area(width, height), fill ? 1 : 0);
}

BinaryMask::BinaryMask(int width, int height, std::vector<std::uint8_t> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
  check_dims(width, height);
  if (bits_.size() != area(width, height)) {
    throw InputError("bit grid has " + std::to_string(bits_.size()) + " entries, expected " +
                     std::to_string(area(width, height)));
  }
  for (auto b : bits_) {
    if (b > 1) throw InputError("binary mask values must be 0 or 1");
  }
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

bool BinaryMask::subset_of(const BinaryMask& other) const {
  if (other.width_ != width_ || other.height_ != height_) return false;
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i] && !other.bits_[i]) return false;
  }
  return true;
}

StructuringElement::StructuringElement(int size) : size_(size) {
  if (size < 1 || size % 2 == 0) {
    throw InputError("structuring element size must be odd and >= 1, got " + std::to_string(size));
  }
}

BinaryMask dilate(const BinaryMask& mask, StructuringElement se, int iterations) {
  return morph(mask, se, iterations, true);
}

BinaryMask erode(const BinaryMask& mask, StructuringElement se, int iterations) {
  return morph(mask, se, iterations, false);
}

BinaryMask open(const BinaryMask& mask, StructuringElement se) {
  return dilate(erode(mask, se, 1), se, 1);
}

BinaryMask compute_change_mask(const Mask& pre, const Mask& post) {
  if (pre.width() != post.width() || pre.height() != post.height()) {
    throw InputError("pre mask is " + std::to_string(pre.width()) + "x" +
                     std::to_string(pre.height()) + " but post mask is " +
                     std::to_string(post.width()) + "x" + std::to_string(post.height()));
  }
  std::vector<std::uint8_t> out(pre.size());
  auto a = pre.labels();
  auto b = post.labels();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (a[i] != 0 && b[i] == 0) ? 1 : 0;
  return BinaryMask(pre.width(), pre.height(), std::move(out));
}

BinaryMask class_mask(const Mask& mask, int code) {
  if (code < 0 || code > kMaxClassCode) {
    throw InputError("class code must be 0, 1 or 2, got " + std::to_string(code));
  }
  std::vector<std::uint8_t> out(mask.size());
  auto in = mask.labels();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] == code ? 1 : 0;
  return BinaryMask(mask.width(), mask.height(), std::move(out));
}

BinaryMask nonzero_mask(const Mask& mask) {
  std::vector<std::uint8_t> out(mask.size());
  auto in = mask.labels();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] != 0 ? 1 : 0;
  return BinaryMask(mask.width(), mask.height(), std::move(out));
}

BinaryMask complement(const BinaryMask& mask) {
  BinaryMask out = mask;
  for (auto& b : out.bits()) b = b ? 0 : 1;
  return out;
}

ComponentLabels label_components(const BinaryMask& mask) {
  const int w = mask.width();
  const int h = mask.height();
  ComponentLabels result;
  result.labels.assign(mask.size(), 0);
  std::vector<int> parent{0};
  auto& lab = result.labels;

  // First pass: provisional labels from the already visited half-neighborhood.
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!mask.at(c, r)) continue;
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      int best = 0;
      const int nbr[4][2] = {{-1, 0}, {-1, -1}, {0, -1}, {1, -1}};
      for (const auto& d : nbr) {
        const int nc = c + d[0];
        const int nr = r + d[1];
        if (nc < 0 || nr < 0 || nc >= w) continue;
        const int l = lab[static_cast<std::size_t>(nr) * w + nc];
        if (l == 0) continue;
        if (best == 0) best = l; else unite(parent, best, l);
      }
      if (best == 0) {
        best = static_cast<int>(parent.size());
        parent.push_back(best);
      }
      lab[i] = best;
    }
  }

  // Second pass: resolve equivalences into dense ids in scan order.
  std::vector<int> dense(parent.size(), 0);
  int next = 0;
  for (auto& l : lab) {
    if (l == 0) continue;
    const int root = find_root(parent, l);
    if (dense[root] == 0) {
      dense[root] = ++next;
      result.areas.push_back(0);
    }
    l = dense[root];
    ++result.areas[l - 1];
  }
  return result;
}

BinaryMask remove_small_blobs(const BinaryMask& mask, std::size_t min_area) {
  if (min_area == 0) return mask;
  const ComponentLabels comps = label_components(mask);
  BinaryMask out = mask;
  auto bits = out.bits();
  for (std::size_t i = 0; i < bits.size(); ++i) {
    const int l = comps.labels[i];
    if (l != 0 && comps.areas[l - 1] < min_area) bits[i] = 0;
  }
  return out;
}

std::size_t ChangeHeatmap::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

ChangeHeatmap damage_heatmap(const BinaryMask& diff, int cell_size) {
  if (cell_size < 1) throw InputError("heatmap cell size must be >= 1");
  ChangeHeatmap hm;
  hm.cell_size = cell_size;
  hm.cols = (diff.width() + cell_size - 1) / cell_size;
  hm.rows = (diff.height() + cell_size - 1) / cell_size;
  hm.counts.assign(static_cast<std::size_t>(hm.cols) * hm.rows, 0);
  for (int r = 0; r < diff.height(); ++r) {
    for (int c = 0; c < diff.width(); ++c) {
      if (diff.at(c, r)) ++hm.counts[static_cast<std::size_t>(r / cell_size) * hm.cols + c / cell_size];
    }
  }
  return hm;
}

Mask dilate_classes(const Mask& mask, StructuringElement se, int iterations) {
  const BinaryMask buildings = dilate(class_mask(mask, 1), se, iterations);
  const BinaryMask roads = dilate(class_mask(mask, 2), se, iterations);
  std::vector<std::uint8_t> out(mask.size(), 0);
  auto b = buildings.bits();
  auto r = roads.bits();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = r[i] ? 2 : (b[i] ? 1 : 0);
  return Mask(mask.width(), mask.height(), std::move(out));
}

ChangeStages detect_changes(const Mask& pre, const Mask& post, const ChangeParams& params) {
  if (pre.width() != post.width() || pre.height() != post.height()) {
    // Same message as the predicate itself; fail before the dilation work.
    (void)compute_change_mask(pre, post);
  }
  const StructuringElement se(params.kernel);
  const StructuringElement open_se(params.open_kernel);
  Mask pre_d = params.dilate_pre ? dilate_classes(pre, se, params.dilate_iterations) : pre;
  Mask post_d = dilate_classes(post, se, params.dilate_iterations);
  BinaryMask raw = compute_change_mask(pre_d, post_d);
  BinaryMask opened = open(raw, open_se);
  BinaryMask filtered = remove_small_blobs(opened, params.min_blob_area);
  return ChangeStages{std::move(pre_d), std::move(post_d), std::move(raw), std::move(opened),
                      std::move(filtered)};
}

}  // namespace dimap::raster

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace dimap::raster {

enum class ClassCode : std::uint8_t { Background = 0, Building = 1, Road = 2 };

inline constexpr std::uint8_t kMaxClassCode = 2;

// Row-major grid of class labels in {0, 1, 2}.
class Mask {
 public:
  Mask(int width, int height, std::uint8_t fill = 0);
  // Throws InputError if the label count does not match or a code exceeds 2.
  Mask(int width, int height, std::vector<std::uint8_t> labels);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return labels_.size(); }

  std::uint8_t at(int col, int row) const { return labels_[index(col, row)]; }
  void set(int col, int row, std::uint8_t code);
  std::span<const std::uint8_t> labels() const { return labels_; }

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  std::size_t index(int col, int row) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(col);
  }

  int width_;
  int height_;
  std::vector<std::uint8_t> labels_;
};

// Row-major grid of {0, 1}.
class BinaryMask {
 public:
  BinaryMask(int width, int height, bool fill = false);
  BinaryMask(int width, int height, std::vector<std::uint8_t> bits);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return bits_.size(); }

  bool at(int col, int row) const { return bits_[index(col, row)] != 0; }
  // Out-of-raster reads return false.
  bool get(int col, int row) const {
    return col >= 0 && row >= 0 && col < width_ && row < height_ && at(col, row);
  }
  void set(int col, int row, bool v) { bits_[index(col, row)] = v ? 1 : 0; }
  std::span<const std::uint8_t> bits() const { return bits_; }
  std::span<std::uint8_t> bits() { return bits_; }

  std::size_t count() const;
  bool empty() const { return count() == 0; }
  // True when every positive of this mask is also positive in other.
  bool subset_of(const BinaryMask& other) const;

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  std::size_t index(int col, int row) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(col);
  }

  int width_;
  int height_;
  std::vector<std::uint8_t> bits_;
};

// Square structuring element of odd side length.
class StructuringElement {
 public:
  explicit StructuringElement(int size);
  int size() const { return size_; }
  int radius() const { return size_ / 2; }

 private:
  int size_;
};

// Morphology treats pixels outside the raster as background.
BinaryMask dilate(const BinaryMask& mask, StructuringElement se, int iterations = 1);
BinaryMask erode(const BinaryMask& mask, StructuringElement se, int iterations = 1);
BinaryMask open(const BinaryMask& mask, StructuringElement se);

// 1 where the pre label is building or road and the post label is background.
BinaryMask compute_change_mask(const Mask& pre, const Mask& post);

BinaryMask class_mask(const Mask& mask, int code);
BinaryMask nonzero_mask(const Mask& mask);
BinaryMask complement(const BinaryMask& mask);

struct ComponentLabels {
  // 0 for background, otherwise 1-based component id in raster scan order.
  std::vector<int> labels;
  // areas[id - 1] is the pixel count of component id.
  std::vector<std::size_t> areas;
};

// Two-pass union-find labeling with 8-connectivity.
ComponentLabels label_components(const BinaryMask& mask);

BinaryMask remove_small_blobs(const BinaryMask& mask, std::size_t min_area);

struct ChangeHeatmap {
  int cell_size = 1;
  int cols = 0;
  int rows = 0;
  std::vector<std::size_t> counts;  // row-major, rows x cols

  std::size_t at(int col, int row) const {
    return counts[static_cast<std::size_t>(row) * static_cast<std::size_t>(cols) +
                  static_cast<std::size_t>(col)];
  }
  std::size_t total() const;
};

ChangeHeatmap damage_heatmap(const BinaryMask& diff, int cell_size);

// Tunables of the change-detection pipeline. The post-disaster class masks
// are dilated before the change predicate is evaluated, closing small gaps
// in the post segmentation; dilate_pre extends the same dilation to the
// pre-disaster masks.
struct ChangeParams {
  int kernel = 5;
  int dilate_iterations = 6;
  bool dilate_pre = false;
  int open_kernel = 5;
  std::size_t min_blob_area = 64;
};

struct ChangeStages {
  Mask pre_dilated;
  Mask post_dilated;
  BinaryMask raw;       // change predicate on the dilated masks
  BinaryMask opened;    // after opening
  BinaryMask filtered;  // after small-blob removal; the final change mask
};

// Per-class dilation of a label mask. Roads win where dilated classes overlap.
Mask dilate_classes(const Mask& mask, StructuringElement se, int iterations);

ChangeStages detect_changes(const Mask& pre, const Mask& post, const ChangeParams& params = {});

}  // namespace dimap::raster

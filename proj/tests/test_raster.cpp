#include <random>

#include "doctest.h"
#include "dimap/errors.hpp"
#include "dimap/raster.hpp"
#include "support.hpp"

using namespace dimap;
using namespace dimap::raster;
using namespace testsupport;

TEST_CASE("mask construction validates codes and sizes") {
  CHECK_THROWS_AS(Mask(2, 2, std::vector<std::uint8_t>{0, 1, 2, 3}), InputError);
  CHECK_THROWS_AS(Mask(2, 2, std::vector<std::uint8_t>{0, 1, 2}), InputError);
  CHECK_THROWS_AS(Mask(0, 3), InputError);
  CHECK_THROWS_AS(StructuringElement(4), InputError);
  CHECK_THROWS_AS(StructuringElement(-1), InputError);
  CHECK(StructuringElement(5).radius() == 2);
}

TEST_CASE("dilate examples") {
  CHECK(dilate(BinaryMask(16, 16), StructuringElement(5), 6).empty());

  BinaryMask dot(7, 7);
  dot.set(3, 3, true);
  const auto d = dilate(dot, StructuringElement(5), 1);
  for (int y = 0; y < 7; ++y)
    for (int x = 0; x < 7; ++x) CHECK(d.at(x, y) == (x >= 1 && x <= 5 && y >= 1 && y <= 5));

  const BinaryMask full(9, 6, true);
  CHECK(dilate(full, StructuringElement(3), 4) == full);
  CHECK(dilate(dot, StructuringElement(5), 0) == dot);
  CHECK_THROWS_AS(dilate(dot, StructuringElement(3), -1), InputError);
}

TEST_CASE("erode examples") {
  const auto e = erode(BinaryMask(16, 16, true), StructuringElement(3), 1);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) CHECK(e.at(x, y) == (x > 0 && y > 0 && x < 15 && y < 15));

  BinaryMask dot(5, 5);
  dot.set(2, 2, true);
  CHECK(erode(dot, StructuringElement(3)).empty());
  CHECK(erode(BinaryMask(5, 5), StructuringElement(3)).empty());
}

TEST_CASE("dilate and erode agree with the window oracles") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    std::uniform_int_distribution<int> dim(1, 24), odd(0, 3), iters(0, 3);
    const int w = dim(rng), h = dim(rng), size = 2 * odd(rng) + 1, it = iters(rng);
    const auto m = random_binary(rng, w, h, 0.3 + 0.1 * (trial % 5));
    CHECK(dilate(m, StructuringElement(size), it) == oracle_dilate(m, size, it));
    CHECK(erode(m, StructuringElement(size), it) == oracle_erode(m, size, it));
  }
}

TEST_CASE("erosion/dilation duality away from the border") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const auto m = random_binary(rng, 20, 20, 0.6);
    const auto lhs = complement(erode(m, StructuringElement(3)));
    const auto rhs = dilate(complement(m), StructuringElement(3));
    for (int y = 1; y < 19; ++y)
      for (int x = 1; x < 19; ++x) CHECK(lhs.at(x, y) == rhs.at(x, y));
  }
}

TEST_CASE("open examples") {
  BinaryMask blob(12, 12);
  for (int y = 5; y < 7; ++y)
    for (int x = 5; x < 7; ++x) blob.set(x, y, true);
  CHECK(open(blob, StructuringElement(5)).empty());

  BinaryMask block(30, 30);
  for (int y = 5; y < 25; ++y)
    for (int x = 5; x < 25; ++x) block.set(x, y, true);
  const auto o = open(block, StructuringElement(5));
  CHECK(o == oracle_dilate(oracle_erode(block, 5, 1), 5, 1));
  CHECK(o == block);
  CHECK(open(BinaryMask(8, 8), StructuringElement(3)).empty());
}

TEST_CASE("compute_change_mask examples") {
  std::mt19937_64 rng(3);
  const auto post = random_labels(rng, 8, 8);
  CHECK(compute_change_mask(Mask(8, 8, 0), post).empty());
  CHECK(compute_change_mask(Mask(8, 8, 2), Mask(8, 8, 0)) == BinaryMask(8, 8, true));
  CHECK_THROWS_AS(compute_change_mask(Mask(8, 8), Mask(8, 7)), InputError);
  for (int k = 0; k < 20; ++k) {
    const auto a = random_labels(rng, 32, 32);
    const auto b = random_labels(rng, 32, 32);
    CHECK(compute_change_mask(a, b) == oracle_change(a, b));
  }
}

TEST_CASE("remove_small_blobs examples") {
  BinaryMask m(20, 20);
  m.set(0, 0, true);
  m.set(1, 1, true);
  m.set(2, 0, true);  // area 3, diagonal links
  for (int y = 10; y < 15; ++y)
    for (int x = 5; x < 15; ++x) m.set(x, y, true);  // area 50
  const auto r = remove_small_blobs(m, 10);
  CHECK(r.count() == 50);
  CHECK_FALSE(r.at(1, 1));
  CHECK(remove_small_blobs(m, 0) == m);
  CHECK(remove_small_blobs(BinaryMask(4, 4), 5).empty());
}

TEST_CASE("component labeling matches flood fill") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    const auto m = random_binary(rng, 25, 19, 0.45);
    const auto got = label_components(m);
    const auto want = oracle_components(m);
    REQUIRE(got.areas.size() == want.areas.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (want.comp[i] < 0) {
        CHECK(got.labels[i] == 0);
      } else {
        CHECK(got.areas[got.labels[i] - 1] == want.areas[want.comp[i]]);
      }
    }
    // Same partition: pixels share a label iff they share an oracle component.
    for (std::size_t i = 0; i + 1 < m.size(); ++i) {
      if (want.comp[i] >= 0 && want.comp[i + 1] >= 0) {
        CHECK((got.labels[i] == got.labels[i + 1]) == (want.comp[i] == want.comp[i + 1]));
      }
    }
    const std::size_t min_area = 1 + trial % 7;
    const auto kept = remove_small_blobs(m, min_area);
    for (std::size_t i = 0; i < m.size(); ++i) {
      CHECK((kept.bits()[i] != 0) == (want.comp[i] >= 0 && want.areas[want.comp[i]] >= min_area));
    }
    CHECK(remove_small_blobs(kept, min_area) == kept);
  }
}

TEST_CASE("class_mask examples") {
  CHECK(class_mask(Mask(4, 3, 2), 2) == BinaryMask(4, 3, true));
  CHECK(class_mask(Mask(4, 3, 2), 1).empty());
  CHECK_THROWS_AS(class_mask(Mask(4, 3), 3), InputError);
  CHECK_THROWS_AS(class_mask(Mask(4, 3), -1), InputError);
  std::mt19937_64 rng(8);
  const auto m = random_labels(rng, 9, 9);
  for (int code = 0; code <= 2; ++code) {
    const auto c = class_mask(m, code);
    for (int y = 0; y < 9; ++y)
      for (int x = 0; x < 9; ++x) CHECK(c.at(x, y) == (m.at(x, y) == code));
  }
}

TEST_CASE("damage_heatmap examples") {
  const auto zero = damage_heatmap(BinaryMask(10, 7), 4);
  CHECK(zero.cols == 3);
  CHECK(zero.rows == 2);
  CHECK(zero.total() == 0);

  const auto four = damage_heatmap(BinaryMask(10, 10, true), 5);
  REQUIRE(four.counts.size() == 4);
  for (auto c : four.counts) CHECK(c == 25);

  BinaryMask one(9, 9);
  one.set(0, 0, true);
  const auto h = damage_heatmap(one, 4);
  CHECK(h.at(0, 0) == 1);
  CHECK(h.total() == 1);
  CHECK_THROWS_AS(damage_heatmap(one, 0), InputError);

  std::mt19937_64 rng(4);
  for (int k = 0; k < 10; ++k) {
    const auto m = random_binary(rng, 37, 23, 0.4);
    const auto hm = damage_heatmap(m, 1 + k);
    CHECK(hm.total() == m.count());
    for (auto c : hm.counts) CHECK(c <= static_cast<std::size_t>((1 + k) * (1 + k)));
  }
}

TEST_CASE("detect_changes stages") {
  // A road present before and gone after: the change mask covers it.
  Mask pre(60, 40);
  Mask post(60, 40);
  for (int y = 18; y < 23; ++y)
    for (int x = 0; x < 60; ++x) {
      pre.set(x, y, 2);
      if (x < 10 || x >= 50) post.set(x, y, 2);
    }
  const auto st = detect_changes(pre, post);
  CHECK(st.raw.subset_of(compute_change_mask(pre, post)));
  CHECK(st.opened.subset_of(st.raw));
  CHECK(st.filtered.subset_of(st.opened));
  CHECK(st.filtered.count() > 0);
  CHECK(st.filtered.at(30, 20));
  // Identical inputs never change.
  CHECK(detect_changes(pre, pre).filtered.empty());

  ChangeParams p;
  p.dilate_pre = true;
  const auto both = detect_changes(pre, post, p);
  CHECK(both.pre_dilated == dilate_classes(pre, StructuringElement(5), 6));
}

TEST_CASE("dilate_classes gives roads precedence") {
  Mask m(11, 1);
  m.set(3, 0, 1);
  m.set(7, 0, 2);
  const auto d = dilate_classes(m, StructuringElement(3), 2);
  CHECK(d.at(1, 0) == 1);
  CHECK(d.at(5, 0) == 2);
  CHECK(d.at(9, 0) == 2);
  CHECK(d.at(0, 0) == 0);
}

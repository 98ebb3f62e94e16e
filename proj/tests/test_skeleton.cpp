#include <algorithm>
#include <random>
#include <set>

#include "doctest.h"
#include "dimap/errors.hpp"
#include "dimap/skeleton.hpp"
#include "support.hpp"

using namespace dimap;
using namespace dimap::skeleton;
using namespace testsupport;

namespace {

bool has_full_2x2(const BinaryMask& m) {
  for (int y = 0; y + 1 < m.height(); ++y)
    for (int x = 0; x + 1 < m.width(); ++x)
      if (m.at(x, y) && m.at(x + 1, y) && m.at(x, y + 1) && m.at(x + 1, y + 1)) return true;
  return false;
}

BinaryMask plus_sign(int n, int half_width) {
  BinaryMask m(n, n);
  const int c = n / 2;
  for (int i = 0; i < n; ++i)
    for (int d = -half_width; d <= half_width; ++d) {
      m.set(i, c + d, true);
      m.set(c + d, i, true);
    }
  return m;
}

double dist_to_segment(Point p, Point a, Point b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 == 0.0 ? 0.0 : ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * vx), p.y - (a.y + t * vy));
}

}  // namespace

TEST_CASE("thin examples") {
  CHECK(thin(BinaryMask(12, 9)).empty());

  BinaryMask bar(30, 11);
  for (int y = 4; y <= 6; ++y)
    for (int x = 5; x < 25; ++x) bar.set(x, y, true);
  const auto t = thin(bar);
  // One pixel per column; only the end pixels may sit off the centre row.
  int minx = 100, maxx = -1;
  for (int x = 0; x < 30; ++x) {
    int in_col = 0;
    for (int y = 0; y < 11; ++y) in_col += t.at(x, y) ? 1 : 0;
    CHECK(in_col <= 1);
    if (in_col) {
      minx = std::min(minx, x);
      maxx = std::max(maxx, x);
    }
  }
  CHECK(minx <= 7);
  CHECK(maxx >= 22);
  CHECK(t.count() == static_cast<std::size_t>(maxx - minx + 1));
  for (int x = minx + 1; x < maxx; ++x) CHECK(t.at(x, 5));

  BinaryMask diag(10, 10);
  for (int i = 0; i < 10; ++i) diag.set(i, i, true);
  CHECK(thin(diag) == diag);
}

TEST_CASE("thin keeps a 2x2 block connected") {
  BinaryMask m(6, 6);
  m.set(2, 2, true);
  m.set(3, 2, true);
  m.set(2, 3, true);
  m.set(3, 3, true);
  const auto t = thin(m);
  CHECK(t.count() >= 1);
  CHECK(oracle_components(t).areas.size() == 1);
}

TEST_CASE("thin properties on random shapes") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 80; ++trial) {
    const auto m = trial % 2 ? random_shapes(rng, 40, 32) : random_binary(rng, 24, 24, 0.55);
    const auto t = thin(m);
    CHECK(t.subset_of(m));
    CHECK(thin(t) == t);
    // White noise can leave a 2x2 block whose four pixels are all cut points.
    if (trial % 2) CHECK_FALSE(has_full_2x2(t));
    CHECK(oracle_components(t).areas.size() == oracle_components(m).areas.size());
  }
}

TEST_CASE("m-neighbours drop diagonals covered by a 4-neighbour") {
  BinaryMask m(3, 3);
  m.set(1, 1, true);
  m.set(2, 1, true);
  m.set(2, 2, true);
  m.set(0, 0, true);
  const auto nb = m_neighbors(m, {1, 1});
  CHECK(nb.size() == 2);
  CHECK(std::find(nb.begin(), nb.end(), Pixel{2, 1}) != nb.end());
  CHECK(std::find(nb.begin(), nb.end(), Pixel{0, 0}) != nb.end());
}

TEST_CASE("extract_graph examples") {
  BinaryMask line(14, 3);
  for (int x = 2; x < 12; ++x) line.set(x, 1, true);
  const auto g = extract_graph(line);
  REQUIRE(g.nodes().size() == 2);
  REQUIRE(g.edges().size() == 1);
  CHECK(g.edges()[0].length == doctest::Approx(9.0));
  CHECK(g.units() == Units::Pixels);

  const auto p = extract_graph(plus_sign(21, 0));
  CHECK(p.nodes().size() == 5);
  CHECK(p.edges().size() == 4);
  std::size_t junctions = 0, ends = 0;
  for (const auto& n : p.nodes()) {
    if (p.degree(n.id) == 4) ++junctions;
    if (p.degree(n.id) == 1) ++ends;
  }
  CHECK(junctions == 1);
  CHECK(ends == 4);

  CHECK(extract_graph(BinaryMask(5, 5)).empty());
}

TEST_CASE("pure cycle gets one anchor") {
  BinaryMask ring(12, 12);
  for (int i = 2; i <= 8; ++i) {
    ring.set(i, 2, true);
    ring.set(i, 8, true);
    ring.set(2, i, true);
    ring.set(8, i, true);
  }
  const auto g = extract_graph(ring);
  REQUIRE(g.nodes().size() == 1);
  CHECK(g.nodes()[0].pos == Point{2, 2});
  REQUIRE(g.edges().size() == 1);
  CHECK(g.edges()[0].a == g.edges()[0].b);
  CHECK(g.edges()[0].length == doctest::Approx(24.0));
}

TEST_CASE("trace_chains conserves skeleton pixels") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 60; ++trial) {
    const auto skel = thin(random_shapes(rng, 48, 40));
    std::vector<Pixel> nodes;
    const auto chains = trace_chains(skel, &nodes);
    std::set<std::pair<int, int>> node_set;
    for (const auto& n : nodes) node_set.insert({n.col, n.row});
    std::set<std::pair<int, int>> covered(node_set);
    std::size_t interior = 0;
    for (const auto& ch : chains) {
      REQUIRE(ch.size() >= 2);
      CHECK(node_set.contains({ch.front().col, ch.front().row}));
      CHECK(node_set.contains({ch.back().col, ch.back().row}));
      for (std::size_t i = 1; i < ch.size(); ++i) {
        CHECK(std::max(std::abs(ch[i].col - ch[i - 1].col), std::abs(ch[i].row - ch[i - 1].row)) == 1);
      }
      for (std::size_t i = 1; i + 1 < ch.size(); ++i) {
        CHECK_FALSE(node_set.contains({ch[i].col, ch[i].row}));
        covered.insert({ch[i].col, ch[i].row});
        ++interior;
      }
    }
    CHECK(skel.count() == interior + nodes.size());
    CHECK(covered.size() == skel.count());

    // Rasterizing the graph vertices gives back every skeleton pixel.
    const auto g = extract_graph(skel);
    std::set<std::pair<int, int>> drawn;
    for (const auto& n : g.nodes()) drawn.insert({int(n.pos.x), int(n.pos.y)});
    for (const auto& e : g.edges())
      for (const auto& q : e.geometry) drawn.insert({int(q.x), int(q.y)});
    for (int y = 0; y < skel.height(); ++y)
      for (int x = 0; x < skel.width(); ++x)
        if (skel.at(x, y)) CHECK(drawn.contains({x, y}));
  }
}

TEST_CASE("simplify_rdp examples") {
  const std::vector<Point> two{{0, 0}, {3, 4}};
  CHECK(simplify_rdp(two, 1.0) == two);

  const std::vector<Point> collinear{{0, 0}, {1, 1}, {2, 2}, {3, 3}, {4, 4}};
  const auto c = simplify_rdp(collinear, 0.1);
  REQUIRE(c.size() == 2);
  CHECK(c.front() == Point{0, 0});
  CHECK(c.back() == Point{4, 4});

  const std::vector<Point> zigzag{{0, 0}, {5, 2.4}, {10, 0}};
  CHECK(simplify_rdp(zigzag, 3.0).size() == 2);
  CHECK(simplify_rdp(zigzag, 2.0).size() == 3);

  CHECK_THROWS_AS(simplify_rdp(std::vector<Point>{{1, 1}}, 1.0), InputError);
  CHECK_THROWS_AS(simplify_rdp(two, -1.0), InputError);
}

TEST_CASE("simplify_rdp deviation bound on random polylines") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> coord(-50, 50), eps_dist(0.0, 8.0);
  std::uniform_int_distribution<int> len(2, 40);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Point> pts(len(rng));
    for (auto& p : pts) p = {coord(rng), coord(rng)};
    const double eps = eps_dist(rng);
    const auto out = simplify_rdp(pts, eps);
    REQUIRE(out.size() >= 2);
    CHECK(out.front() == pts.front());
    CHECK(out.back() == pts.back());
    // Subsequence, and each dropped point lies within eps of its bracketing segment.
    std::size_t k = 0;
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < pts.size() && k < out.size(); ++i)
      if (pts[i] == out[k]) {
        kept.push_back(i);
        ++k;
      }
    REQUIRE(kept.size() == out.size());
    for (std::size_t s = 0; s + 1 < kept.size(); ++s)
      for (std::size_t i = kept[s] + 1; i < kept[s + 1]; ++i)
        CHECK(dist_to_segment(pts[i], pts[kept[s]], pts[kept[s + 1]]) <= eps + 1e-12);
  }
}

TEST_CASE("mask_to_graph on road rasters") {
  BinaryMask road(80, 30);
  for (int y = 13; y <= 17; ++y)
    for (int x = 5; x < 75; ++x) road.set(x, y, true);
  const auto g = mask_to_graph(road);
  CHECK(g.nodes().size() == 2);
  CHECK(g.edges().size() == 1);

  const auto cross = mask_to_graph(plus_sign(81, 3));
  CHECK(cross.nodes().size() == 5);
  CHECK(cross.edges().size() == 4);

  CHECK(mask_to_graph(BinaryMask(20, 20)).empty());
}

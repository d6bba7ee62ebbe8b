#include <doctest.h>

#include <cmath>

#include "posestar/maskpost.hpp"
#include "test_util.hpp"

using namespace posestar;

namespace {

EdgeImage ring(int h, int w, int r0, int c0, int r1, int c1) {
  EdgeImage e(h, w, 0);
  for (int c = c0; c <= c1; ++c) e(r0, c) = e(r1, c) = 1;
  for (int r = r0; r <= r1; ++r) e(r, c0) = e(r, c1) = 1;
  return e;
}

// Turns between consecutive steps of a closed contour.
int direction_changes(const Contour& c) {
  int changes = 0;
  for (std::size_t i = 2; i < c.points.size(); ++i) {
    int dr0 = c.points[i - 1].row - c.points[i - 2].row, dc0 = c.points[i - 1].col - c.points[i - 2].col;
    int dr1 = c.points[i].row - c.points[i - 1].row, dc1 = c.points[i].col - c.points[i - 1].col;
    changes += dr0 != dr1 || dc0 != dc1;
  }
  return changes;
}

}  // namespace

TEST_CASE("bresenham_line") {
  auto line = bresenham_line({0, 0}, {0, 4});
  REQUIRE(line.size() == 5);
  CHECK(line.front() == GridPoint{0, 0});
  CHECK(line.back() == GridPoint{0, 4});
  auto diag = bresenham_line({5, 5}, {1, 1});
  CHECK(diag.size() == 5);
  for (std::size_t i = 1; i < diag.size(); ++i) {
    CHECK(std::abs(diag[i].row - diag[i - 1].row) <= 1);
    CHECK(std::abs(diag[i].col - diag[i - 1].col) <= 1);
  }
  auto steep = bresenham_line({0, 0}, {7, 2});
  CHECK(steep.size() == 8);
}

TEST_CASE("bridge_endpoints") {
  SUBCASE("closed ring is unchanged") {
    EdgeImage e = ring(20, 20, 3, 3, 12, 12);
    CHECK(bridge_endpoints(e, 5) == e);
  }
  SUBCASE("collinear segments with a 3-pixel gap are joined") {
    EdgeImage e(10, 20, 0);
    for (int c = 2; c <= 7; ++c) e(4, c) = 1;
    for (int c = 11; c <= 16; ++c) e(4, c) = 1;
    EdgeImage b = bridge_endpoints(e, 5);
    for (int c = 2; c <= 16; ++c) CHECK(b(4, c) == 1);
    CHECK(count_nonzero(b) == 15);
  }
  SUBCASE("isolated pixel is unchanged") {
    EdgeImage e(10, 10, 0);
    e(5, 5) = 1;
    CHECK(bridge_endpoints(e, 5) == e);
  }
  SUBCASE("gaps beyond the limit stay open") {
    EdgeImage e(10, 40, 0);
    for (int c = 0; c <= 5; ++c) e(4, c) = 1;
    for (int c = 30; c <= 35; ++c) e(4, c) = 1;
    CHECK(bridge_endpoints(e, 5) == e);
  }
  CHECK(default_max_gap(300, 400) == doctest::Approx(25.0));
}

TEST_CASE("edge_to_mask") {
  EdgeImage r = ring(5, 5, 1, 1, 3, 3);
  BinaryMask m = edge_to_mask(r);
  CHECK(count_nonzero(m) == 9);
  CHECK(m(2, 2) == 1);
  CHECK(m(0, 0) == 0);

  CHECK(count_nonzero(edge_to_mask(EdgeImage(8, 8, 0))) == 0);
  CHECK(count_nonzero(edge_to_mask(ring(8, 8, 0, 0, 7, 7))) == 64);

  // An open curve yields only its own pixels.
  EdgeImage open(10, 10, 0);
  for (int c = 2; c < 8; ++c) open(5, c) = 1;
  CHECK(edge_to_mask(open) == open);

  FillStats stats;
  edge_to_mask(ring(32, 32, 8, 8, 20, 20), &stats);
  CHECK(stats.visits == 32 * 32 - 13 * 13);
}

TEST_CASE("trace_outer_contour") {
  CHECK(trace_outer_contour(BinaryMask(6, 6, 0)).points.empty());
  BinaryMask sq = testing::rect_mask(10, 10, 2, 3, 6, 8);
  Contour c = trace_outer_contour(sq);
  CHECK(c.closed());
  CHECK(c.points.front() == GridPoint{2, 3});
  // Perimeter pixels of a 4 x 5 block.
  CHECK(c.points.size() - 1 == 14);
  for (const auto& p : c.points) CHECK(sq(p.row, p.col) == 1);
}

TEST_CASE("fill_polygon in pixel-index coordinates") {
  std::vector<Point2> square = {{1, 1}, {1, 5}, {5, 5}, {5, 1}};
  BinaryMask m = fill_polygon(square, 8, 8);
  CHECK(count_nonzero(m) == 4 * 5);
  CHECK(m(1, 1) == 1);
  CHECK(m(4, 5) == 1);
  CHECK(m(5, 3) == 0);
  CHECK(m(3, 6) == 0);
  // A triangle: the column span narrows row by row.
  std::vector<Point2> tri = {{0, 0}, {4, 0}, {4, 4}};
  BinaryMask t = fill_polygon(tri, 6, 6);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 6; ++c) CHECK(t(r, c) == (c <= r ? 1 : 0));
  }
}

TEST_CASE("fit_closed_bspline passes close to a circle") {
  std::vector<Point2> circle;
  for (int i = 0; i < 80; ++i) {
    double a = 2 * M_PI * i / 80;
    circle.push_back({50 + 30 * std::sin(a), 50 + 30 * std::cos(a)});
  }
  auto fit = fit_closed_bspline(circle, 0.5, 2);
  CHECK(fit.size() == 160);
  for (const auto& p : fit) CHECK(std::hypot(p.row - 50, p.col - 50) == doctest::Approx(30).epsilon(0.03));
}

TEST_CASE("smooth_mask") {
  CHECK(count_nonzero(smooth_mask(BinaryMask(20, 20, 0))) == 0);

  SUBCASE("disk grows by about the dilated perimeter band") {
    BinaryMask disk(128, 128, 0);
    for (int r = 0; r < 128; ++r) {
      for (int c = 0; c < 128; ++c) disk(r, c) = std::hypot(r - 64, c - 64) <= 30;
    }
    BinaryMask s = smooth_mask(disk);
    const double before = static_cast<double>(count_nonzero(disk));
    const double after = static_cast<double>(count_nonzero(s));
    const double perimeter = 2 * M_PI * 30;
    CHECK(after > before);
    CHECK(after - before == doctest::Approx(perimeter * 2).epsilon(0.35));
  }
  SUBCASE("staircase outline gets fewer direction changes") {
    // A square whose sides carry one-pixel teeth every other pixel.
    BinaryMask stairs = testing::rect_mask(64, 64, 16, 16, 48, 48);
    for (int k = 16; k < 48; k += 2) {
      stairs(15, k) = stairs(48, k) = stairs(k, 15) = stairs(k, 48) = 1;
    }
    int before = direction_changes(trace_outer_contour(stairs));
    int after = direction_changes(trace_outer_contour(smooth_mask(stairs)));
    CAPTURE(before);
    CAPTURE(after);
    CHECK(after < before);
  }
}

TEST_CASE("finalize") {
  FloatMap region(32, 32, 0.0f);
  for (int i = 8; i < 24; ++i) {
    for (int j = 8; j < 24; ++j) region(i, j) = 0.8f;
  }
  SUBCASE("closed edges are filled and smoothed") {
    EdgeImage e = ring(128, 128, 32, 32, 95, 95);
    auto r = finalize(e, region);
    CHECK_FALSE(r.used_fallback);
    CHECK(count_nonzero(r.filled) == 64 * 64);
    CHECK(r.mask(64, 64) == 1);
    CHECK(r.mask(5, 5) == 0);
  }
  SUBCASE("empty edges fall back to the region support") {
    auto r = finalize(EdgeImage(128, 128, 0), region);
    CHECK(r.used_fallback);
    CHECK(r.mask(64, 64) == 1);
    CHECK(r.mask(5, 5) == 0);
  }
  SUBCASE("a fragment of the support falls back as well") {
    EdgeImage e = ring(128, 128, 40, 40, 50, 50);
    auto r = finalize(e, region);
    CHECK(r.used_fallback);
    FinalizeOptions loose;
    loose.min_support_cover = 0.0;
    CHECK_FALSE(finalize(e, region, loose).used_fallback);
  }
  SUBCASE("only the larger of two loops survives") {
    EdgeImage e = ring(128, 128, 30, 30, 90, 90);
    EdgeImage small = ring(128, 128, 100, 100, 110, 110);
    for (std::size_t p = 0; p < e.size(); ++p) e[p] |= small[p];
    FloatMap wide(32, 32, 0.0f);
    for (int i = 7; i < 23; ++i) {
      for (int j = 7; j < 23; ++j) wide(i, j) = 0.8f;
    }
    auto r = finalize(e, wide);
    CHECK_FALSE(r.used_fallback);
    CHECK(r.filled(60, 60) == 1);
    CHECK(r.filled(105, 105) == 0);
    FinalizeOptions multi;
    multi.multi_region = true;
    auto both = finalize(e, wide, multi);
    CHECK(both.filled(105, 105) == 1);
  }
}

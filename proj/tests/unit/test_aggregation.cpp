#include <doctest.h>

#include <numeric>
#include <random>

#include "posestar/aggregation.hpp"
#include "posestar/errors.hpp"
#include "posestar/pipeline.hpp"
#include "posestar/synthgen.hpp"

using namespace posestar;

TEST_CASE("thresholded_average per pixel") {
  std::vector<FloatMap> maps = {FloatMap(1, 1, 0.5f), FloatMap(1, 1, 0.2f), FloatMap(1, 1, 0.4f)};
  CHECK(thresholded_average(maps, 0.3)(0, 0) == static_cast<float>((0.5f + 0.4f) / 2.0));
  std::vector<FloatMap> low = {FloatMap(1, 1, 0.1f), FloatMap(1, 1, 0.25f)};
  CHECK(thresholded_average(low, 0.3)(0, 0) == 0.0f);
  std::vector<FloatMap> single = {FloatMap(1, 1, 0.9f)};
  CHECK(thresholded_average(single, 0.3)(0, 0) == 0.9f);
  // A value equal to beta does not count.
  std::vector<FloatMap> edge = {FloatMap(1, 1, 0.5f), FloatMap(1, 1, 0.25f)};
  CHECK(thresholded_average(edge, 0.25)(0, 0) == 0.5f);
}

TEST_CASE("thresholded_average parameter and shape errors") {
  std::vector<FloatMap> maps = {FloatMap(2, 2, 0.5f)};
  CHECK_THROWS_AS(thresholded_average(maps, 0.0), ParamError);
  CHECK_THROWS_AS(thresholded_average(maps, 1.0), ParamError);
  maps.push_back(FloatMap(3, 2, 0.5f));
  CHECK_THROWS_AS(thresholded_average(maps, 0.3), ShapeError);
}

TEST_CASE("phase_weights") {
  auto w = phase_weights(100);
  CHECK(w.size() == 100);
  CHECK(w[99] / w[0] == doctest::Approx(100.0));
  CHECK(std::accumulate(w.begin(), w.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  for (std::size_t i = 1; i < w.size(); ++i) CHECK(w[i] > w[i - 1]);
  CHECK(phase_weights(1) == std::vector<double>{1.0});
  CHECK_THROWS_AS(phase_weights(0), ParamError);
}

TEST_CASE("sliding_window_consensus shape and constants") {
  CoarseTargetStack c(100, 16, 16);
  std::fill(c.data.begin(), c.data.end(), 0.625f);
  auto w = phase_weights(100);
  auto grid = sliding_window_consensus(c, w, 3);
  CHECK(grid.rows == 8);
  CHECK(grid.cols == 8);
  CHECK(grid.maps.count == 64);
  CHECK(grid.maps.height == 16);
  for (float v : grid.maps.data) CHECK(v == 0.625f);

  for (int window = 1; window <= 4; ++window) {
    CHECK(sliding_window_consensus(c, w, window).rows == 11 - window);
  }
  CHECK_THROWS_AS(sliding_window_consensus(CoarseTargetStack(99, 4, 4), phase_weights(99), 3), ShapeError);
  CHECK_THROWS_AS(sliding_window_consensus(c, w, 11), ShapeError);
}

TEST_CASE("sliding_window_consensus matches a hand-weighted window") {
  // T = 4 on a 2 x 2 step grid, window 2: one cell, the full weighted mean.
  CoarseTargetStack c(4, 1, 1);
  c.data = {1.0f, 2.0f, 3.0f, 4.0f};
  auto grid = sliding_window_consensus(c, phase_weights(4), 2);
  REQUIRE(grid.maps.count == 1);
  CHECK(grid.maps.data[0] == doctest::Approx((1 * 1 + 2 * 2 + 3 * 3 + 4 * 4) / 10.0));
  // Window 1 returns each step unchanged.
  auto ones = sliding_window_consensus(c, phase_weights(4), 1);
  CHECK(ones.maps.data == c.data);
}

TEST_CASE("sliding_window_consensus is invariant to weight scale") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  CoarseTargetStack c(100, 16, 16);
  for (float& v : c.data) v = u(rng);
  auto w = phase_weights(100);
  std::vector<double> w5 = w;
  for (double& x : w5) x *= 5;
  CHECK(sliding_window_consensus(c, w, 3).maps == sliding_window_consensus(c, w5, 3).maps);
}

TEST_CASE("collapse_to_fine") {
  WindowGrid g;
  g.rows = g.cols = 8;
  g.maps = MapStack(64, 2, 2);
  const float a = 0.3f, b = 0.9f;
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      auto dst = g.maps.map_span(i * 8 + j);
      float v = j == 2 ? (i == 7 ? b : a) : 0.5f;
      std::fill(dst.begin(), dst.end(), v);
    }
  }
  auto fine = collapse_to_fine(g);
  CHECK(fine.count == 8);
  CHECK(fine.map(2)(0, 0) == doctest::Approx((7 * a + b) / 8.0));
  CHECK(fine.map(0)(1, 1) == doctest::Approx(0.5));

  auto by_col = collapse_to_fine(g, CollapseAxis::col);
  CHECK(by_col.map(7)(0, 0) == doctest::Approx((7 * 0.5 + b) / 8.0));

  std::fill(g.maps.data.begin(), g.maps.data.end(), 0.0f);
  for (float v : collapse_to_fine(g).data) CHECK(v == 0.0f);
}

TEST_CASE("build_coarse_stack on hand stacks") {
  LocalizedStack m;
  m.steps = 2;
  m.height = m.width = 4;
  m.tokens.resize(3);
  m.data.assign(2 * 3 * 16, 0.0f);
  for (int t = 0; t < 2; ++t) {
    for (int p = 0; p < 16; ++p) m.data[(t * 3 + 1) * 16 + p] = 1.0f;
  }
  auto c = build_coarse_stack(m, 0.3);
  for (float v : c.data) CHECK(v == 1.0f);
  std::fill(m.data.begin(), m.data.end(), 0.0f);
  for (float v : build_coarse_stack(m, 0.3).data) CHECK(v == 0.0f);
}

TEST_CASE("stabilization steps localize the garment best") {
  auto scene = synth::generate_scene(synth::PosePreset::standing, 11, "belly-length blouse");
  auto attn = synth::generate_attention(scene, synth::PhaseProfile{.seed = 11});
  TokenGroup group = expand_to_token_group(parse_instruction(scene.instruction));
  auto m = localize(attn.cross, group, scene.keypoints, default_anchor_table(), {});
  auto coarse = build_coarse_stack(m, 0.3);

  // Ground truth at attention resolution: cells at least half covered.
  BinaryImage gt(16, 16, 0);
  const int cell = scene.height / 16;
  for (int i = 0; i < 16; ++i) {
    for (int j = 0; j < 16; ++j) {
      int hits = 0;
      for (int y = i * cell; y < (i + 1) * cell; ++y) {
        for (int x = j * cell; x < (j + 1) * cell; ++x) hits += scene.ground_truth(y, x);
      }
      gt(i, j) = 2 * hits >= cell * cell;
    }
  }
  auto phase_iou = [&](int begin, int end) {
    double acc = 0;
    for (int t = begin; t < end; ++t) {
      BinaryImage pred(16, 16, 0);
      FloatMap map = coarse.map(t);
      for (std::size_t p = 0; p < pred.size(); ++p) pred[p] = map[p] > 0;
      acc += iou(pred, gt);
    }
    return acc / (end - begin);
  };
  const double p1 = phase_iou(0, 30), p2 = phase_iou(30, 60), p3 = phase_iou(60, 100);
  CAPTURE(p1);
  CAPTURE(p2);
  CAPTURE(p3);
  CHECK(p2 > p1);
  CHECK(p2 > p3);
}

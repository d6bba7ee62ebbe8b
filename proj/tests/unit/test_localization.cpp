#include <doctest.h>

#include <cmath>

#include "posestar/errors.hpp"
#include "posestar/localization.hpp"
#include "posestar/synthgen.hpp"

using namespace posestar;

namespace {

RegionMap region(FloatMap m) { return RegionMap{std::move(m), std::nullopt, std::nullopt, false}; }

FloatMap one_hot(int row, int col, int size = 16, float v = 1.0f) {
  FloatMap m(size, size, 0.0f);
  m(row, col) = v;
  return m;
}

KeypointSet torso_keypoints() {
  KeypointSet k;
  k.image_width = 512;
  k.image_height = 768;
  k.entries["LHip"] = {100, 400, 0.9};
  k.entries["RHip"] = {160, 400, 0.9};
  k.entries["Neck"] = {130, 200, 0.9};
  return k;
}

}  // namespace

TEST_CASE("normalize_map") {
  FloatMap m(1, 2, std::vector<float>{0.2f, 0.4f});
  auto n = normalize_map(region(m));
  CHECK(n.values(0, 0) == doctest::Approx(0.5));
  CHECK(n.values(0, 1) == 1.0f);
  CHECK(normalize_map(n).values == n.values);

  auto z = normalize_map(region(FloatMap(4, 4, 0.0f)));
  CHECK(z.degenerate);
  CHECK(z.values == FloatMap(4, 4, 0.0f));
}

TEST_CASE("attention_centroid") {
  CHECK(attention_centroid(one_hot(2, 3)) == GridPoint{2, 3});
  FloatMap pair(16, 16, 0.0f);
  pair(0, 0) = pair(0, 2) = 0.7f;
  CHECK(attention_centroid(pair) == GridPoint{0, 1});
  FloatMap uniform(5, 5, 1.0f);
  CHECK(attention_centroid(uniform) == GridPoint{2, 2});
  CHECK_THROWS_AS(attention_centroid(FloatMap(4, 4, 0.0f)), DegenerateMapError);
}

TEST_CASE("calibrate_star moves mass onto the keypoint cell") {
  FloatMap m = one_hot(2, 3);
  m(2, 4) = 0.5f;  // centroid rounds to (2, 3)
  Keypoint kp{9.5 * 32, 9.5 * 32, 0.9};  // 512 px image, 16 grid: cell (9, 9)
  auto out = calibrate_star(region(m), &kp, 512, 512);
  REQUIRE(out.anchor);
  CHECK(*out.anchor == GridPoint{9, 9});
  CHECK(out.values(9, 9) == 1.0f);
  CHECK(out.values(9, 10) == 0.5f);
  CHECK(attention_centroid(out.values) == GridPoint{9, 9});

  Keypoint same{3.2 * 32, 2.1 * 32, 0.9};
  CHECK(calibrate_star(region(m), &same, 512, 512).values == m);
}

TEST_CASE("calibrate_star falls back to the centroid") {
  FloatMap m = one_hot(4, 5);
  auto missing = calibrate_star(region(m), nullptr, 512, 512);
  CHECK(missing.values == m);
  CHECK(*missing.anchor == GridPoint{4, 5});
  Keypoint weak{100, 100, 0.05};
  CHECK(calibrate_star(region(m), &weak, 512, 512).values == m);
}

TEST_CASE("anchor_fleshy uses the affine keypoint combination") {
  KeypointSet k = torso_keypoints();
  const auto* waist = default_anchor_table().find("Waist");
  REQUIRE(waist);
  auto p = anchor_point(waist->front(), k);
  REQUIRE(p);
  // 0.7 * hip midpoint (130, 400) + 0.3 * neck (130, 200)
  CHECK(p->first == doctest::Approx(130.0));
  CHECK(p->second == doctest::Approx(340.0));

  auto out = anchor_fleshy(region(one_hot(1, 1)), default_anchor_table(), k, "Waist");
  CHECK(*out.anchor == pixel_to_grid(130, 340, 512, 768, 16, 16));
  CHECK(*out.anchor == GridPoint{7, 4});

  k.entries.erase("RHip");
  auto fb = anchor_fleshy(region(one_hot(1, 1)), default_anchor_table(), k, "Waist");
  CHECK(*fb.anchor == GridPoint{1, 1});
  CHECK(fb.values == one_hot(1, 1));
}

TEST_CASE("single-keypoint rule matches calibrate_star") {
  KeypointSet k = torso_keypoints();
  AnchorRule rule{"Neck", {{"Neck", 1.0}}};
  FloatMap m = one_hot(12, 3);
  auto a = anchor_fleshy(region(m), rule, k);
  auto b = calibrate_star(region(m), k.find("Neck"), k.image_width, k.image_height);
  CHECK(a.values == b.values);
  CHECK(*a.anchor == *b.anchor);
}

TEST_CASE("radial_constrain") {
  FloatMap m(16, 16, 1.0f);
  auto out = radial_constrain(region(m), {8, 8}, 3);
  CHECK(out.values(8, 10) == 1.0f);
  CHECK(out.values(8, 12) == 0.0f);
  CHECK(radial_constrain(region(m), {8, 8}, 40).values == m);
  CHECK_THROWS_AS(radial_constrain(region(m), {8, 8}, 0), ParamError);
}

TEST_CASE("choose_radius over skeleton neighbours") {
  // 160 px image on a 16 grid: 10 px per cell.
  KeypointSet k;
  k.image_width = k.image_height = 160;
  k.entries["Neck"] = {80, 80, 1};
  k.entries["RShoulder"] = {60, 80, 1};  // 2.0
  k.entries["LShoulder"] = {102, 80, 1};  // 2.2
  k.entries["Nose"] = {80, 50, 1};        // 3.0
  CHECK(choose_radius("Neck", k, RadiusMode::average, 16, 16) == doctest::Approx(2.4));
  CHECK(choose_radius("Neck", k, RadiusMode::min, 16, 16) == doctest::Approx(2.0));
  CHECK(choose_radius("Neck", k, RadiusMode::max, 16, 16) == doctest::Approx(3.0));

  KeypointSet lonely;
  lonely.image_width = lonely.image_height = 160;
  lonely.entries["Neck"] = {80, 80, 1};
  CHECK(choose_radius("Neck", lonely, RadiusMode::average, 16, 16) == 4.0);
  CHECK(choose_radius("RKnee", lonely, RadiusMode::average, 16, 16, 5.5) == 5.5);
}

TEST_CASE("pixel_to_grid floors and clamps") {
  CHECK(pixel_to_grid(0, 0, 512, 512, 16, 16) == GridPoint{0, 0});
  CHECK(pixel_to_grid(31.9, 32.0, 512, 512, 16, 16) == GridPoint{1, 0});
  CHECK(pixel_to_grid(511.99, 511.99, 512, 512, 16, 16) == GridPoint{15, 15});
}

TEST_CASE("localize on a synthetic scene") {
  auto scene = synth::generate_scene(synth::PosePreset::standing, 7, "belly-length blouse");
  auto attn = synth::generate_attention(scene, synth::PhaseProfile::zero_jitter());
  TokenGroup group = expand_to_token_group(parse_instruction("belly-length blouse"));
  auto m = localize(attn.cross, group, scene.keypoints, default_anchor_table(), {});
  CHECK(m.steps == 100);
  CHECK(m.height == 16);
  // Bilateral stars and Arms split per side. Every anatomical lane is
  // calibrated; the garment noun is used as is.
  std::vector<std::string> labels;
  for (const auto& t : m.tokens) {
    labels.push_back(t.label);
    CAPTURE(t.label);
    CHECK(t.calibrated == (t.kind != TokenKind::clothes));
  }
  CHECK(std::find(labels.begin(), labels.end(), "RShoulder") != labels.end());
  CHECK(std::find(labels.begin(), labels.end(), "LShoulder") != labels.end());
  CHECK(std::find(labels.begin(), labels.end(), "Knee") == labels.end());
  CHECK(m.data.size() == m.map_size() * m.tokens.size() * 100);

  SUBCASE("dropping a keypoint keeps the lane uncalibrated") {
    KeypointSet k = scene.keypoints;
    k.entries.erase("Neck");
    auto fb = localize(attn.cross, group, k, default_anchor_table(), {});
    bool neck_seen = false;
    for (const auto& t : fb.tokens) {
      if (t.label == "Neck") {
        neck_seen = true;
        CHECK_FALSE(t.calibrated);
      }
    }
    CHECK(neck_seen);
  }

  SUBCASE("an all-zero stack has no usable tokens") {
    auto zero = attn.cross;
    std::fill(zero.data.begin(), zero.data.end(), 0.0f);
    CHECK_THROWS_AS(localize(zero, group, scene.keypoints, default_anchor_table(), {}), NoTokensError);
  }
}

#include <doctest.h>

#include <cmath>

#include "posestar/aggregation.hpp"
#include "posestar/errors.hpp"
#include "posestar/pipeline.hpp"
#include "posestar/synthgen.hpp"
#include "test_util.hpp"

using namespace posestar;
using namespace posestar::synth;

namespace {

double joint_angle_deg(const SyntheticScene& s, const char* a, const char* joint, const char* b) {
  auto p = s.joints.at(a), q = s.joints.at(joint), r = s.joints.at(b);
  double ux = p.x - q.x, uy = p.y - q.y, vx = r.x - q.x, vy = r.y - q.y;
  return std::acos((ux * vx + uy * vy) / (std::hypot(ux, uy) * std::hypot(vx, vy))) * 180 / M_PI;
}

}  // namespace

TEST_CASE("rng is reproducible and in range") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    double u = a.uniform();
    CHECK(u == b.uniform());
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  double acc = 0, acc2 = 0;
  Rng n(9);
  for (int i = 0; i < 20000; ++i) {
    double v = n.normal();
    acc += v;
    acc2 += v * v;
  }
  CHECK(acc / 20000 == doctest::Approx(0).epsilon(0.03));
  CHECK(acc2 / 20000 == doctest::Approx(1).epsilon(0.05));
}

TEST_CASE("scenes are deterministic per seed") {
  auto a = generate_scene(PosePreset::standing, 7);
  auto b = generate_scene(PosePreset::standing, 7);
  CHECK(a.image == b.image);
  CHECK(a.ground_truth == b.ground_truth);
  CHECK(a.keypoints == b.keypoints);
  CHECK_FALSE(generate_scene(PosePreset::standing, 8).image == a.image);
  validate(a.keypoints);

  auto x = generate_attention(a, PhaseProfile{.seed = 7});
  auto y = generate_attention(b, PhaseProfile{.seed = 7});
  CHECK(x.cross == y.cross);
  CHECK(x.self == y.self);
}

TEST_CASE("articulated preset bends a limb past a right angle") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto s = generate_scene(PosePreset::articulated, seed);
    double smallest = 180;
    smallest = std::min(smallest, joint_angle_deg(s, "RShoulder", "RElbow", "RWrist"));
    smallest = std::min(smallest, joint_angle_deg(s, "LShoulder", "LElbow", "LWrist"));
    smallest = std::min(smallest, joint_angle_deg(s, "RHip", "RKnee", "RAnkle"));
    smallest = std::min(smallest, joint_angle_deg(s, "LHip", "LKnee", "LAnkle"));
    CHECK(smallest < 90);
  }
}

TEST_CASE("blouse ground truth stops at the belly") {
  auto s = generate_scene(PosePreset::standing, 3, "belly-length blouse");
  const double belly = anchor_row(s, "Belly");
  std::size_t below = 0, total = 0;
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      if (!s.ground_truth(y, x)) continue;
      ++total;
      if (y > belly + 1) ++below;
    }
  }
  CHECK(total > 1000);
  CHECK(below == 0);
  // Ground truth lies on the body.
  for (std::size_t p = 0; p < s.body.size(); ++p) {
    if (s.ground_truth[p]) REQUIRE(s.body[p]);
  }
}

TEST_CASE("every supported instruction yields a non-empty ground truth") {
  for (const auto& instr : supported_instructions()) {
    for (auto preset : {PosePreset::standing, PosePreset::seated, PosePreset::articulated}) {
      CAPTURE(instr);
      auto s = generate_scene(preset, 5, instr);
      CHECK(count_nonzero(s.ground_truth) > 500);
    }
  }
  auto s = generate_scene(PosePreset::standing, 5, "knee-length skirt");
  CHECK(anchor_row(s, "Knee") > anchor_row(s, "Hip"));
}

TEST_CASE("attention stacks have the documented shapes") {
  auto s = generate_scene(PosePreset::seated, 12, "knee-length dress");
  auto a = generate_attention(s, PhaseProfile{.seed = 1}, 64);
  CHECK(a.cross.steps == 64);
  CHECK(a.cross.height == 16);
  CHECK(a.self.maps == 8);
  CHECK(a.self.height == 32);
  CHECK(a.cross.tokens == static_cast<int>(tokens_for_instruction("knee-length dress").size()) + 1);
  for (float v : a.cross.data) REQUIRE((v >= 0.0f && v <= 1.0f));
}

TEST_CASE("zero-jitter stabilization holds the tight blob") {
  auto s = generate_scene(PosePreset::standing, 4, "belly-length blouse");
  PhaseProfile p = PhaseProfile::zero_jitter();
  p.paper_band = false;
  p.phase1_frac = 0;
  p.phase2_frac = 1;
  p.phase3_frac = 0;
  auto tokens = tokens_for_instruction(s.instruction);
  auto a = generate_attention(s, p, tokens, 25);
  for (int n = 0; n < a.cross.tokens; ++n) {
    FloatMap blob = token_blob(s, tokens[n]);
    for (int t = 0; t < 25; ++t) REQUIRE(a.cross.map(t, n) == blob);
  }
}

TEST_CASE("phase profile validation") {
  PhaseProfile p;
  CHECK_NOTHROW(p.validate());
  p.phase2_frac = 0.5;
  p.phase3_frac = 0.2;
  CHECK_THROWS_AS(p.validate(), ParamError);
  p.paper_band = false;
  CHECK_NOTHROW(p.validate());
  p.phase3_frac = 0.3;
  CHECK_THROWS_AS(p.validate(), ParamError);
  CHECK_THROWS_AS(generate_scene(PosePreset::standing, 1, "belly-length blouse", 16), ValueError);
  CHECK_THROWS_AS(pose_preset_from_string("lying"), ValueError);
}

TEST_CASE("stabilization maps pass the token threshold on the garment") {
  // At beta = 0.3 the zero-jitter phase II coarse maps cover most of the
  // garment cells at attention resolution.
  auto s = generate_scene(PosePreset::standing, 21, "belly-length blouse");
  auto a = generate_attention(s, PhaseProfile::zero_jitter());
  TokenGroup group = expand_to_token_group(parse_instruction(s.instruction));
  auto m = localize(a.cross, group, s.keypoints, default_anchor_table(), {});
  auto coarse = build_coarse_stack(m, 0.3);
  FloatMap c = coarse.map(45);
  const int cell = s.height / 16;
  int garment_cells = 0, covered = 0;
  for (int i = 0; i < 16; ++i) {
    for (int j = 0; j < 16; ++j) {
      int hits = 0;
      for (int y = i * cell; y < (i + 1) * cell; ++y) {
        for (int x = j * cell; x < (j + 1) * cell; ++x) hits += s.ground_truth(y, x);
      }
      if (4 * hits < 3 * cell * cell) continue;
      ++garment_cells;
      covered += c(i, j) > 0;
    }
  }
  REQUIRE(garment_cells > 10);
  CHECK(static_cast<double>(covered) / garment_cells >= 0.9);
}

TEST_CASE("fixtures written to disk load back") {
  auto dir = testing::scratch_dir("fixture");
  auto s = generate_scene(PosePreset::articulated, 30, "ankle-length pants", 96);
  auto a = generate_attention(s, PhaseProfile{.seed = 30});
  write_fixture(dir, s, a);
  CHECK(std::filesystem::exists(dir / "gt_ankle-length_pants.png"));
  Fixture f = load_fixture(dir);
  CHECK(f.inputs.attn == a.cross);
  CHECK(f.inputs.self_attn == a.self);
  REQUIRE(f.cases.size() == 1);
  CHECK(f.cases[0].instruction == "ankle-length pants");
  CHECK(f.cases[0].ground_truth == s.ground_truth);
  CHECK(instruction_slug("belly-length blouse") == "belly-length_blouse");
}

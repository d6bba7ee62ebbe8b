#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "posestar/errors.hpp"
#include "posestar/pipeline.hpp"
#include "posestar/synthgen.hpp"
#include "test_util.hpp"

using namespace posestar;
using nlohmann::json;

namespace {

PipelineInputs synthetic_inputs(synth::PosePreset preset, std::uint64_t seed, const std::string& instruction,
                                BinaryImage* gt = nullptr) {
  auto scene = synth::generate_scene(preset, seed, instruction);
  synth::PhaseProfile profile;
  profile.seed = seed;
  auto attn = synth::generate_attention(scene, profile);
  if (gt) *gt = scene.ground_truth;
  return {scene.image, attn.cross, attn.self, scene.keypoints, instruction};
}

int count_lines(const std::string& s) {
  int n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

int shell(const std::string& cmd) {
  int status = std::system((cmd + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("iou") {
  BinaryMask a = testing::rect_mask(10, 10, 0, 0, 4, 4);
  BinaryMask b = testing::rect_mask(10, 10, 0, 2, 4, 6);
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, testing::rect_mask(10, 10, 6, 6, 9, 9)) == 0.0);
  CHECK(iou(a, b) == doctest::Approx(1.0 / 3.0));
  CHECK(iou(BinaryMask(3, 3, 0), BinaryMask(3, 3, 0)) == 1.0);
  CHECK_THROWS_AS(iou(a, BinaryMask(5, 5, 0)), ShapeError);
}

TEST_CASE("config validation") {
  PipelineConfig c;
  CHECK_NOTHROW(c.validate());
  auto bad = [](auto mutate) {
    PipelineConfig c;
    mutate(c);
    return c;
  };
  CHECK_THROWS_AS(bad([](auto& c) { c.beta = 0; }).validate(), ParamError);
  CHECK_THROWS_AS(bad([](auto& c) { c.alpha = 1; }).validate(), ParamError);
  CHECK_THROWS_AS(bad([](auto& c) { c.mu = 0; }).validate(), ParamError);
  CHECK_THROWS_AS(bad([](auto& c) { c.window = 5; }).validate(), ParamError);
  CHECK_THROWS_AS(bad([](auto& c) { c.steps = 99; }).validate(), ParamError);
  CHECK_NOTHROW(bad([](auto& c) {
                  c.steps = 99;
                  c.window = 1;
                }).validate());
  CHECK_THROWS_AS(bad([](auto& c) { c.min_support_cover = 1.5; }).validate(), ParamError);
  CHECK_THROWS_AS(bad([](auto& c) { c.canny.low = 200; }).validate(), ParamError);
}

TEST_CASE("config from JSON") {
  auto c = config_from_json(json{{"beta", 0.45}, {"r_mode", "max"}, {"window", "2"}, {"min_support_cover", 0.3},
                                 {"multi_region", true}});
  CHECK(c.beta == 0.45);
  CHECK(c.r_mode == RadiusMode::max);
  CHECK(c.window == 2);
  CHECK(c.min_support_cover == 0.3);
  CHECK(c.multi_region);
  CHECK_THROWS_AS(config_from_json(json{{"gamma", 1}}), ParamError);
  CHECK_THROWS_AS(config_from_json(json{{"beta", "high"}}), ParamError);
  CHECK_THROWS_AS(config_from_json(json{{"r_mode", "median"}}), ParamError);
}

TEST_CASE("standing belly-length blouse reaches IoU 0.7") {
  BinaryImage gt;
  auto in = synthetic_inputs(synth::PosePreset::standing, 7, "belly-length blouse", &gt);
  auto r = run(in, PipelineConfig{});
  double score = iou(r.mask, gt);
  CAPTURE(score);
  CHECK(score >= 0.7);
  CHECK(r.mask.height() == 256);
  CHECK(r.fine.count == 8);
  CHECK(r.region.height() == 32);
  CHECK_FALSE(r.report.tokens.empty());
  CHECK(r.report.total_ms > 0);
}

TEST_CASE("runs are deterministic") {
  auto in = synthetic_inputs(synth::PosePreset::seated, 4, "knee-length skirt");
  CHECK(run(in, PipelineConfig{}).mask == run(in, PipelineConfig{}).mask);
}

TEST_CASE("pipeline error paths") {
  auto in = synthetic_inputs(synth::PosePreset::standing, 2, "belly-length blouse");
  SUBCASE("all-zero attention") {
    std::fill(in.attn.data.begin(), in.attn.data.end(), 0.0f);
    CHECK_THROWS_AS(run(in, PipelineConfig{}), NoTokensError);
  }
  SUBCASE("step count mismatch") {
    PipelineConfig c;
    c.steps = 64;
    CHECK_THROWS_AS(run(in, c), ShapeError);
  }
  SUBCASE("keypoints for another image size") {
    in.keypoints.image_width = 300;
    CHECK_THROWS(run(in, PipelineConfig{}));
  }
  SUBCASE("unknown garment") {
    in.instruction = "sofa";
    CHECK_THROWS_AS(run(in, PipelineConfig{}), UnknownGarmentError);
  }
  SUBCASE("missing keypoint still yields a mask") {
    in.keypoints.entries.erase("Neck");
    auto r = run(in, PipelineConfig{});
    CHECK(count_nonzero(r.mask) > 0);
    bool logged = false;
    for (const auto& f : r.report.fallbacks) logged |= f == "uncalibrated:Neck";
    CHECK(logged);
  }
}

TEST_CASE("debug artifacts") {
  auto dir = testing::scratch_dir("debug");
  auto in = synthetic_inputs(synth::PosePreset::standing, 5, "belly-length blouse");
  PipelineConfig c;
  c.debug_dir = dir;
  auto r = run(in, c);
  CHECK(std::filesystem::exists(dir / "combined.png"));
  CHECK(std::filesystem::exists(dir / "fine_0.png"));
  CHECK(std::filesystem::exists(dir / "coarse_t100.png"));
  CHECK(std::filesystem::exists(dir / "edges.png"));
  CHECK(std::filesystem::exists(dir / "mask.png"));
  CHECK(image_to_mask(read_image(dir / "mask.png")) == r.mask);
  CHECK(heatmap(FloatMap(2, 2, 1.0f), 3).width == 6);
}

TEST_CASE("fixtures and sweeps") {
  auto root = testing::scratch_dir("suite");
  synth::SuiteOptions opts;
  opts.count = 3;
  opts.size = 128;
  auto dirs = synth::write_suite(root, opts);
  REQUIRE(dirs.size() == 3);
  auto fixtures = load_fixtures(root);
  REQUIRE(fixtures.size() == 3);
  CHECK(fixtures[0].cases.size() == 1);

  auto windows = sweep(json{{"window", {1, 2, 3, 4}}}, fixtures);
  CHECK(windows.size() == 4);
  std::string csv = sweep_to_csv(windows);
  CHECK(count_lines(csv) == 5);
  CHECK(csv.rfind("window,mean_iou,runs,failures\n", 0) == 0);
  for (const auto& row : windows) {
    CHECK(row.runs == 3);
    CHECK(row.mean_iou > 0);
  }
  auto radii = sweep(json{{"r_mode", {"min", "average", "max"}}}, fixtures);
  CHECK(count_lines(sweep_to_csv(radii)) == 4);
  auto grid = sweep(json{{"beta", {0.25, 0.4}}, {"alpha", {0.35, 0.5, 0.65}}}, fixtures);
  CHECK(grid.size() == 6);

  CHECK_THROWS_AS(sweep(json{{"window", {3}}}, {}), ParamError);
  CHECK_THROWS_AS(sweep(json::object(), fixtures), ParamError);
}

TEST_CASE("command line") {
  const std::string exe = POSESTAR_CLI_PATH;
  auto dir = testing::scratch_dir("cli");
  const std::string fx = (dir / "fx").string();
  REQUIRE(shell(exe + " synth --pose standing --seed 7 --size 128 --out-dir " + fx) == 0);
  const std::string common = exe + " generate --image " + fx + "/image.png --attn " + fx + "/attn.astd --self-attn " +
                             fx + "/self.astd --keypoints " + fx + "/keypoints.json ";
  const std::string out = (dir / "mask.png").string();
  const std::string report = (dir / "report.json").string();

  CHECK(shell(common + "--instruction \"belly-length blouse\" --out " + out + " --gt " + fx +
              "/gt_belly-length_blouse.png --report " + report) == 0);
  CHECK(std::filesystem::exists(out));
  std::ifstream rf(report);
  json doc = json::parse(rf);
  CHECK(doc.contains("iou"));
  CHECK(doc.contains("timings_ms"));

  CHECK(shell(common + "--instruction sofa --out " + out) == 2);
  CHECK(shell(common + "--instruction \"belly-length blouse\" --beta 1.5 --out " + out) == 3);
  CHECK(shell(exe + " generate --image missing.png --attn a --self-attn b --keypoints k --instruction blouse --out " +
              out) == 2);
  CHECK(shell(exe + " frobnicate") != 0);

  std::ofstream(dir / "grid.json") << R"({"window":[1,3]})";
  const std::string csv = (dir / "sweep.csv").string();
  CHECK(shell(exe + " sweep --fixtures " + dir.string() + " --grid " + (dir / "grid.json").string() + " --out " +
              csv) == 0);
  std::ifstream cf(csv);
  std::stringstream ss;
  ss << cf.rdbuf();
  CHECK(count_lines(ss.str()) == 3);
}

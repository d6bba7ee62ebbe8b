// posestar command-line front end: generate, sweep, synth.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include <json.hpp>

#include "posestar/errors.hpp"
#include "posestar/pipeline.hpp"
#include "posestar/synthgen.hpp"

namespace {

using namespace posestar;
using nlohmann::json;

struct GenerateArgs {
  std::string image, attn, self_attn, keypoints, instruction, out;
  std::optional<double> beta, alpha, mu;
  std::optional<std::string> r_mode, debug_dir, gt, config, report;
  std::optional<int> window;
  bool mu_literal = false;
  bool multi_region = false;
};

int cmd_generate(const GenerateArgs& a) {
  PipelineConfig config;
  if (a.config) {
    std::ifstream f(*a.config);
    if (!f) throw IoError("cannot open config " + *a.config);
    json doc;
    try {
      doc = json::parse(f);
    } catch (const json::exception& e) {
      throw FormatError("config: " + std::string(e.what()));
    }
    config = config_from_json(doc);
  }
  if (a.beta) config.beta = *a.beta;
  if (a.alpha) config.alpha = *a.alpha;
  if (a.mu) config.mu = *a.mu;
  if (a.window) config.window = *a.window;
  if (a.r_mode) config.r_mode = radius_mode_from_string(*a.r_mode);
  if (a.debug_dir) config.debug_dir = *a.debug_dir;
  config.mu_literal = config.mu_literal || a.mu_literal;
  config.multi_region = config.multi_region || a.multi_region;

  PipelineInputs in;
  in.image = read_image(a.image);
  in.attn = read_attention_stack(a.attn);
  in.self_attn = read_self_attention_stack(a.self_attn);
  in.keypoints = read_keypoints(a.keypoints);
  in.instruction = a.instruction;
  if (in.attn.steps != config.steps) config.steps = in.attn.steps;

  RunResult result = run(in, config);
  write_mask(result.mask, a.out);
  result.report.mask_path = a.out;
  if (a.gt) result.report.iou = iou(result.mask, image_to_mask(read_image(*a.gt)));
  for (const auto& w : result.report.warnings) std::cerr << "warning: " << w << '\n';

  std::string report = result.report.to_json().dump(2);
  if (a.report) {
    std::ofstream f(*a.report);
    if (!f) throw IoError("cannot write " + *a.report);
    f << report << '\n';
  }
  std::cout << report << '\n';
  return 0;
}

int cmd_sweep(const std::string& fixtures, const std::string& grid_path, const std::string& out) {
  std::ifstream f(grid_path);
  if (!f) throw IoError("cannot open grid " + grid_path);
  json grid;
  try {
    grid = json::parse(f);
  } catch (const json::exception& e) {
    throw FormatError("grid: " + std::string(e.what()));
  }
  std::string csv = sweep_to_csv(sweep(grid, load_fixtures(fixtures)));
  std::ofstream o(out);
  if (!o) throw IoError("cannot write " + out);
  o << csv;
  std::cout << csv;
  return 0;
}

int cmd_synth(const std::string& pose, std::uint64_t seed, const std::string& instruction, int size, int steps,
              bool zero_jitter, const std::string& out_dir) {
  auto scene = synth::generate_scene(synth::pose_preset_from_string(pose), seed, instruction, size);
  synth::PhaseProfile profile = zero_jitter ? synth::PhaseProfile::zero_jitter() : synth::PhaseProfile{};
  profile.seed = seed;
  synth::write_fixture(out_dir, scene, synth::generate_attention(scene, profile, steps));
  std::cout << "wrote fixture to " << out_dir << '\n';
  return 0;
}

int cmd_suite(const std::string& out_dir, int count, int size, std::uint64_t base_seed, bool zero_jitter) {
  synth::SuiteOptions opts;
  opts.count = count;
  opts.size = size;
  opts.base_seed = base_seed;
  if (zero_jitter) opts.profile = synth::PhaseProfile::zero_jitter();
  auto dirs = synth::write_suite(out_dir, opts);
  std::cout << "wrote " << dirs.size() << " fixtures to " << out_dir << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anatomy-aware human mask synthesis from diffusion attention"};
  app.require_subcommand(1);

  GenerateArgs g;
  auto* gen = app.add_subcommand("generate", "Produce a mask for one image and instruction");
  gen->add_option("--image", g.image, "Source image (.png or .pgm)")->required();
  gen->add_option("--attn", g.attn, "Cross-attention stack (ASTD)")->required();
  gen->add_option("--self-attn", g.self_attn, "Self-attention stack (ASTD)")->required();
  gen->add_option("--keypoints", g.keypoints, "Keypoint JSON")->required();
  gen->add_option("--instruction", g.instruction, "Edit instruction, e.g. \"belly-length blouse\"")->required();
  gen->add_option("--out", g.out, "Output mask (.png or .pgm)")->required();
  gen->add_option("--beta", g.beta, "Token threshold");
  gen->add_option("--alpha", g.alpha, "Cross/self merge threshold");
  gen->add_option("--mu", g.mu, "Edge band as a fraction of the inscribed radius");
  gen->add_option("--r-mode", g.r_mode, "Radius mode: min, average or max");
  gen->add_option("--window", g.window, "Sliding window size (1-4)");
  gen->add_option("--debug-dir", g.debug_dir, "Write per-stage heatmaps here");
  gen->add_option("--gt", g.gt, "Ground-truth mask; adds IoU to the report");
  gen->add_option("--config", g.config, "JSON config file; flags override it");
  gen->add_option("--report", g.report, "Also write the run report here");
  gen->add_flag("--mu-literal", g.mu_literal, "Keep edges near the region center instead of its boundary");
  gen->add_flag("--multi-region", g.multi_region, "Keep every filled component");

  std::string fixtures, grid, csv_out;
  auto* sw = app.add_subcommand("sweep", "Mean IoU over a parameter grid");
  sw->add_option("--fixtures", fixtures, "Directory of fixture subdirectories")->required();
  sw->add_option("--grid", grid, "JSON object mapping config keys to value lists")->required();
  sw->add_option("--out", csv_out, "CSV output")->required();

  std::string pose = "standing", instruction = "belly-length blouse", out_dir;
  std::uint64_t seed = 7;
  int size = 256, steps = 100, count = 50;
  bool zero_jitter = false;
  auto* syn = app.add_subcommand("synth", "Write one synthetic fixture");
  syn->add_option("--pose", pose, "standing, seated or articulated")->capture_default_str();
  syn->add_option("--seed", seed, "RNG seed")->capture_default_str();
  syn->add_option("--instruction", instruction, "Instruction to draw ground truth for")->capture_default_str();
  syn->add_option("--size", size, "Image side in pixels")->capture_default_str();
  syn->add_option("--steps", steps, "Diffusion steps")->capture_default_str();
  syn->add_flag("--zero-jitter", zero_jitter, "Noise-free phase schedule");
  syn->add_option("--out-dir", out_dir, "Output directory")->required();

  std::string suite_dir;
  auto* suite = app.add_subcommand("suite", "Write a suite of synthetic fixtures");
  suite->add_option("--out-dir", suite_dir, "Output directory")->required();
  suite->add_option("--count", count, "Number of fixtures")->capture_default_str();
  suite->add_option("--size", size, "Image side in pixels")->capture_default_str();
  suite->add_option("--seed", seed, "Base seed")->capture_default_str();
  suite->add_flag("--zero-jitter", zero_jitter, "Noise-free phase schedule");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_generate(g);
    if (*sw) return cmd_sweep(fixtures, grid, csv_out);
    if (*syn) return cmd_synth(pose, seed, instruction, size, steps, zero_jitter, out_dir);
    if (*suite) return cmd_suite(suite_dir, count, size, seed, zero_jitter);
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}

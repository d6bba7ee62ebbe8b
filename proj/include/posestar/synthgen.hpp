#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "posestar/grid.hpp"
#include "posestar/instruction.hpp"
#include "posestar/tensorio.hpp"

// Synthetic scenes with known ground truth and attention stacks that follow
// a convergence / stabilization / divergence schedule over the diffusion steps.
//
// Randomness: std::mt19937_64 (fully specified by the C++ standard) seeded
// with the scene or profile seed. Uniform doubles take the top 53 bits of a
// draw; normals use Box-Muller. No std::*_distribution is involved, so output
// is identical across standard libraries and platforms.
namespace posestar::synth {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t next() { return engine_(); }
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  int below(int n) { return static_cast<int>(uniform() * n); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0;
};

enum class PosePreset { standing, seated, articulated };
std::string_view to_string(PosePreset p);
PosePreset pose_preset_from_string(std::string_view s);

struct PhaseProfile {
  double phase1_frac = 0.3;
  double phase2_frac = 0.3;
  double phase3_frac = 0.4;
  // Random perturbation amplitudes per phase; 0 gives a noise-free schedule.
  double jitter1 = 1.0;
  double jitter2 = 0.2;
  double jitter3 = 1.0;
  // Blob width multiplier at the first step; decays linearly to 1 over phase I.
  double phase1_spread = 1.5;
  std::uint64_t seed = 0;
  bool paper_band = true;

  // Fractions must be non-negative and sum to 1; with paper_band the
  // fractions must sit in 0.30 +- 0.15, 0.30 +- 0.05 and 0.30 +- 0.20.
  void validate() const;
  static PhaseProfile zero_jitter();
};

struct ScenePoint {
  double x = 0;
  double y = 0;
};

struct SyntheticScene {
  PosePreset preset = PosePreset::standing;
  std::uint64_t seed = 0;
  int width = 256;
  int height = 256;
  std::map<std::string, ScenePoint> joints;  // BODY_25 names, pixel coordinates
  KeypointSet keypoints;
  BinaryImage body;     // full person silhouette
  BinaryImage garment;  // region painted in the garment tone
  std::string instruction;
  BinaryImage ground_truth;
  ImageBuffer image;    // grayscale
};

// Instructions the generator can draw ground truth for.
const std::vector<std::string>& supported_instructions();

// Pose, silhouette, ground truth and image for one instruction.
SyntheticScene generate_scene(PosePreset preset, std::uint64_t seed, std::string_view instruction = "belly-length blouse",
                              int size = 256);

// Exact ground-truth mask for a parsed instruction on the scene's pose.
BinaryImage ground_truth_mask(const SyntheticScene& scene, std::string_view instruction);

// Anchor row (pixel y) of an anatomical token on the scene's pose.
double anchor_row(const SyntheticScene& scene, std::string_view token);

struct TokenSpec {
  std::string name;
  TokenKind kind = TokenKind::star;
};

// Tokens of the instruction's group plus `extra` tokens unrelated to it.
std::vector<TokenSpec> tokens_for_instruction(std::string_view instruction, const std::vector<TokenSpec>& extra = {});

// Noise-free stabilized map of a token on the attention grid (peak 1); a
// zero-jitter stack holds exactly this map at every phase II step.
FloatMap token_blob(const SyntheticScene& scene, const TokenSpec& token, int grid = 16);

struct SyntheticAttention {
  AttentionStack cross;
  SelfAttentionStack self;
};

SyntheticAttention generate_attention(const SyntheticScene& scene, const PhaseProfile& profile,
                                      const std::vector<TokenSpec>& tokens, int steps = 100);
// Uses the scene's instruction tokens plus one unrelated token.
SyntheticAttention generate_attention(const SyntheticScene& scene, const PhaseProfile& profile, int steps = 100);

// File-system safe form of an instruction, e.g. "belly-length_blouse".
std::string instruction_slug(std::string_view instruction);

// Writes image.png, attn.astd, self.astd, keypoints.json, gt_<slug>.png and fixture.json.
void write_fixture(const std::filesystem::path& dir, const SyntheticScene& scene, const SyntheticAttention& attn);

struct SuiteOptions {
  int count = 50;
  int size = 256;
  std::uint64_t base_seed = 1000;
  PhaseProfile profile;
};

// Fixture i uses preset i % 3, instruction i % 5 of supported_instructions()
// and seed base_seed + i. Returns the fixture directories.
std::vector<std::filesystem::path> write_suite(const std::filesystem::path& root, const SuiteOptions& options);

}  // namespace posestar::synth

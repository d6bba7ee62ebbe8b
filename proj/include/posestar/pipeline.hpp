#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "posestar/aggregation.hpp"
#include "posestar/instruction.hpp"
#include "posestar/localization.hpp"
#include "posestar/maskpost.hpp"
#include "posestar/refinement.hpp"
#include "posestar/tensorio.hpp"

namespace posestar {

struct PipelineConfig {
  double beta = 0.3;
  double alpha = 0.4;
  double mu = 0.1;
  RadiusMode r_mode = RadiusMode::average;
  double default_r = 4.0;
  double confidence_floor = 0.1;
  int window = 3;
  int steps = 100;
  CollapseAxis collapse_axis = CollapseAxis::row;
  CombineMode combine_mode = CombineMode::max;
  CannyOptions canny;
  bool mu_literal = false;
  bool nearest_upsample = false;
  double max_gap_frac = 0.05;
  double min_area_frac = 0.001;
  double min_support_cover = 0.5;
  bool multi_region = false;
  SmoothOptions smooth;
  std::optional<std::filesystem::path> debug_dir;

  // Throws ParamError for any out-of-range field.
  void validate() const;
};

// Sets one field by its config / CLI name ("beta", "r_mode", "window", ...).
// Throws ParamError for unknown keys or badly typed values.
void apply_config_value(PipelineConfig& config, std::string_view key, const nlohmann::json& value);
PipelineConfig config_from_json(const nlohmann::json& doc, PipelineConfig base = {});

struct StageTiming {
  std::string stage;
  double ms = 0;
};

struct RunReport {
  std::string mask_path;
  std::vector<StageTiming> timings;
  double total_ms = 0;
  std::vector<std::string> tokens;     // localized lanes, e.g. "RShoulder"
  std::vector<std::string> fallbacks;  // keypoint and mask fallbacks taken
  std::vector<std::string> warnings;
  std::optional<double> iou;

  nlohmann::json to_json() const;
};

struct PipelineInputs {
  ImageBuffer image;
  AttentionStack attn;
  SelfAttentionStack self_attn;
  KeypointSet keypoints;
  std::string instruction;
};

// Intermediate products are kept so callers can inspect every stage.
struct RunResult {
  BinaryMask mask;
  RunReport report;
  TokenGroup group;
  FineTargetStack fine;
  FloatMap region;  // combined fused map at self-attention resolution
  EdgeImage edges;
  EdgeImage selected;
};

RunResult run(const PipelineInputs& inputs, const PipelineConfig& config,
              const RuleTable& rules = default_rule_table(), const AnchorTable& anchors = default_anchor_table());

// |a and b| / |a or b|; 1 when both are empty. Throws ShapeError on a size mismatch.
double iou(const BinaryMask& a, const BinaryMask& b);

// A directory written by the synthetic generator: inputs plus one or more
// (instruction, ground truth) cases listed in fixture.json.
struct FixtureCase {
  std::string instruction;
  BinaryMask ground_truth;
};

struct Fixture {
  std::string name;
  PipelineInputs inputs;  // instruction left empty; taken from each case
  std::vector<FixtureCase> cases;
};

Fixture load_fixture(const std::filesystem::path& dir);
// Every immediate subdirectory holding a fixture.json, sorted by name.
std::vector<Fixture> load_fixtures(const std::filesystem::path& root);

struct SweepRow {
  std::vector<std::pair<std::string, std::string>> params;
  double mean_iou = 0;
  int runs = 0;
  int failures = 0;  // runs that raised; scored as IoU 0
};

// Cartesian product over the grid's keys (each mapping to a list of values),
// mean IoU over every fixture case per cell. Throws ParamError for an empty
// fixture set or an empty grid.
std::vector<SweepRow> sweep(const nlohmann::json& grid, const std::vector<Fixture>& fixtures,
                            const PipelineConfig& base = {});
std::string sweep_to_csv(const std::vector<SweepRow>& rows);

// Fixed 256-entry color ramp (black, purple, red, orange, yellow, white) used
// for every debug heatmap; values are scaled by the map's maximum.
ImageBuffer heatmap(const FloatMap& map, int scale = 1);

}  // namespace posestar

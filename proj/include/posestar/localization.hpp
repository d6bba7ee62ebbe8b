#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "posestar/grid.hpp"
#include "posestar/instruction.hpp"
#include "posestar/tensorio.hpp"

namespace posestar {

// A single token map on the attention grid plus the calibration state that
// produced it.
struct RegionMap {
  FloatMap values;
  std::optional<GridPoint> anchor;
  std::optional<double> radius;
  bool degenerate = false;
};

struct AnchorTerm {
  std::string keypoint;
  double weight = 0;
};

// One pose-frame anchor: an affine combination of keypoints. Bilateral
// tokens (Arms, Thigh, ...) carry one rule per side.
struct AnchorRule {
  std::string label;
  std::vector<AnchorTerm> terms;
};

struct AnchorTable {
  std::map<std::string, std::vector<AnchorRule>> entries;
  const std::vector<AnchorRule>* find(std::string_view token) const;
};

AnchorTable parse_anchor_table(std::string_view json_text);
AnchorTable load_anchor_table(const std::filesystem::path& path);
const AnchorTable& default_anchor_table();

enum class RadiusMode { min, average, max };
std::string_view to_string(RadiusMode m);
RadiusMode radius_mode_from_string(std::string_view s);

// Continuous pixel -> grid scaling, grid = floor(x / image_width * W).
GridPoint pixel_to_grid(double x, double y, int image_width, int image_height, int grid_height, int grid_width);

// Divides by the maximum. All-zero input comes back unchanged with `degenerate` set.
RegionMap normalize_map(const RegionMap& map);

// Value-weighted mean cell, rounded to the nearest cell. Throws DegenerateMapError on an all-zero map.
GridPoint attention_centroid(const FloatMap& map);

// Integer shift with zero fill; cells moved off-grid are dropped.
FloatMap translate(const FloatMap& map, int drow, int dcol);

// Moves the map's centroid onto the keypoint's cell. A missing keypoint or one
// below `confidence_floor` leaves the map untouched with anchor = centroid.
RegionMap calibrate_star(const RegionMap& map, const Keypoint* keypoint, int image_width, int image_height,
                         double confidence_floor = 0.1);

// Pixel position of an anchor rule, or nullopt when one of its keypoints is
// missing or below the confidence floor.
std::optional<std::pair<double, double>> anchor_point(const AnchorRule& rule, const KeypointSet& keypoints,
                                                      double confidence_floor = 0.1);

RegionMap anchor_fleshy(const RegionMap& map, const AnchorRule& rule, const KeypointSet& keypoints,
                        double confidence_floor = 0.1);
// Uses the token's first rule from the table.
RegionMap anchor_fleshy(const RegionMap& map, const AnchorTable& table, const KeypointSet& keypoints,
                        std::string_view token, double confidence_floor = 0.1);

// Zeroes every cell farther than r from center. Throws ParamError for r <= 0.
RegionMap radial_constrain(const RegionMap& map, GridPoint center, double r);

// Min / mean / max of the grid-scaled bone lengths from `keypoint` to its
// skeleton neighbours; default_r when the keypoint or all neighbours are absent.
double choose_radius(std::string_view keypoint, const KeypointSet& keypoints, RadiusMode mode, int grid_height,
                     int grid_width, double default_r = 4.0, double confidence_floor = 0.1);

struct LocalizationOptions {
  RadiusMode r_mode = RadiusMode::average;
  double default_r = 4.0;
  double confidence_floor = 0.1;
};

struct LocalizedToken {
  std::string label;         // e.g. "RShoulder", "Waist", "blouse"
  std::string source_token;  // token name in the attention stack
  TokenKind kind = TokenKind::star;
  bool calibrated = false;   // false when the keypoint fallback was used
  double radius = 0;         // 0 for maps without a radial constraint
};

// The filtered tensor M: one map per localized token and step, [t][n][row][col].
struct LocalizedStack {
  int steps = 0;
  int height = 0;
  int width = 0;
  std::vector<LocalizedToken> tokens;
  std::vector<float> data;
  std::vector<std::string> warnings;

  int count() const { return static_cast<int>(tokens.size()); }
  std::size_t map_size() const { return static_cast<std::size_t>(height) * width; }
  std::span<const float> map_span(int t, int n) const {
    return {data.data() + (static_cast<std::size_t>(t) * tokens.size() + n) * map_size(), map_size()};
  }
};

// Runs normalization, calibration and the radial constraint for every token
// of the group found in the stack. Group tokens missing from the stack are
// skipped with a warning; throws NoTokensError when nothing usable remains.
LocalizedStack localize(const AttentionStack& stack, const TokenGroup& group, const KeypointSet& keypoints,
                        const AnchorTable& table, const LocalizationOptions& options);

}  // namespace posestar

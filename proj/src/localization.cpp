#include "posestar/localization.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

#include <json.hpp>

#include "posestar/embedded_data.hpp"
#include "posestar/errors.hpp"
#include "posestar/parallel.hpp"
#include "posestar/skeleton.hpp"

namespace posestar {

using nlohmann::json;

const std::vector<AnchorRule>* AnchorTable::find(std::string_view token) const {
  auto it = entries.find(std::string(token));
  return it == entries.end() ? nullptr : &it->second;
}

AnchorTable parse_anchor_table(std::string_view json_text) {
  AnchorTable table;
  try {
    json doc = json::parse(json_text);
    for (const auto& [token, sides] : doc.items()) {
      std::vector<AnchorRule> rules;
      for (const auto& [label, terms] : sides.items()) {
        AnchorRule rule{label, {}};
        double total = 0;
        for (const auto& term : terms) {
          AnchorTerm t{term.at(0).get<std::string>(), term.at(1).get<double>()};
          if (!skeleton::is_body25(t.keypoint)) {
            throw FormatError("anchor rule " + label + " references unknown keypoint " + t.keypoint);
          }
          total += t.weight;
          rule.terms.push_back(std::move(t));
        }
        if (rule.terms.empty() || std::abs(total - 1.0) > 1e-9) {
          throw FormatError("anchor rule " + label + " weights must sum to 1");
        }
        rules.push_back(std::move(rule));
      }
      table.entries[token] = std::move(rules);
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed anchor table: ") + e.what());
  }
  return table;
}

AnchorTable load_anchor_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open anchor table " + path.string());
  std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return parse_anchor_table(text);
}

const AnchorTable& default_anchor_table() {
  static const AnchorTable table = parse_anchor_table(embedded::kAnchorTable);
  return table;
}

std::string_view to_string(RadiusMode m) {
  switch (m) {
    case RadiusMode::min: return "min";
    case RadiusMode::average: return "average";
    case RadiusMode::max: return "max";
  }
  return "?";
}

RadiusMode radius_mode_from_string(std::string_view s) {
  if (s == "min") return RadiusMode::min;
  if (s == "average" || s == "ave" || s == "mean") return RadiusMode::average;
  if (s == "max") return RadiusMode::max;
  throw ParamError("unknown r_mode '" + std::string(s) + "'");
}

GridPoint pixel_to_grid(double x, double y, int image_width, int image_height, int grid_height, int grid_width) {
  int col = static_cast<int>(std::floor(x / image_width * grid_width));
  int row = static_cast<int>(std::floor(y / image_height * grid_height));
  return {std::clamp(row, 0, grid_height - 1), std::clamp(col, 0, grid_width - 1)};
}

RegionMap normalize_map(const RegionMap& map) {
  RegionMap out = map;
  float peak = 0.0f;
  for (float v : map.values.values()) peak = std::max(peak, v);
  if (peak <= 0.0f) {
    out.degenerate = true;
    return out;
  }
  out.degenerate = false;
  for (float& v : out.values.storage()) v /= peak;
  return out;
}

GridPoint attention_centroid(const FloatMap& map) {
  double mass = 0, rows = 0, cols = 0;
  for (int i = 0; i < map.height(); ++i) {
    for (int j = 0; j < map.width(); ++j) {
      double v = map(i, j);
      mass += v;
      rows += v * i;
      cols += v * j;
    }
  }
  if (mass <= 0) throw DegenerateMapError("centroid of an all-zero map");
  return {static_cast<int>(std::lround(rows / mass)), static_cast<int>(std::lround(cols / mass))};
}

FloatMap translate(const FloatMap& map, int drow, int dcol) {
  FloatMap out(map.height(), map.width(), 0.0f);
  for (int i = 0; i < map.height(); ++i) {
    int ti = i + drow;
    if (ti < 0 || ti >= map.height()) continue;
    for (int j = 0; j < map.width(); ++j) {
      int tj = j + dcol;
      if (tj < 0 || tj >= map.width()) continue;
      out(ti, tj) = map(i, j);
    }
  }
  return out;
}

namespace {

RegionMap move_centroid_to(const RegionMap& map, GridPoint target) {
  RegionMap out = map;
  GridPoint c = attention_centroid(map.values);
  out.values = translate(map.values, target.row - c.row, target.col - c.col);
  out.anchor = target;
  return out;
}

RegionMap fallback(const RegionMap& map) {
  RegionMap out = map;
  out.anchor = attention_centroid(map.values);
  return out;
}

bool usable(const Keypoint* kp, double floor) { return kp != nullptr && kp->confidence >= floor; }

}  // namespace

RegionMap calibrate_star(const RegionMap& map, const Keypoint* keypoint, int image_width, int image_height,
                         double confidence_floor) {
  if (!usable(keypoint, confidence_floor)) return fallback(map);
  GridPoint target = pixel_to_grid(keypoint->x, keypoint->y, image_width, image_height, map.values.height(),
                                   map.values.width());
  return move_centroid_to(map, target);
}

std::optional<std::pair<double, double>> anchor_point(const AnchorRule& rule, const KeypointSet& keypoints,
                                                      double confidence_floor) {
  double x = 0, y = 0;
  for (const auto& term : rule.terms) {
    const Keypoint* kp = keypoints.find(term.keypoint);
    if (!usable(kp, confidence_floor)) return std::nullopt;
    x += term.weight * kp->x;
    y += term.weight * kp->y;
  }
  return std::make_pair(x, y);
}

RegionMap anchor_fleshy(const RegionMap& map, const AnchorRule& rule, const KeypointSet& keypoints,
                        double confidence_floor) {
  auto point = anchor_point(rule, keypoints, confidence_floor);
  if (!point) return fallback(map);
  GridPoint target = pixel_to_grid(point->first, point->second, keypoints.image_width, keypoints.image_height,
                                   map.values.height(), map.values.width());
  return move_centroid_to(map, target);
}

RegionMap anchor_fleshy(const RegionMap& map, const AnchorTable& table, const KeypointSet& keypoints,
                        std::string_view token, double confidence_floor) {
  const auto* rules = table.find(token);
  if (rules == nullptr || rules->empty()) return fallback(map);
  return anchor_fleshy(map, rules->front(), keypoints, confidence_floor);
}

RegionMap radial_constrain(const RegionMap& map, GridPoint center, double r) {
  if (!(r > 0)) throw ParamError("radial constraint needs r > 0");
  RegionMap out = map;
  for (int i = 0; i < map.values.height(); ++i) {
    for (int j = 0; j < map.values.width(); ++j) {
      double di = i - center.row;
      double dj = j - center.col;
      if (std::sqrt(di * di + dj * dj) > r) out.values(i, j) = 0.0f;
    }
  }
  out.radius = r;
  return out;
}

double choose_radius(std::string_view keypoint, const KeypointSet& keypoints, RadiusMode mode, int grid_height,
                     int grid_width, double default_r, double confidence_floor) {
  const Keypoint* self = keypoints.find(keypoint);
  if (!usable(self, confidence_floor)) return default_r;
  double sx = static_cast<double>(grid_width) / keypoints.image_width;
  double sy = static_cast<double>(grid_height) / keypoints.image_height;
  std::vector<double> lengths;
  for (auto name : skeleton::neighbors(keypoint)) {
    const Keypoint* other = keypoints.find(name);
    if (!usable(other, confidence_floor)) continue;
    lengths.push_back(std::hypot((other->x - self->x) * sx, (other->y - self->y) * sy));
  }
  if (lengths.empty()) return default_r;
  switch (mode) {
    case RadiusMode::min: return *std::min_element(lengths.begin(), lengths.end());
    case RadiusMode::max: return *std::max_element(lengths.begin(), lengths.end());
    case RadiusMode::average: break;
  }
  return std::accumulate(lengths.begin(), lengths.end(), 0.0) / static_cast<double>(lengths.size());
}

// ---------------------------------------------------------------------------

namespace {

// One output map lane of the localized tensor.
struct Lane {
  LocalizedToken info;
  int source = 0;
  std::optional<GridPoint> target;  // calibration cell, nullopt -> fallback
  std::optional<std::string> radius_keypoint;
  // Cells closer to this lane's point than to any sibling lane's point.
  std::vector<std::uint8_t> partition;
};

std::vector<std::uint8_t> voronoi_partition(const std::vector<std::pair<double, double>>& points, std::size_t self,
                                            int height, int width) {
  std::vector<std::uint8_t> keep(static_cast<std::size_t>(height) * width, 0);
  for (int i = 0; i < height; ++i) {
    for (int j = 0; j < width; ++j) {
      double ci = i + 0.5, cj = j + 0.5;
      std::size_t best = 0;
      double best_d = 1e300;
      for (std::size_t p = 0; p < points.size(); ++p) {
        double d = (points[p].first - ci) * (points[p].first - ci) + (points[p].second - cj) * (points[p].second - cj);
        if (d < best_d) {
          best_d = d;
          best = p;
        }
      }
      keep[static_cast<std::size_t>(i) * width + j] = best == self ? 1 : 0;
    }
  }
  return keep;
}

// Grid-space (row, col) of a pixel position, continuous.
std::pair<double, double> grid_coords(double x, double y, const KeypointSet& kps, int gh, int gw) {
  return {y / kps.image_height * gh, x / kps.image_width * gw};
}

void add_lanes(std::vector<Lane>& lanes, const std::vector<std::pair<std::string, std::pair<double, double>>>& pts,
               const LocalizedToken& base, int source, bool star, const KeypointSet& kps, int gh, int gw) {
  std::vector<std::pair<double, double>> grid_pts;
  for (const auto& [label, p] : pts) grid_pts.push_back(grid_coords(p.first, p.second, kps, gh, gw));
  for (std::size_t s = 0; s < pts.size(); ++s) {
    Lane lane;
    lane.info = base;
    lane.info.label = pts[s].first;
    lane.info.calibrated = true;
    lane.source = source;
    lane.target = pixel_to_grid(pts[s].second.first, pts[s].second.second, kps.image_width, kps.image_height, gh, gw);
    if (star) lane.radius_keypoint = pts[s].first;
    if (pts.size() > 1) lane.partition = voronoi_partition(grid_pts, s, gh, gw);
    lanes.push_back(std::move(lane));
  }
}

}  // namespace

LocalizedStack localize(const AttentionStack& stack, const TokenGroup& group, const KeypointSet& keypoints,
                        const AnchorTable& table, const LocalizationOptions& options) {
  validate(stack);
  const int gh = stack.height;
  const int gw = stack.width;
  LocalizedStack out;
  out.steps = stack.steps;
  out.height = gh;
  out.width = gw;

  std::vector<std::string> wanted;
  for (const auto* list : {&group.star_tokens, &group.fleshy_tokens, &group.clothes_tokens}) {
    for (const auto& name : *list) {
      if (std::find(wanted.begin(), wanted.end(), name) == wanted.end()) wanted.push_back(name);
    }
  }

  std::vector<Lane> lanes;
  for (const auto& name : wanted) {
    auto idx = stack.find_token(name);
    if (!idx) {
      out.warnings.push_back("token '" + name + "' not present in attention stack; skipped");
      continue;
    }
    LocalizedToken base{name, name, stack.token_kinds[*idx], false, 0};
    std::vector<std::pair<std::string, std::pair<double, double>>> pts;
    if (base.kind == TokenKind::star) {
      for (auto kp_name : skeleton::star_keypoints(name)) {
        const Keypoint* kp = keypoints.find(kp_name);
        if (usable(kp, options.confidence_floor)) pts.push_back({std::string(kp_name), {kp->x, kp->y}});
      }
    } else if (base.kind == TokenKind::fleshy) {
      if (const auto* rules = table.find(name)) {
        for (const auto& rule : *rules) {
          if (auto p = anchor_point(rule, keypoints, options.confidence_floor)) pts.push_back({rule.label, *p});
        }
      } else {
        out.warnings.push_back("fleshy token '" + name + "' has no anchor rule; left uncalibrated");
      }
    }
    if (base.kind != TokenKind::clothes && !pts.empty()) {
      add_lanes(lanes, pts, base, *idx, base.kind == TokenKind::star, keypoints, gh, gw);
    } else {
      if (base.kind != TokenKind::clothes) {
        out.warnings.push_back("no usable keypoints for '" + name + "'; using uncalibrated map");
      }
      Lane lane;
      lane.info = base;
      lane.source = *idx;
      lanes.push_back(std::move(lane));
    }
  }
  if (lanes.empty()) throw NoTokensError("none of the instruction's tokens are present in the attention stack");

  for (auto& lane : lanes) {
    if (lane.info.kind != TokenKind::star) continue;
    lane.info.radius = lane.radius_keypoint
                           ? choose_radius(*lane.radius_keypoint, keypoints, options.r_mode, gh, gw,
                                           options.default_r, options.confidence_floor)
                           : options.default_r;
  }

  const std::size_t hw = stack.map_size();
  const std::size_t n_lanes = lanes.size();
  out.data.assign(static_cast<std::size_t>(stack.steps) * n_lanes * hw, 0.0f);
  std::vector<std::uint8_t> live(static_cast<std::size_t>(stack.steps) * n_lanes, 0);

  parallel_for(static_cast<std::size_t>(stack.steps) * n_lanes, [&](std::size_t job) {
    const int t = static_cast<int>(job / n_lanes);
    const Lane& lane = lanes[job % n_lanes];
    RegionMap m{stack.map(t, lane.source), std::nullopt, std::nullopt, false};
    if (!lane.partition.empty()) {
      for (std::size_t c = 0; c < hw; ++c) {
        if (!lane.partition[c]) m.values[c] = 0.0f;
      }
    }
    m = normalize_map(m);
    if (m.degenerate) return;
    if (lane.info.kind != TokenKind::clothes) {
      m = lane.target ? move_centroid_to(m, *lane.target) : fallback(m);
    }
    if (lane.info.kind == TokenKind::star) m = radial_constrain(m, *m.anchor, lane.info.radius);
    float* dst = out.data.data() + job * hw;
    std::copy(m.values.storage().begin(), m.values.storage().end(), dst);
    live[job] = std::any_of(m.values.storage().begin(), m.values.storage().end(), [](float v) { return v > 0; });
  });

  if (std::none_of(live.begin(), live.end(), [](std::uint8_t v) { return v != 0; })) {
    throw NoTokensError("every selected token map is degenerate (all zero)");
  }
  for (auto& lane : lanes) out.tokens.push_back(std::move(lane.info));
  return out;
}

}  // namespace posestar

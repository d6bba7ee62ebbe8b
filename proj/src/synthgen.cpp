#include "posestar/synthgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>

#include <json.hpp>

#include "posestar/errors.hpp"
#include "posestar/imgproc.hpp"
#include "posestar/localization.hpp"
#include "posestar/skeleton.hpp"

namespace posestar::synth {

using nlohmann::json;

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 0;
  while (u1 <= 0) u1 = uniform();
  double u2 = uniform();
  double mag = std::sqrt(-2.0 * std::log(u1));
  spare_ = mag * std::sin(2 * std::numbers::pi * u2);
  has_spare_ = true;
  return mag * std::cos(2 * std::numbers::pi * u2);
}

std::string_view to_string(PosePreset p) {
  switch (p) {
    case PosePreset::standing: return "standing";
    case PosePreset::seated: return "seated";
    case PosePreset::articulated: return "articulated";
  }
  return "?";
}

PosePreset pose_preset_from_string(std::string_view s) {
  if (s == "standing") return PosePreset::standing;
  if (s == "seated") return PosePreset::seated;
  if (s == "articulated") return PosePreset::articulated;
  throw ValueError("unknown pose preset '" + std::string(s) + "'");
}

void PhaseProfile::validate() const {
  for (double f : {phase1_frac, phase2_frac, phase3_frac}) {
    if (!(f >= 0 && f <= 1)) throw ParamError("phase fractions must lie in [0, 1]");
  }
  if (std::abs(phase1_frac + phase2_frac + phase3_frac - 1.0) > 1e-9) {
    throw ParamError("phase fractions must sum to 1");
  }
  if (jitter1 < 0 || jitter2 < 0 || jitter3 < 0 || phase1_spread < 0) {
    throw ParamError("jitter and spread amplitudes must be non-negative");
  }
  if (paper_band) {
    constexpr double kEps = 1e-9;
    if (std::abs(phase1_frac - 0.30) > 0.15 + kEps || std::abs(phase2_frac - 0.30) > 0.05 + kEps ||
        std::abs(phase3_frac - 0.30) > 0.20 + kEps) {
      throw ParamError("phase fractions outside the observed bands");
    }
  }
}

PhaseProfile PhaseProfile::zero_jitter() {
  PhaseProfile p;
  p.jitter1 = p.jitter2 = p.jitter3 = 0;
  return p;
}

// ---------------------------------------------------------------------------
// Pose

namespace {

using Pose = std::map<std::string, ScenePoint>;

// Normalized (x, y) templates; R is on the image left (the figure faces the viewer).
const Pose& pose_template(PosePreset preset) {
  static const Pose standing = {
      {"Nose", {.50, .11}},      {"Neck", {.50, .19}},       {"RShoulder", {.41, .20}}, {"LShoulder", {.59, .20}},
      {"RElbow", {.37, .34}},    {"LElbow", {.63, .34}},     {"RWrist", {.35, .47}},    {"LWrist", {.65, .47}},
      {"MidHip", {.50, .50}},    {"RHip", {.455, .50}},      {"LHip", {.545, .50}},     {"RKnee", {.45, .69}},
      {"LKnee", {.55, .69}},     {"RAnkle", {.45, .88}},     {"LAnkle", {.55, .88}},    {"REye", {.48, .095}},
      {"LEye", {.52, .095}},     {"REar", {.465, .11}},      {"LEar", {.535, .11}},     {"RBigToe", {.455, .925}},
      {"RSmallToe", {.435, .92}}, {"RHeel", {.45, .895}},    {"LBigToe", {.545, .925}}, {"LSmallToe", {.565, .92}},
      {"LHeel", {.55, .895}},
  };
  static const Pose seated = {
      {"Nose", {.50, .16}},      {"Neck", {.50, .25}},       {"RShoulder", {.41, .26}}, {"LShoulder", {.59, .26}},
      {"RElbow", {.36, .39}},    {"LElbow", {.64, .39}},     {"RWrist", {.41, .51}},    {"LWrist", {.59, .51}},
      {"MidHip", {.50, .56}},    {"RHip", {.455, .56}},      {"LHip", {.545, .56}},     {"RKnee", {.42, .67}},
      {"LKnee", {.58, .67}},     {"RAnkle", {.43, .87}},     {"LAnkle", {.57, .87}},    {"REye", {.48, .145}},
      {"LEye", {.52, .145}},     {"REar", {.465, .16}},      {"LEar", {.535, .16}},     {"RBigToe", {.435, .915}},
      {"RSmallToe", {.415, .91}}, {"RHeel", {.43, .89}},     {"LBigToe", {.565, .915}}, {"LSmallToe", {.585, .91}},
      {"LHeel", {.57, .89}},
  };
  static const Pose articulated = {
      {"Nose", {.50, .11}},      {"Neck", {.50, .19}},       {"RShoulder", {.41, .20}}, {"LShoulder", {.59, .20}},
      {"RElbow", {.31, .31}},    {"LElbow", {.69, .12}},     {"RWrist", {.40, .33}},    {"LWrist", {.70, .03}},
      {"MidHip", {.50, .50}},    {"RHip", {.455, .50}},      {"LHip", {.545, .50}},     {"RKnee", {.42, .69}},
      {"LKnee", {.60, .68}},     {"RAnkle", {.40, .88}},     {"LAnkle", {.64, .87}},    {"REye", {.48, .095}},
      {"LEye", {.52, .095}},     {"REar", {.465, .11}},      {"LEar", {.535, .11}},     {"RBigToe", {.405, .925}},
      {"RSmallToe", {.385, .92}}, {"RHeel", {.40, .895}},    {"LBigToe", {.645, .915}}, {"LSmallToe", {.665, .91}},
      {"LHeel", {.64, .885}},
  };
  switch (preset) {
    case PosePreset::seated: return seated;
    case PosePreset::articulated: return articulated;
    default: return standing;
  }
}

struct Geometry {
  const Pose& j;
  double h;  // image height in pixels; body widths scale with it

  ScenePoint at(const char* name) const { return j.at(name); }
};

double seg_dist2(double px, double py, ScenePoint a, ScenePoint b) {
  double vx = b.x - a.x, vy = b.y - a.y;
  double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? std::clamp(((px - a.x) * vx + (py - a.y) * vy) / len2, 0.0, 1.0) : 0.0;
  double dx = px - (a.x + t * vx), dy = py - (a.y + t * vy);
  return dx * dx + dy * dy;
}

bool in_polygon(double px, double py, const std::vector<ScenePoint>& poly) {
  bool inside = false;
  for (std::size_t i = 0, k = poly.size() - 1; i < poly.size(); k = i++) {
    const auto& a = poly[i];
    const auto& b = poly[k];
    if ((a.y > py) != (b.y > py) && px < (b.x - a.x) * (py - a.y) / (b.y - a.y) + a.x) inside = !inside;
  }
  return inside;
}

using Region = std::function<bool(double, double)>;

Region capsule(ScenePoint a, ScenePoint b, double r) {
  return [=](double x, double y) { return seg_dist2(x, y, a, b) <= r * r; };
}

Region polygon(std::vector<ScenePoint> poly) {
  return [poly = std::move(poly)](double x, double y) { return in_polygon(x, y, poly); };
}

ScenePoint offset(ScenePoint p, double dx, double dy) { return {p.x + dx, p.y + dy}; }

std::vector<Region> torso_parts(const Geometry& g) {
  const double h = g.h;
  return {
      polygon({offset(g.at("RShoulder"), -0.012 * h, 0), offset(g.at("LShoulder"), 0.012 * h, 0),
               offset(g.at("LHip"), 0.02 * h, 0.015 * h), offset(g.at("RHip"), -0.02 * h, 0.015 * h)}),
      capsule(g.at("Neck"), g.at("MidHip"), 0.06 * h),
  };
}

std::vector<Region> arm_parts(const Geometry& g) {
  const double h = g.h;
  return {capsule(g.at("RShoulder"), g.at("RElbow"), 0.03 * h), capsule(g.at("RElbow"), g.at("RWrist"), 0.025 * h),
          capsule(g.at("LShoulder"), g.at("LElbow"), 0.03 * h), capsule(g.at("LElbow"), g.at("LWrist"), 0.025 * h)};
}

std::vector<Region> leg_parts(const Geometry& g) {
  const double h = g.h;
  return {capsule(g.at("RHip"), g.at("RKnee"), 0.045 * h), capsule(g.at("RKnee"), g.at("RAnkle"), 0.036 * h),
          capsule(g.at("LHip"), g.at("LKnee"), 0.045 * h), capsule(g.at("LKnee"), g.at("LAnkle"), 0.036 * h)};
}

ScenePoint hand_center(const Geometry& g, const char* wrist, const char* elbow) {
  ScenePoint w = g.at(wrist), e = g.at(elbow);
  double dx = w.x - e.x, dy = w.y - e.y;
  double len = std::max(1e-9, std::hypot(dx, dy));
  return {w.x + 0.03 * g.h * dx / len, w.y + 0.03 * g.h * dy / len};
}

std::vector<Region> body_parts(const Geometry& g) {
  const double h = g.h;
  std::vector<Region> parts = torso_parts(g);
  for (auto& r : arm_parts(g)) parts.push_back(std::move(r));
  for (auto& r : leg_parts(g)) parts.push_back(std::move(r));
  ScenePoint nose = g.at("Nose");
  ScenePoint head = {nose.x, nose.y - 0.01 * h};
  parts.push_back(capsule(head, head, 0.055 * h));
  parts.push_back(capsule(g.at("Neck"), nose, 0.028 * h));
  ScenePoint rh = hand_center(g, "RWrist", "RElbow"), lh = hand_center(g, "LWrist", "LElbow");
  parts.push_back(capsule(rh, rh, 0.026 * h));
  parts.push_back(capsule(lh, lh, 0.026 * h));
  parts.push_back(capsule(g.at("RHeel"), g.at("RBigToe"), 0.02 * h));
  parts.push_back(capsule(g.at("LHeel"), g.at("LBigToe"), 0.02 * h));
  return parts;
}

BinaryImage rasterize(const std::vector<Region>& parts, int width, int height, double y_min, double y_max) {
  BinaryImage out(height, width, 0);
  for (int i = 0; i < height; ++i) {
    double y = i + 0.5;
    if (y < y_min || y > y_max) continue;
    for (int j = 0; j < width; ++j) {
      double x = j + 0.5;
      for (const auto& r : parts) {
        if (r(x, y)) {
          out(i, j) = 1;
          break;
        }
      }
    }
  }
  return out;
}

// x of a leg chain (hip -> knee -> ankle) at row y, clamped to its ends.
double leg_x_at(const Geometry& g, const char* hip, const char* knee, const char* ankle, double y) {
  std::array<ScenePoint, 3> chain = {g.at(hip), g.at(knee), g.at(ankle)};
  if (y <= chain[0].y) return chain[0].x;
  for (int s = 0; s < 2; ++s) {
    const auto& a = chain[s];
    const auto& b = chain[s + 1];
    if (y <= b.y) return b.y > a.y ? a.x + (b.x - a.x) * (y - a.y) / (b.y - a.y) : b.x;
  }
  return chain[2].x;
}

Region skirt(const Geometry& g, double top, double bottom) {
  const double h = g.h;
  double xr_top = std::min(g.at("RHip").x, leg_x_at(g, "RHip", "RKnee", "RAnkle", top)) - 0.035 * h;
  double xl_top = std::max(g.at("LHip").x, leg_x_at(g, "LHip", "LKnee", "LAnkle", top)) + 0.035 * h;
  double xr_bot = leg_x_at(g, "RHip", "RKnee", "RAnkle", bottom) - 0.06 * h;
  double xl_bot = leg_x_at(g, "LHip", "LKnee", "LAnkle", bottom) + 0.06 * h;
  return polygon({{xr_top, top}, {xl_top, top}, {xl_bot, bottom}, {xr_bot, bottom}});
}

bool is_pants_noun(std::string_view noun) {
  for (std::string_view p : {"pants", "trousers", "jeans", "shorts", "leggings", "slacks"}) {
    if (noun == p) return true;
  }
  return false;
}

Geometry scene_geometry(const SyntheticScene& scene) { return Geometry{scene.joints, static_cast<double>(scene.height)}; }

BinaryImage garment_mask(const SyntheticScene& scene, const TokenGroup& group, GarmentClass cls,
                         std::string_view noun) {
  Geometry g = scene_geometry(scene);
  double top = anchor_row(scene, group.start_anchor);
  double bottom = anchor_row(scene, group.end_anchor);
  std::vector<Region> parts;
  switch (cls) {
    case GarmentClass::blouse_shirt:
      parts = torso_parts(g);
      for (auto& r : arm_parts(g)) parts.push_back(std::move(r));
      break;
    case GarmentClass::dress:
      parts = torso_parts(g);
      parts.push_back(skirt(g, anchor_row(scene, "Hip"), bottom));
      break;
    case GarmentClass::pants_skirt:
      if (is_pants_noun(noun)) {
        parts = torso_parts(g);
        for (auto& r : leg_parts(g)) parts.push_back(std::move(r));
      } else {
        parts.push_back(skirt(g, top, bottom));
      }
      break;
  }
  return rasterize(parts, scene.width, scene.height, top, bottom);
}

}  // namespace

// ---------------------------------------------------------------------------

const std::vector<std::string>& supported_instructions() {
  static const std::vector<std::string> list = {"belly-length blouse", "hip-length shirt", "knee-length dress",
                                                "knee-length skirt", "ankle-length pants"};
  return list;
}

double anchor_row(const SyntheticScene& scene, std::string_view token) {
  auto keypoints = skeleton::star_keypoints(token);
  if (!keypoints.empty()) {
    double acc = 0;
    for (auto k : keypoints) acc += scene.joints.at(std::string(k)).y;
    return acc / static_cast<double>(keypoints.size());
  }
  const auto* rules = default_anchor_table().find(token);
  if (!rules) throw UnknownAnchorError("no anchor rule for '" + std::string(token) + "'");
  double acc = 0;
  for (const auto& rule : *rules) {
    for (const auto& term : rule.terms) acc += term.weight * scene.joints.at(term.keypoint).y;
  }
  return acc / static_cast<double>(rules->size());
}

BinaryImage ground_truth_mask(const SyntheticScene& scene, std::string_view instruction) {
  Instruction instr = parse_instruction(instruction);
  TokenGroup group = expand_to_token_group(instr);
  return garment_mask(scene, group, instr.garment_class, instr.garment_noun);
}

SyntheticScene generate_scene(PosePreset preset, std::uint64_t seed, std::string_view instruction, int size) {
  if (size < 32) throw ValueError("scene size must be at least 32 pixels");
  SyntheticScene scene;
  scene.preset = preset;
  scene.seed = seed;
  scene.width = scene.height = size;
  scene.instruction = std::string(instruction);

  Rng rng(seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(preset) + 1);
  const double scale = rng.uniform(0.92, 1.04);
  const double shift_x = rng.uniform(-0.04, 0.04);
  const double shift_y = rng.uniform(-0.02, 0.02);
  for (auto name : skeleton::kBody25) {
    ScenePoint p = pose_template(preset).at(std::string(name));
    double x = 0.5 + (p.x - 0.5) * scale + shift_x + rng.uniform(-0.008, 0.008);
    double y = 0.5 + (p.y - 0.5) * scale + shift_y + rng.uniform(-0.008, 0.008);
    x = std::clamp(x * size, 0.0, size - 0.01);
    y = std::clamp(y * size, 0.0, size - 0.01);
    scene.joints[std::string(name)] = {x, y};
  }

  scene.keypoints.image_width = size;
  scene.keypoints.image_height = size;
  for (const auto& [name, p] : scene.joints) {
    scene.keypoints.entries[name] = {p.x, p.y, std::round(rng.uniform(0.85, 0.99) * 1000) / 1000};
  }

  Geometry g = scene_geometry(scene);
  scene.body = rasterize(body_parts(g), size, size, -1e9, 1e9);
  scene.ground_truth = ground_truth_mask(scene, instruction);
  scene.garment = scene.ground_truth;

  scene.image.width = scene.image.height = size;
  scene.image.channels = 1;
  scene.image.samples.resize(static_cast<std::size_t>(size) * size);
  for (std::size_t p = 0; p < scene.image.samples.size(); ++p) {
    double tone = scene.garment[p] ? 200 : scene.body[p] ? 120 : 40;
    tone += 3.0 * rng.normal();
    scene.image.samples[p] = static_cast<std::uint8_t>(std::clamp(std::lround(tone), 0L, 255L));
  }
  return scene;
}

// ---------------------------------------------------------------------------
// Attention

namespace {

// Self-attention level on garment cells, the affinity of the rest of the
// body and its falloff range, all on the 32x32 grid.
constexpr double kSelfGarment = 1.0;
constexpr double kSelfBodyAffinity = 0.3;
constexpr double kSelfAffinityRange = 1.5;

// A Gaussian around a point or a segment in grid coordinates (row, col).
struct Component {
  double r0, c0, r1, c1;
  double sigma;
  double weight = 1.0;
};

struct GridFrame {
  int grid;
  double sx, sy;  // pixels -> grid
  std::pair<double, double> cell(ScenePoint p) const { return {p.y * sy - 0.5, p.x * sx - 0.5}; }
};

Component point_comp(const GridFrame& f, ScenePoint p, double sigma, double weight = 1.0) {
  auto [r, c] = f.cell(p);
  return {r, c, r, c, sigma, weight};
}

Component seg_comp(const GridFrame& f, ScenePoint a, ScenePoint b, double sigma, double weight = 1.0) {
  auto [r0, c0] = f.cell(a);
  auto [r1, c1] = f.cell(b);
  return {r0, c0, r1, c1, sigma, weight};
}

void render(FloatMap& out, const std::vector<Component>& comps, double sigma_scale, double dr, double dc) {
  for (int i = 0; i < out.height(); ++i) {
    for (int j = 0; j < out.width(); ++j) {
      float best = out(i, j);
      for (const auto& c : comps) {
        double d2 = seg_dist2(j, i, {c.c0 + dc, c.r0 + dr}, {c.c1 + dc, c.r1 + dr});
        double s = c.sigma * sigma_scale;
        best = std::max(best, static_cast<float>(c.weight * std::exp(-d2 / (2 * s * s))));
      }
      out(i, j) = best;
    }
  }
}

FloatMap area_average(const BinaryImage& mask, int gh, int gw) {
  FloatMap out(gh, gw, 0.0f);
  std::vector<double> acc(static_cast<std::size_t>(gh) * gw, 0.0);
  std::vector<double> cnt(acc.size(), 0.0);
  for (int i = 0; i < mask.height(); ++i) {
    int gi = static_cast<int>(static_cast<long long>(i) * gh / mask.height());
    for (int j = 0; j < mask.width(); ++j) {
      int gj = static_cast<int>(static_cast<long long>(j) * gw / mask.width());
      acc[static_cast<std::size_t>(gi) * gw + gj] += mask(i, j) ? 1.0 : 0.0;
      cnt[static_cast<std::size_t>(gi) * gw + gj] += 1.0;
    }
  }
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = cnt[p] > 0 ? static_cast<float>(acc[p] / cnt[p]) : 0.0f;
  return out;
}

double avg_bone(const SyntheticScene& scene, const GridFrame& f, std::string_view keypoint) {
  auto [r, c] = f.cell(scene.joints.at(std::string(keypoint)));
  double acc = 0;
  int n = 0;
  for (auto nb : skeleton::neighbors(keypoint)) {
    auto [r2, c2] = f.cell(scene.joints.at(std::string(nb)));
    acc += std::hypot(r2 - r, c2 - c);
    ++n;
  }
  return n ? acc / n : 1.0;
}

struct TokenModel {
  TokenSpec spec;
  std::vector<Component> core;   // noise-free blob
  std::vector<Component> bleed;  // neighbouring joints (star tokens)
  FloatMap clothes;              // ground-truth coverage for clothes tokens
};

TokenModel build_model(const SyntheticScene& scene, const TokenSpec& token, const GridFrame& f) {
  TokenModel m{token, {}, {}, {}};
  Geometry g = scene_geometry(scene);
  auto J = [&](const char* n) { return scene.joints.at(n); };
  const double sw = std::hypot((J("LShoulder").x - J("RShoulder").x) * f.sx, (J("LShoulder").y - J("RShoulder").y) * f.sy);

  if (token.kind == TokenKind::clothes) {
    BinaryImage gt = ground_truth_mask(scene, token.name);
    m.clothes = imgproc::gaussian_blur(area_average(gt, f.grid, f.grid), 0.5);
    return m;
  }
  if (token.kind == TokenKind::star) {
    for (auto kp : skeleton::star_keypoints(token.name)) {
      double sigma = std::max(0.6, 0.3 * avg_bone(scene, f, kp));
      m.core.push_back(point_comp(f, scene.joints.at(std::string(kp)), sigma));
      for (auto nb : skeleton::neighbors(kp)) m.bleed.push_back(point_comp(f, scene.joints.at(std::string(nb)), 0.8));
    }
    return m;
  }

  const std::string& n = token.name;
  auto rule_points = [&]() {
    std::vector<ScenePoint> pts;
    if (const auto* rules = default_anchor_table().find(n)) {
      for (const auto& rule : *rules) {
        ScenePoint p{0, 0};
        for (const auto& t : rule.terms) {
          p.x += t.weight * scene.joints.at(t.keypoint).x;
          p.y += t.weight * scene.joints.at(t.keypoint).y;
        }
        pts.push_back(p);
      }
    }
    return pts;
  };
  if (n == "Arms") {
    for (auto [s, e, w] : {std::array<const char*, 3>{"RShoulder", "RElbow", "RWrist"},
                           std::array<const char*, 3>{"LShoulder", "LElbow", "LWrist"}}) {
      m.core.push_back(seg_comp(f, J(s), J(e), 0.6));
      m.core.push_back(seg_comp(f, J(e), J(w), 0.6));
    }
  } else if (n == "Thigh") {
    m.core.push_back(seg_comp(f, J("RHip"), J("RKnee"), 0.7));
    m.core.push_back(seg_comp(f, J("LHip"), J("LKnee"), 0.7));
  } else if (n == "Shank") {
    m.core.push_back(seg_comp(f, J("RKnee"), J("RAnkle"), 0.6));
    m.core.push_back(seg_comp(f, J("LKnee"), J("LAnkle"), 0.6));
  } else if (n == "Torso") {
    m.core.push_back(seg_comp(f, J("Neck"), J("MidHip"), 0.3 * sw));
  } else if (n == "Hand") {
    m.core.push_back(point_comp(f, hand_center(g, "RWrist", "RElbow"), 0.6));
    m.core.push_back(point_comp(f, hand_center(g, "LWrist", "LElbow"), 0.6));
  } else {
    double sigma = n == "Forehead" ? 0.8 : std::max(0.6, 0.28 * sw);
    for (auto p : rule_points()) m.core.push_back(point_comp(f, p, sigma));
  }
  if (m.core.empty()) throw ValueError("no synthetic model for token '" + n + "'");
  return m;
}

std::uint64_t name_hash(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

FloatMap shift_map(const FloatMap& src, double dr, double dc) {
  FloatMap out(src.height(), src.width(), 0.0f);
  for (int i = 0; i < src.height(); ++i) {
    for (int j = 0; j < src.width(); ++j) {
      double y = i - dr, x = j - dc;
      int y0 = static_cast<int>(std::floor(y)), x0 = static_cast<int>(std::floor(x));
      double fy = y - y0, fx = x - x0;
      double acc = 0;
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          int yy = y0 + a, xx = x0 + b;
          if (!src.contains(yy, xx)) continue;
          acc += src(yy, xx) * (a ? fy : 1 - fy) * (b ? fx : 1 - fx);
        }
      }
      out(i, j) = static_cast<float>(acc);
    }
  }
  return out;
}

// Dims body cells less than background ones: 0.3 off the body up to 1 on it.
FloatMap body_attenuation(const SyntheticScene& scene, int grid) {
  FloatMap body = imgproc::gaussian_blur(area_average(scene.body, grid, grid), 0.7);
  FloatMap atten(grid, grid);
  for (std::size_t p = 0; p < atten.size(); ++p) {
    atten[p] = static_cast<float>(0.3 + 0.7 * std::min(1.0, 1.5 * body[p]));
  }
  return atten;
}

void apply_attenuation(FloatMap& m, const FloatMap& atten) {
  for (std::size_t p = 0; p < m.size(); ++p) m[p] *= atten[p];
}

// Peak-normalizes m, scales it by amp and clamps into [0, 1].
void write_normalized(const FloatMap& m, double amp, std::span<float> dst) {
  float peak = 0;
  for (float v : m.values()) peak = std::max(peak, v);
  for (std::size_t p = 0; p < m.size(); ++p) {
    dst[p] = peak > 0 ? static_cast<float>(std::clamp(m[p] / peak * amp, 0.0, 1.0)) : 0.0f;
  }
}

}  // namespace

FloatMap token_blob(const SyntheticScene& scene, const TokenSpec& token, int grid) {
  GridFrame f{grid, static_cast<double>(grid) / scene.width, static_cast<double>(grid) / scene.height};
  TokenModel model = build_model(scene, token, f);
  FloatMap m(grid, grid, 0.0f);
  if (token.kind == TokenKind::clothes) {
    m = model.clothes;
  } else {
    render(m, model.core, 1.0, 0, 0);
    apply_attenuation(m, body_attenuation(scene, grid));
  }
  FloatMap out(grid, grid, 0.0f);
  write_normalized(m, 1.0, out.values());
  return out;
}

std::vector<TokenSpec> tokens_for_instruction(std::string_view instruction, const std::vector<TokenSpec>& extra) {
  TokenGroup group = expand_to_token_group(parse_instruction(instruction));
  std::vector<TokenSpec> out;
  for (const auto& s : group.star_tokens) out.push_back({s, TokenKind::star});
  for (const auto& s : group.fleshy_tokens) out.push_back({s, TokenKind::fleshy});
  for (const auto& s : group.clothes_tokens) out.push_back({s, TokenKind::clothes});
  for (const auto& e : extra) {
    if (std::none_of(out.begin(), out.end(), [&](const TokenSpec& t) { return t.name == e.name; })) out.push_back(e);
  }
  return out;
}

SyntheticAttention generate_attention(const SyntheticScene& scene, const PhaseProfile& profile,
                                      const std::vector<TokenSpec>& tokens, int steps) {
  profile.validate();
  if (tokens.empty()) throw ValueError("no tokens to synthesize");
  if (steps < 1) throw ValueError("steps must be positive");
  constexpr int kGrid = 16;
  GridFrame f{kGrid, static_cast<double>(kGrid) / scene.width, static_cast<double>(kGrid) / scene.height};

  SyntheticAttention out;
  AttentionStack& cross = out.cross;
  cross.steps = steps;
  cross.tokens = static_cast<int>(tokens.size());
  cross.height = cross.width = kGrid;
  cross.data.assign(static_cast<std::size_t>(steps) * tokens.size() * kGrid * kGrid, 0.0f);
  for (const auto& t : tokens) {
    cross.token_names.push_back(t.name);
    cross.token_kinds.push_back(t.kind);
  }

  const FloatMap atten = body_attenuation(scene, kGrid);
  std::vector<std::pair<int, int>> body_cells;
  for (int i = 0; i < kGrid; ++i) {
    for (int j = 0; j < kGrid; ++j) {
      if (atten(i, j) > 0.3f + 0.7f * 0.45f) body_cells.push_back({i, j});
    }
  }
  if (body_cells.empty()) body_cells.push_back({kGrid / 2, kGrid / 2});

  const int t1 = static_cast<int>(std::lround(profile.phase1_frac * steps));
  const int t2 = static_cast<int>(std::lround((profile.phase1_frac + profile.phase2_frac) * steps));

  for (std::size_t n = 0; n < tokens.size(); ++n) {
    TokenModel model = build_model(scene, tokens[n], f);
    Rng rng(profile.seed ^ (scene.seed * 0xD1B54A32D192ED03ULL) ^ name_hash(tokens[n].name));
    const double drift_angle = rng.uniform(0, 2 * std::numbers::pi);
    // Each token diverges one way over phase III: it over- or under-shoots.
    const bool token_over = rng.uniform() < 0.5;

    for (int t = 1; t <= steps; ++t) {
      double scale = 1.0, dr = 0, dc = 0, bleed = 0;
      const double phase_jitter = t <= t1 ? profile.jitter1 : t <= t2 ? profile.jitter2 : profile.jitter3;
      std::vector<Component> extras;
      auto add_distractor = [&](double amp) {
        if (amp <= 0) return;
        auto [ci, cj] = body_cells[rng.below(static_cast<int>(body_cells.size()))];
        double s = rng.uniform(0.8, 1.5);
        extras.push_back({double(ci), double(cj), double(ci), double(cj), s, std::min(1.0, amp)});
      };

      if (t <= t1) {
        double p = t1 > 1 ? static_cast<double>(t - 1) / (t1 - 1) : 1.0;
        scale = std::max(0.5, 1.0 + profile.phase1_spread * (1 - p) * (1 + 0.3 * profile.jitter1 * rng.normal()));
        dr = profile.jitter1 * (1 - p) * 1.2 * rng.normal();
        dc = profile.jitter1 * (1 - p) * 1.2 * rng.normal();
        bleed = 0.7 * (1 - p);
        for (int d = 0; d < 2; ++d) add_distractor(profile.jitter1 * (1 - p) * rng.uniform(0.4, 0.9));
      } else if (t <= t2) {
        scale = std::max(0.5, 1.0 + profile.jitter2 * 0.1 * rng.normal());
        dr = profile.jitter2 * 0.25 * rng.normal();
        dc = profile.jitter2 * 0.25 * rng.normal();
      } else {
        double q = steps > t2 ? static_cast<double>(t - t2) / (steps - t2) : 1.0;
        bool over = token_over;
        double mag = profile.jitter3 * q * rng.uniform(0.6, 1.0);
        scale = over ? 1.0 + 3.0 * mag : 1.0 / (1.0 + 0.8 * mag);
        double drift = 2.0 * profile.jitter3 * q;
        dr = drift * std::sin(drift_angle) + 0.2 * profile.jitter3 * q * rng.normal();
        dc = drift * std::cos(drift_angle) + 0.2 * profile.jitter3 * q * rng.normal();
        bleed = over ? 0.7 * mag : 0.0;
        if (rng.uniform() < 0.5) add_distractor(profile.jitter3 * q * rng.uniform(0.3, 0.8));
      }

      FloatMap m(kGrid, kGrid, 0.0f);
      if (tokens[n].kind == TokenKind::clothes) {
        m = shift_map(model.clothes, dr, dc);
        if (scale > 1) {
          m = imgproc::gaussian_blur(m, 1.2 * (scale - 1));
        } else if (scale < 1) {
          for (float& v : m.storage()) v = static_cast<float>(std::pow(std::max(0.0f, v), 1.0 / scale));
        }
      } else {
        render(m, model.core, scale, dr, dc);
        if (bleed > 0) {
          auto comps = model.bleed;
          for (auto& c : comps) c.weight = std::min(1.0, bleed);
          render(m, comps, 1.0, dr, dc);
        }
        apply_attenuation(m, atten);
      }
      render(m, extras, 1.0, 0, 0);

      const double u = rng.uniform();
      const double amp = phase_jitter > 0 ? 0.8 + 0.2 * u : 1.0;
      write_normalized(m, amp, cross.map_span(t - 1, static_cast<int>(n)));
    }
  }

  SelfAttentionStack& self = out.self;
  self.maps = 8;
  self.height = self.width = 32;
  // Full affinity on cells at least half covered by the garment, partial
  // affinity on the rest of the person fading with distance from the garment,
  // none on the background.
  FloatMap gt32 = area_average(scene.ground_truth, 32, 32);
  FloatMap body32 = area_average(scene.body, 32, 32);
  BinaryImage garment_cells(32, 32, 0);
  for (std::size_t p = 0; p < gt32.size(); ++p) garment_cells[p] = gt32[p] >= 0.5f;
  Grid<float> dist = imgproc::distance_transform(garment_cells);
  FloatMap s(32, 32, 0.0f);
  for (std::size_t p = 0; p < s.size(); ++p) {
    if (garment_cells[p]) {
      s[p] = static_cast<float>(kSelfGarment);
    } else if (body32[p] >= 0.5f) {
      double d = dist[p] / kSelfAffinityRange;
      s[p] = static_cast<float>(kSelfBodyAffinity * std::exp(-0.5 * d * d));
    }
  }
  s = imgproc::gaussian_blur(s, 0.35);
  Rng rng(profile.seed ^ (scene.seed * 0xA0761D6478BD642FULL) ^ 0x5E1F);
  self.data.reserve(static_cast<std::size_t>(self.maps) * s.size());
  for (int k = 0; k < self.maps; ++k) {
    double gain = 1.0 + profile.jitter2 * 0.05 * rng.normal();
    for (float v : s.values()) self.data.push_back(static_cast<float>(std::clamp(v * gain, 0.0, 1.0)));
  }
  validate(cross);
  validate(self);
  return out;
}

SyntheticAttention generate_attention(const SyntheticScene& scene, const PhaseProfile& profile, int steps) {
  Instruction instr = parse_instruction(scene.instruction);
  TokenSpec extra = instr.garment_class == GarmentClass::blouse_shirt ? TokenSpec{"Knee", TokenKind::star}
                                                                      : TokenSpec{"Forehead", TokenKind::fleshy};
  return generate_attention(scene, profile, tokens_for_instruction(scene.instruction, {extra}), steps);
}

std::string instruction_slug(std::string_view instruction) {
  std::string out;
  for (char c : instruction) {
    unsigned char u = static_cast<unsigned char>(c);
    if (std::isalnum(u) || c == '-') {
      out.push_back(static_cast<char>(std::tolower(u)));
    } else if (!out.empty() && out.back() != '_') {
      out.push_back('_');
    }
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out;
}

void write_fixture(const std::filesystem::path& dir, const SyntheticScene& scene, const SyntheticAttention& attn) {
  std::filesystem::create_directories(dir);
  write_png(scene.image, dir / "image.png");
  write_attention_stack(attn.cross, dir / "attn.astd");
  write_self_attention_stack(attn.self, dir / "self.astd");
  write_keypoints(scene.keypoints, dir / "keypoints.json");
  std::string gt = "gt_" + instruction_slug(scene.instruction) + ".png";
  write_mask(scene.ground_truth, dir / gt);

  json doc;
  doc["name"] = dir.filename().string();
  doc["preset"] = std::string(to_string(scene.preset));
  doc["seed"] = scene.seed;
  doc["image"] = "image.png";
  doc["attn"] = "attn.astd";
  doc["self_attn"] = "self.astd";
  doc["keypoints"] = "keypoints.json";
  doc["cases"] = json::array({{{"instruction", scene.instruction}, {"gt", gt}}});
  std::ofstream f(dir / "fixture.json");
  if (!f) throw IoError("cannot write " + (dir / "fixture.json").string());
  f << doc.dump(2) << '\n';
}

std::vector<std::filesystem::path> write_suite(const std::filesystem::path& root, const SuiteOptions& options) {
  const auto& instructions = supported_instructions();
  std::vector<std::filesystem::path> dirs;
  for (int i = 0; i < options.count; ++i) {
    auto preset = static_cast<PosePreset>(i % 3);
    std::uint64_t seed = options.base_seed + static_cast<std::uint64_t>(i);
    SyntheticScene scene = generate_scene(preset, seed, instructions[i % instructions.size()], options.size);
    PhaseProfile profile = options.profile;
    profile.seed = options.profile.seed + seed;
    char name[32];
    std::snprintf(name, sizeof name, "fx%03d", i);
    dirs.push_back(root / name);
    write_fixture(dirs.back(), scene, generate_attention(scene, profile));
  }
  return dirs;
}

}  // namespace posestar::synth

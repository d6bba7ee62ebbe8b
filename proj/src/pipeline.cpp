#include "posestar/pipeline.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "posestar/errors.hpp"
#include "posestar/imgproc.hpp"

namespace posestar {

using nlohmann::json;

void PipelineConfig::validate() const {
  if (!(beta > 0 && beta < 1)) throw ParamError("beta must lie in (0, 1)");
  if (!(alpha > 0 && alpha < 1)) throw ParamError("alpha must lie in (0, 1)");
  if (!(mu > 0 && mu <= 1)) throw ParamError("mu must lie in (0, 1]");
  if (window < 1 || window > 4) throw ParamError("window must be 1, 2, 3 or 4");
  if (steps < 1) throw ParamError("T must be at least 1");
  if (window > 1) {
    int g = static_cast<int>(std::lround(std::sqrt(static_cast<double>(steps))));
    if (g * g != steps) throw ParamError("T must be a perfect square when window > 1");
    if (window > g) throw ParamError("window exceeds the step grid");
  }
  if (!(default_r > 0)) throw ParamError("default_r must be positive");
  if (!(confidence_floor >= 0 && confidence_floor <= 1)) throw ParamError("confidence_floor must lie in [0, 1]");
  if (!(canny.low >= 0 && canny.high >= canny.low)) throw ParamError("canny thresholds need 0 <= low <= high");
  if (!(canny.sigma >= 0)) throw ParamError("canny sigma must be non-negative");
  if (!(max_gap_frac >= 0 && max_gap_frac <= 1)) throw ParamError("max_gap_frac must lie in [0, 1]");
  if (!(min_area_frac >= 0 && min_area_frac < 1)) throw ParamError("min_area_frac must lie in [0, 1)");
  if (!(min_support_cover >= 0 && min_support_cover <= 1)) throw ParamError("min_support_cover must lie in [0, 1]");
  if (smooth.dilate_radius < 0 || !(smooth.sigma >= 0) || !(smooth.spline_smoothing >= 0)) {
    throw ParamError("smoothing parameters must be non-negative");
  }
}

namespace {

double as_number(std::string_view key, const json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    try {
      std::size_t used = 0;
      std::string s = v.get<std::string>();
      double d = std::stod(s, &used);
      if (used == s.size()) return d;
    } catch (const std::exception&) {
    }
  }
  throw ParamError("config key '" + std::string(key) + "' expects a number");
}

int as_int(std::string_view key, const json& v) {
  double d = as_number(key, v);
  if (d != std::floor(d)) throw ParamError("config key '" + std::string(key) + "' expects an integer");
  return static_cast<int>(d);
}

bool as_bool(std::string_view key, const json& v) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_string()) {
    auto s = v.get<std::string>();
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
  }
  if (v.is_number_integer()) return v.get<int>() != 0;
  throw ParamError("config key '" + std::string(key) + "' expects a boolean");
}

std::string as_string(std::string_view key, const json& v) {
  if (!v.is_string()) throw ParamError("config key '" + std::string(key) + "' expects a string");
  return v.get<std::string>();
}

std::string value_text(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

}  // namespace

void apply_config_value(PipelineConfig& c, std::string_view key, const json& v) {
  if (key == "beta") c.beta = as_number(key, v);
  else if (key == "alpha") c.alpha = as_number(key, v);
  else if (key == "mu") c.mu = as_number(key, v);
  else if (key == "r_mode") c.r_mode = radius_mode_from_string(as_string(key, v));
  else if (key == "default_r") c.default_r = as_number(key, v);
  else if (key == "confidence_floor") c.confidence_floor = as_number(key, v);
  else if (key == "window") c.window = as_int(key, v);
  else if (key == "T" || key == "steps") c.steps = as_int(key, v);
  else if (key == "axis" || key == "collapse_axis") c.collapse_axis = collapse_axis_from_string(as_string(key, v));
  else if (key == "combine_mode") c.combine_mode = combine_mode_from_string(as_string(key, v));
  else if (key == "canny_low") c.canny.low = as_number(key, v);
  else if (key == "canny_high") c.canny.high = as_number(key, v);
  else if (key == "canny_sigma") c.canny.sigma = as_number(key, v);
  else if (key == "mu_literal") c.mu_literal = as_bool(key, v);
  else if (key == "nearest_upsample") c.nearest_upsample = as_bool(key, v);
  else if (key == "max_gap_frac") c.max_gap_frac = as_number(key, v);
  else if (key == "min_area_frac") c.min_area_frac = as_number(key, v);
  else if (key == "min_support_cover") c.min_support_cover = as_number(key, v);
  else if (key == "multi_region") c.multi_region = as_bool(key, v);
  else if (key == "dilate_radius") c.smooth.dilate_radius = as_int(key, v);
  else if (key == "smooth_sigma") c.smooth.sigma = as_number(key, v);
  else if (key == "spline_smoothing") c.smooth.spline_smoothing = as_number(key, v);
  else if (key == "fit_spline") c.smooth.fit_spline = as_bool(key, v);
  else throw ParamError("unknown config key '" + std::string(key) + "'");
}

PipelineConfig config_from_json(const json& doc, PipelineConfig base) {
  if (!doc.is_object()) throw ParamError("config must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (key == "debug_dir") {
      base.debug_dir = as_string(key, value);
      continue;
    }
    apply_config_value(base, key, value);
  }
  base.validate();
  return base;
}

json RunReport::to_json() const {
  json doc;
  doc["mask_path"] = mask_path;
  json t = json::object();
  for (const auto& s : timings) t[s.stage] = s.ms;
  doc["timings_ms"] = t;
  doc["total_ms"] = total_ms;
  doc["tokens"] = tokens;
  doc["fallbacks"] = fallbacks;
  doc["warnings"] = warnings;
  doc["iou"] = iou ? json(*iou) : json(nullptr);
  return doc;
}

// ---------------------------------------------------------------------------

ImageBuffer heatmap(const FloatMap& map, int scale) {
  static constexpr std::array<std::array<double, 4>, 6> kStops = {{
      {0.0, 0, 0, 0},
      {0.2, 72, 12, 110},
      {0.45, 190, 40, 60},
      {0.7, 245, 130, 20},
      {0.9, 250, 230, 60},
      {1.0, 255, 255, 255},
  }};
  static const std::array<std::array<std::uint8_t, 3>, 256> kRamp = [] {
    std::array<std::array<std::uint8_t, 3>, 256> ramp{};
    for (int i = 0; i < 256; ++i) {
      double x = i / 255.0;
      std::size_t s = 0;
      while (s + 2 < kStops.size() && x > kStops[s + 1][0]) ++s;
      double f = (x - kStops[s][0]) / (kStops[s + 1][0] - kStops[s][0]);
      for (int c = 0; c < 3; ++c) {
        ramp[i][c] = static_cast<std::uint8_t>(std::lround(kStops[s][c + 1] + f * (kStops[s + 1][c + 1] - kStops[s][c + 1])));
      }
    }
    return ramp;
  }();

  scale = std::max(scale, 1);
  float peak = 0;
  for (float v : map.values()) peak = std::max(peak, v);
  ImageBuffer img;
  img.width = map.width() * scale;
  img.height = map.height() * scale;
  img.channels = 3;
  img.samples.resize(static_cast<std::size_t>(img.width) * img.height * 3);
  for (int i = 0; i < img.height; ++i) {
    for (int j = 0; j < img.width; ++j) {
      float v = peak > 0 ? map(i / scale, j / scale) / peak : 0.0f;
      int idx = std::clamp(static_cast<int>(std::lround(v * 255.0f)), 0, 255);
      std::size_t p = (static_cast<std::size_t>(i) * img.width + j) * 3;
      for (int c = 0; c < 3; ++c) img.samples[p + c] = kRamp[idx][c];
    }
  }
  return img;
}

namespace {

class StageClock {
 public:
  explicit StageClock(RunReport& report) : report_(report), start_(Clock::now()), mark_(start_) {}
  void lap(std::string stage) {
    auto now = Clock::now();
    report_.timings.push_back({std::move(stage), std::chrono::duration<double, std::milli>(now - mark_).count()});
    mark_ = now;
  }
  void finish() { report_.total_ms = std::chrono::duration<double, std::milli>(Clock::now() - start_).count(); }

 private:
  using Clock = std::chrono::steady_clock;
  RunReport& report_;
  Clock::time_point start_;
  Clock::time_point mark_;
};

class DebugSink {
 public:
  explicit DebugSink(const std::optional<std::filesystem::path>& dir) : dir_(dir) {
    if (dir_) std::filesystem::create_directories(*dir_);
  }
  bool enabled() const { return dir_.has_value(); }
  void map(const std::string& name, const FloatMap& m) const {
    if (!dir_) return;
    int scale = std::max(1, 256 / std::max(m.height(), m.width()));
    write_png(heatmap(m, scale), *dir_ / (name + ".png"));
  }
  void mask(const std::string& name, const BinaryImage& m) const {
    if (dir_) write_png(mask_to_image(m), *dir_ / (name + ".png"));
  }

 private:
  std::optional<std::filesystem::path> dir_;
};

std::string sanitize(std::string s) {
  for (char& c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
  }
  return s;
}

}  // namespace

RunResult run(const PipelineInputs& in, const PipelineConfig& config, const RuleTable& rules,
              const AnchorTable& anchors) {
  config.validate();
  validate(in.image);
  validate(in.attn);
  validate(in.self_attn);
  validate(in.keypoints);
  if (in.attn.steps != config.steps) {
    throw ShapeError("attention stack has " + std::to_string(in.attn.steps) + " steps, config expects " +
                     std::to_string(config.steps));
  }
  if (in.keypoints.image_width != in.image.width || in.keypoints.image_height != in.image.height) {
    throw ShapeError("keypoint image size differs from the source image");
  }
  if (in.self_attn.height != in.self_attn.width) throw ShapeError("self-attention maps must be square");

  RunResult result;
  RunReport& report = result.report;
  StageClock clock(report);
  DebugSink debug(config.debug_dir);

  result.group = expand_to_token_group(parse_instruction(in.instruction, rules), rules);
  clock.lap("instruction");

  LocalizationOptions lopts{config.r_mode, config.default_r, config.confidence_floor};
  LocalizedStack located = localize(in.attn, result.group, in.keypoints, anchors, lopts);
  for (const auto& tok : located.tokens) {
    report.tokens.push_back(tok.label);
    if (!tok.calibrated && tok.kind != TokenKind::clothes) {
      report.fallbacks.push_back("uncalibrated:" + tok.label);
    }
  }
  report.warnings = located.warnings;
  clock.lap("localization");
  if (debug.enabled()) {
    int t = located.steps / 2;
    for (int n = 0; n < located.count(); ++n) {
      auto s = located.map_span(t, n);
      debug.map("calibrated_" + sanitize(located.tokens[n].label) + "_t" + std::to_string(t + 1),
                FloatMap(located.height, located.width, std::vector<float>(s.begin(), s.end())));
    }
  }

  CoarseTargetStack coarse = build_coarse_stack(located, config.beta);
  WindowGrid grid = sliding_window_consensus(coarse, phase_weights(coarse.count), config.window);
  result.fine = collapse_to_fine(grid, config.collapse_axis);
  clock.lap("aggregation");
  if (debug.enabled()) {
    for (int q = 0; q <= 4; ++q) {
      int t = std::min(coarse.count - 1, q * (coarse.count - 1) / 4);
      debug.map("coarse_t" + std::to_string(t + 1), coarse.map(t));
    }
    for (int k = 0; k < result.fine.count; ++k) debug.map("fine_" + std::to_string(k), result.fine.map(k));
  }

  const int fine_count = result.fine.count;
  std::vector<FloatMap> fused(fine_count);
  for (int k = 0; k < fine_count; ++k) {
    FloatMap up = upsample_fine(result.fine.map(k), in.self_attn.height);
    int s = self_index_for(k, fine_count, in.self_attn.maps);
    fused[k] = cross_self_merge(up, in.self_attn.map(s), config.alpha);
    debug.map("fused_" + std::to_string(k), fused[k]);
  }
  result.region = combine_regions(fused, config.combine_mode);
  debug.map("combined", result.region);

  result.edges = canny_edges(in.image, config.canny);
  EdgeSelectOptions eopts{config.mu, 0.5 * config.alpha, config.mu_literal, config.nearest_upsample};
  FinalizeOptions fopts{config.max_gap_frac,      config.min_area_frac,    config.min_support_cover,
                        config.multi_region,      0.5 * config.alpha,      config.nearest_upsample,
                        config.smooth};
  bool empty_region = false;
  try {
    result.selected = edge_select(result.edges, result.region, eopts).edges;
  } catch (const EmptyRegionError&) {
    empty_region = true;
    result.selected = EdgeImage(in.image.height, in.image.width, 0);
    report.fallbacks.push_back("empty_region");
  }
  clock.lap("refinement");
  debug.mask("edges", result.edges);
  debug.mask("selected_edges", result.selected);

  if (empty_region) {
    result.mask = rasterize_region(result.region, in.image.height, in.image.width, fopts);
  } else {
    FinalizeResult fin = finalize(result.selected, result.region, fopts);
    if (fin.used_fallback) report.fallbacks.push_back("region_support");
    debug.mask("filled", fin.filled);
    result.mask = std::move(fin.mask);
  }
  clock.lap("maskpost");
  debug.mask("mask", result.mask);
  clock.finish();
  return result;
}

double iou(const BinaryMask& a, const BinaryMask& b) {
  if (a.height() != b.height() || a.width() != b.width()) throw ShapeError("masks differ in size");
  std::size_t inter = 0, uni = 0;
  for (std::size_t p = 0; p < a.size(); ++p) {
    bool x = a[p] != 0, y = b[p] != 0;
    inter += x && y;
    uni += x || y;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// ---------------------------------------------------------------------------

Fixture load_fixture(const std::filesystem::path& dir) {
  std::ifstream f(dir / "fixture.json");
  if (!f) throw IoError("cannot open " + (dir / "fixture.json").string());
  json doc;
  try {
    doc = json::parse(f);
  } catch (const json::exception& e) {
    throw FormatError("fixture.json: " + std::string(e.what()));
  }
  auto file = [&](const char* key, const char* fallback) {
    return dir / (doc.contains(key) ? doc[key].get<std::string>() : std::string(fallback));
  };
  Fixture fx;
  fx.name = doc.value("name", dir.filename().string());
  fx.inputs.image = read_image(file("image", "image.png"));
  fx.inputs.attn = read_attention_stack(file("attn", "attn.astd"));
  fx.inputs.self_attn = read_self_attention_stack(file("self_attn", "self.astd"));
  fx.inputs.keypoints = read_keypoints(file("keypoints", "keypoints.json"));
  if (!doc.contains("cases") || !doc["cases"].is_array()) throw FormatError("fixture.json lacks a cases array");
  for (const auto& c : doc["cases"]) {
    FixtureCase fc;
    fc.instruction = c.at("instruction").get<std::string>();
    fc.ground_truth = image_to_mask(read_image(dir / c.at("gt").get<std::string>()));
    fx.cases.push_back(std::move(fc));
  }
  return fx;
}

std::vector<Fixture> load_fixtures(const std::filesystem::path& root) {
  if (!std::filesystem::is_directory(root)) throw IoError("not a directory: " + root.string());
  std::vector<std::filesystem::path> dirs;
  for (const auto& entry : std::filesystem::directory_iterator(root)) {
    if (entry.is_directory() && std::filesystem::exists(entry.path() / "fixture.json")) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  std::vector<Fixture> out;
  for (const auto& d : dirs) out.push_back(load_fixture(d));
  return out;
}

std::vector<SweepRow> sweep(const json& grid, const std::vector<Fixture>& fixtures, const PipelineConfig& base) {
  std::size_t total_cases = 0;
  for (const auto& fx : fixtures) total_cases += fx.cases.size();
  if (fixtures.empty() || total_cases == 0) throw ParamError("sweep needs at least one fixture case");
  if (!grid.is_object() || grid.empty()) throw ParamError("sweep grid must be a non-empty JSON object");

  std::vector<std::string> keys;
  std::vector<std::vector<json>> values;
  for (const auto& [key, list] : grid.items()) {
    json vals = list.is_array() ? list : json::array({list});
    if (vals.empty()) throw ParamError("sweep grid key '" + key + "' has no values");
    keys.push_back(key);
    values.emplace_back(vals.begin(), vals.end());
  }

  std::vector<SweepRow> rows;
  std::vector<std::size_t> idx(keys.size(), 0);
  while (true) {
    PipelineConfig config = base;
    config.debug_dir.reset();
    SweepRow row;
    for (std::size_t k = 0; k < keys.size(); ++k) {
      apply_config_value(config, keys[k], values[k][idx[k]]);
      row.params.push_back({keys[k], value_text(values[k][idx[k]])});
    }
    config.validate();

    double acc = 0;
    for (const auto& fx : fixtures) {
      PipelineInputs inputs = fx.inputs;
      for (const auto& c : fx.cases) {
        inputs.instruction = c.instruction;
        ++row.runs;
        try {
          acc += iou(run(inputs, config).mask, c.ground_truth);
        } catch (const Error&) {
          ++row.failures;
        }
      }
    }
    row.mean_iou = acc / row.runs;
    rows.push_back(std::move(row));

    std::size_t k = keys.size();
    while (k > 0) {
      --k;
      if (++idx[k] < values[k].size()) break;
      idx[k] = 0;
      if (k == 0) return rows;
    }
    if (keys.empty()) return rows;
  }
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  if (rows.empty()) return "mean_iou,runs,failures\n";
  for (const auto& [key, _] : rows.front().params) out << key << ',';
  out << "mean_iou,runs,failures\n";
  out.setf(std::ios::fixed);
  out.precision(6);
  for (const auto& row : rows) {
    for (const auto& [_, value] : row.params) out << value << ',';
    out << row.mean_iou << ',' << row.runs << ',' << row.failures << '\n';
  }
  return out.str();
}

}  // namespace posestar

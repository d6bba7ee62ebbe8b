#include "posestar/aggregation.hpp"

#include <cmath>

#include "posestar/errors.hpp"
#include "posestar/parallel.hpp"

namespace posestar {

void thresholded_average(std::span<const float> maps, int count, double beta, std::span<float> out) {
  if (!(beta > 0 && beta < 1)) throw ParamError("beta must lie in (0, 1)");
  if (count < 1) throw ParamError("thresholded average needs at least one map");
  const std::size_t hw = out.size();
  if (maps.size() != hw * static_cast<std::size_t>(count)) throw ShapeError("map span does not match count * cells");
  for (std::size_t p = 0; p < hw; ++p) {
    double sum = 0;
    int kept = 0;
    for (int n = 0; n < count; ++n) {
      double v = maps[static_cast<std::size_t>(n) * hw + p];
      if (v > beta) {
        sum += v;
        ++kept;
      }
    }
    out[p] = kept == 0 ? 0.0f : static_cast<float>(sum / kept);
  }
}

FloatMap thresholded_average(std::span<const FloatMap> maps, double beta) {
  if (maps.empty()) throw ParamError("thresholded average needs at least one map");
  const int h = maps.front().height();
  const int w = maps.front().width();
  std::vector<float> packed;
  packed.reserve(maps.size() * maps.front().size());
  for (const auto& m : maps) {
    if (m.height() != h || m.width() != w) throw ShapeError("token maps differ in size");
    packed.insert(packed.end(), m.storage().begin(), m.storage().end());
  }
  FloatMap out(h, w);
  thresholded_average(packed, static_cast<int>(maps.size()), beta, out.values());
  return out;
}

CoarseTargetStack build_coarse_stack(const LocalizedStack& m, double beta) {
  if (!(beta > 0 && beta < 1)) throw ParamError("beta must lie in (0, 1)");
  CoarseTargetStack c(m.steps, m.height, m.width);
  const std::size_t per_step = m.map_size() * m.tokens.size();
  parallel_for(static_cast<std::size_t>(m.steps), [&](std::size_t t) {
    std::span<const float> maps(m.data.data() + t * per_step, per_step);
    thresholded_average(maps, m.count(), beta, c.map_span(static_cast<int>(t)));
  });
  return c;
}

std::vector<double> phase_weights(int steps) {
  if (steps < 1) throw ParamError("phase weights need T >= 1");
  std::vector<double> w(steps);
  const double denom = static_cast<double>(steps) * (steps + 1);
  for (int t = 1; t <= steps; ++t) w[t - 1] = 2.0 * t / denom;
  return w;
}

WindowGrid sliding_window_consensus(const CoarseTargetStack& coarse, std::span<const double> weights, int window) {
  const int steps = coarse.count;
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(steps))));
  if (side * side != steps) throw ShapeError("T = " + std::to_string(steps) + " is not a perfect square");
  if (window < 1 || window > side) throw ShapeError("window must lie in [1, " + std::to_string(side) + "]");
  if (static_cast<int>(weights.size()) != steps) throw ShapeError("one weight per step required");

  double total = 0;
  for (double w : weights) {
    if (!(w > 0) || !std::isfinite(w)) throw ParamError("phase weights must be positive and finite");
    total += w;
  }
  std::vector<double> unit(weights.size());
  for (std::size_t t = 0; t < weights.size(); ++t) unit[t] = static_cast<float>(weights[t] / total);

  WindowGrid grid;
  grid.rows = side - window + 1;
  grid.cols = side - window + 1;
  grid.maps = MapStack(grid.rows * grid.cols, coarse.height, coarse.width);
  const std::size_t hw = coarse.map_size();

  parallel_for(static_cast<std::size_t>(grid.rows * grid.cols), [&](std::size_t cell) {
    const int i = static_cast<int>(cell) / grid.cols;
    const int j = static_cast<int>(cell) % grid.cols;
    double wsum = 0;
    for (int m = i; m < i + window; ++m) {
      for (int n = j; n < j + window; ++n) wsum += unit[m * side + n];
    }
    auto dst = grid.maps.map_span(static_cast<int>(cell));
    for (std::size_t p = 0; p < hw; ++p) {
      double acc = 0;
      for (int m = i; m < i + window; ++m) {
        for (int n = j; n < j + window; ++n) {
          const int t = m * side + n;
          acc += static_cast<double>(coarse.data[t * hw + p]) * unit[t];
        }
      }
      dst[p] = static_cast<float>(acc / wsum);
    }
  });
  return grid;
}

CollapseAxis collapse_axis_from_string(std::string_view s) {
  if (s == "row") return CollapseAxis::row;
  if (s == "col") return CollapseAxis::col;
  throw ParamError("collapse axis must be 'row' or 'col'");
}

FineTargetStack collapse_to_fine(const WindowGrid& grid, CollapseAxis axis) {
  const int outer = axis == CollapseAxis::row ? grid.cols : grid.rows;
  const int inner = axis == CollapseAxis::row ? grid.rows : grid.cols;
  FineTargetStack fine(outer, grid.maps.height, grid.maps.width);
  const std::size_t hw = grid.maps.map_size();
  for (int k = 0; k < outer; ++k) {
    auto dst = fine.map_span(k);
    for (std::size_t p = 0; p < hw; ++p) {
      double acc = 0;
      for (int a = 0; a < inner; ++a) {
        int cell = axis == CollapseAxis::row ? a * grid.cols + k : k * grid.cols + a;
        acc += grid.maps.data[cell * hw + p];
      }
      dst[p] = static_cast<float>(acc / inner);
    }
  }
  return fine;
}

}  // namespace posestar

#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "posestar/grid.hpp"
#include "posestar/localization.hpp"

namespace posestar {

// A stack of equally sized maps, [k][row][col].
struct MapStack {
  int count = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  MapStack() = default;
  MapStack(int count, int height, int width)
      : count(count), height(height), width(width),
        data(static_cast<std::size_t>(count) * height * width, 0.0f) {}

  std::size_t map_size() const { return static_cast<std::size_t>(height) * width; }
  std::span<const float> map_span(int k) const { return {data.data() + k * map_size(), map_size()}; }
  std::span<float> map_span(int k) { return {data.data() + k * map_size(), map_size()}; }
  FloatMap map(int k) const {
    auto s = map_span(k);
    return FloatMap(height, width, std::vector<float>(s.begin(), s.end()));
  }
  friend bool operator==(const MapStack&, const MapStack&) = default;
};

// C: one coarse map per diffusion step.
using CoarseTargetStack = MapStack;
// C-bar: one fine map per window column.
using FineTargetStack = MapStack;

// Refined maps on the (G - window + 1)^2 window grid, cell (i, j) at index i * cols + j.
struct WindowGrid {
  int rows = 0;
  int cols = 0;
  MapStack maps;
};

// Per pixel: mean of the token values strictly above beta, 0 where none is.
// `maps` holds `count` contiguous maps of `out.size()` cells each.
void thresholded_average(std::span<const float> maps, int count, double beta, std::span<float> out);
FloatMap thresholded_average(std::span<const FloatMap> maps, double beta);

CoarseTargetStack build_coarse_stack(const LocalizedStack& m, double beta);

// w_t = 2t / (T (T + 1)), t = 1..T: strictly increasing, sums to 1.
std::vector<double> phase_weights(int steps);

// Steps are laid out row-major on a G x G grid (step t at row (t-1)/G,
// column (t-1)%G); each output cell is the weight-normalized average over a
// window x window block, no padding. Weights are brought to unit sum and
// rounded to float32 first, so any positive rescaling of `weights` yields a
// bit-identical result.
WindowGrid sliding_window_consensus(const CoarseTargetStack& coarse, std::span<const double> weights, int window = 3);

enum class CollapseAxis { row, col };
CollapseAxis collapse_axis_from_string(std::string_view s);

// axis=row averages each window column over the grid rows (one fine map per
// column); axis=col averages each window row over the columns.
FineTargetStack collapse_to_fine(const WindowGrid& grid, CollapseAxis axis = CollapseAxis::row);

}  // namespace posestar

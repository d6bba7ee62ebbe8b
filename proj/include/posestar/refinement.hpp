#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "posestar/aggregation.hpp"
#include "posestar/grid.hpp"
#include "posestar/tensorio.hpp"

namespace posestar {

// Binary {0,1} image at source-image resolution.
using EdgeImage = BinaryImage;

// Bilinear (half-pixel) upsample to size x size, clamped to [0, max input].
FloatMap upsample_fine(const FloatMap& fine, int size = 32);

// Self-attention masked by the support (> 0) of the cross-attention map,
// averaged pixel-wise with it, then every value <= alpha zeroed.
FloatMap cross_self_merge(const FloatMap& cross, const FloatMap& self, double alpha);

enum class CombineMode { max, mean, best };
CombineMode combine_mode_from_string(std::string_view s);
std::string_view to_string(CombineMode m);

// Folds the per-k fused regions into one map. `best` picks the region with the
// highest mean nonzero value.
FloatMap combine_regions(std::span<const FloatMap> regions, CombineMode mode = CombineMode::max);

// Fine map k is paired with self-attention map round(k * (K_self - 1) / (K_fine - 1)),
// which is the identity when both stacks hold 8 maps.
int self_index_for(int k, int fine_count, int self_count);

struct CannyOptions {
  double low = 50.0;
  double high = 150.0;
  double sigma = 1.4;
};

// Gaussian blur, Sobel gradients (L2 magnitude), non-maximum suppression over
// four directions, hysteresis with 8-connectivity.
EdgeImage canny_edges(const ImageBuffer& image, const CannyOptions& options = {});
EdgeImage canny_edges(const Grid<float>& gray, const CannyOptions& options = {});

// Upsamples a region map to image size and thresholds it.
BinaryImage region_support(const FloatMap& region, int height, int width, double threshold, bool nearest = false);

struct EdgeSelectOptions {
  double mu = 0.1;
  // Support threshold on the upsampled region (0.5 * alpha in the pipeline).
  double support_threshold = 0.2;
  // Keep edges within mu * l of the support's innermost point instead of
  // within mu * l of its boundary.
  bool literal = false;
  bool nearest_upsample = false;
};

struct EdgeSelection {
  EdgeImage edges;
  BinaryImage support;
  double inscribed_radius = 0;  // l
  GridPoint center;             // deepest support pixel
};

// Keeps E(i,j) = 1 when its distance to the region boundary is <= mu * l, l the
// largest inscribed-disk radius of the support. Throws EmptyRegionError when
// the region has no support at image resolution.
EdgeSelection edge_select(const EdgeImage& edges, const FloatMap& region, const EdgeSelectOptions& options);
EdgeSelection edge_select(const EdgeImage& edges, const BinaryImage& support, const EdgeSelectOptions& options);

}  // namespace posestar

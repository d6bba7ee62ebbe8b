#pragma once

#include <cstddef>
#include <vector>

#include "posestar/grid.hpp"
#include "posestar/refinement.hpp"

namespace posestar {

using BinaryMask = BinaryImage;

// Ordered pixel chain; consecutive points are 8-adjacent. Closed when
// front() == back().
struct Contour {
  std::vector<GridPoint> points;
  bool closed() const { return points.size() > 1 && points.front() == points.back(); }
};

struct Point2 {
  double row = 0;
  double col = 0;
};

// Pixels on the Bresenham segment from a to b, both ends included.
std::vector<GridPoint> bresenham_line(GridPoint a, GridPoint b);

// Edge pixels with at most one 8-neighbour that is also an edge.
std::vector<GridPoint> find_endpoints(const EdgeImage& edges);

// 5% of the image diagonal.
double default_max_gap(int height, int width);

// Repeatedly joins the globally closest pair of open endpoints (each endpoint
// used once per round) with a straight segment while their gap is <= max_gap.
EdgeImage bridge_endpoints(const EdgeImage& edges, double max_gap);
EdgeImage bridge_endpoints(const EdgeImage& edges);

struct FillStats {
  std::size_t visits = 0;  // pixels dequeued by the exterior search
};

// Boundary-propagation fill: non-edge pixels 4-connected to the image border
// are exterior; everything else (edges and enclosed pixels) is foreground.
BinaryMask edge_to_mask(const EdgeImage& edges, FillStats* stats = nullptr);

// Outer boundary of the mask's first component in raster order, traced
// clockwise with Moore-neighbour tracing. Closed; empty for an empty mask.
Contour trace_outer_contour(const BinaryMask& mask);

// Least-squares periodic cubic B-spline through `points` (a closed polygon,
// first point not repeated). The control-point count starts small and grows
// until the mean squared residual is <= smoothing (px^2 per point) or the
// cap (points / 2) is reached. Returns `samples_per_point` samples per input point.
std::vector<Point2> fit_closed_bspline(const std::vector<Point2>& points, double smoothing, int samples_per_point = 2);

// Even-odd fill of a closed polygon in pixel-index coordinates (pixel (r, c)
// sits at (r, c)). Rows are half-open at the bottom vertex; column spans
// include both crossings.
BinaryMask fill_polygon(const std::vector<Point2>& polygon, int height, int width);

struct SmoothOptions {
  int dilate_radius = 2;
  double sigma = 1.5;
  double spline_smoothing = 2.0;
  bool fit_spline = true;
};

// Disk dilation, Gaussian blur re-thresholded at 0.5, then the outer contour
// replaced by a smoothing B-spline and filled.
BinaryMask smooth_mask(const BinaryMask& mask, const SmoothOptions& options = {});

struct FinalizeOptions {
  double max_gap_frac = 0.05;  // of the image diagonal
  double min_area_frac = 0.001;
  // Share of the region's support the filled mask must cover; below it the
  // edges leaked and only a fragment was enclosed.
  double min_support_cover = 0.5;
  bool multi_region = false;
  double support_threshold = 0.2;
  bool nearest_upsample = false;
  SmoothOptions smooth;
};

struct FinalizeResult {
  BinaryMask mask;
  BinaryMask filled;  // before smoothing
  bool used_fallback = false;
};

// bridge -> edge_to_mask -> largest component -> smooth. When the filled
// interior (foreground that is not an edge pixel) covers less than
// min_area_frac of the image, or the filled mask covers less than
// min_support_cover of the region's upsampled support, that support is used instead.
FinalizeResult finalize(const EdgeImage& edges, const FloatMap& fallback_region, const FinalizeOptions& options = {});

// Largest 4-connected component unless multi_region is set, then smoothed.
BinaryMask rasterize_region(const FloatMap& region, int height, int width, const FinalizeOptions& options);

}  // namespace posestar

#include "posestar/refinement.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "posestar/errors.hpp"
#include "posestar/imgproc.hpp"

namespace posestar {

FloatMap upsample_fine(const FloatMap& fine, int size) {
  float peak = 0.0f;
  for (float v : fine.values()) peak = std::max(peak, v);
  FloatMap up = imgproc::resize_bilinear(fine, size, size);
  for (float& v : up.storage()) v = std::clamp(v, 0.0f, peak);
  return up;
}

FloatMap cross_self_merge(const FloatMap& cross, const FloatMap& self, double alpha) {
  if (!(alpha > 0 && alpha < 1)) throw ParamError("alpha must lie in (0, 1)");
  if (cross.height() != self.height() || cross.width() != self.width()) {
    throw ShapeError("cross- and self-attention maps differ in size");
  }
  FloatMap fused(cross.height(), cross.width(), 0.0f);
  for (std::size_t p = 0; p < fused.size(); ++p) {
    if (cross[p] <= 0.0f) continue;
    float avg = 0.5f * (cross[p] + self[p]);
    fused[p] = avg > alpha ? avg : 0.0f;
  }
  return fused;
}

CombineMode combine_mode_from_string(std::string_view s) {
  if (s == "max") return CombineMode::max;
  if (s == "mean") return CombineMode::mean;
  if (s == "best") return CombineMode::best;
  throw ParamError("combine mode must be max, mean or best");
}

std::string_view to_string(CombineMode m) {
  switch (m) {
    case CombineMode::max: return "max";
    case CombineMode::mean: return "mean";
    case CombineMode::best: return "best";
  }
  return "?";
}

FloatMap combine_regions(std::span<const FloatMap> regions, CombineMode mode) {
  if (regions.empty()) throw ParamError("no regions to combine");
  const int h = regions.front().height();
  const int w = regions.front().width();
  for (const auto& r : regions) {
    if (r.height() != h || r.width() != w) throw ShapeError("regions differ in size");
  }
  FloatMap out(h, w, 0.0f);
  switch (mode) {
    case CombineMode::max:
      for (const auto& r : regions) {
        for (std::size_t p = 0; p < out.size(); ++p) out[p] = std::max(out[p], r[p]);
      }
      break;
    case CombineMode::mean:
      for (std::size_t p = 0; p < out.size(); ++p) {
        double acc = 0;
        for (const auto& r : regions) acc += r[p];
        out[p] = static_cast<float>(acc / static_cast<double>(regions.size()));
      }
      break;
    case CombineMode::best: {
      double best_score = -1;
      std::size_t best = 0;
      for (std::size_t k = 0; k < regions.size(); ++k) {
        double sum = 0;
        std::size_t nz = 0;
        for (float v : regions[k].values()) {
          if (v > 0) {
            sum += v;
            ++nz;
          }
        }
        double score = nz ? sum / static_cast<double>(nz) : 0.0;
        if (score > best_score) {
          best_score = score;
          best = k;
        }
      }
      out = regions[best];
      break;
    }
  }
  return out;
}

int self_index_for(int k, int fine_count, int self_count) {
  if (fine_count <= 1 || self_count <= 1) return 0;
  if (fine_count == self_count) return k;
  double pos = static_cast<double>(k) * (self_count - 1) / (fine_count - 1);
  return std::clamp(static_cast<int>(std::lround(pos)), 0, self_count - 1);
}

// ---------------------------------------------------------------------------

EdgeImage canny_edges(const ImageBuffer& image, const CannyOptions& options) {
  return canny_edges(to_gray(image), options);
}

EdgeImage canny_edges(const Grid<float>& gray, const CannyOptions& options) {
  const int h = gray.height();
  const int w = gray.width();
  Grid<float> smooth = imgproc::gaussian_blur(gray, options.sigma);
  auto px = [&](int i, int j) { return smooth(std::clamp(i, 0, h - 1), std::clamp(j, 0, w - 1)); };

  Grid<float> gx(h, w), gy(h, w), mag(h, w);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      float dx = (px(i - 1, j + 1) + 2 * px(i, j + 1) + px(i + 1, j + 1)) -
                 (px(i - 1, j - 1) + 2 * px(i, j - 1) + px(i + 1, j - 1));
      float dy = (px(i + 1, j - 1) + 2 * px(i + 1, j) + px(i + 1, j + 1)) -
                 (px(i - 1, j - 1) + 2 * px(i - 1, j) + px(i - 1, j + 1));
      gx(i, j) = dx;
      gy(i, j) = dy;
      mag(i, j) = std::sqrt(dx * dx + dy * dy);
    }
  }
  auto m = [&](int i, int j) { return mag.contains(i, j) ? mag(i, j) : 0.0f; };

  // 0 = suppressed, 1 = weak, 2 = strong
  Grid<std::uint8_t> state(h, w, 0);
  constexpr double kTan22 = 0.41421356237;
  constexpr double kTan67 = 2.41421356237;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      float v = mag(i, j);
      if (v <= options.low) continue;
      double ax = std::abs(gx(i, j));
      double ay = std::abs(gy(i, j));
      bool keep;
      // Ties go to the first pixel along the scan direction.
      if (ay <= ax * kTan22) {
        keep = v > m(i, j - 1) && v >= m(i, j + 1);
      } else if (ay >= ax * kTan67) {
        keep = v > m(i - 1, j) && v >= m(i + 1, j);
      } else if ((gx(i, j) > 0) == (gy(i, j) > 0)) {
        keep = v > m(i - 1, j - 1) && v >= m(i + 1, j + 1);
      } else {
        keep = v > m(i - 1, j + 1) && v >= m(i + 1, j - 1);
      }
      if (keep) state(i, j) = v > options.high ? 2 : 1;
    }
  }

  EdgeImage edges(h, w, 0);
  std::queue<std::pair<int, int>> queue;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      if (state(i, j) == 2) {
        edges(i, j) = 1;
        queue.push({i, j});
      }
    }
  }
  while (!queue.empty()) {
    auto [ci, cj] = queue.front();
    queue.pop();
    for (int di = -1; di <= 1; ++di) {
      for (int dj = -1; dj <= 1; ++dj) {
        int ni = ci + di, nj = cj + dj;
        if (!edges.contains(ni, nj) || edges(ni, nj) || state(ni, nj) != 1) continue;
        edges(ni, nj) = 1;
        queue.push({ni, nj});
      }
    }
  }
  return edges;
}

// ---------------------------------------------------------------------------

BinaryImage region_support(const FloatMap& region, int height, int width, double threshold, bool nearest) {
  FloatMap up = nearest ? imgproc::resize_nearest(region, height, width)
                        : imgproc::resize_bilinear(region, height, width);
  BinaryImage support(height, width, 0);
  for (std::size_t p = 0; p < up.size(); ++p) support[p] = up[p] > threshold ? 1 : 0;
  return support;
}

EdgeSelection edge_select(const EdgeImage& edges, const FloatMap& region, const EdgeSelectOptions& options) {
  return edge_select(edges, region_support(region, edges.height(), edges.width(), options.support_threshold,
                                           options.nearest_upsample),
                     options);
}

EdgeSelection edge_select(const EdgeImage& edges, const BinaryImage& support, const EdgeSelectOptions& options) {
  if (!(options.mu > 0 && options.mu <= 1)) throw ParamError("mu must lie in (0, 1]");
  const int h = edges.height();
  const int w = edges.width();
  if (support.height() != h || support.width() != w) throw ShapeError("support and edge image differ in size");
  if (count_nonzero(support) == 0) throw EmptyRegionError("region has no support at image resolution");

  // Distance of each support pixel to the nearest outside pixel; the image
  // frame counts as outside.
  BinaryImage outside(h + 2, w + 2, 1);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) outside(i + 1, j + 1) = support(i, j) ? 0 : 1;
  }
  Grid<float> depth = imgproc::distance_transform(outside);

  EdgeSelection sel;
  sel.support = support;
  float best = -1;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      if (support(i, j) && depth(i + 1, j + 1) > best) {
        best = depth(i + 1, j + 1);
        sel.center = {i, j};
      }
    }
  }
  sel.inscribed_radius = best;
  const double band = options.mu * sel.inscribed_radius;

  sel.edges = EdgeImage(h, w, 0);
  if (options.literal) {
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        if (edges(i, j) && std::hypot(i - sel.center.row, j - sel.center.col) <= band) sel.edges(i, j) = 1;
      }
    }
    return sel;
  }

  BinaryImage boundary(h, w, 0);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      if (!support(i, j)) continue;
      bool edge_of_region = i == 0 || j == 0 || i == h - 1 || j == w - 1 || !support(i - 1, j) ||
                            !support(i + 1, j) || !support(i, j - 1) || !support(i, j + 1);
      boundary(i, j) = edge_of_region ? 1 : 0;
    }
  }
  Grid<float> to_boundary = imgproc::distance_transform(boundary);
  for (std::size_t p = 0; p < sel.edges.size(); ++p) {
    if (edges[p] && to_boundary[p] <= band) sel.edges[p] = 1;
  }
  return sel;
}

}  // namespace posestar

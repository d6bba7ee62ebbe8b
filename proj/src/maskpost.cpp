#include "posestar/maskpost.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <queue>
#include <tuple>

#include "posestar/errors.hpp"
#include "posestar/imgproc.hpp"

namespace posestar {

std::vector<GridPoint> bresenham_line(GridPoint a, GridPoint b) {
  std::vector<GridPoint> out;
  int x0 = a.col, y0 = a.row, x1 = b.col, y1 = b.row;
  int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
  int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    out.push_back({y0, x0});
    if (x0 == x1 && y0 == y1) break;
    int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
  return out;
}

std::vector<GridPoint> find_endpoints(const EdgeImage& edges) {
  std::vector<GridPoint> out;
  for (int i = 0; i < edges.height(); ++i) {
    for (int j = 0; j < edges.width(); ++j) {
      if (!edges(i, j)) continue;
      int neighbours = 0;
      for (int di = -1; di <= 1; ++di) {
        for (int dj = -1; dj <= 1; ++dj) {
          if ((di || dj) && edges.contains(i + di, j + dj) && edges(i + di, j + dj)) ++neighbours;
        }
      }
      if (neighbours <= 1) out.push_back({i, j});
    }
  }
  return out;
}

double default_max_gap(int height, int width) { return 0.05 * std::hypot(height, width); }

EdgeImage bridge_endpoints(const EdgeImage& edges) {
  return bridge_endpoints(edges, default_max_gap(edges.height(), edges.width()));
}

EdgeImage bridge_endpoints(const EdgeImage& edges, double max_gap) {
  EdgeImage out = edges;
  if (max_gap <= 0) return out;
  const double max_d2 = max_gap * max_gap;
  const int cell = std::max(1, static_cast<int>(std::ceil(max_gap)));

  for (int round = 0; round < 16; ++round) {
    std::vector<GridPoint> ends = find_endpoints(out);
    if (ends.size() < 2) break;

    std::map<std::pair<int, int>, std::vector<int>> buckets;
    for (int e = 0; e < static_cast<int>(ends.size()); ++e) {
      buckets[{ends[e].row / cell, ends[e].col / cell}].push_back(e);
    }
    std::vector<std::tuple<long, int, int>> pairs;
    for (int a = 0; a < static_cast<int>(ends.size()); ++a) {
      int br = ends[a].row / cell, bc = ends[a].col / cell;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          auto it = buckets.find({br + dr, bc + dc});
          if (it == buckets.end()) continue;
          for (int b : it->second) {
            if (b <= a) continue;
            long di = ends[a].row - ends[b].row;
            long dj = ends[a].col - ends[b].col;
            long d2 = di * di + dj * dj;
            if (d2 <= 2 || d2 > max_d2) continue;
            pairs.emplace_back(d2, a, b);
          }
        }
      }
    }
    std::sort(pairs.begin(), pairs.end());

    std::vector<std::uint8_t> used(ends.size(), 0);
    bool changed = false;
    for (const auto& [d2, a, b] : pairs) {
      if (used[a] || used[b]) continue;
      auto line = bresenham_line(ends[a], ends[b]);
      bool adds = std::any_of(line.begin(), line.end(), [&](GridPoint p) { return !out(p.row, p.col); });
      if (!adds) continue;
      for (auto p : line) out(p.row, p.col) = 1;
      used[a] = used[b] = 1;
      changed = true;
    }
    if (!changed) break;
  }
  return out;
}

BinaryMask edge_to_mask(const EdgeImage& edges, FillStats* stats) {
  const int h = edges.height();
  const int w = edges.width();
  // 0 = unvisited non-edge, 1 = edge, 2 = exterior
  Grid<std::uint8_t> work(h, w);
  for (std::size_t p = 0; p < work.size(); ++p) work[p] = edges[p] ? 1 : 0;

  std::queue<std::pair<int, int>> queue;
  auto seed = [&](int i, int j) {
    if (work(i, j) == 0) {
      work(i, j) = 2;
      queue.push({i, j});
    }
  };
  for (int j = 0; j < w; ++j) {
    seed(0, j);
    seed(h - 1, j);
  }
  for (int i = 0; i < h; ++i) {
    seed(i, 0);
    seed(i, w - 1);
  }

  std::size_t visits = 0;
  constexpr std::array<std::pair<int, int>, 4> kSteps = {{{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};
  while (!queue.empty()) {
    auto [i, j] = queue.front();
    queue.pop();
    ++visits;
    for (auto [di, dj] : kSteps) {
      int ni = i + di, nj = j + dj;
      if (ni < 0 || nj < 0 || ni >= h || nj >= w || work(ni, nj) != 0) continue;
      work(ni, nj) = 2;
      queue.push({ni, nj});
    }
  }
  if (stats) stats->visits = visits;

  BinaryMask mask(h, w);
  for (std::size_t p = 0; p < mask.size(); ++p) mask[p] = work[p] == 2 ? 0 : 1;
  return mask;
}

Contour trace_outer_contour(const BinaryMask& mask) {
  Contour contour;
  GridPoint start{-1, -1};
  for (int i = 0; i < mask.height() && start.row < 0; ++i) {
    for (int j = 0; j < mask.width(); ++j) {
      if (mask(i, j)) {
        start = {i, j};
        break;
      }
    }
  }
  if (start.row < 0) return contour;

  // Clockwise on screen, starting west.
  constexpr std::array<GridPoint, 8> kRing = {
      {{0, -1}, {-1, -1}, {-1, 0}, {-1, 1}, {0, 1}, {1, 1}, {1, 0}, {1, -1}}};
  auto fg = [&](GridPoint p) { return mask.contains(p.row, p.col) && mask(p.row, p.col); };
  auto ring_index = [&](GridPoint d) {
    for (int k = 0; k < 8; ++k) {
      if (kRing[k] == d) return k;
    }
    return 0;
  };

  contour.points.push_back(start);
  GridPoint current = start;
  int backtrack = 0;  // west of the first pixel is background
  std::optional<GridPoint> second;
  const std::size_t limit = 4 * mask.size() + 8;
  for (std::size_t guard = 0; guard < limit; ++guard) {
    int found = -1;
    for (int k = 1; k <= 8; ++k) {
      int idx = (backtrack + k) % 8;
      GridPoint n{current.row + kRing[idx].row, current.col + kRing[idx].col};
      if (fg(n)) {
        found = idx;
        break;
      }
    }
    if (found < 0) {
      contour.points.push_back(start);  // isolated pixel
      break;
    }
    GridPoint next{current.row + kRing[found].row, current.col + kRing[found].col};
    if (current == start && second && next == *second) break;
    if (!second) second = next;
    int prev = (found + 7) % 8;
    GridPoint bt{current.row + kRing[prev].row, current.col + kRing[prev].col};
    backtrack = ring_index({bt.row - next.row, bt.col - next.col});
    current = next;
    contour.points.push_back(current);
  }
  if (!contour.closed()) contour.points.push_back(start);
  return contour;
}

// ---------------------------------------------------------------------------

namespace {

std::array<double, 4> cubic_basis(double t) {
  double t2 = t * t, t3 = t2 * t;
  return {(1 - t) * (1 - t) * (1 - t) / 6.0, (3 * t3 - 6 * t2 + 4) / 6.0, (-3 * t3 + 3 * t2 + 3 * t + 1) / 6.0,
          t3 / 6.0};
}

Point2 eval_periodic(const Eigen::MatrixX2d& ctrl, double u) {
  const int m = static_cast<int>(ctrl.rows());
  double fl = std::floor(u);
  int seg = static_cast<int>(fl);
  auto b = cubic_basis(u - fl);
  Point2 p;
  for (int k = 0; k < 4; ++k) {
    int idx = ((seg + k - 1) % m + m) % m;
    p.row += b[k] * ctrl(idx, 0);
    p.col += b[k] * ctrl(idx, 1);
  }
  return p;
}

}  // namespace

std::vector<Point2> fit_closed_bspline(const std::vector<Point2>& points, double smoothing, int samples_per_point) {
  const int n = static_cast<int>(points.size());
  if (n < 8) return points;

  // Chord-length parameter in [0, 1).
  std::vector<double> s(n, 0.0);
  double total = 0;
  for (int i = 0; i < n; ++i) {
    const Point2& a = points[i];
    const Point2& b = points[(i + 1) % n];
    if (i > 0) s[i] = total;
    total += std::hypot(b.row - a.row, b.col - a.col);
  }
  if (total <= 0) return points;
  for (double& v : s) v /= total;

  const int cap = std::max(4, std::min(n / 2, 256));
  Eigen::MatrixX2d best_ctrl;
  for (int m = std::min(8, cap);; m = std::min(cap, m * 2)) {
    Eigen::MatrixXd ata = Eigen::MatrixXd::Zero(m, m);
    Eigen::MatrixX2d atp = Eigen::MatrixX2d::Zero(m, 2);
    for (int i = 0; i < n; ++i) {
      double u = s[i] * m;
      double fl = std::floor(u);
      int seg = static_cast<int>(fl);
      auto b = cubic_basis(u - fl);
      std::array<int, 4> idx;
      for (int k = 0; k < 4; ++k) idx[k] = ((seg + k - 1) % m + m) % m;
      for (int a = 0; a < 4; ++a) {
        for (int c = 0; c < 4; ++c) ata(idx[a], idx[c]) += b[a] * b[c];
        atp(idx[a], 0) += b[a] * points[i].row;
        atp(idx[a], 1) += b[a] * points[i].col;
      }
    }
    ata.diagonal().array() += 1e-9;
    Eigen::MatrixX2d ctrl = ata.ldlt().solve(atp);
    double sse = 0;
    for (int i = 0; i < n; ++i) {
      Point2 q = eval_periodic(ctrl, s[i] * m);
      sse += (q.row - points[i].row) * (q.row - points[i].row) + (q.col - points[i].col) * (q.col - points[i].col);
    }
    best_ctrl = std::move(ctrl);
    if (sse / n <= smoothing || m >= cap) break;
  }

  const int m = static_cast<int>(best_ctrl.rows());
  const int samples = std::max(8, n * samples_per_point);
  std::vector<Point2> out(samples);
  for (int k = 0; k < samples; ++k) out[k] = eval_periodic(best_ctrl, static_cast<double>(k) * m / samples);
  return out;
}

BinaryMask fill_polygon(const std::vector<Point2>& polygon, int height, int width) {
  BinaryMask mask(height, width, 0);
  const std::size_t n = polygon.size();
  if (n < 3) return mask;
  std::vector<double> xs;
  for (int i = 0; i < height; ++i) {
    const double y = i;
    xs.clear();
    for (std::size_t e = 0; e < n; ++e) {
      const Point2& a = polygon[e];
      const Point2& b = polygon[(e + 1) % n];
      if ((a.row <= y && y < b.row) || (b.row <= y && y < a.row)) {
        xs.push_back(a.col + (y - a.row) * (b.col - a.col) / (b.row - a.row));
      }
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      int from = std::max(0, static_cast<int>(std::ceil(xs[k] - 1e-9)));
      int to = std::min(width - 1, static_cast<int>(std::floor(xs[k + 1] + 1e-9)));
      for (int j = from; j <= to; ++j) mask(i, j) = 1;
    }
  }
  return mask;
}

BinaryMask smooth_mask(const BinaryMask& mask, const SmoothOptions& options) {
  if (count_nonzero(mask) == 0) return mask;
  BinaryMask dilated = options.dilate_radius > 0 ? imgproc::dilate_disk(mask, options.dilate_radius) : mask;

  Grid<float> field(mask.height(), mask.width());
  for (std::size_t p = 0; p < field.size(); ++p) field[p] = dilated[p] ? 1.0f : 0.0f;
  field = imgproc::gaussian_blur(field, options.sigma);
  BinaryMask blurred(mask.height(), mask.width(), 0);
  for (std::size_t p = 0; p < field.size(); ++p) blurred[p] = field[p] >= 0.5f ? 1 : 0;
  if (!options.fit_spline) return blurred;

  int count = 0;
  Grid<int> labels = imgproc::label_components(blurred, 8, &count);
  BinaryMask out(mask.height(), mask.width(), 0);
  for (int l = 1; l <= count; ++l) {
    BinaryMask part(mask.height(), mask.width(), 0);
    for (std::size_t p = 0; p < part.size(); ++p) part[p] = labels[p] == l ? 1 : 0;
    Contour c = trace_outer_contour(part);
    std::vector<Point2> poly;
    for (std::size_t k = 0; k + 1 < c.points.size(); ++k) {
      poly.push_back({static_cast<double>(c.points[k].row), static_cast<double>(c.points[k].col)});
    }
    BinaryMask filled = poly.size() >= 8
                            ? fill_polygon(fit_closed_bspline(poly, options.spline_smoothing), mask.height(),
                                           mask.width())
                            : part;
    for (std::size_t p = 0; p < out.size(); ++p) out[p] |= filled[p];
  }
  return out;
}

BinaryMask rasterize_region(const FloatMap& region, int height, int width, const FinalizeOptions& options) {
  BinaryMask support = region_support(region, height, width, options.support_threshold, options.nearest_upsample);
  if (!options.multi_region) support = imgproc::largest_component(support, 4);
  return smooth_mask(support, options.smooth);
}

FinalizeResult finalize(const EdgeImage& edges, const FloatMap& fallback_region, const FinalizeOptions& options) {
  const int h = edges.height();
  const int w = edges.width();
  FinalizeResult result;
  EdgeImage bridged = bridge_endpoints(edges, options.max_gap_frac * std::hypot(h, w));
  BinaryMask filled = edge_to_mask(bridged);
  if (!options.multi_region) filled = imgproc::largest_component(filled, 4);

  BinaryImage support = region_support(fallback_region, h, w, options.support_threshold, options.nearest_upsample);
  std::size_t interior = 0, support_area = 0, covered = 0;
  for (std::size_t p = 0; p < filled.size(); ++p) {
    if (filled[p] && !bridged[p]) ++interior;
    if (support[p]) {
      ++support_area;
      if (filled[p]) ++covered;
    }
  }
  const bool too_small = static_cast<double>(interior) < options.min_area_frac * h * w;
  const bool fragment = static_cast<double>(covered) < options.min_support_cover * static_cast<double>(support_area);
  if (too_small || fragment) {
    result.used_fallback = true;
    result.filled = std::move(support);
    result.mask = rasterize_region(fallback_region, h, w, options);
    return result;
  }
  result.filled = filled;
  result.mask = smooth_mask(filled, options.smooth);
  return result;
}

}  // namespace posestar

#include "posestar/imgproc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

namespace posestar::imgproc {

Grid<float> gaussian_blur(const Grid<float>& src, double sigma) {
  if (sigma <= 0) return src;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0;
  for (int k = -radius; k <= radius; ++k) {
    kernel[k + radius] = std::exp(-(k * k) / (2.0 * sigma * sigma));
    total += kernel[k + radius];
  }
  for (double& k : kernel) k /= total;

  const int h = src.height();
  const int w = src.width();
  Grid<float> tmp(h, w);
  Grid<float> out(h, w);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      double acc = 0;
      for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * src(i, std::clamp(j + k, 0, w - 1));
      tmp(i, j) = static_cast<float>(acc);
    }
  }
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      double acc = 0;
      for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * tmp(std::clamp(i + k, 0, h - 1), j);
      out(i, j) = static_cast<float>(acc);
    }
  }
  return out;
}

namespace {

constexpr double kInf = 1e20;

// 1-D squared distance transform of a sampled function (lower envelope of parabolas).
void dt1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v, std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    double s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
    while (s <= z[k]) {
      --k;
      s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    d[q] = double(q - v[k]) * (q - v[k]) + f[v[k]];
  }
}

}  // namespace

Grid<float> distance_transform(const BinaryImage& features) {
  const int h = features.height();
  const int w = features.width();
  Grid<float> out(h, w, std::numeric_limits<float>::infinity());
  if (count_nonzero(features) == 0) return out;

  std::vector<double> sq(static_cast<std::size_t>(h) * w);
  const int n = std::max(h, w);
  std::vector<double> f(n), d(n), z(n + 1);
  std::vector<int> v(n);

  for (int j = 0; j < w; ++j) {
    f.resize(h);
    d.resize(h);
    for (int i = 0; i < h; ++i) f[i] = features(i, j) ? 0.0 : kInf;
    dt1d(f, d, v, z);
    for (int i = 0; i < h; ++i) sq[static_cast<std::size_t>(i) * w + j] = d[i];
  }
  for (int i = 0; i < h; ++i) {
    f.resize(w);
    d.resize(w);
    for (int j = 0; j < w; ++j) f[j] = sq[static_cast<std::size_t>(i) * w + j];
    dt1d(f, d, v, z);
    for (int j = 0; j < w; ++j) out(i, j) = static_cast<float>(std::sqrt(d[j]));
  }
  return out;
}

FloatMap resize_bilinear(const FloatMap& src, int height, int width) {
  FloatMap out(height, width);
  const double sy = static_cast<double>(src.height()) / height;
  const double sx = static_cast<double>(src.width()) / width;
  for (int i = 0; i < height; ++i) {
    double y = std::clamp((i + 0.5) * sy - 0.5, 0.0, src.height() - 1.0);
    int y0 = static_cast<int>(std::floor(y));
    int y1 = std::min(y0 + 1, src.height() - 1);
    double fy = y - y0;
    for (int j = 0; j < width; ++j) {
      double x = std::clamp((j + 0.5) * sx - 0.5, 0.0, src.width() - 1.0);
      int x0 = static_cast<int>(std::floor(x));
      int x1 = std::min(x0 + 1, src.width() - 1);
      double fx = x - x0;
      double top = src(y0, x0) * (1 - fx) + src(y0, x1) * fx;
      double bottom = src(y1, x0) * (1 - fx) + src(y1, x1) * fx;
      out(i, j) = static_cast<float>(top * (1 - fy) + bottom * fy);
    }
  }
  return out;
}

FloatMap resize_nearest(const FloatMap& src, int height, int width) {
  FloatMap out(height, width);
  for (int i = 0; i < height; ++i) {
    int si = std::min(static_cast<int>(static_cast<long long>(i) * src.height() / height), src.height() - 1);
    for (int j = 0; j < width; ++j) {
      int sj = std::min(static_cast<int>(static_cast<long long>(j) * src.width() / width), src.width() - 1);
      out(i, j) = src(si, sj);
    }
  }
  return out;
}

Grid<int> label_components(const BinaryImage& mask, int connectivity, int* count) {
  const int h = mask.height();
  const int w = mask.width();
  Grid<int> labels(h, w, 0);
  int next = 0;
  std::queue<std::pair<int, int>> queue;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      if (!mask(i, j) || labels(i, j)) continue;
      ++next;
      labels(i, j) = next;
      queue.push({i, j});
      while (!queue.empty()) {
        auto [ci, cj] = queue.front();
        queue.pop();
        for (int di = -1; di <= 1; ++di) {
          for (int dj = -1; dj <= 1; ++dj) {
            if ((di == 0 && dj == 0) || (connectivity == 4 && di != 0 && dj != 0)) continue;
            int ni = ci + di, nj = cj + dj;
            if (!mask.contains(ni, nj) || !mask(ni, nj) || labels(ni, nj)) continue;
            labels(ni, nj) = next;
            queue.push({ni, nj});
          }
        }
      }
    }
  }
  if (count) *count = next;
  return labels;
}

std::vector<std::size_t> component_areas(const Grid<int>& labels, int count) {
  std::vector<std::size_t> areas(static_cast<std::size_t>(count) + 1, 0);
  for (int l : labels.storage()) {
    if (l > 0) ++areas[l];
  }
  return areas;
}

BinaryImage largest_component(const BinaryImage& mask, int connectivity) {
  int count = 0;
  Grid<int> labels = label_components(mask, connectivity, &count);
  BinaryImage out(mask.height(), mask.width(), 0);
  if (count == 0) return out;
  auto areas = component_areas(labels, count);
  // Ties resolve to the lowest label (first in raster order).
  int best = 1;
  for (int l = 2; l <= count; ++l) {
    if (areas[l] > areas[best]) best = l;
  }
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = labels[p] == best ? 1 : 0;
  return out;
}

BinaryImage dilate_disk(const BinaryImage& mask, int radius) {
  std::vector<std::pair<int, int>> offsets;
  for (int di = -radius; di <= radius; ++di) {
    for (int dj = -radius; dj <= radius; ++dj) {
      if (di * di + dj * dj <= radius * radius) offsets.push_back({di, dj});
    }
  }
  BinaryImage out(mask.height(), mask.width(), 0);
  for (int i = 0; i < mask.height(); ++i) {
    for (int j = 0; j < mask.width(); ++j) {
      if (!mask(i, j)) continue;
      for (auto [di, dj] : offsets) {
        if (out.contains(i + di, j + dj)) out(i + di, j + dj) = 1;
      }
    }
  }
  return out;
}

}  // namespace posestar::imgproc

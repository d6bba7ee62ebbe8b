#pragma once

#include <cstdint>
#include <vector>

#include "posestar/grid.hpp"

namespace posestar::imgproc {

// Separable Gaussian, kernel radius ceil(3 sigma), replicated borders.
Grid<float> gaussian_blur(const Grid<float>& src, double sigma);

// Euclidean distance from every pixel to the nearest nonzero pixel of
// `features` (exact, Felzenszwalb-Huttenlocher). +inf everywhere when
// `features` is empty.
Grid<float> distance_transform(const BinaryImage& features);

// Bilinear resize with half-pixel centers and clamped borders.
FloatMap resize_bilinear(const FloatMap& src, int height, int width);
FloatMap resize_nearest(const FloatMap& src, int height, int width);

// 4- or 8-connected component labels (0 = background, 1..n).
Grid<int> label_components(const BinaryImage& mask, int connectivity, int* count = nullptr);
std::vector<std::size_t> component_areas(const Grid<int>& labels, int count);
BinaryImage largest_component(const BinaryImage& mask, int connectivity = 4);

// Dilation with a disk of the given radius (cells within Euclidean distance r).
BinaryImage dilate_disk(const BinaryImage& mask, int radius);

}  // namespace posestar::imgproc

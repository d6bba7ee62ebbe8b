#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace posestar {

// Integer cell coordinate on a map grid: row i, column j.
struct GridPoint {
  int row = 0;
  int col = 0;
  friend bool operator==(const GridPoint&, const GridPoint&) = default;
};

// Dense row-major 2-D array. Used for attention maps, edge images and masks.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int height, int width, T fill = T{})
      : height_(height), width_(width), data_(static_cast<std::size_t>(height) * width, fill) {}
  Grid(int height, int width, std::vector<T> data)
      : height_(height), width_(width), data_(std::move(data)) {}

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int row, int col) { return data_[static_cast<std::size_t>(row) * width_ + col]; }
  const T& operator()(int row, int col) const {
    return data_[static_cast<std::size_t>(row) * width_ + col];
  }
  T& operator[](std::size_t idx) { return data_[idx]; }
  const T& operator[](std::size_t idx) const { return data_[idx]; }

  bool contains(int row, int col) const {
    return row >= 0 && col >= 0 && row < height_ && col < width_;
  }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

using FloatMap = Grid<float>;
// Binary images (edge images and masks) hold 0/1 per pixel.
using BinaryImage = Grid<std::uint8_t>;

inline std::size_t count_nonzero(const BinaryImage& img) {
  return static_cast<std::size_t>(
      std::count_if(img.storage().begin(), img.storage().end(), [](std::uint8_t v) { return v != 0; }));
}

}  // namespace posestar

#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "posestar/grid.hpp"

namespace posestar::testing {

// Fresh empty directory under the system temp dir, unique per call.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  static std::uint64_t counter = 0;
  std::random_device rd;
  auto dir = std::filesystem::temp_directory_path() /
             ("posestar_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline BinaryImage rect_mask(int h, int w, int r0, int c0, int r1, int c1) {
  BinaryImage m(h, w, 0);
  for (int r = r0; r < r1; ++r) {
    for (int c = c0; c < c1; ++c) m(r, c) = 1;
  }
  return m;
}

}  // namespace posestar::testing

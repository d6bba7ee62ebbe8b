#include "posestar/skeleton.hpp"

#include <algorithm>

namespace posestar::skeleton {

bool is_body25(std::string_view name) { return body25_index(name) >= 0; }

int body25_index(std::string_view name) {
  auto it = std::find(kBody25.begin(), kBody25.end(), name);
  return it == kBody25.end() ? -1 : static_cast<int>(it - kBody25.begin());
}

std::vector<std::string_view> neighbors(std::string_view name) {
  std::vector<std::string_view> out;
  for (const auto& [a, b] : kEdges) {
    if (a == name) out.push_back(b);
    if (b == name) out.push_back(a);
  }
  return out;
}

std::vector<std::string_view> star_keypoints(std::string_view star_token) {
  if (star_token == "Neck") return {"Neck"};
  static constexpr std::array<std::string_view, 6> kSided = {"Shoulder", "Elbow", "Wrist",
                                                             "Hip",      "Knee",  "Ankle"};
  for (auto s : kSided) {
    if (s == star_token) {
      // Indices into kBody25 are stable, so look the sided names up there to
      // hand out views with static storage.
      std::string right = "R" + std::string(s);
      std::string left = "L" + std::string(s);
      return {kBody25[body25_index(right)], kBody25[body25_index(left)]};
    }
  }
  if (is_body25(star_token)) return {kBody25[body25_index(star_token)]};
  return {};
}

}  // namespace posestar::skeleton

#pragma once

#include <array>
#include <string_view>
#include <utility>
#include <vector>

namespace posestar::skeleton {

// BODY_25 keypoint names in OpenPose index order.
inline constexpr std::array<std::string_view, 25> kBody25 = {
    "Nose",   "Neck",   "RShoulder", "RElbow", "RWrist",  "LShoulder", "LElbow",
    "LWrist", "MidHip", "RHip",      "RKnee",  "RAnkle",  "LHip",      "LKnee",
    "LAnkle", "REye",   "LEye",      "REar",   "LEar",    "LBigToe",   "LSmallToe",
    "LHeel",  "RBigToe", "RSmallToe", "RHeel"};

// BODY_25 limb pairs.
inline constexpr std::array<std::pair<std::string_view, std::string_view>, 24> kEdges = {{
    {"Neck", "MidHip"},   {"Neck", "RShoulder"},  {"Neck", "LShoulder"},  {"RShoulder", "RElbow"},
    {"RElbow", "RWrist"}, {"LShoulder", "LElbow"}, {"LElbow", "LWrist"},   {"MidHip", "RHip"},
    {"RHip", "RKnee"},    {"RKnee", "RAnkle"},     {"MidHip", "LHip"},     {"LHip", "LKnee"},
    {"LKnee", "LAnkle"},  {"Neck", "Nose"},        {"Nose", "REye"},       {"REye", "REar"},
    {"Nose", "LEye"},     {"LEye", "LEar"},        {"LAnkle", "LBigToe"},  {"LBigToe", "LSmallToe"},
    {"LAnkle", "LHeel"},  {"RAnkle", "RBigToe"},   {"RBigToe", "RSmallToe"}, {"RAnkle", "RHeel"},
}};

bool is_body25(std::string_view name);
int body25_index(std::string_view name);
std::vector<std::string_view> neighbors(std::string_view name);

// Keypoint names a side-agnostic star token resolves to, e.g. "Shoulder" ->
// {"RShoulder", "LShoulder"}, "Neck" -> {"Neck"}.
std::vector<std::string_view> star_keypoints(std::string_view star_token);

}  // namespace posestar::skeleton

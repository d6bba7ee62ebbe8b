#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "posestar/grid.hpp"

namespace posestar {

enum class TokenKind { star, fleshy, clothes };

std::string_view to_string(TokenKind kind);
TokenKind token_kind_from_string(std::string_view s);

// Per-step, per-token cross-attention maps, laid out [t][n][row][col].
struct AttentionStack {
  int steps = 0;
  int tokens = 0;
  int height = 16;
  int width = 16;
  std::vector<float> data;
  std::vector<std::string> token_names;
  std::vector<TokenKind> token_kinds;

  std::size_t map_size() const { return static_cast<std::size_t>(height) * width; }
  std::size_t offset(int t, int n) const {
    return (static_cast<std::size_t>(t) * tokens + n) * map_size();
  }
  std::span<const float> map_span(int t, int n) const { return {data.data() + offset(t, n), map_size()}; }
  std::span<float> map_span(int t, int n) { return {data.data() + offset(t, n), map_size()}; }
  FloatMap map(int t, int n) const;
  std::optional<int> find_token(std::string_view name) const;

  friend bool operator==(const AttentionStack&, const AttentionStack&) = default;
};

// Final-step self-attention maps reduced to K region-conditioned maps, [k][row][col].
struct SelfAttentionStack {
  int maps = 8;
  int height = 32;
  int width = 32;
  std::vector<float> data;

  std::size_t map_size() const { return static_cast<std::size_t>(height) * width; }
  FloatMap map(int k) const;

  friend bool operator==(const SelfAttentionStack&, const SelfAttentionStack&) = default;
};

// Throws ValueError when an invariant does not hold.
void validate(const AttentionStack& stack);
void validate(const SelfAttentionStack& stack);

// ASTD v1: "ASTD", u32 version, u32 header length, UTF-8 JSON header,
// then little-endian float32 payload.
inline constexpr std::uint32_t kAstdVersion = 1;

AttentionStack read_attention_stack(const std::filesystem::path& path);
void write_attention_stack(const AttentionStack& stack, const std::filesystem::path& path);

// Self-attention stacks reuse the ASTD container with T = 1 and N = K.
SelfAttentionStack read_self_attention_stack(const std::filesystem::path& path);
void write_self_attention_stack(const SelfAttentionStack& stack, const std::filesystem::path& path);

std::vector<std::uint8_t> encode_astd(const AttentionStack& stack);
AttentionStack decode_astd(std::span<const std::uint8_t> bytes);

struct Keypoint {
  double x = 0;
  double y = 0;
  double confidence = 0;
  friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

// Named 2-D keypoints in image pixel coordinates. Absent keypoints are simply
// missing from `entries`.
struct KeypointSet {
  std::map<std::string, Keypoint> entries;
  int image_width = 0;
  int image_height = 0;

  const Keypoint* find(std::string_view name) const;
  friend bool operator==(const KeypointSet&, const KeypointSet&) = default;
};

void validate(const KeypointSet& kps);

// Accepts either {"image_width", "image_height", "keypoints": {name: [x, y, c]}}
// or an OpenPose BODY_25 dump ("people"[0]."pose_keypoints_2d") with image dims
// alongside; zero-confidence OpenPose triples are treated as absent.
KeypointSet read_keypoints(const std::filesystem::path& path);
KeypointSet parse_keypoints_json(std::string_view text);
void write_keypoints(const KeypointSet& kps, const std::filesystem::path& path);
std::string keypoints_to_json(const KeypointSet& kps);

// 8-bit image, 1 or 3 interleaved channels.
struct ImageBuffer {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> samples;

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;
};

void validate(const ImageBuffer& img);
// Rec. 601 luma for RGB input; identity for grayscale.
Grid<float> to_gray(const ImageBuffer& img);

ImageBuffer read_png(const std::filesystem::path& path);
void write_png(const ImageBuffer& img, const std::filesystem::path& path);
ImageBuffer read_pgm(const std::filesystem::path& path);
void write_pgm(const ImageBuffer& img, const std::filesystem::path& path);
// Dispatches on the file extension (.png or .pgm).
ImageBuffer read_image(const std::filesystem::path& path);

// Binary masks are written as 0/255 grayscale.
ImageBuffer mask_to_image(const BinaryImage& mask);
BinaryImage image_to_mask(const ImageBuffer& img);
void write_mask(const BinaryImage& mask, const std::filesystem::path& path);

}  // namespace posestar

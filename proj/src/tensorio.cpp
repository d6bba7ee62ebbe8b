#include "posestar/tensorio.hpp"

#include <png.h>

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>
#include <set>
#include <sstream>

#include <json.hpp>

#include "posestar/errors.hpp"
#include "posestar/skeleton.hpp"

namespace posestar {

using nlohmann::json;

std::string_view to_string(TokenKind kind) {
  switch (kind) {
    case TokenKind::star: return "star";
    case TokenKind::fleshy: return "fleshy";
    case TokenKind::clothes: return "clothes";
  }
  return "?";
}

TokenKind token_kind_from_string(std::string_view s) {
  if (s == "star") return TokenKind::star;
  if (s == "fleshy") return TokenKind::fleshy;
  if (s == "clothes") return TokenKind::clothes;
  throw FormatError("unknown token kind '" + std::string(s) + "'");
}

FloatMap AttentionStack::map(int t, int n) const {
  auto s = map_span(t, n);
  return FloatMap(height, width, std::vector<float>(s.begin(), s.end()));
}

std::optional<int> AttentionStack::find_token(std::string_view name) const {
  for (int n = 0; n < static_cast<int>(token_names.size()); ++n) {
    if (token_names[n] == name) return n;
  }
  return std::nullopt;
}

FloatMap SelfAttentionStack::map(int k) const {
  auto first = data.begin() + static_cast<std::ptrdiff_t>(k * map_size());
  return FloatMap(height, width, std::vector<float>(first, first + static_cast<std::ptrdiff_t>(map_size())));
}

namespace {

void check_payload(std::span<const float> data) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) throw ValueError("non-finite attention value at index " + std::to_string(i));
    if (data[i] < 0.0f) throw ValueError("negative attention value at index " + std::to_string(i));
  }
}

std::uint32_t load_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void store_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void append_f32(std::vector<std::uint8_t>& out, std::span<const float> values) {
  std::size_t base = out.size();
  out.resize(base + values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(values[i]);
    for (int b = 0; b < 4; ++b) out[base + i * 4 + b] = static_cast<std::uint8_t>(bits >> (8 * b));
  }
}

struct RawAstd {
  json header;
  int steps = 0, tokens = 0, height = 0, width = 0;
  std::vector<float> data;
};

std::vector<std::uint8_t> encode_raw(const json& header, std::span<const float> data) {
  std::string text = header.dump();
  std::vector<std::uint8_t> out;
  out.reserve(12 + text.size() + data.size() * 4);
  constexpr std::string_view kMagic = "ASTD";
  out.insert(out.end(), kMagic.begin(), kMagic.end());
  store_u32(out, kAstdVersion);
  store_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  append_f32(out, data);
  return out;
}

int header_dim(const json& header, const char* key) {
  if (!header.contains(key) || !header[key].is_number_integer()) {
    throw FormatError(std::string("ASTD header missing integer field '") + key + "'");
  }
  auto v = header[key].get<long long>();
  if (v < 0 || v > (1 << 24)) throw CorruptError(std::string("ASTD header field '") + key + "' out of range");
  return static_cast<int>(v);
}

RawAstd decode_raw(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "ASTD", 4) != 0) throw FormatError("bad ASTD magic");
  std::uint32_t version = load_u32(bytes.data() + 4);
  if (version != kAstdVersion) throw FormatError("unsupported ASTD version " + std::to_string(version));
  std::uint32_t header_len = load_u32(bytes.data() + 8);
  if (bytes.size() < 12ull + header_len) throw CorruptError("ASTD header truncated");
  RawAstd raw;
  try {
    raw.header = json::parse(bytes.begin() + 12, bytes.begin() + 12 + header_len);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("ASTD header is not valid JSON: ") + e.what());
  }
  if (!raw.header.is_object()) throw FormatError("ASTD header must be a JSON object");
  raw.steps = header_dim(raw.header, "T");
  raw.tokens = header_dim(raw.header, "N");
  raw.height = header_dim(raw.header, "H");
  raw.width = header_dim(raw.header, "W");
  std::size_t count = static_cast<std::size_t>(raw.steps) * raw.tokens * raw.height * raw.width;
  std::size_t payload = bytes.size() - 12 - header_len;
  if (payload != count * 4) {
    throw CorruptError("ASTD payload has " + std::to_string(payload) + " bytes, header implies " +
                       std::to_string(count * 4));
  }
  raw.data.resize(count);
  const std::uint8_t* p = bytes.data() + 12 + header_len;
  for (std::size_t i = 0; i < count; ++i) raw.data[i] = std::bit_cast<float>(load_u32(p + 4 * i));
  return raw;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

void validate(const AttentionStack& s) {
  if (s.steps < 1 || s.tokens < 1) throw ValueError("attention stack needs T >= 1 and N >= 1");
  if (s.height < 1 || s.width < 1) throw ValueError("attention stack needs a non-empty grid");
  if (s.data.size() != static_cast<std::size_t>(s.steps) * s.tokens * s.map_size()) {
    throw ValueError("attention stack data length does not match T*N*H*W");
  }
  if (s.token_names.size() != static_cast<std::size_t>(s.tokens) ||
      s.token_kinds.size() != s.token_names.size()) {
    throw ValueError("token_names/token_kinds must both have N entries");
  }
  std::set<std::string> seen(s.token_names.begin(), s.token_names.end());
  if (seen.size() != s.token_names.size()) throw ValueError("token_names must be unique");
  check_payload(s.data);
}

void validate(const SelfAttentionStack& s) {
  if (s.maps < 1 || s.height < 1 || s.width < 1) throw ValueError("self-attention stack has an empty shape");
  if (s.data.size() != static_cast<std::size_t>(s.maps) * s.map_size()) {
    throw ValueError("self-attention data length does not match K*H*W");
  }
  check_payload(s.data);
}

std::vector<std::uint8_t> encode_astd(const AttentionStack& stack) {
  validate(stack);
  json kinds = json::array();
  for (auto k : stack.token_kinds) kinds.push_back(std::string(to_string(k)));
  json header = {{"T", stack.steps},          {"N", stack.tokens},     {"H", stack.height},
                 {"W", stack.width},          {"token_names", stack.token_names},
                 {"token_kinds", kinds}};
  return encode_raw(header, stack.data);
}

AttentionStack decode_astd(std::span<const std::uint8_t> bytes) {
  RawAstd raw = decode_raw(bytes);
  AttentionStack s;
  s.steps = raw.steps;
  s.tokens = raw.tokens;
  s.height = raw.height;
  s.width = raw.width;
  s.data = std::move(raw.data);
  try {
    s.token_names = raw.header.at("token_names").get<std::vector<std::string>>();
    for (const auto& k : raw.header.at("token_kinds")) s.token_kinds.push_back(token_kind_from_string(k.get<std::string>()));
  } catch (const json::exception& e) {
    throw FormatError(std::string("ASTD token metadata malformed: ") + e.what());
  }
  if (s.token_names.size() != static_cast<std::size_t>(s.tokens)) {
    throw CorruptError("token_names length does not match N");
  }
  validate(s);
  return s;
}

AttentionStack read_attention_stack(const std::filesystem::path& path) { return decode_astd(read_file(path)); }

void write_attention_stack(const AttentionStack& stack, const std::filesystem::path& path) {
  write_file(path, encode_astd(stack));
}

SelfAttentionStack read_self_attention_stack(const std::filesystem::path& path) {
  RawAstd raw = decode_raw(read_file(path));
  if (raw.steps != 1) throw FormatError("self-attention ASTD must have T = 1");
  SelfAttentionStack s{raw.tokens, raw.height, raw.width, std::move(raw.data)};
  validate(s);
  return s;
}

void write_self_attention_stack(const SelfAttentionStack& stack, const std::filesystem::path& path) {
  validate(stack);
  std::vector<std::string> names;
  for (int k = 0; k < stack.maps; ++k) names.push_back("S" + std::to_string(k));
  json header = {{"T", 1}, {"N", stack.maps}, {"H", stack.height}, {"W", stack.width}, {"token_names", names},
                 {"layout", "self"}};
  write_file(path, encode_raw(header, stack.data));
}

// ---------------------------------------------------------------------------
// Keypoints

const Keypoint* KeypointSet::find(std::string_view name) const {
  auto it = entries.find(std::string(name));
  return it == entries.end() ? nullptr : &it->second;
}

void validate(const KeypointSet& kps) {
  if (kps.image_width <= 0 || kps.image_height <= 0) throw FormatError("keypoint set needs positive image dims");
  for (const auto& [name, kp] : kps.entries) {
    if (!skeleton::is_body25(name)) throw ValueError("unknown keypoint name '" + name + "'");
    if (!(kp.x >= 0 && kp.x < kps.image_width && kp.y >= 0 && kp.y < kps.image_height)) {
      throw ValueError("keypoint " + name + " lies outside the image");
    }
    if (!(kp.confidence >= 0 && kp.confidence <= 1)) throw ValueError("keypoint " + name + " confidence not in [0,1]");
  }
}

KeypointSet parse_keypoints_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("keypoint file is not valid JSON: ") + e.what());
  }
  KeypointSet kps;
  auto dim = [&](const char* a, const char* b) -> int {
    for (const char* key : {a, b}) {
      if (doc.contains(key) && doc[key].is_number()) return doc[key].get<int>();
    }
    throw FormatError(std::string("keypoint file missing '") + a + "'");
  };
  kps.image_width = dim("image_width", "width");
  kps.image_height = dim("image_height", "height");

  if (doc.contains("keypoints")) {
    for (const auto& [name, triple] : doc["keypoints"].items()) {
      if (!triple.is_array() || triple.size() != 3) throw FormatError("keypoint " + name + " must be [x, y, confidence]");
      kps.entries[name] = Keypoint{triple[0].get<double>(), triple[1].get<double>(), triple[2].get<double>()};
    }
  } else if (doc.contains("people")) {
    if (!doc["people"].empty()) {
      const auto& flat = doc["people"][0].at("pose_keypoints_2d");
      if (flat.size() != 75) throw FormatError("pose_keypoints_2d must hold 25 triples");
      for (std::size_t i = 0; i < 25; ++i) {
        double c = flat[3 * i + 2].get<double>();
        if (c <= 0) continue;
        kps.entries[std::string(skeleton::kBody25[i])] =
            Keypoint{flat[3 * i].get<double>(), flat[3 * i + 1].get<double>(), c};
      }
    }
  } else {
    throw FormatError("keypoint file has neither 'keypoints' nor 'people'");
  }
  validate(kps);
  return kps;
}

KeypointSet read_keypoints(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  return parse_keypoints_json(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::string keypoints_to_json(const KeypointSet& kps) {
  json doc = {{"image_width", kps.image_width}, {"image_height", kps.image_height}};
  json entries = json::object();
  for (const auto& [name, kp] : kps.entries) entries[name] = {kp.x, kp.y, kp.confidence};
  doc["keypoints"] = entries;
  return doc.dump(2);
}

void write_keypoints(const KeypointSet& kps, const std::filesystem::path& path) {
  validate(kps);
  std::string text = keypoints_to_json(kps);
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

// ---------------------------------------------------------------------------
// Images

void validate(const ImageBuffer& img) {
  if (img.width <= 0 || img.height <= 0) throw ValueError("image has non-positive dims");
  if (img.channels != 1 && img.channels != 3) throw ValueError("image must have 1 or 3 channels");
  if (img.samples.size() != static_cast<std::size_t>(img.width) * img.height * img.channels) {
    throw ValueError("image sample count does not match width*height*channels");
  }
}

Grid<float> to_gray(const ImageBuffer& img) {
  validate(img);
  Grid<float> g(img.height, img.width);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (img.channels == 1) {
      g[i] = img.samples[i];
    } else {
      const std::uint8_t* p = &img.samples[3 * i];
      g[i] = 0.299f * p[0] + 0.587f * p[1] + 0.114f * p[2];
    }
  }
  return g;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

ImageBuffer read_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw IoError("cannot read PNG " + path.string() + ": " + image.message);
  }
  bool gray = (image.format & PNG_FORMAT_FLAG_COLOR) == 0;
  image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  ImageBuffer img{static_cast<int>(image.width), static_cast<int>(image.height), gray ? 1 : 3, {}};
  img.samples.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, img.samples.data(), 0, nullptr)) {
    png_image_free(&image);
    throw FormatError("corrupt PNG " + path.string() + ": " + image.message);
  }
  return img;
}

void write_png(const ImageBuffer& img, const std::filesystem::path& path) {
  validate(img);
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = img.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, img.samples.data(), 0, nullptr)) {
    throw IoError("cannot write PNG " + path.string() + ": " + image.message);
  }
}

ImageBuffer read_pgm(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  std::string text(bytes.begin(), bytes.end());
  std::istringstream in(text);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P5" || !in || w <= 0 || h <= 0 || maxval != 255) throw FormatError("unsupported PGM " + path.string());
  in.get();
  auto offset = static_cast<std::size_t>(in.tellg());
  if (bytes.size() < offset + static_cast<std::size_t>(w) * h) throw CorruptError("PGM payload truncated");
  ImageBuffer img{w, h, 1, std::vector<std::uint8_t>(bytes.begin() + static_cast<std::ptrdiff_t>(offset),
                                                     bytes.begin() + static_cast<std::ptrdiff_t>(offset + w * h))};
  return img;
}

void write_pgm(const ImageBuffer& img, const std::filesystem::path& path) {
  validate(img);
  if (img.channels != 1) throw ValueError("PGM output needs a single-channel image");
  std::string head = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> bytes(head.begin(), head.end());
  bytes.insert(bytes.end(), img.samples.begin(), img.samples.end());
  write_file(path, bytes);
}

ImageBuffer read_image(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  if (ext == ".pgm" || ext == ".PGM") return read_pgm(path);
  return read_png(path);
}

ImageBuffer mask_to_image(const BinaryImage& mask) {
  ImageBuffer img{mask.width(), mask.height(), 1, std::vector<std::uint8_t>(mask.size())};
  for (std::size_t i = 0; i < mask.size(); ++i) img.samples[i] = mask[i] ? 255 : 0;
  return img;
}

BinaryImage image_to_mask(const ImageBuffer& img) {
  Grid<float> g = to_gray(img);
  BinaryImage m(img.height, img.width);
  for (std::size_t i = 0; i < g.size(); ++i) m[i] = g[i] >= 128.0f ? 1 : 0;
  return m;
}

void write_mask(const BinaryImage& mask, const std::filesystem::path& path) {
  auto img = mask_to_image(mask);
  auto ext = path.extension().string();
  if (ext == ".pgm" || ext == ".PGM") {
    write_pgm(img, path);
  } else {
    write_png(img, path);
  }
}

}  // namespace posestar

#include "posestar/instruction.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iterator>
#include <regex>

#include <json.hpp>

#include "posestar/embedded_data.hpp"
#include "posestar/errors.hpp"

namespace posestar {

using nlohmann::json;

std::string_view to_string(GarmentClass g) {
  switch (g) {
    case GarmentClass::blouse_shirt: return "blouse_shirt";
    case GarmentClass::dress: return "dress";
    case GarmentClass::pants_skirt: return "pants_skirt";
  }
  return "?";
}

namespace {

GarmentClass garment_from_string(std::string_view s) {
  if (s == "blouse_shirt") return GarmentClass::blouse_shirt;
  if (s == "dress") return GarmentClass::dress;
  if (s == "pants_skirt") return GarmentClass::pants_skirt;
  throw FormatError("unknown garment class '" + std::string(s) + "' in rule table");
}

bool contains(const std::vector<std::string>& v, std::string_view s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

}  // namespace

int RuleTable::rank(std::string_view token) const {
  auto it = order.find(std::string(token));
  if (it == order.end()) throw UnknownAnchorError("no anatomical rank for '" + std::string(token) + "'");
  return it->second;
}

bool RuleTable::is_anchor(std::string_view token) const {
  return order.count(std::string(token)) && (contains(star_tokens, token) || contains(fleshy_tokens, token));
}

bool RuleTable::is_arm_token(std::string_view token) const { return contains(arm_tokens, token); }

RuleTable parse_rule_table(std::string_view json_text) {
  RuleTable rules;
  try {
    json doc = json::parse(json_text);
    rules.order = doc.at("anatomical_order").get<std::map<std::string, int>>();
    rules.star_tokens = doc.at("star_tokens").get<std::vector<std::string>>();
    rules.fleshy_tokens = doc.at("fleshy_tokens").get<std::vector<std::string>>();
    rules.arm_tokens = doc.value("arm_tokens", std::vector<std::string>{});
    rules.anchor_synonyms = doc.at("anchor_synonyms").get<std::map<std::string, std::string>>();
    for (const auto& [name, g] : doc.at("garments").items()) {
      GarmentTemplate t;
      t.keywords = g.at("keywords").get<std::vector<std::string>>();
      t.start = g.at("start").get<std::string>();
      t.user_start = g.value("user_start", false);
      t.default_end = g.at("default_end").get<std::string>();
      t.include_arms = g.value("include_arms", false);
      t.include_legs = g.value("include_legs", false);
      t.stars = g.at("stars").get<std::vector<std::string>>();
      t.fleshy = g.at("fleshy").get<std::vector<std::string>>();
      rules.garments[garment_from_string(name)] = std::move(t);
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed rule table: ") + e.what());
  }
  for (const auto& [word, token] : rules.anchor_synonyms) {
    if (!rules.is_anchor(token)) throw FormatError("synonym '" + word + "' maps to unknown token " + token);
  }
  for (const auto& [g, t] : rules.garments) {
    for (const auto& s : t.stars) {
      if (!contains(rules.star_tokens, s)) throw FormatError("template star '" + s + "' is not a star token");
    }
    for (const auto& f : t.fleshy) {
      if (!contains(rules.fleshy_tokens, f)) throw FormatError("template token '" + f + "' is not a fleshy token");
    }
    rules.rank(t.start);
    rules.rank(t.default_end);
  }
  return rules;
}

RuleTable load_rule_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open rule table " + path.string());
  std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return parse_rule_table(text);
}

const RuleTable& default_rule_table() {
  static const RuleTable table = parse_rule_table(embedded::kInstructionRules);
  return table;
}

Instruction parse_instruction(std::string_view raw, const RuleTable& rules) {
  std::string text = lower(raw);
  if (std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); })) {
    throw UnknownGarmentError("empty instruction");
  }
  static const std::regex word_re(R"([a-z]+(?:-[a-z]+)*)");
  std::vector<std::string> words;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), word_re); it != std::sregex_iterator(); ++it) {
    words.push_back(it->str());
  }

  auto resolve_anchor = [&](const std::string& word) {
    auto it = rules.anchor_synonyms.find(word);
    if (it == rules.anchor_synonyms.end()) throw UnknownAnchorError("unrecognized anchor '" + word + "'");
    return it->second;
  };

  Instruction instr;
  instr.raw = std::string(raw);
  bool found = false;
  for (const auto& w : words) {
    for (const auto& [g, t] : rules.garments) {
      if (contains(t.keywords, w)) {
        instr.garment_class = g;
        instr.garment_noun = w;
        found = true;
        break;
      }
    }
    if (found) break;
  }
  if (!found) throw UnknownGarmentError("no garment keyword in '" + std::string(raw) + "'");

  // "<anchor>-length" or "<anchor> length"
  for (std::size_t i = 0; i < words.size(); ++i) {
    const auto& w = words[i];
    constexpr std::string_view suffix = "-length";
    if (w.size() > suffix.size() && w.ends_with(suffix)) {
      instr.length_anchor = resolve_anchor(w.substr(0, w.size() - suffix.size()));
    } else if (w == "length" && i > 0 && !instr.length_anchor) {
      instr.length_anchor = resolve_anchor(words[i - 1]);
    }
  }
  // "from [the] <anchor>"
  for (std::size_t i = 0; i + 1 < words.size(); ++i) {
    if (words[i] != "from") continue;
    std::size_t j = i + 1;
    if (words[j] == "the" && j + 1 < words.size()) ++j;
    instr.start_anchor = resolve_anchor(words[j]);
  }
  return instr;
}

TokenGroup expand_to_token_group(const Instruction& instr, const RuleTable& rules) {
  auto it = rules.garments.find(instr.garment_class);
  if (it == rules.garments.end()) throw UnknownGarmentError("no coverage template for garment class");
  const GarmentTemplate& t = it->second;

  TokenGroup group;
  group.include_arms = t.include_arms;
  group.include_legs = t.include_legs;
  group.start_anchor = t.start;
  if (instr.start_anchor) {
    if (!t.user_start) {
      throw InvalidRangeError(std::string(to_string(instr.garment_class)) + " always starts at " + t.start);
    }
    group.start_anchor = *instr.start_anchor;
  }
  group.end_anchor = instr.length_anchor.value_or(t.default_end);
  int lo = rules.rank(group.start_anchor);
  int hi = rules.rank(group.end_anchor);
  if (hi < lo) {
    throw InvalidRangeError("anchor " + group.end_anchor + " lies above start " + group.start_anchor);
  }

  auto covered = [&](const std::string& token) {
    if (rules.is_arm_token(token)) return group.include_arms;
    int r = rules.rank(token);
    return r >= lo && r <= hi;
  };
  for (const auto& s : t.stars) {
    if (covered(s)) group.star_tokens.push_back(s);
  }
  for (const auto& f : t.fleshy) {
    if (covered(f)) group.fleshy_tokens.push_back(f);
  }
  group.clothes_tokens.push_back(instr.garment_noun);
  return group;
}

}  // namespace posestar

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace posestar {

enum class GarmentClass { blouse_shirt, dress, pants_skirt };

std::string_view to_string(GarmentClass g);

struct GarmentTemplate {
  std::vector<std::string> keywords;
  std::string start;
  bool user_start = false;
  std::string default_end;
  bool include_arms = false;
  bool include_legs = false;
  std::vector<std::string> stars;
  std::vector<std::string> fleshy;
};

// Keyword tables and coverage templates driving the instruction parser.
// Loaded from JSON; see data/instruction_rules.json for the schema.
struct RuleTable {
  std::map<std::string, int> order;
  std::vector<std::string> star_tokens;
  std::vector<std::string> fleshy_tokens;
  std::vector<std::string> arm_tokens;
  std::map<GarmentClass, GarmentTemplate> garments;
  std::map<std::string, std::string> anchor_synonyms;

  int rank(std::string_view token) const;
  bool is_anchor(std::string_view token) const;
  bool is_arm_token(std::string_view token) const;
};

RuleTable parse_rule_table(std::string_view json_text);
RuleTable load_rule_table(const std::filesystem::path& path);
const RuleTable& default_rule_table();

struct Instruction {
  std::string raw;
  GarmentClass garment_class = GarmentClass::blouse_shirt;
  std::string garment_noun;
  std::optional<std::string> length_anchor;
  // Set by an optional "from <anchor>" clause.
  std::optional<std::string> start_anchor;
};

struct TokenGroup {
  std::vector<std::string> star_tokens;
  std::vector<std::string> fleshy_tokens;
  std::vector<std::string> clothes_tokens;
  std::string start_anchor;
  std::string end_anchor;
  bool include_arms = false;
  bool include_legs = false;

  friend bool operator==(const TokenGroup&, const TokenGroup&) = default;
};

Instruction parse_instruction(std::string_view raw, const RuleTable& rules = default_rule_table());
TokenGroup expand_to_token_group(const Instruction& instr, const RuleTable& rules = default_rule_table());

}  // namespace posestar

#include "subtext/script.hpp"

#include <unordered_map>

namespace subtext {

// Letter ranges cover the letters plus combining marks of each block; the
// block's digit row and punctuation (danda, currency signs) are kept out so
// that digits/punctuation stay script-neutral.
const std::vector<ScriptInfo>& supported_scripts() {
  static const std::vector<ScriptInfo> scripts = {
      {"devanagari",
       {{0x0900, 0x0963}, {0x0972, 0x097F}, {0x1CD0, 0x1CFF}, {0xA8E0, 0xA8FF}},
       {{0x0966, 0x096F}}},
      {"bengali", {{0x0980, 0x09E3}, {0x09F0, 0x09F1}}, {{0x09E6, 0x09EF}}},
      {"gurmukhi", {{0x0A01, 0x0A5E}, {0x0A70, 0x0A75}}, {{0x0A66, 0x0A6F}}},
      {"gujarati", {{0x0A81, 0x0AE3}, {0x0AF9, 0x0AFF}}, {{0x0AE6, 0x0AEF}}},
      {"oriya", {{0x0B01, 0x0B63}}, {{0x0B66, 0x0B6F}}},
      {"tamil", {{0x0B82, 0x0BD7}}, {{0x0BE6, 0x0BEF}}},
      {"kannada", {{0x0C80, 0x0CE3}, {0x0CF1, 0x0CF2}}, {{0x0CE6, 0x0CEF}}},
      {"malayalam", {{0x0D00, 0x0D63}, {0x0D7A, 0x0D7F}}, {{0x0D66, 0x0D6F}}},
      {"arabic",
       {{0x0620, 0x065F}, {0x066E, 0x06D3}, {0x06D5, 0x06DC}, {0x06E1, 0x06E8},
        {0x06FA, 0x06FF}, {0x0750, 0x077F}},
       {{0x0660, 0x0669}, {0x06F0, 0x06F9}}},
      {"latin",
       {{0x0041, 0x005A}, {0x0061, 0x007A}, {0x00C0, 0x00D6}, {0x00D8, 0x00F6},
        {0x00F8, 0x024F}},
       {}},
  };
  return scripts;
}

const ScriptInfo* script_for_language(std::string_view language_code) {
  static const std::unordered_map<std::string_view, std::string_view> map = {
      {"hi", "devanagari"}, {"mr", "devanagari"}, {"sa", "devanagari"},
      {"ne", "devanagari"}, {"bn", "bengali"},    {"pa", "gurmukhi"},
      {"gu", "gujarati"},   {"or", "oriya"},      {"ta", "tamil"},
      {"kn", "kannada"},    {"ml", "malayalam"},  {"ur", "arabic"},
      {"en", "latin"},
  };
  auto it = map.find(language_code);
  if (it == map.end()) return nullptr;
  for (const auto& s : supported_scripts()) {
    if (s.name == it->second) return &s;
  }
  return nullptr;
}

bool in_ranges(char32_t cp, const std::vector<ScriptRange>& ranges) {
  for (const auto& r : ranges) {
    if (cp >= r.lo && cp <= r.hi) return true;
  }
  return false;
}

const ScriptInfo* script_of_letter(char32_t cp) {
  for (const auto& s : supported_scripts()) {
    if (in_ranges(cp, s.letters)) return &s;
  }
  return nullptr;
}

bool is_letter(char32_t cp) { return script_of_letter(cp) != nullptr; }

bool is_digit_cp(char32_t cp) {
  if (cp >= U'0' && cp <= U'9') return true;
  for (const auto& s : supported_scripts()) {
    if (in_ranges(cp, s.digits)) return true;
  }
  return false;
}

}  // namespace subtext

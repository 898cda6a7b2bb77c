#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace subtext {

// Codepoint intervals, inclusive on both ends.
struct ScriptRange {
  char32_t lo;
  char32_t hi;
};

struct ScriptInfo {
  std::string name;
  std::vector<ScriptRange> letters;  // letters and combining marks
  std::vector<ScriptRange> digits;
};

const std::vector<ScriptInfo>& supported_scripts();

// Script a language code is written in ("hi" -> devanagari). nullptr for
// codes we do not know about.
const ScriptInfo* script_for_language(std::string_view language_code);

// Script whose letter ranges contain cp, nullptr if none.
const ScriptInfo* script_of_letter(char32_t cp);

bool is_letter(char32_t cp);

// ASCII digits or any script's digit row.
bool is_digit_cp(char32_t cp);

bool in_ranges(char32_t cp, const std::vector<ScriptRange>& ranges);

}  // namespace subtext

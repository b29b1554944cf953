#pragma once

#include "cadet/ast.hpp"
#include "cadet/result.hpp"

#include <string>
#include <string_view>

namespace cadet {

// Parses a PHP file into a normalized SourceUnit. Text outside <?php ... ?>
// becomes Html statements. Constructs beyond the supported subset (classes,
// closures, switch, try, ...) become Other nodes tagged with the construct
// name, with their bodies still parsed. Never throws; malformed input yields
// LexError, UnbalancedDelimiter or ParseError with a line number.
Result<SourceUnit> parse_source(std::string_view text, std::string path);

// Replaces invalid UTF-8 sequences with U+FFFD.
std::string sanitize_utf8(std::string_view text);

} // namespace cadet

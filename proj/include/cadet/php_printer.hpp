#pragma once

#include "cadet/ast.hpp"

#include <span>
#include <string>

namespace cadet {

// Renders statements back to PHP source, one statement per line (blocks
// span several lines). Binary operations are fully parenthesized, so
// parse_source of the output reproduces the same tree for the supported
// subset. Html statements print as an empty closing/opening tag pair.
std::string render_statements(const SourceUnit& unit, std::span<const NodeId> statements, int indent = 0);
std::string render_expression(const SourceUnit& unit, NodeId expr);

// Whole file including the opening tag.
std::string render_file(const SourceUnit& unit);

} // namespace cadet

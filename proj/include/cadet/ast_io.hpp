#pragma once

#include "cadet/ast.hpp"
#include "cadet/result.hpp"

#include <iosfwd>
#include <string>
#include <string_view>

namespace cadet {

// Newline-delimited "ast-v1" records: a header
//   {"format": "ast-v1", "path": ..., "root": id}
// then one record per node in pre-order
//   {"id", "kind", "children", "symbol"?, "value"?, "line": [start, end], "op"?}
// Other nodes are written with their original kind name; BinOp operators and
// compound-assignment operators travel in "op".
void export_ast(const SourceUnit& unit, std::ostream& out);
std::string export_ast(const SourceUnit& unit);

// Errors carry the zero-based index of the offending record (header = 0).
Result<SourceUnit> import_ast(std::istream& in);
Result<SourceUnit> import_ast(std::string_view text);

} // namespace cadet

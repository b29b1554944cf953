#pragma once

#include "cadet/result.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace cadet::detail {

enum class Tok {
    InlineHtml,
    OpenTagEcho,
    CloseTag,
    Variable,
    Ident,
    Number,
    String,     // constant string; text is the raw token
    Template,   // interpolated string; see parts
    Backtick,   // shell command; see parts
    Cast,       // text is the cast type, e.g. "int"
    Punct,
    End,
};

// One piece of an interpolated string: raw literal text, or the source of
// an embedded expression rewritten into standalone PHP ("$a['k']").
struct StrPart {
    bool is_expr = false;
    std::string text;
    int line = 1;
};

struct Token {
    Tok kind = Tok::End;
    std::string text;
    int line = 1;
    int end_line = 1;
    std::vector<StrPart> parts;

    bool is(std::string_view punct) const { return kind == Tok::Punct && text == punct; }
    bool is_word(std::string_view word) const;
};

// Lexes a whole file starting in HTML mode, or a bare expression when
// `php_mode` is set (used for expressions embedded in strings).
Result<std::vector<Token>> lex_php(std::string_view src, bool php_mode = false, int first_line = 1);

} // namespace cadet::detail

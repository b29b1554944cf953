#include "php_lexer.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>

namespace cadet::detail {

namespace {

bool ieq(std::string_view a, std::string_view b)
{
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
           });
}

bool ident_start(char c)
{
    auto u = static_cast<unsigned char>(c);
    return std::isalpha(u) || c == '_' || u >= 0x80;
}

bool ident_char(char c)
{
    return ident_start(c) || std::isdigit(static_cast<unsigned char>(c));
}

constexpr std::array<std::string_view, 44> kPuncts = {
    "<<=", ">>=", "**=", "...", "<=>", "===", "!==", "?\?=", "?->",
    "<<", ">>", "<=", ">=", "==", "!=", "<>", "&&", "||", "++", "--", "+=", "-=", "*=", "/=", ".=",
    "%=", "&=", "|=", "^=", "->", "=>", "::", "**", "??",
    "+", "-", "*", "/", "%", "=", ".", "<", ">", "!",
};

constexpr std::string_view kSingles = "&|^~?:;,()[]{}@$\\";

constexpr std::array<std::string_view, 12> kCasts = {
    "int", "integer", "bool", "boolean", "float", "double", "real", "string", "array", "object", "unset", "binary",
};

class Lexer {
public:
    Lexer(std::string_view src, int line) : src_(src), line_(line) {}

    Result<std::vector<Token>> run(bool php_mode)
    {
        if (!php_mode) {
            if (auto err = html())
                return *err;
        }
        while (pos_ < src_.size()) {
            if (auto err = php_token())
                return *err;
            if (in_html_) {
                if (auto err = html())
                    return *err;
            }
        }
        Token end;
        end.kind = Tok::End;
        end.line = end.end_line = line_;
        out_.push_back(std::move(end));
        return std::move(out_);
    }

private:
    std::string_view src_;
    std::size_t pos_ = 0;
    int line_;
    bool in_html_ = false;
    std::vector<Token> out_;

    char at(std::size_t off = 0) const { return pos_ + off < src_.size() ? src_[pos_ + off] : '\0'; }
    bool starts(std::string_view s) const { return src_.substr(pos_, s.size()) == s; }

    void advance(std::size_t n = 1)
    {
        for (std::size_t i = 0; i < n && pos_ < src_.size(); ++i, ++pos_) {
            if (src_[pos_] == '\n')
                ++line_;
        }
    }

    void emit(Tok kind, std::string text, int line)
    {
        Token t;
        t.kind = kind;
        t.text = std::move(text);
        t.line = line;
        t.end_line = line_;
        out_.push_back(std::move(t));
    }

    std::optional<Error> html()
    {
        in_html_ = false;
        const int start_line = line_;
        std::string text;
        while (pos_ < src_.size()) {
            if (at() == '<' && at(1) == '?') {
                if (ieq(src_.substr(pos_, 5), "<?php") && (pos_ + 5 >= src_.size() || std::isspace(static_cast<unsigned char>(at(5))))) {
                    flush_html(text, start_line);
                    advance(5);
                    return std::nullopt;
                }
                if (at(2) == '=') {
                    flush_html(text, start_line);
                    const int l = line_;
                    advance(3);
                    emit(Tok::OpenTagEcho, "<?=", l);
                    return std::nullopt;
                }
                if (std::isspace(static_cast<unsigned char>(at(2))) || pos_ + 2 >= src_.size()) {
                    flush_html(text, start_line);
                    advance(2);
                    return std::nullopt;
                }
            }
            text.push_back(at());
            advance();
        }
        flush_html(text, start_line);
        return std::nullopt;
    }

    void flush_html(std::string& text, int start_line)
    {
        if (text.empty())
            return;
        Token t;
        t.kind = Tok::InlineHtml;
        t.text = std::move(text);
        t.line = start_line;
        // A run ending in a newline belongs to the line before the tag.
        t.end_line = t.text.back() == '\n' ? std::max(start_line, line_ - 1) : line_;
        out_.push_back(std::move(t));
        text.clear();
    }

    std::optional<Error> php_token()
    {
        // whitespace and comments
        while (pos_ < src_.size()) {
            char c = at();
            if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else if (c == '#' && at(1) == '[') {
                if (auto err = skip_attribute())
                    return err;
            } else if (c == '#' || (c == '/' && at(1) == '/')) {
                while (pos_ < src_.size() && at() != '\n' && !(at() == '?' && at(1) == '>'))
                    advance();
            } else if (c == '/' && at(1) == '*') {
                const int l = line_;
                std::size_t end = src_.find("*/", pos_ + 2);
                if (end == std::string_view::npos)
                    return make_error(ErrorCode::LexError, "unterminated comment", l);
                advance(end + 2 - pos_);
            } else {
                break;
            }
        }
        if (pos_ >= src_.size())
            return std::nullopt;

        const int l = line_;
        const char c = at();
        if (c == '?' && at(1) == '>') {
            advance(2);
            if (at() == '\n')
                advance();
            else if (at() == '\r' && at(1) == '\n')
                advance(2);
            emit(Tok::CloseTag, "?>", l);
            in_html_ = true;
            return std::nullopt;
        }
        if (c == '$' && ident_start(at(1))) {
            std::size_t b = pos_;
            advance();
            while (ident_char(at()))
                advance();
            emit(Tok::Variable, std::string(src_.substr(b, pos_ - b)), l);
            return std::nullopt;
        }
        if (ident_start(c) || (c == '\\' && ident_start(at(1)))) {
            std::size_t b = pos_;
            while (ident_char(at()) || (at() == '\\' && ident_start(at(1))))
                advance();
            emit(Tok::Ident, std::string(src_.substr(b, pos_ - b)), l);
            return std::nullopt;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && std::isdigit(static_cast<unsigned char>(at(1))))) {
            lex_number();
            return std::nullopt;
        }
        if (c == '\'')
            return lex_single_quoted();
        if (c == '"')
            return lex_double_quoted();
        if (c == '`')
            return lex_backtick();
        if (c == '<' && starts("<<<"))
            return lex_heredoc();
        if (c == '(') {
            if (auto cast = try_cast()) {
                emit(Tok::Cast, *cast, l);
                return std::nullopt;
            }
        }
        for (std::string_view p : kPuncts) {
            if (starts(p)) {
                advance(p.size());
                emit(Tok::Punct, std::string(p), l);
                return std::nullopt;
            }
        }
        if (kSingles.find(c) != std::string_view::npos) {
            advance();
            emit(Tok::Punct, std::string(1, c), l);
            return std::nullopt;
        }
        return make_error(ErrorCode::LexError, std::string("unexpected character '") + c + "'", l);
    }

    std::optional<Error> skip_attribute()
    {
        const int l = line_;
        int depth = 0;
        advance(); // '#'
        while (pos_ < src_.size()) {
            char c = at();
            if (c == '[')
                ++depth;
            else if (c == ']' && --depth == 0) {
                advance();
                return std::nullopt;
            }
            advance();
        }
        return make_error(ErrorCode::UnbalancedDelimiter, "unterminated attribute", l);
    }

    std::optional<std::string> try_cast()
    {
        std::size_t p = pos_ + 1;
        while (p < src_.size() && (src_[p] == ' ' || src_[p] == '\t'))
            ++p;
        std::size_t b = p;
        while (p < src_.size() && std::isalpha(static_cast<unsigned char>(src_[p])))
            ++p;
        std::string_view word = src_.substr(b, p - b);
        while (p < src_.size() && (src_[p] == ' ' || src_[p] == '\t'))
            ++p;
        if (p >= src_.size() || src_[p] != ')')
            return std::nullopt;
        for (std::string_view cast : kCasts) {
            if (ieq(word, cast)) {
                std::string lower(word);
                std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char x) { return std::tolower(x); });
                advance(p + 1 - pos_);
                return lower;
            }
        }
        return std::nullopt;
    }

    void lex_number()
    {
        const int l = line_;
        std::size_t b = pos_;
        if (at() == '0' && (at(1) == 'x' || at(1) == 'X' || at(1) == 'b' || at(1) == 'B')) {
            advance(2);
            while (std::isxdigit(static_cast<unsigned char>(at())) || at() == '_')
                advance();
        } else {
            while (std::isdigit(static_cast<unsigned char>(at())) || at() == '_')
                advance();
            if (at() == '.' && std::isdigit(static_cast<unsigned char>(at(1)))) {
                advance();
                while (std::isdigit(static_cast<unsigned char>(at())) || at() == '_')
                    advance();
            } else if (at() == '.' && !(at(1) == '.' || at(1) == '=')) {
                advance();
            }
            if ((at() == 'e' || at() == 'E') &&
                (std::isdigit(static_cast<unsigned char>(at(1))) ||
                 ((at(1) == '+' || at(1) == '-') && std::isdigit(static_cast<unsigned char>(at(2)))))) {
                advance(2);
                while (std::isdigit(static_cast<unsigned char>(at())))
                    advance();
            }
        }
        emit(Tok::Number, std::string(src_.substr(b, pos_ - b)), l);
    }

    std::optional<Error> lex_single_quoted()
    {
        const int l = line_;
        std::size_t b = pos_;
        advance();
        while (pos_ < src_.size() && at() != '\'') {
            if (at() == '\\')
                advance();
            advance();
        }
        if (pos_ >= src_.size())
            return make_error(ErrorCode::LexError, "unterminated string literal", l);
        advance();
        emit(Tok::String, std::string(src_.substr(b, pos_ - b)), l);
        return std::nullopt;
    }

    // Reads interpolated content up to `terminator` (a quote character), or
    // to the end of `body` when lexing heredoc text.
    std::optional<Error> interpolate(std::string_view body, int body_line, char terminator, std::size_t& consumed,
                                     std::vector<StrPart>& parts)
    {
        std::size_t p = 0;
        int line = body_line;
        std::string lit;
        int lit_line = line;
        auto flush = [&]() {
            if (!lit.empty())
                parts.push_back(StrPart{false, std::move(lit), lit_line});
            lit.clear();
        };
        auto take = [&](std::size_t n) {
            for (std::size_t i = 0; i < n && p < body.size(); ++i, ++p) {
                if (body[p] == '\n')
                    ++line;
            }
        };
        while (p < body.size()) {
            char c = body[p];
            if (terminator && c == terminator) {
                flush();
                consumed = p + 1;
                return std::nullopt;
            }
            if (c == '\\' && p + 1 < body.size()) {
                if (lit.empty())
                    lit_line = line;
                lit.append(body.substr(p, 2));
                take(2);
                continue;
            }
            if (c == '$' && p + 1 < body.size() && ident_start(body[p + 1])) {
                flush();
                const int expr_line = line;
                std::size_t b = p;
                take(1);
                while (p < body.size() && ident_char(body[p]))
                    take(1);
                std::string expr(body.substr(b, p - b));
                if (p < body.size() && body[p] == '[') {
                    std::size_t close = body.find(']', p);
                    if (close != std::string_view::npos) {
                        std::string_view idx = body.substr(p + 1, close - p - 1);
                        if (!idx.empty() && ident_start(idx[0]) &&
                            std::all_of(idx.begin(), idx.end(), ident_char))
                            expr += "['" + std::string(idx) + "']";
                        else
                            expr += "[" + std::string(idx) + "]";
                        take(close + 1 - p);
                    }
                } else if (body.substr(p, 2) == "->" && p + 2 < body.size() && ident_start(body[p + 2])) {
                    std::size_t b2 = p;
                    take(2);
                    while (p < body.size() && ident_char(body[p]))
                        take(1);
                    expr += std::string(body.substr(b2, p - b2));
                }
                parts.push_back(StrPart{true, std::move(expr), expr_line});
                continue;
            }
            if ((c == '{' && p + 1 < body.size() && body[p + 1] == '$') ||
                (c == '$' && p + 1 < body.size() && body[p + 1] == '{')) {
                flush();
                const int expr_line = line;
                const bool dollar_brace = c == '$';
                take(2);
                std::size_t b = p;
                int depth = 1;
                while (p < body.size() && depth > 0) {
                    if (body[p] == '{')
                        ++depth;
                    else if (body[p] == '}')
                        --depth;
                    if (depth > 0)
                        take(1);
                }
                if (p >= body.size())
                    return make_error(ErrorCode::UnbalancedDelimiter, "unterminated interpolation", expr_line);
                std::string inner(body.substr(b, p - b));
                take(1);
                if (dollar_brace)
                    inner = "${" + inner + "}";
                else
                    inner = "$" + inner;
                parts.push_back(StrPart{true, std::move(inner), expr_line});
                continue;
            }
            if (lit.empty())
                lit_line = line;
            lit.push_back(c);
            take(1);
        }
        if (terminator)
            return make_error(ErrorCode::LexError, "unterminated string literal", body_line);
        flush();
        consumed = p;
        return std::nullopt;
    }

    std::optional<Error> lex_quoted_template(char quote, Tok kind)
    {
        const int l = line_;
        std::size_t b = pos_;
        std::vector<StrPart> parts;
        std::size_t consumed = 0;
        if (auto err = interpolate(src_.substr(pos_ + 1), line_, quote, consumed, parts))
            return err;
        advance(consumed + 1);
        const bool has_expr = std::any_of(parts.begin(), parts.end(), [](const StrPart& p) { return p.is_expr; });
        Token t;
        t.kind = (kind == Tok::Template && !has_expr) ? Tok::String : kind;
        t.text = std::string(src_.substr(b, pos_ - b));
        t.line = l;
        t.end_line = line_;
        t.parts = std::move(parts);
        out_.push_back(std::move(t));
        return std::nullopt;
    }

    std::optional<Error> lex_double_quoted() { return lex_quoted_template('"', Tok::Template); }
    std::optional<Error> lex_backtick() { return lex_quoted_template('`', Tok::Backtick); }

    std::optional<Error> lex_heredoc()
    {
        const int l = line_;
        std::size_t b = pos_;
        std::size_t p = pos_ + 3;
        while (p < src_.size() && (src_[p] == ' ' || src_[p] == '\t'))
            ++p;
        bool nowdoc = false;
        char q = '\0';
        if (p < src_.size() && (src_[p] == '\'' || src_[p] == '"')) {
            q = src_[p];
            nowdoc = q == '\'';
            ++p;
        }
        std::size_t id_b = p;
        while (p < src_.size() && ident_char(src_[p]))
            ++p;
        std::string id(src_.substr(id_b, p - id_b));
        if (id.empty())
            return make_error(ErrorCode::LexError, "malformed heredoc label", l);
        if (q) {
            if (p >= src_.size() || src_[p] != q)
                return make_error(ErrorCode::LexError, "malformed heredoc label", l);
            ++p;
        }
        std::size_t nl = src_.find('\n', p);
        if (nl == std::string_view::npos)
            return make_error(ErrorCode::LexError, "unterminated heredoc", l);
        std::size_t body_b = nl + 1;
        // Closing label: first line whose trimmed start is the label followed by a non-identifier char.
        std::size_t line_b = body_b;
        std::size_t body_e = std::string_view::npos;
        std::size_t close_e = 0;
        while (line_b <= src_.size()) {
            std::size_t s = line_b;
            while (s < src_.size() && (src_[s] == ' ' || src_[s] == '\t'))
                ++s;
            if (src_.substr(s, id.size()) == id && (s + id.size() >= src_.size() || !ident_char(src_[s + id.size()]))) {
                body_e = line_b;
                close_e = s + id.size();
                break;
            }
            std::size_t next = src_.find('\n', line_b);
            if (next == std::string_view::npos)
                break;
            line_b = next + 1;
        }
        if (body_e == std::string_view::npos)
            return make_error(ErrorCode::LexError, "unterminated heredoc", l);
        std::string_view body = src_.substr(body_b, body_e > body_b ? body_e - body_b - 1 : 0);
        std::vector<StrPart> parts;
        if (!nowdoc) {
            std::size_t consumed = 0;
            if (auto err = interpolate(body, l + 1, '\0', consumed, parts))
                return err;
        }
        advance(close_e - pos_);
        const bool has_expr = std::any_of(parts.begin(), parts.end(), [](const StrPart& x) { return x.is_expr; });
        Token t;
        t.kind = has_expr ? Tok::Template : Tok::String;
        t.text = std::string(src_.substr(b, pos_ - b));
        t.line = l;
        t.end_line = line_;
        t.parts = std::move(parts);
        out_.push_back(std::move(t));
        return std::nullopt;
    }
};

} // namespace

bool Token::is_word(std::string_view word) const
{
    return kind == Tok::Ident && ieq(text, word);
}

Result<std::vector<Token>> lex_php(std::string_view src, bool php_mode, int first_line)
{
    Lexer lexer(src, first_line);
    return lexer.run(php_mode);
}

} // namespace cadet::detail

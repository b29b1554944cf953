#include "cadet/php_parser.hpp"

#include "php_lexer.hpp"

#include <algorithm>
#include <cctype>
#include <initializer_list>
#include <optional>

namespace cadet {

namespace {

using detail::StrPart;
using detail::Tok;
using detail::Token;

// Thrown internally to unwind out of deep recursion; converted to an Error
// at the parse_source boundary.
struct ParseFailure {
    Error error;
};

constexpr int kAssignBp = 4;

struct BinaryOp {
    int bp;
    bool right_assoc;
};

std::optional<BinaryOp> binary_op(const Token& t)
{
    if (t.kind == Tok::Ident) {
        if (t.is_word("or"))
            return BinaryOp{1, false};
        if (t.is_word("xor"))
            return BinaryOp{2, false};
        if (t.is_word("and"))
            return BinaryOp{3, false};
        if (t.is_word("instanceof"))
            return BinaryOp{18, false};
        return std::nullopt;
    }
    if (t.kind != Tok::Punct)
        return std::nullopt;
    const std::string& s = t.text;
    if (s == "??")
        return BinaryOp{6, true};
    if (s == "||")
        return BinaryOp{7, false};
    if (s == "&&")
        return BinaryOp{8, false};
    if (s == "|")
        return BinaryOp{9, false};
    if (s == "^")
        return BinaryOp{10, false};
    if (s == "&")
        return BinaryOp{11, false};
    if (s == "==" || s == "!=" || s == "===" || s == "!==" || s == "<>" || s == "<=>")
        return BinaryOp{12, false};
    if (s == "<" || s == "<=" || s == ">" || s == ">=")
        return BinaryOp{13, false};
    if (s == "<<" || s == ">>")
        return BinaryOp{15, false};
    if (s == "+" || s == "-" || s == ".")
        return BinaryOp{16, false};
    if (s == "*" || s == "/" || s == "%")
        return BinaryOp{17, false};
    if (s == "**")
        return BinaryOp{20, true};
    return std::nullopt;
}

bool is_assign_op(const Token& t)
{
    if (t.kind != Tok::Punct)
        return false;
    static constexpr std::string_view ops[] = {"=", "+=", "-=", "*=", "/=", ".=", "%=", "**=", "&=", "|=", "^=", "<<=", ">>=", "?\?="};
    return std::find(std::begin(ops), std::end(ops), t.text) != std::end(ops);
}

std::string lower(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

class Parser {
public:
    Parser(std::vector<Token> tokens, TreeBuilder& builder) : toks_(std::move(tokens)), b_(builder) {}

    NodeId parse_file()
    {
        const int first = toks_.front().line;
        std::vector<NodeId> stmts = statements_until({});
        NodeId root = b_.add(NodeKind::StmtList, std::move(stmts), first, first);
        return root;
    }

    NodeId parse_embedded_expression()
    {
        NodeId e = expr();
        if (peek().kind != Tok::End)
            fail("unexpected token in interpolated expression");
        return e;
    }

private:
    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    TreeBuilder& b_;
    bool halted_ = false;

    const Token& peek(std::size_t off = 0) const
    {
        std::size_t i = std::min(pos_ + off, toks_.size() - 1);
        return toks_[i];
    }
    const Token& prev() const { return toks_[pos_ == 0 ? 0 : pos_ - 1]; }
    const Token& next()
    {
        const Token& t = toks_[pos_];
        if (pos_ + 1 < toks_.size())
            ++pos_;
        return t;
    }
    bool at_end() const { return peek().kind == Tok::End; }

    bool accept(std::string_view punct)
    {
        if (peek().is(punct)) {
            next();
            return true;
        }
        return false;
    }
    bool accept_word(std::string_view word)
    {
        if (peek().is_word(word)) {
            next();
            return true;
        }
        return false;
    }

    [[noreturn]] void fail(const std::string& msg) const
    {
        throw ParseFailure{make_error(ErrorCode::ParseError, msg + " near '" + peek().text + "'", peek().line)};
    }

    void expect(std::string_view punct)
    {
        if (accept(punct))
            return;
        if (at_end() && (punct == ")" || punct == "]" || punct == "}"))
            throw ParseFailure{make_error(ErrorCode::UnbalancedDelimiter, "missing '" + std::string(punct) + "' before end of input",
                                          peek().line)};
        fail("expected '" + std::string(punct) + "'");
    }

    // statement terminator: ';', a closing tag, or end of input
    void end_statement()
    {
        if (accept(";"))
            return;
        if (peek().kind == Tok::CloseTag || peek().kind == Tok::End)
            return;
        fail("expected ';'");
    }

    NodeId node(NodeKind kind, std::vector<NodeId> children, int line_start, std::string tag = {})
    {
        NodeId id = b_.add(kind, std::move(children), line_start, std::max(line_start, prev().end_line));
        b_.at(id).tag = std::move(tag);
        return id;
    }
    NodeId other(std::string tag, std::vector<NodeId> children, int line_start)
    {
        return node(NodeKind::Other, std::move(children), line_start, std::move(tag));
    }
    NodeId leaf(NodeKind kind, std::string text, int line, int end_line)
    {
        NodeId id = b_.add(kind, {}, line, end_line);
        if (kind == NodeKind::Literal)
            b_.at(id).value = std::move(text);
        else
            b_.at(id).symbol = std::move(text);
        return id;
    }
    NodeId name_leaf(const Token& t) { return leaf(NodeKind::Name, t.text, t.line, t.end_line); }

    // ---- statements ----------------------------------------------------

    std::vector<NodeId> statements_until(std::initializer_list<std::string_view> enders)
    {
        std::vector<NodeId> out;
        while (!at_end() && !halted_) {
            const Token& t = peek();
            if (t.is("}") && std::find(enders.begin(), enders.end(), "}") != enders.end())
                break;
            bool stop = false;
            for (std::string_view e : enders) {
                if (e != "}" && t.is_word(e))
                    stop = true;
            }
            if (stop)
                break;
            if (t.is("}"))
                throw ParseFailure{make_error(ErrorCode::UnbalancedDelimiter, "unmatched '}'", t.line)};
            if (auto s = statement())
                out.push_back(*s);
        }
        return out;
    }

    NodeId block_body(std::initializer_list<std::string_view> alt_enders)
    {
        const int l = peek().line;
        if (accept("{")) {
            auto stmts = statements_until({"}"});
            expect("}");
            return node(NodeKind::StmtList, std::move(stmts), l);
        }
        if (accept(":")) {
            auto stmts = statements_until(alt_enders);
            return node(NodeKind::StmtList, std::move(stmts), l);
        }
        std::vector<NodeId> one;
        if (auto s = statement())
            one.push_back(*s);
        return node(NodeKind::StmtList, std::move(one), l);
    }

    NodeId paren_expr()
    {
        expect("(");
        NodeId e = expr();
        expect(")");
        return e;
    }

    std::optional<NodeId> statement()
    {
        const Token& t = peek();
        const int l = t.line;
        switch (t.kind) {
        case Tok::InlineHtml: {
            const Token& h = next();
            return b_.add(NodeKind::Html, {}, h.line, h.end_line);
        }
        case Tok::CloseTag:
            next();
            return std::nullopt;
        case Tok::OpenTagEcho: {
            next();
            std::vector<NodeId> args{expr()};
            while (accept(","))
                args.push_back(expr());
            end_statement();
            return node(NodeKind::Echo, std::move(args), l);
        }
        case Tok::Punct:
            if (t.is(";")) {
                next();
                return std::nullopt;
            }
            if (t.is("{")) {
                next();
                auto stmts = statements_until({"}"});
                expect("}");
                return node(NodeKind::StmtList, std::move(stmts), l);
            }
            break;
        case Tok::Ident:
            if (auto s = keyword_statement())
                return s;
            if (halted_)
                return std::nullopt;
            break;
        default:
            break;
        }
        NodeId e = expr();
        end_statement();
        return e;
    }

    // Returns nullopt without consuming when `peek()` is not a statement keyword.
    std::optional<NodeId> keyword_statement()
    {
        const Token& t = peek();
        const int l = t.line;
        const std::string w = lower(t.text);
        if (peek(1).is(":") && !peek(1).is("::") && w != "else" && w != "default" && !is_reserved(w)) {
            // goto label
            next();
            next();
            return other("Label", {name_leaf(toks_[pos_ - 2])}, l);
        }
        if (w == "if") {
            next();
            return if_statement(l);
        }
        if (w == "while") {
            next();
            NodeId cond = paren_expr();
            NodeId body = block_body({"endwhile"});
            if (accept_word("endwhile"))
                end_statement();
            return node(NodeKind::While, {cond, body}, l);
        }
        if (w == "do") {
            next();
            NodeId body = block_body({});
            if (!accept_word("while"))
                fail("expected 'while' after do-block");
            NodeId cond = paren_expr();
            end_statement();
            return other("DoWhile", {body, cond}, l);
        }
        if (w == "for") {
            next();
            return for_statement(l);
        }
        if (w == "foreach") {
            next();
            return foreach_statement(l);
        }
        if (w == "switch") {
            next();
            return switch_statement(l);
        }
        if (w == "echo") {
            next();
            std::vector<NodeId> args{expr()};
            while (accept(","))
                args.push_back(expr());
            end_statement();
            return node(NodeKind::Echo, std::move(args), l);
        }
        if (w == "return") {
            next();
            std::vector<NodeId> ch;
            if (!peek().is(";") && peek().kind != Tok::CloseTag && !at_end())
                ch.push_back(expr());
            end_statement();
            return node(NodeKind::Return, std::move(ch), l);
        }
        if (w == "break" || w == "continue") {
            next();
            std::vector<NodeId> ch;
            if (peek().kind == Tok::Number)
                ch.push_back(primary());
            end_statement();
            return other(w == "break" ? "Break" : "Continue", std::move(ch), l);
        }
        if (w == "global") {
            next();
            std::vector<NodeId> vars{expr()};
            while (accept(","))
                vars.push_back(expr());
            end_statement();
            return other("Global", std::move(vars), l);
        }
        if (w == "static" && peek(1).kind == Tok::Variable) {
            next();
            std::vector<NodeId> vars{expr()};
            while (accept(","))
                vars.push_back(expr());
            end_statement();
            return other("StaticVar", std::move(vars), l);
        }
        if (w == "unset" && peek(1).is("(")) {
            NodeId e = expr();
            end_statement();
            return e;
        }
        if (w == "function" && (peek(1).kind == Tok::Ident || (peek(1).is("&") && peek(2).kind == Tok::Ident))) {
            next();
            return function_decl(l);
        }
        if (w == "abstract" || w == "final" || w == "class" || w == "interface" || w == "trait" ||
            (w == "readonly" && peek(1).kind == Tok::Ident) || (w == "enum" && peek(1).kind == Tok::Ident)) {
            return class_decl(l);
        }
        if (w == "try") {
            next();
            return try_statement(l);
        }
        if (w == "throw") {
            next();
            NodeId e = expr();
            end_statement();
            return other("Throw", {e}, l);
        }
        if (w == "namespace" && !peek(1).is("\\")) {
            next();
            std::vector<NodeId> ch;
            if (peek().kind == Tok::Ident)
                ch.push_back(name_leaf(next()));
            if (peek().is("{")) {
                next();
                auto stmts = statements_until({"}"});
                expect("}");
                ch.push_back(node(NodeKind::StmtList, std::move(stmts), l));
            } else {
                end_statement();
            }
            return other("Namespace", std::move(ch), l);
        }
        if (w == "use") {
            next();
            skip_to_statement_end();
            return other("UseDecl", {}, l);
        }
        if (w == "const") {
            next();
            skip_to_statement_end();
            return other("Const", {}, l);
        }
        if (w == "declare") {
            next();
            skip_balanced("(", ")");
            if (peek().is("{")) {
                NodeId body = block_body({});
                return other("Declare", {body}, l);
            }
            end_statement();
            return other("Declare", {}, l);
        }
        if (w == "goto") {
            next();
            skip_to_statement_end();
            return other("Goto", {}, l);
        }
        if (w == "__halt_compiler") {
            halted_ = true;
            pos_ = toks_.size() - 1;
            return std::nullopt;
        }
        return std::nullopt;
    }

    static bool is_reserved(const std::string& w)
    {
        static constexpr std::string_view words[] = {"case", "default", "else", "endif", "endwhile", "endfor", "endforeach", "endswitch"};
        return std::find(std::begin(words), std::end(words), w) != std::end(words);
    }

    void skip_to_statement_end()
    {
        int depth = 0;
        while (!at_end()) {
            const Token& t = peek();
            if (depth == 0 && (t.is(";") || t.kind == Tok::CloseTag)) {
                end_statement();
                return;
            }
            if (t.is("{") || t.is("(") || t.is("["))
                ++depth;
            else if (t.is("}") || t.is(")") || t.is("]")) {
                if (depth == 0)
                    return;
                --depth;
                if (depth == 0 && t.is("}")) {
                    next();
                    return;
                }
            }
            next();
        }
    }

    void skip_balanced(std::string_view open, std::string_view close)
    {
        const int l = peek().line;
        expect(open);
        int depth = 1;
        while (depth > 0) {
            if (at_end())
                throw ParseFailure{make_error(ErrorCode::UnbalancedDelimiter, "missing '" + std::string(close) + "'", l)};
            const Token& t = next();
            if (t.is(open))
                ++depth;
            else if (t.is(close))
                --depth;
        }
    }

    NodeId if_statement(int l, bool chained = false)
    {
        NodeId cond = paren_expr();
        const bool alt = peek().is(":");
        NodeId then_body = block_body({"elseif", "else", "endif"});
        std::vector<NodeId> ch{cond, then_body};
        if (peek().is_word("elseif") || (peek().is_word("else") && peek(1).is_word("if") && !alt)) {
            const int el = peek().line;
            if (!accept_word("elseif")) {
                next();
                next();
            }
            ch.push_back(if_statement(el, alt));
        } else if (accept_word("else")) {
            ch.push_back(block_body({"endif"}));
        }
        if (alt && !chained) {
            if (!accept_word("endif"))
                fail("expected 'endif'");
            end_statement();
        }
        return node(NodeKind::If, std::move(ch), l);
    }

    NodeId for_statement(int l)
    {
        expect("(");
        std::vector<NodeId> sections;
        for (int i = 0; i < 3; ++i) {
            const int sl = peek().line;
            std::vector<NodeId> exprs;
            const std::string_view close = i < 2 ? ";" : ")";
            if (!peek().is(close)) {
                exprs.push_back(expr());
                while (accept(","))
                    exprs.push_back(expr());
            }
            expect(close);
            static constexpr const char* names[] = {"ForInit", "ForCond", "ForStep"};
            sections.push_back(other(names[i], std::move(exprs), sl));
        }
        sections.push_back(block_body({"endfor"}));
        if (accept_word("endfor"))
            end_statement();
        return other("For", std::move(sections), l);
    }

    NodeId foreach_statement(int l)
    {
        expect("(");
        std::vector<NodeId> ch{expr()};
        if (!accept_word("as"))
            fail("expected 'as' in foreach");
        accept("&");
        NodeId first = expr();
        ch.push_back(first);
        if (accept("=>")) {
            accept("&");
            ch.push_back(expr());
        }
        expect(")");
        ch.push_back(block_body({"endforeach"}));
        if (accept_word("endforeach"))
            end_statement();
        return node(NodeKind::Foreach, std::move(ch), l);
    }

    NodeId switch_statement(int l)
    {
        std::vector<NodeId> ch{paren_expr()};
        const bool alt = peek().is(":");
        if (!alt)
            expect("{");
        else
            next();
        while (!at_end()) {
            if (!alt && peek().is("}"))
                break;
            if (alt && peek().is_word("endswitch"))
                break;
            const int cl = peek().line;
            if (accept_word("case")) {
                NodeId label = expr();
                if (!accept(":"))
                    expect(";");
                auto body = statements_until({"case", "default", "}", "endswitch"});
                NodeId list = node(NodeKind::StmtList, std::move(body), cl);
                ch.push_back(other("Case", {label, list}, cl));
            } else if (accept_word("default")) {
                if (!accept(":"))
                    expect(";");
                auto body = statements_until({"case", "default", "}", "endswitch"});
                NodeId list = node(NodeKind::StmtList, std::move(body), cl);
                ch.push_back(other("Default", {list}, cl));
            } else if (peek().kind == Tok::CloseTag || peek().kind == Tok::InlineHtml || peek().is(";")) {
                next();
            } else {
                fail("expected 'case' or 'default'");
            }
        }
        if (alt) {
            if (!accept_word("endswitch"))
                fail("expected 'endswitch'");
            end_statement();
        } else {
            expect("}");
        }
        return other("Switch", std::move(ch), l);
    }

    NodeId params()
    {
        const int l = peek().line;
        expect("(");
        std::vector<NodeId> ps;
        while (!peek().is(")")) {
            if (at_end())
                throw ParseFailure{make_error(ErrorCode::UnbalancedDelimiter, "missing ')' in parameter list", l)};
            // skip modifiers, type hints, by-ref and variadic markers
            while (peek().kind != Tok::Variable && !peek().is(")") && !peek().is(",") && !at_end())
                next();
            if (peek().kind == Tok::Variable) {
                const int pl = peek().line;
                const Token& v = next();
                NodeId var = leaf(NodeKind::Var, v.text, v.line, v.end_line);
                if (accept("="))
                    ps.push_back(other("Param", {var, expr()}, pl));
                else
                    ps.push_back(var);
            }
            if (!accept(","))
                break;
        }
        expect(")");
        return other("Params", std::move(ps), l);
    }

    void skip_return_type()
    {
        if (!accept(":"))
            return;
        while (!at_end() && !peek().is("{") && !peek().is(";") && !peek().is("=>"))
            next();
    }

    NodeId function_decl(int l)
    {
        accept("&");
        NodeId name = name_leaf(next());
        NodeId ps = params();
        skip_return_type();
        const int bl = peek().line;
        NodeId body;
        if (peek().is("{")) {
            body = block_body({});
        } else {
            end_statement();
            body = node(NodeKind::StmtList, {}, bl);
        }
        return other("FunctionDecl", {name, ps, body}, l);
    }

    NodeId class_decl(int l)
    {
        std::string kind = "ClassDecl";
        while (peek().kind == Tok::Ident) {
            const std::string w = lower(peek().text);
            next();
            if (w == "interface")
                kind = "InterfaceDecl";
            else if (w == "trait")
                kind = "TraitDecl";
            else if (w == "enum")
                kind = "EnumDecl";
            if (w == "class" || w == "interface" || w == "trait" || w == "enum")
                break;
        }
        std::vector<NodeId> ch;
        if (peek().kind == Tok::Ident)
            ch.push_back(name_leaf(next()));
        while (!at_end() && !peek().is("{"))
            next();
        ch.push_back(class_body());
        return other(kind, std::move(ch), l);
    }

    NodeId class_body()
    {
        const int l = peek().line;
        expect("{");
        std::vector<NodeId> members;
        while (!peek().is("}")) {
            if (at_end())
                throw ParseFailure{make_error(ErrorCode::UnbalancedDelimiter, "missing '}' after class body", l)};
            const int ml = peek().line;
            while (peek().kind == Tok::Ident) {
                const std::string w = lower(peek().text);
                if (w == "public" || w == "private" || w == "protected" || w == "static" || w == "abstract" || w == "final" ||
                    w == "var" || w == "readonly")
                    next();
                else
                    break;
            }
            if (accept_word("function")) {
                members.push_back(function_decl(ml));
            } else if (accept_word("const")) {
                skip_to_statement_end();
                members.push_back(other("ClassConst", {}, ml));
            } else if (accept_word("use")) {
                skip_to_statement_end();
                members.push_back(other("TraitUse", {}, ml));
            } else if (accept_word("case")) {
                skip_to_statement_end();
                members.push_back(other("EnumCase", {}, ml));
            } else if (accept(";")) {
                continue;
            } else {
                // property declaration: optional type, then $a [= expr] {, $b [= expr]}
                while (peek().kind != Tok::Variable && !peek().is(";") && !peek().is("}") && !at_end())
                    next();
                std::vector<NodeId> props;
                while (peek().kind == Tok::Variable) {
                    const Token& v = next();
                    NodeId var = leaf(NodeKind::Var, v.text, v.line, v.end_line);
                    if (accept("="))
                        props.push_back(other("PropertyDefault", {var, expr()}, v.line));
                    else
                        props.push_back(var);
                    if (!accept(","))
                        break;
                }
                if (props.empty() && !peek().is("}"))
                    fail("unrecognized class member");
                end_statement();
                if (!props.empty())
                    members.push_back(other("Property", std::move(props), ml));
            }
        }
        expect("}");
        return node(NodeKind::StmtList, std::move(members), l);
    }

    NodeId try_statement(int l)
    {
        std::vector<NodeId> ch{block_body({})};
        while (peek().is_word("catch")) {
            const int cl = peek().line;
            next();
            expect("(");
            std::vector<NodeId> cc;
            while (!peek().is(")") && !at_end()) {
                if (peek().kind == Tok::Ident)
                    cc.push_back(name_leaf(next()));
                else if (peek().kind == Tok::Variable) {
                    const Token& v = next();
                    cc.push_back(leaf(NodeKind::Var, v.text, v.line, v.end_line));
                } else
                    next();
            }
            expect(")");
            cc.push_back(block_body({}));
            ch.push_back(other("Catch", std::move(cc), cl));
        }
        if (peek().is_word("finally")) {
            const int fl = peek().line;
            next();
            ch.push_back(other("Finally", {block_body({})}, fl));
        }
        return other("Try", std::move(ch), l);
    }

    // ---- expressions ---------------------------------------------------

    NodeId expr(int min_bp = 0)
    {
        const int l = peek().line;
        NodeId left = unary();
        while (true) {
            const Token& t = peek();
            if (t.is("?")) {
                if (min_bp > 5)
                    break;
                next();
                if (accept(":")) {
                    NodeId alt = expr(6);
                    left = other("ShortTernary", {left, alt}, l);
                } else {
                    NodeId then_e = expr(kAssignBp);
                    expect(":");
                    NodeId else_e = expr(6);
                    left = other("Ternary", {left, then_e, else_e}, l);
                }
                continue;
            }
            auto op = binary_op(t);
            if (!op || op->bp < min_bp)
                break;
            const std::string op_text = t.kind == Tok::Ident ? lower(t.text) : t.text;
            next();
            NodeId right = expr(op->right_assoc ? op->bp : op->bp + 1);
            left = node(NodeKind::BinOp, {left, right}, l, op_text);
        }
        return left;
    }

    NodeId unary()
    {
        const Token& t = peek();
        const int l = t.line;
        if (t.kind == Tok::Punct) {
            if (t.is("!")) {
                next();
                return other("Not", {expr(19)}, l);
            }
            if (t.is("-") || t.is("+") || t.is("~")) {
                const std::string tag = t.is("-") ? "Neg" : t.is("+") ? "Plus" : "BitNot";
                next();
                return other(tag, {expr(20)}, l);
            }
            if (t.is("@")) {
                next();
                return other("Silence", {expr(20)}, l);
            }
            if (t.is("&")) {
                next();
                return unary();
            }
            if (t.is("++") || t.is("--")) {
                const std::string tag = t.is("++") ? "PreInc" : "PreDec";
                next();
                return other(tag, {unary()}, l);
            }
            if (t.is("...")) {
                next();
                return other("Spread", {expr(kAssignBp)}, l);
            }
        }
        if (t.kind == Tok::Cast) {
            std::string tag = "Cast(" + t.text + ")";
            next();
            return other(std::move(tag), {expr(20)}, l);
        }
        if (t.kind == Tok::Ident) {
            const std::string w = lower(t.text);
            if (w == "new") {
                next();
                return new_expr(l);
            }
            if (w == "clone") {
                next();
                return other("Clone", {expr(20)}, l);
            }
            if (w == "print") {
                next();
                return other("Print", {expr(kAssignBp + 1)}, l);
            }
            if (w == "include" || w == "include_once" || w == "require" || w == "require_once") {
                next();
                return other("Include(" + w + ")", {expr(kAssignBp + 1)}, l);
            }
            if (w == "yield") {
                next();
                std::vector<NodeId> ch;
                if (!peek().is(";") && !peek().is(")") && !peek().is(",") && !peek().is("]"))
                    ch.push_back(expr(kAssignBp + 1));
                return other("Yield", std::move(ch), l);
            }
            if (w == "throw") {
                next();
                return other("Throw", {expr(kAssignBp)}, l);
            }
        }
        return postfix(primary());
    }

    NodeId new_expr(int l)
    {
        std::vector<NodeId> ch;
        if (peek().is_word("class")) {
            next();
            ch.push_back(peek().is("(") ? arg_list() : node(NodeKind::ArgList, {}, l));
            while (!at_end() && !peek().is("{"))
                next();
            ch.push_back(class_body());
            return other("NewAnonymousClass", std::move(ch), l);
        }
        if (peek().kind == Tok::Ident) {
            ch.push_back(name_leaf(next()));
        } else if (peek().kind == Tok::Variable) {
            const Token& v = next();
            NodeId base = leaf(NodeKind::Var, v.text, v.line, v.end_line);
            // new $this->cls / new $a['k'] without calling
            while (peek().is("->") || peek().is("[") || peek().is("::")) {
                if (accept("[")) {
                    NodeId idx = expr();
                    expect("]");
                    base = node(NodeKind::ArrayDim, {base, idx}, l);
                } else {
                    const bool is_static = peek().is("::");
                    next();
                    NodeId member = peek().kind == Tok::Variable ? leaf(NodeKind::Var, peek().text, peek().line, peek().end_line)
                                                                 : name_leaf(peek());
                    next();
                    base = other(is_static ? "StaticProp" : "PropertyFetch", {base, member}, l);
                }
            }
            ch.push_back(base);
        } else if (peek().is("(")) {
            ch.push_back(paren_expr());
        } else {
            fail("expected class name after 'new'");
        }
        ch.push_back(peek().is("(") ? arg_list() : node(NodeKind::ArgList, {}, l));
        return postfix(other("New", std::move(ch), l));
    }

    NodeId arg_list()
    {
        const int l = peek().line;
        expect("(");
        std::vector<NodeId> args;
        while (!peek().is(")")) {
            if (at_end())
                throw ParseFailure{make_error(ErrorCode::UnbalancedDelimiter, "missing ')' in argument list", l)};
            if (peek().kind == Tok::Ident && peek(1).is(":") && !peek(1).is("::")) {
                const int al = peek().line;
                NodeId n = name_leaf(next());
                next();
                args.push_back(other("NamedArg", {n, expr()}, al));
            } else if (peek().is("...") && peek(1).is(")")) {
                next();
                args.push_back(other("FirstClassCallable", {}, l));
            } else {
                args.push_back(expr());
            }
            if (!accept(","))
                break;
        }
        expect(")");
        return node(NodeKind::ArgList, std::move(args), l);
    }

    NodeId array_items(std::string_view close, int l, const char* tag)
    {
        std::vector<NodeId> items;
        while (!peek().is(close)) {
            if (at_end())
                throw ParseFailure{make_error(ErrorCode::UnbalancedDelimiter, "missing '" + std::string(close) + "'", l)};
            if (peek().is(",")) {
                next();
                continue;
            }
            const int il = peek().line;
            NodeId v = expr();
            if (accept("=>"))
                v = other("ArrayPair", {v, expr()}, il);
            items.push_back(v);
            if (!accept(","))
                break;
        }
        expect(close);
        return other(tag, std::move(items), l);
    }

    NodeId closure(int l, bool is_static)
    {
        accept("&");
        NodeId ps = params();
        std::vector<NodeId> ch{ps};
        if (accept_word("use")) {
            const int ul = peek().line;
            expect("(");
            std::vector<NodeId> uses;
            while (!peek().is(")") && !at_end()) {
                accept("&");
                if (peek().kind == Tok::Variable) {
                    const Token& v = next();
                    uses.push_back(leaf(NodeKind::Var, v.text, v.line, v.end_line));
                }
                if (!accept(","))
                    break;
            }
            expect(")");
            ch.push_back(other("ClosureUse", std::move(uses), ul));
        }
        skip_return_type();
        ch.push_back(block_body({}));
        return other(is_static ? "StaticClosure" : "Closure", std::move(ch), l);
    }

    NodeId encapsed(const Token& t)
    {
        std::vector<NodeId> parts;
        for (const StrPart& p : t.parts) {
            if (!p.is_expr) {
                parts.push_back(leaf(NodeKind::Literal, p.text, p.line, p.line + static_cast<int>(std::count(p.text.begin(), p.text.end(), '\n'))));
                continue;
            }
            auto sub = detail::lex_php(p.text, true, p.line);
            if (!sub)
                throw ParseFailure{sub.error()};
            Parser inner(std::move(sub).value(), b_);
            parts.push_back(inner.parse_embedded_expression());
        }
        NodeId id = b_.add(NodeKind::Encapsed, std::move(parts), t.line, t.end_line);
        return id;
    }

    NodeId primary()
    {
        const Token& t = peek();
        const int l = t.line;
        switch (t.kind) {
        case Tok::Variable: {
            next();
            return leaf(NodeKind::Var, t.text, t.line, t.end_line);
        }
        case Tok::Number:
        case Tok::String: {
            next();
            return leaf(NodeKind::Literal, t.text, t.line, t.end_line);
        }
        case Tok::Template: {
            next();
            return encapsed(t);
        }
        case Tok::Backtick: {
            next();
            return other("Shell", {encapsed(t)}, l);
        }
        case Tok::Ident: {
            const std::string w = lower(t.text);
            if (w == "true" || w == "false" || w == "null") {
                next();
                return leaf(NodeKind::Literal, t.text, t.line, t.end_line);
            }
            if ((w == "array" || w == "list") && peek(1).is("(")) {
                next();
                next();
                return array_items(")", l, w == "array" ? "Array" : "List");
            }
            if (w == "function" && (peek(1).is("(") || peek(1).is("&"))) {
                next();
                return closure(l, false);
            }
            if (w == "static" && peek(1).is_word("function")) {
                next();
                next();
                return closure(l, true);
            }
            if ((w == "fn" && peek(1).is("(")) || (w == "static" && peek(1).is_word("fn"))) {
                if (w == "static")
                    next();
                next();
                NodeId ps = params();
                skip_return_type();
                expect("=>");
                return other("ArrowFn", {ps, expr(kAssignBp)}, l);
            }
            if ((w == "exit" || w == "die") && !peek(1).is("(")) {
                const Token& n = next();
                NodeId name = name_leaf(n);
                return node(NodeKind::Call, {name, node(NodeKind::ArgList, {}, l)}, l);
            }
            if (w == "match" && peek(1).is("("))
                fail("match expressions are not supported");
            next();
            return name_leaf(t);
        }
        case Tok::Punct: {
            if (t.is("(")) {
                next();
                NodeId e = expr();
                expect(")");
                return e;
            }
            if (t.is("[")) {
                next();
                return array_items("]", l, "Array");
            }
            if (t.is("$")) {
                next();
                if (accept("{")) {
                    NodeId inner = expr();
                    expect("}");
                    AstNode& n = b_.at(inner);
                    if (n.kind == NodeKind::Name && n.children.empty()) {
                        n.kind = NodeKind::Var;
                        n.symbol = "$" + *n.symbol;
                        return inner;
                    }
                    return other("VarVar", {inner}, l);
                }
                return other("VarVar", {primary()}, l);
            }
            if (t.is("\\") && peek(1).kind == Tok::Ident) {
                next();
                return name_leaf(next());
            }
            break;
        }
        case Tok::End:
            throw ParseFailure{make_error(ErrorCode::ParseError, "unexpected end of input", t.line)};
        default:
            break;
        }
        fail("unexpected token");
    }

    NodeId member_name()
    {
        const Token& t = peek();
        if (t.kind == Tok::Ident) {
            next();
            return name_leaf(t);
        }
        if (t.kind == Tok::Variable) {
            next();
            return leaf(NodeKind::Var, t.text, t.line, t.end_line);
        }
        if (t.is("{")) {
            next();
            NodeId e = expr();
            expect("}");
            return e;
        }
        fail("expected member name");
    }

    NodeId postfix(NodeId base)
    {
        const int l = b_.at(base).line_start;
        while (true) {
            const Token& t = peek();
            if (t.is("[")) {
                next();
                if (accept("]")) {
                    base = other("ArrayAppend", {base}, l);
                    continue;
                }
                NodeId idx = expr();
                expect("]");
                base = node(NodeKind::ArrayDim, {base, idx}, l);
            } else if (t.is("->") || t.is("?->")) {
                const bool nullsafe = t.is("?->");
                next();
                NodeId member = member_name();
                if (peek().is("(")) {
                    NodeId args = arg_list();
                    base = other(nullsafe ? "NullsafeMethodCall" : "MethodCall", {base, member, args}, l);
                } else {
                    base = other(nullsafe ? "NullsafePropertyFetch" : "PropertyFetch", {base, member}, l);
                }
            } else if (t.is("::")) {
                next();
                if (peek().kind == Tok::Variable) {
                    const Token& v = next();
                    NodeId member = leaf(NodeKind::Var, v.text, v.line, v.end_line);
                    if (peek().is("(")) {
                        base = other("StaticCall", {base, member, arg_list()}, l);
                    } else {
                        base = other("StaticProp", {base, member}, l);
                    }
                } else {
                    NodeId member = member_name();
                    if (peek().is("("))
                        base = other("StaticCall", {base, member, arg_list()}, l);
                    else
                        base = other("ClassConst", {base, member}, l);
                }
            } else if (t.is("(")) {
                NodeId args = arg_list();
                const NodeKind k = b_.at(base).kind;
                if (k == NodeKind::Name || k == NodeKind::Var)
                    base = node(NodeKind::Call, {base, args}, l);
                else
                    base = other("DynamicCall", {base, args}, l);
            } else if (t.is("++") || t.is("--")) {
                const std::string tag = t.is("++") ? "PostInc" : "PostDec";
                next();
                base = other(tag, {base}, l);
            } else if (is_assign_op(t)) {
                std::string op = t.text;
                next();
                if (op == "=" && peek().is("&") && !peek(1).is("&"))
                    next();
                NodeId rhs = expr(kAssignBp);
                base = node(NodeKind::Assign, {base, rhs}, l, op == "=" ? std::string{} : op);
                return base;
            } else {
                return base;
            }
        }
    }
};

Result<SourceUnit> build(std::string_view text, std::string path)
{
    std::string clean = sanitize_utf8(text);
    auto tokens = detail::lex_php(clean);
    if (!tokens)
        return tokens.error();
    TreeBuilder builder;
    try {
        Parser parser(std::move(tokens).value(), builder);
        NodeId root = parser.parse_file();
        return std::move(builder).finish(root, std::move(path), std::move(clean));
    } catch (const ParseFailure& failure) {
        return failure.error;
    }
}

} // namespace

std::string sanitize_utf8(std::string_view text)
{
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    const auto* s = reinterpret_cast<const unsigned char*>(text.data());
    const std::size_t n = text.size();
    while (i < n) {
        unsigned char c = s[i];
        std::size_t len = 0;
        std::uint32_t cp = 0;
        if (c < 0x80) {
            out.push_back(static_cast<char>(c));
            ++i;
            continue;
        } else if ((c & 0xE0) == 0xC0) {
            len = 2;
            cp = c & 0x1F;
        } else if ((c & 0xF0) == 0xE0) {
            len = 3;
            cp = c & 0x0F;
        } else if ((c & 0xF8) == 0xF0) {
            len = 4;
            cp = c & 0x07;
        }
        bool valid = len > 0 && i + len <= n;
        for (std::size_t k = 1; valid && k < len; ++k) {
            if ((s[i + k] & 0xC0) != 0x80)
                valid = false;
            else
                cp = (cp << 6) | (s[i + k] & 0x3F);
        }
        if (valid) {
            const bool overlong = (len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000);
            if (overlong || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))
                valid = false;
        }
        if (valid) {
            out.append(text.substr(i, len));
            i += len;
        } else {
            out.append("\xEF\xBF\xBD");
            ++i;
        }
    }
    return out;
}

Result<SourceUnit> parse_source(std::string_view text, std::string path)
{
    return build(text, std::move(path));
}

} // namespace cadet

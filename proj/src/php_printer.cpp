#include "cadet/php_printer.hpp"

#include <algorithm>

namespace cadet {

namespace {

class Printer {
public:
    explicit Printer(const SourceUnit& unit) : u_(unit) {}

    std::string expr(NodeId id)
    {
        const AstNode& n = u_.node(id);
        const auto& ch = n.children;
        switch (n.kind) {
        case NodeKind::Var:
        case NodeKind::Name:
            return *n.symbol;
        case NodeKind::Literal:
            return *n.value;
        case NodeKind::Assign:
            return expr(ch[0]) + " " + (n.tag.empty() ? "=" : n.tag) + " " + expr(ch[1]);
        case NodeKind::Call:
            return expr(ch[0]) + expr(ch[1]);
        case NodeKind::ArgList:
            return "(" + join(ch) + ")";
        case NodeKind::ArrayDim:
            return expr(ch[0]) + "[" + expr(ch[1]) + "]";
        case NodeKind::Encapsed:
            return encapsed(n);
        case NodeKind::BinOp:
            return "(" + expr(ch[0]) + " " + n.tag + " " + expr(ch[1]) + ")";
        case NodeKind::Other:
            return other(n);
        default:
            return "null";
        }
    }

    std::string statements(std::span<const NodeId> ids, int indent)
    {
        std::string out;
        for (NodeId id : ids)
            out += statement(id, indent);
        return out;
    }

private:
    const SourceUnit& u_;

    std::string join(std::span<const NodeId> ids, std::string_view sep = ", ")
    {
        std::string out;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (i)
                out += sep;
            out += expr(ids[i]);
        }
        return out;
    }

    std::string encapsed(const AstNode& n)
    {
        std::string out = "\"";
        for (NodeId c : n.children) {
            const AstNode& part = u_.node(c);
            if (part.kind == NodeKind::Literal) {
                const std::string& v = *part.value;
                for (std::size_t i = 0; i < v.size(); ++i) {
                    if (v[i] == '\\' && i + 1 < v.size()) {
                        out += v.substr(i, 2);
                        ++i;
                    } else if (v[i] == '"') {
                        out += "\\\"";
                    } else {
                        out += v[i];
                    }
                }
            } else {
                out += "{" + expr(c) + "}";
            }
        }
        return out + "\"";
    }

    std::string other(const AstNode& n)
    {
        const auto& ch = n.children;
        const std::string& t = n.tag;
        auto arg = [&](std::size_t i) { return i < ch.size() ? expr(ch[i]) : std::string{}; };
        if (t == "Not")
            return "!" + arg(0);
        if (t == "Neg")
            return "-(" + arg(0) + ")";
        if (t == "Plus")
            return "+(" + arg(0) + ")";
        if (t == "BitNot")
            return "~" + arg(0);
        if (t == "Silence")
            return "@" + arg(0);
        if (t == "PreInc")
            return "++" + arg(0);
        if (t == "PreDec")
            return "--" + arg(0);
        if (t == "PostInc")
            return arg(0) + "++";
        if (t == "PostDec")
            return arg(0) + "--";
        if (t.rfind("Cast(", 0) == 0)
            return "(" + t.substr(5, t.size() - 6) + ")" + arg(0);
        if (t.rfind("Include(", 0) == 0)
            return t.substr(8, t.size() - 9) + " " + arg(0);
        if (t == "Print")
            return "print " + arg(0);
        if (t == "Clone")
            return "clone " + arg(0);
        if (t == "PropertyFetch")
            return arg(0) + "->" + arg(1);
        if (t == "MethodCall")
            return arg(0) + "->" + arg(1) + arg(2);
        if (t == "StaticCall")
            return arg(0) + "::" + arg(1) + arg(2);
        if (t == "StaticProp" || t == "ClassConst")
            return arg(0) + "::" + arg(1);
        if (t == "New")
            return "new " + arg(0) + arg(1);
        if (t == "Array")
            return "[" + join(ch) + "]";
        if (t == "List")
            return "list(" + join(ch) + ")";
        if (t == "ArrayPair")
            return arg(0) + " => " + arg(1);
        if (t == "ArrayAppend")
            return arg(0) + "[]";
        if (t == "Ternary")
            return "(" + arg(0) + " ? " + arg(1) + " : " + arg(2) + ")";
        if (t == "ShortTernary")
            return "(" + arg(0) + " ?: " + arg(1) + ")";
        if (t == "Spread")
            return "..." + arg(0);
        if (t == "VarVar")
            return "${" + arg(0) + "}";
        if (t == "Param")
            return arg(0) + " = " + arg(1);
        if (t == "Params")
            return "(" + join(ch) + ")";
        if (t == "NamedArg")
            return arg(0) + ": " + arg(1);
        return "null /* " + t + " */";
    }

    static std::string pad(int indent) { return std::string(static_cast<std::size_t>(indent) * 4, ' '); }

    std::string block(NodeId list, int indent)
    {
        return "{\n" + statements(u_.node(list).children, indent + 1) + pad(indent) + "}";
    }

    std::string statement(NodeId id, int indent)
    {
        const AstNode& n = u_.node(id);
        const auto& ch = n.children;
        const std::string p = pad(indent);
        switch (n.kind) {
        case NodeKind::StmtList:
            return p + block(id, indent) + "\n";
        case NodeKind::Echo:
            return p + "echo " + join(ch) + ";\n";
        case NodeKind::Return:
            return p + (ch.empty() ? "return;\n" : "return " + expr(ch[0]) + ";\n");
        case NodeKind::Html:
            return p + "?>\n<?php\n";
        case NodeKind::If: {
            std::string out = p + "if (" + expr(ch[0]) + ") " + block(ch[1], indent);
            NodeId cur = id;
            while (u_.node(cur).children.size() > 2) {
                NodeId alt = u_.node(cur).children[2];
                if (u_.node(alt).kind == NodeKind::If) {
                    out += " else if (" + expr(u_.node(alt).children[0]) + ") " + block(u_.node(alt).children[1], indent);
                    cur = alt;
                } else {
                    out += " else " + block(alt, indent);
                    break;
                }
            }
            return out + "\n";
        }
        case NodeKind::While:
            return p + "while (" + expr(ch[0]) + ") " + block(ch[1], indent) + "\n";
        case NodeKind::Foreach: {
            std::string head = expr(ch[0]) + " as " + expr(ch[1]);
            if (ch.size() == 4)
                head += " => " + expr(ch[2]);
            return p + "foreach (" + head + ") " + block(ch.back(), indent) + "\n";
        }
        case NodeKind::Other:
            if (n.tag == "FunctionDecl")
                return p + "function " + expr(ch[0]) + expr(ch[1]) + " " + block(ch[2], indent) + "\n";
            if (n.tag == "Break" || n.tag == "Continue")
                return p + (n.tag == "Break" ? "break" : "continue") + (ch.empty() ? "" : " " + expr(ch[0])) + ";\n";
            if (n.tag == "Global")
                return p + "global " + join(ch) + ";\n";
            if (n.tag == "StaticVar")
                return p + "static " + join(ch) + ";\n";
            if (n.tag == "Throw")
                return p + "throw " + expr(ch[0]) + ";\n";
            return p + expr(id) + ";\n";
        default:
            return p + expr(id) + ";\n";
        }
    }
};

} // namespace

std::string render_statements(const SourceUnit& unit, std::span<const NodeId> statements, int indent)
{
    Printer printer(unit);
    return printer.statements(statements, indent);
}

std::string render_expression(const SourceUnit& unit, NodeId expr)
{
    Printer printer(unit);
    return printer.expr(expr);
}

std::string render_file(const SourceUnit& unit)
{
    return "<?php\n" + render_statements(unit, unit.statements(unit.root()));
}

} // namespace cadet

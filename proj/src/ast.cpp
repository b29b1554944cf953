#include "cadet/ast.hpp"

#include <algorithm>
#include <array>
#include <utility>

namespace cadet {

namespace {

constexpr std::array<std::string_view, 17> kKindNames = {
    "StmtList", "Assign", "Call", "ArgList", "ArrayDim", "Var", "Name", "Literal", "Encapsed",
    "Echo", "BinOp", "If", "While", "Foreach", "Return", "Html", "Other",
};

} // namespace

const char* to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::LexError: return "LexError";
    case ErrorCode::UnbalancedDelimiter: return "UnbalancedDelimiter";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::EmptySlice: return "EmptySlice";
    case ErrorCode::AmbiguousSlice: return "AmbiguousSlice";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::AuthError: return "AuthError";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::NetworkError: return "NetworkError";
    case ErrorCode::CorruptArchive: return "CorruptArchive";
    }
    return "Unknown";
}

std::string Error::describe() const
{
    std::string out = to_string(code);
    if (location >= 0)
        out += " at " + std::to_string(location);
    out += ": ";
    out += message;
    return out;
}

std::string_view kind_name(NodeKind kind)
{
    return kKindNames.at(static_cast<std::size_t>(kind));
}

std::optional<NodeKind> kind_from_name(std::string_view name)
{
    for (std::size_t i = 0; i < kKindNames.size(); ++i) {
        if (kKindNames[i] == name)
            return static_cast<NodeKind>(i);
    }
    return std::nullopt;
}

std::vector<std::string_view> SourceUnit::source_lines(int first, int last) const
{
    std::vector<std::string_view> out;
    if (source_.empty() || first > last)
        return out;
    std::string_view text = source_;
    int line = 1;
    std::size_t pos = 0;
    while (pos <= text.size() && line <= last) {
        std::size_t nl = text.find('\n', pos);
        std::size_t end = nl == std::string_view::npos ? text.size() : nl;
        if (line >= first) {
            std::string_view l = text.substr(pos, end - pos);
            if (!l.empty() && l.back() == '\r')
                l.remove_suffix(1);
            out.push_back(l);
        }
        if (nl == std::string_view::npos)
            break;
        pos = nl + 1;
        ++line;
    }
    return out;
}

NodeId TreeBuilder::add(NodeKind kind, std::vector<NodeId> children, int line_start, int line_end)
{
    AstNode n;
    n.id = static_cast<NodeId>(nodes_.size());
    n.kind = kind;
    n.children = std::move(children);
    n.line_start = line_start;
    n.line_end = line_end;
    nodes_.push_back(std::move(n));
    return nodes_.back().id;
}

Result<SourceUnit> TreeBuilder::finish(NodeId root, std::string path, std::string source) &&
{
    const std::size_t n = nodes_.size();
    if (root >= n)
        return make_error(ErrorCode::SchemaViolation, "root id does not name a node", root);
    if (nodes_[root].kind != NodeKind::StmtList)
        return make_error(ErrorCode::SchemaViolation, "root must be a StmtList", root);

    for (std::size_t i = 0; i < n; ++i) {
        const AstNode& node = nodes_[i];
        const bool wants_symbol = node.kind == NodeKind::Var || node.kind == NodeKind::Name;
        const bool wants_value = node.kind == NodeKind::Literal;
        if (wants_symbol != node.symbol.has_value())
            return make_error(ErrorCode::SchemaViolation,
                              std::string(kind_name(node.kind)) + (wants_symbol ? " requires" : " must not carry") + " a symbol",
                              static_cast<std::int64_t>(i));
        if (wants_value != node.value.has_value())
            return make_error(ErrorCode::SchemaViolation,
                              std::string(kind_name(node.kind)) + (wants_value ? " requires" : " must not carry") + " a value",
                              static_cast<std::int64_t>(i));
        const bool binary = node.kind == NodeKind::Assign || node.kind == NodeKind::Call || node.kind == NodeKind::ArrayDim;
        if (binary && node.children.size() != 2)
            return make_error(ErrorCode::SchemaViolation,
                              std::string(kind_name(node.kind)) + " must have exactly two children",
                              static_cast<std::int64_t>(i));
        if (node.line_start > node.line_end)
            return make_error(ErrorCode::SchemaViolation, "line_start exceeds line_end", static_cast<std::int64_t>(i));
        for (NodeId c : node.children) {
            if (c >= n)
                return make_error(ErrorCode::SchemaViolation, "dangling child reference " + std::to_string(c),
                                  static_cast<std::int64_t>(i));
        }
    }

    // Pre-order walk; a node reached twice is either shared or on a cycle.
    std::vector<NodeId> new_id(n, kNoNode);
    std::vector<NodeId> order;
    order.reserve(n);
    std::vector<NodeId> stack{root};
    while (!stack.empty()) {
        NodeId cur = stack.back();
        stack.pop_back();
        if (new_id[cur] != kNoNode)
            return make_error(ErrorCode::SchemaViolation, "node reachable twice (cycle or shared child)", cur);
        new_id[cur] = static_cast<NodeId>(order.size());
        order.push_back(cur);
        const auto& ch = nodes_[cur].children;
        for (auto it = ch.rbegin(); it != ch.rend(); ++it)
            stack.push_back(*it);
    }
    if (order.size() != n) {
        for (std::size_t i = 0; i < n; ++i) {
            if (new_id[i] == kNoNode)
                return make_error(ErrorCode::SchemaViolation, "node unreachable from root", static_cast<std::int64_t>(i));
        }
    }

    SourceUnit unit;
    unit.path_ = std::move(path);
    unit.source_ = std::move(source);
    unit.root_ = 0;
    unit.nodes_.resize(n);
    unit.parents_.assign(n, kNoNode);
    for (std::size_t i = 0; i < n; ++i) {
        AstNode node = std::move(nodes_[order[i]]);
        node.id = static_cast<NodeId>(i);
        for (NodeId& c : node.children) {
            c = new_id[c];
            unit.parents_[c] = node.id;
        }
        unit.nodes_[i] = std::move(node);
    }

    // Reverse pre-order visits children before parents.
    for (std::size_t i = n; i-- > 0;) {
        AstNode& node = unit.nodes_[i];
        for (NodeId c : node.children) {
            const AstNode& child = unit.nodes_[c];
            if (node.line_start <= 0 || child.line_start < node.line_start)
                node.line_start = child.line_start;
            node.line_end = std::max(node.line_end, child.line_end);
        }
        if (node.line_start <= 0)
            node.line_start = 1;
        node.line_end = std::max(node.line_end, node.line_start);
    }
    return compute_depths(std::move(unit));
}

SourceUnit compute_depths(SourceUnit unit)
{
    int max_depth = 0;
    // Pre-order ids put every parent before its children.
    for (AstNode& node : unit.nodes_) {
        NodeId p = unit.parents_[node.id];
        node.depth = p == kNoNode ? 0 : unit.nodes_[p].depth + 1;
        max_depth = std::max(max_depth, node.depth);
    }
    unit.max_depth_ = max_depth;
    return unit;
}

Result<StatementSlice> slice_statements(const SourceUnit& unit, int first_line, int last_line)
{
    if (first_line > last_line)
        return make_error(ErrorCode::EmptySlice, "first line after last line", first_line);

    auto inside = [&](const AstNode& n) { return n.line_start >= first_line && n.line_end <= last_line; };

    std::vector<NodeId> picked;
    NodeId parent_list = kNoNode;
    bool ambiguous = false;
    // Walk StmtLists top-down; stop descending once a statement is fully inside.
    std::vector<NodeId> lists{unit.root()};
    while (!lists.empty()) {
        NodeId list = lists.back();
        lists.pop_back();
        for (NodeId stmt : unit.statements(list)) {
            const AstNode& s = unit.node(stmt);
            if (inside(s)) {
                if (parent_list != kNoNode && parent_list != list)
                    ambiguous = true;
                parent_list = list;
                picked.push_back(stmt);
                continue;
            }
            if (s.line_end < first_line || s.line_start > last_line)
                continue;
            // Partially overlapping statement: look for nested statement lists.
            std::vector<NodeId> stack{stmt};
            while (!stack.empty()) {
                NodeId cur = stack.back();
                stack.pop_back();
                for (NodeId c : unit.node(cur).children) {
                    if (unit.node(c).kind == NodeKind::StmtList)
                        lists.push_back(c);
                    else
                        stack.push_back(c);
                }
            }
        }
    }
    if (picked.empty())
        return make_error(ErrorCode::EmptySlice,
                          "no statement lies entirely within lines " + std::to_string(first_line) + "-" + std::to_string(last_line),
                          first_line);
    if (ambiguous)
        return make_error(ErrorCode::AmbiguousSlice, "selected statements belong to different statement lists", first_line);
    std::sort(picked.begin(), picked.end());
    return StatementSlice{parent_list, std::move(picked)};
}

StatementSlice whole_unit(const SourceUnit& unit)
{
    auto stmts = unit.statements(unit.root());
    return StatementSlice{unit.root(), {stmts.begin(), stmts.end()}};
}

bool structurally_equal(const SourceUnit& a, const SourceUnit& b)
{
    if (a.node_count() != b.node_count())
        return false;
    // Both are in pre-order, so a positional comparison is a tree comparison.
    for (std::size_t i = 0; i < a.node_count(); ++i) {
        const AstNode& x = a.nodes()[i];
        const AstNode& y = b.nodes()[i];
        if (!same_kind(x, y) || x.symbol != y.symbol || x.value != y.value || x.children != y.children)
            return false;
    }
    return true;
}

} // namespace cadet

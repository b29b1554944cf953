#pragma once

#include "cadet/result.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cadet {

enum class NodeKind : std::uint8_t {
    StmtList,
    Assign,
    Call,
    ArgList,
    ArrayDim,
    Var,
    Name,
    Literal,
    Encapsed,
    Echo,
    BinOp,
    If,
    While,
    Foreach,
    Return,
    Html,
    Other,
};

std::string_view kind_name(NodeKind kind);
std::optional<NodeKind> kind_from_name(std::string_view name);

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = static_cast<NodeId>(-1);

// `tag` refines the kind: the operator for BinOp and compound Assign
// (".=", "+="), the original kind name for Other. Matching compares kind and
// tag together.
struct AstNode {
    NodeId id = 0;
    NodeKind kind = NodeKind::Other;
    std::string tag;
    std::vector<NodeId> children;
    std::optional<std::string> symbol;
    std::optional<std::string> value;
    int line_start = 1;
    int line_end = 1;
    int depth = 0;
};

inline bool same_kind(const AstNode& a, const AstNode& b) noexcept
{
    return a.kind == b.kind && a.tag == b.tag;
}

// Normalized syntax tree of one file. Node ids are dense and in pre-order,
// so `nodes[id].id == id` and a node's subtree occupies a contiguous id range.
class SourceUnit {
public:
    SourceUnit() = default;

    const std::string& path() const noexcept { return path_; }
    NodeId root() const noexcept { return root_; }
    const AstNode& node(NodeId id) const { return nodes_.at(id); }
    std::span<const AstNode> nodes() const noexcept { return nodes_; }
    std::size_t node_count() const noexcept { return nodes_.size(); }
    NodeId parent(NodeId id) const { return parents_.at(id); }
    int max_depth() const noexcept { return max_depth_; }

    // Source text, when the unit came from parse_source; empty for imports.
    const std::string& source() const noexcept { return source_; }
    // 1-based line range of the source, clamped; empty when no source.
    std::vector<std::string_view> source_lines(int first, int last) const;

    // Statement nodes directly under a StmtList.
    std::span<const NodeId> statements(NodeId stmt_list) const { return node(stmt_list).children; }

private:
    friend class TreeBuilder;
    friend SourceUnit compute_depths(SourceUnit unit);

    std::string path_;
    std::string source_;
    NodeId root_ = 0;
    std::vector<AstNode> nodes_;
    std::vector<NodeId> parents_;
    int max_depth_ = 0;
};

// Accumulates nodes in any order and produces a validated SourceUnit with
// pre-order ids, parents, spans widened to cover children, and depths.
class TreeBuilder {
public:
    NodeId add(NodeKind kind, std::vector<NodeId> children = {}, int line_start = 0, int line_end = 0);
    AstNode& at(NodeId id) { return nodes_.at(id); }
    const AstNode& at(NodeId id) const { return nodes_.at(id); }
    std::size_t size() const noexcept { return nodes_.size(); }

    // Fails with SchemaViolation on dangling children, shared children,
    // cycles, a non-StmtList root, or symbol/value fields on the wrong kinds.
    // The location of the error is the builder index of the offending node.
    Result<SourceUnit> finish(NodeId root, std::string path, std::string source = {}) &&;

private:
    std::vector<AstNode> nodes_;
};

// Recomputes every depth field and the unit's max depth.
SourceUnit compute_depths(SourceUnit unit);

// Statements under one StmtList whose spans lie in [first_line, last_line].
struct StatementSlice {
    NodeId stmt_list = kNoNode;
    std::vector<NodeId> statements;
};

Result<StatementSlice> slice_statements(const SourceUnit& unit, int first_line, int last_line);

// All top-level statements of the unit.
StatementSlice whole_unit(const SourceUnit& unit);

// Node-for-node equality of kind, tag, symbol, value and child order.
bool structurally_equal(const SourceUnit& a, const SourceUnit& b);

} // namespace cadet

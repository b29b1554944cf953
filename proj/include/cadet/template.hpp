#pragma once

#include "cadet/ast.hpp"
#include "cadet/result.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cadet {

// Normal queries abstract a whole snippet; strict queries only the
// vulnerable slice of it.
enum class QueryMode { Normal, Strict };

// Preserve keeps call and constant names as literal filters; Wildcard erases
// them so that e.g. a mysql_query seed also matches an fopen call.
enum class SymbolPolicy { Preserve, Wildcard };

enum class LeafRole { None, ApiSymbol, CallWildcard, VarWildcard, LiteralWildcard };

std::string_view to_string(QueryMode mode);
std::string_view to_string(SymbolPolicy policy);
std::optional<QueryMode> query_mode_from(std::string_view text);
std::optional<SymbolPolicy> symbol_policy_from(std::string_view text);

using TemplateNodeId = std::uint32_t;

struct TemplateNode {
    TemplateNodeId id = 0;
    NodeKind kind = NodeKind::Other;
    std::string tag;
    std::vector<TemplateNodeId> children;
    LeafRole role = LeafRole::None;
    std::string api_name; // ApiSymbol only
    int class_id = -1;    // VarWildcard only
    int depth = 0;        // relative to the statement root

    bool operator==(const TemplateNode&) const = default;
};

struct SeedOrigin {
    std::string path;
    int first_line = 0;
    int last_line = 0;

    bool operator==(const SeedOrigin&) const = default;
};

// Statement trees with wildcarded leaves. Nodes are numbered in pre-order,
// statement by statement, so `statements` is increasing and each statement's
// subtree is a contiguous id range.
struct Template {
    std::vector<TemplateNode> nodes;
    std::vector<TemplateNodeId> statements;
    // Unordered pairs stored as (smaller, larger), sorted.
    std::vector<std::pair<TemplateNodeId, TemplateNodeId>> dataflow_edges;
    QueryMode mode = QueryMode::Normal;
    SymbolPolicy symbol_policy = SymbolPolicy::Preserve;
    SeedOrigin origin;
    int template_depth = 0;
    int var_class_count = 0;

    const TemplateNode& node(TemplateNodeId id) const { return nodes.at(id); }
    bool operator==(const Template&) const = default;
};

// Statements must be siblings of one SourceUnit in source order.
Result<Template> derive_template(const SourceUnit& unit, std::span<const NodeId> statements, QueryMode mode,
                                 SymbolPolicy policy = SymbolPolicy::Preserve);

struct TemplateStats {
    std::size_t node_count = 0;
    std::size_t statement_count = 0;
    std::size_t var_wildcards = 0;
    std::size_t literal_wildcards = 0;
    std::size_t api_symbols = 0;
    std::size_t call_wildcards = 0;
    std::size_t var_classes = 0;
    std::size_t edge_count = 0;
    int depth = 0;
};

TemplateStats template_stats(const Template& t);

// Checks every structural invariant; location is the offending node id.
std::optional<Error> validate_template(const Template& t);

// "tmpl-v1" newline-delimited records: header, one record per node, then
// an {"edges": [...]} record.
std::string serialize_template(const Template& t);
Result<Template> deserialize_template(std::string_view text);

// Serialization with the origin blanked; equal seeds give equal text.
std::string canonical_template_text(const Template& t);

} // namespace cadet

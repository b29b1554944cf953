#include "cadet/template.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <map>
#include <sstream>
#include <unordered_map>

namespace cadet {

using nlohmann::json;

std::string_view to_string(QueryMode mode)
{
    return mode == QueryMode::Normal ? "normal" : "strict";
}

std::string_view to_string(SymbolPolicy policy)
{
    return policy == SymbolPolicy::Preserve ? "preserve" : "wildcard";
}

std::optional<QueryMode> query_mode_from(std::string_view text)
{
    if (text == "normal")
        return QueryMode::Normal;
    if (text == "strict")
        return QueryMode::Strict;
    return std::nullopt;
}

std::optional<SymbolPolicy> symbol_policy_from(std::string_view text)
{
    if (text == "preserve")
        return SymbolPolicy::Preserve;
    if (text == "wildcard")
        return SymbolPolicy::Wildcard;
    return std::nullopt;
}

Result<Template> derive_template(const SourceUnit& unit, std::span<const NodeId> statements, QueryMode mode, SymbolPolicy policy)
{
    if (statements.empty())
        return make_error(ErrorCode::EmptyInput, "cannot derive a template from zero statements");

    Template t;
    t.mode = mode;
    t.symbol_policy = policy;
    t.origin.path = unit.path();
    t.origin.first_line = unit.node(statements.front()).line_start;
    t.origin.last_line = unit.node(statements.front()).line_end;

    std::unordered_map<std::string, int> classes;
    std::vector<std::vector<TemplateNodeId>> members;

    // Copies one subtree in pre-order; the source ids of a subtree are
    // contiguous, so an explicit stack keeps the left-to-right order.
    for (NodeId stmt : statements) {
        const AstNode& s = unit.node(stmt);
        t.origin.first_line = std::min(t.origin.first_line, s.line_start);
        t.origin.last_line = std::max(t.origin.last_line, s.line_end);
        t.statements.push_back(static_cast<TemplateNodeId>(t.nodes.size()));

        struct Frame {
            NodeId src;
            TemplateNodeId parent;
            int depth;
        };
        std::vector<Frame> stack{{stmt, static_cast<TemplateNodeId>(-1), 0}};
        while (!stack.empty()) {
            Frame f = stack.back();
            stack.pop_back();
            const AstNode& n = unit.node(f.src);
            TemplateNode tn;
            tn.id = static_cast<TemplateNodeId>(t.nodes.size());
            tn.kind = n.kind;
            tn.tag = n.tag;
            tn.depth = f.depth;
            switch (n.kind) {
            case NodeKind::Var: {
                auto [it, inserted] = classes.emplace(*n.symbol, static_cast<int>(classes.size()));
                if (inserted)
                    members.emplace_back();
                tn.role = LeafRole::VarWildcard;
                tn.class_id = it->second;
                members[static_cast<std::size_t>(it->second)].push_back(tn.id);
                break;
            }
            case NodeKind::Literal:
                tn.role = LeafRole::LiteralWildcard;
                break;
            case NodeKind::Name:
                if (policy == SymbolPolicy::Preserve) {
                    tn.role = LeafRole::ApiSymbol;
                    tn.api_name = *n.symbol;
                } else {
                    tn.role = LeafRole::CallWildcard;
                }
                break;
            default:
                break;
            }
            t.template_depth = std::max(t.template_depth, f.depth);
            if (f.parent != static_cast<TemplateNodeId>(-1))
                t.nodes[f.parent].children.push_back(tn.id);
            t.nodes.push_back(std::move(tn));
            const TemplateNodeId self = t.nodes.back().id;
            for (auto it = n.children.rbegin(); it != n.children.rend(); ++it)
                stack.push_back(Frame{*it, self, f.depth + 1});
        }
    }

    t.var_class_count = static_cast<int>(classes.size());
    for (const auto& m : members) {
        for (std::size_t i = 0; i < m.size(); ++i)
            for (std::size_t j = i + 1; j < m.size(); ++j)
                t.dataflow_edges.emplace_back(m[i], m[j]);
    }
    std::sort(t.dataflow_edges.begin(), t.dataflow_edges.end());
    return t;
}

TemplateStats template_stats(const Template& t)
{
    TemplateStats s;
    s.node_count = t.nodes.size();
    s.statement_count = t.statements.size();
    s.edge_count = t.dataflow_edges.size();
    s.depth = t.template_depth;
    std::vector<bool> seen;
    for (const TemplateNode& n : t.nodes) {
        switch (n.role) {
        case LeafRole::VarWildcard:
            ++s.var_wildcards;
            if (static_cast<std::size_t>(n.class_id) >= seen.size())
                seen.resize(static_cast<std::size_t>(n.class_id) + 1, false);
            seen[static_cast<std::size_t>(n.class_id)] = true;
            break;
        case LeafRole::LiteralWildcard: ++s.literal_wildcards; break;
        case LeafRole::ApiSymbol: ++s.api_symbols; break;
        case LeafRole::CallWildcard: ++s.call_wildcards; break;
        case LeafRole::None: break;
        }
    }
    s.var_classes = static_cast<std::size_t>(std::count(seen.begin(), seen.end(), true));
    return s;
}

std::optional<Error> validate_template(const Template& t)
{
    auto bad = [](const std::string& msg, std::int64_t where) { return make_error(ErrorCode::SchemaViolation, msg, where); };
    if (t.statements.empty())
        return bad("template has no statements", -1);
    const std::size_t n = t.nodes.size();

    // Re-walk every statement in pre-order and require ids to follow it.
    std::size_t expected = 0;
    int max_depth = 0;
    int next_class = 0;
    std::vector<std::vector<TemplateNodeId>> members;
    for (TemplateNodeId root : t.statements) {
        if (root != expected)
            return bad("statement roots must follow pre-order numbering", root);
        std::vector<std::pair<TemplateNodeId, int>> stack{{root, 0}};
        while (!stack.empty()) {
            auto [id, depth] = stack.back();
            stack.pop_back();
            if (id != expected || id >= n)
                return bad("node ids must be dense and in pre-order", id);
            ++expected;
            const TemplateNode& node = t.nodes[id];
            if (node.id != id)
                return bad("node id field disagrees with its position", id);
            if (node.depth != depth)
                return bad("depth disagrees with tree position", id);
            max_depth = std::max(max_depth, depth);
            const bool var = node.kind == NodeKind::Var;
            const bool lit = node.kind == NodeKind::Literal;
            const bool name = node.kind == NodeKind::Name;
            if (var != (node.role == LeafRole::VarWildcard))
                return bad("Var nodes and only Var nodes carry VarWildcard", id);
            if (lit != (node.role == LeafRole::LiteralWildcard))
                return bad("Literal nodes and only Literal nodes carry LiteralWildcard", id);
            if (name) {
                const LeafRole want = t.symbol_policy == SymbolPolicy::Preserve ? LeafRole::ApiSymbol : LeafRole::CallWildcard;
                if (node.role != want)
                    return bad("Name leaf role does not match symbol policy", id);
            } else if (node.role == LeafRole::ApiSymbol || node.role == LeafRole::CallWildcard) {
                return bad("symbol roles belong to Name nodes", id);
            }
            if (var) {
                if (node.class_id < 0 || node.class_id > next_class)
                    return bad("variable classes must be dense in first-occurrence order", id);
                if (node.class_id == next_class) {
                    ++next_class;
                    members.emplace_back();
                }
                members[static_cast<std::size_t>(node.class_id)].push_back(id);
            }
            for (auto it = node.children.rbegin(); it != node.children.rend(); ++it)
                stack.emplace_back(*it, depth + 1);
        }
    }
    if (expected != n)
        return bad("nodes outside every statement", static_cast<std::int64_t>(expected));
    if (max_depth != t.template_depth)
        return bad("template_depth disagrees with node depths", -1);
    if (next_class != t.var_class_count)
        return bad("var_class_count disagrees with class ids", -1);

    std::vector<std::pair<TemplateNodeId, TemplateNodeId>> want;
    for (const auto& m : members)
        for (std::size_t i = 0; i < m.size(); ++i)
            for (std::size_t j = i + 1; j < m.size(); ++j)
                want.emplace_back(m[i], m[j]);
    std::sort(want.begin(), want.end());
    if (want != t.dataflow_edges)
        return bad("data-flow edges must connect exactly the same-class variable pairs", -1);
    return std::nullopt;
}

namespace {

json role_json(const TemplateNode& n)
{
    switch (n.role) {
    case LeafRole::ApiSymbol: return json{{"role", "api"}, {"name", n.api_name}};
    case LeafRole::CallWildcard: return json{{"role", "call"}};
    case LeafRole::VarWildcard: return json{{"role", "var"}, {"class", n.class_id}};
    case LeafRole::LiteralWildcard: return json{{"role", "literal"}};
    case LeafRole::None: break;
    }
    return nullptr;
}

std::string serialize(const Template& t, bool with_origin)
{
    std::ostringstream out;
    json header{{"format", "tmpl-v1"}, {"mode", to_string(t.mode)}, {"symbol_policy", to_string(t.symbol_policy)}};
    if (with_origin)
        header["origin"] = {{"path", t.origin.path}, {"lines", {t.origin.first_line, t.origin.last_line}}};
    else
        header["origin"] = nullptr;
    header["statements"] = t.statements;
    out << header.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
    for (const TemplateNode& n : t.nodes) {
        json rec;
        rec["id"] = n.id;
        rec["kind"] = n.kind == NodeKind::Other && !n.tag.empty() ? n.tag : std::string(kind_name(n.kind));
        rec["children"] = n.children;
        rec["leaf_role"] = role_json(n);
        if (n.kind != NodeKind::Other && !n.tag.empty())
            rec["op"] = n.tag;
        out << rec.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
    }
    json edges = json::array();
    for (auto [a, b] : t.dataflow_edges)
        edges.push_back({a, b});
    out << json{{"edges", edges}}.dump() << '\n';
    return out.str();
}

} // namespace

std::string serialize_template(const Template& t)
{
    return serialize(t, true);
}

std::string canonical_template_text(const Template& t)
{
    return serialize(t, false);
}

Result<Template> deserialize_template(std::string_view text)
{
    std::istringstream in{std::string(text)};
    std::string line;
    std::int64_t index = -1;
    Template t;
    bool have_header = false;
    bool have_edges = false;
    auto violation = [&](const std::string& msg) { return make_error(ErrorCode::SchemaViolation, msg, index); };

    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        ++index;
        json rec = json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object())
            return violation("record is not a JSON object");
        if (!have_header) {
            if (rec.value("format", std::string{}) != "tmpl-v1")
                return violation("missing tmpl-v1 header");
            auto mode = query_mode_from(rec.value("mode", std::string{}));
            auto policy = symbol_policy_from(rec.value("symbol_policy", std::string{}));
            if (!mode || !policy)
                return violation("header has an unknown mode or symbol_policy");
            t.mode = *mode;
            t.symbol_policy = *policy;
            if (rec.contains("origin") && rec["origin"].is_object()) {
                const json& o = rec["origin"];
                t.origin.path = o.value("path", std::string{});
                if (o.contains("lines") && o["lines"].is_array() && o["lines"].size() == 2) {
                    t.origin.first_line = o["lines"][0].get<int>();
                    t.origin.last_line = o["lines"][1].get<int>();
                }
            }
            if (!rec.contains("statements") || !rec["statements"].is_array())
                return violation("header lacks statements");
            for (const json& s : rec["statements"]) {
                if (!s.is_number_unsigned())
                    return violation("statement ids must be non-negative integers");
                t.statements.push_back(s.get<TemplateNodeId>());
            }
            if (t.statements.empty())
                return violation("template has no statements");
            have_header = true;
            continue;
        }
        if (have_edges)
            return violation("records after the edges record");
        if (rec.contains("edges")) {
            if (!rec["edges"].is_array())
                return violation("edges must be an array");
            for (const json& e : rec["edges"]) {
                if (!e.is_array() || e.size() != 2 || !e[0].is_number_unsigned() || !e[1].is_number_unsigned())
                    return violation("edge must be a pair of node ids");
                auto a = e[0].get<TemplateNodeId>();
                auto b = e[1].get<TemplateNodeId>();
                t.dataflow_edges.emplace_back(std::min(a, b), std::max(a, b));
            }
            std::sort(t.dataflow_edges.begin(), t.dataflow_edges.end());
            have_edges = true;
            continue;
        }
        if (!rec.contains("id") || !rec["id"].is_number_unsigned() || rec["id"].get<TemplateNodeId>() != t.nodes.size())
            return violation("node ids must be consecutive from 0");
        if (!rec.contains("kind") || !rec["kind"].is_string())
            return violation("record lacks a kind");
        TemplateNode n;
        n.id = rec["id"].get<TemplateNodeId>();
        const std::string kind = rec["kind"].get<std::string>();
        if (auto k = kind_from_name(kind)) {
            n.kind = *k;
        } else {
            n.kind = NodeKind::Other;
            n.tag = kind;
        }
        if (rec.contains("op") && rec["op"].is_string())
            n.tag = rec["op"].get<std::string>();
        if (rec.contains("children")) {
            if (!rec["children"].is_array())
                return violation("children must be an array");
            for (const json& c : rec["children"]) {
                if (!c.is_number_unsigned())
                    return violation("child ids must be non-negative integers");
                n.children.push_back(c.get<TemplateNodeId>());
            }
        }
        const json role = rec.value("leaf_role", json(nullptr));
        if (role.is_object()) {
            const std::string r = role.value("role", std::string{});
            if (r == "api" && role.contains("name") && role["name"].is_string()) {
                n.role = LeafRole::ApiSymbol;
                n.api_name = role["name"].get<std::string>();
            } else if (r == "call") {
                n.role = LeafRole::CallWildcard;
            } else if (r == "var" && role.contains("class") && role["class"].is_number_integer()) {
                n.role = LeafRole::VarWildcard;
                n.class_id = role["class"].get<int>();
            } else if (r == "literal") {
                n.role = LeafRole::LiteralWildcard;
            } else {
                return violation("unknown leaf_role");
            }
        } else if (!role.is_null()) {
            return violation("leaf_role must be an object or null");
        }
        t.nodes.push_back(std::move(n));
    }
    if (!have_header) {
        index = 0;
        return violation("empty template stream");
    }
    if (!have_edges)
        return violation("missing edges record");

    // Depths, maximum depth and class count are implied by the tree.
    for (TemplateNodeId s : t.statements) {
        if (s >= t.nodes.size())
            return make_error(ErrorCode::SchemaViolation, "statement id out of range", s);
    }
    std::vector<int> depth(t.nodes.size(), -1);
    for (TemplateNodeId s : t.statements)
        depth[s] = 0;
    for (const TemplateNode& n : t.nodes) {
        for (TemplateNodeId c : n.children) {
            if (c >= t.nodes.size() || c <= n.id)
                return make_error(ErrorCode::SchemaViolation, "child ids must follow their parent", n.id);
            if (depth[n.id] >= 0)
                depth[c] = depth[n.id] + 1;
        }
    }
    int classes = 0;
    for (TemplateNode& n : t.nodes) {
        if (depth[n.id] < 0)
            return make_error(ErrorCode::SchemaViolation, "node unreachable from any statement", n.id);
        n.depth = depth[n.id];
        t.template_depth = std::max(t.template_depth, n.depth);
        if (n.role == LeafRole::VarWildcard)
            classes = std::max(classes, n.class_id + 1);
    }
    t.var_class_count = classes;
    if (auto err = validate_template(t))
        return *err;
    return t;
}

} // namespace cadet

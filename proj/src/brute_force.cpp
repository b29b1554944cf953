#include "cadet/match_engine.hpp"

#include <algorithm>
#include <set>

// Independent of the compiled engine: walks the template tree directly and
// keeps bindings in an ordered map.

namespace cadet {

namespace {

using Bindings = std::map<int, std::string>;

bool same_subtree(const Template& t, TemplateNodeId tid, const SourceUnit& unit, NodeId nid, Bindings& env, const MatchOptions& opts)
{
    const TemplateNode& tn = t.node(tid);
    const AstNode& n = unit.node(nid);
    if (tn.kind != n.kind || tn.tag != n.tag)
        return false;
    if (opts.exact_arity ? n.children.size() != tn.children.size() : n.children.size() < tn.children.size())
        return false;
    switch (tn.role) {
    case LeafRole::ApiSymbol:
        if (n.symbol != tn.api_name)
            return false;
        break;
    case LeafRole::VarWildcard: {
        auto it = env.find(tn.class_id);
        if (it == env.end())
            env.emplace(tn.class_id, *n.symbol);
        else if (it->second != *n.symbol)
            return false;
        break;
    }
    default:
        break;
    }
    for (std::size_t i = 0; i < tn.children.size(); ++i) {
        if (!same_subtree(t, tn.children[i], unit, n.children[i], env, opts))
            return false;
    }
    return true;
}

bool distinct_names(const Bindings& env)
{
    std::set<std::string> names;
    for (const auto& [cls, name] : env) {
        if (!names.insert(name).second)
            return false;
    }
    return true;
}

} // namespace

std::vector<Match> brute_force_scan(const Template& t, const SourceUnit& unit, const MatchOptions& options)
{
    std::vector<Match> out;
    const std::size_t span = t.statements.size();
    if (span == 0)
        return out;
    const std::string qid = query_id_of(t);
    for (NodeId id = 0; id < unit.node_count(); ++id) {
        const AstNode& list = unit.node(id);
        if (list.kind != NodeKind::StmtList)
            continue;
        for (std::size_t start = 0; start + span <= list.children.size(); ++start) {
            Bindings env;
            bool ok = true;
            for (std::size_t k = 0; k < span && ok; ++k)
                ok = same_subtree(t, t.statements[k], unit, list.children[start + k], env, options);
            if (!ok || (options.injective && !distinct_names(env)))
                continue;
            Match m;
            m.unit_path = unit.path();
            m.query_id = qid;
            m.stmt_list = id;
            m.start_index = static_cast<std::uint32_t>(start);
            m.statement_span = static_cast<std::uint32_t>(span);
            m.bindings = std::move(env);
            m.line_start = unit.node(list.children[start]).line_start;
            m.line_end = unit.node(list.children[start]).line_end;
            for (std::size_t k = 0; k < span; ++k) {
                const AstNode& s = unit.node(list.children[start + k]);
                m.line_start = std::min(m.line_start, s.line_start);
                m.line_end = std::max(m.line_end, s.line_end);
            }
            out.push_back(std::move(m));
        }
    }
    return out;
}

} // namespace cadet

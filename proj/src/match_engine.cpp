#include "cadet/match_engine.hpp"

#include <algorithm>

namespace cadet {

namespace {

// Reused per scan to avoid allocating per anchor.
struct Machine {
    std::vector<NodeId> regs;
    std::vector<const std::string*> bound;

    explicit Machine(const MatcherProgram& p) : regs(p.slot_count, kNoNode), bound(p.var_class_count, nullptr) {}

    bool run(const MatcherProgram& p, const SourceUnit& unit, std::span<const NodeId> stmts, std::uint32_t start,
             const MatchOptions& opts, std::uint64_t& comparisons)
    {
        std::fill(bound.begin(), bound.end(), nullptr);
        std::uint32_t cursor = start;
        for (const MatcherStep& s : p.steps) {
            switch (s.op) {
            case StepOp::FilterKind: {
                NodeId target;
                if (s.parent_slot < 0) {
                    target = stmts[cursor];
                } else {
                    const auto& ch = unit.node(regs[static_cast<std::size_t>(s.parent_slot)]).children;
                    if (s.child_index >= ch.size())
                        return false;
                    target = ch[s.child_index];
                }
                ++comparisons;
                const AstNode& n = unit.node(target);
                if (n.kind != s.kind || n.tag != s.tag)
                    return false;
                if (opts.exact_arity && n.children.size() != s.arity)
                    return false;
                regs[s.slot] = target;
                break;
            }
            case StepOp::FilterSymbol: {
                ++comparisons;
                const AstNode& n = unit.node(regs[s.slot]);
                if (!n.symbol || *n.symbol != s.symbol)
                    return false;
                break;
            }
            case StepOp::BindVar: {
                const std::string& name = *unit.node(regs[s.slot]).symbol;
                if (opts.injective) {
                    for (const std::string* other : bound) {
                        if (other && *other == name)
                            return false;
                    }
                }
                bound[static_cast<std::size_t>(s.class_id)] = &name;
                break;
            }
            case StepOp::CheckVar: {
                ++comparisons;
                if (*unit.node(regs[s.slot]).symbol != *bound[static_cast<std::size_t>(s.class_id)])
                    return false;
                break;
            }
            case StepOp::NextStatement:
                ++cursor;
                break;
            }
        }
        return true;
    }

    Match result(const MatcherProgram& p, const SourceUnit& unit, NodeId list, std::span<const NodeId> stmts, std::uint32_t start) const
    {
        Match m;
        m.unit_path = unit.path();
        m.query_id = p.query_id;
        m.stmt_list = list;
        m.start_index = start;
        m.statement_span = p.statement_count;
        for (std::size_t c = 0; c < bound.size(); ++c)
            m.bindings.emplace(static_cast<int>(c), *bound[c]);
        m.line_start = unit.node(stmts[start]).line_start;
        m.line_end = unit.node(stmts[start]).line_end;
        for (std::uint32_t i = start; i < start + p.statement_count; ++i) {
            m.line_start = std::min(m.line_start, unit.node(stmts[i]).line_start);
            m.line_end = std::max(m.line_end, unit.node(stmts[i]).line_end);
        }
        return m;
    }
};

} // namespace

void attach_excerpt(Match& m, const SourceUnit& unit)
{
    const int last = std::min(m.line_end, m.line_start + kExcerptLines - 1);
    m.excerpt.clear();
    for (std::string_view line : unit.source_lines(m.line_start, last)) {
        if (!m.excerpt.empty())
            m.excerpt += '\n';
        m.excerpt += line;
    }
}

std::optional<Match> match_at(const MatcherProgram& p, const SourceUnit& unit, NodeId stmt_list, std::uint32_t start_index,
                              const MatchOptions& options, ComparisonCounter* counter)
{
    if (p.statement_count == 0 || unit.node(stmt_list).kind != NodeKind::StmtList)
        return std::nullopt;
    auto stmts = unit.statements(stmt_list);
    if (static_cast<std::size_t>(start_index) + p.statement_count > stmts.size())
        return std::nullopt;
    Machine m(p);
    std::uint64_t comparisons = 0;
    const bool ok = m.run(p, unit, stmts, start_index, options, comparisons);
    if (counter) {
        counter->node_comparisons += comparisons;
        ++counter->candidates_tried;
    }
    if (!ok)
        return std::nullopt;
    return m.result(p, unit, stmt_list, stmts, start_index);
}

ScanResult scan_unit(const MatcherProgram& p, const SourceUnit& unit, const ScanOptions& options)
{
    ScanResult out;
    if (p.statement_count == 0)
        return out;
    Machine m(p);
    // A statement at depth d holds nodes down to d + template_depth.
    const int deepest_anchor = unit.max_depth() - p.template_depth + 1;
    std::uint64_t comparisons = 0;
    for (const AstNode& list : unit.nodes()) {
        if (list.kind != NodeKind::StmtList)
            continue;
        auto stmts = std::span<const NodeId>(list.children);
        if (stmts.size() < p.statement_count)
            continue;
        if (options.depth_pruning && list.depth + 1 > deepest_anchor)
            continue;
        const auto last = static_cast<std::uint32_t>(stmts.size() - p.statement_count);
        for (std::uint32_t start = 0; start <= last; ++start) {
            ++out.counter.candidates_tried;
            if (m.run(p, unit, stmts, start, options.match, comparisons)) {
                out.matches.push_back(m.result(p, unit, list.id, stmts, start));
                if (options.max_matches_per_unit && out.matches.size() >= *options.max_matches_per_unit) {
                    if (options.count_comparisons)
                        out.counter.node_comparisons = comparisons;
                    return out;
                }
            }
        }
    }
    if (options.count_comparisons)
        out.counter.node_comparisons = comparisons;
    return out;
}

} // namespace cadet

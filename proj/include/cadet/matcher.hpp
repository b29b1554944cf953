#pragma once

#include "cadet/ast.hpp"
#include "cadet/result.hpp"
#include "cadet/template.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace cadet {

enum class StepOp : std::uint8_t { FilterKind, FilterSymbol, BindVar, CheckVar, NextStatement };

// One instruction of a compiled matcher. Every template node owns a register
// (`slot`, equal to its template node id). FilterKind resolves its register
// from the parent's register and a child position, so navigation needs no
// separate descend/ascend instructions; the other filters read `slot`.
struct MatcherStep {
    StepOp op = StepOp::FilterKind;
    TemplateNodeId slot = 0;
    // FilterKind
    NodeKind kind = NodeKind::Other;
    std::string tag;
    std::int32_t parent_slot = -1; // -1: the current anchor statement
    std::uint32_t child_index = 0;
    std::uint32_t arity = 0;
    // FilterSymbol
    std::string symbol;
    // BindVar / CheckVar
    int class_id = -1;

    bool operator==(const MatcherStep&) const = default;
};

struct MatcherProgram {
    std::vector<MatcherStep> steps;
    std::uint32_t statement_count = 0;
    std::uint32_t var_class_count = 0;
    std::uint32_t slot_count = 0;
    int template_depth = 0;
    std::string query_id;
    // carried for reporting only; not part of the identity
    SeedOrigin origin;
    QueryMode mode = QueryMode::Normal;
    SymbolPolicy symbol_policy = SymbolPolicy::Preserve;

    bool operator==(const MatcherProgram&) const = default;
};

// Content hash of the canonical template text.
std::string query_id_of(const Template& t);

MatcherProgram compile(const Template& t);

// Static checks: each class binds before any check of it, statement count
// matches the NextStatement boundaries, registers are written before read.
std::optional<Error> verify_program(const MatcherProgram& p);

// Gremlin-flavoured rendering of the program, one line per step.
std::string export_traversal_script(const MatcherProgram& p);

// "prog-v1" records: a header then one record per step.
std::string serialize_program(const MatcherProgram& p);
Result<MatcherProgram> deserialize_program(std::string_view text);

} // namespace cadet

#pragma once

#include "cadet/ast.hpp"
#include "cadet/matcher.hpp"
#include "cadet/template.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cadet {

// An occurrence of a query: `statement_span` consecutive statements of one
// StmtList starting at `start_index`.
struct Match {
    std::string unit_path;
    std::string query_id;
    NodeId stmt_list = kNoNode;
    std::uint32_t start_index = 0;
    std::uint32_t statement_span = 0;
    std::map<int, std::string> bindings;
    int line_start = 0;
    int line_end = 0;
    // Filled by callers that keep the source around (see attach_excerpt).
    std::string excerpt;

    bool operator==(const Match&) const = default;
};

// Maximum number of source lines quoted in an excerpt.
inline constexpr int kExcerptLines = 10;

// Quotes up to kExcerptLines lines of the unit's source starting at the match.
void attach_excerpt(Match& m, const SourceUnit& unit);

// Semantics switches shared by the compiled engine and the brute-force oracle.
struct MatchOptions {
    // Require equal child counts instead of allowing surplus trailing children.
    bool exact_arity = false;
    // Require distinct variable classes to bind distinct names.
    bool injective = false;
};

struct ScanOptions {
    bool depth_pruning = true;
    std::optional<std::size_t> max_matches_per_unit;
    bool count_comparisons = true;
    MatchOptions match;
};

struct ComparisonCounter {
    std::uint64_t node_comparisons = 0;
    std::uint64_t candidates_tried = 0;
};

// Runs the program at one anchor with a fresh binding environment.
std::optional<Match> match_at(const MatcherProgram& p, const SourceUnit& unit, NodeId stmt_list, std::uint32_t start_index,
                              const MatchOptions& options = {}, ComparisonCounter* counter = nullptr);

struct ScanResult {
    std::vector<Match> matches;
    ComparisonCounter counter;
};

// Tries every (StmtList, start) anchor in document order. With depth pruning
// on, statement lists whose statements sit deeper than
// max_depth(unit) - template_depth + 1 are skipped.
ScanResult scan_unit(const MatcherProgram& p, const SourceUnit& unit, const ScanOptions& options = {});

// Differential-testing oracle: direct recursive comparison of the template
// against each anchor, with no compiled program and no pruning.
std::vector<Match> brute_force_scan(const Template& t, const SourceUnit& unit, const MatchOptions& options = {});

} // namespace cadet

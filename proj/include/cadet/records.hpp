#pragma once

#include "cadet/match_engine.hpp"
#include "cadet/result.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <string>
#include <string_view>

namespace cadet {

// One line of matches.jsonl:
//   {"query", "file", "lines": [start, end], "stmt_index", "bindings": {class: name}, "excerpt", "repo"}
struct MatchRecord {
    std::string query;
    std::string repo;
    std::string file;
    int line_start = 0;
    int line_end = 0;
    std::uint32_t stmt_index = 0;
    std::map<int, std::string> bindings;
    std::string excerpt;

    bool operator==(const MatchRecord&) const = default;
};

MatchRecord to_record(const Match& m, std::string repo = {});
nlohmann::json to_json(const MatchRecord& r);
std::string to_jsonl(const MatchRecord& r);
Result<MatchRecord> parse_match_record(std::string_view line);

} // namespace cadet

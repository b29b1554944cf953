#pragma once

#include "cadet/spider.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace cadet {

struct ReportRow {
    std::string query_id;
    std::string origin; // "path:first-last" of the seed, when stats are available
    std::string repo;
    std::string file;
    int line_start = 0;
    int line_end = 0;
    std::map<int, std::string> bindings;
    std::string excerpt;
    std::optional<PopularityBucket> bucket;
};

struct ReportInput {
    std::vector<ReportRow> rows; // sorted by (repo, file, line)
    std::set<std::string> scanned_repos;
    std::map<std::string, PopularityBucket> buckets; // repo id -> bucket
    std::vector<std::string> warnings;
};

// Any of `stats` and `repos` may be null. Malformed lines are skipped and
// reported in `warnings`.
ReportInput load_report_input(std::istream& matches, std::istream* stats = nullptr, std::istream* repos = nullptr);

struct SummaryLine {
    std::string label;
    std::size_t size = 0;      // repositories scanned
    std::size_t analogues = 0; // distinct code locations
    std::size_t matches = 0;   // match records
};

// Not popular, Popular, Very popular, then Unclassified when any repository
// lacks metadata, then Total.
std::vector<SummaryLine> summarize(const ReportInput& in);

std::string render_text(const ReportInput& in);
std::string render_summary(const ReportInput& in);

} // namespace cadet

#pragma once

#include "cadet/match_engine.hpp"
#include "cadet/matcher.hpp"
#include "cadet/result.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace cadet {

enum class SkipReason { ParseError, TooLarge, Binary, Unreadable };

std::string_view to_string(SkipReason r);

struct SkippedFile {
    std::string path;
    SkipReason reason = SkipReason::ParseError;
    std::string detail;
};

struct ScanStats {
    std::string query_id;
    double wall_time_ms = 0.0;
    std::uint64_t nodes_scanned = 0;
    std::uint64_t node_comparisons = 0;
    std::uint64_t candidates_tried = 0;
    std::size_t match_count = 0;
};

struct RepoScanResult {
    std::string repo_id;
    bool ok = true;
    std::string failure;
    std::size_t files_discovered = 0;
    std::size_t files_scanned = 0;
    std::vector<SkippedFile> files_skipped;
    std::vector<Match> matches;
    std::vector<ScanStats> stats; // one per program, in program order
};

struct MineOptions {
    std::vector<std::string> extensions{".php", ".inc", ".phtml"};
    std::uintmax_t max_file_bytes = 2u * 1024u * 1024u;
    ScanOptions scan;
};

// Regular files under `repo` with a matching extension, sorted by path.
// Symlinks are neither followed nor reported, and .git is not entered.
std::vector<std::filesystem::path> discover_files(const std::filesystem::path& repo, const MineOptions& opts = {});

RepoScanResult mine_repository(const std::filesystem::path& repo, std::span<const MatcherProgram> programs,
                               const MineOptions& opts = {});

// Repositories are spread over up to `jobs` worker threads; results come back
// in input order. A missing repository yields a result with ok == false.
std::vector<RepoScanResult> mine_repositories(std::span<const std::filesystem::path> repos,
                                              std::span<const MatcherProgram> programs, unsigned jobs,
                                              const MineOptions& opts = {});

// Newline-delimited outputs of a mining run.
void write_matches(std::ostream& out, std::span<const RepoScanResult> results);
void write_stats(std::ostream& out, std::span<const RepoScanResult> results, std::span<const MatcherProgram> programs);
void write_skipped(std::ostream& out, std::span<const RepoScanResult> results);

// Loads every *.prog (compiled) and *.tmpl (compiled on load) file in `dir`,
// sorted by file name; duplicate query ids are kept once.
Result<std::vector<MatcherProgram>> load_queries(const std::filesystem::path& dir);
Result<MatcherProgram> load_query_file(const std::filesystem::path& file);

// One repository path per line; blank lines and lines starting with # ignored.
// Relative paths resolve against the list file's directory.
Result<std::vector<std::filesystem::path>> read_repo_list(const std::filesystem::path& list_file);

} // namespace cadet

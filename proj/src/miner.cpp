#include "cadet/miner.hpp"

#include "cadet/php_parser.hpp"
#include "cadet/records.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

namespace cadet {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(SkipReason r)
{
    switch (r) {
    case SkipReason::ParseError: return "parse-error";
    case SkipReason::TooLarge: return "too-large";
    case SkipReason::Binary: return "binary";
    case SkipReason::Unreadable: return "unreadable";
    }
    return "unreadable";
}

std::vector<fs::path> discover_files(const fs::path& repo, const MineOptions& opts)
{
    std::vector<fs::path> out;
    std::error_code ec;
    fs::recursive_directory_iterator it(repo, fs::directory_options::skip_permission_denied, ec), end;
    for (; !ec && it != end; it.increment(ec)) {
        const fs::directory_entry& e = *it;
        if (e.is_symlink(ec))
            continue;
        if (e.is_directory(ec)) {
            if (e.path().filename() == ".git")
                it.disable_recursion_pending();
            continue;
        }
        if (!e.is_regular_file(ec))
            continue;
        const std::string ext = e.path().extension().string();
        if (std::find(opts.extensions.begin(), opts.extensions.end(), ext) != opts.extensions.end())
            out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

bool looks_binary(const std::string& bytes)
{
    const std::size_t n = std::min<std::size_t>(bytes.size(), 8192);
    return std::find(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(n), '\0') != bytes.begin() + static_cast<std::ptrdiff_t>(n);
}

double elapsed_ms(std::chrono::steady_clock::time_point since)
{
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

} // namespace

RepoScanResult mine_repository(const fs::path& repo, std::span<const MatcherProgram> programs, const MineOptions& opts)
{
    RepoScanResult r;
    r.repo_id = repo.generic_string();
    for (const MatcherProgram& p : programs) {
        ScanStats s;
        s.query_id = p.query_id;
        r.stats.push_back(std::move(s));
    }
    std::error_code ec;
    if (!fs::is_directory(repo, ec)) {
        r.ok = false;
        r.failure = "repository not found: " + repo.string();
        return r;
    }
    const auto files = discover_files(repo, opts);
    r.files_discovered = files.size();
    // Matches are gathered per program so the output groups by query within
    // a repository while files stay in sorted order inside each group.
    std::vector<std::vector<Match>> per_query(programs.size());
    for (const fs::path& file : files) {
        const std::string rel = fs::relative(file, repo, ec).generic_string();
        const std::string unit_path = (repo / rel).generic_string();
        auto skip = [&](SkipReason why, std::string detail) {
            r.files_skipped.push_back(SkippedFile{unit_path, why, std::move(detail)});
        };
        const auto size = fs::file_size(file, ec);
        if (ec) {
            skip(SkipReason::Unreadable, ec.message());
            continue;
        }
        if (size > opts.max_file_bytes) {
            skip(SkipReason::TooLarge, std::to_string(size) + " bytes");
            continue;
        }
        std::ifstream in(file, std::ios::binary);
        if (!in) {
            skip(SkipReason::Unreadable, "cannot open");
            continue;
        }
        std::ostringstream ss;
        ss << in.rdbuf();
        const std::string bytes = ss.str();
        if (looks_binary(bytes)) {
            skip(SkipReason::Binary, "NUL byte in the first 8 KiB");
            continue;
        }
        auto unit = parse_source(bytes, unit_path);
        if (!unit.ok()) {
            skip(SkipReason::ParseError, unit.error().describe());
            continue;
        }
        ++r.files_scanned;
        for (std::size_t q = 0; q < programs.size(); ++q) {
            const auto t0 = std::chrono::steady_clock::now();
            ScanResult sr = scan_unit(programs[q], *unit, opts.scan);
            ScanStats& st = r.stats[q];
            st.wall_time_ms += elapsed_ms(t0);
            st.nodes_scanned += unit->node_count();
            st.node_comparisons += sr.counter.node_comparisons;
            st.candidates_tried += sr.counter.candidates_tried;
            st.match_count += sr.matches.size();
            for (Match& m : sr.matches) {
                attach_excerpt(m, *unit);
                per_query[q].push_back(std::move(m));
            }
        }
    }
    for (auto& group : per_query) {
        for (Match& m : group)
            r.matches.push_back(std::move(m));
    }
    return r;
}

std::vector<RepoScanResult> mine_repositories(std::span<const fs::path> repos, std::span<const MatcherProgram> programs,
                                              unsigned jobs, const MineOptions& opts)
{
    std::vector<RepoScanResult> results(repos.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < repos.size(); i = next++)
            results[i] = mine_repository(repos[i], programs, opts);
    };
    const unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(repos.size())));
    std::vector<std::thread> pool;
    for (unsigned i = 1; i < n; ++i)
        pool.emplace_back(worker);
    worker();
    for (auto& t : pool)
        t.join();
    return results;
}

void write_matches(std::ostream& out, std::span<const RepoScanResult> results)
{
    for (const RepoScanResult& r : results) {
        for (const Match& m : r.matches)
            out << to_jsonl(to_record(m, r.repo_id)) << '\n';
    }
}

void write_stats(std::ostream& out, std::span<const RepoScanResult> results, std::span<const MatcherProgram> programs)
{
    for (const RepoScanResult& r : results) {
        for (std::size_t q = 0; q < r.stats.size(); ++q) {
            const ScanStats& s = r.stats[q];
            json rec{
                {"repo", r.repo_id},
                {"query", s.query_id},
                {"wall_time_ms", s.wall_time_ms},
                {"files_scanned", r.files_scanned},
                {"nodes", s.nodes_scanned},
                {"comparisons", s.node_comparisons},
                {"candidates", s.candidates_tried},
                {"matches", s.match_count},
            };
            if (q < programs.size()) {
                const SeedOrigin& o = programs[q].origin;
                rec["origin"] = {{"path", o.path}, {"lines", {o.first_line, o.last_line}}};
            }
            if (!r.ok)
                rec["failure"] = r.failure;
            out << rec.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
        }
    }
}

void write_skipped(std::ostream& out, std::span<const RepoScanResult> results)
{
    for (const RepoScanResult& r : results) {
        if (!r.ok)
            out << json{{"repo", r.repo_id}, {"file", nullptr}, {"reason", "repo-failed"}, {"detail", r.failure}}.dump() << '\n';
        for (const SkippedFile& s : r.files_skipped) {
            out << json{{"repo", r.repo_id}, {"file", s.path}, {"reason", to_string(s.reason)}, {"detail", s.detail}}.dump(
                       -1, ' ', false, json::error_handler_t::replace)
                << '\n';
        }
    }
}

Result<MatcherProgram> load_query_file(const fs::path& file)
{
    std::ifstream in(file, std::ios::binary);
    if (!in)
        return make_error(ErrorCode::IoError, "cannot read " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (file.extension() == ".tmpl") {
        auto t = deserialize_template(ss.str());
        if (!t.ok())
            return t.error();
        return compile(*t);
    }
    return deserialize_program(ss.str());
}

Result<std::vector<MatcherProgram>> load_queries(const fs::path& dir)
{
    std::error_code ec;
    if (fs::is_regular_file(dir, ec)) {
        auto p = load_query_file(dir);
        if (!p.ok())
            return p.error();
        return std::vector<MatcherProgram>{std::move(*p)};
    }
    if (!fs::is_directory(dir, ec))
        return make_error(ErrorCode::IoError, "query directory not found: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir, ec)) {
        const auto ext = e.path().extension();
        if (e.is_regular_file() && (ext == ".prog" || ext == ".tmpl"))
            files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<MatcherProgram> out;
    std::set<std::string> seen;
    for (const fs::path& f : files) {
        auto p = load_query_file(f);
        if (!p.ok()) {
            Error e = p.error();
            e.message = f.filename().string() + ": " + e.message;
            return e;
        }
        if (seen.insert(p->query_id).second)
            out.push_back(std::move(*p));
    }
    return out;
}

Result<std::vector<fs::path>> read_repo_list(const fs::path& list_file)
{
    std::ifstream in(list_file);
    if (!in)
        return make_error(ErrorCode::IoError, "cannot read repository list " + list_file.string());
    std::vector<fs::path> out;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
            line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#')
            continue;
        fs::path p = line.substr(first);
        out.push_back(p.is_relative() ? list_file.parent_path() / p : p);
    }
    return out;
}

} // namespace cadet

// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include "cadet/corpus_gen.hpp"
#include "cadet/match_engine.hpp"
#include "cadet/miner.hpp"
#include "cadet/php_parser.hpp"
#include "cadet/records.hpp"

#include "mock_hub.hpp"
#include "support.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <sys/wait.h>

using namespace cadet;
using namespace cadet::testing;
namespace fs = std::filesystem;
using namespace std::chrono_literals;

namespace {

struct Check {
    bool ok = true;
    std::vector<std::string> notes;

    void expect(bool cond, const std::string& what)
    {
        if (!cond) {
            ok = false;
            notes.push_back(what);
        }
    }
    void note(const std::string& what) { notes.push_back(what); }
};

int failures = 0;

void criterion(int id, const std::string& title, double limit_s, const std::function<void(Check&)>& body)
{
    Check c;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(c);
    } catch (const std::exception& e) {
        c.expect(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (limit_s > 0 && secs >= limit_s)
        c.expect(false, "took " + std::to_string(secs) + " s, limit " + std::to_string(limit_s) + " s");
    char timing[32];
    std::snprintf(timing, sizeof timing, "%.3f s", secs);
    std::cout << (c.ok ? "PASS" : "FAIL") << "  " << id << "  " << title << "  (" << timing << ")";
    for (const std::string& n : c.notes)
        std::cout << "; " << n;
    std::cout << std::endl;
    failures += !c.ok;
}

std::vector<Match> sorted(std::vector<Match> v)
{
    std::sort(v.begin(), v.end(), [](const Match& a, const Match& b) {
        return std::tie(a.stmt_list, a.start_index, a.query_id) < std::tie(b.stmt_list, b.start_index, b.query_id);
    });
    return v;
}

int run_cli(const std::string& args)
{
    const int status = std::system((std::string(CADET_CLI) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* const kSqli = "$id = $_GET['id'];\n$res = mysql_query(\"SELECT * FROM t WHERE id = '$id'\");\n";
const char* const kXss = "echo $row['title'];\necho $row['body'];\n";
const char* const kPath = "include($_GET['page'] . '.php');\n";

void tutorial(Check& c)
{
    const SourceUnit unit = parse_fixture("fig2_tutorial.php");
    for (auto [first, last] : {std::pair{5, 6}, std::pair{11, 12}}) {
        const auto m = scan_unit(compile(derive_lines(unit, first, last)), unit).matches;
        c.expect(m.size() == 1, "lines " + std::to_string(first) + "-" + std::to_string(last) + ": " + std::to_string(m.size()) +
                                    " matches");
        if (m.size() == 1)
            c.expect(m[0].line_start == first && m[0].line_end == last, "match at wrong lines");
    }
}

void analogues(Check& c)
{
    const SourceUnit seed = parse_fixture("fig4_sqlinj.php");
    const auto wild = compile(derive_lines(seed, 4, 6, SymbolPolicy::Wildcard));
    const auto keep = compile(derive_lines(seed, 4, 6, SymbolPolicy::Preserve));
    const char* names[] = {"fig7_analogue1.php", "fig7_analogue2.php", "fig7_analogue3.php"};
    const std::size_t preserve_expected[] = {1, 0, 1}; // analogue 2 is the fopen one
    for (int i = 0; i < 3; ++i) {
        const SourceUnit t = parse_fixture(names[i]);
        const auto w = scan_unit(wild, t).matches.size();
        const auto p = scan_unit(keep, t).matches.size();
        c.expect(w == 1, std::string(names[i]) + " wildcard: " + std::to_string(w));
        c.expect(p == preserve_expected[i], std::string(names[i]) + " preserve: " + std::to_string(p));
    }
}

void normalization(Check& c)
{
    const auto m = scan_unit(compile(derive_all(parse_fixture("normalization_seed.php"))), parse_fixture("normalization_target.php"));
    c.expect(m.matches.size() == 1, std::to_string(m.matches.size()) + " matches");
}

void oracle(Check& c)
{
    PhpGenerator gen(20240501);
    const int cases = 600;
    std::size_t total = 0, disagreements = 0;
    for (int i = 0; i < cases; ++i) {
        const RandomCase rc = make_random_case(gen);
        const auto prog = compile(rc.tmpl);
        const auto expected = sorted(brute_force_scan(rc.tmpl, rc.target));
        for (bool pruning : {true, false}) {
            ScanOptions opts;
            opts.depth_pruning = pruning;
            if (sorted(scan_unit(prog, rc.target, opts).matches) != expected)
                ++disagreements;
        }
        total += expected.size();
    }
    c.expect(disagreements == 0, std::to_string(disagreements) + " disagreeing runs");
    c.note(std::to_string(cases) + " pairs x 2 pruning settings, " + std::to_string(total) + " oracle matches");
}

void ledger(Check& c)
{
    TempDir dir("cadet-accept");
    CorpusSpec spec;
    spec.seeds = {{"sqli", kSqli}, {"xss", kXss}, {"path", kPath}};
    spec.repo_count = 40;
    spec.mutations = {Mutation::Replica, Mutation::Rename, Mutation::LiteralChange, Mutation::InsertAround,
                      Mutation::InsertBetween, Mutation::BreakDataflow};
    spec.rng_seed = 77;
    auto corpus = generate_test_corpus(dir.path(), spec);
    if (!corpus.ok()) {
        c.expect(false, corpus.error().describe());
        return;
    }
    std::vector<MatcherProgram> progs;
    for (const Template& t : corpus->templates)
        progs.push_back(compile(t));
    std::vector<fs::path> repos;
    for (const std::string& r : corpus->repos)
        repos.push_back(dir.path() / r);
    const auto results = mine_repositories(repos, progs, 4);

    std::map<std::string, std::size_t> query_index;
    for (std::size_t q = 0; q < progs.size(); ++q)
        query_index[progs[q].query_id] = q;
    std::set<std::tuple<std::size_t, std::string, std::string, int>> found;
    for (const RepoScanResult& r : results) {
        const std::string repo = fs::path(r.repo_id).filename().string();
        for (const Match& m : r.matches)
            found.emplace(query_index.at(m.query_id), repo, fs::relative(m.unit_path, dir.path() / repo).generic_string(), m.line_start);
    }
    std::map<Mutation, std::pair<std::size_t, std::size_t>> tally; // planted, found
    std::size_t expected = 0;
    for (const PlantRecord& p : corpus->plants) {
        const bool hit = found.count({p.seed_index, p.repo, p.file, p.line_start}) > 0;
        auto& [planted, got] = tally[p.mutation];
        ++planted;
        got += hit;
        expected += p.expect_match;
    }
    for (const auto& [m, counts] : tally) {
        const auto [planted, got] = counts;
        if (preserves_match(m))
            c.expect(got == planted, std::string(to_string(m)) + " recall " + std::to_string(got) + "/" + std::to_string(planted));
        else
            c.expect(got == 0, std::string(to_string(m)) + " found " + std::to_string(got) + "/" + std::to_string(planted));
        c.note(std::string(to_string(m)) + " " + std::to_string(got) + "/" + std::to_string(planted));
    }
    c.expect(tally[Mutation::BreakDataflow].first > 0 && tally[Mutation::InsertBetween].first > 0, "no negative plants generated");
    c.expect(found.size() == expected, "found " + std::to_string(found.size()) + " matches, ledger expects " + std::to_string(expected));
}

void complexity(Check& c)
{
    const SourceUnit seed = parse_text(std::string("<?php\n") + kSqli + "$row = mysql_fetch_array($res);\n");
    const Template t = derive_all(seed);
    const auto prog = compile(t);
    const std::size_t n = t.nodes.size();
    c.note("N = " + std::to_string(n));
    c.expect(n >= 15 && n <= 25, "seed is not about 20 nodes");

    std::uint64_t counts[2] = {0, 0};
    std::size_t sizes[2] = {0, 0};
    const std::size_t targets[2] = {10'000, 100'000};
    for (int i = 0; i < 2; ++i) {
        PhpGenerator gen(900 + i);
        auto unit = parse_source(generate_sized_file(gen, targets[i]), "target.php");
        if (!unit.ok()) {
            c.expect(false, unit.error().describe());
            return;
        }
        sizes[i] = unit->node_count();
        counts[i] = scan_unit(prog, *unit).counter.node_comparisons;
        c.expect(counts[i] <= 5 * n * sizes[i], "comparisons exceed 5*N*M at M = " + std::to_string(sizes[i]));
        c.note("M = " + std::to_string(sizes[i]) + ": " + std::to_string(counts[i]) + " comparisons");
    }
    const double ratio = static_cast<double>(counts[1]) / static_cast<double>(counts[0]);
    c.expect(ratio >= 8.0 && ratio <= 12.0, "ratio outside 10 +/- 2");
    char buf[48];
    std::snprintf(buf, sizeof buf, "ratio %.2f", ratio);
    c.note(buf);
}

void runtime(Check& c)
{
    TempDir dir("cadet-accept");
    PhpGenerator gen(31337);
    std::size_t loc = 0;
    int file = 0;
    while (loc < 1000) {
        std::string text = "<?php\n" + gen.statements(40, 0, 0);
        loc += static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
        fs::create_directories(dir.path() / "project" / "src");
        std::ofstream(dir.path() / "project" / "src" / ("file" + std::to_string(file++) + ".php")) << text;
    }
    std::vector<MatcherProgram> progs;
    std::set<std::string> ids;
    PhpGenerator seeds(4711);
    while (progs.size() < 20) {
        const int count = seeds.uniform(1, 3);
        auto unit = parse_source("<?php\n" + seeds.statements(count, 1, 0), "seed.php");
        if (!unit.ok() || whole_unit(*unit).statements.empty())
            continue;
        auto t = derive_template(*unit, whole_unit(*unit).statements, QueryMode::Normal,
                                 progs.size() % 2 ? SymbolPolicy::Wildcard : SymbolPolicy::Preserve);
        if (t.ok() && ids.insert(query_id_of(*t)).second)
            progs.push_back(compile(*t));
    }
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = mine_repository(dir.path() / "project", progs);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    c.expect(r.ok && r.files_skipped.empty(), "project did not scan cleanly");
    c.expect(secs < 5.0, "scan took " + std::to_string(secs) + " s");
    char buf[96];
    std::snprintf(buf, sizeof buf, "%zu LOC in %d files, 20 queries, %zu matches, scan %.3f s", loc, file, r.matches.size(), secs);
    c.note(buf);
}

void spider(Check& c)
{
    // buckets and size filter
    c.expect(classify(3) == PopularityBucket::NotPopular && classify(4) == PopularityBucket::Popular &&
                 classify(9) == PopularityBucket::Popular && classify(10) == PopularityBucket::VeryPopular,
             "bucket boundaries");
    RepoMeta at, below;
    at.language = below.language = "PHP";
    at.size_kb = 3072;
    below.size_kb = 3071;
    c.expect(filter_candidates({at, below}, "php").size() == 1, "size filter not strict at 3072");

    // the same boundaries through the mock listing
    {
        MockHubConfig cfg;
        cfg.total_repos = 8;
        const std::int64_t stars[] = {3, 4, 9, 10, 0, 3, 4, 10};
        const std::int64_t sizes[] = {10, 10, 10, 10, 3072, 3071, 5000, 2048};
        cfg.stars = [&](int i) { return stars[i]; };
        cfg.size_kb = [&](int i) { return sizes[i]; };
        cfg.language = [](int) { return std::string("PHP"); };
        SimulatedClock clock;
        MockHub hub(cfg, &clock);
        HttplibClient http;
        RateBudget budget(clock);
        SpiderConfig sc;
        sc.api_base = hub.base();
        sc.token = "t";
        auto page = enumerate_repos(sc, http, budget, {});
        if (!page.ok()) {
            c.expect(false, page.error().describe());
            return;
        }
        const auto kept = filter_candidates(page->repos, "php");
        std::vector<PopularityBucket> got;
        for (const RepoMeta& m : kept)
            got.push_back(classify(m));
        const std::vector<PopularityBucket> want{PopularityBucket::NotPopular, PopularityBucket::Popular,
                                                 PopularityBucket::Popular,    PopularityBucket::VeryPopular,
                                                 PopularityBucket::NotPopular, PopularityBucket::VeryPopular};
        c.expect(got == want, "mock listing buckets or size filter wrong");
    }

    // 5001 requests against the mock on a simulated clock
    {
        MockHubConfig cfg;
        cfg.total_repos = 5001;
        cfg.per_page = 1;
        SimulatedClock clock;
        const auto start = clock.now();
        MockHub hub(cfg, &clock);
        HttplibClient http;
        RateBudget budget(clock); // default 720 ms pacing
        SpiderConfig sc;
        sc.api_base = hub.base();
        sc.token = "t";
        sc.initial_path = "/search/repositories?q=language:{language}&per_page=1";
        Cursor cursor;
        while (!cursor.done) {
            auto page = enumerate_repos(sc, http, budget, cursor);
            if (!page.ok()) {
                c.expect(false, page.error().describe());
                return;
            }
            cursor = page->next;
        }
        const auto log = hub.requests();
        c.expect(log.size() == 5001, std::to_string(log.size()) + " requests");
        std::size_t lo = 0, worst = 0;
        for (std::size_t hi = 0; hi < log.size(); ++hi) {
            while (log[hi].at - log[lo].at >= 3600s)
                ++lo;
            worst = std::max(worst, hi - lo + 1);
        }
        c.expect(worst <= 5000, "busiest hour held " + std::to_string(worst) + " requests");
        c.expect(log.size() == 5001 && log[5000].at == start + 3600s, "5001st request not at the window reset");
    }
    {
        // same with pacing off: 5000 in the first instant, then a wait for the full window
        SimulatedClock clock;
        const auto start = clock.now();
        RateBudgetConfig cfg;
        cfg.min_interval = 0ms;
        RateBudget budget(clock, cfg);
        Clock::time_point last;
        for (int i = 0; i < 5000; ++i)
            last = budget.acquire();
        c.expect(last == start, "unpaced burst was delayed");
        c.expect(budget.acquire() == start + 3600s, "unpaced 5001st not at the window reset");
    }

    // resume from a persisted cursor
    {
        TempDir dir("cadet-accept");
        SimulatedClock clock;
        MockHub hub({}, &clock);
        SpiderConfig sc;
        sc.api_base = hub.base();
        sc.token = "t";
        const fs::path state = dir.path() / "cursor.json";
        std::vector<std::string> names;
        for (int run = 0; run < 3; ++run) {
            HttplibClient http;
            RateBudget budget(clock);
            auto cursor = load_cursor(state);
            if (!cursor.ok() || cursor->done)
                break;
            auto page = enumerate_repos(sc, http, budget, *cursor);
            if (!page.ok())
                break;
            for (const RepoMeta& m : page->repos)
                names.push_back(m.full_name);
            save_cursor(state, page->next);
        }
        const std::set<std::string> unique(names.begin(), names.end());
        c.expect(names.size() == 300 && unique.size() == 300, "resume emitted " + std::to_string(names.size()) + " records, " +
                                                                   std::to_string(unique.size()) + " distinct");
    }
}

void determinism(Check& c)
{
    TempDir dir("cadet-accept");
    CorpusSpec spec;
    spec.seeds = {{"sqli", kSqli}, {"xss", kXss}, {"path", kPath}};
    spec.repo_count = 24;
    spec.mutations = {Mutation::Rename, Mutation::LiteralChange, Mutation::InsertAround, Mutation::Replica};
    spec.broken_files = true;
    spec.rng_seed = 99;
    auto corpus = generate_test_corpus(dir.path() / "corpus", spec);
    if (!corpus.ok()) {
        c.expect(false, corpus.error().describe());
        return;
    }
    fs::create_directories(dir.path() / "queries");
    for (const Template& t : corpus->templates)
        std::ofstream(dir.path() / "queries" / (query_id_of(t) + ".prog")) << serialize_program(compile(t));
    const std::string common = "mine --repos '" + (dir.path() / "corpus").string() + "' --queries '" + (dir.path() / "queries").string() + "'";
    c.expect(run_cli(common + " --jobs 1 --out '" + (dir.path() / "one").string() + "'") == 0, "mine --jobs 1 failed");
    c.expect(run_cli(common + " --jobs 8 --out '" + (dir.path() / "eight").string() + "'") == 0, "mine --jobs 8 failed");
    const std::string one = read_file(dir.path() / "one" / "matches.jsonl");
    const std::string eight = read_file(dir.path() / "eight" / "matches.jsonl");
    const auto lines = static_cast<std::size_t>(std::count(one.begin(), one.end(), '\n'));
    c.expect(!one.empty(), "no matches to compare");
    c.expect(one == eight, "matches.jsonl differs between job counts");
    c.expect(lines == corpus->expected_matches(), "match count differs from the ledger");
    c.note(std::to_string(lines) + " records, byte-identical");
}

} // namespace

int main()
{
    criterion(1, "tutorial SQLi and XSS strict queries match once at their lines", 1.0, tutorial);
    criterion(2, "wildcard query finds all three analogues, preserve skips fopen", 1.0, analogues);
    criterion(3, "normalized literal matches the benign snippet", 0, normalization);
    criterion(4, "compiled engine agrees with the brute-force oracle", 60.0, oracle);
    criterion(5, "plant ledger recall and data-flow/gap rejection", 0, ledger);
    criterion(6, "comparison count linear in target size", 0, complexity);
    criterion(7, "1,000-LOC project with 20 queries", 5.0, runtime);
    criterion(8, "spider against the mock server on a simulated clock", 10.0, spider);
    criterion(9, "mine output identical for --jobs 1 and --jobs 8", 0, determinism);
    return failures == 0 ? 0 : 1;
}

#include "cadet/ast_io.hpp"
#include "cadet/matcher.hpp"
#include "cadet/miner.hpp"
#include "cadet/php_parser.hpp"
#include "cadet/php_printer.hpp"
#include "cadet/records.hpp"
#include "cadet/report.hpp"
#include "cadet/spider.hpp"
#include "cadet/template.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

using namespace cadet;
namespace fs = std::filesystem;

namespace {

constexpr int kFailure = 1;

struct Failure {
    std::string message;
};

[[noreturn]] void fail(const std::string& message)
{
    throw Failure{message};
}

template <typename T>
T take(Result<T> r, const std::string& context)
{
    if (!r.ok())
        fail(context + ": " + r.error().describe());
    return std::move(*r);
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in)
        fail("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spill(const fs::path& p, const std::string& text)
{
    if (p.has_parent_path())
        fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out)
        fail("cannot write " + p.string());
}

// "-" or empty means stdout.
void emit(const std::string& dest, const std::string& text)
{
    if (dest.empty() || dest == "-")
        std::cout << text;
    else
        spill(dest, text);
}

std::pair<int, int> parse_line_range(const std::string& text)
{
    const auto colon = text.find(':');
    try {
        if (colon == std::string::npos) {
            const int n = std::stoi(text);
            return {n, n};
        }
        return {std::stoi(text.substr(0, colon)), std::stoi(text.substr(colon + 1))};
    } catch (const std::exception&) {
        fail("--lines expects a:b, got " + text);
    }
}

SourceUnit parse_file(const std::string& path)
{
    return take(parse_source(slurp(path), path), path);
}

struct DeriveArgs {
    std::string snippet;
    std::string lines;
    bool full = false;
    std::string mode;
    std::string symbols = "preserve";
    std::string out;
};

Template derive(const DeriveArgs& a)
{
    const SourceUnit unit = parse_file(a.snippet);
    StatementSlice slice;
    QueryMode mode = QueryMode::Normal;
    if (!a.lines.empty()) {
        auto [first, last] = parse_line_range(a.lines);
        slice = take(slice_statements(unit, first, last), a.snippet + ":" + a.lines);
        mode = QueryMode::Strict;
    } else {
        slice = whole_unit(unit);
    }
    if (!a.mode.empty()) {
        auto m = query_mode_from(a.mode);
        if (!m)
            fail("unknown mode " + a.mode);
        mode = *m;
    }
    auto policy = symbol_policy_from(a.symbols);
    if (!policy)
        fail("unknown symbol policy " + a.symbols);
    return take(derive_template(unit, slice.statements, mode, *policy), a.snippet);
}

MatcherProgram load_template_program(const std::string& path)
{
    return take(load_query_file(path), path);
}

fs::path write_program(const MatcherProgram& p, const fs::path& dir)
{
    const fs::path out = dir / (p.query_id + ".prog");
    spill(out, serialize_program(p));
    return out;
}

// A list file, or a directory whose subdirectories are the repositories.
std::vector<fs::path> resolve_repos(const std::vector<std::string>& args)
{
    std::vector<fs::path> repos;
    for (const std::string& a : args) {
        std::error_code ec;
        if (fs::is_directory(a, ec)) {
            std::vector<fs::path> subs;
            for (const auto& e : fs::directory_iterator(a)) {
                const std::string name = e.path().filename().string();
                if (e.is_directory() && !e.is_symlink() && !name.empty() && name[0] != '.')
                    subs.push_back(e.path());
            }
            std::sort(subs.begin(), subs.end());
            repos.insert(repos.end(), subs.begin(), subs.end());
        } else {
            auto listed = take(read_repo_list(a), a);
            repos.insert(repos.end(), listed.begin(), listed.end());
        }
    }
    return repos;
}

struct MineArgs {
    std::vector<std::string> repos;
    std::string queries;
    unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
    std::string out = "out";
    bool no_pruning = false;
    bool exact_arity = false;
    bool injective = false;
    std::uintmax_t max_file_kb = 2048;
};

MineOptions mine_options(const MineArgs& a)
{
    MineOptions opts;
    opts.scan.depth_pruning = !a.no_pruning;
    opts.scan.match.exact_arity = a.exact_arity;
    opts.scan.match.injective = a.injective;
    opts.max_file_bytes = a.max_file_kb * 1024;
    return opts;
}

std::size_t mine(const std::vector<fs::path>& repos, const std::vector<MatcherProgram>& programs, const MineArgs& a)
{
    const auto results = mine_repositories(repos, programs, a.jobs, mine_options(a));
    fs::create_directories(a.out);
    std::ofstream matches(fs::path(a.out) / "matches.jsonl", std::ios::trunc);
    std::ofstream stats(fs::path(a.out) / "stats.jsonl", std::ios::trunc);
    std::ofstream skipped(fs::path(a.out) / "skipped.jsonl", std::ios::trunc);
    write_matches(matches, results);
    write_stats(stats, results, programs);
    write_skipped(skipped, results);
    if (!matches || !stats || !skipped)
        fail("cannot write results under " + a.out);
    std::size_t total = 0, failed = 0, skips = 0;
    for (const RepoScanResult& r : results) {
        total += r.matches.size();
        failed += !r.ok;
        skips += r.files_skipped.size();
        if (!r.ok)
            std::cerr << "warning: " << r.repo_id << ": " << r.failure << '\n';
    }
    std::cerr << repos.size() << " repositories, " << programs.size() << " queries, " << total << " matches";
    if (skips)
        std::cerr << ", " << skips << " files skipped";
    if (failed)
        std::cerr << ", " << failed << " repositories failed";
    std::cerr << '\n';
    return total;
}

struct ReportArgs {
    std::string matches;
    std::string stats;
    std::string repos;
    std::string format = "text";
    std::string out;
};

std::string report(const ReportArgs& a)
{
    std::ifstream matches(a.matches);
    if (!matches)
        fail("cannot read " + a.matches);
    std::ifstream stats, repos;
    if (!a.stats.empty()) {
        stats.open(a.stats);
        if (!stats)
            fail("cannot read " + a.stats);
    }
    if (!a.repos.empty()) {
        repos.open(a.repos);
        if (!repos)
            fail("cannot read " + a.repos);
    }
    const ReportInput in = load_report_input(matches, a.stats.empty() ? nullptr : &stats, a.repos.empty() ? nullptr : &repos);
    for (const std::string& w : in.warnings)
        std::cerr << "warning: " << w << '\n';
    if (a.format == "summary")
        return render_summary(in);
    if (a.format == "text")
        return render_text(in);
    fail("unknown report format " + a.format);
}

struct SpiderArgs {
    std::string language = "php";
    std::int64_t max_size_kb = kDefaultMaxSizeKb;
    std::string buckets = "all";
    std::string out = "repos.jsonl";
    std::string download;
    std::string api_base = "https://api.github.com";
    std::string state;
    std::string strategy = "archive";
    std::size_t max_pages = 0;
    int min_interval_ms = 720;
    unsigned download_jobs = 2;
};

void spider(const SpiderArgs& a)
{
    std::vector<PopularityBucket> wanted;
    if (a.buckets == "all") {
        wanted = {PopularityBucket::NotPopular, PopularityBucket::Popular, PopularityBucket::VeryPopular};
    } else {
        std::stringstream list(a.buckets);
        std::string item;
        while (std::getline(list, item, ',')) {
            auto b = bucket_from(item);
            if (!b)
                fail("unknown bucket " + item);
            wanted.push_back(*b);
        }
    }
    DownloadStrategy strategy = DownloadStrategy::Archive;
    if (a.strategy == "clone")
        strategy = DownloadStrategy::Clone;
    else if (a.strategy != "archive")
        fail("unknown download strategy " + a.strategy);

    SpiderConfig config;
    config.api_base = a.api_base;
    config.language = a.language;
    if (const char* token = std::getenv("GITHUB_TOKEN"))
        config.token = token;
    if (auto bad = validate_token(config.token))
        fail(bad->describe());
    if (config.token.empty())
        std::cerr << "warning: GITHUB_TOKEN is not set; requests are unauthenticated\n";

    SystemClock clock;
    RateBudgetConfig budget_config;
    budget_config.min_interval = std::chrono::milliseconds(a.min_interval_ms);
    RateBudget budget(clock, budget_config);
    HttplibClient http;

    Cursor cursor;
    if (!a.state.empty())
        cursor = take(load_cursor(a.state), a.state);
    const bool resuming = cursor.pages > 0;
    if (fs::path(a.out).has_parent_path())
        fs::create_directories(fs::path(a.out).parent_path());
    std::ofstream out(a.out, resuming ? std::ios::app : std::ios::trunc);
    if (!out)
        fail("cannot write " + a.out);
    std::ofstream failures;
    if (!a.download.empty()) {
        fs::create_directories(a.download);
        failures.open(fs::path(a.download) / "failures.jsonl", std::ios::app);
    }

    std::size_t pages = 0, kept = 0;
    while (!cursor.done && (a.max_pages == 0 || pages < a.max_pages)) {
        Page page = take(enumerate_repos(config, http, budget, cursor), "enumeration");
        for (const std::string& w : page.warnings)
            std::cerr << "warning: " << w << '\n';
        std::vector<RepoMeta> selected;
        for (RepoMeta& m : filter_candidates(page.repos, a.language, a.max_size_kb)) {
            if (std::find(wanted.begin(), wanted.end(), classify(m)) != wanted.end())
                selected.push_back(std::move(m));
        }
        if (!a.download.empty()) {
            std::atomic<std::size_t> next{0};
            std::mutex mu;
            auto worker = [&] {
                for (std::size_t i = next++; i < selected.size(); i = next++) {
                    auto got = download_repo(selected[i], a.download, strategy, config, http, budget);
                    if (got.ok())
                        continue;
                    std::lock_guard lock(mu);
                    std::cerr << "warning: " << selected[i].full_name << ": " << got.error().message << '\n';
                    failures << nlohmann::json{{"full_name", selected[i].full_name},
                                               {"error", to_string(got.error().code)},
                                               {"detail", got.error().message}}
                                    .dump()
                             << '\n';
                }
            };
            std::vector<std::thread> pool;
            for (unsigned j = 0; j < std::max(1u, a.download_jobs); ++j)
                pool.emplace_back(worker);
            for (std::thread& t : pool)
                t.join();
        }
        for (const RepoMeta& m : selected)
            out << repo_meta_to_json(m) << '\n';
        out.flush();
        kept += selected.size();
        cursor = page.next;
        ++pages;
        if (!a.state.empty()) {
            if (auto err = save_cursor(a.state, cursor))
                fail(err->describe());
        }
    }
    std::cerr << pages << " pages, " << kept << " repositories kept, " << budget.total_issued() << " requests\n";
}

struct PipelineArgs {
    std::string seed;
    std::string corpus;
    std::string lines;
    std::string symbols = "preserve";
    std::string out = "pipeline-out";
    unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
    std::string format = "text";
};

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Mines PHP code for analogues of vulnerable snippets"};
    app.require_subcommand(1);
    app.set_config("--config", "", "TOML file with option defaults, one [section] per subcommand");

    auto* ast = app.add_subcommand("ast", "AST interchange");
    ast->require_subcommand(1);
    std::string ast_in, ast_out;
    bool ast_php = false;
    auto* ast_export = ast->add_subcommand("export", "Parse PHP and write the AST interchange");
    ast_export->add_option("file", ast_in, "PHP source")->required();
    ast_export->add_option("-o,--out", ast_out, "output file (default stdout)");
    auto* ast_import = ast->add_subcommand("import", "Validate an AST interchange stream and write it back");
    ast_import->add_option("file", ast_in, "interchange file")->required();
    ast_import->add_option("-o,--out", ast_out, "output file (default stdout)");
    ast_import->add_flag("--php", ast_php, "render PHP source instead");

    DeriveArgs derive_args;
    auto* derive_cmd = app.add_subcommand("derive", "Derive a query template from a vulnerable snippet");
    derive_cmd->add_option("snippet", derive_args.snippet, "PHP snippet")->required();
    auto* lines_opt = derive_cmd->add_option("--lines", derive_args.lines, "statement slice a:b (strict query)");
    auto* full_opt = derive_cmd->add_flag("--full", derive_args.full, "whole file (normal query)");
    lines_opt->excludes(full_opt);
    derive_cmd->add_option("--mode", derive_args.mode, "normal|strict");
    derive_cmd->add_option("--symbols", derive_args.symbols, "preserve|wildcard");
    derive_cmd->add_option("-o,--out", derive_args.out, "template file (default stdout)");

    std::string compile_in, compile_dir = ".", compile_script;
    auto* compile_cmd = app.add_subcommand("compile", "Compile a template into a matcher program");
    compile_cmd->add_option("template", compile_in, "template file")->required();
    compile_cmd->add_option("--out-dir", compile_dir, "directory for <query_id>.prog");
    compile_cmd->add_option("--emit-script", compile_script, "also write the traversal script here");

    std::string scan_query;
    std::vector<std::string> scan_files;
    MineArgs scan_args;
    auto* scan_cmd = app.add_subcommand("scan", "Scan PHP files with one query");
    scan_cmd->add_option("query", scan_query, ".tmpl or .prog file")->required();
    scan_cmd->add_option("files", scan_files, "PHP files")->required();
    scan_cmd->add_flag("--no-pruning", scan_args.no_pruning);
    scan_cmd->add_flag("--exact-arity", scan_args.exact_arity);
    scan_cmd->add_flag("--injective", scan_args.injective);

    MineArgs mine_args;
    auto* mine_cmd = app.add_subcommand("mine", "Scan many repositories with many queries");
    mine_cmd->add_option("--repos", mine_args.repos, "repository list file or corpus directory")->required();
    mine_cmd->add_option("--queries", mine_args.queries, "query directory or file")->required();
    mine_cmd->add_option("--jobs", mine_args.jobs)->check(CLI::PositiveNumber);
    mine_cmd->add_option("--out", mine_args.out, "output directory");
    mine_cmd->add_option("--max-file-kb", mine_args.max_file_kb);
    mine_cmd->add_flag("--no-pruning", mine_args.no_pruning);
    mine_cmd->add_flag("--exact-arity", mine_args.exact_arity);
    mine_cmd->add_flag("--injective", mine_args.injective);

    SpiderArgs spider_args;
    auto* spider_cmd = app.add_subcommand("spider", "Enumerate and download repositories (token in GITHUB_TOKEN)");
    spider_cmd->add_option("--language", spider_args.language);
    spider_cmd->add_option("--max-size-kb", spider_args.max_size_kb);
    spider_cmd->add_option("--buckets", spider_args.buckets, "all or a comma list of not-popular,popular,very-popular");
    spider_cmd->add_option("--out", spider_args.out);
    spider_cmd->add_option("--download", spider_args.download, "download selected repositories here");
    spider_cmd->add_option("--api-base", spider_args.api_base);
    spider_cmd->add_option("--state", spider_args.state, "resumable cursor file");
    spider_cmd->add_option("--strategy", spider_args.strategy, "archive|clone");
    spider_cmd->add_option("--max-pages", spider_args.max_pages, "0 = no limit");
    spider_cmd->add_option("--min-interval-ms", spider_args.min_interval_ms);
    spider_cmd->add_option("--download-jobs", spider_args.download_jobs);

    ReportArgs report_args;
    auto* report_cmd = app.add_subcommand("report", "Render mining results for review");
    report_cmd->add_option("matches", report_args.matches, "matches.jsonl")->required();
    report_cmd->add_option("--stats", report_args.stats, "stats.jsonl");
    report_cmd->add_option("--repos", report_args.repos, "repos.jsonl from spider");
    report_cmd->add_option("--format", report_args.format, "text|summary");
    report_cmd->add_option("-o,--out", report_args.out);

    PipelineArgs pipe;
    auto* pipeline_cmd = app.add_subcommand("pipeline", "derive, compile, mine and report in one go");
    pipeline_cmd->add_option("seed", pipe.seed)->required();
    pipeline_cmd->add_option("corpus", pipe.corpus, "corpus directory")->required();
    pipeline_cmd->add_option("--lines", pipe.lines);
    pipeline_cmd->add_option("--symbols", pipe.symbols);
    pipeline_cmd->add_option("--out", pipe.out);
    pipeline_cmd->add_option("--jobs", pipe.jobs)->check(CLI::PositiveNumber);
    pipeline_cmd->add_option("--format", pipe.format, "text|summary");

    CLI11_PARSE(app, argc, argv);

    try {
        if (ast_export->parsed()) {
            emit(ast_out, export_ast(parse_file(ast_in)));
        } else if (ast_import->parsed()) {
            const SourceUnit unit = take(import_ast(slurp(ast_in)), ast_in);
            emit(ast_out, ast_php ? render_file(unit) : export_ast(unit));
        } else if (derive_cmd->parsed()) {
            if (derive_args.lines.empty() && !derive_args.full)
                fail("derive needs --lines a:b or --full");
            emit(derive_args.out, serialize_template(derive(derive_args)));
        } else if (compile_cmd->parsed()) {
            const MatcherProgram p = load_template_program(compile_in);
            std::cout << write_program(p, compile_dir).string() << '\n';
            if (!compile_script.empty())
                spill(compile_script, export_traversal_script(p));
        } else if (scan_cmd->parsed()) {
            const MatcherProgram p = load_template_program(scan_query);
            ScanOptions opts = mine_options(scan_args).scan;
            for (const std::string& f : scan_files) {
                const SourceUnit unit = parse_file(f);
                for (Match& m : scan_unit(p, unit, opts).matches) {
                    attach_excerpt(m, unit);
                    std::cout << to_jsonl(to_record(m)) << '\n';
                }
            }
        } else if (mine_cmd->parsed()) {
            const auto programs = take(load_queries(mine_args.queries), mine_args.queries);
            mine(resolve_repos(mine_args.repos), programs, mine_args);
        } else if (spider_cmd->parsed()) {
            spider(spider_args);
        } else if (report_cmd->parsed()) {
            emit(report_args.out, report(report_args));
        } else if (pipeline_cmd->parsed()) {
            const fs::path out = pipe.out;
            DeriveArgs d;
            d.snippet = pipe.seed;
            d.lines = pipe.lines;
            d.full = pipe.lines.empty();
            d.symbols = pipe.symbols;
            const Template t = derive(d);
            spill(out / "query.tmpl", serialize_template(t));
            fs::remove_all(out / "queries");
            write_program(compile(t), out / "queries");
            MineArgs m;
            m.repos = {pipe.corpus};
            m.queries = (out / "queries").string();
            m.jobs = pipe.jobs;
            m.out = out.string();
            mine(resolve_repos(m.repos), take(load_queries(m.queries), m.queries), m);
            ReportArgs r;
            r.matches = (out / "matches.jsonl").string();
            r.stats = (out / "stats.jsonl").string();
            r.format = pipe.format;
            const std::string text = report(r);
            spill(out / "report.txt", text);
            std::cout << text;
        }
    } catch (const Failure& f) {
        std::cerr << "error: " << f.message << '\n';
        return kFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
    return 0;
}

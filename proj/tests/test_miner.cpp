#include "support.hpp"

#include "cadet/corpus_gen.hpp"
#include "cadet/miner.hpp"
#include "cadet/records.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <sstream>

using namespace cadet;
using namespace cadet::testing;
namespace fs = std::filesystem;

namespace {

const char* const kSqli = "$id = $_GET['id'];\n$res = mysql_query(\"SELECT * FROM t WHERE id = '$id'\");\n";
const char* const kXss = "echo $row['title'];\necho $row['body'];\n";
const char* const kPath = "include($_GET['page'] . '.php');\n";

std::vector<CorpusSeed> three_seeds()
{
    return {{"sqli", kSqli}, {"xss", kXss}, {"path", kPath}};
}

std::vector<MatcherProgram> programs_for(const CorpusLedger& ledger)
{
    std::vector<MatcherProgram> out;
    for (const Template& t : ledger.templates)
        out.push_back(compile(t));
    return out;
}

std::vector<fs::path> repo_paths(const fs::path& root, const CorpusLedger& ledger)
{
    std::vector<fs::path> out;
    for (const auto& r : ledger.repos)
        out.push_back(root / r);
    return out;
}

std::size_t total_matches(const std::vector<RepoScanResult>& rs)
{
    std::size_t n = 0;
    for (const auto& r : rs)
        n += r.matches.size();
    return n;
}

// (repo, file, first line) of each match for one query.
std::set<std::tuple<std::string, std::string, int>> found_set(const std::vector<RepoScanResult>& rs, const fs::path& root,
                                                              const std::string& qid)
{
    std::set<std::tuple<std::string, std::string, int>> out;
    for (const auto& r : rs) {
        const std::string repo = fs::path(r.repo_id).filename().string();
        for (const Match& m : r.matches) {
            if (m.query_id != qid)
                continue;
            const std::string rel = fs::relative(m.unit_path, root / repo).generic_string();
            out.emplace(repo, rel, m.line_start);
        }
    }
    return out;
}

} // namespace

TEST(Miner, TutorialRepoYieldsOneMatchPerQuery)
{
    TempDir dir;
    fs::create_directories(dir.path() / "tutorial");
    fs::copy_file(fixture("fig2_tutorial.php"), dir.path() / "tutorial" / "search.php");
    const SourceUnit unit = parse_fixture("fig2_tutorial.php");
    const std::vector<MatcherProgram> progs{compile(derive_lines(unit, 5, 6)), compile(derive_lines(unit, 11, 12))};
    const std::vector<fs::path> repos{dir.path() / "tutorial"};
    const auto rs = mine_repositories(repos, progs, 2);
    ASSERT_EQ(rs.size(), 1u);
    ASSERT_EQ(rs[0].matches.size(), 2u);
    EXPECT_EQ(rs[0].stats[0].match_count, 1u);
    EXPECT_EQ(rs[0].stats[1].match_count, 1u);
    EXPECT_EQ(rs[0].matches[0].line_start, 5);
    EXPECT_EQ(rs[0].matches[1].line_start, 11);
    EXPECT_EQ(rs[0].matches[1].excerpt, "        echo $row['title'];\n        echo $row['text'];");
}

TEST(Miner, EmptyRepositoryHasNothing)
{
    TempDir dir;
    fs::create_directories(dir.path() / "empty");
    const SourceUnit unit = parse_fixture("normalization_seed.php");
    const std::vector<MatcherProgram> progs{compile(derive_all(unit))};
    const std::vector<fs::path> repos{dir.path() / "empty"};
    const auto rs = mine_repositories(repos, progs, 1);
    EXPECT_TRUE(rs[0].ok);
    EXPECT_EQ(rs[0].files_discovered, 0u);
    EXPECT_TRUE(rs[0].matches.empty());
}

TEST(Miner, MissingRepositoryIsARecordedFailure)
{
    TempDir dir;
    const SourceUnit unit = parse_fixture("normalization_seed.php");
    const std::vector<MatcherProgram> progs{compile(derive_all(unit))};
    const std::vector<fs::path> repos{dir.path() / "nope", dir.path()};
    const auto rs = mine_repositories(repos, progs, 4);
    ASSERT_EQ(rs.size(), 2u);
    EXPECT_FALSE(rs[0].ok);
    EXPECT_TRUE(rs[1].ok);
    std::ostringstream skipped;
    write_skipped(skipped, rs);
    EXPECT_NE(skipped.str().find("repo-failed"), std::string::npos);
}

TEST(Miner, DiscoverySkipsSymlinksGitAndOtherExtensions)
{
    TempDir dir;
    const fs::path repo = dir.path() / "r";
    fs::create_directories(repo / ".git");
    fs::create_directories(repo / "lib");
    std::ofstream(repo / "a.php") << "<?php echo 1;\n";
    std::ofstream(repo / "lib" / "b.inc") << "<?php echo 2;\n";
    std::ofstream(repo / "lib" / "c.phtml") << "<p><?= $x ?></p>\n";
    std::ofstream(repo / "notes.txt") << "<?php echo 3;\n";
    std::ofstream(repo / ".git" / "hook.php") << "<?php echo 4;\n";
    fs::create_symlink(repo / "a.php", repo / "link.php");
    const auto files = discover_files(repo);
    ASSERT_EQ(files.size(), 3u);
    EXPECT_EQ(files[0].filename(), "a.php");
    EXPECT_EQ(files[1].filename(), "b.inc");
    EXPECT_EQ(files[2].filename(), "c.phtml");
}

TEST(Miner, SkipReasonsAreRecordedAndCountsAddUp)
{
    TempDir dir;
    const fs::path repo = dir.path() / "r";
    fs::create_directories(repo);
    std::ofstream(repo / "good.php") << "<?php\n$var = $_GET['var'];\n";
    std::ofstream(repo / "broken.php") << "<?php\nif ($x {\n";
    {
        std::ofstream bin(repo / "blob.php", std::ios::binary);
        bin << "<?php" << '\0' << "garbage";
    }
    std::ofstream(repo / "big.php") << "<?php\n" << std::string(4096, ' ') << "\n";
    MineOptions opts;
    opts.max_file_bytes = 1024;
    const SourceUnit seed = parse_fixture("normalization_seed.php");
    const std::vector<MatcherProgram> progs{compile(derive_all(seed))};
    const RepoScanResult r = mine_repository(repo, progs, opts);
    EXPECT_EQ(r.files_discovered, 4u);
    EXPECT_EQ(r.files_scanned + r.files_skipped.size(), r.files_discovered);
    std::multiset<std::string> reasons;
    for (const auto& s : r.files_skipped)
        reasons.insert(std::string(to_string(s.reason)));
    EXPECT_EQ(reasons, (std::multiset<std::string>{"binary", "parse-error", "too-large"}));
    // the parse failure does not hide the match in the good file
    EXPECT_EQ(r.matches.size(), 1u);
}

TEST(Miner, RenameOnlyCorpusIsFullyRecovered)
{
    TempDir dir;
    CorpusSpec spec;
    spec.seeds = three_seeds();
    spec.repo_count = 10;
    spec.mutations = {Mutation::Rename};
    auto ledger = generate_test_corpus(dir.path(), spec);
    ASSERT_TRUE(ledger.ok()) << ledger.error().describe();
    ASSERT_GT(ledger->expected_matches(), 0u);
    const auto progs = programs_for(*ledger);
    const auto rs = mine_repositories(repo_paths(dir.path(), *ledger), progs, 3);
    EXPECT_EQ(total_matches(rs), ledger->expected_matches());
}

TEST(Miner, BetweenInsertionCorpusYieldsNothing)
{
    TempDir dir;
    CorpusSpec spec;
    spec.seeds = {{"sqli", kSqli}, {"xss", kXss}};
    spec.repo_count = 8;
    spec.mutations = {Mutation::InsertBetween};
    auto ledger = generate_test_corpus(dir.path(), spec);
    ASSERT_TRUE(ledger.ok());
    ASSERT_GT(ledger->plants.size(), 0u);
    EXPECT_EQ(ledger->expected_matches(), 0u);
    const auto rs = mine_repositories(repo_paths(dir.path(), *ledger), programs_for(*ledger), 2);
    EXPECT_EQ(total_matches(rs), 0u);
}

TEST(Miner, MixedCorpusMatchesTheLedgerExactly)
{
    TempDir dir;
    CorpusSpec spec;
    spec.seeds = three_seeds();
    spec.repo_count = 50;
    spec.mutations = {Mutation::Replica,       Mutation::Rename,       Mutation::LiteralChange,
                      Mutation::InsertBetween, Mutation::InsertAround, Mutation::BreakDataflow};
    spec.broken_files = true;
    spec.rng_seed = 2024;
    auto ledger = generate_test_corpus(dir.path(), spec);
    ASSERT_TRUE(ledger.ok());
    const auto progs = programs_for(*ledger);
    const auto rs = mine_repositories(repo_paths(dir.path(), *ledger), progs, 4);
    EXPECT_EQ(total_matches(rs), ledger->expected_matches());
    for (std::size_t q = 0; q < progs.size(); ++q) {
        std::set<std::tuple<std::string, std::string, int>> expected;
        for (const PlantRecord& p : ledger->plants) {
            if (p.seed_index == q && p.expect_match)
                expected.emplace(p.repo, p.file, p.line_start);
        }
        EXPECT_EQ(found_set(rs, dir.path(), progs[q].query_id), expected) << "seed " << q;
    }
    std::size_t per_query = 0;
    for (const auto& r : rs) {
        EXPECT_EQ(r.files_skipped.size(), 1u);
        for (const auto& s : r.stats)
            per_query += s.match_count;
    }
    EXPECT_EQ(per_query, total_matches(rs));
}

TEST(Miner, OutputIsIndependentOfJobCount)
{
    TempDir dir;
    CorpusSpec spec;
    spec.seeds = three_seeds();
    spec.repo_count = 12;
    spec.mutations = {Mutation::Rename, Mutation::LiteralChange, Mutation::InsertAround};
    auto ledger = generate_test_corpus(dir.path(), spec);
    ASSERT_TRUE(ledger.ok());
    const auto progs = programs_for(*ledger);
    const auto repos = repo_paths(dir.path(), *ledger);
    std::ostringstream one, eight;
    write_matches(one, mine_repositories(repos, progs, 1));
    write_matches(eight, mine_repositories(repos, progs, 8));
    EXPECT_FALSE(one.str().empty());
    EXPECT_EQ(one.str(), eight.str());
}

TEST(Miner, SeedsThatMatchEachOtherAreRejected)
{
    TempDir dir;
    CorpusSpec spec;
    spec.seeds = {{"a", "echo $x;\n"}, {"b", "echo $y;\necho $z;\n"}};
    auto ledger = generate_test_corpus(dir.path(), spec);
    ASSERT_FALSE(ledger.ok());
    EXPECT_EQ(ledger.error().code, ErrorCode::SchemaViolation);
}

TEST(Miner, QueriesLoadFromTemplatesAndPrograms)
{
    TempDir dir;
    const SourceUnit unit = parse_fixture("fig2_tutorial.php");
    const Template sqli = derive_lines(unit, 5, 6);
    const Template xss = derive_lines(unit, 11, 12);
    std::ofstream(dir.path() / "a.tmpl") << serialize_template(sqli);
    std::ofstream(dir.path() / "b.prog") << serialize_program(compile(xss));
    std::ofstream(dir.path() / "c.prog") << serialize_program(compile(xss));
    auto qs = load_queries(dir.path());
    ASSERT_TRUE(qs.ok()) << qs.error().describe();
    ASSERT_EQ(qs->size(), 2u);
    EXPECT_EQ((*qs)[0], compile(sqli));
    EXPECT_EQ((*qs)[1], compile(xss));
}

TEST(Miner, RepoListResolvesRelativePaths)
{
    TempDir dir;
    std::ofstream(dir.path() / "repos.txt") << "# corpus\nrepo000\n\n/abs/repo  \n";
    auto list = read_repo_list(dir.path() / "repos.txt");
    ASSERT_TRUE(list.ok());
    ASSERT_EQ(list->size(), 2u);
    EXPECT_EQ((*list)[0], dir.path() / "repo000");
    EXPECT_EQ((*list)[1], fs::path("/abs/repo"));
}

TEST(Records, MatchRecordRoundTrips)
{
    MatchRecord r;
    r.query = "q0123";
    r.repo = "corpus/repo001";
    r.file = "corpus/repo001/src/a.php";
    r.line_start = 4;
    r.line_end = 6;
    r.stmt_index = 2;
    r.bindings = {{0, "$id"}, {1, "$_GET"}};
    r.excerpt = "$id = $_GET['id'];\nquery(\"$id\");";
    auto back = parse_match_record(to_jsonl(r));
    ASSERT_TRUE(back.ok());
    EXPECT_EQ(*back, r);
    EXPECT_FALSE(parse_match_record("{\"query\": 1}").ok());
    EXPECT_FALSE(parse_match_record("not json").ok());
}

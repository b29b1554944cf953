#include "support.hpp"

#include "cadet/corpus_gen.hpp"
#include "cadet/match_engine.hpp"

#include <gtest/gtest.h>

using namespace cadet;
using namespace cadet::testing;

namespace {

std::vector<Match> scan(const Template& t, const SourceUnit& unit, ScanOptions opts = {})
{
    return scan_unit(compile(t), unit, opts).matches;
}

} // namespace

TEST(Engine, TutorialSqliQueryMatchesOnceAtItsLines)
{
    const SourceUnit unit = parse_fixture("fig2_tutorial.php");
    const auto matches = scan(derive_lines(unit, 5, 6), unit);
    ASSERT_EQ(matches.size(), 1u);
    EXPECT_EQ(matches[0].line_start, 5);
    EXPECT_EQ(matches[0].line_end, 6);
    EXPECT_EQ(matches[0].statement_span, 2u);
}

TEST(Engine, TutorialXssQueryMatchesOnceAtItsLines)
{
    const SourceUnit unit = parse_fixture("fig2_tutorial.php");
    const auto matches = scan(derive_lines(unit, 11, 12), unit);
    ASSERT_EQ(matches.size(), 1u);
    EXPECT_EQ(matches[0].line_start, 11);
    EXPECT_EQ(matches[0].line_end, 12);
}

TEST(Engine, SelfMatchBindsEachClassToItsOwnName)
{
    const SourceUnit unit = parse_fixture("fig2_tutorial.php");
    const auto matches = scan(derive_lines(unit, 5, 6), unit);
    ASSERT_EQ(matches.size(), 1u);
    const std::map<int, std::string> expected{{0, "$title"}, {1, "$_POST"}, {2, "$result"}};
    EXPECT_EQ(matches[0].bindings, expected);
}

TEST(Engine, WildcardSliceFindsAllThreeAnalogues)
{
    const SourceUnit seed = parse_fixture("fig4_sqlinj.php");
    const auto prog = compile(derive_lines(seed, 4, 6, SymbolPolicy::Wildcard));
    for (const char* name : {"fig7_analogue1.php", "fig7_analogue2.php", "fig7_analogue3.php"}) {
        const SourceUnit target = parse_fixture(name);
        EXPECT_EQ(scan_unit(prog, target).matches.size(), 1u) << name;
    }
}

TEST(Engine, PreservedSymbolsSkipTheFopenAnalogue)
{
    const SourceUnit seed = parse_fixture("fig4_sqlinj.php");
    const auto prog = compile(derive_lines(seed, 4, 6, SymbolPolicy::Preserve));
    EXPECT_EQ(scan_unit(prog, parse_fixture("fig7_analogue1.php")).matches.size(), 1u);
    EXPECT_EQ(scan_unit(prog, parse_fixture("fig7_analogue2.php")).matches.size(), 0u);
    EXPECT_EQ(scan_unit(prog, parse_fixture("fig7_analogue3.php")).matches.size(), 1u);
}

TEST(Engine, NormalizedLiteralMatchesBenignSnippet)
{
    const SourceUnit seed = parse_fixture("normalization_seed.php");
    const SourceUnit target = parse_fixture("normalization_target.php");
    const auto matches = scan(derive_all(seed), target);
    ASSERT_EQ(matches.size(), 1u);
    EXPECT_EQ(matches[0].bindings.at(1), "$value");
}

TEST(Engine, MissingDataFlowRejectsTheMatch)
{
    const SourceUnit seed = parse_text("<?php\n$a = $_POST['x'];\nmysql_query(\"SELECT $a\");\n");
    const SourceUnit target = parse_text("<?php\n$a = $_POST['x'];\nmysql_query(\"SELECT $b\");\n");
    EXPECT_TRUE(scan(derive_all(seed), target).empty());
    EXPECT_EQ(scan(derive_all(seed), seed).size(), 1u);
}

TEST(Engine, EmptyUnitHasNoCandidates)
{
    const SourceUnit seed = parse_fixture("normalization_seed.php");
    const SourceUnit empty = parse_text("");
    const auto r = scan_unit(compile(derive_all(seed)), empty);
    EXPECT_TRUE(r.matches.empty());
    EXPECT_EQ(r.counter.candidates_tried, 0u);
    EXPECT_TRUE(brute_force_scan(derive_all(seed), empty).empty());
}

TEST(Engine, BruteForceAgreesOnTutorial)
{
    const SourceUnit unit = parse_fixture("fig2_tutorial.php");
    for (auto [a, b] : {std::pair{5, 6}, std::pair{11, 12}}) {
        const Template t = derive_lines(unit, a, b);
        EXPECT_EQ(brute_force_scan(t, unit), scan(t, unit));
    }
}

TEST(Engine, SurplusTrailingArgumentsAllowedUnlessExact)
{
    const SourceUnit seed = parse_text("<?php\nf($a);\n");
    const SourceUnit target = parse_text("<?php\nf($b, 2);\n");
    const Template t = derive_all(seed);
    EXPECT_EQ(scan(t, target).size(), 1u);
    ScanOptions exact;
    exact.match.exact_arity = true;
    EXPECT_TRUE(scan(t, target, exact).empty());
    EXPECT_TRUE(brute_force_scan(t, target, exact.match).empty());
}

TEST(Engine, InjectiveBindingIsOptIn)
{
    const SourceUnit seed = parse_text("<?php\n$a = $b;\n");
    const SourceUnit target = parse_text("<?php\n$x = $x;\n");
    const Template t = derive_all(seed);
    EXPECT_EQ(scan(t, target).size(), 1u);
    ScanOptions inj;
    inj.match.injective = true;
    EXPECT_TRUE(scan(t, target, inj).empty());
    EXPECT_TRUE(brute_force_scan(t, target, inj.match).empty());
}

TEST(Engine, AnchorsMustBeConsecutiveSiblings)
{
    const SourceUnit seed = parse_text("<?php\n$a = $_GET['q'];\necho $a;\n");
    const SourceUnit gap = parse_text("<?php\n$a = $_GET['q'];\n$n = 1;\necho $a;\n");
    const SourceUnit nested = parse_text("<?php\n$a = $_GET['q'];\nif ($ok) {\n    echo $a;\n}\n");
    const Template t = derive_all(seed);
    EXPECT_TRUE(scan(t, gap).empty());
    EXPECT_TRUE(scan(t, nested).empty());
}

TEST(Engine, OverlappingAndNestedMatchesAllReported)
{
    const SourceUnit seed = parse_text("<?php\n$a = 1;\n$a = 1;\n");
    const SourceUnit target = parse_text("<?php\n$x = 1;\n$x = 2;\n$x = 3;\nwhile ($c) {\n    $y = 1;\n    $y = 1;\n}\n");
    const auto matches = scan(derive_all(seed), target);
    ASSERT_EQ(matches.size(), 3u);
    EXPECT_EQ(matches[0].start_index, 0u);
    EXPECT_EQ(matches[1].start_index, 1u);
    EXPECT_EQ(matches[2].line_start, 6);
}

TEST(Engine, DepthPruningSkipsOnlyHopelessLists)
{
    const SourceUnit seed = parse_text("<?php\n$a = f($b);\n");
    const SourceUnit target = parse_text("<?php\nif ($c) {\n    if ($d) {\n        $x = f($y);\n    }\n}\n$z = 1;\n");
    const auto prog = compile(derive_all(seed));
    ScanOptions off;
    off.depth_pruning = false;
    const auto pruned = scan_unit(prog, target);
    const auto full = scan_unit(prog, target, off);
    EXPECT_EQ(pruned.matches, full.matches);
    ASSERT_EQ(pruned.matches.size(), 1u);
    EXPECT_LE(pruned.counter.candidates_tried, full.counter.candidates_tried);
}

TEST(Engine, MaxMatchesCapsPerUnit)
{
    const SourceUnit seed = parse_text("<?php\necho $a;\n");
    const SourceUnit target = parse_text("<?php\necho $a;\necho $b;\necho $c;\n");
    ScanOptions opts;
    opts.max_matches_per_unit = 2;
    EXPECT_EQ(scan(derive_all(seed), target, opts).size(), 2u);
}

TEST(Engine, MatchAtRejectsOutOfRangeAnchor)
{
    const SourceUnit unit = parse_fixture("fig2_tutorial.php");
    const auto prog = compile(derive_lines(unit, 5, 6));
    EXPECT_FALSE(match_at(prog, unit, unit.root(), 1000).has_value());
    ComparisonCounter c;
    auto stmts = unit.statements(unit.root());
    std::uint32_t start = 0;
    while (start < stmts.size() && unit.node(stmts[start]).line_start != 5)
        ++start;
    auto m = match_at(prog, unit, unit.root(), start, {}, &c);
    ASSERT_TRUE(m.has_value());
    EXPECT_EQ(c.candidates_tried, 1u);
    EXPECT_GT(c.node_comparisons, 0u);
}

TEST(Engine, ExcerptQuotesAtMostTenLines)
{
    std::string php = "<?php\nif ($a) {\n";
    for (int i = 0; i < 15; ++i)
        php += "    $x = 1;\n";
    php += "}\n";
    const SourceUnit unit = parse_text(php);
    const SourceUnit seed = parse_text("<?php\nif ($q) {\n    $y = 2;\n}\n");
    auto matches = scan(derive_all(seed), unit);
    ASSERT_EQ(matches.size(), 1u);
    attach_excerpt(matches[0], unit);
    EXPECT_EQ(std::count(matches[0].excerpt.begin(), matches[0].excerpt.end(), '\n'), kExcerptLines - 1);
    EXPECT_EQ(matches[0].excerpt.substr(0, 9), "if ($a) {");
}


TEST(EngineProperty, CompiledScanAgreesWithBruteForce)
{
    PhpGenerator gen(20240611);
    std::size_t total_matches = 0;
    for (int i = 0; i < 200; ++i) {
        const RandomCase c = make_random_case(gen);
        const auto prog = compile(c.tmpl);
        const auto oracle = brute_force_scan(c.tmpl, c.target);
        ScanOptions off;
        off.depth_pruning = false;
        ASSERT_EQ(scan_unit(prog, c.target).matches, oracle) << "case " << i;
        ASSERT_EQ(scan_unit(prog, c.target, off).matches, oracle) << "case " << i;
        total_matches += oracle.size();
    }
    // The generator plants preserving mutants often enough that agreement is
    // not just agreement on empty sets.
    EXPECT_GT(total_matches, 100u);
}

TEST(EngineProperty, ExactArityAndInjectiveVariantsAgreeWithBruteForce)
{
    PhpGenerator gen(77);
    for (int i = 0; i < 100; ++i) {
        const RandomCase c = make_random_case(gen);
        ScanOptions opts;
        opts.match.exact_arity = (i % 2) == 0;
        opts.match.injective = (i % 3) == 0;
        ASSERT_EQ(scan_unit(compile(c.tmpl), c.target, opts).matches, brute_force_scan(c.tmpl, c.target, opts.match));
    }
}

TEST(EngineProperty, RenamingTargetVariablesKeepsAnchors)
{
    PhpGenerator gen(5150);
    FillerSource fillers;
    for (int i = 0; i < 100; ++i) {
        const RandomCase c = make_random_case(gen);
        const auto stmts = whole_unit(c.target).statements;
        auto renamed = render_mutant(c.target, stmts, Mutation::Rename, gen.rng(), fillers);
        ASSERT_TRUE(renamed.ok());
        const SourceUnit target2 = parse_text("<?php\n" + renamed->text);
        const auto prog = compile(c.tmpl);
        auto a = scan_unit(prog, c.target).matches;
        auto b = scan_unit(prog, target2).matches;
        ASSERT_EQ(a.size(), b.size());
        for (std::size_t k = 0; k < a.size(); ++k) {
            EXPECT_EQ(a[k].start_index, b[k].start_index);
            EXPECT_EQ(a[k].bindings.size(), b[k].bindings.size());
        }
    }
}

TEST(EngineProperty, LiteralChangesKeepMatches)
{
    PhpGenerator gen(31337);
    FillerSource fillers;
    for (int i = 0; i < 100; ++i) {
        const RandomCase c = make_random_case(gen);
        auto changed = render_mutant(c.target, whole_unit(c.target).statements, Mutation::LiteralChange, gen.rng(), fillers);
        ASSERT_TRUE(changed.ok());
        const SourceUnit target2 = parse_text("<?php\n" + changed->text);
        const auto prog = compile(c.tmpl);
        EXPECT_EQ(scan_unit(prog, c.target).matches.size(), scan_unit(prog, target2).matches.size());
    }
}

TEST(EngineProperty, BreakingOneEqualityOrInsertingBetweenRemovesTheMatch)
{
    PhpGenerator gen(99);
    int broken_checked = 0;
    int gap_checked = 0;
    for (int i = 0; i < 300; ++i) {
        auto seed = parse_text("<?php\n" + gen.statements(gen.uniform(2, 3)));
        const auto stmts = whole_unit(seed).statements;
        const auto prog = compile(derive_all(seed));
        FillerSource fillers(root_shapes(seed, stmts));
        if (auto m = render_mutant(seed, stmts, Mutation::BreakDataflow, gen.rng(), fillers); m.ok()) {
            EXPECT_TRUE(scan_unit(prog, parse_text("<?php\n" + m->text)).matches.empty()) << m->text;
            ++broken_checked;
        }
        auto g = render_mutant(seed, stmts, Mutation::InsertBetween, gen.rng(), fillers);
        ASSERT_TRUE(g.ok()) << g.error().describe();
        EXPECT_TRUE(scan_unit(prog, parse_text("<?php\n" + g->text)).matches.empty()) << g->text;
        ++gap_checked;
    }
    EXPECT_GT(broken_checked, 50);
    EXPECT_EQ(gap_checked, 300);
}

TEST(EngineProperty, ComparisonsStayWithinConstantTimesNM)
{
    PhpGenerator gen(4242);
    for (int i = 0; i < 50; ++i) {
        const RandomCase c = make_random_case(gen);
        const auto r = scan_unit(compile(c.tmpl), c.target);
        EXPECT_LE(r.counter.node_comparisons, 2 * c.tmpl.nodes.size() * c.target.node_count());
    }
}

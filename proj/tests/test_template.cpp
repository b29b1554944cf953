#include "support.hpp"

#include "cadet/corpus_gen.hpp"
#include "cadet/php_parser.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>

using namespace cadet;
using namespace cadet::testing;

namespace {

std::size_t subtree_size(const SourceUnit& u, NodeId id)
{
    std::size_t n = 1;
    for (NodeId c : u.node(id).children)
        n += subtree_size(u, c);
    return n;
}

// Tree isomorphism on kind, tag and arity.
bool same_shape(const Template& t, TemplateNodeId tid, const SourceUnit& u, NodeId nid)
{
    const TemplateNode& a = t.node(tid);
    const AstNode& b = u.node(nid);
    if (a.kind != b.kind || a.tag != b.tag || a.children.size() != b.children.size())
        return false;
    for (std::size_t i = 0; i < a.children.size(); ++i) {
        if (!same_shape(t, a.children[i], u, b.children[i]))
            return false;
    }
    return true;
}

// Var source names in the same pre-order the template uses.
void var_names(const SourceUnit& u, NodeId id, std::vector<std::string>& out)
{
    if (u.node(id).kind == NodeKind::Var)
        out.push_back(*u.node(id).symbol);
    for (NodeId c : u.node(id).children)
        var_names(u, c, out);
}

} // namespace

TEST(Template, TutorialSliceSharesOneEdgeAcrossStatements)
{
    const SourceUnit unit = parse_fixture("fig2_tutorial.php");
    const Template t = derive_lines(unit, 5, 6);
    ASSERT_EQ(t.statements.size(), 2u);
    EXPECT_EQ(t.mode, QueryMode::Strict);
    EXPECT_EQ(t.origin.first_line, 5);
    EXPECT_EQ(t.origin.last_line, 6);
    ASSERT_EQ(t.dataflow_edges.size(), 1u);
    const auto [a, b] = t.dataflow_edges[0];
    // left-hand side of the first assignment
    EXPECT_EQ(a, t.node(t.statements[0]).children[0]);
    EXPECT_LT(b, t.nodes.size());
    EXPECT_GT(b, t.statements[1]);
    EXPECT_EQ(t.node(a).class_id, t.node(b).class_id);
    EXPECT_EQ(t.node(a).role, LeafRole::VarWildcard);
    const auto api = std::count_if(t.nodes.begin(), t.nodes.end(), [](const TemplateNode& n) {
        return n.role == LeafRole::ApiSymbol && n.api_name == "mysql_query";
    });
    EXPECT_EQ(api, 1);
    EXPECT_EQ(t.var_class_count, 3);
}

TEST(Template, NoVariablesNoEdges)
{
    const SourceUnit unit = parse_text("<?php foo();");
    const Template t = derive_all(unit);
    EXPECT_TRUE(t.dataflow_edges.empty());
    EXPECT_EQ(template_stats(t).edge_count, 0u);
    EXPECT_EQ(t.nodes.size(), 3u);
}

TEST(Template, EmptyStatementListIsRejected)
{
    const SourceUnit unit = parse_text("<?php");
    auto t = derive_template(unit, {}, QueryMode::Normal);
    ASSERT_FALSE(t.ok());
    EXPECT_EQ(t.error().code, ErrorCode::EmptyInput);
}

TEST(Template, WildcardPolicyErasesCallNames)
{
    const SourceUnit unit = parse_fixture("fig2_tutorial.php");
    const Template t = derive_lines(unit, 5, 6, SymbolPolicy::Wildcard);
    EXPECT_EQ(template_stats(t).api_symbols, 0u);
    EXPECT_EQ(template_stats(t).call_wildcards, 1u);
}

TEST(Template, StatsOfTutorialSliceMatchTheAst)
{
    const SourceUnit unit = parse_fixture("fig2_tutorial.php");
    auto slice = slice_statements(unit, 5, 6);
    ASSERT_TRUE(slice.ok());
    const Template t = derive_template(unit, slice->statements, QueryMode::Strict).value();
    std::size_t ast_nodes = 0;
    for (NodeId s : slice->statements)
        ast_nodes += subtree_size(unit, s);
    const TemplateStats s = template_stats(t);
    EXPECT_EQ(s.node_count, ast_nodes);
    EXPECT_EQ(s.statement_count, 2u);
    EXPECT_EQ(s.var_wildcards, 4u);
    EXPECT_EQ(s.literal_wildcards, 3u);
    EXPECT_EQ(s.var_classes, 3u);
    EXPECT_EQ(s.edge_count, 1u);
    EXPECT_EQ(s.depth, 4);
}

TEST(Template, DistinctVariablesUsedTwice)
{
    std::mt19937_64 rng(3);
    for (int v = 1; v <= 12; ++v) {
        std::vector<std::string> uses;
        for (int k = 0; k < v; ++k) {
            uses.push_back("$n" + std::to_string(k));
            uses.push_back("$n" + std::to_string(k));
        }
        std::shuffle(uses.begin(), uses.end(), rng);
        std::string php = "<?php\n";
        for (std::size_t i = 0; i + 1 < uses.size(); i += 2)
            php += uses[i] + " = f(" + uses[i + 1] + ");\n";
        const Template t = derive_all(parse_text(php));
        const TemplateStats s = template_stats(t);
        EXPECT_EQ(s.var_classes, static_cast<std::size_t>(v));
        EXPECT_EQ(s.var_wildcards, static_cast<std::size_t>(2 * v));
        EXPECT_EQ(s.edge_count, static_cast<std::size_t>(v));
    }
}

TEST(Template, SerializationRoundTrips)
{
    const SourceUnit unit = parse_fixture("fig2_tutorial.php");
    const Template t = derive_lines(unit, 5, 6);
    const std::string text = serialize_template(t);
    auto back = deserialize_template(text);
    ASSERT_TRUE(back.ok()) << back.error().describe();
    EXPECT_EQ(*back, t);
    EXPECT_EQ(serialize_template(*back), text);
    EXPECT_EQ(text.substr(0, 21), "{\"format\":\"tmpl-v1\",\"");
}

TEST(Template, DeserializationRejectsBadStreams)
{
    const SourceUnit unit = parse_text("<?php $a = $b;");
    const std::string good = serialize_template(derive_all(unit));
    const std::string header = good.substr(0, good.find('\n') + 1);
    // header and edges but no statements
    auto empty = deserialize_template(header + "{\"edges\": []}\n");
    ASSERT_FALSE(empty.ok());
    EXPECT_FALSE(deserialize_template("").ok());
    EXPECT_FALSE(deserialize_template("{\"format\": \"ast-v1\"}\n").ok());
    auto garbage = deserialize_template(header + "oops\n");
    ASSERT_FALSE(garbage.ok());
    EXPECT_EQ(garbage.error().location, 1);
    // nodes: 0 Assign, 1 Var $a, 2 Var $b; an edge across classes breaks the invariant
    std::string tampered = good.substr(0, good.rfind("{\"edges\""));
    tampered += "{\"edges\": [[1, 2]]}\n";
    EXPECT_FALSE(deserialize_template(tampered).ok());
}

TEST(Template, ValidateCatchesBrokenInvariants)
{
    const SourceUnit unit = parse_fixture("fig2_tutorial.php");
    const Template good = derive_lines(unit, 5, 6);
    EXPECT_FALSE(validate_template(good).has_value());
    {
        Template t = good;
        t.dataflow_edges.clear();
        EXPECT_TRUE(validate_template(t).has_value());
    }
    {
        Template t = good;
        t.nodes[t.dataflow_edges[0].first].class_id = 2;
        EXPECT_TRUE(validate_template(t).has_value());
    }
    {
        Template t = good;
        t.statements.clear();
        EXPECT_TRUE(validate_template(t).has_value());
    }
    {
        Template t = good;
        for (auto& n : t.nodes) {
            if (n.kind == NodeKind::Literal)
                n.role = LeafRole::None;
        }
        EXPECT_TRUE(validate_template(t).has_value());
    }
}

TEST(TemplateProperty, RandomTemplatesKeepShapeAndRoundTrip)
{
    PhpGenerator gen(17);
    for (int i = 0; i < 100; ++i) {
        const SourceUnit unit = parse_text("<?php\n" + gen.statements(gen.uniform(1, 4)));
        const auto stmts = whole_unit(unit).statements;
        const auto policy = i % 2 ? SymbolPolicy::Wildcard : SymbolPolicy::Preserve;
        const Template t = derive_template(unit, stmts, QueryMode::Normal, policy).value();
        ASSERT_FALSE(validate_template(t).has_value());
        for (std::size_t s = 0; s < stmts.size(); ++s)
            EXPECT_TRUE(same_shape(t, t.statements[s], unit, stmts[s]));
        auto back = deserialize_template(serialize_template(t));
        ASSERT_TRUE(back.ok());
        EXPECT_EQ(*back, t);

        // edges join exactly the equal source names, classes in first-use order
        std::vector<std::string> names;
        for (NodeId s : stmts)
            var_names(unit, s, names);
        std::vector<TemplateNodeId> var_nodes;
        for (const TemplateNode& n : t.nodes) {
            if (n.role == LeafRole::VarWildcard)
                var_nodes.push_back(n.id);
        }
        ASSERT_EQ(var_nodes.size(), names.size());
        std::set<std::pair<TemplateNodeId, TemplateNodeId>> edges(t.dataflow_edges.begin(), t.dataflow_edges.end());
        std::map<std::string, int> first_use;
        for (std::size_t a = 0; a < names.size(); ++a) {
            first_use.emplace(names[a], static_cast<int>(first_use.size()));
            EXPECT_EQ(t.node(var_nodes[a]).class_id, first_use[names[a]]);
            for (std::size_t b = a + 1; b < names.size(); ++b)
                EXPECT_EQ(edges.count({var_nodes[a], var_nodes[b]}) == 1, names[a] == names[b]);
        }
        const TemplateStats st = template_stats(t);
        EXPECT_EQ(st.var_wildcards, names.size());
        EXPECT_EQ(st.node_count, t.nodes.size());
        int depth = 0;
        for (const TemplateNode& n : t.nodes)
            depth = std::max(depth, n.depth);
        EXPECT_EQ(st.depth, depth);
    }
}

TEST(TemplateProperty, RenamingVariablesGivesTheSameTemplate)
{
    PhpGenerator gen(18);
    FillerSource fillers;
    for (int i = 0; i < 100; ++i) {
        const SourceUnit unit = parse_text("<?php\n" + gen.statements(gen.uniform(1, 4)));
        auto renamed = render_mutant(unit, whole_unit(unit).statements, Mutation::Rename, gen.rng(), fillers);
        ASSERT_TRUE(renamed.ok());
        const SourceUnit other = parse_text("<?php\n" + renamed->text, "other.php");
        EXPECT_EQ(canonical_template_text(derive_all(unit)), canonical_template_text(derive_all(other)));
    }
}

TEST(TemplateProperty, DerivationIsDeterministic)
{
    const std::string text = read_file(fixture("fig4_sqlinj.php"));
    const SourceUnit a = parse_source(text, "fig4_sqlinj.php").value();
    const SourceUnit b = parse_source(text, "fig4_sqlinj.php").value();
    EXPECT_EQ(serialize_template(derive_lines(a, 4, 6)), serialize_template(derive_lines(b, 4, 6)));
}

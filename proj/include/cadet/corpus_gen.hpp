#pragma once

#include "cadet/ast.hpp"
#include "cadet/result.hpp"
#include "cadet/template.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cadet {

// Random PHP in the parser's core subset. Small name pools keep accidental
// partial matches frequent, which is what the differential tests want.
struct GenParams {
    int max_nesting = 2;
    int max_expr_depth = 2;
    int max_block_statements = 3;
    std::vector<std::string> variables{"$a", "$b", "$c", "$row", "$_GET", "$_POST"};
    std::vector<std::string> functions{"f", "g", "mysql_query", "fopen"};
};

class PhpGenerator {
public:
    explicit PhpGenerator(std::uint64_t seed, GenParams params = {});

    // One statement (possibly a multi-line block), newline-terminated.
    std::string statement(int nesting = 0, int indent = 0);
    std::string statements(int count, int nesting = 0, int indent = 0);
    std::string expression(int depth = 0);
    std::string variable();

    std::mt19937_64& rng() noexcept { return rng_; }
    int uniform(int lo, int hi);
    bool chance(double p);

private:
    std::mt19937_64 rng_;
    GenParams params_;
};

// Source text of roughly `target_nodes` nodes: top-level statements are added
// in batches until the parsed node count reaches the target.
std::string generate_sized_file(PhpGenerator& gen, std::size_t target_nodes);

enum class Mutation { Replica, Rename, LiteralChange, InsertBetween, InsertAround, BreakDataflow };

std::string_view to_string(Mutation m);
std::optional<Mutation> mutation_from(std::string_view text);
// Renames and literal changes keep a planted copy findable; a statement in
// between or a broken variable equality does not.
bool preserves_match(Mutation m);

using RootShape = std::pair<NodeKind, std::string>;

// (kind, tag) of each statement, the only thing a template's statement root
// filter looks at.
std::vector<RootShape> root_shapes(const SourceUnit& unit, std::span<const NodeId> statements);

// Padding statements whose roots differ from every shape in `avoid`, so no
// window containing a filler can match a template built from those shapes.
class FillerSource {
public:
    explicit FillerSource(std::span<const RootShape> avoid = {});
    std::string next(std::mt19937_64& rng, int indent);
    bool empty() const noexcept { return shapes_.empty(); }

private:
    std::vector<std::string> shapes_;
    unsigned counter_ = 0;
};

struct Mutant {
    std::string text;          // newline-terminated statements
    int first_stmt_offset = 0; // line offset of the first seed statement within text
    int line_count = 0;
};

// Renders `statements` of `seed` with mutation `m` applied. Fails with
// EmptyInput when the mutation does not apply: BreakDataflow needs a variable
// occurring twice, InsertBetween needs two statements.
Result<Mutant> render_mutant(const SourceUnit& seed, std::span<const NodeId> statements, Mutation m, std::mt19937_64& rng,
                             FillerSource& fillers, int indent = 0);

// A seed for corpus planting: source text (without the open tag is fine) and
// the statements taken as the query.
struct CorpusSeed {
    std::string name;
    std::string php;
    SymbolPolicy policy = SymbolPolicy::Preserve;
};

struct CorpusSpec {
    std::vector<CorpusSeed> seeds;
    std::size_t repo_count = 1;
    std::vector<Mutation> mutations{Mutation::Rename};
    std::size_t files_per_repo = 3;
    std::size_t max_plants_per_file = 2;
    std::size_t filler_statements = 6;
    // Adds one unparsable file per repository.
    bool broken_files = false;
    std::uint64_t rng_seed = 1;
};

struct PlantRecord {
    std::string repo; // directory name under the corpus root
    std::string file; // relative to the repository
    std::size_t seed_index = 0;
    Mutation mutation = Mutation::Replica;
    int line_start = 0;
    int line_end = 0;
    bool expect_match = false;
};

struct CorpusLedger {
    std::vector<std::string> repos;
    std::vector<PlantRecord> plants;
    std::vector<Template> templates; // one per seed, whole-seed normal queries

    std::size_t expected_matches() const;
    std::size_t expected_matches(std::size_t seed_index) const;
};

inline constexpr std::string_view kLedgerFile = "plants.jsonl";

// Writes `repo_count` repositories under `root` plus a plants.jsonl ledger.
// Seeds must not match one another (checked), so each query's expected
// matches are exactly its own surviving plants.
Result<CorpusLedger> generate_test_corpus(const std::filesystem::path& root, const CorpusSpec& spec);

// One differential-testing case: a random seed snippet, its template, and a
// random target containing mutated copies of the seed.
struct RandomCase {
    SourceUnit seed;
    Template tmpl;
    SourceUnit target;
};

RandomCase make_random_case(PhpGenerator& gen);

} // namespace cadet

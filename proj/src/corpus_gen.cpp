#include "cadet/corpus_gen.hpp"

#include "cadet/match_engine.hpp"
#include "cadet/php_parser.hpp"
#include "cadet/php_printer.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

namespace cadet {

namespace fs = std::filesystem;

PhpGenerator::PhpGenerator(std::uint64_t seed, GenParams params) : rng_(seed), params_(std::move(params)) {}

int PhpGenerator::uniform(int lo, int hi)
{
    return std::uniform_int_distribution<int>(lo, hi)(rng_);
}

bool PhpGenerator::chance(double p)
{
    return std::bernoulli_distribution(p)(rng_);
}

std::string PhpGenerator::variable()
{
    return params_.variables[static_cast<std::size_t>(uniform(0, static_cast<int>(params_.variables.size()) - 1))];
}

namespace {

const char* const kLiterals[] = {"'x'", "'id'", "1", "42", "\"y\"", "true"};
const char* const kKeys[] = {"'id'", "'name'", "0", "$i"};
const char* const kWords[] = {"SELECT * FROM t WHERE id = ", "content/", "hello ", ""};

std::string pad(int indent)
{
    return std::string(static_cast<std::size_t>(indent) * 4, ' ');
}

} // namespace

std::string PhpGenerator::expression(int depth)
{
    auto literal = [&] { return std::string(kLiterals[uniform(0, 5)]); };
    auto dim = [&] { return variable() + "[" + kKeys[uniform(0, 3)] + "]"; };
    const int top = depth >= params_.max_expr_depth ? 2 : 5;
    switch (uniform(0, top)) {
    case 0: return variable();
    case 1: return literal();
    case 2: return dim();
    case 3: {
        std::string args;
        const int n = uniform(0, 2);
        for (int i = 0; i < n; ++i)
            args += (i ? ", " : "") + expression(depth + 1);
        return params_.functions[static_cast<std::size_t>(uniform(0, static_cast<int>(params_.functions.size()) - 1))] +
               "(" + args + ")";
    }
    case 4: return expression(depth + 1) + " . " + expression(depth + 1);
    default: {
        std::string s = "\"";
        s += kWords[uniform(0, 3)];
        s += chance(0.3) ? "{" + dim() + "}" : variable();
        if (chance(0.5))
            s += " tail";
        return s + "\"";
    }
    }
}

std::string PhpGenerator::statement(int nesting, int indent)
{
    const std::string p = pad(indent);
    const int top = nesting >= params_.max_nesting ? 5 : 8;
    auto block = [&] {
        return statements(uniform(1, params_.max_block_statements), nesting + 1, indent + 1) + p + "}\n";
    };
    switch (uniform(0, top)) {
    case 0:
    case 1: return p + variable() + " = " + expression() + ";\n";
    case 2: return p + variable() + " = " + expression() + ";\n";
    case 3: return p + expression(params_.max_expr_depth - 1) + ";\n";
    case 4: return p + "echo " + expression() + ";\n";
    case 5: return chance(0.3) ? p + "return " + expression() + ";\n" : p + "echo " + variable() + ";\n";
    case 6: return p + "if (" + expression(1) + ") {\n" + block();
    case 7: return p + "while (" + variable() + " = " + expression(1) + ") {\n" + block();
    default: return p + "foreach (" + variable() + " as " + variable() + ") {\n" + block();
    }
}

std::string PhpGenerator::statements(int count, int nesting, int indent)
{
    std::string out;
    for (int i = 0; i < count; ++i)
        out += statement(nesting, indent);
    return out;
}

std::string generate_sized_file(PhpGenerator& gen, std::size_t target_nodes)
{
    std::string body;
    std::size_t nodes = 1;
    while (nodes < target_nodes) {
        std::string batch = gen.statements(20);
        auto unit = parse_source("<?php\n" + batch, "batch.php");
        if (!unit.ok())
            continue;
        nodes += unit->node_count() - 1;
        body += batch;
    }
    return "<?php\n" + body;
}

std::string_view to_string(Mutation m)
{
    switch (m) {
    case Mutation::Replica: return "replica";
    case Mutation::Rename: return "rename";
    case Mutation::LiteralChange: return "literal-change";
    case Mutation::InsertBetween: return "insert-between";
    case Mutation::InsertAround: return "insert-around";
    case Mutation::BreakDataflow: return "break-dataflow";
    }
    return "replica";
}

std::optional<Mutation> mutation_from(std::string_view text)
{
    for (Mutation m : {Mutation::Replica, Mutation::Rename, Mutation::LiteralChange, Mutation::InsertBetween,
                       Mutation::InsertAround, Mutation::BreakDataflow}) {
        if (to_string(m) == text)
            return m;
    }
    return std::nullopt;
}

bool preserves_match(Mutation m)
{
    return m != Mutation::InsertBetween && m != Mutation::BreakDataflow;
}

std::vector<RootShape> root_shapes(const SourceUnit& unit, std::span<const NodeId> statements)
{
    std::vector<RootShape> out;
    for (NodeId id : statements)
        out.emplace_back(unit.node(id).kind, unit.node(id).tag);
    return out;
}

FillerSource::FillerSource(std::span<const RootShape> avoid)
{
    const std::set<RootShape> roots(avoid.begin(), avoid.end());
    // {root kind, root tag, text with a %N% counter placeholder}
    const std::tuple<NodeKind, const char*, const char*> candidates[] = {
        {NodeKind::Other, "Global", "global $cfg%N%;"},
        {NodeKind::Other, "StaticVar", "static $cache%N% = 0;"},
        {NodeKind::Call, "", "log_event('step %N%');"},
        {NodeKind::Echo, "", "echo 'line %N%';"},
        {NodeKind::Assign, "", "$counter%N% = 0;"},
        {NodeKind::Return, "", "return 'done %N%';"},
    };
    for (const auto& [kind, tag, text] : candidates) {
        if (!roots.count({kind, tag}))
            shapes_.emplace_back(text);
    }
}

std::string FillerSource::next(std::mt19937_64& rng, int indent)
{
    std::string s = shapes_[std::uniform_int_distribution<std::size_t>(0, shapes_.size() - 1)(rng)];
    const std::string n = std::to_string(counter_++);
    if (auto at = s.find("%N%"); at != std::string::npos)
        s.replace(at, 3, n);
    return pad(indent) + s + "\n";
}

namespace {

struct Rewrite {
    std::map<std::string, std::string> rename;
    bool change_literals = false;
    NodeId break_at = kNoNode;
    std::string break_name;
    unsigned literal_counter = 0;
};

std::string changed_literal(const std::string& v, bool in_string, unsigned k)
{
    const std::string tag = "m" + std::to_string(k);
    if (in_string)
        return "changed " + tag + " ";
    if (v.empty())
        return "'" + tag + "'";
    if (v.front() == '\'' || v.front() == '"')
        return v.front() + tag + v.front();
    if (std::isdigit(static_cast<unsigned char>(v.front())))
        return v == "7" ? "8" : "7";
    if (v == "true")
        return "false";
    return "'" + tag + "'";
}

NodeId copy_tree(const SourceUnit& u, NodeId id, TreeBuilder& b, Rewrite& rw, bool in_string)
{
    const AstNode& n = u.node(id);
    std::vector<NodeId> kids;
    kids.reserve(n.children.size());
    for (NodeId c : n.children)
        kids.push_back(copy_tree(u, c, b, rw, n.kind == NodeKind::Encapsed));
    const NodeId out = b.add(n.kind, std::move(kids), n.line_start, n.line_end);
    AstNode& m = b.at(out);
    m.tag = n.tag;
    m.symbol = n.symbol;
    m.value = n.value;
    if (n.kind == NodeKind::Var) {
        if (id == rw.break_at)
            m.symbol = rw.break_name;
        else if (auto it = rw.rename.find(*n.symbol); it != rw.rename.end())
            m.symbol = it->second;
    }
    if (n.kind == NodeKind::Literal && rw.change_literals)
        m.value = changed_literal(*n.value, in_string, rw.literal_counter++);
    return out;
}

// Renders each statement separately so callers can interleave fillers.
Result<std::vector<std::string>> render_rewritten(const SourceUnit& seed, std::span<const NodeId> statements, Rewrite& rw, int indent)
{
    TreeBuilder b;
    std::vector<NodeId> roots;
    for (NodeId s : statements)
        roots.push_back(copy_tree(seed, s, b, rw, false));
    const NodeId root = b.add(NodeKind::StmtList, roots);
    auto unit = std::move(b).finish(root, seed.path());
    if (!unit.ok())
        return unit.error();
    std::vector<std::string> out;
    for (NodeId s : unit->statements(unit->root()))
        out.push_back(render_statements(*unit, std::span<const NodeId>(&s, 1), indent));
    return out;
}

int count_lines(const std::string& s)
{
    return static_cast<int>(std::count(s.begin(), s.end(), '\n'));
}

} // namespace

Result<Mutant> render_mutant(const SourceUnit& seed, std::span<const NodeId> statements, Mutation m, std::mt19937_64& rng,
                             FillerSource& fillers, int indent)
{
    Rewrite rw;
    // Every Var occurrence of the statements in pre-order.
    std::vector<NodeId> vars;
    for (NodeId s : statements) {
        std::vector<NodeId> stack{s};
        while (!stack.empty()) {
            NodeId id = stack.back();
            stack.pop_back();
            const AstNode& n = seed.node(id);
            if (n.kind == NodeKind::Var)
                vars.push_back(id);
            for (auto it = n.children.rbegin(); it != n.children.rend(); ++it)
                stack.push_back(*it);
        }
    }
    if (m == Mutation::InsertBetween && statements.size() < 2)
        return make_error(ErrorCode::EmptyInput, "a single statement has no gap to insert into");
    const std::string salt = std::to_string(rng() % 100000);
    switch (m) {
    case Mutation::Rename: {
        for (NodeId v : vars) {
            const std::string& name = *seed.node(v).symbol;
            if (!rw.rename.count(name))
                rw.rename.emplace(name, "$r" + salt + "_" + std::to_string(rw.rename.size()));
        }
        break;
    }
    case Mutation::LiteralChange:
        rw.change_literals = true;
        break;
    case Mutation::BreakDataflow: {
        std::map<std::string, std::vector<NodeId>> occurrences;
        for (NodeId v : vars)
            occurrences[*seed.node(v).symbol].push_back(v);
        std::vector<NodeId> repeats;
        for (const auto& [name, ids] : occurrences) {
            if (ids.size() > 1)
                repeats.insert(repeats.end(), ids.begin() + 1, ids.end());
        }
        if (repeats.empty())
            return make_error(ErrorCode::EmptyInput, "no repeated variable to break");
        rw.break_at = repeats[std::uniform_int_distribution<std::size_t>(0, repeats.size() - 1)(rng)];
        rw.break_name = "$broken" + salt;
        break;
    }
    default:
        break;
    }
    auto parts = render_rewritten(seed, statements, rw, indent);
    if (!parts.ok())
        return parts.error();

    Mutant out;
    if (m == Mutation::InsertAround) {
        out.text += fillers.next(rng, indent);
        out.first_stmt_offset = 1;
    }
    for (std::size_t i = 0; i < parts->size(); ++i) {
        if (i > 0 && m == Mutation::InsertBetween)
            out.text += fillers.next(rng, indent);
        out.text += (*parts)[i];
    }
    if (m == Mutation::InsertAround)
        out.text += fillers.next(rng, indent);
    out.line_count = count_lines(out.text);
    return out;
}

std::size_t CorpusLedger::expected_matches() const
{
    return static_cast<std::size_t>(std::count_if(plants.begin(), plants.end(), [](const PlantRecord& p) { return p.expect_match; }));
}

std::size_t CorpusLedger::expected_matches(std::size_t seed_index) const
{
    return static_cast<std::size_t>(std::count_if(plants.begin(), plants.end(), [&](const PlantRecord& p) {
        return p.expect_match && p.seed_index == seed_index;
    }));
}

namespace {

struct Wrapper {
    RootShape shape;
    const char* open;
};

// Plants sometimes sit one block deep; only wrappers no seed starts with.
std::vector<Wrapper> usable_wrappers(std::span<const RootShape> avoid)
{
    const std::set<RootShape> roots(avoid.begin(), avoid.end());
    std::vector<Wrapper> out;
    for (const Wrapper& w : {Wrapper{{NodeKind::Other, "FunctionDecl"}, "function handler%N%() {"},
                             Wrapper{{NodeKind::If, ""}, "if ($enabled%N%) {"},
                             Wrapper{{NodeKind::Foreach, ""}, "foreach ($items%N% as $item) {"}}) {
        if (!roots.count(w.shape))
            out.push_back(w);
    }
    return out;
}

const char* const kExtensions[] = {".php", ".inc", ".phtml"};

} // namespace

Result<CorpusLedger> generate_test_corpus(const fs::path& root, const CorpusSpec& spec)
{
    if (spec.repo_count == 0 || spec.seeds.empty() || spec.mutations.empty())
        return make_error(ErrorCode::EmptyInput, "corpus needs at least one repository, seed and mutation");

    CorpusLedger ledger;
    std::vector<SourceUnit> units;
    std::vector<RootShape> avoid;
    for (const CorpusSeed& s : spec.seeds) {
        const bool tagged = s.php.find("<?") != std::string::npos;
        auto unit = parse_source(tagged ? s.php : "<?php\n" + s.php, s.name);
        if (!unit.ok())
            return unit.error();
        const auto stmts = whole_unit(*unit).statements;
        auto t = derive_template(*unit, stmts, QueryMode::Normal, s.policy);
        if (!t.ok())
            return t.error();
        for (auto& shape : root_shapes(*unit, stmts))
            avoid.push_back(std::move(shape));
        units.push_back(std::move(*unit));
        ledger.templates.push_back(std::move(*t));
    }
    for (std::size_t i = 0; i < units.size(); ++i) {
        for (std::size_t j = 0; j < units.size(); ++j) {
            if (i != j && !brute_force_scan(ledger.templates[i], units[j]).empty())
                return make_error(ErrorCode::SchemaViolation,
                                  "seed '" + spec.seeds[i].name + "' matches inside seed '" + spec.seeds[j].name + "'");
        }
    }
    FillerSource fillers(avoid);
    if (fillers.empty())
        return make_error(ErrorCode::SchemaViolation, "seeds use every filler statement shape");
    const std::vector<Wrapper> wrappers = usable_wrappers(avoid);

    std::mt19937_64 rng(spec.rng_seed);
    auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
    unsigned wrapper_counter = 0;

    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec)
        return make_error(ErrorCode::IoError, "cannot create " + root.string() + ": " + ec.message());
    std::ofstream ledger_out(root / std::string(kLedgerFile));

    for (std::size_t r = 0; r < spec.repo_count; ++r) {
        char name[32];
        std::snprintf(name, sizeof name, "repo%03zu", r);
        ledger.repos.emplace_back(name);
        const fs::path repo = root / name;
        fs::create_directories(repo / "src");
        for (std::size_t f = 0; f < spec.files_per_repo; ++f) {
            const std::string rel = "src/page" + std::to_string(f) + kExtensions[f % 3];
            std::string text = "<?php\n";
            int next_line = 2;
            auto emit = [&](const std::string& chunk) {
                text += chunk;
                next_line += count_lines(chunk);
            };
            const std::size_t plants = pick(spec.max_plants_per_file + 1);
            const std::size_t pads = std::max<std::size_t>(1, spec.filler_statements / (plants + 1));
            for (std::size_t k = 0;; ++k) {
                for (std::size_t i = 0; i < pads; ++i)
                    emit(fillers.next(rng, 0));
                if (k == plants)
                    break;
                const std::size_t si = pick(units.size());
                const Mutation m = spec.mutations[pick(spec.mutations.size())];
                const SourceUnit& seed = units[si];
                const bool wrap = !wrappers.empty() && pick(3) == 0;
                const int indent = wrap ? 1 : 0;
                auto mutant = render_mutant(seed, whole_unit(seed).statements, m, rng, fillers, indent);
                if (!mutant.ok())
                    continue; // e.g. nothing to break in this seed
                if (wrap) {
                    std::string open = wrappers[pick(wrappers.size())].open;
                    open.replace(open.find("%N%"), 3, std::to_string(wrapper_counter++));
                    emit(open + "\n");
                }
                PlantRecord rec;
                rec.repo = name;
                rec.file = rel;
                rec.seed_index = si;
                rec.mutation = m;
                rec.line_start = next_line + mutant->first_stmt_offset;
                rec.line_end = next_line + mutant->line_count - 1 - (m == Mutation::InsertAround ? 1 : 0);
                rec.expect_match = preserves_match(m);
                emit(mutant->text);
                if (wrap)
                    emit("}\n");
                ledger_out << nlohmann::json{{"repo", rec.repo},
                                             {"file", rec.file},
                                             {"seed", rec.seed_index},
                                             {"mutation", to_string(rec.mutation)},
                                             {"lines", {rec.line_start, rec.line_end}},
                                             {"expect_match", rec.expect_match}}
                                  .dump()
                           << '\n';
                ledger.plants.push_back(std::move(rec));
            }
            std::ofstream(repo / rel) << text;
        }
        std::ofstream(repo / "README.txt") << "generated fixture repository " << name << '\n';
        if (spec.broken_files)
            std::ofstream(repo / "src" / "broken.php") << "<?php\nif ($x {\n    echo 'unbalanced';\n";
    }
    return ledger;
}

RandomCase make_random_case(PhpGenerator& gen)
{
    static const Mutation kAll[] = {Mutation::Replica, Mutation::Rename, Mutation::LiteralChange,
                                    Mutation::InsertBetween, Mutation::InsertAround, Mutation::BreakDataflow};
    for (;;) {
        auto seed = parse_source("<?php\n" + gen.statements(gen.uniform(1, 3), 1), "seed.php");
        if (!seed.ok() || seed->statements(seed->root()).empty())
            continue;
        const auto stmts = whole_unit(*seed).statements;
        const auto policy = gen.chance(0.5) ? SymbolPolicy::Preserve : SymbolPolicy::Wildcard;
        auto t = derive_template(*seed, stmts, gen.chance(0.5) ? QueryMode::Normal : QueryMode::Strict, policy);
        if (!t.ok())
            continue;

        FillerSource fillers;
        std::string text = "<?php\n";
        const int chunks = gen.uniform(2, 6);
        for (int c = 0; c < chunks; ++c) {
            text += gen.statements(gen.uniform(0, 3));
            const bool nested = gen.chance(0.3);
            auto mutant = render_mutant(*seed, stmts, kAll[gen.uniform(0, 5)], gen.rng(), fillers, nested ? 1 : 0);
            if (!mutant.ok())
                continue;
            text += nested ? "if ($guard) {\n" + mutant->text + "}\n" : mutant->text;
        }
        auto target = parse_source(text, "target.php");
        if (!target.ok())
            continue;
        return RandomCase{std::move(*seed), std::move(*t), std::move(*target)};
    }
}

} // namespace cadet

#include "cadet/matcher.hpp"

#include "cadet/hash.hpp"

#include <nlohmann/json.hpp>

#include <sstream>

namespace cadet {

using nlohmann::json;

std::string query_id_of(const Template& t)
{
    return "q" + hex64(fnv1a64(canonical_template_text(t)));
}

MatcherProgram compile(const Template& t)
{
    MatcherProgram p;
    p.statement_count = static_cast<std::uint32_t>(t.statements.size());
    p.var_class_count = static_cast<std::uint32_t>(t.var_class_count);
    p.slot_count = static_cast<std::uint32_t>(t.nodes.size());
    p.template_depth = t.template_depth;
    p.query_id = query_id_of(t);
    p.origin = t.origin;
    p.mode = t.mode;
    p.symbol_policy = t.symbol_policy;

    std::vector<bool> bound(static_cast<std::size_t>(t.var_class_count), false);

    // ConvertNode: kind filter, then the leaf's symbol or variable step, then
    // the children in order.
    auto convert = [&](auto&& self, TemplateNodeId id, std::int32_t parent, std::uint32_t index) -> void {
        const TemplateNode& n = t.node(id);
        MatcherStep f;
        f.op = StepOp::FilterKind;
        f.slot = id;
        f.kind = n.kind;
        f.tag = n.tag;
        f.parent_slot = parent;
        f.child_index = index;
        f.arity = static_cast<std::uint32_t>(n.children.size());
        p.steps.push_back(std::move(f));
        if (n.role == LeafRole::ApiSymbol) {
            MatcherStep s;
            s.op = StepOp::FilterSymbol;
            s.slot = id;
            s.symbol = n.api_name;
            p.steps.push_back(std::move(s));
        } else if (n.role == LeafRole::VarWildcard) {
            MatcherStep v;
            auto cls = static_cast<std::size_t>(n.class_id);
            v.op = bound[cls] ? StepOp::CheckVar : StepOp::BindVar;
            v.slot = id;
            v.class_id = n.class_id;
            bound[cls] = true;
            p.steps.push_back(std::move(v));
        }
        for (std::uint32_t i = 0; i < n.children.size(); ++i)
            self(self, n.children[i], static_cast<std::int32_t>(id), i);
    };

    for (std::size_t s = 0; s < t.statements.size(); ++s) {
        if (s > 0) {
            MatcherStep next;
            next.op = StepOp::NextStatement;
            p.steps.push_back(next);
        }
        convert(convert, t.statements[s], -1, 0);
    }
    return p;
}

std::optional<Error> verify_program(const MatcherProgram& p)
{
    auto bad = [](const std::string& msg, std::size_t step) {
        return make_error(ErrorCode::SchemaViolation, msg, static_cast<std::int64_t>(step));
    };
    std::vector<bool> written(p.slot_count, false);
    std::vector<bool> bound(p.var_class_count, false);
    std::uint32_t boundaries = 0;
    bool statement_open = false;
    for (std::size_t i = 0; i < p.steps.size(); ++i) {
        const MatcherStep& s = p.steps[i];
        if (s.op == StepOp::NextStatement) {
            if (!statement_open)
                return bad("empty statement run", i);
            ++boundaries;
            statement_open = false;
            continue;
        }
        if (s.slot >= p.slot_count)
            return bad("register out of range", i);
        switch (s.op) {
        case StepOp::FilterKind:
            if (s.parent_slot < 0) {
                if (statement_open)
                    return bad("second statement root without NextStatement", i);
                statement_open = true;
            } else if (static_cast<std::uint32_t>(s.parent_slot) >= p.slot_count || !written[static_cast<std::size_t>(s.parent_slot)]) {
                return bad("parent register read before it is written", i);
            }
            if (!statement_open)
                return bad("filter before any statement root", i);
            written[s.slot] = true;
            break;
        case StepOp::FilterSymbol:
            if (!written[s.slot])
                return bad("symbol filter on an unwritten register", i);
            break;
        case StepOp::BindVar:
        case StepOp::CheckVar: {
            if (!written[s.slot])
                return bad("variable step on an unwritten register", i);
            if (s.class_id < 0 || static_cast<std::uint32_t>(s.class_id) >= p.var_class_count)
                return bad("class id out of range", i);
            auto cls = static_cast<std::size_t>(s.class_id);
            if (s.op == StepOp::BindVar) {
                if (bound[cls])
                    return bad("class bound twice", i);
                bound[cls] = true;
            } else if (!bound[cls]) {
                return bad("check before bind", i);
            }
            break;
        }
        case StepOp::NextStatement: break;
        }
    }
    if (!statement_open || boundaries + 1 != p.statement_count)
        return bad("statement_count disagrees with NextStatement boundaries", p.steps.size());
    return std::nullopt;
}

std::string export_traversal_script(const MatcherProgram& p)
{
    std::ostringstream out;
    std::uint32_t stmt = 0;
    for (const MatcherStep& s : p.steps) {
        const std::string kind = s.kind == NodeKind::Other && !s.tag.empty() ? s.tag : std::string(kind_name(s.kind));
        switch (s.op) {
        case StepOp::FilterKind:
            if (s.parent_slot < 0)
                out << "n" << s.slot << " = stmt" << stmt << ".filter{ it.type == '" << kind << "'";
            else
                out << "n" << s.slot << " = n" << s.parent_slot << ".out('PARENT_OF').filter{ it.childnum == " << s.child_index
                    << " }.filter{ it.type == '" << kind << "'";
            if (s.kind != NodeKind::Other && !s.tag.empty())
                out << " && it.op == '" << s.tag << "'";
            out << " }\n";
            break;
        case StepOp::FilterSymbol:
            out << "n" << s.slot << ".filter{ it.code == '" << s.symbol << "' }\n";
            break;
        case StepOp::BindVar:
            out << "n" << s.slot << ".sideEffect{ var" << s.class_id << " = it.code }\n";
            break;
        case StepOp::CheckVar:
            out << "n" << s.slot << ".filter{ it.code == var" << s.class_id << " }\n";
            break;
        case StepOp::NextStatement:
            out << "stmt" << (stmt + 1) << " = stmt" << stmt << ".nextStatement()\n";
            ++stmt;
            break;
        }
    }
    return out.str();
}

namespace {

const char* op_name(StepOp op)
{
    switch (op) {
    case StepOp::FilterKind: return "filter_kind";
    case StepOp::FilterSymbol: return "filter_symbol";
    case StepOp::BindVar: return "bind_var";
    case StepOp::CheckVar: return "check_var";
    case StepOp::NextStatement: return "next_statement";
    }
    return "";
}

std::optional<StepOp> op_from(std::string_view s)
{
    for (StepOp op : {StepOp::FilterKind, StepOp::FilterSymbol, StepOp::BindVar, StepOp::CheckVar, StepOp::NextStatement}) {
        if (s == op_name(op))
            return op;
    }
    return std::nullopt;
}

} // namespace

std::string serialize_program(const MatcherProgram& p)
{
    std::ostringstream out;
    json header{
        {"format", "prog-v1"},
        {"query_id", p.query_id},
        {"statement_count", p.statement_count},
        {"var_class_count", p.var_class_count},
        {"slot_count", p.slot_count},
        {"template_depth", p.template_depth},
        {"mode", to_string(p.mode)},
        {"symbol_policy", to_string(p.symbol_policy)},
        {"origin", {{"path", p.origin.path}, {"lines", {p.origin.first_line, p.origin.last_line}}}},
    };
    out << header.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
    for (const MatcherStep& s : p.steps) {
        json rec{{"op", op_name(s.op)}};
        switch (s.op) {
        case StepOp::FilterKind:
            rec["slot"] = s.slot;
            rec["kind"] = kind_name(s.kind);
            if (!s.tag.empty())
                rec["tag"] = s.tag;
            rec["parent"] = s.parent_slot;
            rec["child"] = s.child_index;
            rec["arity"] = s.arity;
            break;
        case StepOp::FilterSymbol:
            rec["slot"] = s.slot;
            rec["symbol"] = s.symbol;
            break;
        case StepOp::BindVar:
        case StepOp::CheckVar:
            rec["slot"] = s.slot;
            rec["class"] = s.class_id;
            break;
        case StepOp::NextStatement: break;
        }
        out << rec.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
    }
    return out.str();
}

Result<MatcherProgram> deserialize_program(std::string_view text)
{
    std::istringstream in{std::string(text)};
    std::string line;
    std::int64_t index = -1;
    MatcherProgram p;
    bool have_header = false;
    auto violation = [&](const std::string& msg) { return make_error(ErrorCode::SchemaViolation, msg, index); };
    try {
        while (std::getline(in, line)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos)
                continue;
            ++index;
            json rec = json::parse(line, nullptr, false);
            if (rec.is_discarded() || !rec.is_object())
                return violation("record is not a JSON object");
            if (!have_header) {
                if (rec.value("format", std::string{}) != "prog-v1")
                    return violation("missing prog-v1 header");
                p.query_id = rec.at("query_id").get<std::string>();
                p.statement_count = rec.at("statement_count").get<std::uint32_t>();
                p.var_class_count = rec.at("var_class_count").get<std::uint32_t>();
                p.slot_count = rec.at("slot_count").get<std::uint32_t>();
                p.template_depth = rec.at("template_depth").get<int>();
                auto mode = query_mode_from(rec.value("mode", std::string{"normal"}));
                auto policy = symbol_policy_from(rec.value("symbol_policy", std::string{"preserve"}));
                if (!mode || !policy)
                    return violation("unknown mode or symbol_policy");
                p.mode = *mode;
                p.symbol_policy = *policy;
                if (rec.contains("origin") && rec["origin"].is_object()) {
                    p.origin.path = rec["origin"].value("path", std::string{});
                    const json& ln = rec["origin"].value("lines", json::array());
                    if (ln.is_array() && ln.size() == 2) {
                        p.origin.first_line = ln[0].get<int>();
                        p.origin.last_line = ln[1].get<int>();
                    }
                }
                have_header = true;
                continue;
            }
            auto op = op_from(rec.value("op", std::string{}));
            if (!op)
                return violation("unknown step op");
            MatcherStep s;
            s.op = *op;
            switch (s.op) {
            case StepOp::FilterKind: {
                s.slot = rec.at("slot").get<TemplateNodeId>();
                const std::string kind = rec.at("kind").get<std::string>();
                auto k = kind_from_name(kind);
                if (!k)
                    return violation("unknown node kind " + kind);
                s.kind = *k;
                s.tag = rec.value("tag", std::string{});
                s.parent_slot = rec.at("parent").get<std::int32_t>();
                s.child_index = rec.at("child").get<std::uint32_t>();
                s.arity = rec.at("arity").get<std::uint32_t>();
                break;
            }
            case StepOp::FilterSymbol:
                s.slot = rec.at("slot").get<TemplateNodeId>();
                s.symbol = rec.at("symbol").get<std::string>();
                break;
            case StepOp::BindVar:
            case StepOp::CheckVar:
                s.slot = rec.at("slot").get<TemplateNodeId>();
                s.class_id = rec.at("class").get<int>();
                break;
            case StepOp::NextStatement: break;
            }
            p.steps.push_back(std::move(s));
        }
    } catch (const json::exception& e) {
        return violation(std::string("malformed field: ") + e.what());
    }
    if (!have_header) {
        index = 0;
        return violation("empty program stream");
    }
    if (auto err = verify_program(p))
        return *err;
    return p;
}

} // namespace cadet

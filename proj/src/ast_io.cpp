#include "cadet/ast_io.hpp"

#include <nlohmann/json.hpp>

#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace cadet {

using nlohmann::json;

void export_ast(const SourceUnit& unit, std::ostream& out)
{
    out << json{{"format", "ast-v1"}, {"path", unit.path()}, {"root", unit.root()}}.dump() << '\n';
    for (const AstNode& n : unit.nodes()) {
        json rec;
        rec["id"] = n.id;
        if (n.kind == NodeKind::Other && !n.tag.empty())
            rec["kind"] = n.tag;
        else
            rec["kind"] = kind_name(n.kind);
        rec["children"] = n.children;
        if (n.symbol)
            rec["symbol"] = *n.symbol;
        if (n.value)
            rec["value"] = *n.value;
        rec["line"] = {n.line_start, n.line_end};
        if (n.kind != NodeKind::Other && !n.tag.empty())
            rec["op"] = n.tag;
        out << rec.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
    }
}

std::string export_ast(const SourceUnit& unit)
{
    std::ostringstream os;
    export_ast(unit, os);
    return os.str();
}

Result<SourceUnit> import_ast(std::istream& in)
{
    std::string line;
    std::int64_t index = -1;
    std::optional<json> header;
    TreeBuilder builder;
    std::unordered_map<std::int64_t, NodeId> by_id;
    std::vector<std::vector<std::int64_t>> raw_children;
    std::vector<std::int64_t> record_of; // builder index -> record index

    auto violation = [&](const std::string& msg) { return make_error(ErrorCode::SchemaViolation, msg, index); };

    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        ++index;
        json rec = json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object())
            return violation("record is not a JSON object");
        if (!header) {
            if (!rec.contains("format") || rec["format"] != "ast-v1")
                return violation("missing ast-v1 header");
            if (!rec.contains("root") || !rec["root"].is_number_integer())
                return violation("header lacks an integer root");
            header = std::move(rec);
            continue;
        }
        if (!rec.contains("id") || !rec["id"].is_number_integer())
            return violation("record lacks an integer id");
        if (!rec.contains("kind") || !rec["kind"].is_string())
            return violation("record lacks a kind");
        const std::int64_t id = rec["id"].get<std::int64_t>();
        if (by_id.count(id))
            return violation("duplicate id " + std::to_string(id));

        const std::string kind_text = rec["kind"].get<std::string>();
        NodeKind kind = NodeKind::Other;
        std::string tag;
        if (auto k = kind_from_name(kind_text))
            kind = *k;
        else
            tag = kind_text;

        int ls = 1;
        int le = 1;
        if (rec.contains("line")) {
            const json& ln = rec["line"];
            if (!ln.is_array() || ln.size() != 2 || !ln[0].is_number_integer() || !ln[1].is_number_integer())
                return violation("line must be [start, end]");
            ls = ln[0].get<int>();
            le = ln[1].get<int>();
        }
        NodeId n = builder.add(kind, {}, ls, le);
        AstNode& node = builder.at(n);
        if (kind != NodeKind::Other || !tag.empty())
            node.tag = tag;
        if (rec.contains("op")) {
            if (!rec["op"].is_string())
                return violation("op must be a string");
            node.tag = rec["op"].get<std::string>();
        }
        if (rec.contains("symbol")) {
            if (!rec["symbol"].is_string())
                return violation("symbol must be a string");
            node.symbol = rec["symbol"].get<std::string>();
        }
        if (rec.contains("value")) {
            if (!rec["value"].is_string())
                return violation("value must be a string");
            node.value = rec["value"].get<std::string>();
        }
        std::vector<std::int64_t> kids;
        if (rec.contains("children")) {
            if (!rec["children"].is_array())
                return violation("children must be an array");
            for (const json& c : rec["children"]) {
                if (!c.is_number_integer())
                    return violation("child ids must be integers");
                kids.push_back(c.get<std::int64_t>());
            }
        }
        by_id.emplace(id, n);
        raw_children.push_back(std::move(kids));
        record_of.push_back(index);
    }
    if (!header) {
        index = 0;
        return violation("empty stream");
    }

    for (NodeId n = 0; n < raw_children.size(); ++n) {
        for (std::int64_t c : raw_children[n]) {
            auto it = by_id.find(c);
            if (it == by_id.end())
                return make_error(ErrorCode::SchemaViolation, "dangling child reference " + std::to_string(c), record_of[n]);
            builder.at(n).children.push_back(it->second);
        }
    }
    auto root_it = by_id.find((*header)["root"].get<std::int64_t>());
    if (root_it == by_id.end())
        return make_error(ErrorCode::SchemaViolation, "root id does not name a record", 0);

    std::string path = header->value("path", std::string{});
    auto unit = std::move(builder).finish(root_it->second, std::move(path));
    if (!unit) {
        Error e = unit.error();
        if (e.location >= 0 && static_cast<std::size_t>(e.location) < record_of.size())
            e.location = record_of[static_cast<std::size_t>(e.location)];
        return e;
    }
    return unit;
}

Result<SourceUnit> import_ast(std::string_view text)
{
    std::istringstream in{std::string(text)};
    return import_ast(in);
}

} // namespace cadet

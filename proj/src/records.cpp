#include "cadet/records.hpp"

namespace cadet {

using nlohmann::json;

MatchRecord to_record(const Match& m, std::string repo)
{
    MatchRecord r;
    r.query = m.query_id;
    r.repo = std::move(repo);
    r.file = m.unit_path;
    r.line_start = m.line_start;
    r.line_end = m.line_end;
    r.stmt_index = m.start_index;
    r.bindings = m.bindings;
    r.excerpt = m.excerpt;
    return r;
}

json to_json(const MatchRecord& r)
{
    json bindings = json::object();
    for (const auto& [cls, name] : r.bindings)
        bindings[std::to_string(cls)] = name;
    json out{
        {"query", r.query},
        {"file", r.file},
        {"lines", {r.line_start, r.line_end}},
        {"stmt_index", r.stmt_index},
        {"bindings", bindings},
        {"excerpt", r.excerpt},
    };
    if (!r.repo.empty())
        out["repo"] = r.repo;
    return out;
}

std::string to_jsonl(const MatchRecord& r)
{
    return to_json(r).dump(-1, ' ', false, json::error_handler_t::replace);
}

Result<MatchRecord> parse_match_record(std::string_view line)
{
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        return make_error(ErrorCode::SchemaViolation, "match record is not a JSON object");
    try {
        MatchRecord r;
        r.query = j.at("query").get<std::string>();
        r.file = j.at("file").get<std::string>();
        const json& lines = j.at("lines");
        if (!lines.is_array() || lines.size() != 2)
            return make_error(ErrorCode::SchemaViolation, "lines must be [start, end]");
        r.line_start = lines[0].get<int>();
        r.line_end = lines[1].get<int>();
        r.stmt_index = j.at("stmt_index").get<std::uint32_t>();
        for (const auto& [cls, name] : j.at("bindings").items())
            r.bindings.emplace(std::stoi(cls), name.get<std::string>());
        r.excerpt = j.value("excerpt", std::string{});
        r.repo = j.value("repo", std::string{});
        return r;
    } catch (const std::exception& e) {
        return make_error(ErrorCode::SchemaViolation, std::string("malformed match record: ") + e.what());
    }
}

} // namespace cadet

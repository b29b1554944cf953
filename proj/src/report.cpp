#include "cadet/report.hpp"

#include "cadet/records.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <iomanip>
#include <istream>
#include <sstream>
#include <tuple>

namespace cadet {

using nlohmann::json;

namespace {

// Repository ids are paths; metadata is keyed by owner/name.
std::optional<PopularityBucket> bucket_for(const std::string& repo, const std::map<std::string, PopularityBucket>& by_name)
{
    for (const auto& [name, bucket] : by_name) {
        if (repo == name || (repo.size() > name.size() && repo.compare(repo.size() - name.size(), name.size(), name) == 0 &&
                             repo[repo.size() - name.size() - 1] == '/'))
            return bucket;
    }
    return std::nullopt;
}

template <typename F>
void each_line(std::istream& in, const std::string& label, std::vector<std::string>& warnings, F&& f)
{
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        if (auto problem = f(line))
            warnings.push_back(label + ":" + std::to_string(number) + ": " + *problem);
    }
}

} // namespace

ReportInput load_report_input(std::istream& matches, std::istream* stats, std::istream* repos)
{
    ReportInput in;
    std::map<std::string, std::string> origins;
    if (stats) {
        each_line(*stats, "stats", in.warnings, [&](const std::string& line) -> std::optional<std::string> {
            json j = json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.is_object() || !j.contains("repo") || !j.contains("query"))
                return "malformed stats record skipped";
            try {
                in.scanned_repos.insert(j["repo"].get<std::string>());
                if (j.contains("origin") && j["origin"].is_object()) {
                    const json& o = j["origin"];
                    std::string text = o.value("path", std::string{});
                    const json lines = o.value("lines", json::array());
                    if (lines.is_array() && lines.size() == 2)
                        text += ":" + std::to_string(lines[0].get<int>()) + "-" + std::to_string(lines[1].get<int>());
                    origins.emplace(j["query"].get<std::string>(), text);
                }
            } catch (const json::exception& e) {
                return std::string("malformed stats record skipped: ") + e.what();
            }
            return std::nullopt;
        });
    }
    std::map<std::string, PopularityBucket> by_name;
    if (repos) {
        each_line(*repos, "repos", in.warnings, [&](const std::string& line) -> std::optional<std::string> {
            auto meta = parse_repo_meta(line, "");
            if (!meta.ok())
                return "malformed repository record skipped: " + meta.error().message;
            by_name[meta->full_name] = classify(*meta);
            return std::nullopt;
        });
    }
    each_line(matches, "matches", in.warnings, [&](const std::string& line) -> std::optional<std::string> {
        auto rec = parse_match_record(line);
        if (!rec.ok())
            return "malformed match record skipped: " + rec.error().message;
        ReportRow row;
        row.query_id = rec->query;
        if (auto it = origins.find(rec->query); it != origins.end())
            row.origin = it->second;
        row.repo = rec->repo;
        row.file = rec->file;
        row.line_start = rec->line_start;
        row.line_end = rec->line_end;
        row.bindings = rec->bindings;
        row.excerpt = rec->excerpt;
        row.bucket = bucket_for(row.repo, by_name);
        in.rows.push_back(std::move(row));
        return std::nullopt;
    });
    for (const ReportRow& r : in.rows)
        in.scanned_repos.insert(r.repo);
    for (const std::string& repo : in.scanned_repos) {
        if (auto b = bucket_for(repo, by_name))
            in.buckets[repo] = *b;
    }
    std::stable_sort(in.rows.begin(), in.rows.end(), [](const ReportRow& a, const ReportRow& b) {
        return std::tie(a.repo, a.file, a.line_start, a.line_end, a.query_id) <
               std::tie(b.repo, b.file, b.line_start, b.line_end, b.query_id);
    });
    return in;
}

std::vector<SummaryLine> summarize(const ReportInput& in)
{
    constexpr PopularityBucket order[] = {PopularityBucket::NotPopular, PopularityBucket::Popular, PopularityBucket::VeryPopular};
    std::vector<SummaryLine> lines;
    std::vector<std::set<std::tuple<std::string, std::string, int, int>>> places(5);
    for (auto b : order)
        lines.push_back({std::string(display_name(b))});
    lines.push_back({"Unclassified"});
    lines.push_back({"Total"});
    auto slot = [&](const std::string& repo) {
        auto it = in.buckets.find(repo);
        return it == in.buckets.end() ? std::size_t{3} : static_cast<std::size_t>(it->second);
    };
    for (const std::string& repo : in.scanned_repos) {
        ++lines[slot(repo)].size;
        ++lines[4].size;
    }
    for (const ReportRow& r : in.rows) {
        const auto place = std::make_tuple(r.repo, r.file, r.line_start, r.line_end);
        for (std::size_t s : {slot(r.repo), std::size_t{4}}) {
            ++lines[s].matches;
            places[s].insert(place);
        }
    }
    for (std::size_t s = 0; s < 5; ++s)
        lines[s].analogues = places[s].size();
    if (lines[3].size == 0 && lines[3].matches == 0)
        lines.erase(lines.begin() + 3);
    return lines;
}

std::string render_text(const ReportInput& in)
{
    std::ostringstream out;
    for (const ReportRow& r : in.rows) {
        if (!r.repo.empty())
            out << r.repo << ": ";
        out << r.file << ":" << r.line_start;
        if (r.line_end != r.line_start)
            out << "-" << r.line_end;
        out << "  " << r.query_id;
        if (!r.origin.empty())
            out << " (seed " << r.origin << ")";
        if (r.bucket)
            out << "  [" << display_name(*r.bucket) << "]";
        out << '\n';
        if (!r.bindings.empty()) {
            out << "    bindings:";
            for (const auto& [cls, name] : r.bindings)
                out << " v" << cls << "=" << name;
            out << '\n';
        }
        std::istringstream excerpt(r.excerpt);
        std::string line;
        while (std::getline(excerpt, line))
            out << "    | " << line << '\n';
    }
    out << in.rows.size() << (in.rows.size() == 1 ? " match\n" : " matches\n");
    return out.str();
}

std::string render_summary(const ReportInput& in)
{
    const auto lines = summarize(in);
    std::ostringstream out;
    auto row = [&](const std::string& a, const std::string& b, const std::string& c, const std::string& d, const std::string& e) {
        out << std::left << std::setw(14) << a << std::right << std::setw(8) << b << std::setw(16) << c << std::setw(10) << d << "  "
            << e << '\n';
    };
    row("Data set", "Size", "Code analogues", "Matches", "Vulnerabilities");
    for (const SummaryLine& l : lines) {
        if (l.label == "Total")
            out << std::string(66, '-') << '\n';
        row(l.label, std::to_string(l.size), std::to_string(l.analogues), std::to_string(l.matches), "(manual review)");
    }
    const std::size_t total = lines.back().analogues;
    out << total << (total == 1 ? " analogue\n" : " analogues\n");
    return out.str();
}

} // namespace cadet

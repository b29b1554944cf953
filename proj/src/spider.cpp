#include "cadet/spider.hpp"

#include "process.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <ctime>
#include <fstream>
#include <sstream>
#include <thread>

namespace cadet {

namespace fs = std::filesystem;
using nlohmann::json;

PopularityBucket classify(std::int64_t stars)
{
    if (stars <= 3)
        return PopularityBucket::NotPopular;
    if (stars <= 9)
        return PopularityBucket::Popular;
    return PopularityBucket::VeryPopular;
}

std::string_view to_string(PopularityBucket b)
{
    switch (b) {
    case PopularityBucket::NotPopular: return "not-popular";
    case PopularityBucket::Popular: return "popular";
    case PopularityBucket::VeryPopular: return "very-popular";
    }
    return "not-popular";
}

std::string_view display_name(PopularityBucket b)
{
    switch (b) {
    case PopularityBucket::NotPopular: return "Not popular";
    case PopularityBucket::Popular: return "Popular";
    case PopularityBucket::VeryPopular: return "Very popular";
    }
    return "Not popular";
}

std::optional<PopularityBucket> bucket_from(std::string_view text)
{
    for (auto b : {PopularityBucket::NotPopular, PopularityBucket::Popular, PopularityBucket::VeryPopular}) {
        if (to_string(b) == text)
            return b;
    }
    return std::nullopt;
}

namespace {

bool iequals(std::string_view a, std::string_view b)
{
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
           });
}

} // namespace

std::vector<RepoMeta> filter_candidates(const std::vector<RepoMeta>& metas, std::string_view language, std::int64_t max_size_kb)
{
    std::vector<RepoMeta> out;
    for (const RepoMeta& m : metas) {
        if (iequals(m.language, language) && m.size_kb < max_size_kb)
            out.push_back(m);
    }
    return out;
}

Clock::time_point SystemClock::now()
{
    return std::chrono::system_clock::now();
}

void SystemClock::sleep_until(time_point t)
{
    std::this_thread::sleep_until(t);
}

SimulatedClock::SimulatedClock(time_point start) : now_(start) {}

Clock::time_point SimulatedClock::now()
{
    std::lock_guard lock(mu_);
    return now_;
}

void SimulatedClock::sleep_until(time_point t)
{
    std::lock_guard lock(mu_);
    now_ = std::max(now_, t);
}

void SimulatedClock::advance(std::chrono::milliseconds d)
{
    std::lock_guard lock(mu_);
    now_ += d;
}

std::string iso8601(Clock::time_point t)
{
    const std::time_t secs = std::chrono::system_clock::to_time_t(t);
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

RateBudget::RateBudget(Clock& clock, RateBudgetConfig config) : clock_(clock), config_(config) {}

void RateBudget::expire(Clock::time_point now)
{
    while (!issued_.empty() && issued_.front() + config_.window <= now)
        issued_.pop_front();
}

Clock::time_point RateBudget::acquire()
{
    std::lock_guard lock(mu_);
    for (;;) {
        const auto now = clock_.now();
        expire(now);
        if (deferred_ && now < *deferred_) {
            clock_.sleep_until(*deferred_);
            continue;
        }
        if (issued_.size() >= config_.capacity) {
            clock_.sleep_until(issued_.front() + config_.window);
            continue;
        }
        if (!issued_.empty() && config_.min_interval.count() > 0 && now < issued_.back() + config_.min_interval) {
            clock_.sleep_until(issued_.back() + config_.min_interval);
            continue;
        }
        issued_.push_back(now);
        ++total_;
        return now;
    }
}

void RateBudget::defer_until(Clock::time_point reset)
{
    std::lock_guard lock(mu_);
    if (!deferred_ || *deferred_ < reset)
        deferred_ = reset;
}

std::size_t RateBudget::spent()
{
    std::lock_guard lock(mu_);
    expire(clock_.now());
    return issued_.size();
}

Clock::time_point RateBudget::window_start()
{
    std::lock_guard lock(mu_);
    const auto now = clock_.now();
    expire(now);
    return issued_.empty() ? now : issued_.front();
}

std::optional<Error> validate_token(std::string_view token)
{
    if (token.find_first_of(" \t\r\n,;") != std::string_view::npos)
        return make_error(ErrorCode::AuthError, "exactly one API token is accepted");
    return std::nullopt;
}

std::string cursor_to_json(const Cursor& c)
{
    return json{{"next_url", c.next_url}, {"done", c.done}, {"pages", c.pages}, {"emitted", c.emitted}}.dump();
}

Result<Cursor> cursor_from_json(std::string_view text)
{
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        return make_error(ErrorCode::SchemaViolation, "cursor state is not a JSON object");
    try {
        Cursor c;
        c.next_url = j.value("next_url", std::string{});
        c.done = j.value("done", false);
        c.pages = j.value("pages", std::size_t{0});
        c.emitted = j.value("emitted", std::size_t{0});
        return c;
    } catch (const json::exception& e) {
        return make_error(ErrorCode::SchemaViolation, std::string("bad cursor state: ") + e.what());
    }
}

Result<Cursor> load_cursor(const fs::path& state_file)
{
    std::error_code ec;
    if (!fs::exists(state_file, ec))
        return Cursor{};
    std::ifstream in(state_file);
    std::ostringstream ss;
    ss << in.rdbuf();
    return cursor_from_json(ss.str());
}

std::optional<Error> save_cursor(const fs::path& state_file, const Cursor& c)
{
    // write-then-rename so a crash never leaves a torn state file
    const fs::path tmp = state_file.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << cursor_to_json(c) << '\n';
        if (!out)
            return make_error(ErrorCode::IoError, "cannot write " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, state_file, ec);
    if (ec)
        return make_error(ErrorCode::IoError, "cannot replace " + state_file.string() + ": " + ec.message());
    return std::nullopt;
}

std::optional<std::string> next_link(std::string_view header)
{
    std::size_t pos = 0;
    while (pos < header.size()) {
        const auto open = header.find('<', pos);
        if (open == std::string_view::npos)
            return std::nullopt;
        const auto close = header.find('>', open);
        if (close == std::string_view::npos)
            return std::nullopt;
        const auto end = std::min(header.find(',', close), header.size());
        const std::string_view params = header.substr(close + 1, end - close - 1);
        if (params.find("rel=\"next\"") != std::string_view::npos || params.find("rel=next") != std::string_view::npos)
            return std::string(header.substr(open + 1, close - open - 1));
        pos = end + 1;
    }
    return std::nullopt;
}

namespace {

Result<RepoMeta> meta_from(const json& item, const std::string& fetched_at)
{
    if (!item.is_object())
        return make_error(ErrorCode::MalformedResponse, "repository entry is not an object");
    try {
        RepoMeta m;
        m.id = item.value("id", std::int64_t{0});
        m.full_name = item.at("full_name").get<std::string>();
        m.stars = item.value("stargazers_count", item.value("stars", std::int64_t{0}));
        m.size_kb = item.value("size", item.value("size_kb", std::int64_t{0}));
        const json& lang = item.contains("language") ? item["language"] : json();
        m.language = lang.is_string() ? lang.get<std::string>() : std::string{};
        m.clone_url = item.value("clone_url", std::string{});
        m.archive_url = item.value("archive_url", std::string{});
        m.fetched_at = item.value("fetched_at", fetched_at);
        if (m.stars < 0 || m.size_kb < 0)
            return make_error(ErrorCode::MalformedResponse, "negative stars or size for " + m.full_name);
        return m;
    } catch (const json::exception& e) {
        return make_error(ErrorCode::MalformedResponse, std::string("repository entry: ") + e.what());
    }
}

std::string substitute(std::string text, std::string_view key, std::string_view value)
{
    for (auto at = text.find(key); at != std::string::npos; at = text.find(key, at + value.size()))
        text.replace(at, key.size(), value);
    return text;
}

std::map<std::string, std::string> request_headers(const SpiderConfig& config, std::string_view accept)
{
    std::map<std::string, std::string> h{{"Accept", std::string(accept)}, {"User-Agent", config.user_agent}};
    if (!config.token.empty())
        h["Authorization"] = "Bearer " + config.token;
    return h;
}

std::optional<Clock::time_point> advertised_reset(const HttpResponse& r, Clock::time_point now)
{
    auto header = [&](const char* name) -> std::optional<std::int64_t> {
        auto it = r.headers.find(name);
        if (it == r.headers.end())
            return std::nullopt;
        try {
            return std::stoll(it->second);
        } catch (...) {
            return std::nullopt;
        }
    };
    if (auto after = header("retry-after"))
        return now + std::chrono::seconds(*after);
    auto remaining = header("x-ratelimit-remaining");
    auto reset = header("x-ratelimit-reset");
    if (remaining && *remaining == 0 && reset)
        return Clock::time_point(std::chrono::seconds(*reset));
    return std::nullopt;
}

// GET with the shared retry policy. Every attempt draws from the budget.
Result<HttpResponse> fetch(const std::string& url, const std::map<std::string, std::string>& headers, const SpiderConfig& config,
                           HttpClient& http, RateBudget& budget, std::size_t& requests)
{
    int failures = 0;
    for (;;) {
        budget.acquire();
        ++requests;
        HttpResponse r = http.get(url, headers);
        const auto now = budget.clock().now();
        if (r.status == 401)
            return make_error(ErrorCode::AuthError, "credentials rejected (HTTP 401) for " + url);
        if (r.status == 403 || r.status == 429) {
            if (auto reset = advertised_reset(r, now)) {
                budget.defer_until(*reset);
                continue;
            }
            return make_error(ErrorCode::AuthError, "access forbidden (HTTP " + std::to_string(r.status) + ") for " + url);
        }
        const bool transient = r.status == 0 || r.status >= 500;
        if (!transient) {
            if (r.status >= 200 && r.status < 300)
                return r;
            return make_error(ErrorCode::NetworkError, "HTTP " + std::to_string(r.status) + " for " + url);
        }
        if (failures >= config.max_retries)
            return make_error(ErrorCode::NetworkError,
                              "giving up on " + url + " after " + std::to_string(failures + 1) + " attempts: " +
                                  (r.status ? "HTTP " + std::to_string(r.status) : r.error));
        auto delay = config.backoff_base * (1LL << std::min(failures, 20));
        budget.clock().sleep_until(now + std::min<std::chrono::milliseconds>(delay, config.backoff_cap));
        ++failures;
    }
}

} // namespace

Result<RepoMeta> parse_repo_meta(std::string_view text, std::string fetched_at)
{
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded())
        return make_error(ErrorCode::MalformedResponse, "not JSON");
    return meta_from(j, fetched_at);
}

std::string repo_meta_to_json(const RepoMeta& m, bool with_bucket)
{
    json j{
        {"id", m.id},
        {"full_name", m.full_name},
        {"stars", m.stars},
        {"size_kb", m.size_kb},
        {"language", m.language},
        {"clone_url", m.clone_url},
        {"archive_url", m.archive_url},
        {"fetched_at", m.fetched_at},
    };
    if (with_bucket)
        j["bucket"] = to_string(classify(m));
    return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

Result<Page> enumerate_repos(const SpiderConfig& config, HttpClient& http, RateBudget& budget, const Cursor& cursor)
{
    Page page;
    page.next = cursor;
    if (cursor.done)
        return page;
    if (auto bad = validate_token(config.token))
        return *bad;
    const std::string url =
        cursor.next_url.empty() ? config.api_base + substitute(config.initial_path, "{language}", config.language) : cursor.next_url;

    auto r = fetch(url, request_headers(config, "application/vnd.github+json"), config, http, budget, page.requests);
    if (!r.ok())
        return r.error();

    const std::string fetched_at = iso8601(budget.clock().now());
    std::optional<std::string> next;
    if (auto it = r->headers.find("link"); it != r->headers.end())
        next = next_link(it->second);

    json body = json::parse(r->body, nullptr, false);
    const json* items = nullptr;
    if (!body.is_discarded()) {
        if (body.is_array())
            items = &body;
        else if (body.is_object() && body.contains("items") && body["items"].is_array())
            items = &body["items"];
    }
    if (!items) {
        page.warnings.push_back("malformed listing page skipped: " + url);
    } else {
        for (const json& item : *items) {
            auto m = meta_from(item, fetched_at);
            if (m.ok())
                page.repos.push_back(std::move(*m));
            else
                page.warnings.push_back(m.error().message);
        }
    }
    ++page.next.pages;
    page.next.emitted += page.repos.size();
    if (next) {
        page.next.next_url = *next;
    } else {
        page.next.next_url.clear();
        page.next.done = true;
    }
    return page;
}

namespace {

std::string archive_url_for(const RepoMeta& meta, const SpiderConfig& config)
{
    if (meta.archive_url.empty())
        return config.api_base + "/repos/" + meta.full_name + "/tarball";
    std::string url = substitute(meta.archive_url, "{archive_format}", "tarball");
    return substitute(url, "{/ref}", "");
}

} // namespace

Result<fs::path> download_repo(const RepoMeta& meta, const fs::path& dest, DownloadStrategy strategy, const SpiderConfig& config,
                               HttpClient& http, RateBudget& budget)
{
    const auto slash = meta.full_name.find('/');
    if (slash == std::string::npos || slash == 0 || slash + 1 == meta.full_name.size() ||
        meta.full_name.find("..") != std::string::npos)
        return make_error(ErrorCode::SchemaViolation, "full_name must look like owner/name: " + meta.full_name);
    const fs::path target = dest / meta.full_name.substr(0, slash) / meta.full_name.substr(slash + 1);
    std::error_code ec;
    if (fs::is_directory(target, ec))
        return target;
    fs::create_directories(target.parent_path(), ec);
    if (ec)
        return make_error(ErrorCode::IoError, "cannot create " + target.parent_path().string() + ": " + ec.message());
    const fs::path staging = target.string() + ".partial";
    fs::remove_all(staging, ec);

    if (strategy == DownloadStrategy::Clone) {
        if (meta.clone_url.empty())
            return make_error(ErrorCode::SchemaViolation, "no clone_url for " + meta.full_name);
        if (detail::run_process({"git", "clone", "--quiet", "--", meta.clone_url, staging.string()}) != 0) {
            fs::remove_all(staging, ec);
            return make_error(ErrorCode::NetworkError, "git clone failed for " + meta.full_name);
        }
    } else {
        std::size_t requests = 0;
        auto r = fetch(archive_url_for(meta, config), request_headers(config, "application/octet-stream"), config, http, budget,
                       requests);
        if (!r.ok())
            return r.error();
        const fs::path archive = target.string() + ".tar.gz";
        {
            std::ofstream out(archive, std::ios::binary | std::ios::trunc);
            out.write(r->body.data(), static_cast<std::streamsize>(r->body.size()));
            if (!out)
                return make_error(ErrorCode::IoError, "cannot write " + archive.string());
        }
        fs::create_directories(staging, ec);
        const int rc = detail::run_process({"tar", "-xzf", archive.string(), "-C", staging.string(), "--strip-components=1",
                                            "--no-same-owner", "--no-same-permissions"});
        fs::remove(archive, ec);
        if (rc != 0) {
            fs::remove_all(staging, ec);
            return make_error(ErrorCode::CorruptArchive, "cannot unpack the archive of " + meta.full_name);
        }
    }
    fs::rename(staging, target, ec);
    if (ec)
        return make_error(ErrorCode::IoError, "cannot move " + staging.string() + " into place: " + ec.message());
    return target;
}

} // namespace cadet

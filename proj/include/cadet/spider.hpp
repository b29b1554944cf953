#pragma once

#include "cadet/result.hpp"

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cadet {

struct RepoMeta {
    std::int64_t id = 0;
    std::string full_name; // owner/name
    std::int64_t stars = 0;
    std::int64_t size_kb = 0;
    std::string language;
    std::string clone_url;
    std::string archive_url;
    std::string fetched_at; // ISO 8601, UTC

    bool operator==(const RepoMeta&) const = default;
};

enum class PopularityBucket { NotPopular, Popular, VeryPopular };

PopularityBucket classify(std::int64_t stars);
inline PopularityBucket classify(const RepoMeta& m) { return classify(m.stars); }
std::string_view to_string(PopularityBucket b);  // "not-popular", ...
std::string_view display_name(PopularityBucket b); // "Not popular", ...
std::optional<PopularityBucket> bucket_from(std::string_view text);

inline constexpr std::int64_t kDefaultMaxSizeKb = 3072;

// Case-insensitive language match and size_kb strictly below the cap.
std::vector<RepoMeta> filter_candidates(const std::vector<RepoMeta>& metas, std::string_view language,
                                        std::int64_t max_size_kb = kDefaultMaxSizeKb);


// Time source for every wait the spider performs, so tests can run hours of
// schedule on a simulated clock.
class Clock {
public:
    using time_point = std::chrono::system_clock::time_point;
    virtual ~Clock() = default;
    virtual time_point now() = 0;
    virtual void sleep_until(time_point t) = 0;
};

class SystemClock final : public Clock {
public:
    time_point now() override;
    void sleep_until(time_point t) override;
};

// Sleeping advances the clock instantly.
class SimulatedClock final : public Clock {
public:
    explicit SimulatedClock(time_point start = time_point(std::chrono::seconds(1'700'000'000)));
    time_point now() override;
    void sleep_until(time_point t) override;
    void advance(std::chrono::milliseconds d);

private:
    std::mutex mu_;
    time_point now_;
};

std::string iso8601(Clock::time_point t);

struct RateBudgetConfig {
    std::size_t capacity = 5000;
    std::chrono::seconds window{3600};
    // Even spacing of 5000 requests over an hour.
    std::chrono::milliseconds min_interval{720};
};

// Sliding-window request budget: no window of length `window` ever holds
// more than `capacity` issued requests.
class RateBudget {
public:
    explicit RateBudget(Clock& clock, RateBudgetConfig config = {});

    // Waits on the clock until a request may go out, records it, and returns
    // the issue time.
    Clock::time_point acquire();
    // Server-advertised exhaustion: nothing is issued before `reset`.
    void defer_until(Clock::time_point reset);

    std::size_t spent();                // requests inside the current window
    Clock::time_point window_start();   // oldest request still in the window
    std::size_t total_issued() const noexcept { return total_; }
    const RateBudgetConfig& config() const noexcept { return config_; }
    Clock& clock() noexcept { return clock_; }

private:
    void expire(Clock::time_point now);

    Clock& clock_;
    RateBudgetConfig config_;
    std::mutex mu_;
    std::deque<Clock::time_point> issued_;
    std::optional<Clock::time_point> deferred_;
    std::size_t total_ = 0;
};

struct HttpResponse {
    int status = 0;                             // 0 on transport failure
    std::map<std::string, std::string> headers; // lower-case names
    std::string body;
    std::string error; // transport error text
};

class HttpClient {
public:
    virtual ~HttpClient() = default;
    virtual HttpResponse get(const std::string& url, const std::map<std::string, std::string>& headers) = 0;
};

// cpp-httplib transport; follows redirects, one keep-alive client per origin.
class HttplibClient final : public HttpClient {
public:
    explicit HttplibClient(std::chrono::seconds timeout = std::chrono::seconds(30));
    ~HttplibClient() override;
    HttpResponse get(const std::string& url, const std::map<std::string, std::string>& headers) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct SpiderConfig {
    std::string api_base = "https://api.github.com";
    std::string language = "php";
    // First page; {language} is substituted.
    std::string initial_path = "/search/repositories?q=language:{language}&sort=updated&per_page=100";
    std::string token; // a single token; see validate_token
    int max_retries = 5;
    std::chrono::milliseconds backoff_base{1000};
    std::chrono::milliseconds backoff_cap{60000};
    std::string user_agent = "cadet-spider";
};

// Rejects values that smuggle in several credentials.
std::optional<Error> validate_token(std::string_view token);

// Continuation of an enumeration. An empty next_url with done == false means
// "start from the initial path".
struct Cursor {
    std::string next_url;
    bool done = false;
    std::size_t pages = 0;
    std::size_t emitted = 0;

    bool operator==(const Cursor&) const = default;
};

std::string cursor_to_json(const Cursor& c);
Result<Cursor> cursor_from_json(std::string_view text);
Result<Cursor> load_cursor(const std::filesystem::path& state_file); // missing file: fresh cursor
std::optional<Error> save_cursor(const std::filesystem::path& state_file, const Cursor& c);

struct Page {
    std::vector<RepoMeta> repos;
    Cursor next;
    std::size_t requests = 0;
    std::vector<std::string> warnings;
};

// Fetches one listing page. Retries 5xx and transport failures with capped
// exponential backoff, waits out advertised rate-limit resets, fails with
// AuthError on 401 and NetworkError once retries run out. An unparsable page
// is skipped with a warning and the cursor still advances when it can.
Result<Page> enumerate_repos(const SpiderConfig& config, HttpClient& http, RateBudget& budget, const Cursor& cursor);

// URL of rel="next" in a Link header, if any.
std::optional<std::string> next_link(std::string_view link_header);

Result<RepoMeta> parse_repo_meta(std::string_view json_object, std::string fetched_at);
std::string repo_meta_to_json(const RepoMeta& m, bool with_bucket = true);

enum class DownloadStrategy { Archive, Clone };

// Working tree at dest/<owner>/<name>. Existing trees are returned untouched.
// Archive downloads count against the budget; clones go through git.
Result<std::filesystem::path> download_repo(const RepoMeta& meta, const std::filesystem::path& dest, DownloadStrategy strategy,
                                            const SpiderConfig& config, HttpClient& http, RateBudget& budget);

} // namespace cadet

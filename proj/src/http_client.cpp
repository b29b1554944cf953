#include "cadet/spider.hpp"

#include <httplib.h>

#include <algorithm>
#include <cctype>

namespace cadet {

struct HttplibClient::Impl {
    std::chrono::seconds timeout;
    std::mutex mu;
    std::map<std::string, std::unique_ptr<httplib::Client>> clients;

    httplib::Client& client_for(const std::string& origin)
    {
        auto& slot = clients[origin];
        if (!slot) {
            slot = std::make_unique<httplib::Client>(origin);
            slot->set_follow_location(true);
            slot->set_keep_alive(true);
            slot->set_tcp_nodelay(true);
            slot->set_connection_timeout(timeout);
            slot->set_read_timeout(timeout);
        }
        return *slot;
    }
};

HttplibClient::HttplibClient(std::chrono::seconds timeout) : impl_(std::make_unique<Impl>())
{
    impl_->timeout = timeout;
}

HttplibClient::~HttplibClient() = default;

HttpResponse HttplibClient::get(const std::string& url, const std::map<std::string, std::string>& headers)
{
    HttpResponse out;
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        out.error = "not an absolute URL: " + url;
        return out;
    }
    const auto path_start = url.find('/', scheme_end + 3);
    const std::string origin = url.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

    httplib::Headers h;
    for (const auto& [k, v] : headers)
        h.emplace(k, v);
    std::lock_guard lock(impl_->mu);
    auto res = impl_->client_for(origin).Get(path, h);
    if (!res) {
        out.error = httplib::to_string(res.error());
        return out;
    }
    out.status = res->status;
    out.body = std::move(res->body);
    for (const auto& [k, v] : res->headers) {
        std::string key = k;
        std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        out.headers[key] = v;
    }
    return out;
}

} // namespace cadet

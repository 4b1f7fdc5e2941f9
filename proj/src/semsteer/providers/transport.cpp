#include "semsteer/providers/transport.hpp"

#include <thread>

#include <httplib.h>

#include "semsteer/error.hpp"

namespace semsteer::providers {

HttpResponse HttplibTransport::post(const std::string& url, const Headers& headers, const std::string& body) {
    // Split "scheme://host[:port]" from the path.
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) return {0, {}, "malformed url '" + url + "'"};
    const auto path_start = url.find('/', scheme_end + 3);
    const std::string origin = url.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

    httplib::Client client(origin);
    client.set_connection_timeout(timeout_s_, 0);
    client.set_read_timeout(timeout_s_, 0);
    client.set_write_timeout(timeout_s_, 0);
    httplib::Headers hs;
    for (const auto& [k, v] : headers) hs.emplace(k, v);
    auto res = client.Post(path, hs, body, "application/json");
    if (!res) return {0, {}, httplib::to_string(res.error())};
    return {res->status, res->body, {}};
}

void ConcurrencyGate::acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < limit_; });
    ++in_flight_;
    max_observed_ = std::max(max_observed_, in_flight_);
}

void ConcurrencyGate::release() {
    {
        std::lock_guard lock(mu_);
        --in_flight_;
    }
    cv_.notify_one();
}

int ConcurrencyGate::max_observed() const {
    std::lock_guard lock(mu_);
    return max_observed_;
}

Sleeper real_sleeper() {
    return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

bool is_retryable_status(int status) noexcept {
    return status == 0 || status == 429 || (status >= 500 && status <= 599);
}

HttpResponse post_with_retry(const RetryPolicy& policy, const Sleeper& sleep, const std::function<HttpResponse()>& send,
                             const std::string& what) {
    std::chrono::milliseconds backoff(policy.backoff_ms);
    HttpResponse last;
    int attempt = 0;
    while (attempt < policy.max_attempts) {
        ++attempt;
        last = send();
        if (last.status >= 200 && last.status < 300) return last;
        if (!is_retryable_status(last.status)) break;
        if (attempt < policy.max_attempts) {
            sleep(backoff);
            backoff *= 2;
        }
    }
    std::string message = what + " failed after " + std::to_string(attempt) + " attempt(s)";
    message += last.status == 0 ? ": " + last.error : ": HTTP " + std::to_string(last.status);
    fail(ErrorKind::provider, message, {{"status", last.status}, {"attempts", attempt}, {"body", last.body.substr(0, 512)}});
}

} // namespace semsteer::providers

#pragma once

#include <chrono>
#include <condition_variable>
#include <functional>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "semsteer/providers/config.hpp"

namespace semsteer::providers {

using Headers = std::vector<std::pair<std::string, std::string>>;

struct HttpResponse {
    int status = 0;          // 0 => transport-level failure (no HTTP response)
    std::string body;
    std::string error;       // transport error description when status == 0
};

/// Outbound HTTP seam. Remote providers only talk through this, so tests can
/// substitute a recording fake.
class Transport {
public:
    virtual ~Transport() = default;
    virtual HttpResponse post(const std::string& url, const Headers& headers, const std::string& body) = 0;
};

/// cpp-httplib backed transport.
class HttplibTransport final : public Transport {
public:
    explicit HttplibTransport(int timeout_s = 60) : timeout_s_(timeout_s) {}
    HttpResponse post(const std::string& url, const Headers& headers, const std::string& body) override;

private:
    int timeout_s_;
};

/// Bounded in-flight counter. Tracks the high-water mark for tests.
class ConcurrencyGate {
public:
    explicit ConcurrencyGate(int limit) : limit_(limit < 1 ? 1 : limit) {}

    class Slot {
    public:
        explicit Slot(ConcurrencyGate& gate) : gate_(&gate) { gate_->acquire(); }
        ~Slot() {
            if (gate_) gate_->release();
        }
        Slot(const Slot&) = delete;
        Slot& operator=(const Slot&) = delete;

    private:
        ConcurrencyGate* gate_;
    };

    int limit() const noexcept { return limit_; }
    int max_observed() const;

private:
    void acquire();
    void release();

    int limit_;
    int in_flight_ = 0;
    int max_observed_ = 0;
    mutable std::mutex mu_;
    std::condition_variable cv_;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;
Sleeper real_sleeper();

bool is_retryable_status(int status) noexcept;

/// Issues `send` up to policy.max_attempts times, sleeping with exponential
/// backoff between attempts. Retries transport failures, 429 and 5xx only.
/// On exhaustion or a non-retryable status throws Error(provider) whose detail
/// carries {"status", "attempts"}.
HttpResponse post_with_retry(const RetryPolicy& policy, const Sleeper& sleep, const std::function<HttpResponse()>& send,
                             const std::string& what);

} // namespace semsteer::providers

#pragma once

#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

namespace semsteer {

enum class ErrorKind {
    usage,      // bad arguments / configuration
    data,       // malformed input files or invalid domain state
    provider,   // embedding or LLM provider failure
    io,         // filesystem failures
    conflict,   // optimistic concurrency / busy resources
    not_found,
    internal,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message, nlohmann::json detail = nullptr)
        : std::runtime_error(message), kind_(kind), detail_(std::move(detail)) {}

    ErrorKind kind() const noexcept { return kind_; }
    const nlohmann::json& detail() const noexcept { return detail_; }

private:
    ErrorKind kind_;
    nlohmann::json detail_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message, nlohmann::json detail = nullptr) {
    throw Error(kind, message, std::move(detail));
}

} // namespace semsteer

#pragma once

#include <string>

#include <nlohmann/json.hpp>

namespace semsteer::providers {

enum class ProviderKind { remote, mock };

struct RetryPolicy {
    int max_attempts = 3;
    int backoff_ms = 500;  // doubled after each failed attempt
};

struct ProviderConfig {
    ProviderKind kind = ProviderKind::mock;
    std::string base_url = "https://api.openai.com/v1";
    std::string model_name;
    std::string api_key_env = "OPENAI_API_KEY";
    double temperature = 0.0;
    int max_parallel = 4;
    RetryPolicy retry;
    int timeout_s = 60;
    int mock_dim = 256;      // mock embedder bucket count
    int batch_size = 64;     // texts per remote embedding request

    bool operator==(const ProviderConfig&) const = default;
};

/// Throws Error(usage) on out-of-range values.
void validate(const ProviderConfig& config);

void to_json(nlohmann::json& j, const ProviderConfig& c);
void from_json(const nlohmann::json& j, ProviderConfig& c);

ProviderConfig default_embedding_config();
ProviderConfig default_llm_config();

/// Pair of configs read from a provider config file:
/// {"embedding": {...}, "llm": {...}}
struct ProviderSettings {
    ProviderConfig embedding = default_embedding_config();
    ProviderConfig llm = default_llm_config();
    std::string cache_path;  // empty => in-memory cache only
};

ProviderSettings load_provider_settings(const std::string& path);
ProviderSettings provider_settings_from_json(const nlohmann::json& j);

} // namespace semsteer::providers

#include "semsteer/providers/config.hpp"

#include "semsteer/error.hpp"
#include "semsteer/util.hpp"

namespace semsteer::providers {

void validate(const ProviderConfig& c) {
    if (!(c.temperature >= 0.0)) fail(ErrorKind::usage, "temperature must be >= 0");
    if (c.max_parallel < 1) fail(ErrorKind::usage, "max_parallel must be >= 1");
    if (c.retry.max_attempts < 1) fail(ErrorKind::usage, "retry.max_attempts must be >= 1");
    if (c.retry.backoff_ms < 0) fail(ErrorKind::usage, "retry.backoff_ms must be >= 0");
    if (c.mock_dim < 1) fail(ErrorKind::usage, "mock_dim must be >= 1");
    if (c.batch_size < 1) fail(ErrorKind::usage, "batch_size must be >= 1");
    if (c.kind == ProviderKind::remote && c.base_url.empty()) fail(ErrorKind::usage, "remote provider needs base_url");
}

void to_json(nlohmann::json& j, const ProviderConfig& c) {
    j = {{"kind", c.kind == ProviderKind::remote ? "remote" : "mock"},
         {"base_url", c.base_url},
         {"model_name", c.model_name},
         {"api_key_env", c.api_key_env},
         {"temperature", c.temperature},
         {"max_parallel", c.max_parallel},
         {"retry", {{"max_attempts", c.retry.max_attempts}, {"backoff_ms", c.retry.backoff_ms}}},
         {"timeout_s", c.timeout_s},
         {"mock_dim", c.mock_dim},
         {"batch_size", c.batch_size}};
}

void from_json(const nlohmann::json& j, ProviderConfig& c) {
    if (j.contains("kind")) {
        const auto kind = j.at("kind").get<std::string>();
        if (kind == "remote") c.kind = ProviderKind::remote;
        else if (kind == "mock") c.kind = ProviderKind::mock;
        else fail(ErrorKind::usage, "unknown provider kind '" + kind + "' (expected remote|mock)");
    }
    c.base_url = j.value("base_url", c.base_url);
    c.model_name = j.value("model_name", c.model_name);
    c.api_key_env = j.value("api_key_env", c.api_key_env);
    c.temperature = j.value("temperature", c.temperature);
    c.max_parallel = j.value("max_parallel", c.max_parallel);
    if (j.contains("retry")) {
        c.retry.max_attempts = j.at("retry").value("max_attempts", c.retry.max_attempts);
        c.retry.backoff_ms = j.at("retry").value("backoff_ms", c.retry.backoff_ms);
    }
    c.timeout_s = j.value("timeout_s", c.timeout_s);
    c.mock_dim = j.value("mock_dim", c.mock_dim);
    c.batch_size = j.value("batch_size", c.batch_size);
    validate(c);
}

ProviderConfig default_embedding_config() {
    ProviderConfig c;
    c.model_name = "text-embedding-3-small";
    return c;
}

ProviderConfig default_llm_config() {
    ProviderConfig c;
    c.model_name = "gpt-5.1";
    return c;
}

ProviderSettings provider_settings_from_json(const nlohmann::json& j) {
    ProviderSettings s;
    try {
        if (j.contains("embedding")) from_json(j.at("embedding"), s.embedding);
        if (j.contains("llm")) from_json(j.at("llm"), s.llm);
        s.cache_path = j.value("cache_path", s.cache_path);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::usage, std::string("invalid provider settings: ") + e.what());
    }
    return s;
}

ProviderSettings load_provider_settings(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorKind::usage, "provider config '" + path + "': " + e.what());
    }
    return provider_settings_from_json(j);
}

} // namespace semsteer::providers

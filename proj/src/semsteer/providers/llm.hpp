#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "semsteer/providers/config.hpp"
#include "semsteer/providers/transport.hpp"

namespace semsteer::providers {

struct LlmRequest {
    std::string system_prompt;
    std::string user_prompt;
    std::string schema_name;
    /// Per-request restriction of enum-valued fields (e.g. the group ids a
    /// match may name). Part of the response schema sent upstream.
    std::map<std::string, std::vector<std::string>> allowed_values;
    /// Structured task metadata for offline mock models. Never transmitted by
    /// remote clients.
    nlohmann::json context;
};

struct LlmResponse {
    std::string raw_text;
    nlohmann::json payload;           // parsed object when valid
    bool valid = false;
    std::vector<std::string> validation_errors;
    int prompt_tokens = 0;
    int completion_tokens = 0;
    bool truncated = false;
    int attempts = 0;                 // number of completions issued (1, or 2 with repair)
};

enum class FieldType { string, string_list, enum_string };

struct FieldSpec {
    std::string name;
    FieldType type = FieldType::string;
    bool required = true;
    std::size_t min_items = 1;        // string_list
    std::size_t max_items = 64;       // string_list
    std::size_t max_words = 0;        // string; 0 => unbounded
    bool single_line = false;
    std::vector<std::string> allowed; // enum_string (may be overridden per request)
};

struct ResponseSchema {
    std::string name;
    std::vector<FieldSpec> fields;
    /// Cross-field checks run after per-field validation.
    std::function<void(const nlohmann::json&, std::vector<std::string>&)> extra;

    /// JSON Schema document for provider-side structured output.
    nlohmann::json to_json_schema(const std::map<std::string, std::vector<std::string>>& allowed_values = {}) const;
    std::vector<std::string> validate(const nlohmann::json& payload,
                                      const std::map<std::string, std::vector<std::string>>& allowed_values = {}) const;
};

class SchemaRegistry {
public:
    void add(ResponseSchema schema);
    const ResponseSchema& at(const std::string& name) const;
    bool contains(const std::string& name) const { return schemas_.contains(name); }

private:
    std::map<std::string, ResponseSchema> schemas_;
};

/// Raw completion interface; validation lives in complete_structured.
class LlmClient {
public:
    virtual ~LlmClient() = default;
    virtual LlmResponse complete(const LlmRequest& request, const ResponseSchema& schema) = 0;
};

/// OpenAI-compatible chat-completions client with json_schema response format.
class RemoteLlm final : public LlmClient {
public:
    RemoteLlm(ProviderConfig config, std::shared_ptr<Transport> transport, Sleeper sleeper = real_sleeper());
    LlmResponse complete(const LlmRequest& request, const ResponseSchema& schema) override;

    const ConcurrencyGate& gate() const noexcept { return gate_; }

private:
    ProviderConfig config_;
    std::shared_ptr<Transport> transport_;
    Sleeper sleeper_;
    ConcurrencyGate gate_;
};

/// Table-driven mock: the first rule whose predicate matches produces the
/// response text. Every request is recorded.
class ScriptedLlm final : public LlmClient {
public:
    using Predicate = std::function<bool(const LlmRequest&)>;
    using Responder = std::function<std::string(const LlmRequest&)>;

    void on(Predicate when, Responder respond);
    /// Matches on schema name ("*" for any) and a substring of the user prompt.
    void on(std::string schema_name, std::string prompt_substring, std::string response);

    LlmResponse complete(const LlmRequest& request, const ResponseSchema& schema) override;

    std::vector<LlmRequest> requests() const;
    std::size_t call_count() const;

private:
    struct Rule {
        Predicate when;
        Responder respond;
    };
    std::vector<Rule> rules_;
    mutable std::mutex mu_;
    std::vector<LlmRequest> log_;
};

/// Sends the request, validates the payload against the registered schema and,
/// on failure, issues one repair prompt listing the validation errors. Throws
/// Error(provider) on transport failure, truncation, or invalid output after
/// the repair round.
LlmResponse complete_structured(LlmClient& client, const SchemaRegistry& registry, const LlmRequest& request);

/// Extracts the first JSON object in `text` (tolerates code fences).
std::optional<nlohmann::json> parse_json_object(const std::string& text);

} // namespace semsteer::providers

#include "semsteer/providers/llm.hpp"

#include <algorithm>
#include <cstdlib>

#include "semsteer/error.hpp"
#include "semsteer/util.hpp"

namespace semsteer::providers {

namespace {

bool blank(const std::string& s) {
    return s.find_first_not_of(" \t\r\n") == std::string::npos;
}

const std::vector<std::string>& allowed_for(const FieldSpec& f, const std::map<std::string, std::vector<std::string>>& overrides) {
    const auto it = overrides.find(f.name);
    return it == overrides.end() ? f.allowed : it->second;
}

} // namespace

nlohmann::json ResponseSchema::to_json_schema(const std::map<std::string, std::vector<std::string>>& allowed_values) const {
    nlohmann::json props = nlohmann::json::object();
    nlohmann::json required = nlohmann::json::array();
    for (const auto& f : fields) {
        nlohmann::json p;
        switch (f.type) {
        case FieldType::string:
            p = {{"type", "string"}};
            break;
        case FieldType::string_list:
            p = {{"type", "array"}, {"items", {{"type", "string"}}}};
            break;
        case FieldType::enum_string:
            p = {{"type", "string"}, {"enum", allowed_for(f, allowed_values)}};
            break;
        }
        if (!f.required) {
            p["type"] = nlohmann::json::array({p["type"], "null"});
            if (p.contains("enum")) p["enum"].push_back(nullptr);
        }
        props[f.name] = p;
        required.push_back(f.name);
    }
    return {{"type", "object"}, {"properties", props}, {"required", required}, {"additionalProperties", false}};
}

std::vector<std::string> ResponseSchema::validate(const nlohmann::json& payload,
                                                  const std::map<std::string, std::vector<std::string>>& allowed_values) const {
    std::vector<std::string> errors;
    if (!payload.is_object()) {
        errors.push_back("response must be a JSON object");
        return errors;
    }
    for (const auto& f : fields) {
        if (!payload.contains(f.name) || payload[f.name].is_null()) {
            if (f.required) errors.push_back("missing required field '" + f.name + "'");
            continue;
        }
        const auto& v = payload[f.name];
        switch (f.type) {
        case FieldType::string: {
            if (!v.is_string()) {
                errors.push_back("field '" + f.name + "' must be a string");
                break;
            }
            const auto s = v.get<std::string>();
            if (blank(s)) errors.push_back("field '" + f.name + "' must be nonempty");
            if (f.single_line && s.find('\n') != std::string::npos) errors.push_back("field '" + f.name + "' must be a single line");
            if (f.max_words > 0 && split_words(s).size() > f.max_words) {
                errors.push_back("field '" + f.name + "' must have at most " + std::to_string(f.max_words) + " words");
            }
            break;
        }
        case FieldType::string_list: {
            if (!v.is_array()) {
                errors.push_back("field '" + f.name + "' must be an array of strings");
                break;
            }
            if (v.size() < f.min_items || v.size() > f.max_items) {
                errors.push_back("field '" + f.name + "' must have between " + std::to_string(f.min_items) + " and " +
                                 std::to_string(f.max_items) + " items");
            }
            for (const auto& item : v) {
                if (!item.is_string() || blank(item.get<std::string>())) {
                    errors.push_back("field '" + f.name + "' items must be nonempty strings");
                    break;
                }
            }
            break;
        }
        case FieldType::enum_string: {
            const auto& allowed = allowed_for(f, allowed_values);
            if (!v.is_string() || std::find(allowed.begin(), allowed.end(), v.get<std::string>()) == allowed.end()) {
                errors.push_back("field '" + f.name + "' must be one of: " + join(allowed, ", "));
            }
            break;
        }
        }
    }
    if (errors.empty() && extra) extra(payload, errors);
    return errors;
}

void SchemaRegistry::add(ResponseSchema schema) {
    const auto name = schema.name;
    schemas_.insert_or_assign(name, std::move(schema));
}

const ResponseSchema& SchemaRegistry::at(const std::string& name) const {
    const auto it = schemas_.find(name);
    if (it == schemas_.end()) fail(ErrorKind::usage, "response schema '" + name + "' is not registered");
    return it->second;
}

std::optional<nlohmann::json> parse_json_object(const std::string& text) {
    const auto open = text.find('{');
    const auto close = text.rfind('}');
    if (open == std::string::npos || close == std::string::npos || close < open) return std::nullopt;
    try {
        auto j = nlohmann::json::parse(text.substr(open, close - open + 1));
        if (j.is_object()) return j;
    } catch (const nlohmann::json::parse_error&) {
    }
    return std::nullopt;
}

// ---------------------------------------------------------------- remote

RemoteLlm::RemoteLlm(ProviderConfig config, std::shared_ptr<Transport> transport, Sleeper sleeper)
    : config_(std::move(config)), transport_(std::move(transport)), sleeper_(std::move(sleeper)), gate_(config_.max_parallel) {
    validate(config_);
    if (!transport_) transport_ = std::make_shared<HttplibTransport>(config_.timeout_s);
}

LlmResponse RemoteLlm::complete(const LlmRequest& request, const ResponseSchema& schema) {
    const nlohmann::json body{
        {"model", config_.model_name},
        {"temperature", config_.temperature},
        {"messages",
         {{{"role", "system"}, {"content", request.system_prompt}}, {{"role", "user"}, {"content", request.user_prompt}}}},
        {"response_format",
         {{"type", "json_schema"},
          {"json_schema", {{"name", schema.name}, {"strict", true}, {"schema", schema.to_json_schema(request.allowed_values)}}}}},
    };
    Headers headers{{"Content-Type", "application/json"}};
    if (!config_.api_key_env.empty()) {
        const char* key = std::getenv(config_.api_key_env.c_str());
        if (key == nullptr || *key == '\0') {
            fail(ErrorKind::provider, "environment variable " + config_.api_key_env + " is not set", {{"stage", "auth"}});
        }
        headers.emplace_back("Authorization", std::string("Bearer ") + key);
    }
    const auto url = config_.base_url + "/chat/completions";
    const auto payload = body.dump();

    HttpResponse res;
    {
        ConcurrencyGate::Slot slot(gate_);
        res = post_with_retry(config_.retry, sleeper_, [&] { return transport_->post(url, headers, payload); }, "chat completion");
    }

    LlmResponse out;
    try {
        const auto j = nlohmann::json::parse(res.body);
        const auto& choice = j.at("choices").at(0);
        const auto& content = choice.at("message").at("content");
        out.raw_text = content.is_string() ? content.get<std::string>() : std::string();
        out.truncated = choice.value("finish_reason", std::string()) == "length";
        if (j.contains("usage")) {
            out.prompt_tokens = j["usage"].value("prompt_tokens", 0);
            out.completion_tokens = j["usage"].value("completion_tokens", 0);
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::provider, std::string("malformed chat completion response: ") + e.what());
    }
    return out;
}

// ---------------------------------------------------------------- scripted

void ScriptedLlm::on(Predicate when, Responder respond) {
    rules_.push_back({std::move(when), std::move(respond)});
}

void ScriptedLlm::on(std::string schema_name, std::string prompt_substring, std::string response) {
    on(
        [schema_name = std::move(schema_name), sub = std::move(prompt_substring)](const LlmRequest& r) {
            return (schema_name == "*" || r.schema_name == schema_name) && r.user_prompt.find(sub) != std::string::npos;
        },
        [response = std::move(response)](const LlmRequest&) { return response; });
}

LlmResponse ScriptedLlm::complete(const LlmRequest& request, const ResponseSchema&) {
    {
        std::lock_guard lock(mu_);
        log_.push_back(request);
    }
    for (const auto& rule : rules_) {
        if (rule.when(request)) {
            LlmResponse out;
            out.raw_text = rule.respond(request);
            return out;
        }
    }
    fail(ErrorKind::provider, "scripted LLM has no response for schema '" + request.schema_name + "'");
}

std::vector<LlmRequest> ScriptedLlm::requests() const {
    std::lock_guard lock(mu_);
    return log_;
}

std::size_t ScriptedLlm::call_count() const {
    std::lock_guard lock(mu_);
    return log_.size();
}

// ---------------------------------------------------------------- structured

LlmResponse complete_structured(LlmClient& client, const SchemaRegistry& registry, const LlmRequest& request) {
    const auto& schema = registry.at(request.schema_name);

    auto attempt = [&](const LlmRequest& req) {
        auto res = client.complete(req, schema);
        if (res.truncated) {
            fail(ErrorKind::provider, "completion for schema '" + schema.name + "' was truncated", {{"stage", "truncation"}});
        }
        if (auto parsed = parse_json_object(res.raw_text)) {
            res.payload = std::move(*parsed);
            res.validation_errors = schema.validate(res.payload, req.allowed_values);
        } else {
            res.payload = nullptr;
            res.validation_errors = {"response is not a JSON object"};
        }
        res.valid = res.validation_errors.empty();
        return res;
    };

    auto first = attempt(request);
    first.attempts = 1;
    if (first.valid) return first;

    LlmRequest repair = request;
    repair.user_prompt += "\n\nYour previous response was:\n" + first.raw_text +
                          "\n\nIt failed validation:\n- " + join(first.validation_errors, "\n- ") +
                          "\n\nReturn a corrected JSON object only.";
    repair.context["repair"] = true;
    auto second = attempt(repair);
    second.attempts = 2;
    second.prompt_tokens += first.prompt_tokens;
    second.completion_tokens += first.completion_tokens;
    if (second.valid) return second;

    fail(ErrorKind::provider, "response for schema '" + schema.name + "' invalid after repair: " + join(second.validation_errors, "; "),
         {{"stage", "schema"}, {"errors", second.validation_errors}});
}

} // namespace semsteer::providers

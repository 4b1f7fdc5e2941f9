#include "semsteer/steering/prompts.hpp"

#include "semsteer/error.hpp"

namespace semsteer::steering {

PromptTemplate load_template(const std::string& name) {
    const auto& assets = prompt_assets();
    const auto it = assets.find(name);
    if (it == assets.end()) fail(ErrorKind::internal, "missing prompt template '" + name + "'");
    const std::string& text = it->second;
    static const std::string kSystem = "=== system ===\n";
    static const std::string kUser = "=== user ===\n";
    const auto s = text.find(kSystem);
    const auto u = text.find(kUser);
    if (s == std::string::npos || u == std::string::npos || u < s) {
        fail(ErrorKind::internal, "prompt template '" + name + "' lacks system/user sections");
    }
    PromptTemplate t;
    t.system = text.substr(s + kSystem.size(), u - s - kSystem.size());
    t.user = text.substr(u + kUser.size());
    while (!t.system.empty() && t.system.back() == '\n') t.system.pop_back();
    while (!t.user.empty() && t.user.back() == '\n') t.user.pop_back();
    return t;
}

std::string fill(const std::string& text, const std::map<std::string, std::string>& values) {
    std::string out;
    out.reserve(text.size());
    std::size_t pos = 0;
    while (true) {
        const auto open = text.find("{{", pos);
        if (open == std::string::npos) {
            out.append(text, pos);
            break;
        }
        const auto close = text.find("}}", open + 2);
        if (close == std::string::npos) fail(ErrorKind::internal, "unterminated placeholder in prompt template");
        out.append(text, pos, open - pos);
        const auto key = text.substr(open + 2, close - open - 2);
        const auto it = values.find(key);
        if (it == values.end()) fail(ErrorKind::internal, "no value for prompt placeholder '" + key + "'");
        out += it->second;
        pos = close + 2;
    }
    return out;
}

namespace {

using providers::FieldSpec;
using providers::FieldType;
using providers::ResponseSchema;

FieldSpec field(std::string name, FieldType type) {
    FieldSpec f;
    f.name = std::move(name);
    f.type = type;
    return f;
}

FieldSpec list_field(std::string name, std::size_t min_items, std::size_t max_items) {
    auto f = field(std::move(name), FieldType::string_list);
    f.min_items = min_items;
    f.max_items = max_items;
    return f;
}

FieldSpec enum_field(std::string name, std::vector<std::string> allowed) {
    auto f = field(std::move(name), FieldType::enum_string);
    f.allowed = std::move(allowed);
    return f;
}

ResponseSchema schema(std::string name, std::vector<FieldSpec> fields) {
    ResponseSchema s;
    s.name = std::move(name);
    s.fields = std::move(fields);
    return s;
}

std::vector<FieldSpec> augmentation_fields() {
    return {field("intent_statement", FieldType::string), field("justification", FieldType::string),
            field("contrast", FieldType::string), list_field("keywords", 3, 8)};
}

providers::SchemaRegistry build_registry() {
    providers::SchemaRegistry reg;
    auto card_name = field("name", FieldType::string);
    card_name.max_words = 8;
    card_name.single_line = true;
    reg.add(schema(kClusterCard, {card_name, field("description", FieldType::string),
                                  list_field("inclusion_criteria", 1, 64), list_field("exclusion_criteria", 1, 64)}));
    reg.add(schema(kDocAugmentation, augmentation_fields()));
    reg.add(schema(kExtensionAugmentation, augmentation_fields()));
    // Allowed outcomes are the session's group ids plus "none" and "ambiguous";
    // supplied per request.
    reg.add(schema(kExtensionMatch, {enum_field("outcome", {"none", "ambiguous"}),
                                     enum_field("confidence", {"high", "medium", "low"}),
                                     field("rationale", FieldType::string)}));
    return reg;
}

} // namespace

const providers::SchemaRegistry& schema_registry() {
    static const providers::SchemaRegistry reg = build_registry();
    return reg;
}

} // namespace semsteer::steering

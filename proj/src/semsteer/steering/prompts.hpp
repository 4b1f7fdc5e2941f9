#pragma once

#include <map>
#include <string>

#include "semsteer/providers/llm.hpp"

namespace semsteer::steering {

// Template and schema names. The ".v1" suffix versions templates and
// schemas together.
inline constexpr const char* kClusterCard = "cluster_card.v1";
inline constexpr const char* kDocAugmentation = "doc_augmentation.v1";
inline constexpr const char* kExtensionMatch = "extension_match.v1";
inline constexpr const char* kExtensionAugmentation = "extension_augmentation.v1";

/// Raw template text by name (generated from assets/prompts).
const std::map<std::string, std::string>& prompt_assets();

struct PromptTemplate {
    std::string system;
    std::string user;
};

/// Splits an asset into its "=== system ===" / "=== user ===" sections.
PromptTemplate load_template(const std::string& name);

/// Replaces every {{placeholder}}. Throws Error(internal) for a placeholder
/// without a value.
std::string fill(const std::string& text, const std::map<std::string, std::string>& values);

/// Response schemas for the four templates.
const providers::SchemaRegistry& schema_registry();

} // namespace semsteer::steering

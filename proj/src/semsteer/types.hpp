#pragma once

// Domain types shared across the engine modules, plus their JSON encodings.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace semsteer {

using DocId = std::string;
using GroupId = std::string;

struct Document {
    DocId id;
    std::string text;

    bool operator==(const Document&) const = default;
};

struct EmbeddingVector {
    std::vector<double> values;

    std::size_t dim() const noexcept { return values.size(); }
    bool operator==(const EmbeddingVector&) const = default;
};

struct AnalystGroup {
    GroupId group_id;
    std::vector<DocId> member_ids;
    std::int64_t created_at = 0;  // unix milliseconds

    bool operator==(const AnalystGroup&) const = default;
};

struct ClusterCard {
    GroupId group_id;
    std::string name;
    std::string description;
    std::vector<std::string> inclusion_criteria;
    std::vector<std::string> exclusion_criteria;

    bool operator==(const ClusterCard&) const = default;
};

enum class AugmentationOrigin { interacted, extended };

struct DocAugmentation {
    DocId doc_id;
    GroupId group_id;
    std::string intent_statement;
    std::string justification;
    std::string contrast;
    std::vector<std::string> keywords;
    std::string augmentation_text;
    AugmentationOrigin origin = AugmentationOrigin::interacted;

    bool operator==(const DocAugmentation&) const = default;
};

enum class ExtensionReason { matched, weak_evidence, ambiguous_multi_match };
enum class Confidence { high, medium, low };

struct ExtensionDecision {
    DocId doc_id;
    std::optional<GroupId> assigned_group;  // empty => abstained
    ExtensionReason reason = ExtensionReason::weak_evidence;
    std::optional<Confidence> raw_confidence;

    bool assigned() const noexcept { return assigned_group.has_value(); }
    bool operator==(const ExtensionDecision&) const = default;
};

enum class IncorporationMode { text, blend };
enum class TextStrategy { append, prepend, tagged_append, tagged_prepend, augmentation_only };
enum class ControlKind { none, random_text };

struct IncorporationConfig {
    IncorporationMode mode = IncorporationMode::text;
    TextStrategy text_strategy = TextStrategy::append;
    double alpha = 0.5;
    ControlKind control = ControlKind::none;
    std::uint64_t rng_seed = 0;
    bool normalize = false;  // renormalize blended vectors; off reproduces the plain convex combination

    bool operator==(const IncorporationConfig&) const = default;
};

enum class ProjectionBackend { linear_pca, neighbor_embedding, external_adapter };
enum class DistanceMetric { cosine, euclidean };

struct ProjectionConfig {
    ProjectionBackend backend = ProjectionBackend::linear_pca;
    DistanceMetric metric = DistanceMetric::cosine;
    int n_neighbors = 15;
    double min_dist = 0.1;
    std::uint64_t seed = 0;
    int n_epochs = 200;             // neighbor_embedding only
    std::string external_command;   // external_adapter only

    bool operator==(const ProjectionConfig&) const = default;
};

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    bool operator==(const Point2&) const = default;
};

struct ProjectionLayout {
    std::string name;
    std::vector<DocId> ids;        // corpus order
    std::vector<Point2> points;    // aligned with ids
    ProjectionConfig config_used;
    std::int64_t source_revision = 0;

    bool operator==(const ProjectionLayout&) const = default;
};

struct EmbeddingRecord {
    DocId doc_id;
    EmbeddingVector base;
    std::optional<EmbeddingVector> aug;
    EmbeddingVector steered;
};

const char* to_string(AugmentationOrigin v);
const char* to_string(ExtensionReason v);
const char* to_string(Confidence v);
const char* to_string(IncorporationMode v);
const char* to_string(TextStrategy v);
const char* to_string(ControlKind v);
const char* to_string(ProjectionBackend v);
const char* to_string(DistanceMetric v);

// Parsers throw Error(usage) on unknown names.
TextStrategy parse_text_strategy(std::string_view s);
IncorporationMode parse_incorporation_mode(std::string_view s);
ControlKind parse_control(std::string_view s);
ProjectionBackend parse_backend(std::string_view s);
DistanceMetric parse_metric(std::string_view s);
Confidence parse_confidence(std::string_view s);

/// Validates ranges; throws Error(usage).
void validate(const IncorporationConfig& config);
void validate(const ProjectionConfig& config);

void to_json(nlohmann::json& j, const EmbeddingVector& v);
void from_json(const nlohmann::json& j, EmbeddingVector& v);
void to_json(nlohmann::json& j, const AnalystGroup& v);
void from_json(const nlohmann::json& j, AnalystGroup& v);
void to_json(nlohmann::json& j, const ClusterCard& v);
void from_json(const nlohmann::json& j, ClusterCard& v);
void to_json(nlohmann::json& j, const DocAugmentation& v);
void from_json(const nlohmann::json& j, DocAugmentation& v);
void to_json(nlohmann::json& j, const ExtensionDecision& v);
void from_json(const nlohmann::json& j, ExtensionDecision& v);
void to_json(nlohmann::json& j, const IncorporationConfig& v);
void from_json(const nlohmann::json& j, IncorporationConfig& v);
void to_json(nlohmann::json& j, const ProjectionConfig& v);
void from_json(const nlohmann::json& j, ProjectionConfig& v);
void to_json(nlohmann::json& j, const ProjectionLayout& v);
void from_json(const nlohmann::json& j, ProjectionLayout& v);

} // namespace semsteer

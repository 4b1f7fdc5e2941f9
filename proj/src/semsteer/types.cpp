#include "semsteer/types.hpp"

#include <array>
#include <cmath>
#include <utility>

#include "semsteer/error.hpp"

namespace semsteer {

namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::array<std::pair<const char*, E>, N>& table, const char* what) {
    for (const auto& [name, value] : table) {
        if (s == name) return value;
    }
    std::string allowed;
    for (const auto& [name, value] : table) {
        if (!allowed.empty()) allowed += "|";
        allowed += name;
    }
    fail(ErrorKind::usage, std::string("unknown ") + what + " '" + std::string(s) + "' (expected " + allowed + ")");
}

constexpr std::array<std::pair<const char*, TextStrategy>, 5> kStrategies{{
    {"append", TextStrategy::append},
    {"prepend", TextStrategy::prepend},
    {"tagged_append", TextStrategy::tagged_append},
    {"tagged_prepend", TextStrategy::tagged_prepend},
    {"augmentation_only", TextStrategy::augmentation_only},
}};
constexpr std::array<std::pair<const char*, IncorporationMode>, 2> kModes{{
    {"text", IncorporationMode::text},
    {"blend", IncorporationMode::blend},
}};
constexpr std::array<std::pair<const char*, ControlKind>, 2> kControls{{
    {"none", ControlKind::none},
    {"random_text", ControlKind::random_text},
}};
constexpr std::array<std::pair<const char*, ProjectionBackend>, 3> kBackends{{
    {"linear_pca", ProjectionBackend::linear_pca},
    {"neighbor_embedding", ProjectionBackend::neighbor_embedding},
    {"external_adapter", ProjectionBackend::external_adapter},
}};
constexpr std::array<std::pair<const char*, DistanceMetric>, 2> kMetrics{{
    {"cosine", DistanceMetric::cosine},
    {"euclidean", DistanceMetric::euclidean},
}};
constexpr std::array<std::pair<const char*, Confidence>, 3> kConfidences{{
    {"high", Confidence::high},
    {"medium", Confidence::medium},
    {"low", Confidence::low},
}};
constexpr std::array<std::pair<const char*, ExtensionReason>, 3> kReasons{{
    {"matched", ExtensionReason::matched},
    {"weak_evidence", ExtensionReason::weak_evidence},
    {"ambiguous_multi_match", ExtensionReason::ambiguous_multi_match},
}};
constexpr std::array<std::pair<const char*, AugmentationOrigin>, 2> kOrigins{{
    {"interacted", AugmentationOrigin::interacted},
    {"extended", AugmentationOrigin::extended},
}};

template <typename E, std::size_t N>
const char* name_of(E v, const std::array<std::pair<const char*, E>, N>& table) {
    for (const auto& [name, value] : table) {
        if (value == v) return name;
    }
    return "?";
}

} // namespace

const char* to_string(AugmentationOrigin v) { return name_of(v, kOrigins); }
const char* to_string(ExtensionReason v) { return name_of(v, kReasons); }
const char* to_string(Confidence v) { return name_of(v, kConfidences); }
const char* to_string(IncorporationMode v) { return name_of(v, kModes); }
const char* to_string(TextStrategy v) { return name_of(v, kStrategies); }
const char* to_string(ControlKind v) { return name_of(v, kControls); }
const char* to_string(ProjectionBackend v) { return name_of(v, kBackends); }
const char* to_string(DistanceMetric v) { return name_of(v, kMetrics); }

TextStrategy parse_text_strategy(std::string_view s) { return parse_enum(s, kStrategies, "text strategy"); }
IncorporationMode parse_incorporation_mode(std::string_view s) { return parse_enum(s, kModes, "incorporation mode"); }
ControlKind parse_control(std::string_view s) { return parse_enum(s, kControls, "control"); }
ProjectionBackend parse_backend(std::string_view s) { return parse_enum(s, kBackends, "projection backend"); }
DistanceMetric parse_metric(std::string_view s) { return parse_enum(s, kMetrics, "distance metric"); }
Confidence parse_confidence(std::string_view s) { return parse_enum(s, kConfidences, "confidence"); }

void validate(const IncorporationConfig& config) {
    if (!(config.alpha >= 0.0 && config.alpha <= 1.0)) {
        fail(ErrorKind::usage, "alpha must lie in [0,1], got " + std::to_string(config.alpha));
    }
}

void validate(const ProjectionConfig& config) {
    if (config.n_neighbors < 2) fail(ErrorKind::usage, "n_neighbors must be >= 2");
    if (!(config.min_dist >= 0.0 && config.min_dist < 1.0)) fail(ErrorKind::usage, "min_dist must lie in [0,1)");
    if (config.n_epochs < 1) fail(ErrorKind::usage, "n_epochs must be >= 1");
    if (config.backend == ProjectionBackend::external_adapter && config.external_command.empty()) {
        fail(ErrorKind::usage, "external_adapter backend requires external_command");
    }
}

void to_json(nlohmann::json& j, const EmbeddingVector& v) { j = v.values; }
void from_json(const nlohmann::json& j, EmbeddingVector& v) { v.values = j.get<std::vector<double>>(); }

void to_json(nlohmann::json& j, const AnalystGroup& v) {
    j = {{"group_id", v.group_id}, {"member_ids", v.member_ids}, {"created_at", v.created_at}};
}
void from_json(const nlohmann::json& j, AnalystGroup& v) {
    v.group_id = j.at("group_id").get<std::string>();
    v.member_ids = j.at("member_ids").get<std::vector<std::string>>();
    v.created_at = j.value("created_at", std::int64_t{0});
}

void to_json(nlohmann::json& j, const ClusterCard& v) {
    j = {{"group_id", v.group_id},
         {"name", v.name},
         {"description", v.description},
         {"inclusion_criteria", v.inclusion_criteria},
         {"exclusion_criteria", v.exclusion_criteria}};
}
void from_json(const nlohmann::json& j, ClusterCard& v) {
    v.group_id = j.at("group_id").get<std::string>();
    v.name = j.at("name").get<std::string>();
    v.description = j.at("description").get<std::string>();
    v.inclusion_criteria = j.at("inclusion_criteria").get<std::vector<std::string>>();
    v.exclusion_criteria = j.at("exclusion_criteria").get<std::vector<std::string>>();
}

void to_json(nlohmann::json& j, const DocAugmentation& v) {
    j = {{"doc_id", v.doc_id},
         {"group_id", v.group_id},
         {"intent_statement", v.intent_statement},
         {"justification", v.justification},
         {"contrast", v.contrast},
         {"keywords", v.keywords},
         {"augmentation_text", v.augmentation_text},
         {"origin", to_string(v.origin)}};
}
void from_json(const nlohmann::json& j, DocAugmentation& v) {
    v.doc_id = j.at("doc_id").get<std::string>();
    v.group_id = j.at("group_id").get<std::string>();
    v.intent_statement = j.at("intent_statement").get<std::string>();
    v.justification = j.at("justification").get<std::string>();
    v.contrast = j.at("contrast").get<std::string>();
    v.keywords = j.at("keywords").get<std::vector<std::string>>();
    v.augmentation_text = j.at("augmentation_text").get<std::string>();
    v.origin = parse_enum(j.at("origin").get<std::string>(), kOrigins, "origin");
}

void to_json(nlohmann::json& j, const ExtensionDecision& v) {
    j = {{"doc_id", v.doc_id},
         {"outcome", v.assigned_group ? nlohmann::json{{"assigned", *v.assigned_group}} : nlohmann::json("abstained")},
         {"reason", to_string(v.reason)},
         {"raw_confidence", v.raw_confidence ? nlohmann::json(to_string(*v.raw_confidence)) : nlohmann::json(nullptr)}};
}
void from_json(const nlohmann::json& j, ExtensionDecision& v) {
    v.doc_id = j.at("doc_id").get<std::string>();
    const auto& outcome = j.at("outcome");
    if (outcome.is_object()) {
        v.assigned_group = outcome.at("assigned").get<std::string>();
    } else {
        v.assigned_group.reset();
    }
    v.reason = parse_enum(j.at("reason").get<std::string>(), kReasons, "extension reason");
    const auto& conf = j.at("raw_confidence");
    if (conf.is_null()) {
        v.raw_confidence.reset();
    } else {
        v.raw_confidence = parse_confidence(conf.get<std::string>());
    }
}

void to_json(nlohmann::json& j, const IncorporationConfig& v) {
    j = {{"mode", to_string(v.mode)},
         {"text_strategy", to_string(v.text_strategy)},
         {"alpha", v.alpha},
         {"control", to_string(v.control)},
         {"rng_seed", v.rng_seed},
         {"normalize", v.normalize}};
}
void from_json(const nlohmann::json& j, IncorporationConfig& v) {
    v = IncorporationConfig{};
    if (j.contains("mode")) v.mode = parse_incorporation_mode(j.at("mode").get<std::string>());
    if (j.contains("text_strategy")) v.text_strategy = parse_text_strategy(j.at("text_strategy").get<std::string>());
    v.alpha = j.value("alpha", v.alpha);
    if (j.contains("control")) v.control = parse_control(j.at("control").get<std::string>());
    v.rng_seed = j.value("rng_seed", v.rng_seed);
    v.normalize = j.value("normalize", v.normalize);
}

void to_json(nlohmann::json& j, const ProjectionConfig& v) {
    j = {{"backend", to_string(v.backend)},
         {"metric", to_string(v.metric)},
         {"n_neighbors", v.n_neighbors},
         {"min_dist", v.min_dist},
         {"seed", v.seed},
         {"n_epochs", v.n_epochs},
         {"external_command", v.external_command}};
}
void from_json(const nlohmann::json& j, ProjectionConfig& v) {
    v = ProjectionConfig{};
    if (j.contains("backend")) v.backend = parse_backend(j.at("backend").get<std::string>());
    if (j.contains("metric")) v.metric = parse_metric(j.at("metric").get<std::string>());
    v.n_neighbors = j.value("n_neighbors", v.n_neighbors);
    v.min_dist = j.value("min_dist", v.min_dist);
    v.seed = j.value("seed", v.seed);
    v.n_epochs = j.value("n_epochs", v.n_epochs);
    v.external_command = j.value("external_command", v.external_command);
}

void to_json(nlohmann::json& j, const ProjectionLayout& v) {
    nlohmann::json positions = nlohmann::json::array();
    for (std::size_t i = 0; i < v.ids.size(); ++i) {
        positions.push_back({{"id", v.ids[i]}, {"x", v.points[i].x}, {"y", v.points[i].y}});
    }
    j = {{"name", v.name}, {"positions", positions}, {"config_used", v.config_used}, {"source_revision", v.source_revision}};
}
void from_json(const nlohmann::json& j, ProjectionLayout& v) {
    v.name = j.at("name").get<std::string>();
    v.ids.clear();
    v.points.clear();
    for (const auto& p : j.at("positions")) {
        v.ids.push_back(p.at("id").get<std::string>());
        v.points.push_back({p.at("x").get<double>(), p.at("y").get<double>()});
    }
    v.config_used = j.at("config_used").get<ProjectionConfig>();
    v.source_revision = j.at("source_revision").get<std::int64_t>();
}

} // namespace semsteer

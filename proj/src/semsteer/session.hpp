#pragma once

#include <map>
#include <string>
#include <vector>

#include "semsteer/corpus.hpp"
#include "semsteer/types.hpp"

namespace semsteer {

inline constexpr int kSessionSchemaVersion = 1;

struct GroupSpec {
    GroupId group_id;
    std::vector<DocId> member_ids;
};

/// Mutable steering workspace for one perspective over one corpus. Every
/// mutating member bumps `revision`; callers serialize writers.
class SteeringSession {
public:
    std::string session_id;
    std::string corpus_name;
    std::string perspective_name;
    std::vector<AnalystGroup> groups;
    std::vector<ClusterCard> cards;                      // one per group, group order
    std::map<DocId, DocAugmentation> augmentations;      // interacted + extended
    std::map<DocId, ExtensionDecision> extension_results;
    bool extension_complete = false;
    IncorporationConfig incorporation;
    std::map<std::string, ProjectionLayout> layouts;
    std::int64_t revision = 0;

    /// Replaces all groups and drops every externalized semantic artifact.
    void set_groups(const DocumentStore& docs, const std::vector<GroupSpec>& specs, std::int64_t now_ms = 0);

    /// Stores externalization output. Throws if it does not cover the groups exactly.
    void set_semantics(std::vector<ClusterCard> new_cards, std::vector<DocAugmentation> interacted);

    /// Records extension decisions (and augmentations for assigned documents).
    /// `complete` marks that every non-interacted document has a decision.
    void record_extension(std::vector<ExtensionDecision> decisions, std::vector<DocAugmentation> extended, bool complete);

    void set_incorporation(const IncorporationConfig& config);

    /// Publishes a layout. The "baseline" layout cannot be replaced once set.
    void publish_layout(ProjectionLayout layout);

    bool has_semantics() const noexcept { return !cards.empty() && cards.size() == groups.size(); }
    std::vector<DocId> interacted_ids() const;
    const AnalystGroup* find_group(const GroupId& id) const;
    const ClusterCard* find_card(const GroupId& id) const;

    bool operator==(const SteeringSession&) const = default;
};

/// Fresh session with no groups, semantics or layouts. An empty perspective
/// name becomes "session-<n>".
SteeringSession create_session(const Corpus& corpus, std::string perspective_name);

nlohmann::json session_to_json(const SteeringSession& session);
SteeringSession session_from_json(const nlohmann::json& j);

/// Stable serialization: identical sessions give identical bytes.
std::string serialize_session(const SteeringSession& session);
SteeringSession deserialize_session(std::string_view contents);

void save_session(const SteeringSession& session, const std::string& path);
SteeringSession load_session(const std::string& path);

/// Groups-file schema shared with the service's PUT groups body:
/// {"groups":[{"group_id":..., "member_ids":[...]}, ...]}
std::vector<GroupSpec> parse_group_specs(const nlohmann::json& j);
nlohmann::json group_specs_to_json(const std::vector<GroupSpec>& specs);

} // namespace semsteer

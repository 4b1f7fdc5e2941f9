#include "semsteer/session.hpp"

#include <algorithm>
#include <atomic>
#include <set>
#include <unordered_map>

#include "semsteer/error.hpp"
#include "semsteer/util.hpp"

namespace semsteer {

namespace {
std::atomic<std::uint64_t> g_session_counter{0};
}

void SteeringSession::set_groups(const DocumentStore& docs, const std::vector<GroupSpec>& specs, std::int64_t now_ms) {
    std::unordered_map<DocId, GroupId> owner;
    std::set<GroupId> seen_groups;
    std::vector<AnalystGroup> next;
    next.reserve(specs.size());
    for (const auto& spec : specs) {
        if (spec.group_id.empty()) fail(ErrorKind::data, "group id must be nonempty");
        if (!seen_groups.insert(spec.group_id).second) {
            fail(ErrorKind::data, "duplicate group id '" + spec.group_id + "'", {{"group_id", spec.group_id}});
        }
        if (spec.member_ids.empty()) fail(ErrorKind::data, "group '" + spec.group_id + "' has no members");
        for (const auto& id : spec.member_ids) {
            if (!docs.contains(id)) {
                fail(ErrorKind::data, "group '" + spec.group_id + "' references unknown document '" + id + "'",
                     {{"group_id", spec.group_id}, {"id", id}});
            }
            auto [it, inserted] = owner.emplace(id, spec.group_id);
            if (!inserted) {
                const std::string where = it->second == spec.group_id ? "twice in group '" + spec.group_id + "'"
                                                                      : "in groups '" + it->second + "' and '" + spec.group_id + "'";
                fail(ErrorKind::data, "document '" + id + "' appears " + where,
                     {{"id", id}, {"groups", {it->second, spec.group_id}}});
            }
        }
        next.push_back({spec.group_id, spec.member_ids, now_ms});
    }
    groups = std::move(next);
    cards.clear();
    augmentations.clear();
    extension_results.clear();
    extension_complete = false;
    ++revision;
}

void SteeringSession::set_semantics(std::vector<ClusterCard> new_cards, std::vector<DocAugmentation> interacted) {
    if (new_cards.size() != groups.size()) fail(ErrorKind::internal, "cluster cards do not match groups one-to-one");
    for (std::size_t i = 0; i < groups.size(); ++i) {
        if (new_cards[i].group_id != groups[i].group_id) fail(ErrorKind::internal, "cluster card order does not match group order");
    }
    std::map<DocId, DocAugmentation> augs;
    for (auto& aug : interacted) {
        const auto id = aug.doc_id;
        augs.emplace(id, std::move(aug));
    }
    for (const auto& group : groups) {
        for (const auto& id : group.member_ids) {
            const auto it = augs.find(id);
            if (it == augs.end() || it->second.group_id != group.group_id) {
                fail(ErrorKind::internal, "missing augmentation for interacted document '" + id + "'");
            }
        }
    }
    cards = std::move(new_cards);
    augmentations = std::move(augs);
    extension_results.clear();
    extension_complete = false;
    ++revision;
}

void SteeringSession::record_extension(std::vector<ExtensionDecision> decisions, std::vector<DocAugmentation> extended,
                                       bool complete) {
    for (auto& d : decisions) {
        const auto id = d.doc_id;
        extension_results.insert_or_assign(id, std::move(d));
    }
    for (auto& aug : extended) {
        const auto id = aug.doc_id;
        augmentations.insert_or_assign(id, std::move(aug));
    }
    extension_complete = complete;
    ++revision;
}

void SteeringSession::set_incorporation(const IncorporationConfig& config) {
    validate(config);
    incorporation = config;
    ++revision;
}

void SteeringSession::publish_layout(ProjectionLayout layout) {
    if (layout.name == "baseline" && layouts.contains("baseline")) {
        fail(ErrorKind::conflict, "baseline layout is immutable once computed");
    }
    layout.source_revision = revision;
    const auto name = layout.name;
    layouts.insert_or_assign(name, std::move(layout));
    ++revision;
}

std::vector<DocId> SteeringSession::interacted_ids() const {
    std::vector<DocId> out;
    for (const auto& g : groups) out.insert(out.end(), g.member_ids.begin(), g.member_ids.end());
    return out;
}

const AnalystGroup* SteeringSession::find_group(const GroupId& id) const {
    const auto it = std::find_if(groups.begin(), groups.end(), [&](const AnalystGroup& g) { return g.group_id == id; });
    return it == groups.end() ? nullptr : &*it;
}

const ClusterCard* SteeringSession::find_card(const GroupId& id) const {
    const auto it = std::find_if(cards.begin(), cards.end(), [&](const ClusterCard& c) { return c.group_id == id; });
    return it == cards.end() ? nullptr : &*it;
}

SteeringSession create_session(const Corpus& corpus, std::string perspective_name) {
    const auto n = ++g_session_counter;
    SteeringSession s;
    if (perspective_name.empty()) {
        perspective_name = "session-" + std::to_string(n);
        s.session_id = corpus.name() + "-" + perspective_name;
    } else {
        s.session_id = corpus.name() + "-" + perspective_name + "-" + std::to_string(n);
    }
    s.corpus_name = corpus.name();
    s.perspective_name = std::move(perspective_name);
    return s;
}

nlohmann::json session_to_json(const SteeringSession& s) {
    nlohmann::json augs = nlohmann::json::array();
    for (const auto& [id, aug] : s.augmentations) augs.push_back(aug);
    nlohmann::json decisions = nlohmann::json::array();
    for (const auto& [id, d] : s.extension_results) decisions.push_back(d);
    nlohmann::json layouts = nlohmann::json::object();
    for (const auto& [name, layout] : s.layouts) layouts[name] = layout;
    return {
        {"schema_version", kSessionSchemaVersion},
        {"session_id", s.session_id},
        {"corpus_name", s.corpus_name},
        {"perspective_name", s.perspective_name},
        {"groups", s.groups},
        {"semantics", {{"cluster_cards", s.cards}, {"augmentations", augs}}},
        {"extension", {{"decisions", decisions}, {"complete", s.extension_complete}}},
        {"incorporation", s.incorporation},
        {"layouts", layouts},
        {"revision", s.revision},
    };
}

SteeringSession session_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("schema_version")) fail(ErrorKind::data, "session file lacks schema_version");
    const auto version = j.at("schema_version").get<int>();
    if (version != kSessionSchemaVersion) {
        fail(ErrorKind::data,
             "unsupported session schema version " + std::to_string(version) + " (expected " +
                 std::to_string(kSessionSchemaVersion) + ")",
             {{"schema_version", version}});
    }
    try {
        SteeringSession s;
        s.session_id = j.at("session_id").get<std::string>();
        s.corpus_name = j.at("corpus_name").get<std::string>();
        s.perspective_name = j.at("perspective_name").get<std::string>();
        s.groups = j.at("groups").get<std::vector<AnalystGroup>>();
        s.cards = j.at("semantics").at("cluster_cards").get<std::vector<ClusterCard>>();
        for (const auto& a : j.at("semantics").at("augmentations")) {
            auto aug = a.get<DocAugmentation>();
            const auto id = aug.doc_id;
            s.augmentations.emplace(id, std::move(aug));
        }
        for (const auto& d : j.at("extension").at("decisions")) {
            auto dec = d.get<ExtensionDecision>();
            const auto id = dec.doc_id;
            s.extension_results.emplace(id, std::move(dec));
        }
        s.extension_complete = j.at("extension").at("complete").get<bool>();
        s.incorporation = j.at("incorporation").get<IncorporationConfig>();
        for (const auto& [name, layout] : j.at("layouts").items()) s.layouts.emplace(name, layout.get<ProjectionLayout>());
        s.revision = j.at("revision").get<std::int64_t>();
        return s;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::data, std::string("malformed session: ") + e.what());
    }
}

std::string serialize_session(const SteeringSession& session) {
    return session_to_json(session).dump(2) + "\n";
}

SteeringSession deserialize_session(std::string_view contents) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(contents);
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorKind::data, std::string("session parse error: ") + e.what());
    }
    return session_from_json(j);
}

void save_session(const SteeringSession& session, const std::string& path) {
    write_file_atomic(path, serialize_session(session));
}

SteeringSession load_session(const std::string& path) {
    return deserialize_session(read_file(path));
}

std::vector<GroupSpec> parse_group_specs(const nlohmann::json& j) {
    const auto* arr = &j;
    if (j.is_object()) {
        if (!j.contains("groups")) fail(ErrorKind::data, "groups document lacks a 'groups' array");
        arr = &j.at("groups");
    }
    if (!arr->is_array()) fail(ErrorKind::data, "'groups' must be an array");
    std::vector<GroupSpec> specs;
    for (const auto& g : *arr) {
        if (!g.is_object() || !g.contains("group_id") || !g.contains("member_ids") || !g["group_id"].is_string() ||
            !g["member_ids"].is_array()) {
            fail(ErrorKind::data, "each group needs string group_id and array member_ids");
        }
        GroupSpec spec{g["group_id"].get<std::string>(), {}};
        for (const auto& m : g["member_ids"]) {
            if (!m.is_string()) fail(ErrorKind::data, "member ids must be strings");
            spec.member_ids.push_back(m.get<std::string>());
        }
        specs.push_back(std::move(spec));
    }
    return specs;
}

nlohmann::json group_specs_to_json(const std::vector<GroupSpec>& specs) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : specs) arr.push_back({{"group_id", s.group_id}, {"member_ids", s.member_ids}});
    return {{"groups", arr}};
}

} // namespace semsteer

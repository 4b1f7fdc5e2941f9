#include "semsteer/steering/steering.hpp"

#include <algorithm>
#include <set>

#include "semsteer/error.hpp"
#include "semsteer/parallel.hpp"
#include "semsteer/steering/prompts.hpp"
#include "semsteer/util.hpp"

namespace semsteer::steering {

using providers::LlmRequest;

namespace {

std::string one_line(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\r') continue;
        out.push_back(s[i] == '\n' ? ' ' : s[i]);
    }
    return out;
}

// Prefix of at most `n` bytes that does not split a UTF-8 sequence.
std::string snippet(const std::string& text, std::size_t n) {
    if (text.size() <= n) return text;
    std::size_t cut = n;
    while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;
    return text.substr(0, cut) + "...";
}

std::string render_card(const ClusterCard& card) {
    std::string out = "Name: " + card.name + "\nDescription: " + card.description + "\nInclusion criteria:\n";
    for (const auto& c : card.inclusion_criteria) out += "- " + c + "\n";
    out += "Exclusion criteria:\n";
    for (const auto& c : card.exclusion_criteria) out += "- " + c + "\n";
    return out;
}

std::string render_other_cards(const std::vector<ClusterCard>& cards, const GroupId& self) {
    std::string out;
    for (const auto& c : cards) {
        if (c.group_id == self) continue;
        out += "- \"" + c.group_id + "\" (" + c.name + "): " + c.description + "\n";
    }
    return out.empty() ? std::string("(none)") : out;
}

nlohmann::json cards_json(const std::vector<ClusterCard>& cards) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : cards) arr.push_back(c);
    return arr;
}

std::vector<std::string> group_ids(const SteeringSession& session) {
    std::vector<std::string> ids;
    for (const auto& g : session.groups) ids.push_back(g.group_id);
    return ids;
}

DocAugmentation augmentation_from_payload(const nlohmann::json& p, const DocId& doc_id, const GroupId& group_id,
                                          AugmentationOrigin origin, bool single_group) {
    DocAugmentation aug;
    aug.doc_id = doc_id;
    aug.group_id = group_id;
    aug.intent_statement = p.at("intent_statement").get<std::string>();
    aug.justification = p.at("justification").get<std::string>();
    aug.contrast = single_group ? std::string(kNoContrast) : p.at("contrast").get<std::string>();
    aug.keywords = p.at("keywords").get<std::vector<std::string>>();
    aug.origin = origin;
    aug.augmentation_text = render_augmentation_text(aug);
    return aug;
}

[[noreturn]] void rethrow_with(const std::exception_ptr& e, const std::string& stage, const nlohmann::json& where) {
    try {
        std::rethrow_exception(e);
    } catch (const Error& err) {
        nlohmann::json detail = where;
        detail["stage"] = stage;
        if (!err.detail().is_null()) detail["cause"] = err.detail();
        fail(err.kind(), stage + " failed for " + where.dump() + ": " + err.what(), detail);
    } catch (const std::exception& err) {
        nlohmann::json detail = where;
        detail["stage"] = stage;
        fail(ErrorKind::internal, stage + " failed for " + where.dump() + ": " + err.what(), detail);
    }
}

} // namespace

std::string render_augmentation_text(const DocAugmentation& aug) {
    return one_line(aug.intent_statement) + " " + one_line(aug.justification) + " " + one_line(aug.contrast) +
           " Keywords: " + one_line(join(aug.keywords, ", "));
}

// ---------------------------------------------------------------- requests

LlmRequest cluster_card_request(const SteeringSession& session, const DocumentStore& docs, const AnalystGroup& group) {
    const auto tpl = load_template(kClusterCard);
    std::string members;
    nlohmann::json member_texts = nlohmann::json::array();
    for (const auto& id : group.member_ids) {
        const auto& text = docs.at(id).text;
        members += "[" + id + "]\n" + text + "\n\n";
        member_texts.push_back(text);
    }
    std::string others;
    nlohmann::json other_json = nlohmann::json::array();
    for (const auto& g : session.groups) {
        if (g.group_id == group.group_id) continue;
        others += "Group \"" + g.group_id + "\":\n";
        nlohmann::json texts = nlohmann::json::array();
        for (const auto& id : g.member_ids) {
            const auto& text = docs.at(id).text;
            others += "- " + snippet(one_line(text), 400) + "\n";
            texts.push_back(text);
        }
        others += "\n";
        other_json.push_back({{"group_id", g.group_id}, {"member_texts", texts}});
    }
    if (others.empty()) others = "(none)";
    while (!members.empty() && members.back() == '\n') members.pop_back();

    LlmRequest req;
    req.schema_name = kClusterCard;
    req.system_prompt = tpl.system;
    req.user_prompt = fill(tpl.user, {{"group_id", group.group_id},
                                      {"member_count", std::to_string(group.member_ids.size())},
                                      {"group_documents", members},
                                      {"other_groups", others}});
    req.context = {{"task", "cluster_card"},
                   {"group_id", group.group_id},
                   {"member_ids", group.member_ids},
                   {"member_texts", member_texts},
                   {"other_groups", other_json}};
    return req;
}

LlmRequest doc_augmentation_request(const SteeringSession&, const DocumentStore& docs, const std::vector<ClusterCard>& cards,
                                    const AnalystGroup& group, const DocId& doc_id) {
    const auto tpl = load_template(kDocAugmentation);
    const auto it = std::find_if(cards.begin(), cards.end(), [&](const ClusterCard& c) { return c.group_id == group.group_id; });
    if (it == cards.end()) fail(ErrorKind::internal, "no cluster card for group '" + group.group_id + "'");
    const auto& text = docs.at(doc_id).text;

    LlmRequest req;
    req.schema_name = kDocAugmentation;
    req.system_prompt = tpl.system;
    req.user_prompt = fill(tpl.user, {{"group_id", group.group_id},
                                      {"card", render_card(*it)},
                                      {"other_cards", render_other_cards(cards, group.group_id)},
                                      {"doc_id", doc_id},
                                      {"doc_text", text}});
    req.context = {{"task", "doc_augmentation"},
                   {"group_id", group.group_id},
                   {"doc_id", doc_id},
                   {"doc_text", text},
                   {"card", *it},
                   {"cards", cards_json(cards)}};
    return req;
}

LlmRequest extension_match_request(const SteeringSession& session, const DocumentStore& docs, const DocId& doc_id) {
    const auto tpl = load_template(kExtensionMatch);
    std::string cards;
    for (const auto& c : session.cards) cards += "Group \"" + c.group_id + "\"\n" + render_card(c) + "\n";
    while (!cards.empty() && cards.back() == '\n') cards.pop_back();
    const auto ids = group_ids(session);
    std::vector<std::string> quoted;
    for (const auto& id : ids) quoted.push_back("\"" + id + "\"");
    const auto& text = docs.at(doc_id).text;

    LlmRequest req;
    req.schema_name = kExtensionMatch;
    req.system_prompt = tpl.system;
    req.user_prompt = fill(tpl.user, {{"cards", cards}, {"doc_id", doc_id}, {"doc_text", text}, {"group_ids", join(quoted, ", ")}});
    auto outcomes = ids;
    outcomes.push_back("none");
    outcomes.push_back("ambiguous");
    req.allowed_values["outcome"] = outcomes;
    req.context = {{"task", "extension_match"},
                   {"doc_id", doc_id},
                   {"doc_text", text},
                   {"cards", cards_json(session.cards)},
                   {"group_sizes", nlohmann::json::object()}};
    for (const auto& g : session.groups) req.context["group_sizes"][g.group_id] = g.member_ids.size();
    return req;
}

LlmRequest extension_augmentation_request(const SteeringSession& session, const DocumentStore& docs, const DocId& doc_id,
                                          const GroupId& group_id, const SteeringOptions& options) {
    const auto tpl = load_template(kExtensionAugmentation);
    const auto* group = session.find_group(group_id);
    const auto* card = session.find_card(group_id);
    if (group == nullptr || card == nullptr) fail(ErrorKind::internal, "unknown group '" + group_id + "'");

    std::string exemplars;
    nlohmann::json exemplar_json = nlohmann::json::array();
    int used = 0;
    for (const auto& member : group->member_ids) {
        if (used >= options.few_shot_k) break;
        const auto it = session.augmentations.find(member);
        if (it == session.augmentations.end() || it->second.group_id != group_id) continue;
        const auto excerpt = snippet(docs.at(member).text, options.snippet_chars);
        exemplars += "Example " + std::to_string(used + 1) + " (document " + member + ")\nExcerpt: " + one_line(excerpt) +
                     "\nAugmentation: " + it->second.augmentation_text + "\n\n";
        exemplar_json.push_back({{"doc_id", member}, {"excerpt", excerpt}, {"augmentation_text", it->second.augmentation_text},
                                 {"keywords", it->second.keywords}});
        ++used;
    }
    while (!exemplars.empty() && exemplars.back() == '\n') exemplars.pop_back();
    if (exemplars.empty()) exemplars = "(none)";
    const auto& text = docs.at(doc_id).text;

    LlmRequest req;
    req.schema_name = kExtensionAugmentation;
    req.system_prompt = tpl.system;
    req.user_prompt = fill(tpl.user, {{"group_id", group_id},
                                      {"card", render_card(*card)},
                                      {"other_cards", render_other_cards(session.cards, group_id)},
                                      {"exemplars", exemplars},
                                      {"doc_id", doc_id},
                                      {"doc_text", text}});
    req.context = {{"task", "extension_augmentation"},
                   {"group_id", group_id},
                   {"doc_id", doc_id},
                   {"doc_text", text},
                   {"card", *card},
                   {"cards", cards_json(session.cards)},
                   {"exemplars", exemplar_json}};
    return req;
}

// ---------------------------------------------------------------- operations

ExternalizeResult externalize(SteeringSession& session, const DocumentStore& docs, providers::LlmClient& llm,
                              const SteeringOptions& options) {
    if (session.groups.empty()) fail(ErrorKind::usage, "externalize needs at least one analyst group");
    for (const auto& g : session.groups) {
        if (g.member_ids.empty()) fail(ErrorKind::usage, "group '" + g.group_id + "' has no members");
    }
    const auto& registry = schema_registry();

    ExternalizeResult result;
    result.cards.resize(session.groups.size());
    auto card_errors = parallel_for(session.groups.size(), options.max_parallel, [&](std::size_t i) {
        const auto& group = session.groups[i];
        const auto res = providers::complete_structured(llm, registry, cluster_card_request(session, docs, group));
        auto& card = result.cards[i];
        card.group_id = group.group_id;
        card.name = res.payload.at("name").get<std::string>();
        card.description = res.payload.at("description").get<std::string>();
        card.inclusion_criteria = res.payload.at("inclusion_criteria").get<std::vector<std::string>>();
        card.exclusion_criteria = res.payload.at("exclusion_criteria").get<std::vector<std::string>>();
    });
    for (std::size_t i = 0; i < card_errors.size(); ++i) {
        if (card_errors[i]) rethrow_with(card_errors[i], "externalize", {{"group_id", session.groups[i].group_id}});
    }

    struct Job {
        const AnalystGroup* group;
        DocId doc_id;
    };
    std::vector<Job> jobs;
    for (const auto& g : session.groups) {
        for (const auto& id : g.member_ids) jobs.push_back({&g, id});
    }
    const bool single_group = session.groups.size() == 1;
    result.augmentations.resize(jobs.size());
    auto aug_errors = parallel_for(jobs.size(), options.max_parallel, [&](std::size_t i) {
        const auto& job = jobs[i];
        const auto res = providers::complete_structured(
            llm, registry, doc_augmentation_request(session, docs, result.cards, *job.group, job.doc_id));
        result.augmentations[i] =
            augmentation_from_payload(res.payload, job.doc_id, job.group->group_id, AugmentationOrigin::interacted, single_group);
    });
    for (std::size_t i = 0; i < aug_errors.size(); ++i) {
        if (aug_errors[i]) {
            rethrow_with(aug_errors[i], "externalize", {{"group_id", jobs[i].group->group_id}, {"doc_id", jobs[i].doc_id}});
        }
    }

    session.set_semantics(result.cards, result.augmentations);
    return result;
}

ExtensionDecision interpret_match(const DocId& doc_id, const nlohmann::json& payload) {
    ExtensionDecision d;
    d.doc_id = doc_id;
    const auto outcome = payload.at("outcome").get<std::string>();
    d.raw_confidence = parse_confidence(payload.at("confidence").get<std::string>());
    if (outcome == "ambiguous") {
        d.reason = ExtensionReason::ambiguous_multi_match;
    } else if (outcome == "none" || *d.raw_confidence == Confidence::low) {
        d.reason = ExtensionReason::weak_evidence;
    } else {
        d.assigned_group = outcome;
        d.reason = ExtensionReason::matched;
    }
    return d;
}

ExtendResult extend(SteeringSession& session, const DocumentStore& docs, providers::LlmClient& llm,
                    const SteeringOptions& options) {
    if (options.few_shot_k < 0) fail(ErrorKind::usage, "few_shot_k must be >= 0");
    if (!session.has_semantics()) fail(ErrorKind::usage, "extend requires externalized semantics for the current groups");
    const auto& registry = schema_registry();

    std::set<DocId> interacted;
    for (const auto& id : session.interacted_ids()) interacted.insert(id);
    std::vector<DocId> pending;
    for (const auto& doc : docs.documents()) {
        if (!interacted.contains(doc.id) && !session.extension_results.contains(doc.id)) pending.push_back(doc.id);
    }

    std::vector<std::optional<ExtensionDecision>> decisions(pending.size());
    std::vector<std::optional<DocAugmentation>> augs(pending.size());
    const bool single_group = session.groups.size() == 1;
    auto errors = parallel_for(pending.size(), options.max_parallel, [&](std::size_t i) {
        const auto& id = pending[i];
        const auto match = providers::complete_structured(llm, registry, extension_match_request(session, docs, id));
        auto decision = interpret_match(id, match.payload);
        if (decision.assigned()) {
            const auto res = providers::complete_structured(
                llm, registry, extension_augmentation_request(session, docs, id, *decision.assigned_group, options));
            augs[i] = augmentation_from_payload(res.payload, id, *decision.assigned_group, AugmentationOrigin::extended, single_group);
        }
        decisions[i] = std::move(decision);
    });

    ExtendResult result;
    std::vector<DocId> failed;
    std::exception_ptr first_error;
    for (std::size_t i = 0; i < pending.size(); ++i) {
        if (errors[i]) {
            failed.push_back(pending[i]);
            if (!first_error) first_error = errors[i];
            continue;
        }
        result.decisions.push_back(*decisions[i]);
        if (augs[i]) result.augmentations.push_back(*augs[i]);
    }
    session.record_extension(result.decisions, result.augmentations, failed.empty());
    if (!failed.empty()) {
        std::string cause;
        try {
            std::rethrow_exception(first_error);
        } catch (const std::exception& e) {
            cause = e.what();
        }
        fail(ErrorKind::provider,
             "extension failed for " + std::to_string(failed.size()) + " document(s); partial results saved (first error: " + cause + ")",
             {{"stage", "extend"}, {"failed_doc_ids", failed}, {"checkpoint", true}});
    }
    return result;
}

} // namespace semsteer::steering

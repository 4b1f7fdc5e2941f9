#include "semsteer/sim/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "semsteer/error.hpp"
#include "semsteer/metrics.hpp"
#include "semsteer/util.hpp"

namespace semsteer::sim {

namespace {

constexpr const char* kConsonants = "bdfgklmnprstvz";
constexpr const char* kVowels = "aeiou";

std::string pseudo_word(Rng& rng, int syllables) {
    std::string w;
    for (int s = 0; s < syllables; ++s) {
        w.push_back(kConsonants[rng.below(14)]);
        w.push_back(kVowels[rng.below(5)]);
    }
    return w;
}

std::vector<std::string> fresh_words(Rng& rng, std::set<std::string>& used, int n, int syllables) {
    std::vector<std::string> out;
    while (static_cast<int>(out.size()) < n) {
        auto w = pseudo_word(rng, syllables);
        if (used.insert(w).second) out.push_back(std::move(w));
    }
    return out;
}

std::string group_label(int g) {
    return std::string("refgroup_") + static_cast<char>('a' + g % 26) + (g >= 26 ? std::to_string(g / 26) : "");
}

double draw(std::uint64_t seed, std::string_view stream, const std::string& doc_id) {
    Rng rng(mix_seed(mix_seed(seed, stream), doc_id));
    return rng.uniform();
}

std::vector<std::string> own_words(const std::string& text, std::uint64_t seed, const std::string& doc_id) {
    std::vector<std::string> distinct;
    std::set<std::string> seen;
    for (auto& t : tokenize(text)) {
        if (seen.insert(t).second) distinct.push_back(t);
    }
    Rng rng(mix_seed(mix_seed(seed, std::string_view("filler")), doc_id));
    const auto order = rng.sample_without_replacement(distinct.size(), distinct.size());
    std::vector<std::string> out;
    for (auto i : order) out.push_back(distinct[i]);
    return out;
}

providers::LlmResponse respond(const nlohmann::json& payload) {
    providers::LlmResponse r;
    r.raw_text = payload.dump();
    return r;
}

} // namespace

void to_json(nlohmann::json& j, const SyntheticCorpusParams& p) {
    j = {{"groups", p.groups},
         {"docs_per_group", p.docs_per_group},
         {"topic_vocab", p.topic_vocab},
         {"background_vocab", p.background_vocab},
         {"topic_words", p.topic_words},
         {"cross_words", p.cross_words},
         {"background_words", p.background_words},
         {"unique_words", p.unique_words},
         {"seed", p.seed}};
}

void from_json(const nlohmann::json& j, SyntheticCorpusParams& p) {
    p.groups = j.value("groups", p.groups);
    p.docs_per_group = j.value("docs_per_group", p.docs_per_group);
    p.topic_vocab = j.value("topic_vocab", p.topic_vocab);
    p.background_vocab = j.value("background_vocab", p.background_vocab);
    p.topic_words = j.value("topic_words", p.topic_words);
    p.cross_words = j.value("cross_words", p.cross_words);
    p.background_words = j.value("background_words", p.background_words);
    p.unique_words = j.value("unique_words", p.unique_words);
    p.seed = j.value("seed", p.seed);
}

void to_json(nlohmann::json& j, const OracleParams& p) {
    j = {{"marker_strength", p.marker_strength},
         {"abstention", p.abstention == AbstentionMode::confidence ? "confidence" : "fixed_rate"},
         {"abstention_rate", p.abstention_rate},
         {"error_rate", p.error_rate},
         {"midpoint", p.midpoint},
         {"scale", p.scale}};
}

void from_json(const nlohmann::json& j, OracleParams& p) {
    p.marker_strength = j.value("marker_strength", p.marker_strength);
    if (j.contains("abstention")) {
        const auto mode = j.at("abstention").get<std::string>();
        if (mode == "confidence") p.abstention = AbstentionMode::confidence;
        else if (mode == "fixed_rate") p.abstention = AbstentionMode::fixed_rate;
        else fail(ErrorKind::usage, "unknown abstention mode '" + mode + "' (expected confidence|fixed_rate)");
    }
    p.abstention_rate = j.value("abstention_rate", p.abstention_rate);
    p.error_rate = j.value("error_rate", p.error_rate);
    p.midpoint = j.value("midpoint", p.midpoint);
    p.scale = j.value("scale", p.scale);
    if (p.marker_strength < 0) fail(ErrorKind::usage, "marker_strength must be >= 0");
    if (!(p.abstention_rate >= 0.0 && p.abstention_rate <= 1.0)) fail(ErrorKind::usage, "abstention_rate must lie in [0,1]");
    if (!(p.error_rate >= 0.0 && p.error_rate <= 1.0)) fail(ErrorKind::usage, "error_rate must lie in [0,1]");
    if (!(p.scale > 0.0)) fail(ErrorKind::usage, "scale must be > 0");
}

Corpus make_synthetic_corpus(const SyntheticCorpusParams& p) {
    if (p.groups < 2 || p.docs_per_group < 1) fail(ErrorKind::usage, "synthetic corpus needs >= 2 groups and >= 1 doc per group");
    if (p.topic_vocab < 1 || p.background_vocab < 1) fail(ErrorKind::usage, "synthetic vocabularies must be nonempty");
    if (p.topic_words < 0 || p.cross_words < 0 || p.background_words < 0 || p.unique_words < 0 ||
        p.topic_words + p.cross_words + p.background_words + p.unique_words == 0) {
        fail(ErrorKind::usage, "synthetic document word counts must be >= 0 and not all zero");
    }
    Rng rng(p.seed);
    std::set<std::string> used;
    std::vector<std::vector<std::string>> topics;
    for (int g = 0; g < p.groups; ++g) topics.push_back(fresh_words(rng, used, p.topic_vocab, 3));
    const auto background = fresh_words(rng, used, p.background_vocab, 2);

    const int total = p.groups * p.docs_per_group;
    const auto order = rng.sample_without_replacement(static_cast<std::size_t>(total), static_cast<std::size_t>(total));
    const int width = static_cast<int>(std::to_string(total).size());

    std::vector<Document> docs(static_cast<std::size_t>(total));
    std::map<DocId, std::string> labels;
    for (int n = 0; n < total; ++n) {
        const int g = n / p.docs_per_group;
        std::vector<std::string> words;
        for (int i = 0; i < p.topic_words; ++i) words.push_back(topics[g][rng.below(topics[g].size())]);
        for (int i = 0; i < p.cross_words; ++i) {
            auto other = static_cast<int>(rng.below(static_cast<std::uint64_t>(p.groups - 1)));
            if (other >= g) ++other;
            words.push_back(topics[other][rng.below(topics[other].size())]);
        }
        for (int i = 0; i < p.background_words; ++i) words.push_back(background[rng.below(background.size())]);
        auto unique = fresh_words(rng, used, p.unique_words, 4);
        words.insert(words.end(), unique.begin(), unique.end());
        const auto perm = rng.sample_without_replacement(words.size(), words.size());
        std::string text;
        for (std::size_t i = 0; i < perm.size(); ++i) {
            if (i) text += (i % 10 == 0) ? ". " : " ";
            text += words[perm[i]];
        }
        text += ".";
        // Positions are shuffled so that corpus order carries no group structure.
        const auto slot = order[static_cast<std::size_t>(n)];
        const auto id = fmt::format("d{:0{}}", slot + 1, width);
        docs[slot] = {id, std::move(text)};
        labels[id] = group_label(g);
    }
    return make_corpus(fmt::format("synthetic-{}x{}", p.groups, p.docs_per_group), std::move(docs), std::move(labels));
}

std::vector<std::string> marker_tokens(const std::string& label, int count) {
    std::vector<std::string> out;
    for (int i = 0; i < count; ++i) {
        std::uint64_t h = fnv1a64(label + "#marker#" + std::to_string(i));
        std::string w = "mk";
        for (int c = 0; c < 6; ++c) {
            w.push_back(static_cast<char>('a' + h % 26));
            h /= 26;
        }
        out.push_back(std::move(w));
    }
    return out;
}

double match_probability(const OracleParams& params, std::size_t group_size) {
    if (params.abstention == AbstentionMode::fixed_rate) return 1.0 - params.abstention_rate;
    return 1.0 / (1.0 + std::exp(-(static_cast<double>(group_size) - params.midpoint) / params.scale));
}

SyntheticOracleLlm::SyntheticOracleLlm(std::map<DocId, std::string> labels, const std::vector<AnalystGroup>& groups,
                                       OracleParams params, std::uint64_t seed)
    : labels_(std::move(labels)), params_(params), seed_(seed) {
    group_label_ = metrics::majority_mapping(groups, labels_);
    for (const auto& g : groups) {
        group_size_[g.group_id] = g.member_ids.size();
        group_order_.push_back(g.group_id);
    }
}

nlohmann::json SyntheticOracleLlm::card(const nlohmann::json& ctx) const {
    const auto gid = ctx.at("group_id").get<std::string>();
    nlohmann::json inclusion = nlohmann::json::array();
    if (const auto it = group_label_.find(gid); it != group_label_.end()) {
        for (const auto& m : marker_tokens(it->second, params_.marker_strength)) inclusion.push_back("Mentions " + m);
    }
    if (inclusion.empty()) inclusion.push_back("Resembles the grouped examples");
    return {{"name", "Shared theme " + gid},
            {"description", "Documents the analyst placed together."},
            {"inclusion_criteria", inclusion},
            {"exclusion_criteria", {"Resembles another group's examples"}}};
}

nlohmann::json SyntheticOracleLlm::augmentation(const nlohmann::json& ctx) const {
    const auto gid = ctx.at("group_id").get<std::string>();
    const auto doc_id = ctx.at("doc_id").get<std::string>();
    std::vector<std::string> markers;
    if (const auto it = group_label_.find(gid); it != group_label_.end()) markers = marker_tokens(it->second, params_.marker_strength);
    const auto filler = own_words(ctx.at("doc_text").get<std::string>(), seed_, doc_id);

    std::vector<std::string> keywords(markers.begin(), markers.begin() + std::min<std::size_t>(markers.size(), 8));
    std::size_t f = 0;
    while (keywords.size() < 3 && f < filler.size()) keywords.push_back(filler[f++]);
    while (keywords.size() < 3) keywords.push_back("theme");
    std::vector<std::string> mentioned;
    for (std::size_t i = 8; i < markers.size(); ++i) mentioned.push_back(markers[i]);
    for (std::size_t i = 0; i < 3 && f < filler.size(); ++i) mentioned.push_back(filler[f++]);
    const std::string justification = mentioned.empty() ? "It shares the group's emphasis." : "It mentions " + join(mentioned, ", ") + ".";
    return {{"intent_statement", "This document fits the analyst's grouping."},
            {"justification", justification},
            {"contrast", "It differs from the other groups."},
            {"keywords", keywords}};
}

nlohmann::json SyntheticOracleLlm::match(const nlohmann::json& ctx) const {
    const auto doc_id = ctx.at("doc_id").get<std::string>();
    const auto label = labels_.find(doc_id);
    const GroupId* target = nullptr;
    if (label != labels_.end()) {
        for (const auto& gid : group_order_) {
            if (const auto it = group_label_.find(gid); it != group_label_.end() && it->second == label->second) {
                target = &gid;
                break;
            }
        }
    }
    if (target == nullptr) return {{"outcome", "none"}, {"confidence", "low"}, {"rationale", "No group fits."}};

    const double p = match_probability(params_, group_size_.at(*target));
    const double u = draw(seed_, "match", doc_id);
    if (u >= p) {
        if (draw(seed_, "abstain_kind", doc_id) < 0.5) {
            return {{"outcome", "ambiguous"}, {"confidence", "medium"}, {"rationale", "Several groups fit partly."}};
        }
        return {{"outcome", *target}, {"confidence", "low"}, {"rationale", "Only faint resemblance."}};
    }
    GroupId chosen = *target;
    if (group_order_.size() > 1 && draw(seed_, "error", doc_id) < params_.error_rate) {
        std::vector<GroupId> others;
        for (const auto& gid : group_order_) {
            if (gid != *target) others.push_back(gid);
        }
        Rng rng(mix_seed(mix_seed(seed_, std::string_view("wrong")), doc_id));
        chosen = others[rng.below(others.size())];
    }
    return {{"outcome", chosen}, {"confidence", u < p / 2.0 ? "high" : "medium"}, {"rationale", "Clear resemblance."}};
}

providers::LlmResponse SyntheticOracleLlm::complete(const providers::LlmRequest& request, const providers::ResponseSchema&) {
    const auto& ctx = request.context;
    if (!ctx.is_object() || !ctx.contains("task")) fail(ErrorKind::provider, "synthetic oracle needs a request context");
    const auto task = ctx.at("task").get<std::string>();
    if (task == "cluster_card") return respond(card(ctx));
    if (task == "doc_augmentation" || task == "extension_augmentation") return respond(augmentation(ctx));
    if (task == "extension_match") return respond(match(ctx));
    fail(ErrorKind::provider, "synthetic oracle cannot handle task '" + task + "'");
}

SyntheticProviders synthetic_oracle_providers(const Corpus& corpus, const std::vector<AnalystGroup>& groups,
                                              const OracleParams& params, std::uint64_t seed, int dim) {
    if (corpus.reference.empty()) fail(ErrorKind::data, "synthetic oracle needs reference groups");
    SyntheticProviders out;
    out.llm = std::make_shared<SyntheticOracleLlm>(corpus.reference.labels(), groups, params, seed);
    out.embedder = std::make_shared<providers::CachingEmbedder>(std::make_shared<providers::MockEmbedder>(dim));
    return out;
}

} // namespace semsteer::sim

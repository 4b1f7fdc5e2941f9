#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "semsteer/error.hpp"
#include "semsteer/steering/prompts.hpp"
#include "semsteer/steering/steering.hpp"
#include "semsteer/util.hpp"

namespace semsteer::steering {

namespace {

const std::set<std::string>& stopwords() {
    static const std::set<std::string> words{
        "a",    "about", "after", "also",  "an",   "and",   "are",   "as",   "at",    "be",   "been", "but",
        "by",   "can",   "for",   "from",  "has",  "have",  "how",   "in",   "into",  "is",   "it",   "its",
        "more", "not",   "of",    "on",    "or",   "our",   "such",  "than", "that",  "the",  "their", "these",
        "this", "to",    "was",   "we",    "were", "which", "while", "with", "within", "would", "you", "they",
        "i",    "my",    "very",  "so",    "if",   "all",   "one",   "use",  "using", "used", "new",  "based"};
    return words;
}

bool content_token(const std::string& t) {
    return t.size() >= 3 && !stopwords().contains(t);
}

std::map<std::string, int> counts(const std::string& text) {
    std::map<std::string, int> c;
    for (auto& t : tokenize(text)) {
        if (content_token(t)) ++c[t];
    }
    return c;
}

std::set<std::string> token_set(const std::string& text) {
    std::set<std::string> s;
    for (auto& t : tokenize(text)) {
        if (content_token(t)) s.insert(t);
    }
    return s;
}

// Tokens ranked by document frequency inside `texts` minus frequency in `others`.
std::vector<std::string> distinctive_tokens(const std::vector<std::string>& texts, const std::vector<std::string>& others,
                                            std::size_t n) {
    std::map<std::string, double> score;
    for (const auto& t : texts) {
        for (const auto& tok : token_set(t)) score[tok] += 1.0 / static_cast<double>(texts.size());
    }
    if (!others.empty()) {
        for (const auto& t : others) {
            for (const auto& tok : token_set(t)) {
                if (auto it = score.find(tok); it != score.end()) it->second -= 1.0 / static_cast<double>(others.size());
            }
        }
    }
    std::vector<std::pair<std::string, double>> ranked(score.begin(), score.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<std::string> out;
    for (const auto& [tok, s] : ranked) {
        if (out.size() >= n) break;
        out.push_back(tok);
    }
    return out;
}

std::string card_text(const nlohmann::json& card) {
    std::string s = card.at("name").get<std::string>() + " " + card.at("description").get<std::string>();
    for (const auto& c : card.at("inclusion_criteria")) s += " " + c.get<std::string>();
    return s;
}

std::string list_phrase(const std::vector<std::string>& items) {
    if (items.empty()) return "";
    if (items.size() == 1) return items[0];
    std::vector<std::string> head(items.begin(), items.end() - 1);
    return join(head, ", ") + " and " + items.back();
}

nlohmann::json make_card(const nlohmann::json& ctx) {
    const auto texts = ctx.at("member_texts").get<std::vector<std::string>>();
    std::vector<std::string> others;
    std::vector<std::vector<std::string>> other_groups;
    for (const auto& g : ctx.at("other_groups")) {
        auto t = g.at("member_texts").get<std::vector<std::string>>();
        others.insert(others.end(), t.begin(), t.end());
        other_groups.push_back(std::move(t));
    }
    auto top = distinctive_tokens(texts, others, 3);
    if (top.empty()) top = {"shared", "themes"};

    nlohmann::json exclusion = nlohmann::json::array();
    for (const auto& g : other_groups) {
        std::vector<std::string> rest;
        for (const auto& o : other_groups) {
            if (&o != &g) rest.insert(rest.end(), o.begin(), o.end());
        }
        rest.insert(rest.end(), texts.begin(), texts.end());
        const auto theirs = distinctive_tokens(g, rest, 1);
        if (!theirs.empty()) exclusion.push_back("Focuses mainly on " + theirs[0]);
    }
    if (exclusion.empty()) exclusion.push_back("Unrelated to " + join(top, ", "));

    nlohmann::json inclusion = nlohmann::json::array();
    for (const auto& t : top) inclusion.push_back("Discusses " + t);
    return {{"name", "Documents about " + join(top, ", ")},
            {"description", "Documents that share an emphasis on " + list_phrase(top) + "."},
            {"inclusion_criteria", inclusion},
            {"exclusion_criteria", exclusion}};
}

nlohmann::json make_augmentation(const nlohmann::json& ctx) {
    const auto& card = ctx.at("card");
    const auto doc = counts(ctx.at("doc_text").get<std::string>());
    const auto card_tokens = token_set(card_text(card));

    std::vector<std::pair<std::string, int>> ranked(doc.begin(), doc.end());
    std::stable_sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
        const bool ca = card_tokens.contains(a.first), cb = card_tokens.contains(b.first);
        if (ca != cb) return ca;
        return a.second > b.second;
    });
    std::vector<std::string> keywords;
    for (const auto& [tok, n] : ranked) {
        if (keywords.size() >= 6) break;
        keywords.push_back(tok);
    }
    for (const auto& t : card_tokens) {
        if (keywords.size() >= 3) break;
        if (std::find(keywords.begin(), keywords.end(), t) == keywords.end()) keywords.push_back(t);
    }
    for (const char* filler : {"document", "content", "topic"}) {
        if (keywords.size() >= 3) break;
        keywords.emplace_back(filler);
    }

    std::vector<std::string> other_names;
    for (const auto& c : ctx.at("cards")) {
        if (c.at("group_id") != card.at("group_id")) other_names.push_back(c.at("name").get<std::string>());
    }
    const std::vector<std::string> lead(keywords.begin(), keywords.begin() + std::min<std::size_t>(3, keywords.size()));
    const std::string contrast = other_names.empty()
                                     ? std::string(kNoContrast)
                                     : "Unlike " + join(other_names, " or ") + ", it centers on " + keywords.front() + ".";
    return {{"intent_statement", "This document belongs with " + card.at("name").get<std::string>() + "."},
            {"justification", "It discusses " + list_phrase(lead) + "."},
            {"contrast", contrast},
            {"keywords", keywords}};
}

} // namespace

providers::LlmResponse HeuristicMockLlm::complete(const providers::LlmRequest& request, const providers::ResponseSchema&) {
    const auto& ctx = request.context;
    if (!ctx.is_object() || !ctx.contains("task")) fail(ErrorKind::provider, "heuristic mock needs a request context");
    const auto task = ctx.at("task").get<std::string>();

    nlohmann::json payload;
    if (task == "cluster_card") {
        payload = make_card(ctx);
    } else if (task == "doc_augmentation" || task == "extension_augmentation") {
        payload = make_augmentation(ctx);
    } else if (task == "extension_match") {
        const auto doc = counts(ctx.at("doc_text").get<std::string>());
        double doc_norm = 0.0;
        for (const auto& [t, n] : doc) doc_norm += static_cast<double>(n) * n;
        doc_norm = std::sqrt(doc_norm);
        std::vector<std::pair<double, std::string>> scores;
        for (const auto& card : ctx.at("cards")) {
            const auto tokens = token_set(card_text(card));
            double dot = 0.0;
            for (const auto& t : tokens) {
                if (auto it = doc.find(t); it != doc.end()) dot += it->second;
            }
            const double denom = doc_norm * std::sqrt(static_cast<double>(tokens.size()));
            scores.emplace_back(denom > 0.0 ? dot / denom : 0.0, card.at("group_id").get<std::string>());
        }
        std::stable_sort(scores.begin(), scores.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
        const double best = scores.empty() ? 0.0 : scores[0].first;
        const double second = scores.size() > 1 ? scores[1].first : 0.0;
        if (best < params_.min_score) {
            payload = {{"outcome", "none"}, {"confidence", "low"}, {"rationale", "No card shares enough content."}};
        } else if (scores.size() > 1 && best - second < params_.ambiguity_margin) {
            payload = {{"outcome", "ambiguous"}, {"confidence", "medium"}, {"rationale", "Two cards match comparably."}};
        } else {
            payload = {{"outcome", scores[0].second},
                       {"confidence", best >= params_.high_score ? "high" : "medium"},
                       {"rationale", "Shares the most content with this card."}};
        }
    } else {
        fail(ErrorKind::provider, "heuristic mock cannot handle task '" + task + "'");
    }
    providers::LlmResponse out;
    out.raw_text = payload.dump();
    return out;
}

std::shared_ptr<providers::LlmClient> make_llm(const providers::ProviderConfig& config,
                                               std::shared_ptr<providers::Transport> transport) {
    if (config.kind == providers::ProviderKind::mock) return std::make_shared<HeuristicMockLlm>();
    return std::make_shared<providers::RemoteLlm>(config, std::move(transport));
}

} // namespace semsteer::steering

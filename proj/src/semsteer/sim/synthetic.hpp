#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "semsteer/corpus.hpp"
#include "semsteer/providers/embedder.hpp"
#include "semsteer/providers/llm.hpp"

namespace semsteer::sim {

/// Generated labeled corpus of pseudo-word documents. Each document mixes
/// words from its own group's topic vocabulary, a few from other groups'
/// topics, shared background words, and words unique to the document.
struct SyntheticCorpusParams {
    int groups = 4;
    int docs_per_group = 28;
    int topic_vocab = 20;       // per group
    int background_vocab = 400;
    int topic_words = 8;        // per document, own group
    int cross_words = 3;        // per document, other groups
    int background_words = 24;
    int unique_words = 6;
    std::uint64_t seed = 7;

    bool operator==(const SyntheticCorpusParams&) const = default;
};

void to_json(nlohmann::json& j, const SyntheticCorpusParams& p);
void from_json(const nlohmann::json& j, SyntheticCorpusParams& p);

Corpus make_synthetic_corpus(const SyntheticCorpusParams& params);

enum class AbstentionMode { confidence, fixed_rate };

struct OracleParams {
    /// Marker tokens injected per augmentation (as keywords). 0 disables them;
    /// keywords then come from the document's own words only.
    int marker_strength = 5;
    AbstentionMode abstention = AbstentionMode::confidence;
    double abstention_rate = 0.0;   // fixed_rate mode
    double error_rate = 0.05;       // assigned documents sent to a wrong group
    /// Confidence mode: P(assign) = 1 / (1 + exp(-(m - midpoint) / scale)),
    /// m = size of the matching analyst group.
    double midpoint = 2.5;
    double scale = 0.787;

    bool operator==(const OracleParams&) const = default;
};

void to_json(nlohmann::json& j, const OracleParams& p);
void from_json(const nlohmann::json& j, OracleParams& p);

/// Marker tokens for a reference label: lowercase alphanumeric pseudo-words
/// derived from a hash of the label, so the label string itself never appears.
std::vector<std::string> marker_tokens(const std::string& label, int count);

double match_probability(const OracleParams& params, std::size_t group_size);

/// Deterministic LLM stand-in with access to reference labels. Cards and
/// augmentations for a group carry that group's marker tokens; extension
/// decisions assign, abstain, or err according to seeded per-document draws
/// that are shared across interaction sizes (so coverage grows monotonically
/// with group size in confidence mode).
class SyntheticOracleLlm final : public providers::LlmClient {
public:
    SyntheticOracleLlm(std::map<DocId, std::string> labels, const std::vector<AnalystGroup>& groups, OracleParams params,
                       std::uint64_t seed);

    providers::LlmResponse complete(const providers::LlmRequest& request, const providers::ResponseSchema& schema) override;

    const std::map<GroupId, std::string>& group_labels() const noexcept { return group_label_; }

private:
    nlohmann::json card(const nlohmann::json& ctx) const;
    nlohmann::json augmentation(const nlohmann::json& ctx) const;
    nlohmann::json match(const nlohmann::json& ctx) const;

    std::map<DocId, std::string> labels_;
    std::map<GroupId, std::string> group_label_;
    std::map<GroupId, std::size_t> group_size_;
    std::vector<GroupId> group_order_;
    OracleParams params_;
    std::uint64_t seed_;
};

struct SyntheticProviders {
    std::shared_ptr<SyntheticOracleLlm> llm;
    std::shared_ptr<providers::CachingEmbedder> embedder;
};

/// Oracle LLM for `groups` plus the bag-of-tokens embedder behind a memory cache.
SyntheticProviders synthetic_oracle_providers(const Corpus& corpus, const std::vector<AnalystGroup>& groups,
                                              const OracleParams& params, std::uint64_t seed, int dim = 256);

} // namespace semsteer::sim

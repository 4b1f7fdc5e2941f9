#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "semsteer/corpus.hpp"
#include "semsteer/providers/llm.hpp"
#include "semsteer/session.hpp"

namespace semsteer::steering {

inline constexpr const char* kNoContrast = "no contrasting groups defined";

struct SteeringOptions {
    int max_parallel = 4;
    int few_shot_k = 3;
    std::size_t snippet_chars = 400;  // raw-text excerpt shown with each few-shot exemplar
};

/// Flattens structured augmentation fields into the single paragraph used for
/// incorporation: "<intent> <justification> <contrast> Keywords: k1, k2".
/// Line breaks inside fields become spaces; everything else is verbatim.
std::string render_augmentation_text(const DocAugmentation& aug);

struct ExternalizeResult {
    std::vector<ClusterCard> cards;
    std::vector<DocAugmentation> augmentations;
};

/// One cluster card per group and one interacted augmentation per grouped
/// document. Stores the result on the session (revision + 1). Group membership
/// is left untouched.
ExternalizeResult externalize(SteeringSession& session, const DocumentStore& docs, providers::LlmClient& llm,
                              const SteeringOptions& options = {});

struct ExtendResult {
    std::vector<ExtensionDecision> decisions;       // corpus order, this call only
    std::vector<DocAugmentation> augmentations;     // origin = extended
};

/// Decides every non-interacted document that does not already have a decision
/// (so a failed run resumes where it stopped). Assigned documents get an
/// extended augmentation written with up to few_shot_k exemplars from the
/// matched group; abstained documents get nothing. On provider failure the
/// successful part is stored on the session before Error(provider) is thrown
/// with detail {"failed_doc_ids": [...], "checkpoint": true}.
ExtendResult extend(SteeringSession& session, const DocumentStore& docs, providers::LlmClient& llm,
                    const SteeringOptions& options = {});

/// Maps a validated extension_match payload to a decision. "none" and
/// low-confidence matches abstain as weak evidence; "ambiguous" abstains as
/// ambiguous_multi_match.
ExtensionDecision interpret_match(const DocId& doc_id, const nlohmann::json& payload);

/// Request builders, exposed for prompt inspection and tests.
providers::LlmRequest cluster_card_request(const SteeringSession& session, const DocumentStore& docs, const AnalystGroup& group);
providers::LlmRequest doc_augmentation_request(const SteeringSession& session, const DocumentStore& docs,
                                               const std::vector<ClusterCard>& cards, const AnalystGroup& group,
                                               const DocId& doc_id);
providers::LlmRequest extension_match_request(const SteeringSession& session, const DocumentStore& docs, const DocId& doc_id);
providers::LlmRequest extension_augmentation_request(const SteeringSession& session, const DocumentStore& docs,
                                                     const DocId& doc_id, const GroupId& group_id, const SteeringOptions& options);

/// Deterministic, label-free stand-in for a remote LLM. Works from the
/// structured request context: cards summarize the most distinctive tokens of
/// each group, and matching scores token overlap between a document and each
/// card, answering "none"/"ambiguous" when the evidence is weak or split.
class HeuristicMockLlm final : public providers::LlmClient {
public:
    struct Params {
        double min_score = 0.05;      // below => "none"
        double ambiguity_margin = 0.02;
        double high_score = 0.2;      // at or above => high confidence
    };

    HeuristicMockLlm() = default;
    explicit HeuristicMockLlm(Params params) : params_(params) {}
    providers::LlmResponse complete(const providers::LlmRequest& request, const providers::ResponseSchema& schema) override;

private:
    Params params_;
};

/// LLM client for a provider config: RemoteLlm for remote, HeuristicMockLlm for mock.
std::shared_ptr<providers::LlmClient> make_llm(const providers::ProviderConfig& config,
                                               std::shared_ptr<providers::Transport> transport = nullptr);

} // namespace semsteer::steering

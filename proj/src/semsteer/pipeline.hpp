#pragma once

#include <functional>
#include <string_view>
#include <vector>

#include "semsteer/corpus.hpp"
#include "semsteer/project.hpp"
#include "semsteer/providers/embedder.hpp"
#include "semsteer/providers/llm.hpp"
#include "semsteer/session.hpp"
#include "semsteer/steering/steering.hpp"

namespace semsteer::pipeline {

inline constexpr const char* kBaselineLayout = "baseline";
inline constexpr const char* kCurrentLayout = "current";

enum class Stage { externalizing, extending, incorporating, projecting };
const char* to_string(Stage stage);

using ProgressFn = std::function<void(Stage)>;

struct SteerOutcome {
    std::vector<EmbeddingRecord> records;
    ProjectionLayout baseline;
    ProjectionLayout current;
};

/// Runs whatever part of externalize -> extend -> incorporate -> project the
/// session still needs, then publishes "current" (and "baseline" on first use).
/// A published baseline fixes the projection config: a different config is a
/// conflict. `base` may be passed in to reuse precomputed base embeddings.
SteerOutcome run_steer(SteeringSession& session, const DocumentStore& docs, providers::LlmClient& llm,
                       providers::Embedder& embedder, const IncorporationConfig& incorporation,
                       const ProjectionConfig& projection, const steering::SteeringOptions& options = {},
                       const ProgressFn& progress = {}, const std::vector<EmbeddingVector>* base = nullptr);

} // namespace semsteer::pipeline

#include "semsteer/pipeline.hpp"

#include "semsteer/error.hpp"
#include "semsteer/incorporate.hpp"

namespace semsteer::pipeline {

const char* to_string(Stage stage) {
    switch (stage) {
    case Stage::externalizing: return "externalizing";
    case Stage::extending: return "extending";
    case Stage::incorporating: return "incorporating";
    case Stage::projecting: return "projecting";
    }
    return "unknown";
}

SteerOutcome run_steer(SteeringSession& session, const DocumentStore& docs, providers::LlmClient& llm,
                       providers::Embedder& embedder, const IncorporationConfig& incorporation,
                       const ProjectionConfig& projection, const steering::SteeringOptions& options,
                       const ProgressFn& progress, const std::vector<EmbeddingVector>* base) {
    validate(incorporation);
    validate(projection);
    if (const auto it = session.layouts.find(kBaselineLayout); it != session.layouts.end()) {
        if (!(it->second.config_used == projection)) {
            fail(ErrorKind::conflict, "projection config differs from the session's baseline layout",
                 {{"baseline_config", it->second.config_used}, {"requested_config", projection}});
        }
    }
    auto report = [&](Stage s) {
        if (progress) progress(s);
    };

    report(Stage::externalizing);
    if (!session.has_semantics()) steering::externalize(session, docs, llm, options);
    report(Stage::extending);
    if (!session.extension_complete) steering::extend(session, docs, llm, options);

    report(Stage::incorporating);
    std::vector<EmbeddingVector> computed;
    if (base == nullptr) {
        computed = incorporate::base_embeddings(docs, embedder);
        base = &computed;
    }
    SteerOutcome out;
    out.records = incorporate::steer_representations(docs, *base, session.augmentations, embedder, incorporation);
    session.set_incorporation(incorporation);

    report(Stage::projecting);
    if (const auto it = session.layouts.find(kBaselineLayout); it != session.layouts.end()) {
        out.baseline = it->second;
    } else {
        out.baseline = project::project(out.records, projection, project::Which::base, kBaselineLayout);
        out.baseline.source_revision = session.revision;
        session.publish_layout(out.baseline);
    }
    out.current = project::project(out.records, projection, project::Which::steered, kCurrentLayout);
    out.current.source_revision = session.revision;
    session.publish_layout(out.current);
    return out;
}

} // namespace semsteer::pipeline

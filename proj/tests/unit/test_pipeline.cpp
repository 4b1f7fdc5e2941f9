#include <doctest.h>

#include "semsteer/metrics.hpp"
#include "semsteer/pipeline.hpp"
#include "semsteer/providers/embedder.hpp"
#include "support.hpp"

using namespace semsteer;

namespace {

struct Setup {
    Corpus corpus = testsupport::review_corpus();
    SteeringSession session = create_session(corpus, "category");
    steering::HeuristicMockLlm llm;
    std::shared_ptr<providers::CachingEmbedder> embedder =
        providers::make_embedder(providers::ProviderConfig{}, "");

    Setup() { session.set_groups(corpus.store, parse_group_specs(testsupport::first_members_groups(corpus, 5))); }
};

} // namespace

TEST_SUITE("pipeline") {

TEST_CASE("alpha 0 blend reproduces the baseline layout bitwise") {
    Setup s;
    IncorporationConfig inc;
    inc.mode = IncorporationMode::blend;
    inc.alpha = 0.0;
    const auto out = pipeline::run_steer(s.session, s.corpus.store, s.llm, *s.embedder, inc, ProjectionConfig{});
    CHECK(out.current.points == out.baseline.points);
    CHECK(out.current.ids == out.baseline.ids);
    CHECK(s.session.layouts.contains("baseline"));
    CHECK(s.session.layouts.contains("current"));
}

TEST_CASE("stages run in order and later steers reuse semantics") {
    Setup s;
    std::vector<pipeline::Stage> seen;
    IncorporationConfig inc;
    inc.text_strategy = TextStrategy::augmentation_only;
    pipeline::run_steer(s.session, s.corpus.store, s.llm, *s.embedder, inc, ProjectionConfig{}, {},
                        [&](pipeline::Stage st) { seen.push_back(st); });
    CHECK(seen == std::vector<pipeline::Stage>{pipeline::Stage::externalizing, pipeline::Stage::extending,
                                               pipeline::Stage::incorporating, pipeline::Stage::projecting});
    const auto cards = s.session.cards;
    const auto baseline = s.session.layouts.at("baseline");
    const auto upstream = s.embedder->upstream_texts();

    inc.mode = IncorporationMode::blend;
    inc.alpha = 0.75;
    pipeline::run_steer(s.session, s.corpus.store, s.llm, *s.embedder, inc, ProjectionConfig{});
    CHECK(s.session.cards == cards);
    CHECK(s.session.layouts.at("baseline") == baseline);
    // Blend reuses the cached base and augmentation embeddings.
    CHECK(s.embedder->upstream_texts() == upstream);
}

TEST_CASE("changing the projection config after the baseline is a conflict") {
    Setup s;
    pipeline::run_steer(s.session, s.corpus.store, s.llm, *s.embedder, {}, ProjectionConfig{});
    ProjectionConfig other;
    other.metric = DistanceMetric::euclidean;
    CHECK_ERROR_KIND(pipeline::run_steer(s.session, s.corpus.store, s.llm, *s.embedder, {}, other), ErrorKind::conflict);
}

TEST_CASE("semantic steering on the review fixture improves alignment") {
    Setup s;
    IncorporationConfig inc;
    inc.text_strategy = TextStrategy::augmentation_only;
    const auto out = pipeline::run_steer(s.session, s.corpus.store, s.llm, *s.embedder, inc, ProjectionConfig{});
    const auto& labels = s.corpus.reference.labels();
    const auto before = metrics::evaluate(out.baseline, labels, 10);
    const auto after = metrics::evaluate(out.current, labels, 10);
    MESSAGE("review fixture Sil " << before.sil << " -> " << after.sil << ", NC " << before.nc << " -> " << after.nc);
    CHECK(after.nc > before.nc);
}

}  // TEST_SUITE

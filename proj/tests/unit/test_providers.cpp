#include <doctest.h>

#include <atomic>
#include <cmath>
#include <fstream>
#include <thread>

#include "semsteer/providers/embedder.hpp"
#include "semsteer/providers/llm.hpp"
#include "semsteer/steering/prompts.hpp"
#include "semsteer/util.hpp"
#include "support.hpp"

using namespace semsteer;
using namespace semsteer::providers;
using nlohmann::json;
using testsupport::FakeOpenAiTransport;
using testsupport::TempDir;

namespace {

double norm(const EmbeddingVector& v) {
    double s = 0.0;
    for (double x : v.values) s += x * x;
    return std::sqrt(s);
}

double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) s += a.values[i] * b.values[i];
    return s;
}

class CountingEmbedder final : public Embedder {
public:
    const std::string& model_name() const override { return name_; }
    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override {
        ++calls;
        return inner_.embed(texts);
    }
    std::atomic<int> calls{0};

private:
    std::string name_ = "counting";
    MockEmbedder inner_{32};
};

} // namespace

TEST_SUITE("providers") {

TEST_CASE("mock embedder contract") {
    MockEmbedder e(256);
    const std::vector<std::string> same{"abc", "abc"};
    const auto v = e.embed(same);
    CHECK(v[0] == v[1]);
    CHECK(e.embed_one("x x") == e.embed_one("x"));
    CHECK(norm(e.embed_one("")) == doctest::Approx(1.0));
    CHECK(e.embed_one("").values[0] == doctest::Approx(1.0 / 16.0));
    Rng rng(1);
    for (int i = 0; i < 50; ++i) {
        std::string text;
        for (int w = 0; w < 1 + static_cast<int>(rng.below(20)); ++w) text += "w" + std::to_string(rng.below(500)) + " ";
        CHECK(norm(e.embed_one(text)) == doctest::Approx(1.0).epsilon(1e-12));
    }
    // Find two tokens with different buckets: disjoint support => orthogonal.
    std::string a = "alpha", b;
    for (int i = 0; b.empty(); ++i) {
        const auto t = "tok" + std::to_string(i);
        if (e.bucket_of(t) != e.bucket_of(a)) b = t;
    }
    CHECK(dot(e.embed_one(a), e.embed_one(b)) == 0.0);
}

TEST_CASE("cache issues one upstream call per distinct text") {
    auto upstream = std::make_shared<CountingEmbedder>();
    CachingEmbedder cache(upstream);
    const std::vector<std::string> texts{"one", "two", "one"};
    const auto first = cache.embed(texts);
    const auto second = cache.embed(texts);
    CHECK(first == second);
    CHECK(first[0] == first[2]);
    CHECK(cache.upstream_texts() == 2);
    CHECK(upstream->calls == 1);
}

TEST_CASE("cache file persists and survives a torn tail") {
    TempDir dir;
    const auto path = dir.file("emb.cache");
    auto upstream = std::make_shared<CountingEmbedder>();
    std::vector<EmbeddingVector> first;
    {
        CachingEmbedder cache(upstream, path);
        first = cache.embed(std::vector<std::string>{"persist me", "and me"});
    }
    {
        std::ofstream f(path, std::ios::binary | std::ios::app);
        f.write("\x40\x00\x00\x00\x01\x02", 6);  // partial record
    }
    auto upstream2 = std::make_shared<CountingEmbedder>();
    CachingEmbedder again(upstream2, path);
    CHECK(again.size() == 2);
    CHECK(again.embed(std::vector<std::string>{"persist me", "and me"}) == first);
    CHECK(upstream2->calls == 0);
    again.embed(std::vector<std::string>{"new"});
    CachingEmbedder third(std::make_shared<CountingEmbedder>(), path);
    CHECK(third.size() == 3);
}

TEST_CASE("cache rejects a foreign file") {
    TempDir dir;
    write_file_atomic(dir.file("bad.cache"), "NOTACACHEFILE");
    CHECK_ERROR_KIND(CachingEmbedder(std::make_shared<CountingEmbedder>(), dir.file("bad.cache")), ErrorKind::data);
}

TEST_CASE("remote embedder batches and keeps order") {
    auto transport = std::make_shared<FakeOpenAiTransport>(48);
    auto cfg = testsupport::remote_settings().embedding;
    cfg.batch_size = 10;
    cfg.max_parallel = 3;
    RemoteEmbedder remote(cfg, transport);
    const auto corpus = testsupport::review_corpus();
    std::vector<std::string> texts;
    for (const auto& d : corpus.store.documents()) texts.push_back(d.text);
    const auto out = embed_texts(remote, texts);
    REQUIRE(out.size() == 112);
    MockEmbedder ref(48);
    for (std::size_t i = 0; i < out.size(); ++i) {
        CHECK(out[i].dim() == 48);
        CHECK(out[i] == ref.embed_one(texts[i]));
    }
    CHECK(transport->count("/embeddings") == 12);
    CHECK(remote.gate().max_observed() <= 3);
}

TEST_CASE("retry policy") {
    RetryPolicy policy{3, 500};
    std::vector<long> sleeps;
    auto sleeper = [&](std::chrono::milliseconds d) { sleeps.push_back(static_cast<long>(d.count())); };

    int n = 0;
    auto res = post_with_retry(policy, sleeper, [&] { return ++n < 3 ? HttpResponse{503, "", ""} : HttpResponse{200, "ok", ""}; }, "x");
    CHECK(res.body == "ok");
    CHECK(sleeps == std::vector<long>{500, 1000});

    sleeps.clear();
    n = 0;
    CHECK_ERROR_KIND(post_with_retry(policy, sleeper, [&] { ++n; return HttpResponse{400, "", ""}; }, "x"), ErrorKind::provider);
    CHECK(n == 1);
    CHECK(sleeps.empty());

    n = 0;
    try {
        post_with_retry(policy, sleeper, [&] { ++n; return HttpResponse{0, "", "connection refused"}; }, "x");
        FAIL("expected failure");
    } catch (const Error& e) {
        CHECK(e.detail().at("attempts") == 3);
        CHECK(e.detail().at("status") == 0);
    }
    CHECK(is_retryable_status(429));
    CHECK(is_retryable_status(502));
    CHECK_FALSE(is_retryable_status(404));
}

TEST_CASE("concurrency gate bounds in-flight work") {
    ConcurrencyGate gate(3);
    std::atomic<int> inside{0};
    std::atomic<int> peak{0};
    {
        std::vector<std::jthread> threads;
        for (int i = 0; i < 12; ++i) {
            threads.emplace_back([&] {
                ConcurrencyGate::Slot slot(gate);
                const int now = ++inside;
                int p = peak.load();
                while (now > p && !peak.compare_exchange_weak(p, now)) {}
                std::this_thread::sleep_for(std::chrono::milliseconds(5));
                --inside;
            });
        }
    }
    CHECK(peak.load() <= 3);
    CHECK(gate.max_observed() <= 3);
    CHECK(gate.max_observed() >= 1);
}

TEST_CASE("structured completion validates and repairs once") {
    const auto& reg = steering::schema_registry();
    LlmRequest req;
    req.schema_name = steering::kClusterCard;
    req.user_prompt = "cards please";

    ScriptedLlm ok;
    const std::string verbatim = R"({"name":"Kitchen gear","description":"d","inclusion_criteria":["a"],"exclusion_criteria":["b"]})";
    ok.on("*", "", verbatim);
    const auto r = complete_structured(ok, reg, req);
    CHECK(r.raw_text == verbatim);
    CHECK(r.payload == json::parse(verbatim));
    CHECK(r.attempts == 1);

    ScriptedLlm repaired;
    repaired.on([](const LlmRequest& q) { return q.context.is_object() && q.context.value("repair", false); },
                [&](const LlmRequest&) { return verbatim; });
    repaired.on("*", "", R"({"name":"x","description":"d","inclusion_criteria":["a"]})");
    const auto r2 = complete_structured(repaired, reg, req);
    CHECK(r2.attempts == 2);
    CHECK(repaired.call_count() == 2);
    CHECK(repaired.requests()[1].user_prompt.find("exclusion_criteria") != std::string::npos);

    ScriptedLlm broken;
    broken.on("*", "", R"({"name":"x"})");
    CHECK_ERROR_KIND(complete_structured(broken, reg, req), ErrorKind::provider);
    CHECK(broken.call_count() == 2);
}

TEST_CASE("match outcomes are limited to offered groups") {
    const auto& reg = steering::schema_registry();
    LlmRequest req;
    req.schema_name = steering::kExtensionMatch;
    req.allowed_values["outcome"] = {"g1", "g2", "none", "ambiguous"};
    ScriptedLlm llm;
    llm.on("*", "", R"({"outcome":"g7","confidence":"high","rationale":"r"})");
    CHECK_ERROR_KIND(complete_structured(llm, reg, req), ErrorKind::provider);
    ScriptedLlm good;
    good.on("*", "", "```json\n{\"outcome\":\"g2\",\"confidence\":\"medium\",\"rationale\":\"r\"}\n```");
    CHECK(complete_structured(good, reg, req).payload.at("outcome") == "g2");
}

TEST_CASE("remote llm sends a json schema and needs its key") {
    auto transport = std::make_shared<FakeOpenAiTransport>();
    auto cfg = testsupport::remote_settings().llm;
    RemoteLlm llm(cfg, transport);
    LlmRequest req;
    req.schema_name = steering::kClusterCard;
    req.system_prompt = "sys";
    req.user_prompt = "user";
    req.context = {{"secret", "context-only"}};
    const auto r = complete_structured(llm, steering::schema_registry(), req);
    CHECK(r.valid);
    const auto calls = transport->calls();
    REQUIRE(calls.size() == 1);
    CHECK(calls[0].url == "http://fake.invalid/v1/chat/completions");
    CHECK(calls[0].body.find("context-only") == std::string::npos);
    const auto body = json::parse(calls[0].body);
    CHECK(body.at("response_format").at("json_schema").at("name") == steering::kClusterCard);

    cfg.api_key_env = "SEMSTEER_TEST_KEY_THAT_IS_NOT_SET";
    RemoteLlm keyed(cfg, transport);
    CHECK_ERROR_KIND(keyed.complete(req, steering::schema_registry().at(steering::kClusterCard)), ErrorKind::provider);
}

TEST_CASE("provider settings parsing") {
    const auto s = provider_settings_from_json(json::parse(R"({"embedding":{"kind":"remote","model_name":"m"},"llm":{"kind":"mock"}})"));
    CHECK(s.embedding.kind == ProviderKind::remote);
    CHECK(s.embedding.model_name == "m");
    CHECK(s.llm.kind == ProviderKind::mock);
    CHECK_ERROR_KIND(provider_settings_from_json(json::parse(R"({"llm":{"kind":"psychic"}})")), ErrorKind::usage);
    CHECK_ERROR_KIND(provider_settings_from_json(json::parse(R"({"llm":{"max_parallel":0}})")), ErrorKind::usage);
}

}  // TEST_SUITE

#include <doctest.h>

#include <filesystem>
#include <set>

#include "semsteer/sim/sweep.hpp"
#include "semsteer/sim/synthetic.hpp"
#include "semsteer/util.hpp"
#include "support.hpp"

using namespace semsteer;
using namespace semsteer::sim;
using nlohmann::json;
using testsupport::TempDir;

TEST_SUITE("sim") {

TEST_CASE("synthetic corpus shape") {
    const auto c = make_synthetic_corpus({});
    CHECK(c.size() == 112);
    const auto groups = c.reference_groups();
    CHECK(groups.size() == 4);
    for (const auto& [label, members] : groups) {
        CHECK(members.size() == 28);
        for (const auto& d : c.store.documents()) CHECK(d.text.find(label) == std::string::npos);
    }
    CHECK(to_jsonl(make_synthetic_corpus({})) == to_jsonl(c));
}

TEST_CASE("interaction samples") {
    const auto c = make_synthetic_corpus({});
    const auto five = sample_interaction(c, 5, 1);
    CHECK(five.size() == 4);
    std::set<DocId> all;
    for (const auto& g : five) {
        CHECK(g.member_ids.size() == 5);
        all.insert(g.member_ids.begin(), g.member_ids.end());
        const auto label = c.reference.label_of(g.member_ids[0]);
        for (const auto& id : g.member_ids) CHECK(c.reference.label_of(id) == label);
    }
    CHECK(all.size() == 20);
    CHECK(five[0].group_id == "g1");
    for (const auto& g : sample_interaction(c, 1, 3)) CHECK(g.member_ids.size() == 1);
    CHECK(sample_interaction(c, 5, 9) == sample_interaction(c, 5, 9));
    CHECK(sample_interaction(c, 5, 9) != sample_interaction(c, 5, 10));
    CHECK_ERROR_KIND(sample_interaction(c, 29, 1), ErrorKind::usage);
}

TEST_CASE("oracle match probability") {
    OracleParams p;
    CHECK(match_probability(p, 1) < match_probability(p, 2));
    CHECK(match_probability(p, 5) > 0.9);
    p.abstention = AbstentionMode::fixed_rate;
    p.abstention_rate = 0.0;
    CHECK(match_probability(p, 1) == 1.0);
    CHECK(marker_tokens("refgroup_a", 5) == marker_tokens("refgroup_a", 5));
    for (const auto& t : marker_tokens("refgroup_a", 5)) CHECK(t.find("refgroup") == std::string::npos);
}

TEST_CASE("config validation") {
    SimConfig c;
    c.strategies.clear();
    CHECK_ERROR_KIND(run_strategy_sweep(c), ErrorKind::usage);
    SimConfig a;
    a.alphas = {0.5, 1.5};
    CHECK_ERROR_KIND(validate(a), ErrorKind::usage);
    CHECK_ERROR_KIND(sim_config_from_json(json::parse(R"({"alphas":[-0.1]})")), ErrorKind::usage);
    CHECK_ERROR_KIND(sim_config_from_json(json::parse(R"({"provider_mode":"psychic"})")), ErrorKind::usage);
    CHECK_ERROR_KIND(run_interaction_sweep(SimConfig{}, {29}), ErrorKind::usage);
}

TEST_CASE("config json round trip and hash") {
    auto c = testsupport::small_sim_config();
    c.output_dir = "somewhere";
    const auto back = sim_config_from_json(sim_config_to_json(c));
    CHECK(sim_config_to_json(back) == sim_config_to_json(c));
    CHECK(config_hash(back) == config_hash(c));
    auto moved = c;
    moved.output_dir = "elsewhere";
    CHECK(config_hash(moved) == config_hash(c));
    moved.seeds = {1, 3};
    CHECK(config_hash(moved) != config_hash(c));
    CHECK(config_hash(c).size() == 16);
}

TEST_CASE("strategy sweep: rows, baseline and csv round trip") {
    const auto c = testsupport::small_sim_config();
    const auto r = run_strategy_sweep(c);
    CHECK(r.rows.size() == 3);
    CHECK(r.find("append") != nullptr);
    CHECK(r.find("augmentation_only") != nullptr);
    CHECK(r.find("random_text:append") != nullptr);
    CHECK(r.baseline.find("sil") != nullptr);
    for (const auto& row : r.rows) {
        CHECK(row.ok);
        const auto* d = row.find("delta_sil");
        const auto* sil = row.find("sil");
        REQUIRE(d);
        REQUIRE(sil);
        for (std::size_t s = 0; s < r.seeds.size(); ++s) {
            CHECK(*d->values[s] == doctest::Approx(*sil->values[s] - *r.baseline.find("sil")->values[s]).epsilon(1e-12));
        }
    }
    CHECK(r.find("append")->find("delta_sil")->stats().mean > 0.0);
    CHECK(r.find("random_text:append")->find("delta_sil")->stats().mean <= 0.0);

    const auto csv = sweep_csv(r);
    CHECK(csv.rfind("# provenance,sweep=strategies,config_hash=" + r.config_hash, 0) == 0);
    CHECK(csv.find("condition,metric,status,mean,std,seed:1,seed:2\n") != std::string::npos);
    const auto parsed = parse_sweep_csv(csv, SweepKind::strategies);
    CHECK(sweep_csv(parsed) == csv);
    const auto table = render_table(r);
    CHECK(table.find("augmentation_only") != std::string::npos);
    CHECK(table.find("±") != std::string::npos);
}

TEST_CASE("single seed leaves std empty") {
    auto c = testsupport::small_sim_config();
    c.seeds = {4};
    c.strategies = {c.strategies[0]};
    const auto r = run_strategy_sweep(c);
    CHECK_FALSE(r.rows[0].find("delta_sil")->stats().std.has_value());
    const auto csv = sweep_csv(r);
    CHECK(csv.find("append,delta_sil,ok,") != std::string::npos);
}

TEST_CASE("alpha sweep: zero row is exactly zero and gains grow with alpha") {
    const auto c = testsupport::small_sim_config();
    const auto r = run_alpha_sweep(c);
    REQUIRE(r.rows.size() == 3);
    const auto* zero = r.find("alpha=0");
    REQUIRE(zero);
    for (const auto& v : zero->find("delta_sil")->values) CHECK(*v == 0.0);
    for (const auto& v : zero->find("delta_nc")->values) CHECK(*v == 0.0);
    CHECK(render_table(r).find("0.00±0.00") != std::string::npos);
    CHECK(r.find("alpha=0.5")->find("delta_sil")->stats().mean <= r.find("alpha=1")->find("delta_sil")->stats().mean);
}

TEST_CASE("interaction sweep reports extension quality") {
    const auto c = testsupport::small_sim_config();
    const auto r = run_interaction_sweep(c, c.m_values);
    REQUIRE(r.rows.size() == 2);
    const auto* m1 = r.find("m=1");
    const auto* m3 = r.find("m=3");
    REQUIRE(m1);
    REQUIRE(m3);
    CHECK(m1->find("coverage")->stats().mean < m3->find("coverage")->stats().mean);
    const auto curve = interaction_curve_csv(r);
    CHECK(curve.rfind("m,delta_sil,delta_nc,coverage,accuracy_all,accuracy_augmented\n", 0) == 0);
}

TEST_CASE("outputs and report") {
    TempDir dir;
    auto c = testsupport::small_sim_config();
    c.strategies = {c.strategies[0]};
    const auto r = run_strategy_sweep(c);
    write_sweep_outputs(r, dir.path().string());
    CHECK(std::filesystem::exists(dir.path() / "strategies.csv"));
    CHECK(std::filesystem::exists(dir.path() / "strategies.txt"));
    const auto report = render_report(dir.path().string());
    CHECK(report.find("append") != std::string::npos);
    TempDir empty;
    CHECK_ERROR_KIND(render_report(empty.path().string()), ErrorKind::data);
}

TEST_CASE("config file with relative corpus path") {
    TempDir dir;
    const auto corpus = testsupport::review_corpus();
    write_file_atomic(dir.file("reviews.jsonl"), to_jsonl(corpus));
    write_file_atomic(dir.file("cfg.json"), R"({"corpus":{"path":"reviews.jsonl","format":"jsonl"},"seeds":[1],"strategies":[{"mode":"text","text_strategy":"augmentation_only"}]})");
    const auto c = load_sim_config(dir.file("cfg.json"));
    CHECK(std::filesystem::path(c.corpus_path).is_absolute());
    const auto r = run_strategy_sweep(c);
    CHECK(r.rows.size() == 1);
    CHECK(r.rows[0].ok);
}

TEST_CASE("augmentations without group markers give no gain") {
    auto c = testsupport::small_sim_config();
    c.oracle.marker_strength = 0;
    const auto r = run_strategy_sweep(c);
    for (const auto& row : r.rows) {
        REQUIRE(row.ok);
        CHECK_MESSAGE(row.find("delta_sil")->stats().mean <= 0.05, row.condition);
    }
}

TEST_CASE("remote mode failures are recorded and resumed from the checkpoint") {
    TempDir dir;
    auto c = testsupport::small_sim_config();
    c.seeds = {1};
    c.provider_mode = ProviderMode::remote;
    c.providers = testsupport::remote_settings();
    c.strategies.clear();
    for (auto s : {TextStrategy::append, TextStrategy::tagged_append}) {
        IncorporationConfig inc;
        inc.text_strategy = s;
        c.strategies.push_back(inc);
    }
    c.output_dir = dir.path().string();

    auto broken = std::make_shared<testsupport::FakeOpenAiTransport>();
    broken->fail_when("<ORG>", 400);
    const auto first = run_strategy_sweep(c, {broken, {}});
    CHECK(first.find("append")->ok);
    CHECK_FALSE(first.find("tagged_append")->ok);
    CHECK(sweep_csv(first).find("tagged_append,error,") != std::string::npos);
    const auto checkpoint = dir.path() / "strategies.checkpoint.json";
    REQUIRE(std::filesystem::exists(checkpoint));

    auto healthy = std::make_shared<testsupport::FakeOpenAiTransport>();
    std::vector<std::string> log;
    const auto second = run_strategy_sweep(c, {healthy, [&](const std::string& m) { log.push_back(m); }});
    CHECK(second.find("tagged_append")->ok);
    CHECK(std::find(log.begin(), log.end(), "resumed append from checkpoint") != log.end());
    CHECK(second.find("append")->find("delta_sil")->values == first.find("append")->find("delta_sil")->values);
    CHECK_FALSE(std::filesystem::exists(checkpoint));
}

}  // TEST_SUITE

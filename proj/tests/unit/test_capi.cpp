#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <nlohmann/json.hpp>

#include "semsteer/semsteer.h"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string data(const std::string& name) { return std::string(SEMSTEER_TEST_DATA_DIR) + "/" + name; }

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

// Takes ownership of a string returned by the library.
std::string take(char* s) {
    REQUIRE(s != nullptr);
    std::string out(s);
    ss_string_free(s);
    return out;
}

struct Scratch {
    fs::path dir;
    Scratch() {
        std::random_device rd;
        dir = fs::temp_directory_path() / ("semsteer-capi-" + std::to_string(rd()));
        fs::create_directories(dir);
    }
    ~Scratch() { fs::remove_all(dir); }
};

struct Fixture {
    ss_corpus* corpus = nullptr;
    ss_session* session = nullptr;
    Fixture() {
        REQUIRE(ss_corpus_load(data("reviews.csv").c_str(), "csv", &corpus) == SS_OK);
        REQUIRE(ss_session_create(corpus, "category", &session) == SS_OK);
    }
    ~Fixture() {
        ss_session_free(session);
        ss_corpus_free(corpus);
    }
};

} // namespace

TEST_SUITE("capi") {

TEST_CASE("status names and version") {
    CHECK(std::string(ss_version()).size() > 0);
    CHECK(std::string(ss_status_name(SS_OK)) == "ok");
    CHECK(std::string(ss_status_name(SS_ERR_PROVIDER)) == "provider");
    CHECK(std::string(ss_status_name(SS_ERR_NOT_FOUND)) == "not_found");
}

TEST_CASE("errors set status, message and detail") {
    ss_corpus* c = nullptr;
    CHECK(ss_corpus_load("/nonexistent/file.jsonl", "jsonl", &c) == SS_ERR_IO);
    CHECK(c == nullptr);
    CHECK(std::string(ss_last_error()).find("nonexistent") != std::string::npos);
    CHECK(ss_corpus_load(data("reviews.csv").c_str(), "xml", &c) == SS_ERR_USAGE);
    CHECK(ss_corpus_load(nullptr, "csv", &c) == SS_ERR_USAGE);

    Scratch s;
    const auto bad = (s.dir / "bad.jsonl").string();
    std::ofstream(bad) << "{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"a\",\"text\":\"y\"}\n";
    CHECK(ss_corpus_load(bad.c_str(), "jsonl", &c) == SS_ERR_DATA);
    const auto detail = json::parse(ss_last_error_detail());
    CHECK(detail.at("line") == 2);
    CHECK(detail.at("id") == "a");

    REQUIRE(ss_corpus_load(data("reviews.csv").c_str(), "csv", &c) == SS_OK);
    CHECK(std::string(ss_last_error()).empty());
    CHECK(std::string(ss_last_error_detail()) == "null");
    ss_corpus_free(c);
}

TEST_CASE("corpus summary") {
    Fixture f;
    char* out = nullptr;
    REQUIRE(ss_corpus_summary(f.corpus, &out) == SS_OK);
    const auto j = json::parse(take(out));
    CHECK(j.at("documents") == 112);
    CHECK(j.at("groups") == json{{"audio", 17}, {"fitness", 31}, {"garden", 30}, {"kitchen", 34}});
}

TEST_CASE("groups, steering and persistence") {
    Fixture f;
    CHECK(ss_session_set_groups(f.session, f.corpus, "{\"groups\":[{\"group_id\":\"g1\",\"member_ids\":[\"zzz\"]}]}") == SS_ERR_DATA);
    CHECK(ss_session_set_groups(f.session, f.corpus, "{not json") == SS_ERR_DATA);
    const auto groups = slurp(data("reviews_groups.json"));
    REQUIRE(ss_session_set_groups(f.session, f.corpus, groups.c_str()) == SS_OK);

    char* out = nullptr;
    CHECK(ss_steer_run(f.session, f.corpus, "{\"incorporation\":{\"alpha\":3}}", &out) == SS_ERR_USAGE);
    REQUIRE(ss_steer_run(f.session, f.corpus,
                         R"({"incorporation":{"mode":"blend","alpha":0},"projection":{"backend":"linear_pca"}})", &out) == SS_OK);
    const auto report = json::parse(take(out));
    CHECK(report.at("k") == 10);
    CHECK(report.at("delta").at("sil") == 0.0);
    CHECK(report.at("delta").at("nc") == 0.0);
    CHECK(report.at("before") == report.at("after"));
    CHECK(report.at("extension").at("n_non_interacted") == 100);

    // Same baseline config with a different projection is refused.
    CHECK(ss_steer_run(f.session, f.corpus, R"({"projection":{"backend":"linear_pca","seed":9}})", &out) == SS_ERR_CONFLICT);

    Scratch s;
    const auto path = (s.dir / "session.json").string();
    REQUIRE(ss_session_save(f.session, path.c_str()) == SS_OK);
    ss_session* loaded = nullptr;
    REQUIRE(ss_session_load(path.c_str(), &loaded) == SS_OK);
    char* a = nullptr;
    char* b = nullptr;
    REQUIRE(ss_session_to_json(f.session, &a) == SS_OK);
    REQUIRE(ss_session_to_json(loaded, &b) == SS_OK);
    CHECK(take(a) == take(b));
    ss_session_free(loaded);

    CHECK(ss_session_load((s.dir / "missing.json").string().c_str(), &loaded) == SS_ERR_IO);
}

TEST_CASE("oracle steering improves separation on the review corpus") {
    Fixture f;
    REQUIRE(ss_session_set_groups(f.session, f.corpus, slurp(data("reviews_groups.json")).c_str()) == SS_OK);
    char* out = nullptr;
    REQUIRE(ss_steer_run(f.session, f.corpus,
                         R"({"llm":"oracle","incorporation":{"text_strategy":"augmentation_only"},"projection":{"backend":"linear_pca"}})",
                         &out) == SS_OK);
    const auto report = json::parse(take(out));
    CHECK(report.at("delta").at("nc").get<double>() > 0.0);
    CHECK(report.at("extension").at("coverage").get<double>() > 0.0);
}

TEST_CASE("sweep and report") {
    Scratch s;
    const auto cfg = (s.dir / "alpha.json").string();
    std::ofstream(cfg) << R"({"corpus":{"synthetic":{"docs_per_group":12}},"seeds":[1],"examples_per_group":3})";
    char* out = nullptr;
    CHECK(ss_sweep_run("bogus", cfg.c_str(), s.dir.string().c_str(), &out) == SS_ERR_USAGE);
    REQUIRE(ss_sweep_run("alpha", cfg.c_str(), s.dir.string().c_str(), &out) == SS_OK);
    const auto table = take(out);
    CHECK(table.find("0.75") != std::string::npos);
    CHECK(fs::exists(s.dir / "alpha.csv"));
    REQUIRE(ss_report_render(s.dir.string().c_str(), &out) == SS_OK);
    CHECK(take(out) == table);
}

}  // TEST_SUITE

// semsteer command line: ingest, steer, sweep, report, serve.
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "semsteer/semsteer.h"

using nlohmann::json;

namespace {

// Exit codes: 0 ok, 1 usage, 2 data, 3 provider, 4 internal.
int exit_code(ss_status s) {
    switch (s) {
    case SS_OK: return 0;
    case SS_ERR_USAGE:
    case SS_ERR_CONFLICT: return 1;
    case SS_ERR_DATA:
    case SS_ERR_IO:
    case SS_ERR_NOT_FOUND: return 2;
    case SS_ERR_PROVIDER: return 3;
    case SS_ERR_INTERNAL: break;
    }
    return 4;
}

struct Failure {
    ss_status status;
};

void print_error(const char* kind, const std::string& message, const json& detail) {
    std::cerr << json{{"error", {{"kind", kind}, {"message", message}, {"detail", detail}}}}.dump() << '\n';
}

void check(ss_status s) {
    if (s == SS_OK) return;
    json detail;
    try {
        detail = json::parse(ss_last_error_detail());
    } catch (const json::exception&) {
        detail = nullptr;
    }
    print_error(ss_status_name(s), ss_last_error(), detail);
    throw Failure{s};
}

struct Owned {
    char* p = nullptr;
    ~Owned() { ss_string_free(p); }
    std::string str() const { return p ? p : ""; }
};

using CorpusPtr = std::unique_ptr<ss_corpus, decltype(&ss_corpus_free)>;
using SessionPtr = std::unique_ptr<ss_session, decltype(&ss_session_free)>;

CorpusPtr load_corpus(const std::string& path, const std::string& format) {
    ss_corpus* c = nullptr;
    check(ss_corpus_load(path.c_str(), format.c_str(), &c));
    return {c, ss_corpus_free};
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        print_error("io", "cannot read '" + path + "'", {{"path", path}});
        throw Failure{SS_ERR_IO};
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Three decimals with negative zero folded into zero.
std::string f3(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    std::string s = buf;
    if (s == "-0.000") s = "0.000";
    return s;
}

struct IngestArgs {
    std::string path;
    std::string format = "jsonl";
};

int run_ingest(const IngestArgs& a) {
    const auto corpus = load_corpus(a.path, a.format);
    Owned summary;
    check(ss_corpus_summary(corpus.get(), &summary.p));
    const auto j = json::parse(summary.str());
    std::cout << "corpus " << j.at("corpus_id").get<std::string>() << '\n';
    std::cout << "documents " << j.at("documents").get<std::size_t>() << '\n';
    if (j.at("groups").empty()) {
        std::cout << "groups (none)\n";
    } else {
        std::cout << "groups " << j.at("groups").size() << '\n';
        for (const auto& [label, n] : j.at("groups").items()) std::cout << "  " << label << ' ' << n.get<std::size_t>() << '\n';
    }
    return 0;
}

struct SteerArgs {
    std::string corpus;
    std::string format = "jsonl";
    std::string groups;
    std::string session_in;
    std::string perspective;
    std::string out;
    std::string report;
    std::string providers;
    // incorporation
    std::string mode = "text";
    std::string strategy = "append";
    double alpha = 0.5;
    std::string control = "none";
    std::uint64_t control_seed = 0;
    bool normalize = false;
    // projection
    std::string backend = "linear_pca";
    std::string metric = "cosine";
    int n_neighbors = 15;
    double min_dist = 0.1;
    std::uint64_t seed = 0;
    int epochs = 200;
    std::string external_command;
    // steering / evaluation
    std::string llm = "provider";
    std::uint64_t oracle_seed = 1;
    std::string oracle_config;
    int k = 10;
    int max_parallel = 4;
    int few_shot_k = 3;
};

int run_steer(const SteerArgs& a) {
    const auto corpus = load_corpus(a.corpus, a.format);
    ss_session* raw = nullptr;
    if (a.session_in.empty()) {
        check(ss_session_create(corpus.get(), a.perspective.c_str(), &raw));
    } else {
        check(ss_session_load(a.session_in.c_str(), &raw));
    }
    SessionPtr session(raw, ss_session_free);
    if (!a.groups.empty()) check(ss_session_set_groups(session.get(), corpus.get(), read_text(a.groups).c_str()));

    json opts = {{"incorporation",
                  {{"mode", a.mode}, {"text_strategy", a.strategy}, {"alpha", a.alpha}, {"control", a.control},
                   {"rng_seed", a.control_seed}, {"normalize", a.normalize}}},
                 {"projection",
                  {{"backend", a.backend}, {"metric", a.metric}, {"n_neighbors", a.n_neighbors}, {"min_dist", a.min_dist},
                   {"seed", a.seed}, {"n_epochs", a.epochs}, {"external_command", a.external_command}}},
                 {"llm", a.llm},
                 {"oracle_seed", a.oracle_seed},
                 {"k", a.k},
                 {"max_parallel", a.max_parallel},
                 {"few_shot_k", a.few_shot_k}};
    if (!a.providers.empty()) opts["providers_path"] = a.providers;
    if (!a.oracle_config.empty()) {
        try {
            opts["oracle"] = json::parse(read_text(a.oracle_config));
        } catch (const json::parse_error& e) {
            print_error("usage", std::string("oracle config is not valid JSON: ") + e.what(), {{"path", a.oracle_config}});
            throw Failure{SS_ERR_USAGE};
        }
    }

    Owned report;
    check(ss_steer_run(session.get(), corpus.get(), opts.dump().c_str(), &report.p));
    if (!a.out.empty()) check(ss_session_save(session.get(), a.out.c_str()));
    const auto r = json::parse(report.str());
    if (!a.report.empty()) {
        std::ofstream f(a.report, std::ios::binary);
        f << r.dump(2) << '\n';
        if (!f) {
            print_error("io", "cannot write '" + a.report + "'", {{"path", a.report}});
            throw Failure{SS_ERR_IO};
        }
    }

    std::cout << "session " << r.at("session_id").get<std::string>() << " revision " << r.at("revision").get<long long>() << '\n';
    if (const auto& ext = r.at("extension"); !ext.is_null()) {
        std::cout << "extension coverage " << f3(ext.at("coverage").get<double>()) << " accuracy_all "
                  << f3(ext.at("accuracy_all").get<double>()) << " accuracy_augmented "
                  << (ext.at("accuracy_augmented").is_null() ? std::string("n/a") : f3(ext.at("accuracy_augmented").get<double>()))
                  << '\n';
    }
    if (r.at("before").is_null()) {
        std::cout << "metrics n/a (corpus has no reference labels)\n";
        return 0;
    }
    const auto& b = r.at("before");
    const auto& af = r.at("after");
    const auto& d = r.at("delta");
    std::cout << "before Sil " << f3(b.at("sil").get<double>()) << " NC " << f3(b.at("nc").get<double>()) << '\n';
    std::cout << "after  Sil " << f3(af.at("sil").get<double>()) << " NC " << f3(af.at("nc").get<double>()) << '\n';
    std::cout << "ΔSil " << f3(d.at("sil").get<double>()) << " ΔNC " << f3(d.at("nc").get<double>()) << '\n';
    return 0;
}

struct SweepArgs {
    std::string kind;
    std::string config;
    std::string out;
};

int run_sweep(const SweepArgs& a) {
    Owned table;
    check(ss_sweep_run(a.kind.c_str(), a.config.c_str(), a.out.c_str(), &table.p));
    std::cout << table.str();
    return 0;
}

int run_report(const std::string& dir) {
    Owned text;
    check(ss_report_render(dir.c_str(), &text.p));
    std::cout << text.str();
    return 0;
}

struct ServeArgs {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string data_dir = "semsteer-data";
    std::string static_dir;
    std::string providers;
    int workers = 2;
};

int run_serve(const ServeArgs& a) {
    json opts = {{"host", a.host}, {"port", a.port}, {"data_dir", a.data_dir}, {"static_dir", a.static_dir}, {"workers", a.workers}};
    if (!a.providers.empty()) opts["providers_path"] = a.providers;
    auto ready = [](int port, void* user) {
        std::cout << "listening on http://" << *static_cast<const std::string*>(user) << ':' << port << std::endl;
    };
    check(ss_service_run(opts.dump().c_str(), ready, const_cast<std::string*>(&a.host)));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semantic steering of document projections"};
    app.set_version_flag("--version", std::string(ss_version()));
    app.require_subcommand(1);

    IngestArgs ingest;
    auto* c_ingest = app.add_subcommand("ingest", "Validate a corpus and print its size and reference-group histogram");
    c_ingest->add_option("path", ingest.path, "Corpus file")->required();
    c_ingest->add_option("--format", ingest.format, "Corpus format")->check(CLI::IsMember({"jsonl", "csv"}))->capture_default_str();

    SteerArgs steer;
    auto* c_steer = app.add_subcommand("steer", "Run externalize, extend, incorporate and project once; print Sil/NC before and after");
    c_steer->add_option("corpus", steer.corpus, "Corpus file")->required();
    c_steer->add_option("--format", steer.format, "Corpus format")->check(CLI::IsMember({"jsonl", "csv"}))->capture_default_str();
    c_steer->add_option("--groups", steer.groups, "Groups file {\"groups\":[{\"group_id\",\"member_ids\"}]} (required for a new session)");
    c_steer->add_option("--session", steer.session_in, "Continue from a saved session file");
    c_steer->add_option("--perspective", steer.perspective, "Perspective name for a new session");
    c_steer->add_option("--out", steer.out, "Write the resulting session here");
    c_steer->add_option("--report", steer.report, "Write the JSON metrics report here");
    c_steer->add_option("--providers", steer.providers, "Provider settings JSON (default: mock embedder and mock LLM)");
    c_steer->add_option("--mode", steer.mode, "incorporation.mode")->check(CLI::IsMember({"text", "blend"}))->capture_default_str();
    c_steer->add_option("--strategy", steer.strategy, "incorporation.text_strategy")
        ->check(CLI::IsMember({"append", "prepend", "tagged_append", "tagged_prepend", "augmentation_only"}))
        ->capture_default_str();
    c_steer->add_option("--alpha", steer.alpha, "incorporation.alpha (blend)")->check(CLI::Range(0.0, 1.0))->capture_default_str();
    c_steer->add_option("--control", steer.control, "incorporation.control")->check(CLI::IsMember({"none", "random_text"}))->capture_default_str();
    c_steer->add_option("--control-seed", steer.control_seed, "incorporation.rng_seed")->capture_default_str();
    c_steer->add_flag("--normalize", steer.normalize, "incorporation.normalize (renormalize blended vectors)");
    c_steer->add_option("--backend", steer.backend, "projection.backend")
        ->check(CLI::IsMember({"linear_pca", "neighbor_embedding", "external_adapter"}))
        ->capture_default_str();
    c_steer->add_option("--metric", steer.metric, "projection.metric")->check(CLI::IsMember({"cosine", "euclidean"}))->capture_default_str();
    c_steer->add_option("--n-neighbors", steer.n_neighbors, "projection.n_neighbors")->capture_default_str();
    c_steer->add_option("--min-dist", steer.min_dist, "projection.min_dist")->capture_default_str();
    c_steer->add_option("--seed", steer.seed, "projection.seed")->capture_default_str();
    c_steer->add_option("--epochs", steer.epochs, "projection.n_epochs")->capture_default_str();
    c_steer->add_option("--external-command", steer.external_command, "projection.external_command");
    c_steer->add_option("--llm", steer.llm, "LLM: configured provider, or the label-aware synthetic oracle")
        ->check(CLI::IsMember({"provider", "oracle"}))
        ->capture_default_str();
    c_steer->add_option("--oracle-seed", steer.oracle_seed, "Seed of the synthetic oracle")->capture_default_str();
    c_steer->add_option("--oracle-config", steer.oracle_config, "Synthetic oracle parameters (JSON)");
    c_steer->add_option("--k", steer.k, "Neighborhood size for NC")->capture_default_str();
    c_steer->add_option("--max-parallel", steer.max_parallel, "Concurrent LLM requests")->capture_default_str();
    c_steer->add_option("--few-shot-k", steer.few_shot_k, "Exemplars per extension augmentation")->capture_default_str();

    SweepArgs sweep;
    auto* c_sweep = app.add_subcommand("sweep", "Run an evaluation sweep and write CSVs and tables");
    c_sweep->add_option("kind", sweep.kind, "Sweep kind")->required()->check(CLI::IsMember({"strategies", "interaction", "alpha"}));
    c_sweep->add_option("--config", sweep.config, "Sweep config JSON")->required();
    c_sweep->add_option("--out", sweep.out, "Output directory")->required();

    std::string report_dir;
    auto* c_report = app.add_subcommand("report", "Render tables for the sweep CSVs in a directory");
    c_report->add_option("dir", report_dir, "Sweep output directory")->required();

    ServeArgs serve;
    auto* c_serve = app.add_subcommand("serve", "Serve the HTTP API");
    c_serve->add_option("--host", serve.host, "Bind address")->envname("SEMSTEER_HOST")->capture_default_str();
    c_serve->add_option("--port", serve.port, "Port (0 picks a free port)")->envname("SEMSTEER_PORT")->capture_default_str();
    c_serve->add_option("--data-dir", serve.data_dir, "Corpus and session storage")->envname("SEMSTEER_DATA_DIR")->capture_default_str();
    c_serve->add_option("--static-dir", serve.static_dir, "UI bundle served at /")->envname("SEMSTEER_STATIC_DIR");
    c_serve->add_option("--providers", serve.providers, "Provider settings JSON")->envname("SEMSTEER_PROVIDERS");
    c_serve->add_option("--workers", serve.workers, "Steering worker threads")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("usage", e.what(), nullptr);
        return 1;
    }

    try {
        if (c_ingest->parsed()) return run_ingest(ingest);
        if (c_steer->parsed()) {
            if (steer.groups.empty() && steer.session_in.empty()) {
                print_error("usage", "steer needs --groups or --session", nullptr);
                return 1;
            }
            return run_steer(steer);
        }
        if (c_sweep->parsed()) return run_sweep(sweep);
        if (c_report->parsed()) return run_report(report_dir);
        if (c_serve->parsed()) return run_serve(serve);
    } catch (const Failure& f) {
        return exit_code(f.status);
    } catch (const std::exception& e) {
        print_error("internal", e.what(), nullptr);
        return 4;
    }
    return 1;
}

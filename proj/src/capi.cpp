#include "semsteer/semsteer.h"

#include <cstring>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "semsteer/corpus.hpp"
#include "semsteer/error.hpp"
#include "semsteer/metrics.hpp"
#include "semsteer/pipeline.hpp"
#include "semsteer/service.hpp"
#include "semsteer/session.hpp"
#include "semsteer/sim/sweep.hpp"
#include "semsteer/sim/synthetic.hpp"
#include "semsteer/steering/steering.hpp"
#include "semsteer/util.hpp"

using nlohmann::json;
using namespace semsteer;

struct ss_corpus {
    Corpus corpus;
};

struct ss_session {
    SteeringSession session;
};

namespace {

thread_local std::string g_error;
thread_local std::string g_detail = "null";

ss_status to_status(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::usage: return SS_ERR_USAGE;
    case ErrorKind::data: return SS_ERR_DATA;
    case ErrorKind::provider: return SS_ERR_PROVIDER;
    case ErrorKind::io: return SS_ERR_IO;
    case ErrorKind::conflict: return SS_ERR_CONFLICT;
    case ErrorKind::not_found: return SS_ERR_NOT_FOUND;
    case ErrorKind::internal: break;
    }
    return SS_ERR_INTERNAL;
}

template <class F>
ss_status guarded(F&& f) {
    g_error.clear();
    g_detail = "null";
    try {
        f();
        return SS_OK;
    } catch (const Error& e) {
        g_error = e.what();
        g_detail = e.detail().dump();
        return to_status(e.kind());
    } catch (const json::exception& e) {
        g_error = e.what();
        return SS_ERR_USAGE;
    } catch (const std::bad_alloc&) {
        g_error = "out of memory";
        return SS_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_error = e.what();
        return SS_ERR_INTERNAL;
    }
}

char* dup(const std::string& s) {
    auto* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void require(const void* p, const char* what) {
    if (!p) fail(ErrorKind::usage, std::string(what) + " must not be null");
}

json parse_json(const char* text, const char* what) {
    if (!text || !*text) return json::object();
    try {
        auto j = json::parse(text);
        if (!j.is_object()) fail(ErrorKind::usage, std::string(what) + " must be a JSON object");
        return j;
    } catch (const json::parse_error& e) {
        fail(ErrorKind::usage, std::string(what) + " is not valid JSON: " + e.what());
    }
}

providers::ProviderSettings settings_from(const json& opts) {
    if (opts.contains("providers_path")) return providers::load_provider_settings(opts.at("providers_path").get<std::string>());
    if (opts.contains("providers")) return providers::provider_settings_from_json(opts.at("providers"));
    return {};  // mock embedder and heuristic mock LLM
}

json corpus_summary(const Corpus& c) {
    json groups = json::object();
    for (const auto& [label, members] : c.reference_groups()) groups[label] = members.size();
    return {{"corpus_id", c.name()}, {"documents", c.size()}, {"groups", groups}};
}

json metric_block(const ProjectionLayout& layout, const metrics::Labels& labels, int k) {
    const auto r = metrics::evaluate(layout, labels, k);
    return {{"sil", r.sil}, {"nc", r.nc}};
}

json steer(SteeringSession& session, const Corpus& corpus, const json& opts) {
    const auto incorporation = opts.value("incorporation", IncorporationConfig{});
    const auto projection = opts.value("projection", ProjectionConfig{});
    validate(incorporation);
    validate(projection);
    const int k = opts.value("k", 10);
    steering::SteeringOptions steering;
    steering.max_parallel = opts.value("max_parallel", steering.max_parallel);
    steering.few_shot_k = opts.value("few_shot_k", steering.few_shot_k);
    if (steering.max_parallel < 1 || steering.few_shot_k < 0) fail(ErrorKind::usage, "max_parallel must be >= 1 and few_shot_k >= 0");
    const auto settings = settings_from(opts);
    const auto llm_kind = opts.value("llm", std::string("provider"));

    std::shared_ptr<providers::LlmClient> llm;
    std::shared_ptr<providers::Embedder> embedder = providers::make_embedder(settings.embedding, settings.cache_path);
    if (llm_kind == "oracle") {
        if (corpus.reference.empty()) fail(ErrorKind::usage, "oracle mode needs a corpus with reference labels");
        const auto params = opts.value("oracle", sim::OracleParams{});
        llm = std::make_shared<sim::SyntheticOracleLlm>(corpus.reference.labels(), session.groups, params,
                                                        opts.value("oracle_seed", std::uint64_t{1}));
    } else if (llm_kind == "provider") {
        llm = steering::make_llm(settings.llm);
    } else {
        fail(ErrorKind::usage, "llm must be provider|oracle, got '" + llm_kind + "'");
    }

    const auto outcome = pipeline::run_steer(session, corpus.store, *llm, *embedder, incorporation, projection, steering);

    json report = {{"session_id", session.session_id}, {"revision", session.revision}, {"k", k},
                   {"before", nullptr}, {"after", nullptr}, {"delta", nullptr}, {"extension", nullptr}};
    const auto& labels = corpus.reference.labels();
    if (!labels.empty()) {
        report["before"] = metric_block(outcome.baseline, labels, k);
        report["after"] = metric_block(outcome.current, labels, k);
        report["delta"] = {{"sil", report["after"]["sil"].get<double>() - report["before"]["sil"].get<double>()},
                           {"nc", report["after"]["nc"].get<double>() - report["before"]["nc"].get<double>()}};
        std::vector<ExtensionDecision> decisions;
        for (const auto& [id, d] : session.extension_results) decisions.push_back(d);
        if (!decisions.empty()) {
            const auto ext = metrics::extension_report(decisions, labels, metrics::majority_mapping(session.groups, labels));
            report["extension"] = {{"coverage", ext.coverage},
                                   {"accuracy_all", ext.accuracy_all},
                                   {"accuracy_augmented", ext.accuracy_augmented ? json(*ext.accuracy_augmented) : json(nullptr)},
                                   {"n_non_interacted", ext.n_non_interacted},
                                   {"n_augmented", ext.n_augmented},
                                   {"n_correct", ext.n_correct}};
        }
    }
    return report;
}

} // namespace

extern "C" {

const char* ss_version(void) { return SEMSTEER_VERSION; }
const char* ss_last_error(void) { return g_error.c_str(); }
const char* ss_last_error_detail(void) { return g_detail.c_str(); }

const char* ss_status_name(ss_status status) {
    switch (status) {
    case SS_OK: return "ok";
    case SS_ERR_USAGE: return "usage";
    case SS_ERR_DATA: return "data";
    case SS_ERR_PROVIDER: return "provider";
    case SS_ERR_IO: return "io";
    case SS_ERR_CONFLICT: return "conflict";
    case SS_ERR_NOT_FOUND: return "not_found";
    case SS_ERR_INTERNAL: break;
    }
    return "internal";
}

void ss_string_free(char* s) { std::free(s); }

ss_status ss_corpus_load(const char* path, const char* format, ss_corpus** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = nullptr;
        auto c = std::make_unique<ss_corpus>();
        c->corpus = load_corpus(path, parse_corpus_format(format ? format : "jsonl"));
        *out = c.release();
    });
}

ss_status ss_corpus_summary(const ss_corpus* corpus, char** out_json) {
    return guarded([&] {
        require(corpus, "corpus");
        require(out_json, "out_json");
        *out_json = dup(corpus_summary(corpus->corpus).dump());
    });
}

void ss_corpus_free(ss_corpus* corpus) { delete corpus; }

ss_status ss_session_create(const ss_corpus* corpus, const char* perspective_name, ss_session** out) {
    return guarded([&] {
        require(corpus, "corpus");
        require(out, "out");
        auto s = std::make_unique<ss_session>();
        s->session = create_session(corpus->corpus, perspective_name ? perspective_name : "");
        *out = s.release();
    });
}

ss_status ss_session_load(const char* path, ss_session** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        auto s = std::make_unique<ss_session>();
        s->session = load_session(path);
        *out = s.release();
    });
}

ss_status ss_session_save(const ss_session* session, const char* path) {
    return guarded([&] {
        require(session, "session");
        require(path, "path");
        save_session(session->session, path);
    });
}

ss_status ss_session_to_json(const ss_session* session, char** out_json) {
    return guarded([&] {
        require(session, "session");
        require(out_json, "out_json");
        *out_json = dup(serialize_session(session->session));
    });
}

ss_status ss_session_set_groups(ss_session* session, const ss_corpus* corpus, const char* groups_json) {
    return guarded([&] {
        require(session, "session");
        require(corpus, "corpus");
        require(groups_json, "groups_json");
        json j;
        try {
            j = json::parse(groups_json);
        } catch (const json::parse_error& e) {
            fail(ErrorKind::data, std::string("groups are not valid JSON: ") + e.what());
        }
        auto updated = session->session;
        updated.set_groups(corpus->corpus.store, parse_group_specs(j));
        session->session = std::move(updated);
    });
}

void ss_session_free(ss_session* session) { delete session; }

ss_status ss_steer_run(ss_session* session, const ss_corpus* corpus, const char* options_json, char** out_report_json) {
    return guarded([&] {
        require(session, "session");
        require(corpus, "corpus");
        require(out_report_json, "out_report_json");
        if (session->session.corpus_name != corpus->corpus.name()) {
            fail(ErrorKind::usage, "session belongs to corpus '" + session->session.corpus_name + "', not '" +
                                       corpus->corpus.name() + "'");
        }
        const auto opts = parse_json(options_json, "options");
        auto work = session->session;  // commit only on success
        const auto report = steer(work, corpus->corpus, opts);
        session->session = std::move(work);
        *out_report_json = dup(report.dump());
    });
}

ss_status ss_sweep_run(const char* kind, const char* config_path, const char* out_dir, char** out_table) {
    return guarded([&] {
        require(kind, "kind");
        require(config_path, "config_path");
        require(out_dir, "out_dir");
        const auto k = sim::parse_sweep_kind(kind);
        auto config = sim::load_sim_config(config_path);
        config.output_dir = out_dir;
        const auto result = sim::run_sweep(k, config);
        sim::write_sweep_outputs(result, out_dir);
        if (out_table) *out_table = dup(sim::render_table(result));
    });
}

ss_status ss_report_render(const char* dir, char** out_text) {
    return guarded([&] {
        require(dir, "dir");
        require(out_text, "out_text");
        *out_text = dup(sim::render_report(dir));
    });
}

ss_status ss_service_run(const char* options_json, ss_ready_fn on_ready, void* user) {
    return guarded([&] {
        const auto opts = parse_json(options_json, "options");
        service::ServiceOptions so;
        so.host = opts.value("host", so.host);
        so.port = opts.value("port", so.port);
        so.data_dir = opts.value("data_dir", so.data_dir);
        so.static_dir = opts.value("static_dir", so.static_dir);
        so.workers = opts.value("workers", so.workers);
        so.providers = settings_from(opts);
        if (so.port < 0 || so.port > 65535) fail(ErrorKind::usage, "port must be in [0, 65535]");
        if (so.workers < 1) fail(ErrorKind::usage, "workers must be >= 1");
        service::Service svc(so);
        const int port = svc.bind();
        if (on_ready) on_ready(port, user);
        svc.listen();
    });
}

} // extern "C"

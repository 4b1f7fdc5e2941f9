#include "semsteer/sim/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <mutex>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "semsteer/error.hpp"
#include "semsteer/incorporate.hpp"
#include "semsteer/project.hpp"
#include "semsteer/session.hpp"
#include "semsteer/steering/steering.hpp"
#include "semsteer/util.hpp"

#ifndef SEMSTEER_VERSION
#define SEMSTEER_VERSION "dev"
#endif

namespace semsteer::sim {

namespace fs = std::filesystem;

const char* to_string(SweepKind kind) {
    switch (kind) {
    case SweepKind::strategies: return "strategies";
    case SweepKind::interaction: return "interaction";
    case SweepKind::alpha: return "alpha";
    }
    return "unknown";
}

SweepKind parse_sweep_kind(std::string_view s) {
    if (s == "strategies") return SweepKind::strategies;
    if (s == "interaction") return SweepKind::interaction;
    if (s == "alpha") return SweepKind::alpha;
    fail(ErrorKind::usage, "unknown sweep '" + std::string(s) + "' (expected strategies|interaction|alpha)");
}

std::vector<IncorporationConfig> default_strategies() {
    std::vector<IncorporationConfig> out;
    for (auto control : {ControlKind::none, ControlKind::random_text}) {
        for (auto s : {TextStrategy::append, TextStrategy::prepend, TextStrategy::tagged_append, TextStrategy::tagged_prepend,
                       TextStrategy::augmentation_only}) {
            IncorporationConfig c;
            c.mode = IncorporationMode::text;
            c.text_strategy = s;
            c.control = control;
            out.push_back(c);
        }
    }
    return out;
}

SimConfig::SimConfig() : strategies(default_strategies()) {
    interaction_strategy.text_strategy = TextStrategy::augmentation_only;
}

nlohmann::json sim_config_to_json(const SimConfig& c) {
    nlohmann::json corpus;
    if (c.corpus_path.empty()) {
        corpus = {{"synthetic", c.synthetic}};
    } else {
        corpus = {{"path", c.corpus_path}, {"format", c.corpus_format == CorpusFormat::csv ? "csv" : "jsonl"}};
    }
    nlohmann::json providers = {{"embedding", c.providers.embedding}, {"llm", c.providers.llm}, {"cache_path", c.providers.cache_path}};
    return {{"corpus", corpus},
            {"examples_per_group", c.examples_per_group},
            {"m_values", c.m_values},
            {"strategies", c.strategies},
            {"interaction_strategy", c.interaction_strategy},
            {"alphas", c.alphas},
            {"seeds", c.seeds},
            {"provider_mode", c.provider_mode == ProviderMode::remote ? "remote" : "synthetic_oracle"},
            {"oracle", c.oracle},
            {"providers", providers},
            {"projection", c.projection},
            {"k", c.k},
            {"max_parallel", c.max_parallel},
            {"few_shot_k", c.few_shot_k},
            {"output_dir", c.output_dir}};
}

SimConfig sim_config_from_json(const nlohmann::json& j, const std::string& base_dir) {
    SimConfig c;
    auto resolve = [&](const std::string& p) {
        if (p.empty() || base_dir.empty() || fs::path(p).is_absolute()) return p;
        return (fs::path(base_dir) / p).lexically_normal().string();
    };
    try {
        if (!j.is_object()) fail(ErrorKind::usage, "sim config must be a JSON object");
        if (j.contains("corpus")) {
            const auto& cj = j.at("corpus");
            if (cj.contains("path")) {
                c.corpus_path = resolve(cj.at("path").get<std::string>());
                c.corpus_format = parse_corpus_format(cj.value("format", std::string("jsonl")));
            }
            if (cj.contains("synthetic")) c.synthetic = cj.at("synthetic").get<SyntheticCorpusParams>();
        }
        c.examples_per_group = j.value("examples_per_group", c.examples_per_group);
        if (j.contains("m_values")) c.m_values = j.at("m_values").get<std::vector<int>>();
        if (j.contains("strategies")) {
            c.strategies.clear();
            for (const auto& s : j.at("strategies")) c.strategies.push_back(s.get<IncorporationConfig>());
        }
        if (j.contains("interaction_strategy")) c.interaction_strategy = j.at("interaction_strategy").get<IncorporationConfig>();
        if (j.contains("alphas")) c.alphas = j.at("alphas").get<std::vector<double>>();
        if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        if (j.contains("provider_mode")) {
            const auto mode = j.at("provider_mode").get<std::string>();
            if (mode == "synthetic_oracle") c.provider_mode = ProviderMode::synthetic_oracle;
            else if (mode == "remote") c.provider_mode = ProviderMode::remote;
            else fail(ErrorKind::usage, "unknown provider_mode '" + mode + "' (expected synthetic_oracle|remote)");
        }
        if (j.contains("oracle")) c.oracle = j.at("oracle").get<OracleParams>();
        if (j.contains("providers")) {
            const auto& pj = j.at("providers");
            c.providers = pj.is_string() ? providers::load_provider_settings(resolve(pj.get<std::string>()))
                                         : providers::provider_settings_from_json(pj);
            c.providers.cache_path = resolve(c.providers.cache_path);
        }
        if (j.contains("projection")) c.projection = j.at("projection").get<ProjectionConfig>();
        c.k = j.value("k", c.k);
        c.max_parallel = j.value("max_parallel", c.max_parallel);
        c.few_shot_k = j.value("few_shot_k", c.few_shot_k);
        c.output_dir = resolve(j.value("output_dir", c.output_dir));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::usage, std::string("invalid sim config: ") + e.what());
    }
    validate(c);
    return c;
}

SimConfig load_sim_config(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorKind::usage, "sim config '" + path + "': " + e.what());
    }
    return sim_config_from_json(j, fs::path(path).parent_path().string());
}

void validate(const SimConfig& c) {
    if (c.examples_per_group < 1) fail(ErrorKind::usage, "examples_per_group must be >= 1");
    if (c.seeds.empty()) fail(ErrorKind::usage, "seeds must be nonempty");
    if (std::set<std::uint64_t>(c.seeds.begin(), c.seeds.end()).size() != c.seeds.size()) {
        fail(ErrorKind::usage, "seeds must be distinct");
    }
    for (double a : c.alphas) {
        if (!(a >= 0.0 && a <= 1.0)) fail(ErrorKind::usage, fmt::format("alpha {} outside [0,1]", a));
    }
    for (int m : c.m_values) {
        if (m < 1) fail(ErrorKind::usage, "m_values must be >= 1");
    }
    for (const auto& s : c.strategies) validate(s);
    validate(c.interaction_strategy);
    validate(c.projection);
    if (c.k < 1) fail(ErrorKind::usage, "k must be >= 1");
    if (c.max_parallel < 1) fail(ErrorKind::usage, "max_parallel must be >= 1");
    if (c.few_shot_k < 0) fail(ErrorKind::usage, "few_shot_k must be >= 0");
}

std::string config_hash(const SimConfig& config) {
    auto j = sim_config_to_json(config);
    j.erase("output_dir");
    return fmt::format("{:016x}", fnv1a64(j.dump()));
}

std::string condition_label(const IncorporationConfig& c) {
    std::string base = c.mode == IncorporationMode::blend ? fmt::format("blend:alpha={:g}", c.alpha) : to_string(c.text_strategy);
    if (c.control == ControlKind::random_text) base = "random_text:" + base;
    return base;
}

std::vector<AnalystGroup> sample_interaction(const Corpus& corpus, int m, std::uint64_t seed) {
    if (m < 1) fail(ErrorKind::usage, "examples per group must be >= 1");
    const auto groups = corpus.reference_groups();
    if (groups.empty()) fail(ErrorKind::data, "corpus has no reference groups to sample from");
    std::vector<AnalystGroup> out;
    int n = 0;
    for (const auto& [label, members] : groups) {
        ++n;
        if (members.size() < static_cast<std::size_t>(m)) {
            fail(ErrorKind::usage, fmt::format("a reference group has {} members, fewer than m = {}", members.size(), m),
                 {{"group_size", members.size()}, {"m", m}});
        }
        Rng rng(mix_seed(mix_seed(seed, std::string_view("interaction")), label));
        AnalystGroup g;
        g.group_id = fmt::format("g{}", n);
        for (auto i : rng.sample_without_replacement(members.size(), static_cast<std::size_t>(m))) g.member_ids.push_back(members[i]);
        out.push_back(std::move(g));
    }
    return out;
}

metrics::MeanStd MetricSeries::stats() const {
    std::vector<double> present;
    for (const auto& v : values) {
        if (v) present.push_back(*v);
    }
    return metrics::mean_std(present);
}

const MetricSeries* ConditionRow::find(const std::string& metric) const {
    for (const auto& m : metrics) {
        if (m.name == metric) return &m;
    }
    return nullptr;
}

const ConditionRow* SweepResult::find(const std::string& condition) const {
    for (const auto& r : rows) {
        if (r.condition == condition) return &r;
    }
    return nullptr;
}

// ---------------------------------------------------------------- harness

namespace {

struct Semantics {
    SteeringSession session;
    std::map<GroupId, std::string> group_to_ref;
};

class Harness {
public:
    Harness(const SimConfig& config, const SimEnvironment& env) : config_(config), env_(env) {
        corpus_ = config.corpus_path.empty() ? make_synthetic_corpus(config.synthetic)
                                             : load_corpus(config.corpus_path, config.corpus_format);
        if (corpus_.reference.empty()) fail(ErrorKind::data, "simulation needs a corpus with reference groups");
        for (const auto& d : corpus_.store.documents()) {
            if (!corpus_.reference.label_of(d.id)) fail(ErrorKind::data, "document '" + d.id + "' has no reference group");
        }
        if (config.provider_mode == ProviderMode::remote) {
            embedder_ = providers::make_embedder(config.providers.embedding, config.providers.cache_path, env.transport);
            llm_ = steering::make_llm(config.providers.llm, env.transport);
        } else {
            embedder_ = std::make_shared<providers::CachingEmbedder>(std::make_shared<providers::MockEmbedder>(256));
        }
        base_ = incorporate::base_embeddings(corpus_.store, *embedder_);
    }

    const metrics::Labels& labels() const { return corpus_.reference.labels(); }

    ProjectionConfig projection_for(std::uint64_t seed) const {
        auto p = config_.projection;
        p.seed = seed;
        return p;
    }

    const ProjectionLayout& baseline(std::uint64_t seed) {
        auto it = baselines_.find(seed);
        if (it == baselines_.end()) {
            std::vector<DocId> ids;
            for (const auto& d : corpus_.store.documents()) ids.push_back(d.id);
            it = baselines_.emplace(seed, project::project_vectors(ids, base_, projection_for(seed), "baseline")).first;
        }
        return it->second;
    }

    metrics::SeedMetrics evaluate(const ProjectionLayout& layout, std::uint64_t seed) const {
        return {seed, metrics::silhouette_scaled(layout, labels()), metrics::neighborhood_consistency(layout, labels(), config_.k)};
    }

    const Semantics& semantics(int m, std::uint64_t seed) {
        const auto key = std::make_pair(m, seed);
        if (auto it = failures_.find(key); it != failures_.end()) std::rethrow_exception(it->second);
        if (auto it = semantics_.find(key); it != semantics_.end()) return it->second;
        try {
            Semantics s;
            const auto groups = sample_interaction(corpus_, m, seed);
            s.session = create_session(corpus_, fmt::format("sim-m{}-s{}", m, seed));
            std::vector<GroupSpec> specs;
            for (const auto& g : groups) specs.push_back({g.group_id, g.member_ids});
            s.session.set_groups(corpus_.store, specs);
            s.group_to_ref = metrics::majority_mapping(s.session.groups, labels());

            std::shared_ptr<providers::LlmClient> llm = llm_;
            if (config_.provider_mode == ProviderMode::synthetic_oracle) {
                llm = std::make_shared<SyntheticOracleLlm>(labels(), s.session.groups, config_.oracle, seed);
            }
            steering::SteeringOptions opts;
            opts.max_parallel = config_.max_parallel;
            opts.few_shot_k = config_.few_shot_k;
            steering::externalize(s.session, corpus_.store, *llm, opts);
            steering::extend(s.session, corpus_.store, *llm, opts);
            return semantics_.emplace(key, std::move(s)).first->second;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::provider) throw;
            failures_[key] = std::current_exception();
            throw;
        }
    }

    metrics::SeedMetrics steered(const Semantics& sem, std::uint64_t seed, IncorporationConfig incorporation) {
        incorporation.rng_seed = mix_seed(incorporation.rng_seed, seed);
        const auto records =
            incorporate::steer_representations(corpus_.store, base_, sem.session.augmentations, *embedder_, incorporation);
        const auto layout = project::project(records, projection_for(seed), project::Which::steered, "current");
        return evaluate(layout, seed);
    }

    void log(const std::string& msg) const {
        if (env_.log) env_.log(msg);
    }

private:
    const SimConfig& config_;
    const SimEnvironment& env_;
    Corpus corpus_;
    std::shared_ptr<providers::Embedder> embedder_;
    std::shared_ptr<providers::LlmClient> llm_;
    std::vector<EmbeddingVector> base_;
    std::map<std::uint64_t, ProjectionLayout> baselines_;
    std::map<std::pair<int, std::uint64_t>, Semantics> semantics_;
    std::map<std::pair<int, std::uint64_t>, std::exception_ptr> failures_;
};

// ---------------------------------------------------------------- checkpoint

nlohmann::json row_to_json(const ConditionRow& r) {
    nlohmann::json metrics = nlohmann::json::array();
    for (const auto& m : r.metrics) {
        nlohmann::json values = nlohmann::json::array();
        for (const auto& v : m.values) values.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
        metrics.push_back({{"name", m.name}, {"values", values}});
    }
    return {{"condition", r.condition}, {"ok", r.ok}, {"message", r.message}, {"metrics", metrics}};
}

ConditionRow row_from_json(const nlohmann::json& j) {
    ConditionRow r;
    r.condition = j.at("condition").get<std::string>();
    r.ok = j.at("ok").get<bool>();
    r.message = j.at("message").get<std::string>();
    for (const auto& m : j.at("metrics")) {
        MetricSeries s;
        s.name = m.at("name").get<std::string>();
        for (const auto& v : m.at("values")) s.values.push_back(v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
        r.metrics.push_back(std::move(s));
    }
    return r;
}

class Checkpoint {
public:
    Checkpoint(const SimConfig& config, SweepKind kind, std::string hash) : hash_(std::move(hash)) {
        if (config.output_dir.empty()) return;
        path_ = (fs::path(config.output_dir) / (std::string(to_string(kind)) + ".checkpoint.json")).string();
        if (!fs::exists(path_)) return;
        try {
            const auto j = nlohmann::json::parse(read_file(path_));
            if (j.value("config_hash", std::string()) != hash_) return;
            for (const auto& r : j.at("rows")) {
                auto row = row_from_json(r);
                rows_.emplace(row.condition, std::move(row));
            }
        } catch (const nlohmann::json::exception&) {
            rows_.clear();  // unreadable checkpoint: start over
        }
    }

    const ConditionRow* done(const std::string& condition) const {
        const auto it = rows_.find(condition);
        return it == rows_.end() ? nullptr : &it->second;
    }

    void record(const ConditionRow& row) {
        if (path_.empty() || !row.ok) return;
        rows_[row.condition] = row;
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& [c, r] : rows_) rows.push_back(row_to_json(r));
        write_file_atomic(path_, nlohmann::json{{"config_hash", hash_}, {"rows", rows}}.dump());
    }

    void finish() const {
        if (path_.empty()) return;
        std::error_code ec;
        fs::remove(path_, ec);
    }

private:
    std::string hash_;
    std::string path_;
    std::map<std::string, ConditionRow> rows_;
};

struct Condition {
    std::string label;
    int m = 5;
    IncorporationConfig incorporation;
};

MetricSeries series(std::string name, std::size_t n) {
    return {std::move(name), std::vector<std::optional<double>>(n)};
}

SweepResult run_conditions(SweepKind kind, const SimConfig& config, const SimEnvironment& env,
                           const std::vector<Condition>& conditions) {
    validate(config);
    {
        std::set<std::string> labels;
        for (const auto& c : conditions) {
            if (!labels.insert(c.label).second) fail(ErrorKind::usage, "duplicate condition '" + c.label + "'");
        }
    }
    SweepResult result;
    result.kind = kind;
    result.seeds = config.seeds;
    result.config_hash = config_hash(config);
    result.code_version = SEMSTEER_VERSION;

    Harness h(config, env);
    const std::size_t n = config.seeds.size();

    result.baseline.condition = "baseline";
    auto bsil = series("sil", n), bnc = series("nc", n);
    std::vector<metrics::SeedMetrics> base_metrics;
    for (std::size_t s = 0; s < n; ++s) {
        const auto m = h.evaluate(h.baseline(config.seeds[s]), config.seeds[s]);
        base_metrics.push_back(m);
        bsil.values[s] = m.sil;
        bnc.values[s] = m.nc;
    }
    result.baseline.metrics = {bsil, bnc};

    Checkpoint checkpoint(config, kind, result.config_hash);
    bool all_ok = true;
    for (const auto& cond : conditions) {
        if (const auto* row = checkpoint.done(cond.label)) {
            h.log("resumed " + cond.label + " from checkpoint");
            result.rows.push_back(*row);
            continue;
        }
        h.log("running " + cond.label);
        ConditionRow row;
        row.condition = cond.label;
        auto dsil = series("delta_sil", n), dnc = series("delta_nc", n), sil = series("sil", n), nc = series("nc", n);
        auto cov = series("coverage", n), acc_all = series("accuracy_all", n), acc_aug = series("accuracy_augmented", n);
        try {
            for (std::size_t s = 0; s < n; ++s) {
                const auto seed = config.seeds[s];
                const auto& sem = h.semantics(cond.m, seed);
                const auto m = h.steered(sem, seed, cond.incorporation);
                dsil.values[s] = m.sil - base_metrics[s].sil;
                dnc.values[s] = m.nc - base_metrics[s].nc;
                sil.values[s] = m.sil;
                nc.values[s] = m.nc;
                if (kind == SweepKind::interaction) {
                    std::vector<ExtensionDecision> decisions;
                    for (const auto& [id, d] : sem.session.extension_results) decisions.push_back(d);
                    const auto rep = metrics::extension_report(decisions, h.labels(), sem.group_to_ref);
                    cov.values[s] = rep.coverage;
                    acc_all.values[s] = rep.accuracy_all;
                    acc_aug.values[s] = rep.accuracy_augmented;
                }
            }
            row.metrics = {dsil, dnc, sil, nc};
            if (kind == SweepKind::interaction) {
                row.metrics.push_back(cov);
                row.metrics.push_back(acc_all);
                row.metrics.push_back(acc_aug);
            }
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::provider) throw;
            row.ok = false;
            row.message = e.what();
            row.metrics.clear();
            all_ok = false;
            h.log("condition " + cond.label + " failed: " + e.what());
        }
        checkpoint.record(row);
        result.rows.push_back(std::move(row));
    }
    if (all_ok) checkpoint.finish();
    return result;
}

// Shortest text that parses back to the same double, so CSVs round-trip exactly.
std::string fmt_num(double v) {
    if (v == 0.0) v = 0.0;  // no "-0"
    return fmt::format("{}", v);
}

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else if (c == '\n') out += ' ';
        else out.push_back(c);
    }
    return out + "\"";
}

std::vector<std::string> csv_split(std::string_view line) {
    std::vector<std::string> out(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                out.back().push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                out.back().push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.emplace_back();
        } else {
            out.back().push_back(c);
        }
    }
    return out;
}

// Display width in code points; enough for the ASCII plus a few symbols used here.
std::size_t width_of(std::string_view s) {
    std::size_t n = 0;
    for (unsigned char c : s) n += (c & 0xC0) != 0x80 ? 1 : 0;
    return n;
}

std::string pad(std::string s, std::size_t w) {
    const auto cur = width_of(s);
    if (cur < w) s.append(w - cur, ' ');
    return s;
}

std::string cell(const ConditionRow& row, const std::string& metric) {
    const auto* m = row.find(metric);
    if (m == nullptr) return "-";
    const auto st = m->stats();
    bool any = false;
    for (const auto& v : m->values) any = any || v.has_value();
    if (!any) return "n/a";
    auto two = [](double v) {
        auto s = fmt::format("{:.2f}", v);
        return s == "-0.00" ? std::string("0.00") : s;
    };
    return st.std ? two(st.mean) + "±" + two(*st.std) : two(st.mean);
}

std::string table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& body) {
    std::vector<std::size_t> w(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) w[c] = width_of(header[c]);
    for (const auto& r : body) {
        for (std::size_t c = 0; c < r.size() && c < w.size(); ++c) w[c] = std::max(w[c], width_of(r[c]));
    }
    auto line = [&](const std::vector<std::string>& r) {
        std::string out;
        for (std::size_t c = 0; c < r.size(); ++c) {
            out += c + 1 < r.size() ? pad(r[c], w[c] + 2) : r[c];
        }
        while (!out.empty() && out.back() == ' ') out.pop_back();
        return out + "\n";
    };
    std::string out = line(header);
    std::vector<std::string> rule;
    for (auto x : w) rule.emplace_back(x, '-');
    out += line(rule);
    for (const auto& r : body) out += line(r);
    return out;
}

} // namespace

SweepResult run_strategy_sweep(const SimConfig& config, const SimEnvironment& env) {
    if (config.strategies.empty()) fail(ErrorKind::usage, "strategy sweep needs at least one strategy");
    std::vector<Condition> conds;
    for (const auto& s : config.strategies) conds.push_back({condition_label(s), config.examples_per_group, s});
    return run_conditions(SweepKind::strategies, config, env, conds);
}

SweepResult run_interaction_sweep(const SimConfig& config, const std::vector<int>& m_values, const SimEnvironment& env) {
    if (m_values.empty()) fail(ErrorKind::usage, "interaction sweep needs at least one m value");
    std::vector<Condition> conds;
    for (int m : m_values) {
        if (m < 1) fail(ErrorKind::usage, "m values must be >= 1");
        conds.push_back({fmt::format("m={}", m), m, config.interaction_strategy});
    }
    return run_conditions(SweepKind::interaction, config, env, conds);
}

SweepResult run_alpha_sweep(const SimConfig& config, const SimEnvironment& env) {
    if (config.alphas.empty()) fail(ErrorKind::usage, "alpha sweep needs at least one alpha");
    std::vector<Condition> conds;
    for (double a : config.alphas) {
        IncorporationConfig c;
        c.mode = IncorporationMode::blend;
        c.alpha = a;
        validate(c);
        conds.push_back({fmt::format("alpha={:g}", a), config.examples_per_group, c});
    }
    return run_conditions(SweepKind::alpha, config, env, conds);
}

SweepResult run_sweep(SweepKind kind, const SimConfig& config, const SimEnvironment& env) {
    switch (kind) {
    case SweepKind::strategies: return run_strategy_sweep(config, env);
    case SweepKind::interaction: return run_interaction_sweep(config, config.m_values, env);
    case SweepKind::alpha: return run_alpha_sweep(config, env);
    }
    fail(ErrorKind::internal, "unhandled sweep kind");
}

std::string sweep_csv(const SweepResult& r) {
    std::string out = fmt::format("# provenance,sweep={},config_hash={},code_version={}\n", to_string(r.kind), r.config_hash, r.code_version);
    out += "condition,metric,status,mean,std";
    for (auto s : r.seeds) out += fmt::format(",seed:{}", s);
    out += "\n";
    auto emit = [&](const ConditionRow& row) {
        if (!row.ok) {
            out += csv_quote(row.condition) + ",error," + csv_quote("failed: " + row.message) + ",,";
            for (std::size_t i = 0; i < r.seeds.size(); ++i) out += ",";
            out += "\n";
            return;
        }
        for (const auto& m : row.metrics) {
            const auto st = m.stats();
            bool any = false;
            for (const auto& v : m.values) any = any || v.has_value();
            out += csv_quote(row.condition) + "," + m.name + ",ok," + (any ? fmt_num(st.mean) : "") + "," +
                   (st.std ? fmt_num(*st.std) : "");
            for (const auto& v : m.values) out += "," + (v ? fmt_num(*v) : "");
            out += "\n";
        }
    };
    emit(r.baseline);
    for (const auto& row : r.rows) emit(row);
    return out;
}

SweepResult parse_sweep_csv(std::string_view csv, SweepKind kind) {
    SweepResult r;
    r.kind = kind;
    std::istringstream in{std::string(csv)};
    std::string line;
    int line_no = 0;
    bool header = false;
    std::map<std::string, std::size_t> row_index;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.rfind("# provenance", 0) == 0) {
            for (const auto& f : csv_split(line)) {
                if (f.rfind("config_hash=", 0) == 0) r.config_hash = f.substr(12);
                if (f.rfind("code_version=", 0) == 0) r.code_version = f.substr(13);
            }
            continue;
        }
        const auto f = csv_split(line);
        if (!header) {
            if (f.size() < 5 || f[0] != "condition") fail(ErrorKind::data, fmt::format("line {}: missing sweep CSV header", line_no));
            for (std::size_t i = 5; i < f.size(); ++i) {
                if (f[i].rfind("seed:", 0) != 0) fail(ErrorKind::data, fmt::format("line {}: bad seed column '{}'", line_no, f[i]));
                r.seeds.push_back(std::stoull(f[i].substr(5)));
            }
            header = true;
            continue;
        }
        if (f.size() != 5 + r.seeds.size()) fail(ErrorKind::data, fmt::format("line {}: expected {} fields, got {}", line_no, 5 + r.seeds.size(), f.size()));
        ConditionRow* row = nullptr;
        if (f[0] == "baseline") {
            row = &r.baseline;
            row->condition = "baseline";
        } else {
            auto it = row_index.find(f[0]);
            if (it == row_index.end()) {
                it = row_index.emplace(f[0], r.rows.size()).first;
                r.rows.push_back({});
                r.rows.back().condition = f[0];
            }
            row = &r.rows[it->second];
        }
        if (f[2] != "ok") {
            row->ok = false;
            row->message = f[2].rfind("failed: ", 0) == 0 ? f[2].substr(8) : f[2];
            continue;
        }
        MetricSeries s;
        s.name = f[1];
        try {
            for (std::size_t i = 5; i < f.size(); ++i) s.values.push_back(f[i].empty() ? std::nullopt : std::optional<double>(std::stod(f[i])));
        } catch (const std::exception&) {
            fail(ErrorKind::data, fmt::format("line {}: non-numeric value", line_no));
        }
        row->metrics.push_back(std::move(s));
    }
    if (!header) fail(ErrorKind::data, "sweep CSV has no header");
    return r;
}

std::string render_table(const SweepResult& r) {
    std::string out;
    const auto seeds = r.seeds.size();
    switch (r.kind) {
    case SweepKind::strategies: out += "Text-based augmentation strategies"; break;
    case SweepKind::interaction: out += "Interaction size and selective extension"; break;
    case SweepKind::alpha: out += "Embedding-level blending"; break;
    }
    out += fmt::format(" (mean ± std over {} seed{}; deltas relative to baseline)\n", seeds, seeds == 1 ? "" : "s");
    out += fmt::format("Baseline: Sil = {}, NC = {}\n\n", cell(r.baseline, "sil"), cell(r.baseline, "nc"));

    std::vector<std::vector<std::string>> body;
    auto failed = [](const ConditionRow& row) { return "failed: " + row.message; };
    switch (r.kind) {
    case SweepKind::strategies:
        for (const auto& row : r.rows) {
            if (!row.ok) body.push_back({row.condition, failed(row), ""});
            else body.push_back({row.condition, cell(row, "delta_sil"), cell(row, "delta_nc")});
        }
        out += table({"Strategy", "ΔSil", "ΔNC"}, body);
        break;
    case SweepKind::interaction:
        for (const auto& row : r.rows) {
            const auto m = row.condition.rfind("m=", 0) == 0 ? row.condition.substr(2) : row.condition;
            if (!row.ok) body.push_back({m, failed(row), "", "", "", ""});
            else body.push_back({m, cell(row, "delta_sil"), cell(row, "delta_nc"), cell(row, "coverage"),
                                 cell(row, "accuracy_all"), cell(row, "accuracy_augmented")});
        }
        out += table({"m", "ΔSil", "ΔNC", "Coverage", "Acc (all)", "Acc (augmented)"}, body);
        break;
    case SweepKind::alpha:
        for (const auto& row : r.rows) {
            const auto a = row.condition.rfind("alpha=", 0) == 0 ? row.condition.substr(6) : row.condition;
            if (!row.ok) body.push_back({a, failed(row), ""});
            else body.push_back({a, cell(row, "delta_sil"), cell(row, "delta_nc")});
        }
        out += table({"α", "ΔSil", "ΔNC"}, body);
        break;
    }
    return out;
}

std::string interaction_curve_csv(const SweepResult& r) {
    std::string out = "m,delta_sil,delta_nc,coverage,accuracy_all,accuracy_augmented\n";
    for (const auto& row : r.rows) {
        if (!row.ok) continue;
        out += row.condition.rfind("m=", 0) == 0 ? row.condition.substr(2) : row.condition;
        for (const char* name : {"delta_sil", "delta_nc", "coverage", "accuracy_all", "accuracy_augmented"}) {
            const auto* m = row.find(name);
            bool any = false;
            if (m) {
                for (const auto& v : m->values) any = any || v.has_value();
            }
            out += "," + (any ? fmt_num(m->stats().mean) : std::string());
        }
        out += "\n";
    }
    return out;
}

void write_sweep_outputs(const SweepResult& result, const std::string& dir) {
    const auto base = fs::path(dir) / to_string(result.kind);
    write_file_atomic(base.string() + ".csv", sweep_csv(result));
    write_file_atomic(base.string() + ".txt", render_table(result));
    if (result.kind == SweepKind::interaction) {
        write_file_atomic((fs::path(dir) / "interaction_curve.csv").string(), interaction_curve_csv(result));
    }
}

std::string render_report(const std::string& dir) {
    if (!fs::is_directory(dir)) fail(ErrorKind::usage, "not a directory: " + dir);
    std::string out;
    for (auto kind : {SweepKind::strategies, SweepKind::interaction, SweepKind::alpha}) {
        const auto path = fs::path(dir) / (std::string(to_string(kind)) + ".csv");
        if (!fs::exists(path)) continue;
        const auto r = parse_sweep_csv(read_file(path.string()), kind);
        if (!out.empty()) out += "\n";
        out += render_table(r);
    }
    if (out.empty()) fail(ErrorKind::data, "no sweep results (strategies.csv, interaction.csv, alpha.csv) in " + dir);
    return out;
}

} // namespace semsteer::sim

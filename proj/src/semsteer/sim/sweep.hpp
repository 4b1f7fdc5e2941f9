#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "semsteer/corpus.hpp"
#include "semsteer/metrics.hpp"
#include "semsteer/providers/config.hpp"
#include "semsteer/providers/transport.hpp"
#include "semsteer/sim/synthetic.hpp"
#include "semsteer/types.hpp"

namespace semsteer::sim {

enum class ProviderMode { synthetic_oracle, remote };
enum class SweepKind { strategies, interaction, alpha };

const char* to_string(SweepKind kind);
SweepKind parse_sweep_kind(std::string_view s);

/// Config file schema (JSON). Every field is optional.
///
///   corpus               {"path", "format"} or {"synthetic": SyntheticCorpusParams}
///   examples_per_group   m for the strategy and alpha sweeps (5)
///   m_values             interaction-sweep grid ([1,2,3,5,8,10])
///   strategies           list of incorporation configs (5 text strategies, then
///                        the same 5 with control "random_text")
///   interaction_strategy incorporation config for the interaction sweep
///                        (augmentation_only)
///   alphas               blend weights ([0,0.25,0.5,0.75,1])
///   seeds                ([1,2,3,4,5]); each seed drives both the interaction
///                        sample and the projection seed
///   provider_mode        "synthetic_oracle" | "remote"
///   oracle               OracleParams (synthetic_oracle mode)
///   providers            provider settings object, or a path string (remote mode)
///   projection           projection config (linear_pca)
///   k                    neighborhood size for NC (10)
///   max_parallel, few_shot_k
///   output_dir
struct SimConfig {
    std::string corpus_path;
    CorpusFormat corpus_format = CorpusFormat::jsonl;
    SyntheticCorpusParams synthetic;  // used when corpus_path is empty
    int examples_per_group = 5;
    std::vector<int> m_values{1, 2, 3, 5, 8, 10};
    std::vector<IncorporationConfig> strategies;
    IncorporationConfig interaction_strategy;
    std::vector<double> alphas{0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    ProviderMode provider_mode = ProviderMode::synthetic_oracle;
    OracleParams oracle;
    providers::ProviderSettings providers;
    ProjectionConfig projection;
    int k = 10;
    int max_parallel = 4;
    int few_shot_k = 3;
    std::string output_dir;

    SimConfig();
};

std::vector<IncorporationConfig> default_strategies();

nlohmann::json sim_config_to_json(const SimConfig& config);
SimConfig sim_config_from_json(const nlohmann::json& j, const std::string& base_dir = {});
SimConfig load_sim_config(const std::string& path);
void validate(const SimConfig& config);

/// Hex FNV-1a of the canonical config JSON, output_dir excluded.
std::string config_hash(const SimConfig& config);

/// Human-readable condition label, e.g. "append" or "random_text:append" or "alpha=0.25".
std::string condition_label(const IncorporationConfig& config);

/// One analyst group per reference label (labels in sorted order, ids
/// "g1".."gK"), each with m members drawn uniformly without replacement.
std::vector<AnalystGroup> sample_interaction(const Corpus& corpus, int m, std::uint64_t seed);

struct MetricSeries {
    std::string name;
    std::vector<std::optional<double>> values;  // aligned with SweepResult::seeds

    metrics::MeanStd stats() const;
};

struct ConditionRow {
    std::string condition;
    bool ok = true;
    std::string message;  // failure reason
    std::vector<MetricSeries> metrics;

    const MetricSeries* find(const std::string& metric) const;
};

struct SweepResult {
    SweepKind kind = SweepKind::strategies;
    std::vector<std::uint64_t> seeds;
    std::string config_hash;
    std::string code_version;
    ConditionRow baseline;  // sil / nc of the shared baselines
    std::vector<ConditionRow> rows;

    const ConditionRow* find(const std::string& condition) const;
};

struct SimEnvironment {
    std::shared_ptr<providers::Transport> transport;  // remote mode; null => HTTP
    std::function<void(const std::string&)> log;
};

SweepResult run_strategy_sweep(const SimConfig& config, const SimEnvironment& env = {});
SweepResult run_interaction_sweep(const SimConfig& config, const std::vector<int>& m_values, const SimEnvironment& env = {});
SweepResult run_alpha_sweep(const SimConfig& config, const SimEnvironment& env = {});
SweepResult run_sweep(SweepKind kind, const SimConfig& config, const SimEnvironment& env = {});

/// Long-form CSV: a "# provenance" line, a header
/// "condition,metric,status,mean,std,seed:<s>..." and one line per
/// (condition, metric). Failed conditions get a single "error" line whose
/// status is "failed: <reason>".
std::string sweep_csv(const SweepResult& result);
SweepResult parse_sweep_csv(std::string_view csv, SweepKind kind);

/// Plain-text table in the layout of the corresponding results table.
std::string render_table(const SweepResult& result);

/// Interaction sweep only: "m,delta_sil,delta_nc,coverage,accuracy_all,accuracy_augmented" means.
std::string interaction_curve_csv(const SweepResult& result);

/// Writes <kind>.csv, <kind>.txt and (interaction) interaction_curve.csv.
void write_sweep_outputs(const SweepResult& result, const std::string& dir);

/// Tables for every sweep CSV found in `dir`, in strategies, interaction, alpha order.
std::string render_report(const std::string& dir);

} // namespace semsteer::sim

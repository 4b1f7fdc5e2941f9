#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semsteer/types.hpp"

namespace semsteer::metrics {

using Labels = std::map<DocId, std::string>;

/// 2 x mean silhouette over labeled points, Euclidean in layout space.
/// Points alone in their label contribute 0.
double silhouette_scaled(const ProjectionLayout& layout, const Labels& labels);
double silhouette_scaled(std::span<const Point2> points, std::span<const std::string> labels);

/// Same, from a precomputed symmetric distance matrix (row-major n x n).
double silhouette_scaled_from_distances(std::span<const double> dist, std::span<const std::string> labels);

/// Silhouette in the embedding space under cosine distance, scaled by 2.
double silhouette_scaled_embedding(const std::vector<EmbeddingRecord>& records, const Labels& labels, bool steered);

/// Mean fraction of same-label documents among each labeled point's k nearest
/// labeled neighbors (knn tie rules).
double neighborhood_consistency(const ProjectionLayout& layout, const Labels& labels, int k = 10);
double neighborhood_consistency(std::span<const Point2> points, std::span<const DocId> ids,
                                std::span<const std::string> labels, int k = 10);

struct SeedMetrics {
    std::uint64_t seed = 0;
    double sil = 0.0;
    double nc = 0.0;
};

struct MeanStd {
    double mean = 0.0;
    std::optional<double> std;  // sample std; absent with fewer than two values
};

MeanStd mean_std(std::span<const double> values);

struct MetricsReport {
    double sil = 0.0;
    double nc = 0.0;
    int k_used = 10;
    std::optional<double> delta_sil;
    std::optional<double> delta_nc;
    std::vector<SeedMetrics> per_seed;
    MeanStd sil_stats;
    MeanStd nc_stats;
};

/// Aggregates per-seed values (mean over seeds in sil/nc).
MetricsReport aggregate(std::vector<SeedMetrics> per_seed, int k);

/// Evaluates one layout.
MetricsReport evaluate(const ProjectionLayout& layout, const Labels& labels, int k = 10);

struct Deltas {
    double delta_sil = 0.0;
    double delta_nc = 0.0;
    std::vector<SeedMetrics> per_seed;  // steered - baseline per seed
    MeanStd sil_stats;
    MeanStd nc_stats;
};

/// steered - baseline, paired by seed and then averaged. Throws Error(data)
/// when the seed sets or k differ.
Deltas deltas(const MetricsReport& baseline, const MetricsReport& steered);

struct ExtensionReport {
    double accuracy_all = 0.0;
    std::optional<double> accuracy_augmented;  // absent when nothing was assigned
    double coverage = 0.0;
    std::size_t n_non_interacted = 0;
    std::size_t n_augmented = 0;
    std::size_t n_correct = 0;
};

/// Coverage = assigned / decided; accuracy_augmented = correct / assigned;
/// accuracy_all = correct / decided (abstentions count as incorrect).
ExtensionReport extension_report(const std::vector<ExtensionDecision>& decisions, const Labels& reference,
                                 const std::map<GroupId, std::string>& group_to_ref);

/// Each analyst group mapped to the most frequent reference label among its
/// members (ties by label order). Groups with no labeled member are omitted.
std::map<GroupId, std::string> majority_mapping(const std::vector<AnalystGroup>& groups, const Labels& reference);

/// "metric,mean,std,seed:<s1>,seed:<s2>,..." rows for sil and nc.
std::string report_csv(const MetricsReport& report);

} // namespace semsteer::metrics

#include "semsteer/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "semsteer/error.hpp"
#include "semsteer/project.hpp"

namespace semsteer::metrics {

namespace {

struct Labeled {
    std::vector<Point2> points;
    std::vector<DocId> ids;
    std::vector<std::string> labels;
};

Labeled labeled_subset(const ProjectionLayout& layout, const Labels& labels) {
    Labeled out;
    for (std::size_t i = 0; i < layout.ids.size(); ++i) {
        const auto it = labels.find(layout.ids[i]);
        if (it == labels.end()) continue;
        out.points.push_back(layout.points[i]);
        out.ids.push_back(layout.ids[i]);
        out.labels.push_back(it->second);
    }
    return out;
}

void check_silhouette_pre(std::span<const std::string> labels) {
    if (labels.size() < 2) fail(ErrorKind::data, "silhouette needs at least 2 labeled points");
    const std::set<std::string> distinct(labels.begin(), labels.end());
    if (distinct.size() < 2) fail(ErrorKind::data, "silhouette needs at least 2 distinct labels");
}

std::string fmt_value(double v) { return fmt::format("{:.6f}", v); }

} // namespace

double silhouette_scaled_from_distances(std::span<const double> dist, std::span<const std::string> labels) {
    check_silhouette_pre(labels);
    const std::size_t n = labels.size();
    if (dist.size() != n * n) fail(ErrorKind::internal, "distance matrix size mismatch");

    std::map<std::string, std::size_t> ids;
    for (const auto& l : labels) ids.emplace(l, ids.size());
    std::vector<std::size_t> lab(n), size(ids.size(), 0);
    for (std::size_t i = 0; i < n; ++i) {
        lab[i] = ids.at(labels[i]);
        ++size[lab[i]];
    }

    double total = 0.0;
    std::vector<double> sums(ids.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (size[lab[i]] < 2) continue;
        std::fill(sums.begin(), sums.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) sums[lab[j]] += dist[i * n + j];
        }
        const double a = sums[lab[i]] / static_cast<double>(size[lab[i]] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < sums.size(); ++c) {
            if (c != lab[i]) b = std::min(b, sums[c] / static_cast<double>(size[c]));
        }
        const double m = std::max(a, b);
        total += m > 0.0 ? (b - a) / m : 0.0;
    }
    return 2.0 * total / static_cast<double>(n);
}

double silhouette_scaled(std::span<const Point2> points, std::span<const std::string> labels) {
    check_silhouette_pre(labels);
    const std::size_t n = points.size();
    std::vector<double> dist(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = std::hypot(points[i].x - points[j].x, points[i].y - points[j].y);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    return silhouette_scaled_from_distances(dist, labels);
}

double silhouette_scaled(const ProjectionLayout& layout, const Labels& labels) {
    const auto sub = labeled_subset(layout, labels);
    return silhouette_scaled(sub.points, sub.labels);
}

double silhouette_scaled_embedding(const std::vector<EmbeddingRecord>& records, const Labels& labels, bool steered) {
    std::vector<const EmbeddingVector*> vecs;
    std::vector<std::string> labs;
    for (const auto& r : records) {
        const auto it = labels.find(r.doc_id);
        if (it == labels.end()) continue;
        vecs.push_back(steered ? &r.steered : &r.base);
        labs.push_back(it->second);
    }
    check_silhouette_pre(labs);
    const std::size_t n = vecs.size();
    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (double x : vecs[i]->values) s += x * x;
        norms[i] = std::sqrt(s);
    }
    std::vector<double> dist(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double dot = 0.0;
            for (std::size_t t = 0; t < vecs[i]->values.size(); ++t) dot += vecs[i]->values[t] * vecs[j]->values[t];
            const double den = norms[i] * norms[j];
            const double d = den > 0.0 ? std::max(0.0, 1.0 - dot / den) : 1.0;
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    return silhouette_scaled_from_distances(dist, labs);
}

double neighborhood_consistency(std::span<const Point2> points, std::span<const DocId> ids,
                                std::span<const std::string> labels, int k) {
    const auto nn = project::knn_indices(points, ids, k);
    double total = 0.0;
    for (std::size_t i = 0; i < nn.size(); ++i) {
        std::size_t same = 0;
        for (auto j : nn[i]) same += labels[j] == labels[i] ? 1 : 0;
        total += static_cast<double>(same) / k;
    }
    return total / static_cast<double>(nn.size());
}

double neighborhood_consistency(const ProjectionLayout& layout, const Labels& labels, int k) {
    const auto sub = labeled_subset(layout, labels);
    return neighborhood_consistency(sub.points, sub.ids, sub.labels, k);
}

MeanStd mean_std(std::span<const double> values) {
    MeanStd out;
    if (values.empty()) return out;
    out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    if (values.size() >= 2) {
        double ss = 0.0;
        for (double v : values) ss += (v - out.mean) * (v - out.mean);
        out.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return out;
}

MetricsReport aggregate(std::vector<SeedMetrics> per_seed, int k) {
    MetricsReport r;
    r.k_used = k;
    std::vector<double> sils, ncs;
    for (const auto& s : per_seed) {
        sils.push_back(s.sil);
        ncs.push_back(s.nc);
    }
    r.sil_stats = mean_std(sils);
    r.nc_stats = mean_std(ncs);
    r.sil = r.sil_stats.mean;
    r.nc = r.nc_stats.mean;
    r.per_seed = std::move(per_seed);
    return r;
}

MetricsReport evaluate(const ProjectionLayout& layout, const Labels& labels, int k) {
    return aggregate({{layout.config_used.seed, silhouette_scaled(layout, labels), neighborhood_consistency(layout, labels, k)}}, k);
}

Deltas deltas(const MetricsReport& baseline, const MetricsReport& steered) {
    if (baseline.k_used != steered.k_used) {
        fail(ErrorKind::data, fmt::format("k differs between reports: {} vs {}", baseline.k_used, steered.k_used));
    }
    std::map<std::uint64_t, const SeedMetrics*> base;
    for (const auto& s : baseline.per_seed) base[s.seed] = &s;
    std::set<std::uint64_t> steered_seeds;
    for (const auto& s : steered.per_seed) steered_seeds.insert(s.seed);
    if (base.size() != baseline.per_seed.size() || steered_seeds.size() != steered.per_seed.size()) {
        fail(ErrorKind::data, "duplicate seeds in metrics report");
    }
    std::set<std::uint64_t> base_seeds;
    for (const auto& [s, p] : base) base_seeds.insert(s);
    if (base_seeds != steered_seeds) fail(ErrorKind::data, "baseline and steered seed sets differ");

    Deltas d;
    std::vector<double> ds, dn;
    for (const auto& s : steered.per_seed) {
        const auto* b = base.at(s.seed);
        d.per_seed.push_back({s.seed, s.sil - b->sil, s.nc - b->nc});
        ds.push_back(s.sil - b->sil);
        dn.push_back(s.nc - b->nc);
    }
    d.sil_stats = mean_std(ds);
    d.nc_stats = mean_std(dn);
    d.delta_sil = d.sil_stats.mean;
    d.delta_nc = d.nc_stats.mean;
    return d;
}

ExtensionReport extension_report(const std::vector<ExtensionDecision>& decisions, const Labels& reference,
                                 const std::map<GroupId, std::string>& group_to_ref) {
    ExtensionReport r;
    for (const auto& d : decisions) {
        const auto ref = reference.find(d.doc_id);
        if (ref == reference.end()) fail(ErrorKind::data, "no reference label for '" + d.doc_id + "'");
        ++r.n_non_interacted;
        if (!d.assigned()) continue;
        const auto mapped = group_to_ref.find(*d.assigned_group);
        if (mapped == group_to_ref.end()) fail(ErrorKind::data, "unmapped group id '" + *d.assigned_group + "'");
        ++r.n_augmented;
        if (mapped->second == ref->second) ++r.n_correct;
    }
    if (r.n_non_interacted > 0) {
        r.coverage = static_cast<double>(r.n_augmented) / static_cast<double>(r.n_non_interacted);
        r.accuracy_all = static_cast<double>(r.n_correct) / static_cast<double>(r.n_non_interacted);
    }
    if (r.n_augmented > 0) r.accuracy_augmented = static_cast<double>(r.n_correct) / static_cast<double>(r.n_augmented);
    return r;
}

std::map<GroupId, std::string> majority_mapping(const std::vector<AnalystGroup>& groups, const Labels& reference) {
    std::map<GroupId, std::string> out;
    for (const auto& g : groups) {
        std::map<std::string, int> counts;
        for (const auto& id : g.member_ids) {
            if (auto it = reference.find(id); it != reference.end()) ++counts[it->second];
        }
        const std::string* best = nullptr;
        int best_n = 0;
        for (const auto& [label, n] : counts) {
            if (n > best_n) {
                best = &label;
                best_n = n;
            }
        }
        if (best) out[g.group_id] = *best;
    }
    return out;
}

std::string report_csv(const MetricsReport& report) {
    std::string out = "metric,mean,std";
    for (const auto& s : report.per_seed) out += fmt::format(",seed:{}", s.seed);
    out += "\n";
    auto row = [&](const char* name, const MeanStd& ms, auto get) {
        out += fmt::format("{},{},{}", name, fmt_value(ms.mean), ms.std ? fmt_value(*ms.std) : "");
        for (const auto& s : report.per_seed) out += "," + fmt_value(get(s));
        out += "\n";
    };
    row("sil", report.sil_stats, [](const SeedMetrics& s) { return s.sil; });
    row("nc", report.nc_stats, [](const SeedMetrics& s) { return s.nc; });
    return out;
}

} // namespace semsteer::metrics

#include "semsteer/project.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include <Eigen/Dense>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "semsteer/error.hpp"
#include "semsteer/util.hpp"

namespace semsteer::project {

namespace {

using Rows = std::vector<std::vector<double>>;

Rows prepare_rows(const std::vector<DocId>& ids, const std::vector<EmbeddingVector>& vectors, DistanceMetric metric) {
    Rows rows;
    rows.reserve(vectors.size());
    const std::size_t dim = vectors.empty() ? 0 : vectors.front().dim();
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        const auto& v = vectors[i].values;
        if (v.size() != dim) {
            fail(ErrorKind::data, fmt::format("vector dimension mismatch at '{}': {} vs {}", ids[i], v.size(), dim));
        }
        double n2 = 0.0;
        for (double x : v) {
            if (!std::isfinite(x)) fail(ErrorKind::data, fmt::format("non-finite input vector for '{}'", ids[i]));
            n2 += x * x;
        }
        auto row = v;
        if (metric == DistanceMetric::cosine && n2 > 0.0) {
            const double inv = 1.0 / std::sqrt(n2);
            for (double& x : row) x *= inv;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

void fix_sign(Eigen::VectorXd& loading) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < loading.size(); ++i) {
        if (std::abs(loading[i]) > std::abs(loading[best])) best = i;
    }
    if (loading[best] < 0.0) loading = -loading;
}

// ---------------------------------------------------------------------------
// neighbor_embedding

struct Edge {
    std::size_t head;
    std::size_t tail;
    double weight;
};

std::vector<Edge> fuzzy_graph(const Rows& rows, const ProjectionConfig& config) {
    const std::size_t n = rows.size();
    const std::size_t k = static_cast<std::size_t>(config.n_neighbors) - 1;  // n_neighbors counts the point itself
    auto distance = [&](std::size_t i, std::size_t j) {
        double s = 0.0;
        if (config.metric == DistanceMetric::cosine) {
            for (std::size_t t = 0; t < rows[i].size(); ++t) s += rows[i][t] * rows[j][t];
            return std::max(0.0, 1.0 - s);
        }
        for (std::size_t t = 0; t < rows[i].size(); ++t) {
            const double d = rows[i][t] - rows[j][t];
            s += d * d;
        }
        return std::sqrt(s);
    };

    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    const double target = std::log2(static_cast<double>(config.n_neighbors));
    std::vector<std::pair<double, std::size_t>> cand;
    for (std::size_t i = 0; i < n; ++i) {
        cand.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) cand.emplace_back(distance(i, j), j);
        }
        std::partial_sort(cand.begin(), cand.begin() + static_cast<long>(k), cand.end());
        cand.resize(k);
        double rho = 0.0;
        for (const auto& [d, j] : cand) {
            if (d > 0.0) {
                rho = d;
                break;
            }
        }
        double lo = 0.0, hi = std::numeric_limits<double>::infinity(), sigma = 1.0;
        for (int it = 0; it < 64; ++it) {
            double sum = 0.0;
            for (const auto& [d, j] : cand) sum += std::exp(-std::max(0.0, d - rho) / sigma);
            if (std::abs(sum - target) < 1e-5) break;
            if (sum > target) {
                hi = sigma;
                sigma = (lo + hi) / 2.0;
            } else {
                lo = sigma;
                sigma = std::isinf(hi) ? sigma * 2.0 : (lo + hi) / 2.0;
            }
        }
        double mean_d = 0.0;
        for (const auto& [d, j] : cand) mean_d += d;
        mean_d /= static_cast<double>(k);
        sigma = std::max(sigma, 1e-3 * mean_d);
        if (sigma <= 0.0) sigma = 1e-3;
        for (const auto& [d, j] : cand) {
            w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = std::exp(-std::max(0.0, d - rho) / sigma);
        }
    }
    const Eigen::MatrixXd wt = w.transpose();
    const Eigen::MatrixXd p = w + wt - w.cwiseProduct(wt);

    std::vector<Edge> edges;
    double max_w = 0.0;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        for (Eigen::Index j = 0; j < p.cols(); ++j) max_w = std::max(max_w, p(i, j));
    }
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        for (Eigen::Index j = 0; j < p.cols(); ++j) {
            if (i != j && p(i, j) > 0.0 && p(i, j) >= max_w / config.n_epochs) {
                edges.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j), p(i, j)});
            }
        }
    }
    return edges;
}

std::vector<Point2> neighbor_embedding(const Rows& rows, const ProjectionConfig& config) {
    const std::size_t n = rows.size();
    const auto [a, b] = fit_kernel_ab(config.min_dist);
    const auto edges = fuzzy_graph(rows, config);

    Rng rng(mix_seed(config.seed, std::string_view("neighbor_embedding")));
    auto pos = pca_2d(rows);
    double max_abs = 0.0;
    for (const auto& p : pos) max_abs = std::max({max_abs, std::abs(p.x), std::abs(p.y)});
    const double scale = max_abs > 0.0 ? 10.0 / max_abs : 1.0;
    for (auto& p : pos) {
        p.x = p.x * scale + 1e-2 * rng.normal();
        p.y = p.y * scale + 1e-2 * rng.normal();
    }

    constexpr int kNegative = 5;
    double max_w = 0.0;
    for (const auto& e : edges) max_w = std::max(max_w, e.weight);
    std::vector<double> per_sample(edges.size()), next_sample(edges.size()), neg_per(edges.size()), next_neg(edges.size());
    for (std::size_t e = 0; e < edges.size(); ++e) {
        per_sample[e] = max_w / edges[e].weight;
        next_sample[e] = per_sample[e];
        neg_per[e] = per_sample[e] / kNegative;
        next_neg[e] = neg_per[e];
    }
    auto clip = [](double g) { return std::clamp(g, -4.0, 4.0); };

    for (int epoch = 1; epoch <= config.n_epochs; ++epoch) {
        const double lr = 1.0 - static_cast<double>(epoch - 1) / config.n_epochs;
        for (std::size_t e = 0; e < edges.size(); ++e) {
            if (next_sample[e] > epoch) continue;
            auto& pi = pos[edges[e].head];
            auto& pj = pos[edges[e].tail];
            double dx = pi.x - pj.x, dy = pi.y - pj.y;
            double d2 = dx * dx + dy * dy;
            if (d2 > 0.0) {
                const double coef = -2.0 * a * b * std::pow(d2, b - 1.0) / (1.0 + a * std::pow(d2, b));
                const double gx = clip(coef * dx) * lr, gy = clip(coef * dy) * lr;
                pi.x += gx;
                pi.y += gy;
                pj.x -= gx;
                pj.y -= gy;
            }
            next_sample[e] += per_sample[e];

            const int n_neg = static_cast<int>((epoch - next_neg[e]) / neg_per[e]);
            for (int s = 0; s < n_neg; ++s) {
                const auto k = static_cast<std::size_t>(rng.below(n));
                if (k == edges[e].head) continue;
                const auto& pk = pos[k];
                dx = pi.x - pk.x;
                dy = pi.y - pk.y;
                d2 = dx * dx + dy * dy;
                double gx = 4.0, gy = 4.0;
                if (d2 > 0.0) {
                    const double coef = 2.0 * b / ((0.001 + d2) * (1.0 + a * std::pow(d2, b)));
                    gx = clip(coef * dx);
                    gy = clip(coef * dy);
                }
                pi.x += gx * lr;
                pi.y += gy * lr;
            }
            next_neg[e] += n_neg * neg_per[e];
        }
    }
    return pos;
}

// ---------------------------------------------------------------------------
// external_adapter

std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') out += "'\\''";
        else out.push_back(c);
    }
    return out + "'";
}

std::vector<Point2> external_adapter(const std::vector<DocId>& ids, const Rows& rows, const ProjectionConfig& config) {
    static std::atomic<unsigned> counter{0};
    const auto dir = std::filesystem::temp_directory_path() /
                     fmt::format("semsteer-proj-{}-{}", static_cast<long>(::getpid()), counter++);
    std::filesystem::create_directories(dir);
    const auto in_path = dir / "request.jsonl";
    const auto out_path = dir / "response.jsonl";
    struct Cleanup {
        std::filesystem::path p;
        ~Cleanup() {
            std::error_code ec;
            std::filesystem::remove_all(p, ec);
        }
    } cleanup{dir};

    {
        std::ofstream in(in_path);
        in << nlohmann::json{{"config", config}}.dump() << "\n";
        for (std::size_t i = 0; i < ids.size(); ++i) in << nlohmann::json{{"id", ids[i]}, {"vector", rows[i]}}.dump() << "\n";
        if (!in) fail(ErrorKind::io, "cannot write projector request " + in_path.string());
    }
    const std::string cmd =
        config.external_command + " < " + shell_quote(in_path.string()) + " > " + shell_quote(out_path.string());
    const int status = std::system(cmd.c_str());
    const int code = status == -1 ? -1 : (WIFEXITED(status) ? WEXITSTATUS(status) : 128);
    if (code != 0) {
        fail(ErrorKind::internal, fmt::format("external projector exited with status {}", code),
             {{"command", config.external_command}, {"exit_code", code}});
    }

    std::map<DocId, Point2> got;
    std::ifstream out(out_path);
    std::string line;
    int line_no = 0;
    while (std::getline(out, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            got[j.at("id").get<std::string>()] = {j.at("x").get<double>(), j.at("y").get<double>()};
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::data, fmt::format("external projector output line {}: {}", line_no, e.what()));
        }
    }
    std::vector<Point2> pts;
    pts.reserve(ids.size());
    for (const auto& id : ids) {
        const auto it = got.find(id);
        if (it == got.end()) fail(ErrorKind::data, "external projector returned no position for '" + id + "'");
        pts.push_back(it->second);
    }
    if (got.size() != ids.size()) fail(ErrorKind::data, "external projector returned positions for unknown ids");
    return pts;
}

} // namespace

std::vector<Point2> pca_2d(const Rows& rows) {
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto d = n ? static_cast<Eigen::Index>(rows.front().size()) : 0;
    Eigen::MatrixXd x(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) x(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    x.rowwise() -= x.colwise().mean();

    // Loadings of the top two directions, from whichever Gram form is smaller.
    Eigen::MatrixXd loadings(d, 2);
    if (d <= n) {
        const Eigen::MatrixXd cov = x.transpose() * x;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
        for (int c = 0; c < 2; ++c) {
            const Eigen::Index col = d - 1 - c;
            loadings.col(c) = col >= 0 && eig.eigenvalues()[col] > 0.0 ? Eigen::VectorXd(eig.eigenvectors().col(col))
                                                                        : Eigen::VectorXd::Zero(d);
        }
    } else {
        const Eigen::MatrixXd gram = x * x.transpose();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
        for (int c = 0; c < 2; ++c) {
            const Eigen::Index col = n - 1 - c;
            const double lambda = col >= 0 ? eig.eigenvalues()[col] : 0.0;
            if (lambda > 1e-12 * std::max(1.0, eig.eigenvalues()[n - 1])) {
                Eigen::VectorXd v = x.transpose() * eig.eigenvectors().col(col);
                loadings.col(c) = v / v.norm();
            } else {
                loadings.col(c).setZero();
            }
        }
    }
    for (int c = 0; c < 2; ++c) {
        Eigen::VectorXd l = loadings.col(c);
        if (l.size()) fix_sign(l);
        loadings.col(c) = l;
    }
    const Eigen::MatrixXd coords = x * loadings;
    std::vector<Point2> out(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = {coords(i, 0), coords(i, 1)};
    return out;
}

std::pair<double, double> fit_kernel_ab(double min_dist, double spread) {
    constexpr int kPoints = 300;
    std::vector<double> xs(kPoints), ys(kPoints);
    for (int i = 0; i < kPoints; ++i) {
        xs[i] = 3.0 * spread * i / (kPoints - 1);
        ys[i] = xs[i] < min_dist ? 1.0 : std::exp(-(xs[i] - min_dist) / spread);
    }
    auto residuals = [&](double a, double b, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
        double sse = 0.0;
        for (int i = 0; i < kPoints; ++i) {
            const double x = xs[i];
            const double u = x > 0.0 ? std::pow(x, 2.0 * b) : 0.0;
            const double den = 1.0 + a * u;
            r[i] = 1.0 / den - ys[i];
            sse += r[i] * r[i];
            if (jac) {
                (*jac)(i, 0) = -u / (den * den);
                (*jac)(i, 1) = x > 0.0 ? -a * u * 2.0 * std::log(x) / (den * den) : 0.0;
            }
        }
        return sse;
    };
    double a = 1.0, b = 1.0, lambda = 1e-3;
    Eigen::VectorXd r(kPoints);
    Eigen::MatrixXd jac(kPoints, 2);
    double sse = residuals(a, b, r, &jac);
    for (int it = 0; it < 200; ++it) {
        const Eigen::Matrix2d jtj = jac.transpose() * jac;
        const Eigen::Vector2d g = jac.transpose() * r;
        Eigen::Matrix2d damped = jtj;
        damped(0, 0) *= 1.0 + lambda;
        damped(1, 1) *= 1.0 + lambda;
        const Eigen::Vector2d step = damped.ldlt().solve(-g);
        const double na = a + step[0], nb = b + step[1];
        Eigen::VectorXd nr(kPoints);
        const double nsse = (na > 0.0 && nb > 0.0) ? residuals(na, nb, nr, nullptr) : std::numeric_limits<double>::infinity();
        if (nsse < sse) {
            a = na;
            b = nb;
            lambda *= 0.3;
            const bool converged = sse - nsse < 1e-14;
            sse = residuals(a, b, r, &jac);
            if (converged) break;
        } else {
            lambda *= 10.0;
            if (lambda > 1e12) break;
        }
    }
    return {a, b};
}

ProjectionLayout project_vectors(const std::vector<DocId>& ids, const std::vector<EmbeddingVector>& vectors,
                                 const ProjectionConfig& config, std::string name) {
    validate(config);
    if (ids.size() != vectors.size()) fail(ErrorKind::internal, "ids and vectors differ in length");
    const std::size_t n = ids.size();
    std::size_t needed = 3;
    if (config.backend == ProjectionBackend::neighbor_embedding) needed = std::max<std::size_t>(3, config.n_neighbors + 1);
    if (n < needed) {
        fail(ErrorKind::data, fmt::format("too few documents to project: {} (need at least {})", n, needed));
    }
    const auto rows = prepare_rows(ids, vectors, config.metric);

    std::vector<Point2> pts;
    switch (config.backend) {
    case ProjectionBackend::linear_pca: pts = pca_2d(rows); break;
    case ProjectionBackend::neighbor_embedding: pts = neighbor_embedding(rows, config); break;
    case ProjectionBackend::external_adapter: pts = external_adapter(ids, rows, config); break;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(pts[i].x) || !std::isfinite(pts[i].y)) {
            fail(ErrorKind::internal, "projection produced a non-finite coordinate for '" + ids[i] + "'");
        }
    }
    ProjectionLayout layout;
    layout.name = std::move(name);
    layout.ids = ids;
    layout.points = std::move(pts);
    layout.config_used = config;
    return layout;
}

ProjectionLayout project(const std::vector<EmbeddingRecord>& records, const ProjectionConfig& config, Which which,
                         std::string name) {
    std::vector<DocId> ids;
    std::vector<EmbeddingVector> vectors;
    ids.reserve(records.size());
    vectors.reserve(records.size());
    for (const auto& r : records) {
        ids.push_back(r.doc_id);
        vectors.push_back(which == Which::base ? r.base : r.steered);
    }
    return project_vectors(ids, vectors, config, std::move(name));
}

std::vector<std::vector<std::size_t>> knn_indices(std::span<const Point2> points, std::span<const DocId> ids, int k) {
    const std::size_t n = points.size();
    if (k < 1 || static_cast<std::size_t>(k) >= n) {
        fail(ErrorKind::usage, fmt::format("k out of range: {} (need 1 <= k < {})", k, n));
    }
    std::vector<std::vector<std::size_t>> out(n);
    std::vector<std::pair<double, std::size_t>> cand;
    for (std::size_t i = 0; i < n; ++i) {
        cand.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double dx = points[i].x - points[j].x, dy = points[i].y - points[j].y;
            cand.emplace_back(dx * dx + dy * dy, j);
        }
        auto less = [&](const auto& p, const auto& q) {
            if (p.first != q.first) return p.first < q.first;
            return ids[p.second] < ids[q.second];
        };
        std::partial_sort(cand.begin(), cand.begin() + k, cand.end(), less);
        out[i].reserve(static_cast<std::size_t>(k));
        for (int t = 0; t < k; ++t) out[i].push_back(cand[static_cast<std::size_t>(t)].second);
    }
    return out;
}

std::map<DocId, std::vector<DocId>> knn_2d(const ProjectionLayout& layout, int k) {
    const auto idx = knn_indices(layout.points, layout.ids, k);
    std::map<DocId, std::vector<DocId>> out;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        auto& row = out[layout.ids[i]];
        for (auto j : idx[i]) row.push_back(layout.ids[j]);
    }
    return out;
}

} // namespace semsteer::project

#include <doctest.h>

#include <cmath>

#include "semsteer/project.hpp"
#include "semsteer/providers/embedder.hpp"
#include "semsteer/util.hpp"
#include "support.hpp"

using namespace semsteer;

namespace {

std::vector<EmbeddingVector> random_vectors(std::size_t n, std::size_t dim, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<EmbeddingVector> out(n);
    for (auto& v : out) {
        for (std::size_t i = 0; i < dim; ++i) v.values.push_back(rng.normal());
    }
    return out;
}

std::vector<DocId> ids_for(std::size_t n) {
    std::vector<DocId> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back("v" + std::to_string(i + 10));
    return ids;
}

double d2(const Point2& a, const Point2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

} // namespace

TEST_SUITE("project") {

TEST_CASE("PCA recovers a planar configuration exactly") {
    // Four points in the (e2, e4) plane of R^5.
    const std::vector<std::pair<double, double>> plane{{0, 0}, {3, 1}, {-1, 2}, {2, -2}};
    std::vector<EmbeddingVector> vecs;
    for (auto [u, w] : plane) vecs.push_back({{0.0, u, 0.0, w, 0.0}});
    ProjectionConfig c;
    c.metric = DistanceMetric::euclidean;
    const auto layout = project::project_vectors(ids_for(4), vecs, c, "pca");
    REQUIRE(layout.points.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            const double orig = std::hypot(plane[i].first - plane[j].first, plane[i].second - plane[j].second);
            CHECK(d2(layout.points[i], layout.points[j]) == doctest::Approx(orig).epsilon(1e-9));
        }
    }
}

TEST_CASE("layouts are deterministic and total") {
    const auto vecs = random_vectors(40, 12, 8);
    const auto ids = ids_for(40);
    for (auto backend : {ProjectionBackend::linear_pca, ProjectionBackend::neighbor_embedding}) {
        ProjectionConfig c;
        c.backend = backend;
        c.n_neighbors = 8;
        c.n_epochs = 60;
        c.seed = 4;
        const auto a = project::project_vectors(ids, vecs, c, "a");
        const auto b = project::project_vectors(ids, vecs, c, "a");
        CHECK(a == b);
        CHECK(a.points.size() == 40);
        CHECK(a.ids == ids);
        for (const auto& p : a.points) CHECK((std::isfinite(p.x) && std::isfinite(p.y)));
    }
}

TEST_CASE("neighbor embedding depends on the seed") {
    const auto vecs = random_vectors(30, 6, 2);
    ProjectionConfig c;
    c.backend = ProjectionBackend::neighbor_embedding;
    c.n_neighbors = 6;
    c.n_epochs = 50;
    c.seed = 1;
    const auto a = project::project_vectors(ids_for(30), vecs, c);
    c.seed = 2;
    const auto b = project::project_vectors(ids_for(30), vecs, c);
    CHECK(a.points != b.points);
}

TEST_CASE("neighbor embedding separates well separated clusters") {
    Rng rng(12);
    std::vector<EmbeddingVector> vecs;
    for (int g = 0; g < 2; ++g) {
        for (int i = 0; i < 20; ++i) {
            EmbeddingVector v;
            for (int d = 0; d < 8; ++d) v.values.push_back((d == g ? 10.0 : 0.0) + rng.normal() * 0.3);
            vecs.push_back(v);
        }
    }
    ProjectionConfig c;
    c.backend = ProjectionBackend::neighbor_embedding;
    c.metric = DistanceMetric::euclidean;
    const auto layout = project::project_vectors(ids_for(40), vecs, c);
    const auto nn = project::knn_2d(layout, 5);
    int same = 0;
    for (std::size_t i = 0; i < 40; ++i) {
        for (const auto& j : nn.at(layout.ids[i])) {
            const auto jdx = static_cast<std::size_t>(std::stoi(j.substr(1)) - 10);
            same += (jdx < 20) == (i < 20);
        }
    }
    CHECK(same == 200);
}

TEST_CASE("kernel fit matches the usual min_dist 0.1 values") {
    const auto [a, b] = project::fit_kernel_ab(0.1);
    CHECK(a == doctest::Approx(1.577).epsilon(0.01));
    CHECK(b == doctest::Approx(0.895).epsilon(0.01));
}

TEST_CASE("too few documents") {
    const auto vecs = random_vectors(2, 4, 1);
    CHECK_ERROR_KIND(project::project_vectors(ids_for(2), vecs, ProjectionConfig{}), ErrorKind::data);
    ProjectionConfig c;
    c.backend = ProjectionBackend::neighbor_embedding;
    c.n_neighbors = 15;
    const auto ten = random_vectors(10, 4, 1);
    CHECK_ERROR_KIND(project::project_vectors(ids_for(10), ten, c), ErrorKind::data);
}

TEST_CASE("dimension mismatch") {
    auto vecs = random_vectors(5, 4, 1);
    vecs[3].values.pop_back();
    CHECK_ERROR_KIND(project::project_vectors(ids_for(5), vecs, ProjectionConfig{}), ErrorKind::data);
}

TEST_CASE("knn on three collinear points") {
    ProjectionLayout l;
    l.ids = {"p0", "p1", "p3"};
    l.points = {{0, 0}, {1, 0}, {3, 0}};
    const auto nn = project::knn_2d(l, 1);
    CHECK(nn.at("p0") == std::vector<DocId>{"p1"});
    CHECK(nn.at("p1") == std::vector<DocId>{"p0"});
    CHECK(nn.at("p3") == std::vector<DocId>{"p1"});

    const auto all = project::knn_2d(l, 2);
    for (const auto& [id, ns] : all) {
        CHECK(ns.size() == 2);
        CHECK(std::find(ns.begin(), ns.end(), id) == ns.end());
        CHECK(ns[0] != ns[1]);
    }
    CHECK_ERROR_KIND(project::knn_2d(l, 3), ErrorKind::usage);
}

TEST_CASE("knn ties go to the smaller id") {
    ProjectionLayout l;
    l.ids = {"c", "b", "a", "z"};
    l.points = {{1, 1}, {1, 1}, {1, 1}, {0, 0}};
    const auto nn = project::knn_2d(l, 2);
    CHECK(nn.at("z") == std::vector<DocId>{"a", "b"});
    CHECK(nn.at("c") == std::vector<DocId>{"a", "b"});
    CHECK(nn.at("a") == std::vector<DocId>{"b", "c"});
}

TEST_CASE("external adapter protocol") {
    std::vector<EmbeddingVector> vecs{{{1.0, 2.0, 3.0}}, {{4.0, 5.0, 6.0}}, {{7.0, 8.0, 9.0}}};
    ProjectionConfig c;
    c.backend = ProjectionBackend::external_adapter;
    c.metric = DistanceMetric::euclidean;
    c.external_command = "python3 " + testsupport::data_path("first_two_adapter.py");
    const auto layout = project::project_vectors(ids_for(3), vecs, c, "ext");
    CHECK(layout.points[1] == Point2{4.0, 5.0});
    CHECK(layout.points[2] == Point2{7.0, 8.0});

    c.seed = 13;
    bool thrown = false;
    try {
        project::project_vectors(ids_for(3), vecs, c);
    } catch (const Error& e) {
        thrown = true;
        CHECK(e.kind() == ErrorKind::internal);
        CHECK(e.detail().at("exit_code") == 3);
    }
    CHECK(thrown);

    c.seed = 0;
    c.external_command = "true";
    CHECK_ERROR_KIND(project::project_vectors(ids_for(3), vecs, c), ErrorKind::data);
}

TEST_CASE("project over records picks base or steered") {
    const auto base = random_vectors(6, 5, 1);
    const auto steered = random_vectors(6, 5, 2);
    std::vector<EmbeddingRecord> recs;
    const auto ids = ids_for(6);
    for (std::size_t i = 0; i < 6; ++i) recs.push_back({ids[i], base[i], std::nullopt, steered[i]});
    ProjectionConfig c;
    CHECK(project::project(recs, c, project::Which::base).points == project::project_vectors(ids, base, c).points);
    CHECK(project::project(recs, c, project::Which::steered).points == project::project_vectors(ids, steered, c).points);
}

}  // TEST_SUITE

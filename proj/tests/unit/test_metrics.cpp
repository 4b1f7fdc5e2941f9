#include <doctest.h>

#include <cmath>
#include <numbers>

#include "semsteer/metrics.hpp"
#include "semsteer/util.hpp"
#include "support.hpp"

using namespace semsteer;
using testsupport::oracle_nc;
using testsupport::oracle_silhouette;

namespace {

ProjectionLayout layout_of(const std::vector<Point2>& pts, const std::vector<std::string>& ids) {
    ProjectionLayout l;
    l.name = "t";
    l.ids = ids;
    l.points = pts;
    return l;
}

std::vector<std::string> ids_for(std::size_t n) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back("p" + std::to_string(100 + i));
    return ids;
}

metrics::Labels label_map(const std::vector<std::string>& ids, const std::vector<std::string>& labels) {
    metrics::Labels m;
    for (std::size_t i = 0; i < ids.size(); ++i) m[ids[i]] = labels[i];
    return m;
}

} // namespace

TEST_SUITE("metrics") {

TEST_CASE("two well separated pairs") {
    const std::vector<Point2> pts{{0, 0}, {0, 1}, {10, 0}, {10, 1}};
    const std::vector<std::string> labels{"A", "A", "B", "B"};
    const double sil = metrics::silhouette_scaled(pts, labels);
    CHECK(std::abs(sil - 1.8005) < 1e-4);
    CHECK(std::abs(sil - oracle_silhouette(pts, labels)) < 1e-12);
    // s_i = (b - a) / b with a = 1, b = (10 + sqrt(101)) / 2
    const double b = (10.0 + std::sqrt(101.0)) / 2.0;
    CHECK(sil == doctest::Approx(2.0 * (b - 1.0) / b).epsilon(1e-12));
}

TEST_CASE("singleton clusters contribute zero") {
    const std::vector<Point2> pts{{0, 0}, {5, 5}};
    CHECK(metrics::silhouette_scaled(pts, std::vector<std::string>{"A", "B"}) == 0.0);
}

TEST_CASE("a single label is rejected") {
    const std::vector<Point2> pts{{0, 0}, {1, 1}, {2, 2}};
    CHECK_ERROR_KIND(metrics::silhouette_scaled(pts, std::vector<std::string>{"A", "A", "A"}), ErrorKind::data);
}

TEST_CASE("neighborhood consistency on the 1D hand example") {
    const std::vector<Point2> pts{{0, 0}, {1, 0}, {1.5, 0}, {3, 0}};
    const auto ids = ids_for(4);
    const std::vector<std::string> labels{"A", "A", "B", "B"};
    CHECK(metrics::neighborhood_consistency(pts, ids, labels, 1) == 0.5);
    CHECK(metrics::neighborhood_consistency(layout_of(pts, ids), label_map(ids, labels), 1) == 0.5);
}

TEST_CASE("one label gives NC of 1") {
    const std::vector<Point2> pts{{0, 0}, {1, 3}, {2, 1}, {7, 7}, {4, 4}};
    const auto ids = ids_for(5);
    const std::vector<std::string> labels(5, "A");
    for (int k = 1; k < 5; ++k) CHECK(metrics::neighborhood_consistency(pts, ids, labels, k) == 1.0);
}

TEST_CASE("NC rejects k outside [1, n)") {
    const std::vector<Point2> pts{{0, 0}, {1, 0}, {2, 0}};
    const auto ids = ids_for(3);
    const std::vector<std::string> labels{"A", "B", "A"};
    CHECK_ERROR_KIND(metrics::neighborhood_consistency(pts, ids, labels, 3), ErrorKind::usage);
    CHECK_ERROR_KIND(metrics::neighborhood_consistency(pts, ids, labels, 0), ErrorKind::usage);
}

TEST_CASE("NC ignores documents without a label") {
    const std::vector<Point2> pts{{0, 0}, {1, 0}, {1.5, 0}, {3, 0}, {0.5, 0}};
    const auto ids = ids_for(5);
    metrics::Labels labels{{ids[0], "A"}, {ids[1], "A"}, {ids[2], "B"}, {ids[3], "B"}};
    CHECK(metrics::neighborhood_consistency(layout_of(pts, ids), labels, 1) == 0.5);
}

TEST_CASE("randomized agreement with brute force, ties included") {
    Rng rng(99);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 3 + rng.below(10);
        const std::size_t n_labels = 2 + rng.below(std::min<std::size_t>(3, n - 1));
        std::vector<Point2> pts;
        std::vector<std::string> labels;
        const bool grid = trial % 2 == 0;  // integer grid => many distance ties
        for (std::size_t i = 0; i < n; ++i) {
            if (grid) pts.push_back({static_cast<double>(rng.below(4)), static_cast<double>(rng.below(4))});
            else pts.push_back({rng.normal() * 3, rng.normal() * 3});
            labels.push_back(std::string(1, static_cast<char>('A' + (i < n_labels ? i : rng.below(n_labels)))));
        }
        const auto ids = ids_for(n);
        CHECK(std::abs(metrics::silhouette_scaled(pts, labels) - oracle_silhouette(pts, labels)) < 1e-9);
        for (int k = 1; k < static_cast<int>(n); ++k) {
            CHECK(metrics::neighborhood_consistency(pts, ids, labels, k) == oracle_nc(pts, ids, labels, k));
        }
    }
}

TEST_CASE("ranges and invariances") {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 6 + rng.below(20);
        std::vector<Point2> pts;
        std::vector<std::string> labels;
        for (std::size_t i = 0; i < n; ++i) {
            pts.push_back({rng.normal(), rng.normal()});
            labels.push_back(i < 2 ? (i == 0 ? "x" : "y") : (rng.below(2) ? "x" : "y"));
        }
        const auto ids = ids_for(n);
        const double sil = metrics::silhouette_scaled(pts, labels);
        const double nc = metrics::neighborhood_consistency(pts, ids, labels, 3);
        CHECK(sil >= -2.0);
        CHECK(sil <= 2.0);
        CHECK(nc >= 0.0);
        CHECK(nc <= 1.0);

        const double th = rng.uniform() * 2 * std::numbers::pi;
        std::vector<Point2> moved;
        for (const auto& p : pts) {
            moved.push_back({std::cos(th) * p.x - std::sin(th) * p.y + 17.0, std::sin(th) * p.x + std::cos(th) * p.y - 3.0});
        }
        CHECK(std::abs(metrics::silhouette_scaled(moved, labels) - sil) < 1e-9);
        CHECK(std::abs(metrics::neighborhood_consistency(moved, ids, labels, 3) - nc) < 1e-9);

        std::vector<std::string> renamed;
        for (const auto& l : labels) renamed.push_back(l == "x" ? "zeta" : "alpha");
        CHECK(metrics::silhouette_scaled(pts, renamed) == doctest::Approx(sil).epsilon(1e-12));
        CHECK(metrics::neighborhood_consistency(pts, ids, renamed, 3) == nc);
    }
}

TEST_CASE("deltas pair by seed") {
    metrics::MetricsReport base = metrics::aggregate({{1, 0.21, 0.5}, {2, 0.25, 0.6}}, 10);
    metrics::MetricsReport steered = metrics::aggregate({{2, 0.70, 0.7}, {1, 0.68, 0.6}}, 10);
    const auto d = metrics::deltas(base, steered);
    CHECK(d.delta_sil == doctest::Approx((0.47 + 0.45) / 2));
    CHECK(d.delta_nc == doctest::Approx(0.1));

    const auto same = metrics::deltas(base, base);
    CHECK(same.delta_sil == 0.0);
    CHECK(same.delta_nc == 0.0);

    const auto single = metrics::deltas(metrics::aggregate({{1, 0.21, 0.5}}, 10), metrics::aggregate({{1, 0.68, 0.5}}, 10));
    CHECK(single.delta_sil == doctest::Approx(0.47));
    CHECK_FALSE(single.sil_stats.std.has_value());

    CHECK_ERROR_KIND(metrics::deltas(base, metrics::aggregate({{1, 0.2, 0.5}, {3, 0.2, 0.5}}, 10)), ErrorKind::data);
    CHECK_ERROR_KIND(metrics::deltas(base, metrics::aggregate({{1, 0.2, 0.5}, {2, 0.2, 0.5}}, 5)), ErrorKind::data);
}

TEST_CASE("mean and sample std") {
    const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
    const auto s = metrics::mean_std(v);
    CHECK(s.mean == 2.5);
    REQUIRE(s.std.has_value());
    CHECK(*s.std == doctest::Approx(std::sqrt(5.0 / 3.0)));
    CHECK_FALSE(metrics::mean_std(std::vector<double>{0.3}).std.has_value());
}

TEST_CASE("extension report arithmetic") {
    metrics::Labels ref;
    std::vector<ExtensionDecision> decisions;
    for (int i = 0; i < 10; ++i) {
        const auto id = "d" + std::to_string(i);
        ref[id] = "L1";
        ExtensionDecision d;
        d.doc_id = id;
        if (i < 8) {
            d.assigned_group = i < 6 ? "g1" : "g2";
            d.reason = ExtensionReason::matched;
        }
        decisions.push_back(d);
    }
    const std::map<GroupId, std::string> mapping{{"g1", "L1"}, {"g2", "L2"}};
    const auto r = metrics::extension_report(decisions, ref, mapping);
    CHECK(r.coverage == doctest::Approx(0.8));
    REQUIRE(r.accuracy_augmented.has_value());
    CHECK(*r.accuracy_augmented == doctest::Approx(0.75));
    CHECK(r.accuracy_all == doctest::Approx(0.6));
    CHECK(r.accuracy_all <= *r.accuracy_augmented);

    for (auto& d : decisions) d.assigned_group.reset();
    const auto none = metrics::extension_report(decisions, ref, mapping);
    CHECK(none.coverage == 0.0);
    CHECK_FALSE(none.accuracy_augmented.has_value());
    CHECK(none.accuracy_all == 0.0);
}

TEST_CASE("majority mapping") {
    const std::vector<AnalystGroup> groups{{"g1", {"a", "b", "c"}, 0}, {"g2", {"d"}, 0}, {"g3", {"zz"}, 0}};
    const metrics::Labels ref{{"a", "x"}, {"b", "y"}, {"c", "y"}, {"d", "x"}};
    const auto m = metrics::majority_mapping(groups, ref);
    CHECK(m.at("g1") == "y");
    CHECK(m.at("g2") == "x");
    CHECK_FALSE(m.contains("g3"));
}

TEST_CASE("report csv lists metric rows") {
    const auto r = metrics::aggregate({{1, 0.5, 0.25}, {2, 0.7, 0.5}}, 10);
    const auto csv = metrics::report_csv(r);
    CHECK(csv.find("metric,mean,std") != std::string::npos);
    CHECK(csv.find("sil,") != std::string::npos);
    CHECK(csv.find("nc,") != std::string::npos);
}

}  // TEST_SUITE

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mulinl/models.hpp"
#include "mulinl/rng.hpp"
#include "mulinl/scale.hpp"

using namespace mulinl;

namespace {

DataPoint pt(std::initializer_list<double> coords) {
    Vec y(static_cast<int>(coords.size()));
    int k = 0;
    for (double c : coords) y[k++] = c;
    return {std::move(y), std::nullopt};
}

Hypothesis make_hypothesis(std::initializer_list<double> theta, double alpha) {
    Hypothesis h;
    h.theta = Vec(static_cast<int>(theta.size()));
    int k = 0;
    for (double t : theta) h.theta[k++] = t;
    h.alpha = alpha;
    return h;
}

/// From-scratch oracle for the expansion stop: recomputes every running
/// average with a fresh summation.
int expansion_stop_oracle(const std::vector<int>& counts, double threshold,
                          bool include_first) {
    const int segments = static_cast<int>(counts.size());
    for (int k = 1; k < segments; ++k) {
        double sum = 0.0;
        int terms = 0;
        const int first = include_first ? 0 : 1;
        for (int i = first; i < k; ++i) {
            sum += counts[i];
            ++terms;
        }
        const double mean = terms > 0 ? sum / terms : static_cast<double>(counts[0]);
        if (counts[k] <= threshold * mean) return k;
    }
    return std::max(segments - 1, 1);
}

TrialDistances trial_from_distances(std::vector<double> d, int index = 0) {
    TrialDistances t;
    t.trial_index = index;
    t.distances = std::move(d);
    t.order.resize(t.distances.size());
    std::iota(t.order.begin(), t.order.end(), 0);
    std::sort(t.order.begin(), t.order.end(), [&](int a, int b) {
        if (t.distances[a] != t.distances[b]) return t.distances[a] < t.distances[b];
        return a < b;
    });
    return t;
}

}  // namespace

TEST_CASE("mahalanobis: line with identity covariance") {
    const auto model = make_model(ModelKind::Line2D);
    const auto h = make_hypothesis({1, 0}, 0.0);
    CHECK(mahalanobis(model->lift(pt({5, 7})), h) == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(mahalanobis(model->lift(pt({0, -3})), h) == doctest::Approx(0.0));
}

TEST_CASE("mahalanobis: zero on the structure") {
    const auto model = make_model(ModelKind::Ellipse2D);
    // unit circle: x^2 + y^2 = 1
    auto h = make_hypothesis({0, 0, 1, 0, 1}, 1.0);
    const double n = h.theta.norm();
    h.theta /= n;
    h.alpha /= n;
    CHECK(mahalanobis(model->lift(pt({1, 0})), h) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(mahalanobis(model->lift(pt({std::sqrt(0.5), std::sqrt(0.5)})), h) ==
          doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("mahalanobis: worst case over two carriers") {
    // synthetic bundle with residual/denominator pairs (0.3/1.0) and (0.8/2.0)
    CarrierBundle b;
    Vec x1 = Vec::Zero(9), x2 = Vec::Zero(9);
    x1[0] = 0.3;
    x2[0] = 0.8;
    b.carriers = {x1, x2};
    b.jacobians = {Mat::Zero(9, 4), Mat::Zero(9, 4)};
    b.covariances = {Mat::Identity(9, 9), 4.0 * Mat::Identity(9, 9)};
    Hypothesis h;
    h.theta = Vec::Zero(9);
    h.theta[0] = 1.0;
    h.alpha = 0.0;
    CHECK(mahalanobis(b, h) == doctest::Approx(0.4).epsilon(1e-15));

    const WorstCarrier w = worst_carrier(b, h);
    CHECK(w.carrier == 1);
    CHECK(w.projection == doctest::Approx(0.8));
    CHECK(w.variance == doctest::Approx(4.0));
    // worst-case reduction: at least both per-carrier distances, equals one
    CHECK(w.distance >= 0.3);
    CHECK(w.distance == doctest::Approx(0.8 / 2.0));
}

TEST_CASE("mahalanobis: sign symmetry is exact") {
    Rng rng(31);
    const auto model = make_model(ModelKind::Homography);
    for (int rep = 0; rep < 50; ++rep) {
        Vec y(4);
        for (int k = 0; k < 4; ++k) y[k] = rng.uniform(-5, 5);
        const auto bundle = model->lift({y, std::nullopt});
        Hypothesis h;
        h.theta = Vec(9);
        for (int k = 0; k < 9; ++k) h.theta[k] = rng.gaussian();
        h.theta /= h.theta.norm();
        h.alpha = 0.0;
        Hypothesis neg;
        neg.theta = -h.theta;
        neg.alpha = -h.alpha;
        CHECK(mahalanobis(bundle, h) == mahalanobis(bundle, neg));
    }
}

TEST_CASE("mahalanobis: degenerate variance is clamped and flagged") {
    CarrierBundle b;
    Vec x = Vec::Zero(2);
    x[0] = 1.0;
    b.carriers = {x};
    b.jacobians = {Mat::Zero(2, 2)};
    b.covariances = {Mat::Zero(2, 2)};  // theta^T C theta = 0
    Hypothesis h = make_hypothesis({1, 0}, 0.0);
    bool degenerate = false;
    const double d = mahalanobis(b, h, 1e-15, &degenerate);
    CHECK(degenerate);
    CHECK(d == doctest::Approx(1.0 / std::sqrt(1e-15)));
}

TEST_CASE("mahalanobis: line equivariance under coordinate scaling") {
    Rng rng(8);
    const auto model = make_model(ModelKind::Line2D);
    const auto h = make_hypothesis({0.6, 0.8}, 3.0);
    for (int rep = 0; rep < 20; ++rep) {
        const double x = rng.uniform(-10, 10), y = rng.uniform(-10, 10);
        const double s = 7.5;
        const double d1 = mahalanobis(model->lift(pt({x, y})), h);
        const auto hs = make_hypothesis({0.6, 0.8}, 3.0 * s);
        const double d2 = mahalanobis(model->lift(pt({s * x, s * y})), hs);
        CHECK(d2 == doctest::Approx(s * d1).epsilon(1e-12));
    }
}

TEST_CASE("initial_set_size") {
    CHECK(initial_set_size(600, 5.0, 2) == 30);             // percentage rule
    CHECK(initial_set_size(100, 5.0, 8) == 40);             // floor raised by 5*m_e
    CHECK_FALSE(initial_set_size(15, 5.0, 8).has_value());  // too few points
    CHECK(initial_set_size(1350, 5.0, 2) == 68);
}

TEST_CASE("select_best_trial: argmin with tie-break") {
    std::vector<TrialDistances> trials;
    trials.push_back(trial_from_distances({1, 2, 3, 100}));      // first-3 sum 6
    trials.push_back(trial_from_distances({0.5, 1, 2, 50}, 1));  // first-3 sum 3.5
    CHECK(select_best_trial(trials, 3) == 1);

    // exact fit always wins
    trials.push_back(trial_from_distances({0, 0, 0, 10}, 2));
    CHECK(select_best_trial(trials, 3) == 2);

    // equal sums: lower index wins
    std::vector<TrialDistances> ties;
    ties.push_back(trial_from_distances({1, 1, 4}));
    ties.push_back(trial_from_distances({2, 0, 4}, 1));
    CHECK(select_best_trial(ties, 2) == 0);
}

TEST_CASE("select_best_trial: invariant under point permutation") {
    Rng rng(9);
    for (int rep = 0; rep < 30; ++rep) {
        const int n = 20 + static_cast<int>(rng.below(30));
        std::vector<double> d(n);
        for (auto& v : d) v = rng.uniform(0, 10);
        std::vector<double> shuffled = d;
        for (int i = n - 1; i > 0; --i)
            std::swap(shuffled[i], shuffled[rng.below(i + 1)]);

        std::vector<TrialDistances> a, b;
        a.push_back(trial_from_distances(d));
        a.push_back(trial_from_distances({d.begin(), d.begin() + n / 2}, 1));
        b.push_back(trial_from_distances(shuffled));
        b.push_back(trial_from_distances({d.begin(), d.begin() + n / 2}, 1));
        CHECK(select_best_trial(a, 8) == select_best_trial(b, 8));
        CHECK(initial_sum(a[0], 8) == initial_sum(b[0], 8));
    }
}

TEST_CASE("smallest_sum agrees bit for bit with the sorted prefix") {
    Rng rng(77);
    for (int rep = 0; rep < 50; ++rep) {
        const int n = 5 + static_cast<int>(rng.below(60));
        std::vector<double> d(n);
        for (auto& v : d) v = rng.uniform(0, 100);
        const auto trial = trial_from_distances(d);
        const std::size_t n_eps = 1 + rng.below(n);
        CHECK(smallest_sum(d, n_eps) == initial_sum(trial, n_eps));
    }
}

TEST_CASE("expansion_stop: worked examples") {
    const std::vector<int> a = {30, 28, 25, 5};
    CHECK(expansion_stop(a) == 3);  // 5 / mean(30,28,25) = 0.18
    const std::vector<int> b = {30, 10};
    CHECK(expansion_stop(b) == 1);  // stops immediately
    const std::vector<int> c = {30, 30, 30, 30};
    CHECK(expansion_stop(c) == 3);  // never drops: last index
    const std::vector<int> single = {42};
    CHECK(expansion_stop(single) == 1);
}

TEST_CASE("expansion_stop matches the brute-force oracle") {
    Rng rng(314159);
    for (int rep = 0; rep < 1000; ++rep) {
        const int len = 1 + static_cast<int>(rng.below(12));
        std::vector<int> counts(len);
        counts[0] = 1 + static_cast<int>(rng.below(40));
        for (int i = 1; i < len; ++i) counts[i] = static_cast<int>(rng.below(45));
        for (bool include : {true, false}) {
            CHECK(expansion_stop(counts, 0.5, include) ==
                  expansion_stop_oracle(counts, 0.5, include));
        }
    }
}

TEST_CASE("estimate_scale: dense cluster against a sparse tail") {
    // 200 tight distances then far outliers: the expansion must stop at the
    // cluster boundary and collect exactly the prefix
    Rng rng(21);
    std::vector<double> d;
    for (int i = 0; i < 200; ++i) d.push_back(rng.uniform(0.0, 10.0));
    for (int i = 0; i < 200; ++i) d.push_back(rng.uniform(60.0, 400.0));
    const auto trial = trial_from_distances(d);
    const auto est = estimate_scale(trial, {});

    CHECK_FALSE(est.weak);
    CHECK(est.sigma_hat >= 10.0);
    CHECK(est.sigma_hat < 60.0);
    CHECK(est.collected.size() == 200);

    // sigma equals max k_t * delta_d over the region samples
    double expect = 0.0;
    for (const auto& s : est.samples) {
        if (s.percent < est.region_begin_percent || s.percent > est.region_end_percent) continue;
        expect = std::max(expect, s.k_t * s.delta_d);
    }
    CHECK(est.sigma_hat == doctest::Approx(expect));

    // collected indices are exactly a prefix of the sorted sequence
    for (std::size_t i = 0; i < est.collected.size(); ++i)
        CHECK(est.collected[i] == trial.order[i]);
    CHECK(trial.distances[trial.order[est.collected.size()]] > est.sigma_hat);
}

TEST_CASE("estimate_scale: geometric spread never expands, weak flag set") {
    // ratio 3 growth: every segment after the first holds a single point,
    // so each expansion stops at k = 1 and no region of interest forms
    std::vector<double> d;
    double v = 1.0;
    for (int i = 0; i < 60; ++i) {
        d.push_back(v);
        v *= 3.0;
    }
    const auto trial = trial_from_distances(d);
    const auto est = estimate_scale(trial, {});
    CHECK(est.weak);
    CHECK(est.sigma_hat == doctest::Approx(trial.sorted(rank_for_percent(50.0, d.size()) - 1)));
}

TEST_CASE("estimate_scale: all distances zero collects everything") {
    const auto trial = trial_from_distances(std::vector<double>(80, 0.0));
    const auto est = estimate_scale(trial, {});
    CHECK(est.sigma_hat == 1e-12);
    CHECK(est.clamped);
    CHECK(est.collected.size() == 80);
}

TEST_CASE("estimate_scale: region bounds are reported") {
    Rng rng(4);
    std::vector<double> d;
    for (int i = 0; i < 300; ++i) d.push_back(rng.uniform(0.0, 5.0));
    for (int i = 0; i < 100; ++i) d.push_back(rng.uniform(200.0, 500.0));
    const auto est = estimate_scale(trial_from_distances(d), {});
    CHECK(est.region_begin_percent >= 5.0);
    CHECK(est.region_end_percent <= 50.0);
    CHECK(est.region_begin_percent <= est.region_end_percent);
}

#include "mulinl/scale.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mulinl {

WorstCarrier worst_carrier(const CarrierBundle& bundle, const Hypothesis& h,
                           double variance_floor) {
    WorstCarrier best;
    best.distance = -1.0;
    const int zeta = static_cast<int>(bundle.carriers.size());
    for (int c = 0; c < zeta; ++c) {
        const Vec& x = bundle.carriers[c];
        const Mat& cov = bundle.covariances[c];
        const int m = static_cast<int>(x.size());
        double r = -h.alpha;
        for (int i = 0; i < m; ++i) r += x[i] * h.theta[i];
        double var = 0.0;
        for (int i = 0; i < m; ++i) {
            double s = 0.0;
            for (int j = 0; j < m; ++j) s += cov(i, j) * h.theta[j];
            var += h.theta[i] * s;
        }
        bool clamped = false;
        if (var < variance_floor) {
            var = variance_floor;
            clamped = true;
        }
        const double d = std::abs(r) / std::sqrt(var);
        if (d > best.distance) {
            best.distance = d;
            best.carrier = c;
            best.projection = r + h.alpha;
            best.variance = var;
            best.clamped = clamped;
        }
    }
    return best;
}

double mahalanobis(const CarrierBundle& bundle, const Hypothesis& h, double variance_floor,
                   bool* degenerate) {
    const WorstCarrier w = worst_carrier(bundle, h, variance_floor);
    if (degenerate && w.clamped) *degenerate = true;
    return w.distance;
}

std::optional<std::size_t> initial_set_size(std::size_t n, double epsilon_percent, int m_e) {
    const std::size_t floor5 = 5 * static_cast<std::size_t>(m_e);
    if (n < floor5) return std::nullopt;
    const auto by_percent =
        static_cast<std::size_t>(std::llround(epsilon_percent * static_cast<double>(n) / 100.0));
    return std::max(by_percent, floor5);
}

TrialDistances evaluate_trial(std::span<const CarrierBundle> bundles, const Hypothesis& h,
                              int trial_index, double variance_floor) {
    TrialDistances t;
    t.trial_index = trial_index;
    t.hypothesis = h;
    const std::size_t n = bundles.size();
    t.distances.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        bool clamped = false;
        t.distances[i] = mahalanobis(bundles[i], h, variance_floor, &clamped);
        if (clamped) t.degenerate_variance = true;
    }
    t.order.resize(n);
    std::iota(t.order.begin(), t.order.end(), 0);
    std::sort(t.order.begin(), t.order.end(), [&](int a, int b) {
        if (t.distances[a] != t.distances[b]) return t.distances[a] < t.distances[b];
        return a < b;
    });
    return t;
}

double initial_sum(const TrialDistances& trial, std::size_t n_eps) {
    double s = 0.0;
    for (std::size_t i = 0; i < n_eps && i < trial.order.size(); ++i) s += trial.sorted(i);
    return s;
}

void trial_distance_buffer(std::span<const CarrierBundle> bundles, const Hypothesis& h,
                           double variance_floor, std::vector<double>& out) {
    out.resize(bundles.size());
    for (std::size_t i = 0; i < bundles.size(); ++i)
        out[i] = mahalanobis(bundles[i], h, variance_floor);
}

double smallest_sum(std::span<const double> distances, std::size_t n_eps) {
    static thread_local std::vector<double> scratch;
    scratch.assign(distances.begin(), distances.end());
    n_eps = std::min(n_eps, scratch.size());
    if (n_eps < scratch.size())
        std::nth_element(scratch.begin(), scratch.begin() + n_eps, scratch.end());
    std::sort(scratch.begin(), scratch.begin() + n_eps);
    double s = 0.0;
    for (std::size_t i = 0; i < n_eps; ++i) s += scratch[i];
    return s;
}

int select_best_trial(std::span<const TrialDistances> trials, std::size_t n_eps) {
    int best = -1;
    double best_sum = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < trials.size(); ++j) {
        const double s = initial_sum(trials[j], n_eps);
        if (s < best_sum) {
            best_sum = s;
            best = static_cast<int>(j);
        }
    }
    return best;
}

int expansion_stop(std::span<const int> counts, double threshold, bool include_first) {
    const int segments = static_cast<int>(counts.size());
    double running = include_first ? static_cast<double>(counts[0]) : 0.0;
    int terms = include_first ? 1 : 0;
    for (int k = 1; k < segments; ++k) {
        // average over segments 0..k-1 (or 1..k-1 when n_0 is excluded);
        // at k = 1 the previous segment is n_0 under either reading
        const double mean = terms > 0 ? running / terms : static_cast<double>(counts[0]);
        if (static_cast<double>(counts[k]) <= threshold * mean) return k;
        running += counts[k];
        ++terms;
    }
    return std::max(segments - 1, 1);
}

std::size_t rank_for_percent(double percent, std::size_t n) {
    const auto r = static_cast<long long>(std::llround(percent * static_cast<double>(n) / 100.0));
    return static_cast<std::size_t>(std::clamp<long long>(r, 1, static_cast<long long>(n)));
}

namespace {

/// Segment counts of the sorted distances over a half-open partition
/// [k*dd, (k+1)*dd). Generation stops after the first empty segment, which
/// always triggers the expansion stop anyway.
std::vector<int> segment_counts(const TrialDistances& t, double dd) {
    std::vector<int> counts;
    const std::size_t n = t.order.size();
    std::size_t i = 0;
    for (int seg = 0;; ++seg) {
        const double hi = (seg + 1) * dd;
        int c = 0;
        while (i < n && t.sorted(i) < hi) {
            ++c;
            ++i;
        }
        counts.push_back(c);
        if (i >= n || c == 0) break;
    }
    return counts;
}

}  // namespace

ScaleEstimate estimate_scale(const TrialDistances& winning, const ScaleOptions& opts) {
    ScaleEstimate out;
    const std::size_t n = winning.order.size();

    bool region_started = false;
    double sigma = 0.0;
    for (int j = 0;; ++j) {
        const double pct = opts.epsilon_percent + j;
        if (pct > opts.rank_cap_percent + 1e-9) break;
        const double dd = winning.sorted(rank_for_percent(pct, n) - 1);
        int kt = 1;
        if (dd > 0.0) {
            const auto counts = segment_counts(winning, dd);
            if (!counts.empty() && counts[0] > 0)
                kt = expansion_stop(counts, opts.threshold, opts.include_first);
        }
        out.samples.push_back({pct, dd, kt});
        if (!region_started) {
            if (kt >= 2) {
                region_started = true;
                out.region_begin_percent = pct;
                out.region_end_percent = pct;
                sigma = kt * dd;
            }
        } else {
            if (kt == 1) break;  // the sets can no longer expand
            out.region_end_percent = pct;
            sigma = std::max(sigma, kt * dd);
        }
    }

    if (!region_started) {
        // no expansion inside the cap: fall back to the cap-rank distance
        sigma = winning.sorted(rank_for_percent(opts.rank_cap_percent, n) - 1);
        out.weak = true;
        out.region_begin_percent = out.region_end_percent = opts.rank_cap_percent;
    }
    if (sigma < 1e-12) {
        sigma = 1e-12;  // exact fits: keep the estimate positive
        out.clamped = true;
    }
    out.sigma_hat = sigma;
    for (std::size_t i = 0; i < n; ++i) {
        if (winning.sorted(i) > sigma) break;
        out.collected.push_back(winning.order[i]);
    }
    return out;
}

}  // namespace mulinl

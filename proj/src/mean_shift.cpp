#include "mulinl/mean_shift.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "mulinl/parallel.hpp"

namespace mulinl {

double bandwidth(const CarrierBundle& bundle, const Hypothesis& h, double sigma_hat,
                 double variance_floor) {
    const WorstCarrier w = worst_carrier(bundle, h, variance_floor);
    return sigma_hat * sigma_hat * w.variance;
}

MeanShiftContext::MeanShiftContext(std::span<const double> projections,
                                   std::span<const double> bandwidths, double sigma_hat,
                                   const MeanShiftOptions& opts)
    : sigma_(sigma_hat), opts_(opts) {
    const std::size_t n = projections.size();
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        if (projections[a] != projections[b]) return projections[a] < projections[b];
        return a < b;
    });
    z_.resize(n);
    radius_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        z_[i] = projections[idx[i]];
        radius_[i] = std::sqrt(bandwidths[idx[i]]);
        reach_ = std::max(reach_, radius_[i]);
    }
}

std::optional<double> MeanShiftContext::step(double z) const {
    const auto lo = std::lower_bound(z_.begin(), z_.end(), z - reach_);
    const auto hi = std::upper_bound(z_.begin(), z_.end(), z + reach_);
    double sum = 0.0;
    int count = 0;
    for (auto it = lo; it != hi; ++it) {
        const std::size_t i = static_cast<std::size_t>(it - z_.begin());
        if (std::abs(z - z_[i]) <= radius_[i]) {
            sum += z_[i];
            ++count;
        }
    }
    if (count == 0) return std::nullopt;
    return sum / count;
}

double MeanShiftContext::density(double z) const {
    const auto lo = std::lower_bound(z_.begin(), z_.end(), z - reach_);
    const auto hi = std::upper_bound(z_.begin(), z_.end(), z + reach_);
    double sum = 0.0;
    for (auto it = lo; it != hi; ++it) {
        const std::size_t i = static_cast<std::size_t>(it - z_.begin());
        const double r = radius_[i];
        if (r <= 0.0) continue;
        const double u = (z - z_[i]) * (z - z_[i]) / (r * r);
        if (u <= 1.0) sum += 1.0 - u;
    }
    return sum / (static_cast<double>(z_.size()) * sigma_);
}

std::optional<ModeResult> MeanShiftContext::climb(double z0) const {
    double z = z0;
    auto next = step(z);
    if (!next) return std::nullopt;
    const double tol = opts_.tolerance * sigma_;
    int it = 0;
    while (it < opts_.max_iterations) {
        ++it;
        if (std::abs(*next - z) <= tol) break;  // z is the mode, within tolerance
        const double candidate = *next;
        next = step(candidate);
        if (!next) break;  // window would empty out; stay at the last valid position
        z = candidate;
    }
    return ModeResult{z, density(z), it};
}

std::optional<ModeResult> mean_shift(double z0, std::span<const double> projections,
                                     std::span<const double> bandwidths, double sigma_hat,
                                     const MeanShiftOptions& opts) {
    return MeanShiftContext(projections, bandwidths, sigma_hat, opts).climb(z0);
}

namespace {

/// Draws subsets until solve_elemental accepts one; nullopt after the cap.
std::optional<Hypothesis> sample_hypothesis(std::span<const DataPoint> points,
                                            std::span<const int> pool, const ProblemModel& model,
                                            Rng& rng, int max_attempts) {
    const int m_e = model.elemental_size();
    std::vector<DataPoint> subset(m_e);
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        const auto pick = rng.sample_distinct(m_e, static_cast<int>(pool.size()));
        for (int k = 0; k < m_e; ++k) subset[k] = points[pool[pick[k]]];
        if (auto h = model.solve_elemental(subset)) return h;
    }
    return std::nullopt;
}

void project_all(std::span<const CarrierBundle> bundles, const Hypothesis& h, double sigma_hat,
                 double variance_floor, std::vector<double>& z, std::vector<double>& bw) {
    const std::size_t n = bundles.size();
    z.resize(n);
    bw.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const WorstCarrier w = worst_carrier(bundles[i], h, variance_floor);
        z[i] = w.projection;
        bw[i] = sigma_hat * sigma_hat * w.variance;
    }
}

}  // namespace

std::optional<RecoveredStructure> recover_structure(std::span<const CarrierBundle> bundles,
                                                    std::span<const DataPoint> points,
                                                    const ProblemModel& model, double sigma_hat,
                                                    std::span<const int> collected, int trials,
                                                    std::uint64_t seed,
                                                    const RecoveryOptions& opts) {
    if (static_cast<int>(collected.size()) < model.elemental_size()) return std::nullopt;

    struct TrialOutcome {
        bool valid = false;
        double density = 0.0;
        double mode = 0.0;
        Hypothesis hypothesis;
    };
    std::vector<TrialOutcome> outcomes(trials);
    const int workers = resolve_workers(opts.workers);

    parallel_for(static_cast<std::size_t>(trials), workers, [&](std::size_t t) {
        Rng rng(Rng::stream(seed, t));
        auto h = sample_hypothesis(points, collected, model, rng, opts.max_resample_attempts);
        if (!h) return;
        std::vector<double> z, bw;
        project_all(bundles, *h, sigma_hat, opts.variance_floor, z, bw);
        MeanShiftContext ctx(z, bw, sigma_hat, opts.mean_shift);
        const auto mode = ctx.climb(h->alpha);
        if (!mode) return;  // empty window at the intercept
        outcomes[t] = {true, mode->density, mode->mode, std::move(*h)};
    });

    int best = -1;
    for (int t = 0; t < trials; ++t) {
        if (!outcomes[t].valid) continue;
        if (best < 0 || outcomes[t].density > outcomes[best].density) best = t;
    }
    if (best < 0) return std::nullopt;

    RecoveredStructure rec;
    rec.hypothesis = outcomes[best].hypothesis;
    rec.alpha_mode = outcomes[best].mode;
    rec.density = outcomes[best].density;
    rec.trial_index = best;

    // classify by per-point convergence under the winning trial
    std::vector<double> z, bw;
    project_all(bundles, rec.hypothesis, sigma_hat, opts.variance_floor, z, bw);
    MeanShiftContext ctx(z, bw, sigma_hat, opts.mean_shift);
    const double alpha = rec.alpha_mode;
    const double prefilter = 3.0 * sigma_hat + ctx.max_reach();
    std::vector<char> is_inlier(bundles.size(), 0);
    parallel_for(bundles.size(), workers, [&](std::size_t i) {
        if (std::abs(z[i] - alpha) > prefilter) return;
        const auto mode = ctx.climb(z[i]);  // own window always contains the point
        if (mode && std::abs(mode->mode - alpha) <= sigma_hat) is_inlier[i] = 1;
    });
    for (std::size_t i = 0; i < bundles.size(); ++i)
        if (is_inlier[i]) rec.inliers.push_back(static_cast<int>(i));
    return rec;
}

TlsResult tls_refit(std::span<const CarrierBundle> inliers, const ProblemModel& model,
                    const Hypothesis& initial, const TlsOptions& opts) {
    TlsResult out;
    out.hypothesis = initial;
    const int m = model.carrier_dim();
    const std::size_t n = inliers.size();
    const bool zero_alpha = model.zero_intercept();

    Hypothesis current = initial;
    for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
        out.sweeps = sweep + 1;
        Mat scatter = Mat::Zero(m, m);
        Vec mean = Vec::Zero(m);
        double wsum = 0.0;
        for (const auto& bundle : inliers) {
            const WorstCarrier wc = worst_carrier(bundle, current, opts.variance_floor);
            const double w = 1.0 / wc.variance;
            const Vec& x = bundle.carriers[wc.carrier];
            scatter.selfadjointView<Eigen::Lower>().rankUpdate(x, w);
            mean += w * x;
            wsum += w;
        }
        Mat s = Mat(scatter.selfadjointView<Eigen::Lower>());
        if (!zero_alpha) {
            mean /= wsum;
            s -= wsum * mean * mean.transpose();  // weighted centered scatter
        }
        Eigen::SelfAdjointEigenSolver<Mat> es(s);
        if (es.info() != Eigen::Success || !es.eigenvectors().col(0).allFinite()) {
            out.degenerate = true;
            break;
        }
        Vec theta = es.eigenvectors().col(0);
        if (theta.dot(current.theta) < 0.0) theta = -theta;  // align sign for the delta test
        const double alpha = zero_alpha ? 0.0 : mean.dot(theta);
        const double delta =
            (theta - current.theta).norm() + std::abs(alpha - current.alpha) / std::max(1.0, std::abs(current.alpha));
        current.theta = theta;
        current.alpha = alpha;
        if (delta < opts.tolerance) break;
    }
    if (!out.degenerate) out.hypothesis = current;

    std::vector<double> dist(n);
    for (std::size_t i = 0; i < n; ++i)
        dist[i] = mahalanobis(inliers[i], out.hypothesis, opts.variance_floor);
    if (n == 0) {
        out.sigma_tls = 0.0;
    } else if (opts.scale_mode == TlsScaleMode::MaxDistance) {
        out.sigma_tls = *std::max_element(dist.begin(), dist.end());
    } else {
        // robust deviation: scaled median absolute residual
        std::vector<double> d = dist;
        std::nth_element(d.begin(), d.begin() + d.size() / 2, d.end());
        double med = d[d.size() / 2];
        if (d.size() % 2 == 0) {
            std::nth_element(d.begin(), d.begin() + d.size() / 2 - 1, d.end());
            med = 0.5 * (med + d[d.size() / 2 - 1]);
        }
        out.sigma_tls = 1.4826 * med;
    }
    return out;
}

}  // namespace mulinl

#include "mulinl/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "mulinl/parallel.hpp"
#include "mulinl/rng.hpp"

namespace mulinl {

void EstimatorConfig::validate() const {
    if (trials < 1) throw std::invalid_argument("trials must be >= 1");
    if (!(epsilon_percent > 0.0) || !(epsilon_percent < 50.0))
        throw std::invalid_argument("epsilon must be in (0, 50)");
    if (!(expansion_threshold > 0.0) || !(expansion_threshold < 1.0))
        throw std::invalid_argument("expansion threshold must be in (0, 1)");
    if (!(rank_cap_percent > epsilon_percent) || rank_cap_percent > 100.0)
        throw std::invalid_argument("rank cap must be in (epsilon, 100]");
}

double strength(std::size_t n_in, double sigma_tls, bool* exact_fit) {
    if (sigma_tls < 1e-12) {
        sigma_tls = 1e-12;
        if (exact_fit) *exact_fit = true;
    }
    return static_cast<double>(n_in) / sigma_tls;
}

namespace {

// stream labels for the per-iteration phases
constexpr std::uint64_t kPhaseScale = 1;
constexpr std::uint64_t kPhaseRecovery = 2;

struct BestTrial {
    int index = -1;
    double sum = std::numeric_limits<double>::infinity();
};

std::optional<Hypothesis> draw_hypothesis(std::span<const DataPoint> points,
                                          const ProblemModel& model, Rng& rng,
                                          int max_attempts) {
    const int m_e = model.elemental_size();
    const int n = static_cast<int>(points.size());
    std::vector<DataPoint> subset(m_e);
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        const auto pick = rng.sample_distinct(m_e, n);
        for (int k = 0; k < m_e; ++k) subset[k] = points[pick[k]];
        if (auto h = model.solve_elemental(subset)) return h;
    }
    return std::nullopt;
}

/// Two-pass winning-trial search: per-trial initial sums first (parallel,
/// deterministic per-trial streams), then the winner re-evaluated once.
std::optional<TrialDistances> winning_trial(std::span<const CarrierBundle> bundles,
                                            std::span<const DataPoint> points,
                                            const ProblemModel& model, std::size_t n_eps,
                                            std::uint64_t phase_seed,
                                            const EstimatorConfig& cfg, int workers) {
    const int m = cfg.trials;
    std::vector<double> sums(m, std::numeric_limits<double>::infinity());
    parallel_for(static_cast<std::size_t>(m), workers, [&](std::size_t t) {
        Rng rng(Rng::stream(phase_seed, t));
        const auto h = draw_hypothesis(points, model, rng, cfg.max_resample_attempts);
        if (!h) return;
        static thread_local std::vector<double> buffer;
        trial_distance_buffer(bundles, *h, cfg.variance_floor, buffer);
        sums[t] = smallest_sum(buffer, n_eps);
    });

    BestTrial best;
    for (int t = 0; t < m; ++t) {
        if (sums[t] < best.sum) {
            best.sum = sums[t];
            best.index = t;
        }
    }
    if (best.index < 0) return std::nullopt;

    Rng rng(Rng::stream(phase_seed, static_cast<std::uint64_t>(best.index)));
    const auto h = draw_hypothesis(points, model, rng, cfg.max_resample_attempts);
    return evaluate_trial(bundles, *h, best.index, cfg.variance_floor);
}

}  // namespace

EstimationResult run(std::span<const DataPoint> points, ModelKind kind,
                     const EstimatorConfig& config) {
    config.validate();
    EstimationResult result;
    const auto model = make_model(kind, config.model);
    const int m_e = model->elemental_size();
    const std::size_t n = points.size();
    const int workers = resolve_workers(config.threads);

    std::vector<int> remaining(n);
    std::iota(remaining.begin(), remaining.end(), 0);

    if (n < 5 * static_cast<std::size_t>(m_e)) {
        result.unclassified = remaining;
        result.note = "too-few-points";
        return result;
    }

    int consecutive_failures = 0;
    for (int iteration = 0; remaining.size() >= 10 * static_cast<std::size_t>(m_e); ++iteration) {
        IterationDiagnostics diag;
        diag.iteration = iteration;
        diag.points_remaining = remaining.size();

        std::vector<DataPoint> current;
        current.reserve(remaining.size());
        for (int idx : remaining) current.push_back(points[idx]);

        NormalizationTransform transform;
        std::vector<DataPoint> working;
        if (config.normalize_input) {
            auto norm = normalize(current, *model);
            if (!norm) {
                result.note = "degenerate-normalization";
                result.iterations.push_back(diag);
                break;
            }
            transform = std::move(norm->transform);
            working = std::move(norm->points);
        } else {
            transform = identity_transform(*model);
            working = current;
        }

        std::vector<CarrierBundle> bundles(working.size());
        parallel_for(working.size(), workers,
                     [&](std::size_t i) { bundles[i] = model->lift(working[i]); });

        const auto n_eps = initial_set_size(working.size(), config.epsilon_percent, m_e);
        if (!n_eps) {
            result.note = "too-few-points";
            result.iterations.push_back(diag);
            break;
        }
        diag.initial_set = *n_eps;

        const std::uint64_t scale_seed = Rng::stream(config.seed, kPhaseScale, iteration);
        auto winning = winning_trial(bundles, working, *model, *n_eps, scale_seed, config, workers);
        if (!winning) {
            diag.recovery_failed = true;
            result.iterations.push_back(diag);
            if (++consecutive_failures >= 2) {
                result.note = "sampling-exhausted";
                break;
            }
            continue;
        }
        diag.best_trial = winning->trial_index;

        ScaleOptions sopts;
        sopts.epsilon_percent = config.epsilon_percent;
        sopts.threshold = config.expansion_threshold;
        sopts.include_first = config.include_first_segment;
        sopts.rank_cap_percent = config.rank_cap_percent;
        const ScaleEstimate scale = estimate_scale(*winning, sopts);
        diag.sigma_hat_norm = scale.sigma_hat;
        diag.sigma_hat = scale.sigma_hat / transform.unit_scale();
        diag.region_begin_percent = scale.region_begin_percent;
        diag.region_end_percent = scale.region_end_percent;
        diag.weak = scale.weak;
        diag.region_samples = scale.samples;
        diag.collected = scale.collected.size();

        RecoveryOptions ropts;
        ropts.variance_floor = config.variance_floor;
        ropts.max_resample_attempts = config.max_resample_attempts;
        ropts.mean_shift = config.mean_shift;
        ropts.workers = config.threads;
        const std::uint64_t rec_seed = Rng::stream(config.seed, kPhaseRecovery, iteration);
        auto recovered =
            recover_structure(bundles, working, *model, scale.sigma_hat, scale.collected,
                              config.effective_recovery_trials(), rec_seed, ropts);
        if (!recovered || recovered->inliers.empty()) {
            diag.recovery_failed = true;
            result.iterations.push_back(diag);
            if (++consecutive_failures >= 2) {
                result.note = "recovery-failed";
                break;
            }
            continue;
        }
        consecutive_failures = 0;
        diag.mode_density = recovered->density;
        diag.inliers = recovered->inliers.size();

        std::vector<CarrierBundle> inlier_bundles;
        inlier_bundles.reserve(recovered->inliers.size());
        for (int i : recovered->inliers) inlier_bundles.push_back(bundles[i]);

        TlsOptions topts = config.tls;
        topts.variance_floor = config.variance_floor;
        topts.scale_mode = config.tls_scale;
        Hypothesis init = recovered->hypothesis;
        init.alpha = model->zero_intercept() ? 0.0 : recovered->alpha_mode;
        const TlsResult tls = tls_refit(inlier_bundles, *model, init, topts);

        StructureEstimate st;
        st.iteration = iteration;
        st.weak_scale = scale.weak;
        st.sigma_hat = diag.sigma_hat;
        const Hypothesis original = model->denormalize_hypothesis(tls.hypothesis, transform);
        st.theta = original.theta;
        st.alpha = original.alpha;

        // report the refit scale in original units: largest (or robust)
        // inlier Mahalanobis distance of the denormalized hypothesis
        std::vector<double> dist;
        dist.reserve(recovered->inliers.size());
        for (int i : recovered->inliers) {
            st.inliers.push_back(remaining[i]);
            dist.push_back(
                mahalanobis(model->lift(points[remaining[i]]), original, config.variance_floor));
        }
        if (config.tls_scale == TlsScaleMode::MaxDistance) {
            st.sigma_tls = *std::max_element(dist.begin(), dist.end());
        } else {
            std::vector<double> d = dist;
            std::sort(d.begin(), d.end());
            const std::size_t h = d.size() / 2;
            st.sigma_tls = 1.4826 * (d.size() % 2 ? d[h] : 0.5 * (d[h - 1] + d[h]));
        }
        st.strength = strength(st.inliers.size(), st.sigma_tls, &st.exact_fit);
        if (st.exact_fit) st.sigma_tls = std::max(st.sigma_tls, 1e-12);
        result.structures.push_back(std::move(st));

        // remove classified points; recovered->inliers is ascending
        std::vector<int> next;
        next.reserve(remaining.size() - recovered->inliers.size());
        std::size_t k = 0;
        for (std::size_t i = 0; i < remaining.size(); ++i) {
            if (k < recovered->inliers.size() &&
                static_cast<std::size_t>(recovered->inliers[k]) == i) {
                ++k;
                continue;
            }
            next.push_back(remaining[i]);
        }
        remaining = std::move(next);
        result.iterations.push_back(diag);
    }

    std::stable_sort(result.structures.begin(), result.structures.end(),
                     [](const StructureEstimate& a, const StructureEstimate& b) {
                         return a.strength > b.strength;
                     });
    result.unclassified = remaining;

    if (result.structures.size() >= 2) {
        double best_gap = 0.0;
        int cut = static_cast<int>(result.structures.size());
        for (std::size_t i = 0; i + 1 < result.structures.size(); ++i) {
            const double hi = result.structures[i].strength;
            const double lo = std::max(result.structures[i + 1].strength, 1e-300);
            const double gap = hi / lo;
            if (gap > best_gap) {
                best_gap = gap;
                cut = static_cast<int>(i + 1);
            }
        }
        result.largest_strength_gap = best_gap;
        result.suggested_inlier_count = cut;
    } else {
        result.suggested_inlier_count = static_cast<int>(result.structures.size());
    }
    return result;
}

}  // namespace mulinl

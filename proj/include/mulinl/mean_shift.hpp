#pragma once

#include <span>

#include "mulinl/models.hpp"
#include "mulinl/rng.hpp"
#include "mulinl/scale.hpp"
#include "mulinl/types.hpp"

namespace mulinl {

/// Per-point Epanechnikov bandwidth sigma_hat^2 * theta^T C theta, using the
/// covariance of the carrier with the worst-case distance. Clamped below at
/// sigma_hat^2 * variance_floor.
double bandwidth(const CarrierBundle& bundle, const Hypothesis& h, double sigma_hat,
                 double variance_floor = 1e-15);

struct ModeResult {
    double mode = 0.0;
    double density = 0.0;  // kernel density at the mode, scaled by 1/(n*sigma)
    int iterations = 0;
};

struct MeanShiftOptions {
    double tolerance = 1e-6;  // times sigma_hat
    int max_iterations = 100;
};

/// One-dimensional mean shift over fixed projections with per-point
/// bandwidths. Projections are kept sorted internally so window lookups are
/// range queries; all reductions run in sorted order for reproducibility.
class MeanShiftContext {
public:
    MeanShiftContext(std::span<const double> projections, std::span<const double> bandwidths,
                     double sigma_hat, const MeanShiftOptions& opts = {});

    /// Single update: mean of the projections whose window contains z.
    /// nullopt when the window is empty.
    std::optional<double> step(double z) const;

    /// Kernel density (1/(n*sigma)) * sum of (1 - u) over the window.
    double density(double z) const;

    /// Ascend from z0 to the closest mode; nullopt when the window at z0 is
    /// already empty.
    std::optional<ModeResult> climb(double z0) const;

    double max_reach() const { return reach_; }

private:
    std::vector<double> z_;        // ascending
    std::vector<double> radius_;   // sqrt(bandwidth), matched to z_
    double reach_ = 0.0;           // max radius
    double sigma_ = 1.0;
    MeanShiftOptions opts_;
};

/// Convenience wrapper over MeanShiftContext::climb.
std::optional<ModeResult> mean_shift(double z0, std::span<const double> projections,
                                     std::span<const double> bandwidths, double sigma_hat,
                                     const MeanShiftOptions& opts = {});

struct RecoveryOptions {
    double variance_floor = 1e-15;
    int max_resample_attempts = 400;
    MeanShiftOptions mean_shift;
    int workers = 0;
};

/// Structure recovered from the highest mode among the trials.
struct RecoveredStructure {
    Hypothesis hypothesis;      // theta from the winning elemental subset
    double alpha_mode = 0.0;    // converged mode
    double density = 0.0;
    int trial_index = 0;
    std::vector<int> inliers;   // points whose own mean shift converges
                                // within +-sigma_hat of the mode
};

/// Draws `trials` elemental subsets from the collected points, ascends from
/// each intercept, keeps the highest mode, and classifies inliers by
/// per-point convergence. Trial t uses the stream (seed, t). Returns nullopt
/// when every trial is degenerate or windowless.
std::optional<RecoveredStructure> recover_structure(
    std::span<const CarrierBundle> bundles, std::span<const DataPoint> points,
    const ProblemModel& model, double sigma_hat, std::span<const int> collected, int trials,
    std::uint64_t seed, const RecoveryOptions& opts = {});

enum class TlsScaleMode { MaxDistance, RobustStd };

struct TlsOptions {
    int max_sweeps = 10;
    double tolerance = 1e-10;
    double variance_floor = 1e-15;
    TlsScaleMode scale_mode = TlsScaleMode::MaxDistance;
};

struct TlsResult {
    Hypothesis hypothesis;
    double sigma_tls = 0.0;
    int sweeps = 0;
    bool degenerate = false;  // scatter solve failed; initial hypothesis kept
};

/// Heteroscedastic total least squares over the worst-case carriers:
/// iteratively reweighted eigensolve of the weighted centered scatter.
/// sigma_tls is the largest inlier Mahalanobis distance to the refit
/// hypothesis (or the robust deviation under TlsScaleMode::RobustStd).
TlsResult tls_refit(std::span<const CarrierBundle> inliers, const ProblemModel& model,
                    const Hypothesis& initial, const TlsOptions& opts = {});

}  // namespace mulinl

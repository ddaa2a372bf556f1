#pragma once

#include <cstdint>
#include <string>

#include "mulinl/mean_shift.hpp"
#include "mulinl/models.hpp"
#include "mulinl/scale.hpp"

namespace mulinl {

struct EstimatorConfig {
    int trials = 1000;                 // M, the only mandatory user choice
    double epsilon_percent = 5.0;
    double expansion_threshold = 0.5;
    int recovery_trials = 0;           // 0 -> max(round(M/10), 50)
    double rank_cap_percent = 50.0;
    std::uint64_t seed = 0;
    int threads = 0;                   // 0 = hardware; MULINL_THREADS caps
    bool normalize_input = true;
    bool include_first_segment = true; // expansion running-average variant
    TlsScaleMode tls_scale = TlsScaleMode::MaxDistance;

    double variance_floor = 1e-15;
    int max_resample_attempts = 400;
    MeanShiftOptions mean_shift;
    TlsOptions tls;
    ModelOptions model;

    int effective_recovery_trials() const {
        if (recovery_trials > 0) return recovery_trials;
        return std::max(static_cast<int>(std::llround(trials / 10.0)), 50);
    }

    /// Throws std::invalid_argument when outside the documented ranges.
    void validate() const;
};

/// One recovered structure in original units, strength = n_in / sigma_tls.
struct StructureEstimate {
    std::vector<int> inliers;   // indices into the original input
    Vec theta;
    double alpha = 0.0;
    double sigma_tls = 0.0;
    double strength = 0.0;
    double sigma_hat = 0.0;     // scale estimate of the iteration, original units
    bool exact_fit = false;     // sigma_tls clamped at the floor
    bool weak_scale = false;    // scale estimation hit the rank cap
    int iteration = 0;
};

struct IterationDiagnostics {
    int iteration = 0;
    std::size_t points_remaining = 0;
    std::size_t initial_set = 0;
    double sigma_hat_norm = 0.0;
    double sigma_hat = 0.0;
    double region_begin_percent = 0.0;
    double region_end_percent = 0.0;
    bool weak = false;
    std::vector<RegionSample> region_samples;
    std::size_t collected = 0;
    int best_trial = -1;
    double mode_density = 0.0;
    std::size_t inliers = 0;
    bool recovery_failed = false;
};

struct EstimationResult {
    std::vector<StructureEstimate> structures;  // sorted by strength, descending
    std::vector<int> unclassified;
    std::vector<IterationDiagnostics> iterations;
    double largest_strength_gap = 0.0;  // ratio between consecutive strengths
    int suggested_inlier_count = 0;     // structures above the largest gap
    std::string note;                   // set when the run ends early
};

/// s = n_in / sigma_tls; a vanishing scale is clamped at 1e-12 and flagged.
double strength(std::size_t n_in, double sigma_tls, bool* exact_fit = nullptr);

/// Full estimation loop: iterate scale estimation and mean-shift recovery on
/// the remaining points, remove classified inliers, stop when fewer than
/// 10*m_e points remain or recovery fails twice in a row.
EstimationResult run(std::span<const DataPoint> points, ModelKind kind,
                     const EstimatorConfig& config);

}  // namespace mulinl

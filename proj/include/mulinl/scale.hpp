#pragma once

#include <span>

#include "mulinl/models.hpp"
#include "mulinl/types.hpp"

namespace mulinl {

/// Worst-case projection of one point under a hypothesis: the carrier with
/// the largest Mahalanobis distance, its projection and variance.
struct WorstCarrier {
    double distance = 0.0;
    int carrier = 0;
    double projection = 0.0;   // x^T theta of the worst carrier
    double variance = 0.0;     // theta^T C theta, clamped below
    bool clamped = false;      // variance hit the floor
};

WorstCarrier worst_carrier(const CarrierBundle& bundle, const Hypothesis& h,
                           double variance_floor = 1e-15);

/// Largest Mahalanobis distance over the carriers of one point, scaled by the
/// unknown sigma. `degenerate` is set when a projection variance was clamped.
double mahalanobis(const CarrierBundle& bundle, const Hypothesis& h,
                   double variance_floor = 1e-15, bool* degenerate = nullptr);

/// Initial set size max(round(eps*n/100), 5*m_e); nullopt when n < 5*m_e.
std::optional<std::size_t> initial_set_size(std::size_t n, double epsilon_percent, int m_e);

/// Distances of all current points under one trial hypothesis, with the
/// ascending sort permutation.
struct TrialDistances {
    int trial_index = 0;
    Hypothesis hypothesis;
    std::vector<double> distances;
    std::vector<int> order;
    bool degenerate_variance = false;

    double sorted(std::size_t rank) const { return distances[order[rank]]; }
};

TrialDistances evaluate_trial(std::span<const CarrierBundle> bundles, const Hypothesis& h,
                              int trial_index, double variance_floor = 1e-15);

/// Sum of the first n_eps sorted distances (the trial selection statistic).
double initial_sum(const TrialDistances& trial, std::size_t n_eps);

/// Distances only, into a reusable buffer (the sorted order is not needed
/// while scanning trials).
void trial_distance_buffer(std::span<const CarrierBundle> bundles, const Hypothesis& h,
                           double variance_floor, std::vector<double>& out);

/// Sum of the n_eps smallest values, accumulated in ascending order; agrees
/// bit for bit with initial_sum over the fully sorted sequence.
double smallest_sum(std::span<const double> distances, std::size_t n_eps);

/// Index of the trial minimizing the initial sum; ties go to the lowest index.
int select_best_trial(std::span<const TrialDistances> trials, std::size_t n_eps);

/// Expansion stop index: the smallest k >= 1 whose segment count falls to
/// `threshold` times the running average of the previous segments, or the
/// last available index when the condition never fires. `include_first`
/// keeps n_0 inside the running average.
int expansion_stop(std::span<const int> counts, double threshold = 0.5,
                   bool include_first = true);

struct ScaleOptions {
    double epsilon_percent = 5.0;
    double threshold = 0.5;
    bool include_first = true;
    double rank_cap_percent = 50.0;
};

struct RegionSample {
    double percent = 0.0;
    double delta_d = 0.0;
    int k_t = 0;
};

struct ScaleEstimate {
    double sigma_hat = 0.0;
    double region_begin_percent = 0.0;
    double region_end_percent = 0.0;
    std::vector<int> collected;   // point indices with distance <= sigma_hat
    bool weak = false;            // no expansion before the rank cap
    bool clamped = false;         // sigma_hat raised to the positive floor
    std::vector<RegionSample> samples;
};

/// Scale of the structure behind the winning trial: expansion over growing
/// segment widths, region of interest, sigma_hat as the farthest expansion.
ScaleEstimate estimate_scale(const TrialDistances& winning, const ScaleOptions& opts);

/// 1-based rank of the p-percent order statistic among n values.
std::size_t rank_for_percent(double percent, std::size_t n);

}  // namespace mulinl

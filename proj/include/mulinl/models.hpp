#pragma once

#include <memory>
#include <span>
#include <string_view>

#include "mulinl/types.hpp"

namespace mulinl {

/// Tunable validity thresholds for the model instantiations.
struct ModelOptions {
    double degeneracy_ratio = 1e-8;          // smallest/largest singular value
    double ellipse_max_axis_ratio = 10.0;
    double cylinder_sv_zero_ratio = 0.01;    // s3/s1 bound
    double cylinder_sv_equal_tol = 0.05;     // (s1-s2)/s1 bound
    double cylinder_axis_angle_deg = 1.0;    // d vs D*d alignment
};

/// Problem-model abstraction: dimensions, carrier lifting, elemental solve,
/// hypothesis validity and denormalization for one objective function.
class ProblemModel {
public:
    virtual ~ProblemModel() = default;

    virtual ModelKind kind() const = 0;
    virtual std::string_view name() const = 0;
    virtual int input_dim() const = 0;      // l
    virtual int carrier_dim() const = 0;    // m
    virtual int carrier_count() const = 0;  // zeta

    /// Elemental subset size, ceil(m / zeta) unless overridden.
    virtual int elemental_size() const {
        return (carrier_dim() + carrier_count() - 1) / carrier_count();
    }

    /// True when the intercept is pinned to zero (homography).
    virtual bool zero_intercept() const { return false; }

    /// Coordinate block sizes for normalization (e.g. {2, 2} for image pairs).
    virtual std::vector<int> coordinate_blocks() const = 0;

    /// Carriers, Jacobians and propagated covariances for one point.
    /// Throws std::invalid_argument on dimension mismatch.
    CarrierBundle lift(const DataPoint& point) const;

    /// Hypothesis from a minimal subset; nullopt when the stacked system is
    /// rank deficient or the solution fails the model validity test.
    virtual std::optional<Hypothesis> solve_elemental(std::span<const DataPoint> subset) const;

    virtual bool validate_hypothesis(const Hypothesis& h) const;

    /// Maps a hypothesis expressed in normalized coordinates back to the
    /// original space (exact for all instantiations).
    virtual Hypothesis denormalize_hypothesis(const Hypothesis& h,
                                              const NormalizationTransform& t) const = 0;

protected:
    explicit ProblemModel(const ModelOptions& opts) : opts_(opts) {}

    /// Carrier vectors and Jacobians only; covariance filled in by lift().
    virtual void carriers_and_jacobians(const Vec& y, std::vector<Vec>& carriers,
                                        std::vector<Mat>& jacobians) const = 0;

    ModelOptions opts_;
};

std::unique_ptr<ProblemModel> make_model(ModelKind kind, const ModelOptions& opts = {});
ModelKind model_kind_from_name(std::string_view name);

/// First order covariance propagation J C_y J^T (the unknown sigma^2 factor
/// is carried symbolically by the pipeline).
Mat carrier_covariance(const Mat& jacobian, const Mat& c_y);

struct NormalizedPoints {
    std::vector<DataPoint> points;
    NormalizationTransform transform;
};

/// Hartley normalization per coordinate block: centroid to the origin, mean
/// distance sqrt(2) (2D blocks) or sqrt(3) (3D). Point covariances are
/// propagated and rescaled back to unit determinant. Returns nullopt when a
/// block is degenerate (all coordinates identical).
std::optional<NormalizedPoints> normalize(std::span<const DataPoint> points,
                                          const ProblemModel& model);

NormalizationTransform identity_transform(const ProblemModel& model);

/// Unit-determinant covariance of a normalized point (identity when absent).
Mat normalized_covariance(const DataPoint& original, const NormalizationTransform& t);

}  // namespace mulinl

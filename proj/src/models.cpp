#include "mulinl/models.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace mulinl {

namespace {

constexpr double kPi = 3.14159265358979323846;

/// 3x3 homogeneous matrix of a 2D block transform y' = s*(y - t).
Eigen::Matrix3d block_matrix2(const BlockTransform& b) {
    Eigen::Matrix3d w = Eigen::Matrix3d::Identity();
    w(0, 0) = w(1, 1) = b.scale;
    w(0, 2) = -b.scale * b.offset[0];
    w(1, 2) = -b.scale * b.offset[1];
    return w;
}

Eigen::Matrix4d block_matrix3(const BlockTransform& b) {
    Eigen::Matrix4d w = Eigen::Matrix4d::Identity();
    w(0, 0) = w(1, 1) = w(2, 2) = b.scale;
    w.block<3, 1>(0, 3) = -b.scale * b.offset;
    return w;
}

/// Splits the right-nullspace vector of the stacked system into a unit-norm
/// hypothesis. Returns nullopt when the theta part vanishes.
std::optional<Hypothesis> hypothesis_from_nullvector(const Vec& v, int m, bool zero_intercept) {
    Vec theta = v.head(m);
    const double norm = theta.norm();
    if (norm < 1e-12 * v.norm()) return std::nullopt;
    Hypothesis h;
    h.theta = theta / norm;
    h.alpha = zero_intercept ? 0.0 : v[m] / norm;
    return h;
}

}  // namespace

Mat carrier_covariance(const Mat& jacobian, const Mat& c_y) {
    if (jacobian.cols() != c_y.rows() || c_y.rows() != c_y.cols())
        throw std::invalid_argument("carrier_covariance: shape mismatch");
    return jacobian * c_y * jacobian.transpose();
}

CarrierBundle ProblemModel::lift(const DataPoint& point) const {
    if (point.y.size() != input_dim())
        throw std::invalid_argument(std::string(name()) + ": expected " +
                                    std::to_string(input_dim()) + " coordinates, got " +
                                    std::to_string(point.y.size()));
    CarrierBundle bundle;
    carriers_and_jacobians(point.y, bundle.carriers, bundle.jacobians);
    bundle.covariances.reserve(bundle.jacobians.size());
    if (point.covariance) {
        for (const auto& j : bundle.jacobians)
            bundle.covariances.push_back(carrier_covariance(j, *point.covariance));
    } else {
        for (const auto& j : bundle.jacobians)
            bundle.covariances.push_back(j * j.transpose());
    }
    return bundle;
}

std::optional<Hypothesis> ProblemModel::solve_elemental(std::span<const DataPoint> subset) const {
    const int m = carrier_dim();
    const int rows = carrier_count() * static_cast<int>(subset.size());
    const int cols = zero_intercept() ? m : m + 1;
    if (static_cast<int>(subset.size()) != elemental_size())
        throw std::invalid_argument("solve_elemental: wrong subset size");

    Mat a(rows, cols);
    int r = 0;
    std::vector<Vec> carriers;
    std::vector<Mat> jacobians;
    for (const auto& p : subset) {
        if (p.y.size() != input_dim())
            throw std::invalid_argument("solve_elemental: dimension mismatch");
        carriers.clear();
        jacobians.clear();
        carriers_and_jacobians(p.y, carriers, jacobians);
        for (const auto& x : carriers) {
            a.row(r).head(m) = x.transpose();
            if (!zero_intercept()) a(r, m) = -1.0;
            ++r;
        }
    }

    Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const int last = static_cast<int>(sv.size()) - 1;
    if (!(sv[0] > 0.0) || sv[last] < opts_.degeneracy_ratio * sv[0]) return std::nullopt;

    auto h = hypothesis_from_nullvector(svd.matrixV().col(cols - 1), m, zero_intercept());
    if (!h || !validate_hypothesis(*h)) return std::nullopt;
    return h;
}

bool ProblemModel::validate_hypothesis(const Hypothesis&) const { return true; }

// =============================================================================
// Line2D:  theta_1 x + theta_2 y = alpha
// =============================================================================

class Line2DModel final : public ProblemModel {
public:
    explicit Line2DModel(const ModelOptions& opts) : ProblemModel(opts) {}
    ModelKind kind() const override { return ModelKind::Line2D; }
    std::string_view name() const override { return "line2d"; }
    int input_dim() const override { return 2; }
    int carrier_dim() const override { return 2; }
    int carrier_count() const override { return 1; }
    std::vector<int> coordinate_blocks() const override { return {2}; }

    Hypothesis denormalize_hypothesis(const Hypothesis& h,
                                      const NormalizationTransform& t) const override {
        Eigen::Vector3d line(h.theta[0], h.theta[1], -h.alpha);
        Eigen::Vector3d raw = block_matrix2(t.blocks[0]).transpose() * line;
        Hypothesis out;
        out.theta = raw.head(2);
        const double n = out.theta.norm();
        out.theta /= n;
        out.alpha = -raw[2] / n;
        return out;
    }

protected:
    void carriers_and_jacobians(const Vec& y, std::vector<Vec>& carriers,
                                std::vector<Mat>& jacobians) const override {
        carriers.push_back(y);
        jacobians.push_back(Mat::Identity(2, 2));
    }
};

// =============================================================================
// Ellipse2D:  carrier [x, y, x^2, xy, y^2]
// =============================================================================

class Ellipse2DModel final : public ProblemModel {
public:
    explicit Ellipse2DModel(const ModelOptions& opts) : ProblemModel(opts) {}
    ModelKind kind() const override { return ModelKind::Ellipse2D; }
    std::string_view name() const override { return "ellipse2d"; }
    int input_dim() const override { return 2; }
    int carrier_dim() const override { return 5; }
    int carrier_count() const override { return 1; }
    std::vector<int> coordinate_blocks() const override { return {2}; }

    bool validate_hypothesis(const Hypothesis& h) const override {
        const double a = h.theta[2], b = h.theta[3], c = h.theta[4];
        if (!(4.0 * a * c - b * b > 0.0)) return false;
        // axis ratio from the eigenvalues of the quadratic-form block
        Eigen::Matrix2d q;
        q << a, b / 2.0, b / 2.0, c;
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(q);
        const double l0 = std::abs(es.eigenvalues()[0]);
        const double l1 = std::abs(es.eigenvalues()[1]);
        const double lo = std::min(l0, l1), hi = std::max(l0, l1);
        if (!(lo > 0.0)) return false;
        const double ratio_sq = hi / lo;  // (major/minor)^2
        return ratio_sq <= opts_.ellipse_max_axis_ratio * opts_.ellipse_max_axis_ratio;
    }

    Hypothesis denormalize_hypothesis(const Hypothesis& h,
                                      const NormalizationTransform& t) const override {
        Eigen::Matrix3d q;
        q << h.theta[2], h.theta[3] / 2.0, h.theta[0] / 2.0,
             h.theta[3] / 2.0, h.theta[4], h.theta[1] / 2.0,
             h.theta[0] / 2.0, h.theta[1] / 2.0, -h.alpha;
        const Eigen::Matrix3d w = block_matrix2(t.blocks[0]);
        const Eigen::Matrix3d qr = w.transpose() * q * w;
        Vec raw(5);
        raw << 2.0 * qr(0, 2), 2.0 * qr(1, 2), qr(0, 0), 2.0 * qr(0, 1), qr(1, 1);
        const double n = raw.norm();
        Hypothesis out;
        out.theta = raw / n;
        out.alpha = -qr(2, 2) / n;
        return out;
    }

protected:
    void carriers_and_jacobians(const Vec& y, std::vector<Vec>& carriers,
                                std::vector<Mat>& jacobians) const override {
        const double x = y[0], v = y[1];
        Vec c(5);
        c << x, v, x * x, x * v, v * v;
        Mat j(5, 2);
        j << 1, 0,
             0, 1,
             2 * x, 0,
             v, x,
             0, 2 * v;
        carriers.push_back(std::move(c));
        jacobians.push_back(std::move(j));
    }
};

// =============================================================================
// Cylinder3D:  carrier [x^2, xy, xz, y^2, yz, z^2, x, y, z]
// =============================================================================

class Cylinder3DModel final : public ProblemModel {
public:
    explicit Cylinder3DModel(const ModelOptions& opts) : ProblemModel(opts) {}
    ModelKind kind() const override { return ModelKind::Cylinder3D; }
    std::string_view name() const override { return "cylinder3d"; }
    int input_dim() const override { return 3; }
    int carrier_dim() const override { return 9; }
    int carrier_count() const override { return 1; }
    std::vector<int> coordinate_blocks() const override { return {3}; }

    // Nine-point solve of A vech(P) = 0, with A built from the quadratic-form
    // coefficients of [y 1] P [y 1]^T. Uses the 10x10 scatter eigensolve;
    // this loop runs millions of times during cylinder sampling.
    std::optional<Hypothesis> solve_elemental(std::span<const DataPoint> subset) const override {
        if (subset.size() != 9) throw std::invalid_argument("cylinder solve: need 9 points");
        Eigen::Matrix<double, 10, 10> g = Eigen::Matrix<double, 10, 10>::Zero();
        Eigen::Matrix<double, 10, 1> row;
        for (const auto& p : subset) {
            if (p.y.size() != 3) throw std::invalid_argument("cylinder solve: dimension mismatch");
            const double x = p.y[0], y = p.y[1], z = p.y[2];
            row << x * x, 2 * x * y, 2 * x * z, 2 * x, y * y, 2 * y * z, 2 * y, z * z, 2 * z, 1;
            g.selfadjointView<Eigen::Lower>().rankUpdate(row);
        }
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 10, 10>> es(
            g.selfadjointView<Eigen::Lower>());
        if (es.info() != Eigen::Success) return std::nullopt;
        const auto& ev = es.eigenvalues();
        // rank < 9 means a second near-zero eigenvalue (squared singular values)
        const double thr = opts_.degeneracy_ratio * opts_.degeneracy_ratio * ev[9];
        if (!(ev[9] > 0.0) || ev[1] < thr) return std::nullopt;
        const auto v = es.eigenvectors().col(0);

        Vec raw(9);
        raw << v[0], 2 * v[1], 2 * v[2], v[4], 2 * v[5], v[7], 2 * v[3], 2 * v[6], 2 * v[8];
        const double n = raw.norm();
        if (n < 1e-12) return std::nullopt;
        Hypothesis h;
        h.theta = raw / n;
        h.alpha = -v[9] / n;
        if (!validate_hypothesis(h)) return std::nullopt;
        return h;
    }

    // Quadric validity: two quasi-equal singular values of D, third near zero,
    // and d an eigenvector of D (sign-insensitive).
    bool validate_hypothesis(const Hypothesis& h) const override {
        Eigen::Matrix3d d_block;
        d_block << h.theta[0], h.theta[1] / 2.0, h.theta[2] / 2.0,
                   h.theta[1] / 2.0, h.theta[3], h.theta[4] / 2.0,
                   h.theta[2] / 2.0, h.theta[4] / 2.0, h.theta[5];
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(d_block);
        if (es.info() != Eigen::Success) return false;
        Eigen::Vector3d s = es.eigenvalues().cwiseAbs();
        std::sort(s.data(), s.data() + 3, std::greater<double>());
        if (!(s[0] > 1e-12)) return false;
        if (!(s[2] / s[0] < opts_.cylinder_sv_zero_ratio)) return false;
        if (!((s[0] - s[1]) / s[0] < opts_.cylinder_sv_equal_tol)) return false;

        const Eigen::Vector3d d(h.theta[6] / 2.0, h.theta[7] / 2.0, h.theta[8] / 2.0);
        const double dn = d.norm();
        if (dn <= 1e-10 * s[0]) return true;  // axis through the origin
        const Eigen::Vector3d dd = d_block * d;
        const double ddn = dd.norm();
        if (ddn <= 1e-14 * s[0] * dn) return false;
        const double cosv = std::abs(d.dot(dd)) / (dn * ddn);
        return cosv >= std::cos(opts_.cylinder_axis_angle_deg * kPi / 180.0);
    }

    Hypothesis denormalize_hypothesis(const Hypothesis& h,
                                      const NormalizationTransform& t) const override {
        Eigen::Matrix4d p;
        p << h.theta[0], h.theta[1] / 2, h.theta[2] / 2, h.theta[6] / 2,
             h.theta[1] / 2, h.theta[3], h.theta[4] / 2, h.theta[7] / 2,
             h.theta[2] / 2, h.theta[4] / 2, h.theta[5], h.theta[8] / 2,
             h.theta[6] / 2, h.theta[7] / 2, h.theta[8] / 2, -h.alpha;
        const Eigen::Matrix4d w = block_matrix3(t.blocks[0]);
        const Eigen::Matrix4d pr = w.transpose() * p * w;
        Vec raw(9);
        raw << pr(0, 0), 2 * pr(0, 1), 2 * pr(0, 2), pr(1, 1), 2 * pr(1, 2), pr(2, 2),
               2 * pr(0, 3), 2 * pr(1, 3), 2 * pr(2, 3);
        const double n = raw.norm();
        Hypothesis out;
        out.theta = raw / n;
        out.alpha = -pr(3, 3) / n;
        return out;
    }

protected:
    void carriers_and_jacobians(const Vec& y, std::vector<Vec>& carriers,
                                std::vector<Mat>& jacobians) const override {
        const double x = y[0], v = y[1], z = y[2];
        Vec c(9);
        c << x * x, x * v, x * z, v * v, v * z, z * z, x, v, z;
        Mat j(9, 3);
        j << 2 * x, 0, 0,
             v, x, 0,
             z, 0, x,
             0, 2 * v, 0,
             0, z, v,
             0, 0, 2 * z,
             1, 0, 0,
             0, 1, 0,
             0, 0, 1;
        carriers.push_back(std::move(c));
        jacobians.push_back(std::move(j));
    }
};

// =============================================================================
// FundamentalMatrix:  carrier [x, y, x', y', xx', xy', yx', yy']
// =============================================================================

class FundamentalMatrixModel final : public ProblemModel {
public:
    explicit FundamentalMatrixModel(const ModelOptions& opts) : ProblemModel(opts) {}
    ModelKind kind() const override { return ModelKind::FundamentalMatrix; }
    std::string_view name() const override { return "fundmat"; }
    int input_dim() const override { return 4; }
    int carrier_dim() const override { return 8; }
    int carrier_count() const override { return 1; }
    std::vector<int> coordinate_blocks() const override { return {2, 2}; }

    Hypothesis denormalize_hypothesis(const Hypothesis& h,
                                      const NormalizationTransform& t) const override {
        const Eigen::Matrix3d f = w_second(t).transpose() * to_matrix(h) * w_first(t);
        Vec raw(8);
        raw << f(2, 0), f(2, 1), f(0, 2), f(1, 2), f(0, 0), f(1, 0), f(0, 1), f(1, 1);
        const double n = raw.norm();
        Hypothesis out;
        out.theta = raw / n;
        out.alpha = -f(2, 2) / n;
        return out;
    }

    /// (theta, alpha) as the 3x3 matrix of [x' y' 1] F [x y 1]^T.
    static Eigen::Matrix3d to_matrix(const Hypothesis& h) {
        Eigen::Matrix3d f;
        f << h.theta[4], h.theta[6], h.theta[2],
             h.theta[5], h.theta[7], h.theta[3],
             h.theta[0], h.theta[1], -h.alpha;
        return f;
    }

    static Eigen::Matrix3d w_first(const NormalizationTransform& t) {
        return block_matrix2(t.blocks[0]);
    }
    static Eigen::Matrix3d w_second(const NormalizationTransform& t) {
        return block_matrix2(t.blocks[1]);
    }

protected:
    void carriers_and_jacobians(const Vec& y, std::vector<Vec>& carriers,
                                std::vector<Mat>& jacobians) const override {
        const double x = y[0], v = y[1], xp = y[2], yp = y[3];
        Vec c(8);
        c << x, v, xp, yp, x * xp, x * yp, v * xp, v * yp;
        Mat j = Mat::Zero(8, 4);
        j(0, 0) = 1;
        j(1, 1) = 1;
        j(2, 2) = 1;
        j(3, 3) = 1;
        j(4, 0) = xp; j(4, 2) = x;
        j(5, 0) = yp; j(5, 3) = x;
        j(6, 1) = xp; j(6, 2) = v;
        j(7, 1) = yp; j(7, 3) = v;
        carriers.push_back(std::move(c));
        jacobians.push_back(std::move(j));
    }
};

// =============================================================================
// Homography:  two DLT carriers per correspondence, theta = vec(H^T), alpha = 0
// =============================================================================

class HomographyModel final : public ProblemModel {
public:
    explicit HomographyModel(const ModelOptions& opts) : ProblemModel(opts) {}
    ModelKind kind() const override { return ModelKind::Homography; }
    std::string_view name() const override { return "homography"; }
    int input_dim() const override { return 4; }
    int carrier_dim() const override { return 9; }
    int carrier_count() const override { return 2; }
    // four pairs give 8 equations for the 9-dim nullspace solve
    int elemental_size() const override { return 4; }
    bool zero_intercept() const override { return true; }
    std::vector<int> coordinate_blocks() const override { return {2, 2}; }

    Hypothesis denormalize_hypothesis(const Hypothesis& h,
                                      const NormalizationTransform& t) const override {
        Eigen::Matrix3d hm;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) hm(i, j) = h.theta[3 * i + j];
        const Eigen::Matrix3d w1 = block_matrix2(t.blocks[0]);
        const BlockTransform& b2 = t.blocks[1];
        Eigen::Matrix3d w2inv = Eigen::Matrix3d::Identity();
        w2inv(0, 0) = w2inv(1, 1) = 1.0 / b2.scale;
        w2inv(0, 2) = b2.offset[0];
        w2inv(1, 2) = b2.offset[1];
        const Eigen::Matrix3d hr = w2inv * hm * w1;
        Vec raw(9);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) raw[3 * i + j] = hr(i, j);
        Hypothesis out;
        out.theta = raw / raw.norm();
        out.alpha = 0.0;
        return out;
    }

protected:
    void carriers_and_jacobians(const Vec& y, std::vector<Vec>& carriers,
                                std::vector<Mat>& jacobians) const override {
        const double x = y[0], v = y[1], xp = y[2], yp = y[3];
        Vec c1(9), c2(9);
        c1 << -x, -v, -1, 0, 0, 0, xp * x, xp * v, xp;
        c2 << 0, 0, 0, -x, -v, -1, yp * x, yp * v, yp;
        Mat j1 = Mat::Zero(9, 4), j2 = Mat::Zero(9, 4);
        j1(0, 0) = -1;
        j1(1, 1) = -1;
        j1(6, 0) = xp; j1(6, 2) = x;
        j1(7, 1) = xp; j1(7, 2) = v;
        j1(8, 2) = 1;
        j2(3, 0) = -1;
        j2(4, 1) = -1;
        j2(6, 0) = yp; j2(6, 3) = x;
        j2(7, 1) = yp; j2(7, 3) = v;
        j2(8, 3) = 1;
        carriers.push_back(std::move(c1));
        carriers.push_back(std::move(c2));
        jacobians.push_back(std::move(j1));
        jacobians.push_back(std::move(j2));
    }
};

std::unique_ptr<ProblemModel> make_model(ModelKind kind, const ModelOptions& opts) {
    switch (kind) {
        case ModelKind::Line2D: return std::make_unique<Line2DModel>(opts);
        case ModelKind::Ellipse2D: return std::make_unique<Ellipse2DModel>(opts);
        case ModelKind::Cylinder3D: return std::make_unique<Cylinder3DModel>(opts);
        case ModelKind::FundamentalMatrix: return std::make_unique<FundamentalMatrixModel>(opts);
        case ModelKind::Homography: return std::make_unique<HomographyModel>(opts);
    }
    throw std::invalid_argument("unknown model kind");
}

ModelKind model_kind_from_name(std::string_view name) {
    if (name == "line2d") return ModelKind::Line2D;
    if (name == "ellipse2d") return ModelKind::Ellipse2D;
    if (name == "cylinder3d") return ModelKind::Cylinder3D;
    if (name == "fundmat") return ModelKind::FundamentalMatrix;
    if (name == "homography") return ModelKind::Homography;
    throw std::invalid_argument("unknown model: " + std::string(name));
}

NormalizationTransform identity_transform(const ProblemModel& model) {
    NormalizationTransform t;
    for (int dim : model.coordinate_blocks()) {
        BlockTransform b;
        b.dim = dim;
        t.blocks.push_back(b);
    }
    return t;
}

Mat normalized_covariance(const DataPoint& original, const NormalizationTransform& t) {
    int l = 0;
    for (const auto& b : t.blocks) l += b.dim;
    Vec s(l);
    int at = 0;
    for (const auto& b : t.blocks) {
        for (int k = 0; k < b.dim; ++k) s[at + k] = b.scale;
        at += b.dim;
    }
    Mat c = original.covariance ? *original.covariance : Mat::Identity(l, l);
    Mat out = s.asDiagonal() * c * s.asDiagonal();
    const double u = t.unit_scale();
    return out / (u * u);
}

std::optional<NormalizedPoints> normalize(std::span<const DataPoint> points,
                                          const ProblemModel& model) {
    const auto dims = model.coordinate_blocks();
    const std::size_t n = points.size();
    if (n < 2) return std::nullopt;

    NormalizationTransform t;
    int at = 0;
    for (int dim : dims) {
        BlockTransform b;
        b.dim = dim;
        Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
        for (const auto& p : points)
            for (int k = 0; k < dim; ++k) centroid[k] += p.y[at + k];
        centroid /= static_cast<double>(n);
        double mean_dist = 0.0;
        for (const auto& p : points) {
            double d2 = 0.0;
            for (int k = 0; k < dim; ++k) {
                const double v = p.y[at + k] - centroid[k];
                d2 += v * v;
            }
            mean_dist += std::sqrt(d2);
        }
        mean_dist /= static_cast<double>(n);
        if (!(mean_dist > 0.0)) return std::nullopt;  // all block coordinates identical
        b.offset = centroid;
        b.scale = std::sqrt(static_cast<double>(dim)) / mean_dist;
        t.blocks.push_back(b);
        at += dim;
    }

    // with uniform scales and default identity covariance the propagated
    // unit-determinant covariance is the identity again
    bool uniform = true;
    for (const auto& b : t.blocks)
        if (b.scale != t.blocks[0].scale) uniform = false;

    NormalizedPoints out;
    out.transform = t;
    out.points.reserve(n);
    for (const auto& p : points) {
        DataPoint q;
        q.y = t.apply(p.y);
        if (p.covariance || !uniform) q.covariance = normalized_covariance(p, t);
        out.points.push_back(std::move(q));
    }
    return out;
}

}  // namespace mulinl

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "mulinl/models.hpp"
#include "mulinl/rng.hpp"

using namespace mulinl;

namespace {

DataPoint pt(std::initializer_list<double> coords) {
    Vec y(static_cast<int>(coords.size()));
    int k = 0;
    for (double c : coords) y[k++] = c;
    return {std::move(y), std::nullopt};
}

const std::vector<ModelKind> kAllModels = {ModelKind::Line2D, ModelKind::Ellipse2D,
                                           ModelKind::Cylinder3D, ModelKind::FundamentalMatrix,
                                           ModelKind::Homography};

DataPoint random_point(const ProblemModel& model, Rng& rng, double span = 4.0) {
    Vec y(model.input_dim());
    for (int k = 0; k < y.size(); ++k) y[k] = rng.uniform(-span, span);
    return {std::move(y), std::nullopt};
}

/// Central finite differences of the carrier map, the Jacobian oracle.
Mat numeric_jacobian(const ProblemModel& model, const Vec& y, int carrier, double step = 1e-6) {
    Mat j(model.carrier_dim(), model.input_dim());
    for (int k = 0; k < model.input_dim(); ++k) {
        Vec hi = y, lo = y;
        hi[k] += step;
        lo[k] -= step;
        const Vec chi = model.lift({hi, std::nullopt}).carriers[carrier];
        const Vec clo = model.lift({lo, std::nullopt}).carriers[carrier];
        j.col(k) = (chi - clo) / (2.0 * step);
    }
    return j;
}

/// Noise-free points on a known structure, for exactness checks.
std::vector<DataPoint> exact_structure_points(ModelKind kind, Rng& rng, int count) {
    std::vector<DataPoint> out;
    switch (kind) {
        case ModelKind::Line2D: {
            // y = 0.5 x + 2
            for (int i = 0; i < count; ++i) {
                const double x = rng.uniform(-5, 5);
                out.push_back(pt({x, 0.5 * x + 2.0}));
            }
            break;
        }
        case ModelKind::Ellipse2D: {
            // axis-aligned ellipse, a=3, b=2, center (1, -1)
            for (int i = 0; i < count; ++i) {
                const double t = rng.uniform(0, 6.283185307179586);
                out.push_back(pt({1.0 + 3.0 * std::cos(t), -1.0 + 2.0 * std::sin(t)}));
            }
            break;
        }
        case ModelKind::Cylinder3D: {
            // radius 2 about the axis through (1,2,*) along z
            for (int i = 0; i < count; ++i) {
                const double t = rng.uniform(0, 6.283185307179586);
                const double z = rng.uniform(-3, 3);
                out.push_back(pt({1.0 + 2.0 * std::cos(t), 2.0 + 2.0 * std::sin(t), z}));
            }
            break;
        }
        case ModelKind::FundamentalMatrix: {
            // two views of random 3D points, K = I, second camera rotated + shifted
            const Eigen::Matrix3d r =
                Eigen::AngleAxisd(0.3, Eigen::Vector3d(0.2, 1.0, 0.1).normalized())
                    .toRotationMatrix();
            const Eigen::Vector3d t(0.5, -0.2, 0.1);
            for (int i = 0; i < count; ++i) {
                const Eigen::Vector3d x(rng.uniform(-1, 1), rng.uniform(-1, 1),
                                        rng.uniform(3, 6));
                const Eigen::Vector3d x2 = r * x + t;
                out.push_back(pt({x[0] / x[2], x[1] / x[2], x2[0] / x2[2], x2[1] / x2[2]}));
            }
            break;
        }
        case ModelKind::Homography: {
            Eigen::Matrix3d h;
            h << 1.1, 0.1, 0.4, -0.05, 0.95, -0.3, 1e-3, -2e-3, 1.0;
            for (int i = 0; i < count; ++i) {
                const Eigen::Vector3d p(rng.uniform(-3, 3), rng.uniform(-3, 3), 1.0);
                Eigen::Vector3d q = h * p;
                q /= q[2];
                out.push_back(pt({p[0], p[1], q[0], q[1]}));
            }
            break;
        }
    }
    return out;
}

/// Generating hypothesis of exact_structure_points, unit-norm theta.
Hypothesis exact_structure_hypothesis(ModelKind kind) {
    Hypothesis h;
    switch (kind) {
        case ModelKind::Line2D: {
            h.theta = Vec(2);
            h.theta << -0.5, 1.0;  // -0.5x + y = 2
            h.alpha = 2.0;
            break;
        }
        case ModelKind::Ellipse2D: {
            // (x-1)^2/9 + (y+1)^2/4 = 1  ->  4x^2 + 9y^2 - 8x + 18y - 23 = 0
            h.theta = Vec(5);
            h.theta << -8, 18, 4, 0, 9;
            h.alpha = 23.0;
            break;
        }
        case ModelKind::Cylinder3D: {
            // (x-1)^2 + (y-2)^2 = 4  ->  x^2 + y^2 - 2x - 4y + 1 = 0
            h.theta = Vec(9);
            h.theta << 1, 0, 0, 1, 0, 0, -2, -4, 0;
            h.alpha = -1.0;
            break;
        }
        case ModelKind::FundamentalMatrix: {
            const Eigen::Matrix3d r =
                Eigen::AngleAxisd(0.3, Eigen::Vector3d(0.2, 1.0, 0.1).normalized())
                    .toRotationMatrix();
            const Eigen::Vector3d t(0.5, -0.2, 0.1);
            Eigen::Matrix3d tx;
            tx << 0, -t[2], t[1], t[2], 0, -t[0], -t[1], t[0], 0;
            const Eigen::Matrix3d f = tx * r;
            h.theta = Vec(8);
            h.theta << f(2, 0), f(2, 1), f(0, 2), f(1, 2), f(0, 0), f(1, 0), f(0, 1), f(1, 1);
            h.alpha = -f(2, 2);
            break;
        }
        case ModelKind::Homography: {
            Eigen::Matrix3d hm;
            hm << 1.1, 0.1, 0.4, -0.05, 0.95, -0.3, 1e-3, -2e-3, 1.0;
            h.theta = Vec(9);
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) h.theta[3 * i + j] = hm(i, j);
            h.alpha = 0.0;
            break;
        }
    }
    const double n = h.theta.norm();
    h.theta /= n;
    h.alpha /= n;
    return h;
}

double max_projection_residual(const ProblemModel& model, const DataPoint& p,
                               const Hypothesis& h) {
    const CarrierBundle b = model.lift(p);
    double worst = 0.0;
    for (const auto& x : b.carriers) worst = std::max(worst, std::abs(x.dot(h.theta) - h.alpha));
    return worst;
}

}  // namespace

TEST_CASE("model dimension table") {
    struct Row {
        ModelKind kind;
        int l, m, zeta, m_e;
    };
    const Row rows[] = {
        {ModelKind::Line2D, 2, 2, 1, 2},          {ModelKind::Ellipse2D, 2, 5, 1, 5},
        {ModelKind::Cylinder3D, 3, 9, 1, 9},      {ModelKind::FundamentalMatrix, 4, 8, 1, 8},
        {ModelKind::Homography, 4, 9, 2, 4},
    };
    for (const auto& r : rows) {
        const auto model = make_model(r.kind);
        CAPTURE(model->name());
        CHECK(model->input_dim() == r.l);
        CHECK(model->carrier_dim() == r.m);
        CHECK(model->carrier_count() == r.zeta);
        CHECK(model->elemental_size() == r.m_e);
    }
}

TEST_CASE("lift: line carrier equals the input, identity Jacobian") {
    const auto model = make_model(ModelKind::Line2D);
    const auto b = model->lift(pt({3, 4}));
    REQUIRE(b.carriers.size() == 1);
    CHECK(b.carriers[0][0] == 3.0);
    CHECK(b.carriers[0][1] == 4.0);
    CHECK(b.jacobians[0].isIdentity(0.0));
    CHECK(b.covariances[0].isIdentity(0.0));
}

TEST_CASE("lift: fundamental-matrix monomials") {
    const auto model = make_model(ModelKind::FundamentalMatrix);
    const auto b = model->lift(pt({1, 2, 3, 4}));
    Vec expect(8);
    expect << 1, 2, 3, 4, 3, 4, 6, 8;
    CHECK((b.carriers[0] - expect).norm() == 0.0);
}

TEST_CASE("lift: ellipse carrier and Jacobian column") {
    const auto model = make_model(ModelKind::Ellipse2D);
    const auto b = model->lift(pt({2, 3}));
    Vec expect(5);
    expect << 2, 3, 4, 6, 9;
    CHECK((b.carriers[0] - expect).norm() == 0.0);
    // derivative with respect to x at (2,3): (1, 0, 2x, y, 0) = (1, 0, 4, 3, 0)
    Vec dx(5);
    dx << 1, 0, 4, 3, 0;
    CHECK((b.jacobians[0].col(0) - dx).norm() == 0.0);
}

TEST_CASE("lift: dimension mismatch rejected") {
    const auto model = make_model(ModelKind::Line2D);
    CHECK_THROWS_AS((void)model->lift(pt({1, 2, 3})), std::invalid_argument);
}

TEST_CASE("carrier_covariance basics") {
    CHECK(carrier_covariance(Mat::Identity(2, 2), Mat::Identity(2, 2)).isIdentity(0.0));

    // ellipse at (1, 0): J J^T with hand-computed entries
    const auto model = make_model(ModelKind::Ellipse2D);
    const auto b = model->lift(pt({1, 0}));
    const Mat c = carrier_covariance(b.jacobians[0], Mat::Identity(2, 2));
    Mat expect(5, 5);
    expect << 1, 0, 2, 0, 0,
              0, 1, 0, 1, 0,
              2, 0, 4, 0, 0,
              0, 1, 0, 1, 0,
              0, 0, 0, 0, 0;
    CHECK((c - expect).norm() == 0.0);
    CHECK(c(2, 2) == 4.0);
    CHECK((c - b.covariances[0]).norm() == 0.0);  // lift uses the same product
}

TEST_CASE("jacobians match central finite differences") {
    Rng rng(20240811);
    for (ModelKind kind : kAllModels) {
        const auto model = make_model(kind);
        CAPTURE(model->name());
        for (int trial = 0; trial < 100; ++trial) {
            const DataPoint p = random_point(*model, rng);
            const auto b = model->lift(p);
            for (int c = 0; c < model->carrier_count(); ++c) {
                const Mat numeric = numeric_jacobian(*model, p.y, c);
                const double scale = std::max(1.0, b.jacobians[c].norm());
                CHECK((numeric - b.jacobians[c]).norm() / scale <= 1e-5);
            }
        }
    }
}

TEST_CASE("lift consistency: exact structures project to alpha") {
    Rng rng(7);
    for (ModelKind kind : kAllModels) {
        const auto model = make_model(kind);
        CAPTURE(model->name());
        const Hypothesis h = exact_structure_hypothesis(kind);
        for (const auto& p : exact_structure_points(kind, rng, 50))
            CHECK(max_projection_residual(*model, p, h) <= 1e-9);
    }
}

TEST_CASE("solve_elemental: line through origin at 45 degrees") {
    const auto model = make_model(ModelKind::Line2D);
    const std::vector<DataPoint> subset = {pt({0, 0}), pt({1, 1})};
    const auto h = model->solve_elemental(subset);
    REQUIRE(h.has_value());
    CHECK(std::abs(h->theta.norm() - 1.0) <= 1e-12);
    CHECK(std::abs(h->alpha) <= 1e-12);
    CHECK(std::abs(std::abs(h->theta[0]) - 1.0 / std::sqrt(2.0)) <= 1e-12);
    CHECK(std::abs(h->theta[0] + h->theta[1]) <= 1e-12);  // theta = ±(1,-1)/sqrt(2)
}

TEST_CASE("solve_elemental: coincident points are degenerate") {
    const auto model = make_model(ModelKind::Line2D);
    const std::vector<DataPoint> subset = {pt({0, 0}), pt({0, 0})};
    CHECK_FALSE(model->solve_elemental(subset).has_value());
}

TEST_CASE("solve_elemental: identity homography from four fixed pairs") {
    const auto model = make_model(ModelKind::Homography);
    const std::vector<DataPoint> subset = {pt({0, 0, 0, 0}), pt({1, 0, 1, 0}),
                                           pt({0, 1, 0, 1}), pt({1, 1.5, 1, 1.5})};
    const auto h = model->solve_elemental(subset);
    REQUIRE(h.has_value());
    Vec identity(9);
    identity << 1, 0, 0, 0, 1, 0, 0, 0, 1;
    identity /= identity.norm();
    CHECK(std::min((h->theta - identity).norm(), (h->theta + identity).norm()) <= 1e-9);
    for (const auto& p : subset) CHECK(max_projection_residual(*model, p, *h) <= 1e-9);
}

TEST_CASE("solve_elemental exactness on noise-free subsets") {
    Rng rng(99);
    for (ModelKind kind : kAllModels) {
        const auto model = make_model(kind);
        CAPTURE(model->name());
        for (int rep = 0; rep < 20; ++rep) {
            const auto points = exact_structure_points(kind, rng, model->elemental_size());
            const auto h = model->solve_elemental(points);
            if (!h) continue;  // occasional near-degenerate draws are allowed
            for (const auto& p : points) CHECK(max_projection_residual(*model, p, *h) <= 1e-8);
        }
    }
}

TEST_CASE("validate_hypothesis: ellipse discriminant and axis ratio") {
    const auto model = make_model(ModelKind::Ellipse2D);

    Hypothesis circle;
    circle.theta = Vec(5);
    circle.theta << 0, 0, 1, 0, 1;
    circle.theta /= circle.theta.norm();
    circle.alpha = 1.0 / std::sqrt(2.0);
    CHECK(model->validate_hypothesis(circle));

    Hypothesis hyperbola;
    hyperbola.theta = Vec(5);
    hyperbola.theta << 0, 0, 1, 0, -1;
    hyperbola.theta /= hyperbola.theta.norm();
    hyperbola.alpha = 0.5;
    CHECK_FALSE(model->validate_hypothesis(hyperbola));

    // 20:1 axes fail the ratio bound, 5:1 pass
    Hypothesis flat;
    flat.theta = Vec(5);
    flat.theta << 0, 0, 1, 0, 400;
    flat.theta /= flat.theta.norm();
    flat.alpha = 1.0;
    CHECK_FALSE(model->validate_hypothesis(flat));
    Hypothesis mild;
    mild.theta = Vec(5);
    mild.theta << 0, 0, 1, 0, 25;
    mild.theta /= mild.theta.norm();
    mild.alpha = 1.0;
    CHECK(model->validate_hypothesis(mild));
}

TEST_CASE("validate_hypothesis: sphere quadric is not a cylinder") {
    const auto model = make_model(ModelKind::Cylinder3D);
    Hypothesis sphere;
    sphere.theta = Vec(9);
    sphere.theta << 1, 0, 0, 1, 0, 1, 0, 0, 0;  // x^2 + y^2 + z^2 = 1
    const double n = sphere.theta.norm();
    sphere.theta /= n;
    sphere.alpha = 1.0 / n;
    CHECK_FALSE(model->validate_hypothesis(sphere));

    Hypothesis cyl = exact_structure_hypothesis(ModelKind::Cylinder3D);
    CHECK(model->validate_hypothesis(cyl));
}

TEST_CASE("cylinder nine-point solve recovers the quadric") {
    Rng rng(4242);
    const auto model = make_model(ModelKind::Cylinder3D);
    const auto points = exact_structure_points(ModelKind::Cylinder3D, rng, 9);
    const auto h = model->solve_elemental(points);
    REQUIRE(h.has_value());
    const Hypothesis truth = exact_structure_hypothesis(ModelKind::Cylinder3D);
    CHECK(std::min((h->theta - truth.theta).norm(), (h->theta + truth.theta).norm()) <= 1e-7);
    for (const auto& p : points) CHECK(max_projection_residual(*model, p, *h) <= 1e-8);
}

TEST_CASE("normalize: two-point hartley example") {
    const auto model = make_model(ModelKind::Line2D);
    const std::vector<DataPoint> points = {pt({0, 0}), pt({2, 0})};
    const auto norm = normalize(points, *model);
    REQUIRE(norm.has_value());
    const double s2 = std::sqrt(2.0);
    CHECK(std::abs(norm->points[0].y[0] + s2) <= 1e-12);
    CHECK(std::abs(norm->points[0].y[1]) <= 1e-12);
    CHECK(std::abs(norm->points[1].y[0] - s2) <= 1e-12);
    CHECK(std::abs(norm->transform.blocks[0].offset[0] - 1.0) <= 1e-12);
}

TEST_CASE("normalize: identical points are degenerate") {
    const auto model = make_model(ModelKind::Line2D);
    const std::vector<DataPoint> points = {pt({3, 4}), pt({3, 4}), pt({3, 4})};
    CHECK_FALSE(normalize(points, *model).has_value());
}

TEST_CASE("normalize round trip recovers coordinates") {
    Rng rng(11);
    for (ModelKind kind : kAllModels) {
        const auto model = make_model(kind);
        std::vector<DataPoint> points;
        for (int i = 0; i < 40; ++i) points.push_back(random_point(*model, rng, 300.0));
        const auto norm = normalize(points, *model);
        REQUIRE(norm.has_value());
        for (std::size_t i = 0; i < points.size(); ++i) {
            const Vec back = norm->transform.invert(norm->points[i].y);
            CHECK((back - points[i].y).norm() <= 1e-10 * std::max(1.0, points[i].y.norm()));
        }
    }
}

TEST_CASE("denormalize_hypothesis maps structures back exactly") {
    Rng rng(123);
    for (ModelKind kind : kAllModels) {
        const auto model = make_model(kind);
        CAPTURE(model->name());
        // exact points, scaled into image-like units so normalization is nontrivial
        auto points = exact_structure_points(kind, rng, 60);
        for (auto& p : points)
            for (int k = 0; k < p.y.size(); ++k) p.y[k] = 40.0 * p.y[k] + 170.0;

        const auto norm = normalize(points, *model);
        REQUIRE(norm.has_value());
        std::vector<DataPoint> subset(norm->points.begin(),
                                      norm->points.begin() + model->elemental_size());
        const auto h = model->solve_elemental(subset);
        REQUIRE(h.has_value());
        const Hypothesis orig = model->denormalize_hypothesis(*h, norm->transform);
        CHECK(std::abs(orig.theta.norm() - 1.0) <= 1e-12);
        for (const auto& p : points) {
            const double tol = 1e-6 * std::max(1.0, std::abs(orig.alpha));
            CHECK(max_projection_residual(*model, p, orig) <= tol);
        }
    }
}

TEST_CASE("line structure round trip through normalization") {
    const auto model = make_model(ModelKind::Line2D);
    Rng rng(5);
    std::vector<DataPoint> points;
    for (int i = 0; i < 50; ++i) {
        const double x = rng.uniform(0, 700);
        points.push_back(pt({x, 0.3 * x + 55.0}));
    }
    const auto norm = normalize(points, *model);
    REQUIRE(norm.has_value());
    std::vector<DataPoint> subset = {norm->points[0], norm->points[1]};
    const auto h = model->solve_elemental(subset);
    REQUIRE(h.has_value());
    const Hypothesis orig = model->denormalize_hypothesis(*h, norm->transform);

    Vec expect(2);
    expect << -0.3, 1.0;
    expect /= expect.norm();
    const double expect_alpha = 55.0 / std::sqrt(1.09);
    const double sign = orig.theta.dot(expect) >= 0 ? 1.0 : -1.0;
    CHECK((sign * orig.theta - expect).norm() <= 1e-10);
    CHECK(std::abs(sign * orig.alpha - expect_alpha) <= 1e-10);
}

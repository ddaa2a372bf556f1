#include "mulinl/synthetic.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "mulinl/rng.hpp"

namespace mulinl {

namespace {

constexpr double kPi = 3.14159265358979323846;

int point_dim(ModelKind kind) {
    switch (kind) {
        case ModelKind::Line2D:
        case ModelKind::Ellipse2D: return 2;
        case ModelKind::Cylinder3D: return 3;
        default: return 4;
    }
}

bool inside(const Eigen::Vector2d& p, const SceneSpec& s) {
    return p[0] >= s.bounds_min[0] && p[0] <= s.bounds_max[0] && p[1] >= s.bounds_min[1] &&
           p[1] <= s.bounds_max[1];
}

Eigen::Vector3d random_unit3(Rng& rng) {
    for (;;) {
        Eigen::Vector3d v(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        const double n = v.norm();
        if (n > 1e-3 && n <= 1.0) return v / n;
    }
}

// ---------------------------------------------------------------------------
// random geometry placement
// ---------------------------------------------------------------------------

LineGeometry random_line(const SceneSpec& spec, Rng& rng) {
    const double w = spec.bounds_max[0] - spec.bounds_min[0];
    const double h = spec.bounds_max[1] - spec.bounds_min[1];
    const double min_len = 0.7 * std::min(w, h);
    LineGeometry geom;
    for (int attempt = 0; attempt < 100; ++attempt) {
        const double phi = rng.uniform(0.0, kPi);
        const Eigen::Vector2d d(std::cos(phi), std::sin(phi));
        const Eigen::Vector2d n(-d[1], d[0]);
        // admissible offsets: projections of the box corners onto the normal
        double rho_min = 1e300, rho_max = -1e300;
        for (int cx = 0; cx < 2; ++cx)
            for (int cy = 0; cy < 2; ++cy) {
                const Eigen::Vector2d corner(cx ? spec.bounds_max[0] : spec.bounds_min[0],
                                             cy ? spec.bounds_max[1] : spec.bounds_min[1]);
                const double r = corner.dot(n);
                rho_min = std::min(rho_min, r);
                rho_max = std::max(rho_max, r);
            }
        const double margin = 0.05 * (rho_max - rho_min);
        const double rho = rng.uniform(rho_min + margin, rho_max - margin);
        // clip p0 + t*d against the box
        const Eigen::Vector2d p0 = rho * n;
        double tlo = -1e300, thi = 1e300;
        for (int k = 0; k < 2; ++k) {
            if (std::abs(d[k]) < 1e-12) continue;
            double t0 = (spec.bounds_min[k] - p0[k]) / d[k];
            double t1 = (spec.bounds_max[k] - p0[k]) / d[k];
            if (t0 > t1) std::swap(t0, t1);
            tlo = std::max(tlo, t0);
            thi = std::min(thi, t1);
        }
        if (thi - tlo < min_len && attempt < 99) continue;
        geom.p0 = p0 + tlo * d;
        geom.p1 = p0 + thi * d;
        break;
    }
    return geom;
}

EllipseGeometry random_ellipse(const SceneSpec& spec, int index,
                               const std::vector<Geometry>& placed, Rng& rng) {
    const double w = spec.bounds_max[0] - spec.bounds_min[0];
    // decreasing size bands so later (noisier) structures are the smaller ones
    const double base = index == 0 ? 0.26 : index == 1 ? 0.20 : 0.15;
    EllipseGeometry geom;
    for (int attempt = 0; attempt < 100; ++attempt) {
        geom.semi_major = w * rng.uniform(base * 0.92, base * 1.08);
        geom.semi_minor = geom.semi_major * rng.uniform(0.62, 0.88);
        geom.angle = rng.uniform(0.0, kPi);
        const double margin = geom.semi_major * 1.02;
        geom.center[0] = rng.uniform(spec.bounds_min[0] + margin, spec.bounds_max[0] - margin);
        geom.center[1] = rng.uniform(spec.bounds_min[1] + margin, spec.bounds_max[1] - margin);
        bool clear = true;
        for (const auto& g : placed) {
            const auto& other = std::get<EllipseGeometry>(g);
            const double sep = (geom.center - other.center).norm();
            if (sep < 0.75 * (geom.semi_major + other.semi_major)) clear = false;
        }
        if (clear || attempt == 99) break;
    }
    return geom;
}

CylinderGeometry random_cylinder(const SceneSpec& spec, const StructureSpec& st,
                                 const std::vector<Geometry>& placed, Rng& rng) {
    CylinderGeometry geom;
    const auto* explicit_geom =
        st.geometry ? std::get_if<CylinderGeometry>(&*st.geometry) : nullptr;
    geom.radius = explicit_geom ? explicit_geom->radius : 2.0;
    geom.height = explicit_geom ? explicit_geom->height : 5.0 * geom.radius;
    for (int attempt = 0; attempt < 100; ++attempt) {
        geom.axis = random_unit3(rng);
        const double margin = 0.5 * geom.height + geom.radius;
        for (int k = 0; k < 3; ++k)
            geom.center[k] =
                rng.uniform(spec.bounds_min[k] + margin, spec.bounds_max[k] - margin);
        bool clear = true;
        for (const auto& g : placed) {
            const auto& other = std::get<CylinderGeometry>(g);
            if ((geom.center - other.center).norm() <
                0.55 * (geom.height + other.height) * 0.5 + geom.radius + other.radius)
                clear = false;
        }
        if (clear || attempt == 99) break;
    }
    return geom;
}

HomographyGeometry random_homography(const SceneSpec& spec,
                                     const std::vector<Geometry>& placed, Rng& rng) {
    const Eigen::Vector2d c(0.5 * (spec.bounds_min[0] + spec.bounds_max[0]),
                            0.5 * (spec.bounds_min[1] + spec.bounds_max[1]));
    Eigen::Matrix3d tc = Eigen::Matrix3d::Identity(), tcinv = Eigen::Matrix3d::Identity();
    tc(0, 2) = c[0];
    tc(1, 2) = c[1];
    tcinv(0, 2) = -c[0];
    tcinv(1, 2) = -c[1];

    HomographyGeometry geom;
    for (int attempt = 0; attempt < 100; ++attempt) {
        const double angle = rng.uniform(-0.45, 0.45);
        const double scale = rng.uniform(0.8, 1.25);
        Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
        m(0, 0) = scale * std::cos(angle);
        m(0, 1) = -scale * std::sin(angle);
        m(1, 0) = scale * std::sin(angle);
        m(1, 1) = scale * std::cos(angle);
        m(0, 2) = rng.uniform(-120, 120);
        m(1, 2) = rng.uniform(-120, 120);
        m(2, 0) = rng.uniform(-2e-4, 2e-4);
        m(2, 1) = rng.uniform(-2e-4, 2e-4);
        geom.h = tc * m * tcinv;
        // distinct enough from the planes already placed
        bool distinct = true;
        for (const auto& g : placed) {
            const auto& other = std::get<HomographyGeometry>(g);
            double max_gap = 0.0;
            for (int gx = 0; gx <= 2; ++gx)
                for (int gy = 0; gy <= 2; ++gy) {
                    Eigen::Vector3d p(spec.bounds_min[0] + gx * 0.5 * (spec.bounds_max[0] - spec.bounds_min[0]),
                                      spec.bounds_min[1] + gy * 0.5 * (spec.bounds_max[1] - spec.bounds_min[1]),
                                      1.0);
                    Eigen::Vector3d a = geom.h * p, b = other.h * p;
                    a /= a[2];
                    b /= b[2];
                    max_gap = std::max(max_gap, (a - b).head<2>().norm());
                }
            if (max_gap < 40.0) distinct = false;
        }
        if (distinct || attempt == 99) break;
    }
    return geom;
}

MotionGeometry random_motion(int index, Rng& rng) {
    MotionGeometry geom;
    const double angle = rng.uniform(0.18, 0.40) * (index % 2 == 0 ? 1.0 : -1.0);
    geom.rotation = Eigen::AngleAxisd(angle, random_unit3(rng)).toRotationMatrix();
    geom.translation =
        Eigen::Vector3d(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.3, 0.3));
    return geom;
}

// ---------------------------------------------------------------------------
// per-structure point synthesis (pre-noise points stay inside the bounds)
// ---------------------------------------------------------------------------

void check_in_bounds(bool ok) {
    if (!ok) throw std::invalid_argument("invalid-spec: structure outside bounds");
}

Vec sample_line_point(const LineGeometry& g, Rng& rng) {
    const double t = rng.uniform();
    Vec p(2);
    p[0] = g.p0[0] + t * (g.p1[0] - g.p0[0]);
    p[1] = g.p0[1] + t * (g.p1[1] - g.p0[1]);
    return p;
}

Vec sample_ellipse_point(const EllipseGeometry& g, Rng& rng) {
    const double t = rng.uniform(0.0, 2.0 * kPi);
    const double ca = std::cos(g.angle), sa = std::sin(g.angle);
    const double ex = g.semi_major * std::cos(t), ey = g.semi_minor * std::sin(t);
    Vec p(2);
    p[0] = g.center[0] + ca * ex - sa * ey;
    p[1] = g.center[1] + sa * ex + ca * ey;
    return p;
}

Vec sample_cylinder_point(const CylinderGeometry& g, Rng& rng) {
    Eigen::Vector3d u = g.axis.unitOrthogonal();
    Eigen::Vector3d v = g.axis.cross(u);
    const double t = rng.uniform(-0.5, 0.5) * g.height;
    const double phi = rng.uniform(0.0, 2.0 * kPi);
    const Eigen::Vector3d p =
        g.center + t * g.axis + g.radius * (std::cos(phi) * u + std::sin(phi) * v);
    Vec out(3);
    out << p[0], p[1], p[2];
    return out;
}

/// Camera shared by the two-view scenes.
struct Camera {
    double f = 600.0;
    double cx = 350.0, cy = 350.0;
    Eigen::Vector2d project(const Eigen::Vector3d& x) const {
        return {f * x[0] / x[2] + cx, f * x[1] / x[2] + cy};
    }
};

std::optional<Vec> sample_homography_pair(const HomographyGeometry& g, const SceneSpec& spec,
                                          Rng& rng) {
    for (int attempt = 0; attempt < 64; ++attempt) {
        const double x = rng.uniform(spec.bounds_min[0], spec.bounds_max[0]);
        const double y = rng.uniform(spec.bounds_min[1], spec.bounds_max[1]);
        Eigen::Vector3d q = g.h * Eigen::Vector3d(x, y, 1.0);
        if (std::abs(q[2]) < 1e-12) continue;
        q /= q[2];
        if (!inside(q.head<2>(), spec)) continue;
        Vec p(4);
        p << x, y, q[0], q[1];
        return p;
    }
    return std::nullopt;
}

std::optional<Vec> sample_motion_pair(const MotionGeometry& g, int index, int n_structures,
                                      const SceneSpec& spec, Rng& rng) {
    const Camera cam;
    const double spread = n_structures > 1 ? 3.2 : 0.0;
    const Eigen::Vector3d center((index - 0.5 * (n_structures - 1)) * spread, 0.0, 6.0);
    for (int attempt = 0; attempt < 64; ++attempt) {
        const Eigen::Vector3d x =
            center + Eigen::Vector3d(rng.uniform(-1.3, 1.3), rng.uniform(-1.3, 1.3),
                                     rng.uniform(-1.3, 1.3));
        const Eigen::Vector3d x2 = g.rotation * (x - center) + center + g.translation;
        if (x[2] < 0.5 || x2[2] < 0.5) continue;
        const Eigen::Vector2d a = cam.project(x), b = cam.project(x2);
        if (!inside(a, spec) || !inside(b, spec)) continue;
        Vec p(4);
        p << a[0], a[1], b[0], b[1];
        return p;
    }
    return std::nullopt;
}

}  // namespace

LabeledScene generate(const SceneSpec& spec, std::uint64_t seed) {
    Rng rng(Rng::stream(seed, 0xa5c3));
    LabeledScene scene;
    const int dim = point_dim(spec.model);
    const int n_structures = static_cast<int>(spec.structures.size());

    // resolve geometries first (explicit ones validated, missing ones placed)
    for (int s = 0; s < n_structures; ++s) {
        const auto& st = spec.structures[s];
        switch (spec.model) {
            case ModelKind::Line2D: {
                LineGeometry g = st.geometry ? std::get<LineGeometry>(*st.geometry)
                                             : random_line(spec, rng);
                if (st.geometry)
                    check_in_bounds(inside(g.p0, spec) && inside(g.p1, spec));
                scene.geometries.push_back(g);
                break;
            }
            case ModelKind::Ellipse2D: {
                EllipseGeometry g = st.geometry ? std::get<EllipseGeometry>(*st.geometry)
                                                : random_ellipse(spec, s, scene.geometries, rng);
                if (st.geometry) {
                    const double ext = g.semi_major;
                    check_in_bounds(g.center[0] - ext >= spec.bounds_min[0] &&
                                    g.center[0] + ext <= spec.bounds_max[0] &&
                                    g.center[1] - ext >= spec.bounds_min[1] &&
                                    g.center[1] + ext <= spec.bounds_max[1]);
                }
                scene.geometries.push_back(g);
                break;
            }
            case ModelKind::Cylinder3D: {
                CylinderGeometry g;
                if (st.geometry && std::get<CylinderGeometry>(*st.geometry).axis.norm() > 0) {
                    g = std::get<CylinderGeometry>(*st.geometry);
                    g.axis.normalize();
                    const double ext = 0.5 * g.height + g.radius;
                    bool ok = true;
                    for (int k = 0; k < 3; ++k)
                        ok = ok && g.center[k] - ext >= spec.bounds_min[k] &&
                             g.center[k] + ext <= spec.bounds_max[k];
                    check_in_bounds(ok);
                } else {
                    g = random_cylinder(spec, st, scene.geometries, rng);
                }
                scene.geometries.push_back(g);
                break;
            }
            case ModelKind::Homography: {
                HomographyGeometry g = st.geometry ? std::get<HomographyGeometry>(*st.geometry)
                                                   : random_homography(spec, scene.geometries, rng);
                scene.geometries.push_back(g);
                break;
            }
            case ModelKind::FundamentalMatrix: {
                MotionGeometry g = st.geometry ? std::get<MotionGeometry>(*st.geometry)
                                               : random_motion(s, rng);
                scene.geometries.push_back(g);
                break;
            }
        }
    }

    for (int s = 0; s < n_structures; ++s) {
        const auto& st = spec.structures[s];
        int produced = 0;
        int dry_spells = 0;
        while (produced < st.inliers) {
            std::optional<Vec> p;
            switch (spec.model) {
                case ModelKind::Line2D:
                    p = sample_line_point(std::get<LineGeometry>(scene.geometries[s]), rng);
                    break;
                case ModelKind::Ellipse2D:
                    p = sample_ellipse_point(std::get<EllipseGeometry>(scene.geometries[s]), rng);
                    break;
                case ModelKind::Cylinder3D:
                    p = sample_cylinder_point(std::get<CylinderGeometry>(scene.geometries[s]), rng);
                    break;
                case ModelKind::Homography:
                    p = sample_homography_pair(std::get<HomographyGeometry>(scene.geometries[s]),
                                               spec, rng);
                    break;
                case ModelKind::FundamentalMatrix:
                    p = sample_motion_pair(std::get<MotionGeometry>(scene.geometries[s]), s,
                                           n_structures, spec, rng);
                    break;
            }
            if (!p) {
                if (++dry_spells > 50)
                    throw std::invalid_argument("invalid-spec: structure outside bounds");
                continue;
            }
            for (int k = 0; k < dim; ++k) (*p)[k] += rng.gaussian(0.0, st.sigma);
            scene.points.push_back({std::move(*p), std::nullopt});
            scene.labels.push_back(s);
            ++produced;
        }
    }

    // outliers: uniform over the bounds; cylinder scenes use the inlier
    // bounding box inflated by 20%
    Vec lo(dim), hi(dim);
    if (spec.model == ModelKind::Cylinder3D && !scene.points.empty()) {
        Vec bb_lo = scene.points[0].y, bb_hi = scene.points[0].y;
        for (const auto& p : scene.points) {
            bb_lo = bb_lo.cwiseMin(p.y);
            bb_hi = bb_hi.cwiseMax(p.y);
        }
        const Vec extent = 0.1 * (bb_hi - bb_lo);
        lo = bb_lo - extent;
        hi = bb_hi + extent;
    } else if (dim <= 3) {
        for (int k = 0; k < dim; ++k) {
            lo[k] = spec.bounds_min[k];
            hi[k] = spec.bounds_max[k];
        }
    } else {  // correspondence pair: both images share the bounds
        lo[0] = lo[2] = spec.bounds_min[0];
        lo[1] = lo[3] = spec.bounds_min[1];
        hi[0] = hi[2] = spec.bounds_max[0];
        hi[1] = hi[3] = spec.bounds_max[1];
    }
    for (int i = 0; i < spec.outliers; ++i) {
        Vec p(dim);
        for (int k = 0; k < dim; ++k) p[k] = rng.uniform(lo[k], hi[k]);
        scene.points.push_back({std::move(p), std::nullopt});
        scene.labels.push_back(-1);
    }
    return scene;
}

SceneSpec preset_scenario(const std::string& name) {
    SceneSpec s;
    s.bounds_min = Eigen::Vector3d::Zero();
    s.bounds_max = Eigen::Vector3d(700, 700, 0);
    if (name == "lines1" || name == "lines2") {
        s.model = ModelKind::Line2D;
        s.outliers = name == "lines1" ? 350 : 500;
        const int n[] = {300, 250, 200, 150, 100};
        const double sg[] = {3, 6, 9, 12, 15};
        for (int i = 0; i < 5; ++i) s.structures.push_back({n[i], sg[i], std::nullopt});
        return s;
    }
    if (name == "ellipses1" || name == "ellipses2") {
        s.model = ModelKind::Ellipse2D;
        s.outliers = name == "ellipses1" ? 350 : 800;
        const int n[] = {300, 250, 200};
        const double sg[] = {3, 6, 9};
        for (int i = 0; i < 3; ++i) s.structures.push_back({n[i], sg[i], std::nullopt});
        return s;
    }
    if (name == "circles-fig2") {
        s.model = ModelKind::Ellipse2D;
        s.outliers = 200;
        s.structures.push_back({200, 5, std::nullopt});
        s.structures.push_back({200, 10, std::nullopt});
        return s;
    }
    if (name == "cylinders") {
        s.model = ModelKind::Cylinder3D;
        s.bounds_max = Eigen::Vector3d(40, 40, 40);
        s.outliers = 500;
        CylinderGeometry g1;
        g1.radius = 2.0;
        g1.height = 10.0;
        g1.axis.setZero();  // axis/center filled in randomly per seed
        CylinderGeometry g2;
        g2.radius = 3.0;
        g2.height = 12.0;
        g2.axis.setZero();
        s.structures.push_back({400, 0.06, g1});
        s.structures.push_back({300, 0.1, g2});
        return s;
    }
    if (name == "homography-synth") {
        s.model = ModelKind::Homography;
        s.outliers = 200;
        s.structures.push_back({200, 1.0, std::nullopt});
        s.structures.push_back({200, 1.0, std::nullopt});
        return s;
    }
    if (name == "fundmat-synth") {
        s.model = ModelKind::FundamentalMatrix;
        s.outliers = 150;
        s.structures.push_back({250, 1.0, std::nullopt});
        s.structures.push_back({200, 1.0, std::nullopt});
        return s;
    }
    throw std::invalid_argument("unknown scenario: " + name);
}

std::vector<std::string> scenario_names() {
    return {"lines1",       "lines2",    "ellipses1",        "ellipses2",
            "circles-fig2", "cylinders", "homography-synth", "fundmat-synth"};
}

MatchReport match(const EstimationResult& result, std::span<const int> labels) {
    int n_truth = 0;
    for (int l : labels) n_truth = std::max(n_truth, l + 1);
    std::vector<int> truth_size(n_truth, 0);
    for (int l : labels)
        if (l >= 0) ++truth_size[l];

    const int n_est = static_cast<int>(result.structures.size());
    std::vector<std::vector<int>> overlap(n_est, std::vector<int>(n_truth, 0));
    for (int e = 0; e < n_est; ++e)
        for (int idx : result.structures[e].inliers) {
            const int l = labels[idx];
            if (l >= 0) ++overlap[e][l];
        }

    MatchReport report;
    for (int t = 0; t < n_truth; ++t) {
        StructureVerdict v;
        v.truth_id = t;
        // estimates are strength-sorted, so the first maximum wins ties
        for (int e = 0; e < n_est; ++e) {
            if (overlap[e][t] > v.overlap) {
                v.overlap = overlap[e][t];
                v.matched_estimate = e;
            }
        }
        if (v.matched_estimate >= 0 && truth_size[t] > 0) {
            const auto& est = result.structures[v.matched_estimate];
            v.precision = static_cast<double>(v.overlap) / est.inliers.size();
            v.recall = static_cast<double>(v.overlap) / truth_size[t];
            v.correct = v.precision >= 0.5 && v.recall >= 0.5;
        }
        if (v.correct) ++report.correct_count;
        report.verdicts.push_back(v);
    }
    return report;
}

BenchResult bench(const SceneSpec& spec, const EstimatorConfig& config, int runs,
                  bool keep_results) {
    BenchResult out;
    const int n_truth = static_cast<int>(spec.structures.size());
    out.rows.resize(n_truth);
    for (int t = 0; t < n_truth; ++t) {
        out.rows[t].truth_id = t;
        out.rows[t].inliers_true = spec.structures[t].inliers;
        out.rows[t].sigma_true = spec.structures[t].sigma;
    }
    std::vector<std::vector<double>> scales(n_truth), amounts(n_truth);
    std::vector<double> walls;

    for (int r = 0; r < runs; ++r) {
        const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(r);
        const LabeledScene scene = generate(spec, seed);
        EstimatorConfig cfg = config;
        cfg.seed = seed;
        const auto t0 = std::chrono::steady_clock::now();
        EstimationResult res = run(scene.points, spec.model, cfg);
        const auto t1 = std::chrono::steady_clock::now();
        const double wall = std::chrono::duration<double>(t1 - t0).count();
        walls.push_back(wall);

        MatchReport report = match(res, scene.labels);
        for (const auto& v : report.verdicts) {
            if (!v.correct) continue;
            ++out.rows[v.truth_id].detections;
            const auto& est = res.structures[v.matched_estimate];
            scales[v.truth_id].push_back(est.sigma_tls);
            amounts[v.truth_id].push_back(static_cast<double>(est.inliers.size()));
        }
        BenchRun br;
        br.seed = seed;
        br.wall_seconds = wall;
        br.report = std::move(report);
        if (keep_results) br.result = std::move(res);
        out.runs.push_back(std::move(br));
    }

    auto mean_std = [](const std::vector<double>& v, double& mean, double& sd) {
        mean = sd = 0.0;
        if (v.empty()) return;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        if (v.size() > 1) {
            for (double x : v) sd += (x - mean) * (x - mean);
            sd = std::sqrt(sd / static_cast<double>(v.size() - 1));
        }
    };
    for (int t = 0; t < n_truth; ++t) {
        mean_std(scales[t], out.rows[t].scale_mean, out.rows[t].scale_std);
        mean_std(amounts[t], out.rows[t].inliers_mean, out.rows[t].inliers_std);
    }
    mean_std(walls, out.wall_mean, out.wall_std);
    return out;
}

}  // namespace mulinl

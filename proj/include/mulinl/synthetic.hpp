#pragma once

#include <string>
#include <variant>

#include "mulinl/pipeline.hpp"

namespace mulinl {

struct LineGeometry {
    Eigen::Vector2d p0, p1;  // segment endpoints
};

struct EllipseGeometry {
    Eigen::Vector2d center;
    double semi_major = 0.0, semi_minor = 0.0;
    double angle = 0.0;  // radians
};

struct CylinderGeometry {
    Eigen::Vector3d center;
    Eigen::Vector3d axis;  // unit direction
    double radius = 0.0;
    double height = 0.0;
};

struct HomographyGeometry {
    Eigen::Matrix3d h;  // maps first-image to second-image coordinates
};

/// Rigid motion of one object between the two views of a fixed camera.
struct MotionGeometry {
    Eigen::Matrix3d rotation;
    Eigen::Vector3d translation;
};

using Geometry =
    std::variant<LineGeometry, EllipseGeometry, CylinderGeometry, HomographyGeometry,
                 MotionGeometry>;

struct StructureSpec {
    int inliers = 0;
    double sigma = 0.0;                 // per-coordinate Gaussian noise
    std::optional<Geometry> geometry;   // absent: placed randomly per seed
};

struct SceneSpec {
    ModelKind model = ModelKind::Line2D;
    Eigen::Vector3d bounds_min = Eigen::Vector3d::Zero();
    Eigen::Vector3d bounds_max = Eigen::Vector3d::Zero();
    int outliers = 0;
    std::vector<StructureSpec> structures;
};

struct LabeledScene {
    std::vector<DataPoint> points;
    std::vector<int> labels;             // structure id, -1 for outliers
    std::vector<Geometry> geometries;    // resolved per-structure geometry
};

/// Deterministic scene synthesis: inliers uniform along each structure, then
/// per-coordinate Gaussian noise; outliers uniform over the bounds. Throws
/// std::invalid_argument when an explicit geometry leaves the bounds.
LabeledScene generate(const SceneSpec& spec, std::uint64_t seed);

/// Named presets: lines1, lines2, ellipses1, ellipses2, circles-fig2,
/// cylinders, homography-synth, fundmat-synth.
SceneSpec preset_scenario(const std::string& name);
std::vector<std::string> scenario_names();

struct StructureVerdict {
    int truth_id = 0;
    int matched_estimate = -1;  // rank index into result.structures
    bool correct = false;
    int overlap = 0;
    double precision = 0.0;     // |E ∩ T| / |E|
    double recall = 0.0;        // |E ∩ T| / |T|
};

struct MatchReport {
    std::vector<StructureVerdict> verdicts;
    int correct_count = 0;
};

/// Greedy truth-to-estimate matching: each true structure pairs with the
/// estimate holding the plurality of its points (ties to the stronger one);
/// correct iff that estimate is at least half drawn from the structure and
/// covers at least half of it.
MatchReport match(const EstimationResult& result, std::span<const int> labels);

struct BenchStructureRow {
    int truth_id = 0;
    int inliers_true = 0;
    double sigma_true = 0.0;
    int detections = 0;
    double scale_mean = 0.0, scale_std = 0.0;      // over correct runs
    double inliers_mean = 0.0, inliers_std = 0.0;  // over correct runs
};

struct BenchRun {
    std::uint64_t seed = 0;
    double wall_seconds = 0.0;
    MatchReport report;
    EstimationResult result;
};

struct BenchResult {
    std::vector<BenchStructureRow> rows;
    std::vector<BenchRun> runs;
    double wall_mean = 0.0, wall_std = 0.0;
};

/// Repeats generate + run + match with seeds base, base+1, ... and
/// aggregates detection counts and the mean/(std) of the matched scales and
/// inlier amounts over the correct runs.
BenchResult bench(const SceneSpec& spec, const EstimatorConfig& config, int runs,
                  bool keep_results = false);

}  // namespace mulinl

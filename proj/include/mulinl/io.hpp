#pragma once

#include <stdexcept>
#include <string>

#include "mulinl/synthetic.hpp"

namespace mulinl {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// CSV (optional header) or JSON array-of-arrays; every row must have
/// exactly `columns` finite values.
std::vector<DataPoint> read_dataset(const std::string& path, int columns);

void write_dataset_csv(const std::string& path, std::span<const DataPoint> points,
                       std::span<const std::string> column_names);
void write_labels_csv(const std::string& path, std::span<const int> labels);

/// Writes via a temp file in the same directory, then renames.
void write_text_atomic(const std::string& path, const std::string& text);

/// Double with 17 significant digits (shortest round-trip form of %.17g).
std::string format_double(double v);

/// Fields echoed into the result document.
struct ResultContext {
    std::string model;
    std::string input;
    EstimatorConfig config;
    bool timings = false;
    double wall_seconds = 0.0;
};

/// Result document: config echo, strength-ranked structure records,
/// unclassified indices and per-iteration diagnostics. Field order is fixed
/// and doubles use 17 significant digits, so identical runs serialize to
/// identical bytes. Wall-clock time is included only when ctx.timings is set.
std::string result_to_json(const EstimationResult& result, const ResultContext& ctx);

/// Declarative scene description (see README for the schema).
SceneSpec parse_scene_spec(const std::string& json_text);
std::string scene_spec_to_json(const SceneSpec& spec);

std::string bench_to_csv(const BenchResult& bench);
std::string bench_to_json(const BenchResult& bench, const SceneSpec& spec,
                          const EstimatorConfig& config, int runs);

/// Per-run, per-structure point coordinates for external plotting.
std::string plot_dump_json(const BenchResult& bench, const SceneSpec& spec);

std::string model_name(ModelKind kind);

}  // namespace mulinl

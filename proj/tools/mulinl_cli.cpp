// Command line front end: dataset estimation, scene synthesis and benchmarks.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "mulinl/io.hpp"
#include "mulinl/pipeline.hpp"
#include "mulinl/synthetic.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct EstimateArgs {
    std::string model;
    std::string input;
    std::string output = "result.json";
    int trials = 1000;
    double epsilon = 5.0;
    std::uint64_t seed = 0;
    int threads = 0;
    bool no_normalize = false;
    bool timings = false;
};

struct SynthArgs {
    std::string scenario;
    std::string spec_path;
    std::string output = "scene.csv";
    std::string labels;
    std::uint64_t seed = 0;
};

struct BenchArgs {
    std::string scenario;
    std::string spec_path;
    int runs = 10;
    int trials = 1000;
    double epsilon = 5.0;
    std::uint64_t seed = 0;
    int threads = 0;
    std::string csv_path;
    std::string json_path;
    std::string plot_dump;
};

std::vector<std::string> column_names(mulinl::ModelKind kind) {
    switch (kind) {
        case mulinl::ModelKind::Line2D:
        case mulinl::ModelKind::Ellipse2D: return {"x", "y"};
        case mulinl::ModelKind::Cylinder3D: return {"x", "y", "z"};
        default: return {"x", "y", "xp", "yp"};
    }
}

mulinl::SceneSpec resolve_scene(const std::string& scenario, const std::string& spec_path) {
    if (!spec_path.empty()) {
        std::ifstream in(spec_path, std::ios::binary);
        if (!in) throw mulinl::IoError("cannot open " + spec_path);
        std::ostringstream ss;
        ss << in.rdbuf();
        return mulinl::parse_scene_spec(ss.str());
    }
    return mulinl::preset_scenario(scenario);
}

int run_estimate(const EstimateArgs& args) {
    const mulinl::ModelKind kind = mulinl::model_kind_from_name(args.model);
    const auto model = mulinl::make_model(kind);
    const auto points = mulinl::read_dataset(args.input, model->input_dim());

    mulinl::EstimatorConfig config;
    config.trials = args.trials;
    config.epsilon_percent = args.epsilon;
    config.seed = args.seed;
    config.threads = args.threads;
    config.normalize_input = !args.no_normalize;

    const auto t0 = std::chrono::steady_clock::now();
    const mulinl::EstimationResult result = mulinl::run(points, kind, config);
    const auto t1 = std::chrono::steady_clock::now();

    if (result.note == "too-few-points")
        throw mulinl::IoError(args.input + ": too few points for model " + args.model);

    mulinl::ResultContext ctx;
    ctx.model = args.model;
    ctx.input = args.input;
    ctx.config = config;
    ctx.timings = args.timings;
    ctx.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
    mulinl::write_text_atomic(args.output, mulinl::result_to_json(result, ctx));

    std::cerr << args.output << ": " << result.structures.size() << " structures, "
              << result.unclassified.size() << " unclassified\n";
    return 0;
}

int run_synth(const SynthArgs& args) {
    const mulinl::SceneSpec spec = resolve_scene(args.scenario, args.spec_path);
    const mulinl::LabeledScene scene = mulinl::generate(spec, args.seed);
    const auto names = column_names(spec.model);
    mulinl::write_dataset_csv(args.output, scene.points, names);
    std::string labels_path = args.labels;
    if (labels_path.empty()) {
        labels_path = args.output;
        const auto dot = labels_path.rfind('.');
        if (dot != std::string::npos) labels_path.resize(dot);
        labels_path += ".labels.csv";
    }
    mulinl::write_labels_csv(labels_path, scene.labels);
    std::cerr << args.output << ": " << scene.points.size() << " points, labels in "
              << labels_path << "\n";
    return 0;
}

int run_bench(const BenchArgs& args) {
    const mulinl::SceneSpec spec = resolve_scene(args.scenario, args.spec_path);
    mulinl::EstimatorConfig config;
    config.trials = args.trials;
    config.epsilon_percent = args.epsilon;
    config.seed = args.seed;
    config.threads = args.threads;

    const bool keep = !args.plot_dump.empty();
    const mulinl::BenchResult bench = mulinl::bench(spec, config, args.runs, keep);

    const std::string csv = mulinl::bench_to_csv(bench);
    if (!args.csv_path.empty()) mulinl::write_text_atomic(args.csv_path, csv);
    if (!args.json_path.empty())
        mulinl::write_text_atomic(args.json_path,
                                  mulinl::bench_to_json(bench, spec, config, args.runs));
    if (keep) mulinl::write_text_atomic(args.plot_dump, mulinl::plot_dump_json(bench, spec));

    std::cout << csv;
    std::fprintf(stdout, "# wall seconds/run: %.3f (%.3f)\n", bench.wall_mean, bench.wall_std);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Threshold-free estimation of multiple inlier structures"};
    app.require_subcommand(1);

    const std::vector<std::string> models = {"line2d", "ellipse2d", "cylinder3d", "fundmat",
                                             "homography"};
    const auto scenarios = mulinl::scenario_names();

    EstimateArgs est;
    auto* estimate = app.add_subcommand("estimate", "Estimate structures in a point dataset");
    estimate->add_option("--model", est.model, "Problem model")
        ->required()
        ->check(CLI::IsMember(models));
    estimate->add_option("--input", est.input, "CSV or JSON dataset")->required();
    estimate->add_option("--output", est.output, "Result JSON path");
    estimate->add_option("--trials,-M", est.trials, "Number of elemental-subset trials")
        ->check(CLI::PositiveNumber);
    estimate->add_option("--epsilon", est.epsilon, "Initial set percentage")
        ->check(CLI::Range(1e-6, 49.999));
    estimate->add_option("--seed", est.seed, "Random seed");
    estimate->add_option("--threads", est.threads, "Worker threads (0 = auto)");
    estimate->add_flag("--no-normalize", est.no_normalize, "Skip input normalization");
    estimate->add_flag("--timings", est.timings, "Include wall_seconds in the result");

    SynthArgs syn;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic scene with labels");
    synth->add_option("--scenario", syn.scenario, "Scenario preset")
        ->check(CLI::IsMember(scenarios));
    synth->add_option("--spec", syn.spec_path, "Scene spec JSON (overrides --scenario)");
    synth->add_option("--seed", syn.seed, "Random seed");
    synth->add_option("--output", syn.output, "Dataset CSV path");
    synth->add_option("--labels", syn.labels, "Labels CSV path (default <output>.labels.csv)");

    BenchArgs ben;
    auto* bench = app.add_subcommand("bench", "Repeated seeded runs with detection statistics");
    bench->add_option("--scenario", ben.scenario, "Scenario preset")
        ->check(CLI::IsMember(scenarios));
    bench->add_option("--spec", ben.spec_path, "Scene spec JSON (overrides --scenario)");
    bench->add_option("--runs", ben.runs, "Number of seeded runs")->check(CLI::PositiveNumber);
    bench->add_option("--trials,-M", ben.trials, "Trials per run")->check(CLI::PositiveNumber);
    bench->add_option("--epsilon", ben.epsilon, "Initial set percentage")
        ->check(CLI::Range(1e-6, 49.999));
    bench->add_option("--seed", ben.seed, "Base seed (run r uses seed + r)");
    bench->add_option("--threads", ben.threads, "Worker threads (0 = auto)");
    bench->add_option("--csv", ben.csv_path, "Write the table as CSV");
    bench->add_option("--json", ben.json_path, "Write the table as JSON");
    bench->add_option("--plot-dump", ben.plot_dump, "Write per-structure point coordinates");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : kExitUsage;
    }

    try {
        if (estimate->parsed()) return run_estimate(est);
        if (synth->parsed()) {
            if (syn.scenario.empty() && syn.spec_path.empty()) {
                std::cerr << "synth: --scenario or --spec is required\n";
                return kExitUsage;
            }
            return run_synth(syn);
        }
        if (bench->parsed()) {
            if (ben.scenario.empty() && ben.spec_path.empty()) {
                std::cerr << "bench: --scenario or --spec is required\n";
                return kExitUsage;
            }
            return run_bench(ben);
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}

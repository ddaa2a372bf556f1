#include "mulinl/io.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace mulinl {

namespace {

using nlohmann::json;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool parse_double(const std::string& text, double& out) {
    try {
        std::size_t used = 0;
        out = std::stod(text, &used);
        while (used < text.size() && std::isspace(static_cast<unsigned char>(text[used]))) ++used;
        return used == text.size();
    } catch (...) {
        return false;
    }
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    fields.push_back(cur);
    return fields;
}

/// Ordered JSON writer with fixed float formatting; nlohmann's emitter does
/// not give control over significant digits.
class JsonWriter {
public:
    std::string take() { return std::move(out_); }

    void begin_object() { sep(); out_ += '{'; need_comma_ = false; }
    void end_object() { out_ += '}'; need_comma_ = true; }
    void begin_array() { sep(); out_ += '['; need_comma_ = false; }
    void end_array() { out_ += ']'; need_comma_ = true; }

    void key(std::string_view k) {
        sep();
        out_ += '"';
        out_ += k;
        out_ += "\":";
        need_comma_ = false;
    }

    void value(double v) { sep(); out_ += format_double(v); need_comma_ = true; }
    void value(int v) { sep(); out_ += std::to_string(v); need_comma_ = true; }
    void value(std::uint64_t v) { sep(); out_ += std::to_string(v); need_comma_ = true; }
    void value(bool v) { sep(); out_ += v ? "true" : "false"; need_comma_ = true; }
    void value(std::string_view s) {
        sep();
        out_ += '"';
        for (char ch : s) {
            if (ch == '"' || ch == '\\') out_ += '\\';
            out_ += ch;
        }
        out_ += '"';
        need_comma_ = true;
    }

private:
    void sep() {
        if (need_comma_) out_ += ',';
    }

    std::string out_;
    bool need_comma_ = false;
};

void write_theta(JsonWriter& w, const Vec& theta) {
    w.begin_array();
    for (int i = 0; i < theta.size(); ++i) w.value(theta[i]);
    w.end_array();
}

Geometry parse_geometry(ModelKind kind, const json& g) {
    switch (kind) {
        case ModelKind::Line2D: {
            LineGeometry geom;
            geom.p0 = {g.at("p0")[0].get<double>(), g.at("p0")[1].get<double>()};
            geom.p1 = {g.at("p1")[0].get<double>(), g.at("p1")[1].get<double>()};
            return geom;
        }
        case ModelKind::Ellipse2D: {
            EllipseGeometry geom;
            geom.center = {g.at("center")[0].get<double>(), g.at("center")[1].get<double>()};
            geom.semi_major = g.at("semi_major").get<double>();
            geom.semi_minor = g.at("semi_minor").get<double>();
            geom.angle = g.value("angle", 0.0);
            return geom;
        }
        case ModelKind::Cylinder3D: {
            CylinderGeometry geom;
            if (g.contains("center"))
                geom.center = {g["center"][0].get<double>(), g["center"][1].get<double>(),
                               g["center"][2].get<double>()};
            if (g.contains("axis"))
                geom.axis = {g["axis"][0].get<double>(), g["axis"][1].get<double>(),
                             g["axis"][2].get<double>()};
            else
                geom.axis.setZero();
            geom.radius = g.at("radius").get<double>();
            geom.height = g.value("height", 5.0 * geom.radius);
            return geom;
        }
        case ModelKind::Homography: {
            HomographyGeometry geom;
            const auto& h = g.at("h");
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) geom.h(i, j) = h[3 * i + j].get<double>();
            return geom;
        }
        case ModelKind::FundamentalMatrix: {
            MotionGeometry geom;
            const auto& r = g.at("rotation");
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) geom.rotation(i, j) = r[3 * i + j].get<double>();
            geom.translation = {g.at("translation")[0].get<double>(),
                                g.at("translation")[1].get<double>(),
                                g.at("translation")[2].get<double>()};
            return geom;
        }
    }
    throw IoError("unknown model in scene spec");
}

}  // namespace

std::string model_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::Line2D: return "line2d";
        case ModelKind::Ellipse2D: return "ellipse2d";
        case ModelKind::Cylinder3D: return "cylinder3d";
        case ModelKind::FundamentalMatrix: return "fundmat";
        case ModelKind::Homography: return "homography";
    }
    return "?";
}

std::string format_double(double v) {
    if (!std::isfinite(v)) throw IoError("non-finite value in output");
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<DataPoint> read_dataset(const std::string& path, int columns) {
    const std::string text = read_file(path);
    std::vector<DataPoint> points;

    auto push_row = [&](const std::vector<double>& row, std::size_t line_no) {
        if (static_cast<int>(row.size()) != columns)
            throw IoError(path + ": row " + std::to_string(line_no) + " has " +
                          std::to_string(row.size()) + " columns, expected " +
                          std::to_string(columns));
        Vec y(columns);
        for (int k = 0; k < columns; ++k) {
            if (!std::isfinite(row[k]))
                throw IoError(path + ": non-finite value at row " + std::to_string(line_no));
            y[k] = row[k];
        }
        points.push_back({std::move(y), std::nullopt});
    };

    // JSON array of l-vectors
    std::size_t first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '[') {
        json doc;
        try {
            doc = json::parse(text);
        } catch (const std::exception& e) {
            throw IoError(path + ": " + e.what());
        }
        if (!doc.is_array()) throw IoError(path + ": expected a JSON array of points");
        std::size_t line = 0;
        for (const auto& row : doc) {
            std::vector<double> vals;
            for (const auto& v : row) {
                if (!v.is_number()) throw IoError(path + ": non-numeric entry");
                vals.push_back(v.get<double>());
            }
            push_row(vals, ++line);
        }
        if (points.empty()) throw IoError(path + ": empty dataset");
        return points;
    }

    // CSV, optional header line
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    bool first_line = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv_line(line);
        std::vector<double> vals;
        bool numeric = true;
        for (const auto& f : fields) {
            double v = 0.0;
            if (!parse_double(f, v)) {
                numeric = false;
                break;
            }
            vals.push_back(v);
        }
        if (!numeric) {
            if (first_line) {  // header
                first_line = false;
                continue;
            }
            throw IoError(path + ": non-numeric value at line " + std::to_string(line_no));
        }
        first_line = false;
        push_row(vals, line_no);
    }
    if (points.empty()) throw IoError(path + ": empty dataset");
    return points;
}

void write_dataset_csv(const std::string& path, std::span<const DataPoint> points,
                       std::span<const std::string> column_names) {
    std::string out;
    for (std::size_t k = 0; k < column_names.size(); ++k) {
        if (k) out += ',';
        out += column_names[k];
    }
    out += '\n';
    for (const auto& p : points) {
        for (int k = 0; k < p.y.size(); ++k) {
            if (k) out += ',';
            out += format_double(p.y[k]);
        }
        out += '\n';
    }
    write_text_atomic(path, out);
}

void write_labels_csv(const std::string& path, std::span<const int> labels) {
    std::string out = "label\n";
    for (int l : labels) {
        out += std::to_string(l);
        out += '\n';
    }
    write_text_atomic(path, out);
}

void write_text_atomic(const std::string& path, const std::string& text) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out << text;
        if (!out.flush()) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw IoError("rename failed: " + target.string() + " (" + ec.message() + ")");
}

std::string result_to_json(const EstimationResult& result, const ResultContext& ctx) {
    JsonWriter w;
    w.begin_object();

    w.key("config");
    w.begin_object();
    w.key("model"); w.value(ctx.model);
    w.key("input"); w.value(ctx.input);
    w.key("trials"); w.value(ctx.config.trials);
    w.key("epsilon"); w.value(ctx.config.epsilon_percent);
    w.key("seed"); w.value(ctx.config.seed);
    w.key("normalize"); w.value(ctx.config.normalize_input);
    w.key("recovery_trials"); w.value(ctx.config.effective_recovery_trials());
    w.end_object();

    w.key("structures");
    w.begin_array();
    int rank = 0;
    for (const auto& s : result.structures) {
        w.begin_object();
        w.key("rank"); w.value(++rank);
        w.key("strength"); w.value(s.strength);
        w.key("scale"); w.value(s.sigma_tls);
        w.key("n_in"); w.value(static_cast<int>(s.inliers.size()));
        w.key("theta"); write_theta(w, s.theta);
        w.key("alpha"); w.value(s.alpha);
        w.key("sigma_hat"); w.value(s.sigma_hat);
        w.key("exact_fit"); w.value(s.exact_fit);
        w.key("weak_scale"); w.value(s.weak_scale);
        w.key("inlier_indices");
        w.begin_array();
        for (int i : s.inliers) w.value(i);
        w.end_array();
        w.end_object();
    }
    w.end_array();

    w.key("unclassified");
    w.begin_array();
    for (int i : result.unclassified) w.value(i);
    w.end_array();

    w.key("diagnostics");
    w.begin_object();
    w.key("note"); w.value(result.note);
    w.key("largest_strength_gap"); w.value(result.largest_strength_gap);
    w.key("suggested_inlier_count"); w.value(result.suggested_inlier_count);
    w.key("iterations");
    w.begin_array();
    for (const auto& it : result.iterations) {
        w.begin_object();
        w.key("iteration"); w.value(it.iteration);
        w.key("points_remaining"); w.value(it.points_remaining);
        w.key("initial_set"); w.value(it.initial_set);
        w.key("sigma_hat"); w.value(it.sigma_hat);
        w.key("sigma_hat_normalized"); w.value(it.sigma_hat_norm);
        w.key("region_begin_percent"); w.value(it.region_begin_percent);
        w.key("region_end_percent"); w.value(it.region_end_percent);
        w.key("weak"); w.value(it.weak);
        w.key("collected"); w.value(it.collected);
        w.key("best_trial"); w.value(it.best_trial);
        w.key("mode_density"); w.value(it.mode_density);
        w.key("inliers"); w.value(it.inliers);
        w.key("recovery_failed"); w.value(it.recovery_failed);
        w.key("expansion");
        w.begin_array();
        for (const auto& s : it.region_samples) {
            w.begin_object();
            w.key("percent"); w.value(s.percent);
            w.key("delta_d"); w.value(s.delta_d);
            w.key("k_t"); w.value(s.k_t);
            w.end_object();
        }
        w.end_array();
        w.end_object();
    }
    w.end_array();
    w.end_object();

    if (ctx.timings) {
        w.key("wall_seconds");
        w.value(ctx.wall_seconds);
    }
    w.end_object();
    std::string out = w.take();
    out += '\n';
    return out;
}

SceneSpec parse_scene_spec(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const std::exception& e) {
        throw IoError(std::string("scene spec: ") + e.what());
    }
    SceneSpec spec;
    try {
        spec.model = model_kind_from_name(doc.at("model").get<std::string>());
        const auto& bounds = doc.at("bounds");
        const auto& lo = bounds.at("min");
        const auto& hi = bounds.at("max");
        spec.bounds_min.setZero();
        spec.bounds_max.setZero();
        for (std::size_t k = 0; k < lo.size() && k < 3; ++k) {
            spec.bounds_min[k] = lo[k].get<double>();
            spec.bounds_max[k] = hi[k].get<double>();
        }
        spec.outliers = doc.value("outliers", 0);
        for (const auto& s : doc.at("structures")) {
            StructureSpec st;
            st.inliers = s.at("inliers").get<int>();
            st.sigma = s.at("sigma").get<double>();
            if (s.contains("geometry")) st.geometry = parse_geometry(spec.model, s["geometry"]);
            spec.structures.push_back(std::move(st));
        }
    } catch (const json::exception& e) {
        throw IoError(std::string("scene spec: ") + e.what());
    }
    return spec;
}

std::string scene_spec_to_json(const SceneSpec& spec) {
    JsonWriter w;
    w.begin_object();
    w.key("model"); w.value(model_name(spec.model));
    w.key("bounds");
    w.begin_object();
    const int dim = spec.model == ModelKind::Cylinder3D ? 3 : 2;
    w.key("min");
    w.begin_array();
    for (int k = 0; k < dim; ++k) w.value(spec.bounds_min[k]);
    w.end_array();
    w.key("max");
    w.begin_array();
    for (int k = 0; k < dim; ++k) w.value(spec.bounds_max[k]);
    w.end_array();
    w.end_object();
    w.key("outliers"); w.value(spec.outliers);
    w.key("structures");
    w.begin_array();
    for (const auto& s : spec.structures) {
        w.begin_object();
        w.key("inliers"); w.value(s.inliers);
        w.key("sigma"); w.value(s.sigma);
        w.end_object();
    }
    w.end_array();
    w.end_object();
    return w.take();
}

std::string bench_to_csv(const BenchResult& bench) {
    std::string out =
        "structure,inliers_true,sigma_true,detections,runs,scale_mean,scale_std,"
        "inliers_mean,inliers_std\n";
    const int runs = static_cast<int>(bench.runs.size());
    for (const auto& r : bench.rows) {
        out += std::to_string(r.truth_id) + ',' + std::to_string(r.inliers_true) + ',' +
               format_double(r.sigma_true) + ',' + std::to_string(r.detections) + ',' +
               std::to_string(runs) + ',' + format_double(r.scale_mean) + ',' +
               format_double(r.scale_std) + ',' + format_double(r.inliers_mean) + ',' +
               format_double(r.inliers_std) + '\n';
    }
    return out;
}

std::string bench_to_json(const BenchResult& bench, const SceneSpec& spec,
                          const EstimatorConfig& config, int runs) {
    JsonWriter w;
    w.begin_object();
    w.key("scenario");
    w.begin_object();
    w.key("model"); w.value(model_name(spec.model));
    w.key("structures"); w.value(static_cast<int>(spec.structures.size()));
    w.key("outliers"); w.value(spec.outliers);
    w.end_object();
    w.key("runs"); w.value(runs);
    w.key("trials"); w.value(config.trials);
    w.key("seed"); w.value(config.seed);
    w.key("rows");
    w.begin_array();
    for (const auto& r : bench.rows) {
        w.begin_object();
        w.key("structure"); w.value(r.truth_id);
        w.key("inliers_true"); w.value(r.inliers_true);
        w.key("sigma_true"); w.value(r.sigma_true);
        w.key("detections"); w.value(r.detections);
        w.key("scale_mean"); w.value(r.scale_mean);
        w.key("scale_std"); w.value(r.scale_std);
        w.key("inliers_mean"); w.value(r.inliers_mean);
        w.key("inliers_std"); w.value(r.inliers_std);
        w.end_object();
    }
    w.end_array();
    w.key("wall_mean_seconds"); w.value(bench.wall_mean);
    w.key("wall_std_seconds"); w.value(bench.wall_std);
    w.end_object();
    return w.take();
}

std::string plot_dump_json(const BenchResult& bench, const SceneSpec& spec) {
    JsonWriter w;
    w.begin_object();
    w.key("model"); w.value(model_name(spec.model));
    w.key("runs");
    w.begin_array();
    for (const auto& run : bench.runs) {
        w.begin_object();
        w.key("seed"); w.value(run.seed);
        w.key("structures");
        w.begin_array();
        const LabeledScene scene = generate(spec, run.seed);
        for (const auto& s : run.result.structures) {
            w.begin_object();
            w.key("strength"); w.value(s.strength);
            w.key("scale"); w.value(s.sigma_tls);
            w.key("points");
            w.begin_array();
            for (int idx : s.inliers) {
                w.begin_array();
                for (int k = 0; k < scene.points[idx].y.size(); ++k)
                    w.value(scene.points[idx].y[k]);
                w.end_array();
            }
            w.end_array();
            w.end_object();
        }
        w.end_array();
        w.end_object();
    }
    w.end_array();
    w.end_object();
    return w.take();
}

}  // namespace mulinl

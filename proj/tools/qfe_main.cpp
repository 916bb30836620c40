// Command-line front end: score | ablate | granger | subjectivity | simulate.
// Exit codes: 0 success, 1 usage error, 2 data/domain error.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qfe/qfe.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr int kSchemaVersion = 1;

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw qfe::Error(qfe::errc::data, "cannot write '" + path.string() + "'");
    out << content;
}

void write_json(const fs::path& path, const ordered_json& j) {
    write_file(path, j.dump(2) + "\n");
}

// Single numeric series from a small CSV: the named column when given, else
// a "tau" column, else the only column.
std::vector<double> read_series_csv(const std::string& path, const std::string& column = {}) {
    std::ifstream in(path);
    if (!in) throw qfe::Error(qfe::errc::data, "cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw qfe::Error(qfe::errc::empty_input, "missing header row");
    const auto header = qfe::csv_detail::split_line(line);

    std::size_t target = header.size();
    if (!column.empty()) {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == column) target = i;
        if (target == header.size())
            throw qfe::Error(qfe::errc::format, "no column '" + column + "' in " + path);
    } else {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == "tau") target = i;
        if (target == header.size()) {
            if (header.size() != 1)
                throw qfe::Error(qfe::errc::format,
                                 "ambiguous columns in " + path + "; pass --column");
            target = 0;
        }
    }

    std::vector<double> values;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (qfe::csv_detail::trim(line).empty()) continue;
        const auto cells = qfe::csv_detail::split_line(line);
        if (cells.size() != header.size())
            throw qfe::Error(qfe::errc::format,
                             "row " + std::to_string(row) + " width mismatch in " + path);
        values.push_back(qfe::csv_detail::parse_cell(cells[target], row, header[target]));
    }
    if (values.empty()) throw qfe::Error(qfe::errc::empty_input, "no data rows in " + path);
    return values;
}

std::vector<double> downsample(const std::vector<double>& v, int step) {
    if (step <= 1) return v;
    std::vector<double> out;
    out.reserve(v.size() / static_cast<std::size_t>(step) + 1);
    for (std::size_t i = 0; i < v.size(); i += static_cast<std::size_t>(step)) out.push_back(v[i]);
    return out;
}

std::map<qfe::Modality, double> parse_weight_list(const std::vector<std::string>& items,
                                                  const char* what) {
    std::map<qfe::Modality, double> out;
    for (const auto& item : items) {
        const auto eq = item.find('=');
        if (eq == std::string::npos)
            throw CLI::ValidationError(std::string(what), "expected <modality>=<value>");
        try {
            out[qfe::modality_from_name(item.substr(0, eq))] = std::stod(item.substr(eq + 1));
        } catch (const qfe::Error& e) {
            throw CLI::ValidationError(std::string(what), e.what());
        } catch (const std::exception&) {
            throw CLI::ValidationError(std::string(what), "bad value in '" + item + "'");
        }
    }
    return out;
}

// ---- score -------------------------------------------------------------------

struct ScoreOptions {
    std::string input;
    std::string out_dir = "qfe_out";
    std::string subject_id;
    double fps = 0.0;
    int approach = 1;
    std::string category = "overall";
    double lambda = 100.0;
    double x_max = 5.0;
    int stride = 5;
    int order = 20;
    double delta_max = 1.0;
    bool closed_form = false;
    std::vector<std::string> lambda_k;
    std::vector<std::string> weights;
    double sigma_weight = 1.0;
    double epsilon = 0.0;
    std::vector<std::string> modalities = {"lm", "hp", "gaze"};
    double confidence_threshold = 0.8;
    int max_gap = 10;
    bool no_clamp = false;
    bool skip_preprocess = false;
    unsigned threads = 1;
};

qfe::QfeConfig build_config(const ScoreOptions& opt) {
    qfe::QfeConfig config;
    config.spatial.lambda = opt.lambda;
    config.spatial.x_max = opt.x_max;
    config.spatial.au_category = opt.category;
    config.temporal.stride = opt.stride;
    config.temporal.taylor_order = opt.order;
    config.temporal.delta_max = opt.delta_max;
    config.temporal.use_closed_form = opt.closed_form;
    config.combine.approach = opt.approach == 2 ? qfe::CombineApproach::weighted_sum
                                                : qfe::CombineApproach::domain_weighted;
    if (!opt.lambda_k.empty())
        config.combine.lambda_k = parse_weight_list(opt.lambda_k, "--lambda-k");
    if (!opt.weights.empty()) config.combine.weights = parse_weight_list(opt.weights, "--weights");
    config.combine.sigma_weight = opt.sigma_weight;
    config.combine.epsilon = opt.epsilon;
    config.modalities.clear();
    for (const auto& m : opt.modalities) config.modalities.push_back(qfe::modality_from_name(m));
    // weights default to 1 for any configured modality the user left out
    for (qfe::Modality m : config.modalities) config.combine.weights.try_emplace(m, 1.0);
    return config;
}

ordered_json preprocess_to_json(const qfe::PreprocessPolicy& p, bool skipped) {
    ordered_json j;
    j["applied"] = !skipped;
    j["confidence_threshold"] = p.confidence_threshold;
    j["max_gap"] = p.max_gap;
    j["clamp"] = p.clamp;
    return j;
}

int run_score(const ScoreOptions& opt) {
    const qfe::QfeConfig config = build_config(opt);
    const qfe::PreprocessPolicy policy{opt.confidence_threshold, opt.max_gap, !opt.no_clamp};

    qfe::FeatureSequence seq = qfe::load_feature_csv(opt.input, opt.fps, opt.subject_id);
    if (!opt.skip_preprocess) seq = qfe::preprocess(seq, policy);

    const qfe::ExpressivenessSeries series =
        qfe::compute_qfe(seq, config, qfe::default_au_category_map(), opt.threads);

    ordered_json report;
    report["schema"] = kSchemaVersion;
    report["command"] = "score";
    const ordered_json series_json = qfe::series_to_json(series);
    for (const auto& [key, value] : series_json.items()) report[key] = value;
    report["config"]["fps"] = opt.fps;
    report["config"]["approach_id"] = opt.approach;
    report["config"]["preprocess"] = preprocess_to_json(policy, opt.skip_preprocess);
    if (opt.approach == 1) {
        // attained when every AU is maximal and every modality moves at full
        // speed: lambda * (1 + mean(lambda_k))
        double acc = 0.0;
        for (qfe::Modality m : config.modalities) acc += config.combine.lambda_k.at(m);
        report["config"]["tau_upper_bound"] =
            config.spatial.lambda *
            (1.0 + acc / static_cast<double>(config.modalities.size()));
    } else if (opt.approach == 2) {
        double acc = config.combine.sigma_weight + config.combine.epsilon;
        for (qfe::Modality m : config.modalities) acc += config.combine.weights.at(m);
        report["config"]["tau_upper_bound"] = acc;
    }

    if (opt.approach == 3) {
        // latent route: one factor over sigma and the delta series
        qfe::Matrix m(series.size(), 1 + config.modalities.size());
        std::vector<std::string> labels = {"sigma"};
        const auto sigma = series.sigma_series();
        for (std::size_t i = 0; i < series.size(); ++i) m(i, 0) = sigma[i];
        for (std::size_t k = 0; k < config.modalities.size(); ++k) {
            const auto d = series.delta_series(config.modalities[k]);
            for (std::size_t i = 0; i < series.size(); ++i) m(i, k + 1) = d[i];
            labels.push_back(std::string("delta_") + qfe::modality_key(config.modalities[k]));
        }
        const qfe::FactorInput input = qfe::make_factor_input(m, labels);
        const qfe::Matrix corr = qfe::correlation_matrix(input.matrix);
        const qfe::BartlettResult bart = qfe::bartlett_sphericity(corr, series.size());
        const qfe::KmoResult k = qfe::kmo(corr);
        const qfe::FactorModel model = qfe::fit_one_factor(input);
        report["factor"] = qfe::factor_report_to_json(bart, k, model);
        report["factor"]["labels"] = labels;
        report["tau_fa"] = qfe::factor_scores(model, input, true);
    }

    fs::create_directories(opt.out_dir);
    write_json(fs::path(opt.out_dir) / "report.json", report);
    write_file(fs::path(opt.out_dir) / "series.csv", qfe::series_to_csv(series));

    const std::vector<qfe::svg::Series> plot = {{"sigma", {}, series.sigma_series(), false},
                                                {"tau", {}, series.tau_series(), false}};
    write_file(fs::path(opt.out_dir) / "expressiveness.svg",
               qfe::svg::line_chart(plot, "per-frame expressiveness", "frame", "score"));
    std::cout << "score: " << series.size() << " frames -> " << opt.out_dir << "\n";
    return 0;
}

// ---- ablate ------------------------------------------------------------------

struct AblateOptions {
    std::string input;
    std::string out_dir = "qfe_out";
    double fps = 0.0;
    std::vector<int> strides = {5, 10, 20, 40};
    int order = 20;
    double confidence_threshold = 0.8;
    int max_gap = 10;
};

int run_ablate(const AblateOptions& opt) {
    qfe::FeatureSequence seq = qfe::load_feature_csv(opt.input, opt.fps);
    seq = qfe::preprocess(seq, {opt.confidence_threshold, opt.max_gap, true});
    const qfe::AblationReport rep = qfe::ablate_modalities(seq, opt.strides, opt.order);

    std::vector<std::string> labels;
    for (qfe::Modality m : rep.modalities) labels.push_back(qfe::modality_name(m));

    ordered_json report;
    report["schema"] = kSchemaVersion;
    report["command"] = "ablate";
    report["config"] = {{"input", opt.input},
                        {"fps", opt.fps},
                        {"strides", opt.strides},
                        {"taylor_order", opt.order}};
    report["modalities"] = labels;
    ordered_json omitted = ordered_json::array();
    for (qfe::Modality m : rep.omitted) omitted.push_back(qfe::modality_name(m));
    report["omitted"] = omitted;

    fs::create_directories(opt.out_dir);
    ordered_json by_stride;
    for (const auto& [stride, matrix] : rep.srcc_by_stride) {
        ordered_json rows = ordered_json::array();
        for (std::size_t i = 0; i < matrix.rows(); ++i) {
            ordered_json row = ordered_json::array();
            for (std::size_t j = 0; j < matrix.cols(); ++j) row.push_back(matrix(i, j));
            rows.push_back(row);
        }
        by_stride[std::to_string(stride)] = rows;
        const std::string tag = "srcc_stride_" + std::to_string(stride);
        write_file(fs::path(opt.out_dir) / (tag + ".csv"), qfe::matrix_to_csv(matrix, labels));
        write_file(fs::path(opt.out_dir) / (tag + ".svg"),
                   qfe::svg::heatmap(matrix, labels,
                                     "temporal feature SRCC, stride " + std::to_string(stride)));
    }
    report["srcc"] = std::move(by_stride);
    write_json(fs::path(opt.out_dir) / "report.json", report);
    std::cout << "ablate: " << rep.modalities.size() << " modalities x " << opt.strides.size()
              << " strides -> " << opt.out_dir << "\n";
    return 0;
}

// ---- granger -----------------------------------------------------------------

struct GrangerOptions {
    std::string cause;
    std::string effect;
    std::string cause_column;
    std::string effect_column;
    std::string out_dir = "qfe_out";
    double fps = 5.0;
    int segment_length = 300;
    std::vector<int> lags;
    std::vector<double> lag_seconds;
    double alpha = 0.05;
    int downsample_step = 1;
};

int run_granger(const GrangerOptions& opt) {
    std::vector<double> cause = read_series_csv(opt.cause, opt.cause_column);
    std::vector<double> effect = read_series_csv(opt.effect, opt.effect_column);
    cause = downsample(cause, opt.downsample_step);
    effect = downsample(effect, opt.downsample_step);

    std::vector<int> lags = opt.lags;
    for (double s : opt.lag_seconds) lags.push_back(static_cast<int>(std::lround(s * opt.fps)));
    if (lags.empty()) lags = {5, 10, 25, 50};
    std::sort(lags.begin(), lags.end());
    lags.erase(std::unique(lags.begin(), lags.end()), lags.end());

    const qfe::GcSegmentReport rep =
        qfe::segment_and_test({cause, opt.fps}, effect, opt.segment_length, lags, opt.alpha);

    ordered_json report;
    report["schema"] = kSchemaVersion;
    report["command"] = "granger";
    report["config"] = {{"cause", opt.cause},       {"effect", opt.effect},
                        {"fps", opt.fps},           {"segment_length", opt.segment_length},
                        {"lags", lags},             {"alpha", opt.alpha},
                        {"downsample", opt.downsample_step}};
    report["report"] = qfe::gc_report_to_json(rep);

    fs::create_directories(opt.out_dir);
    write_json(fs::path(opt.out_dir) / "report.json", report);
    write_file(fs::path(opt.out_dir) / "gc_table.csv", qfe::gc_report_to_csv(rep));
    std::cout << "granger: " << rep.segments_total << " segments, " << lags.size() << " lags -> "
              << opt.out_dir << "\n";
    return 0;
}

// ---- subjectivity --------------------------------------------------------------

struct SubjectivityOptions {
    std::string input_dir;
    std::string out_dir = "qfe_out";
    std::string column;
    std::size_t grid_points = 256;
    bool normalize = false;  // min-max scale each series before the metrics
};

int run_subjectivity(const SubjectivityOptions& opt) {
    std::map<std::string, std::vector<double>> subjects;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(opt.input_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".csv")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& p : files)
        subjects[p.stem().string()] = read_series_csv(p.string(), opt.column);
    if (subjects.size() < 2)
        throw qfe::Error(qfe::errc::domain,
                         "need at least 2 subject CSVs in '" + opt.input_dir + "'");

    if (opt.normalize) {
        for (auto& [id, series] : subjects) {
            const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
            const double range = *hi - *lo;
            for (double& v : series) v = range == 0.0 ? 0.0 : (v - *lo) / range;
        }
    }

    ordered_json report;
    report["schema"] = kSchemaVersion;
    report["command"] = "subjectivity";
    report["config"] = {{"input", opt.input_dir},
                        {"grid_points", opt.grid_points},
                        {"normalize", opt.normalize}};

    fs::create_directories(opt.out_dir);
    ordered_json metrics;
    for (const qfe::PairMetric metric : {qfe::PairMetric::marpe, qfe::PairMetric::dtw,
                                         qfe::PairMetric::srcc, qfe::PairMetric::ccc}) {
        const qfe::PairwiseReport rep = qfe::pairwise_matrix(subjects, metric);
        const std::string name = qfe::pair_metric_name(metric);
        metrics[name] = qfe::pairwise_to_json(rep);
        write_file(fs::path(opt.out_dir) / (name + ".csv"),
                   qfe::matrix_to_csv(rep.values, rep.subject_ids));
        if (metric == qfe::PairMetric::srcc)
            write_file(fs::path(opt.out_dir) / "srcc_p.csv",
                       qfe::matrix_to_csv(rep.p_values, rep.subject_ids));
        write_file(fs::path(opt.out_dir) / (name + "_heatmap.svg"),
                   qfe::svg::heatmap(rep.values, rep.subject_ids, name + " across subjects"));

        std::vector<double> offdiag;
        for (std::size_t i = 0; i < rep.values.rows(); ++i)
            for (std::size_t j = 0; j < rep.values.cols(); ++j)
                if (i != j && std::isfinite(rep.values(i, j))) offdiag.push_back(rep.values(i, j));
        try {
            const qfe::KdeCurve curve = qfe::kde(offdiag, opt.grid_points);
            write_file(fs::path(opt.out_dir) / (name + "_kde.svg"),
                       qfe::svg::kde_chart({{name, curve.grid, curve.density, true}},
                                           "distribution of pairwise " + name, name));
            metrics[name]["kde_bandwidth"] = curve.bandwidth;
        } catch (const qfe::Error& e) {
            qfe::log::warn(std::string("KDE skipped for ") + name + ": " + e.what());
        }
    }
    report["subjects"] = ordered_json::array();
    for (const auto& [id, _] : subjects) report["subjects"].push_back(id);
    report["metrics"] = std::move(metrics);
    write_json(fs::path(opt.out_dir) / "report.json", report);
    std::cout << "subjectivity: " << subjects.size() << " subjects -> " << opt.out_dir << "\n";
    return 0;
}

// ---- simulate ------------------------------------------------------------------

struct SimulateOptions {
    std::string input;
    std::string out_dir = "qfe_out";
    double fps = 0.0;
    std::uint64_t seed = 0;
    double noise_scale = 0.05;
    double anomaly_fraction = 0.02;
    double anomaly_gain_max = 2.0;
    std::string unit = "per_frame";
    std::string noise_dist = "uniform";
    bool mitigate = true;
    std::string category = "overall";
    std::vector<std::string> modalities = {"lm", "hp", "gaze"};
    double confidence_threshold = 0.8;
    int max_gap = 10;
    std::size_t grid_points = 256;
};

int run_simulate(const SimulateOptions& opt) {
    qfe::PerturbationConfig cfg;
    cfg.seed = opt.seed;
    cfg.noise_scale = opt.noise_scale;
    cfg.anomaly_fraction = opt.anomaly_fraction;
    cfg.anomaly_gain_max = opt.anomaly_gain_max;
    cfg.unit = opt.unit == "per_scalar" ? qfe::PerturbationUnit::per_scalar
                                        : qfe::PerturbationUnit::per_frame;
    cfg.noise_distribution = opt.noise_dist == "half_normal" ? qfe::NoiseDistribution::half_normal
                                                             : qfe::NoiseDistribution::uniform;

    qfe::QfeConfig config;
    config.spatial.au_category = opt.category;
    config.modalities.clear();
    for (const auto& m : opt.modalities) config.modalities.push_back(qfe::modality_from_name(m));

    const qfe::PreprocessPolicy mitigation{opt.confidence_threshold, opt.max_gap, true};
    const qfe::FeatureSequence seq = qfe::load_feature_csv(opt.input, opt.fps);
    const qfe::RobustnessReport rep = qfe::run_robustness_experiment(seq, cfg, mitigation, config);

    ordered_json report;
    report["schema"] = kSchemaVersion;
    report["command"] = "simulate";
    report["config"] = qfe::perturbation_config_to_json(cfg);
    report["config"]["input"] = opt.input;
    report["config"]["fps"] = opt.fps;
    report["config"]["au_category"] = opt.category;
    report["config"]["mitigate"] = opt.mitigate;
    const ordered_json body = qfe::robustness_report_to_json(rep);
    report["anomaly_indices"] = body["anomaly_indices"];
    report["clean"] = body["clean"];
    report["perturbed"] = body["perturbed"];
    if (opt.mitigate) report["mitigated"] = body["mitigated"];

    fs::create_directories(opt.out_dir);

    auto variant_csv = [&](const std::vector<double>& clean, const std::vector<double>& pert,
                           const std::vector<double>& mit) {
        std::string csv =
            opt.mitigate ? "frame,clean,perturbed,mitigated\n" : "frame,clean,perturbed\n";
        for (std::size_t i = 0; i < clean.size(); ++i) {
            csv += std::to_string(i);
            csv += ',';
            qfe::csv_detail::append_number(csv, clean[i]);
            csv += ',';
            qfe::csv_detail::append_number(csv, pert[i]);
            if (opt.mitigate) {
                csv += ',';
                qfe::csv_detail::append_number(csv, i < mit.size() ? mit[i] : 0.0);
            }
            csv += '\n';
        }
        return csv;
    };
    write_file(fs::path(opt.out_dir) / "sigma_series.csv",
               variant_csv(rep.clean.sigma, rep.perturbed.sigma, rep.mitigated.sigma));
    for (qfe::Modality m : config.modalities)
        write_file(fs::path(opt.out_dir) /
                       (std::string("delta_") + qfe::modality_key(m) + "_series.csv"),
                   variant_csv(rep.clean.delta.at(m), rep.perturbed.delta.at(m),
                               rep.mitigated.delta.at(m)));

    // distribution plot of the sigma variants
    try {
        std::vector<qfe::svg::Series> curves;
        auto add_curve = [&](const char* name, const std::vector<double>& v) {
            const qfe::KdeCurve c = qfe::kde(v, opt.grid_points);
            curves.push_back({name, c.grid, c.density, true});
        };
        add_curve("clean", rep.clean.sigma);
        add_curve("perturbed", rep.perturbed.sigma);
        if (opt.mitigate) add_curve("mitigated", rep.mitigated.sigma);
        write_file(
            fs::path(opt.out_dir) / "sigma_kde.svg",
            qfe::svg::kde_chart(curves, "spatial expressiveness under perturbation", "sigma"));
    } catch (const qfe::Error& e) {
        qfe::log::warn(std::string("sigma KDE skipped: ") + e.what());
    }

    write_json(fs::path(opt.out_dir) / "report.json", report);
    std::cout << "simulate: " << rep.anomaly_indices.size() << " anomalous frames -> "
              << opt.out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bounded per-frame facial expressiveness scoring and analytics"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Key-value file supplying any flag; command line wins");

    ScoreOptions score;
    CLI::App* cmd_score = app.add_subcommand("score", "Compute per-frame expressiveness scores");
    cmd_score->configurable()->fallthrough();
    cmd_score->add_option("input", score.input, "OpenFace-convention feature CSV")->required();
    cmd_score->add_option("--fps", score.fps, "Frames per second of the input")->required();
    cmd_score->add_option("-o,--out", score.out_dir, "Output directory");
    cmd_score->add_option("--subject-id", score.subject_id, "Subject id (default: file stem)");
    cmd_score->add_option("--approach", score.approach, "Combination approach: 1, 2 or 3")
        ->check(CLI::Range(1, 3));
    cmd_score->add_option("--category", score.category, "AU category for the spatial score");
    cmd_score->add_option("--lambda", score.lambda, "Spatial score upper bound");
    cmd_score->add_option("--x-max", score.x_max, "Maximum AU intensity");
    cmd_score->add_option("--stride", score.stride, "Velocity frame interval");
    cmd_score->add_option("--order", score.order, "Taylor approximation order");
    cmd_score->add_option("--delta-max", score.delta_max, "Maximum velocity for scaling");
    cmd_score->add_flag("--closed-form", score.closed_form,
                        "Use exp(dv)-1 instead of the truncated series");
    CLI::Option* opt_lk = cmd_score->add_option(
        "--lambda-k", score.lambda_k, "Approach-1 modality multipliers, e.g. lm=100 hp=100");
    CLI::Option* opt_w = cmd_score->add_option("--weights", score.weights,
                                               "Approach-2 modality weights, e.g. lm=1 hp=1");
    CLI::Option* opt_sw =
        cmd_score->add_option("--sigma-weight", score.sigma_weight, "Approach-2 sigma weight");
    CLI::Option* opt_eps =
        cmd_score->add_option("--epsilon", score.epsilon, "Approach-2 adjustment offset");
    cmd_score->add_option("--modalities", score.modalities,
                          "Temporal modalities (lm, lm3d, hp, hp_rot, gaze, gaze_angle)");
    cmd_score->add_option("--confidence-threshold", score.confidence_threshold,
                          "Detection confidence cutoff");
    cmd_score->add_option("--max-gap", score.max_gap, "Longest interpolatable invalid run");
    cmd_score->add_flag("--no-clamp", score.no_clamp, "Skip clipping AU intensities to [0,5]");
    cmd_score->add_flag("--skip-preprocess", score.skip_preprocess,
                        "Score the raw parsed sequence");
    cmd_score->add_option("--threads", score.threads, "Worker threads for the spatial score");

    AblateOptions ablate;
    CLI::App* cmd_ablate =
        app.add_subcommand("ablate", "Frame-rate and temporal-modality association study");
    cmd_ablate->configurable()->fallthrough();
    cmd_ablate->add_option("input", ablate.input, "OpenFace-convention feature CSV")->required();
    cmd_ablate->add_option("--fps", ablate.fps, "Frames per second of the input")->required();
    cmd_ablate->add_option("-o,--out", ablate.out_dir, "Output directory");
    cmd_ablate->add_option("--strides", ablate.strides, "Velocity strides to sweep");
    cmd_ablate->add_option("--order", ablate.order, "Taylor approximation order");
    cmd_ablate->add_option("--confidence-threshold", ablate.confidence_threshold,
                           "Detection confidence cutoff");
    cmd_ablate->add_option("--max-gap", ablate.max_gap, "Longest interpolatable invalid run");

    GrangerOptions granger;
    CLI::App* cmd_granger =
        app.add_subcommand("granger", "Context-to-response Granger causality over segments");
    cmd_granger->configurable()->fallthrough();
    cmd_granger->add_option("--cause", granger.cause, "Context series CSV")->required();
    cmd_granger->add_option("--effect", granger.effect, "Response series CSV")->required();
    cmd_granger->add_option("--cause-column", granger.cause_column, "Column in the cause CSV");
    cmd_granger->add_option("--effect-column", granger.effect_column, "Column in the effect CSV");
    cmd_granger->add_option("-o,--out", granger.out_dir, "Output directory");
    cmd_granger->add_option("--fps", granger.fps, "Frames per second after downsampling");
    cmd_granger->add_option("--segment-length", granger.segment_length,
                            "Frames per non-overlapping segment");
    cmd_granger->add_option("--lags", granger.lags, "Lags in frames");
    cmd_granger->add_option("--lag-seconds", granger.lag_seconds, "Lags in seconds (uses fps)");
    cmd_granger->add_option("--alpha", granger.alpha, "Significance level");
    cmd_granger->add_option("--downsample", granger.downsample_step,
                            "Keep every k-th sample before testing");

    SubjectivityOptions subj;
    CLI::App* cmd_subj =
        app.add_subcommand("subjectivity", "Cross-subject expressiveness difference report");
    cmd_subj->configurable()->fallthrough();
    cmd_subj->add_option("input", subj.input_dir, "Directory of per-subject score CSVs")
        ->required();
    cmd_subj->add_option("-o,--out", subj.out_dir, "Output directory");
    cmd_subj->add_option("--column", subj.column, "Score column name (default: tau)");
    cmd_subj->add_option("--grid-points", subj.grid_points, "KDE grid resolution");
    cmd_subj->add_flag("--normalize", subj.normalize,
                       "Min-max scale each subject series before the metrics");

    SimulateOptions sim;
    CLI::App* cmd_sim = app.add_subcommand("simulate", "Noise and anomaly robustness experiment");
    cmd_sim->configurable()->fallthrough();
    cmd_sim->add_option("input", sim.input, "OpenFace-convention feature CSV")->required();
    cmd_sim->add_option("--fps", sim.fps, "Frames per second of the input")->required();
    cmd_sim->add_option("-o,--out", sim.out_dir, "Output directory");
    cmd_sim->add_option("--seed", sim.seed, "Perturbation RNG seed");
    cmd_sim->add_option("--noise-scale", sim.noise_scale, "Upper bound of the noise multiplier");
    cmd_sim->add_option("--anomaly-fraction", sim.anomaly_fraction,
                        "Fraction of frames made anomalous");
    cmd_sim->add_option("--anomaly-gain-max", sim.anomaly_gain_max, "Upper bound of the gain");
    cmd_sim->add_option("--unit", sim.unit, "Perturbation unit")
        ->check(CLI::IsMember({"per_frame", "per_scalar"}));
    cmd_sim->add_option("--noise-dist", sim.noise_dist, "Noise multiplier distribution")
        ->check(CLI::IsMember({"uniform", "half_normal"}));
    cmd_sim->add_flag("--mitigate,!--no-mitigate", sim.mitigate,
                      "Include the clamped and confidence-filtered variant");
    cmd_sim->add_option("--category", sim.category, "AU category for the spatial score");
    cmd_sim->add_option("--modalities", sim.modalities, "Temporal modalities to track");
    cmd_sim->add_option("--confidence-threshold", sim.confidence_threshold,
                        "Mitigation confidence cutoff");
    cmd_sim->add_option("--max-gap", sim.max_gap, "Mitigation interpolation gap");
    cmd_sim->add_option("--grid-points", sim.grid_points, "KDE grid resolution");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
        std::cerr << "usage error: " << e.what() << "\n";
        std::cerr << "run with --help for usage\n";
        return 1;
    }

    try {
        if (cmd_score->parsed()) {
            const bool wants_weighted = *opt_w || *opt_sw || *opt_eps;
            if (*opt_lk && *opt_w) {
                std::cerr << "usage error: --lambda-k and --weights are mutually exclusive\n";
                return 1;
            }
            if (score.approach == 1 && wants_weighted) {
                std::cerr << "usage error: approach 1 does not take --weights/--sigma-weight/"
                             "--epsilon\n";
                return 1;
            }
            if (score.approach == 2 && *opt_lk) {
                std::cerr << "usage error: approach 2 does not take --lambda-k\n";
                return 1;
            }
            return run_score(score);
        }
        if (cmd_ablate->parsed()) return run_ablate(ablate);
        if (cmd_granger->parsed()) return run_granger(granger);
        if (cmd_subj->parsed()) return run_subjectivity(subj);
        if (cmd_sim->parsed()) return run_simulate(sim);
        std::cerr << "usage error: no command\n";
        return 1;
    } catch (const CLI::ValidationError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const qfe::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

#include "mpguard/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mpguard/core.hpp"
#include "mpguard/eval.hpp"
#include "mpguard/iforest.hpp"
#include "mpguard/ingest.hpp"
#include "mpguard/matrix_profile.hpp"
#include "mpguard/ocsvm.hpp"
#include "mpguard/preprocess.hpp"
#include "mpguard/synthgen.hpp"
#include "mpguard/util.hpp"

namespace mpguard::cli {

namespace {

using nlohmann::ordered_json;

// --threads flag, else MPGUARD_THREADS, else 1
unsigned resolve_threads(std::optional<unsigned> flag) {
    if (flag) {
        if (*flag == 0) throw std::invalid_argument("--threads must be >= 1");
        return *flag;
    }
    if (const char* env = std::getenv("MPGUARD_THREADS")) {
        const auto v = util::parse_int(env);
        if (!v || *v < 1)
            throw std::invalid_argument("MPGUARD_THREADS must be a positive integer");
        return static_cast<unsigned>(*v);
    }
    return 1;
}

ingest::SchemaConfig load_schema(const std::string& path) {
    if (path.empty()) return {};
    return ingest::SchemaConfig::from_file(path);
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open output '" + path + "'");
    out << text;
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

void emit_report(const ordered_json& report, const std::string& report_path,
                 std::ostream& out) {
    const std::string text = report.dump(2) + "\n";
    out << text;
    if (!report_path.empty()) write_text_file(report_path, text);
}

// "auto:pN" (nearest-rank percentile of the profile distances) or a number
struct Threshold {
    std::optional<double> value;
    std::optional<double> quantile_q;

    static Threshold parse(const std::string& text, const char* flag) {
        Threshold t;
        if (text.starts_with("auto:p")) {
            const auto pct = util::parse_double(text.substr(6));
            if (!pct || !(*pct > 0.0 && *pct < 100.0))
                throw std::invalid_argument(std::string(flag) +
                                            ": expected auto:p<percent> with percent in (0,100)");
            t.quantile_q = *pct / 100.0;
            return t;
        }
        const auto v = util::parse_double(text);
        if (!v) throw std::invalid_argument(std::string(flag) + ": expected a number or auto:p<percent>");
        t.value = *v;
        return t;
    }

    double resolve(std::span<const double> distances) const {
        if (value) return *value;
        return util::nearest_rank_quantile(
            std::vector<double>(distances.begin(), distances.end()), *quantile_q);
    }
};

struct ProfileArgs {
    std::string input;
    std::string channel;
    std::string schema_path;
    std::size_t m = 0;
    std::optional<std::size_t> exclusion;
    std::optional<unsigned> threads_flag;
};

void add_profile_args(CLI::App* cmd, ProfileArgs& args) {
    cmd->add_option("--input", args.input, "input CSV")->required();
    cmd->add_option("--channel", args.channel, "sensor column name")->required();
    cmd->add_option("--m", args.m, "window length (signal specific, no default)")->required();
    cmd->add_option("--exclusion", args.exclusion,
                    "exclusion radius (default: ceil(m/2))");
    cmd->add_option("--threads", args.threads_flag, "worker threads (or MPGUARD_THREADS)");
    cmd->add_option("--schema", args.schema_path, "schema config file");
}

ordered_json profile_config_json(const ProfileArgs& args, std::size_t exclusion,
                                 unsigned threads) {
    ordered_json j;
    j["input"] = args.input;
    j["channel"] = args.channel;
    j["m"] = args.m;
    j["exclusion_radius"] = exclusion;
    j["threads"] = threads;
    if (!args.schema_path.empty()) j["schema"] = args.schema_path;
    return j;
}

void write_profile_csv(const mp::MatrixProfileResult& result, const std::string& path) {
    std::ostringstream out;
    if (result.has_counts())
        out << "index,distance,neighbor,similar_count\n";
    else
        out << "index,distance,neighbor\n";
    for (std::size_t i = 0; i < result.profile_length(); ++i) {
        out << i << ',' << util::fmt_double(result.distances[i]) << ','
            << result.neighbor_index[i];
        if (result.has_counts()) out << ',' << result.similar_counts[i];
        out << '\n';
    }
    write_text_file(path, out.str());
}

// The figure layout: one row per step; profile columns are empty for the
// final m-1 steps that start no window.
void emit_plotdata(const mp::MatrixProfileResult& result, const core::TimeSeries& series,
                   const ingest::LabelIntervals& labels, std::ostream& out) {
    if (labels.per_step.size() != series.size())
        throw std::invalid_argument("plotdata: label / series length mismatch");
    if (result.profile_length() + result.window_length - 1 != series.size())
        throw std::invalid_argument("plotdata: profile does not match the series");

    out << "step,value,mp_distance,similar_count,attack\n";
    for (std::size_t t = 0; t < series.size(); ++t) {
        out << t << ',' << util::fmt_double(series.values()[t]) << ',';
        if (t < result.profile_length()) {
            out << util::fmt_double(result.distances[t]) << ',';
            if (result.has_counts())
                out << result.similar_counts[t];
        } else {
            out << ',';
        }
        out << ',' << (labels.per_step[t] != 0 ? '1' : '0') << '\n';
    }
}

// ---- synth ----------------------------------------------------------------

int run_synth(const std::string& out_path, const std::string& config_path,
              const std::string& preset, std::size_t length, std::uint64_t seed,
              bool length_given, bool seed_given, const std::string& report_path,
              std::ostream& out) {
    synthgen::ProcessConfig config;
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw std::runtime_error("cannot open config '" + config_path + "'");
        std::stringstream buf;
        buf << in.rdbuf();
        config = synthgen::parse_process_config(buf.str());
        if (length_given) config.length = length;
        if (seed_given) config.seed = seed;
    } else {
        config = synthgen::default_process_config(length, seed);
    }

    ingest::Dataset ds = synthgen::generate(config);
    std::vector<synthgen::AttackSpec> attacks;
    if (!preset.empty()) {
        if (preset != "paper-mix")
            throw std::invalid_argument("unknown preset '" + preset + "'");
        attacks = synthgen::paper_mix_attacks(config, config.seed);
        ds = synthgen::inject_attacks(ds, attacks, config.seed);
    }
    ingest::write_csv(ds, out_path);

    ordered_json report;
    report["command"] = "synth";
    ordered_json cfg;
    cfg["out"] = out_path;
    cfg["length"] = config.length;
    cfg["seed"] = config.seed;
    cfg["preset"] = preset.empty() ? "none" : preset;
    auto channels = ordered_json::array();
    for (const auto& ch : config.channels) {
        ordered_json c;
        c["name"] = ch.name;
        c["kind"] = ch.kind == synthgen::Waveform::triangle ? "triangle"
                    : ch.kind == synthgen::Waveform::spiky  ? "spiky"
                                                            : "boolean_actuator";
        c["period"] = ch.period;
        c["amplitude"] = ch.amplitude;
        c["baseline"] = ch.baseline;
        c["noise_std"] = ch.noise_std;
        channels.push_back(c);
    }
    cfg["channels"] = channels;
    report["config"] = cfg;
    report["rows"] = ds.rows();
    report["attacks"] = attacks.size();
    auto intervals = ordered_json::array();
    for (const auto& iv : ds.labels.intervals)
        intervals.push_back({{"start", iv.start}, {"end", iv.end}});
    report["attack_intervals"] = intervals;
    emit_report(report, report_path, out);
    return 0;
}

// ---- profile / count / detect / plotdata -----------------------------------

int run_profile(const ProfileArgs& args, const std::string& out_path,
                const std::string& report_path, std::ostream& out) {
    const auto schema = load_schema(args.schema_path);
    const ingest::Dataset ds = ingest::load_csv(args.input, schema);
    const core::TimeSeries series = ds.channel(args.channel);

    mp::ProfileOptions options;
    options.window_length = args.m;
    options.exclusion_radius = args.exclusion;
    options.threads = resolve_threads(args.threads_flag);
    const mp::MatrixProfileResult result = mp::compute_profile(series, options);

    write_profile_csv(result, out_path);

    ordered_json report;
    report["command"] = "profile";
    report["config"] = profile_config_json(args, result.exclusion_radius, options.threads);
    report["config"]["out"] = out_path;
    report["profile_length"] = result.profile_length();
    report["max_distance"] = util::fmt_double(
        *std::max_element(result.distances.begin(), result.distances.end()));
    emit_report(report, report_path, out);
    return 0;
}

int run_count(const ProfileArgs& args, const std::string& epsilon_text,
              const std::string& out_path, const std::string& report_path,
              std::ostream& out) {
    const auto schema = load_schema(args.schema_path);
    const ingest::Dataset ds = ingest::load_csv(args.input, schema);
    const core::TimeSeries series = ds.channel(args.channel);
    const unsigned threads = resolve_threads(args.threads_flag);
    const Threshold epsilon = Threshold::parse(epsilon_text, "--epsilon");

    mp::ProfileOptions options;
    options.window_length = args.m;
    options.exclusion_radius = args.exclusion;
    options.threads = threads;

    double resolved_epsilon;
    mp::MatrixProfileResult result;
    if (epsilon.value) {
        resolved_epsilon = *epsilon.value;
        options.epsilon = resolved_epsilon;
        result = mp::compute_profile(series, options);
    } else {
        // the auto percentile needs the distances first
        result = mp::compute_profile(series, options);
        resolved_epsilon = epsilon.resolve(result.distances);
        result.similar_counts = mp::count_similar(series, args.m, resolved_epsilon,
                                                  result.exclusion_radius, threads);
        result.epsilon = resolved_epsilon;
    }

    std::ostringstream csv;
    csv << "index,similar_count\n";
    for (std::size_t i = 0; i < result.profile_length(); ++i)
        csv << i << ',' << result.similar_counts[i] << '\n';
    write_text_file(out_path, csv.str());

    ordered_json report;
    report["command"] = "count";
    report["config"] = profile_config_json(args, result.exclusion_radius, threads);
    report["config"]["out"] = out_path;
    report["config"]["epsilon"] = epsilon_text;
    report["config"]["epsilon_resolved"] = resolved_epsilon;
    report["profile_length"] = result.profile_length();
    emit_report(report, report_path, out);
    return 0;
}

int run_detect(const ProfileArgs& args, const std::string& epsilon_text,
               const std::string& distance_text, std::int64_t count_threshold,
               std::int64_t min_gap, const std::string& out_path,
               const std::string& pred_out, std::ostream& out) {
    if (count_threshold < 0)
        throw std::invalid_argument("--count-threshold must be >= 0");
    if (min_gap < 0) throw std::invalid_argument("--min-gap must be >= 0");

    const auto schema = load_schema(args.schema_path);
    const ingest::Dataset ds = ingest::load_csv(args.input, schema);
    const core::TimeSeries series = ds.channel(args.channel);
    const unsigned threads = resolve_threads(args.threads_flag);
    const Threshold epsilon = Threshold::parse(epsilon_text, "--epsilon");
    const Threshold distance = Threshold::parse(distance_text, "--distance-threshold");

    mp::ProfileOptions options;
    options.window_length = args.m;
    options.exclusion_radius = args.exclusion;
    options.threads = threads;

    const bool use_counts = count_threshold > 0;
    mp::MatrixProfileResult result;
    std::optional<double> resolved_epsilon;
    if (use_counts && epsilon.value) {
        options.epsilon = *epsilon.value;
        result = mp::compute_profile(series, options);
        resolved_epsilon = *epsilon.value;
    } else {
        result = mp::compute_profile(series, options);
        if (use_counts) {
            resolved_epsilon = epsilon.resolve(result.distances);
            result.similar_counts = mp::count_similar(series, args.m, *resolved_epsilon,
                                                      result.exclusion_radius, threads);
            result.epsilon = resolved_epsilon;
        }
    }
    const double resolved_distance = distance.resolve(result.distances);

    const auto intervals =
        mp::detect_anomalies(result, resolved_distance, count_threshold, min_gap);

    ordered_json report;
    report["command"] = "detect";
    ordered_json cfg = profile_config_json(args, result.exclusion_radius, threads);
    cfg["epsilon"] = use_counts ? ordered_json(epsilon_text) : ordered_json(nullptr);
    if (resolved_epsilon) cfg["epsilon_resolved"] = *resolved_epsilon;
    cfg["distance_threshold"] = distance_text;
    cfg["distance_threshold_resolved"] = resolved_distance;
    cfg["count_threshold"] = count_threshold;
    cfg["min_gap"] = min_gap;
    if (!out_path.empty()) cfg["out"] = out_path;
    if (!pred_out.empty()) cfg["pred_out"] = pred_out;
    report["config"] = cfg;

    auto ivs = ordered_json::array();
    for (const auto& iv : intervals) ivs.push_back({{"start", iv.start}, {"end", iv.end}});
    report["intervals"] = ivs;
    report["flagged_intervals"] = intervals.size();

    if (!pred_out.empty()) {
        // a flagged window start implicates the m steps it covers
        std::vector<std::uint8_t> pred(series.size(), 0);
        for (const auto& iv : intervals) {
            const auto lo = static_cast<std::size_t>(iv.start);
            const std::size_t hi = std::min(series.size() - 1,
                                            static_cast<std::size_t>(iv.end) + args.m - 1);
            for (std::size_t t = lo; t <= hi; ++t) pred[t] = 1;
        }
        std::ostringstream csv;
        csv << "step,pred\n";
        for (std::size_t t = 0; t < pred.size(); ++t)
            csv << t << ',' << static_cast<int>(pred[t]) << '\n';
        write_text_file(pred_out, csv.str());
    }

    emit_report(report, out_path, out);
    return 0;
}

int run_plotdata(const ProfileArgs& args, const std::string& epsilon_text,
                 const std::string& out_path, const std::string& report_path,
                 std::ostream& out) {
    const auto schema = load_schema(args.schema_path);
    const ingest::Dataset ds = ingest::load_csv(args.input, schema);
    const core::TimeSeries series = ds.channel(args.channel);
    const unsigned threads = resolve_threads(args.threads_flag);
    const Threshold epsilon = Threshold::parse(epsilon_text, "--epsilon");

    mp::ProfileOptions options;
    options.window_length = args.m;
    options.exclusion_radius = args.exclusion;
    options.threads = threads;

    mp::MatrixProfileResult result;
    double resolved_epsilon;
    if (epsilon.value) {
        resolved_epsilon = *epsilon.value;
        options.epsilon = resolved_epsilon;
        result = mp::compute_profile(series, options);
    } else {
        result = mp::compute_profile(series, options);
        resolved_epsilon = epsilon.resolve(result.distances);
        result.similar_counts = mp::count_similar(series, args.m, resolved_epsilon,
                                                  result.exclusion_radius, threads);
        result.epsilon = resolved_epsilon;
    }

    std::ostringstream plot;
    emit_plotdata(result, series, ds.labels, plot);
    write_text_file(out_path, plot.str());

    ordered_json report;
    report["command"] = "plotdata";
    report["config"] = profile_config_json(args, result.exclusion_radius, threads);
    report["config"]["out"] = out_path;
    report["config"]["epsilon"] = epsilon_text;
    report["config"]["epsilon_resolved"] = resolved_epsilon;
    report["rows"] = series.size();
    emit_report(report, report_path, out);
    return 0;
}

// ---- one-class model training / scoring ------------------------------------

struct TrainArgs {
    std::string input;
    std::string model_out;
    std::string schema_path;
    std::string preprocess_name = "none";
    std::string bool_mode_name = "bool";
    std::optional<std::size_t> pca_k;
    double pca_var = 0.95;
    bool include_attack_rows = false;
};

void add_train_args(CLI::App* cmd, TrainArgs& args) {
    cmd->add_option("--input", args.input, "training CSV")->required();
    cmd->add_option("--model-out", args.model_out, "model file to write")->required();
    cmd->add_option("--preprocess", args.preprocess_name,
                    "none | zero_mean | linear | pca")
        ->default_val("none");
    cmd->add_option("--bool-mode", args.bool_mode_name, "bool | non_bool")
        ->default_val("bool");
    cmd->add_option("--pca-k", args.pca_k, "fixed PCA component count");
    cmd->add_option("--pca-var", args.pca_var,
                    "PCA cumulative variance target (default 0.95)");
    cmd->add_flag("--include-attack-rows", args.include_attack_rows,
                  "train on all rows, not only label-0 rows");
    cmd->add_option("--schema", args.schema_path, "schema config file");
}

struct PreparedTraining {
    preprocess::Pipeline pipeline;
    preprocess::FeatureMatrix transformed;
    std::size_t raw_rows = 0;
    std::size_t used_rows = 0;
};

PreparedTraining prepare_training(const TrainArgs& args) {
    const auto schema = load_schema(args.schema_path);
    ingest::Dataset ds = ingest::load_csv(args.input, schema);
    PreparedTraining prep;
    prep.raw_rows = ds.rows();
    if (!args.include_attack_rows) ds = ingest::filter_normal_rows(ds);
    if (ds.rows() == 0)
        throw std::invalid_argument("no training rows left after the label filter");
    prep.used_rows = ds.rows();

    const auto variant = preprocess::variant_from_string(args.preprocess_name);
    const auto mode = preprocess::bool_mode_from_string(args.bool_mode_name);
    const auto choice = args.pca_k ? preprocess::PcaChoice::components(*args.pca_k)
                                   : preprocess::PcaChoice::variance_target(args.pca_var);
    prep.pipeline = preprocess::Pipeline::fit(ds.features, variant, mode, choice);
    prep.transformed = prep.pipeline.apply(ds.features);
    return prep;
}

ordered_json train_config_json(const TrainArgs& args) {
    ordered_json cfg;
    cfg["input"] = args.input;
    cfg["model_out"] = args.model_out;
    cfg["preprocess"] = args.preprocess_name;
    cfg["bool_mode"] = args.bool_mode_name;
    if (args.pca_k)
        cfg["pca_k"] = *args.pca_k;
    else
        cfg["pca_var"] = args.pca_var;
    cfg["include_attack_rows"] = args.include_attack_rows;
    if (!args.schema_path.empty()) cfg["schema"] = args.schema_path;
    return cfg;
}

int run_train_iforest(const TrainArgs& args, std::size_t trees,
                      std::optional<std::size_t> subsample,
                      std::optional<std::size_t> height_limit, double contamination,
                      std::uint64_t seed, std::optional<unsigned> threads_flag,
                      const std::string& report_path, std::ostream& out) {
    PreparedTraining prep = prepare_training(args);

    iforest::ForestOptions options;
    options.n_trees = trees;
    options.subsample = subsample.value_or(std::min<std::size_t>(256, prep.used_rows));
    options.height_limit = height_limit;
    options.contamination = contamination;
    options.seed = seed;
    options.threads = resolve_threads(threads_flag);
    const iforest::ForestModel model = iforest::fit_forest(prep.transformed.data(), options);

    std::ostringstream file;
    file << "mpguard-model 1\ntype iforest\n";
    prep.pipeline.save(file);
    iforest::save_forest(model, file);
    write_text_file(args.model_out, file.str());

    ordered_json report;
    report["command"] = "train-iforest";
    ordered_json cfg = train_config_json(args);
    cfg["trees"] = options.n_trees;
    cfg["subsample"] = options.subsample;
    cfg["height_limit"] = model.height_limit;
    cfg["contamination"] = contamination;
    cfg["seed"] = seed;
    cfg["threads"] = options.threads;
    report["config"] = cfg;
    report["rows_total"] = prep.raw_rows;
    report["rows_trained"] = prep.used_rows;
    report["features"] = prep.transformed.cols();
    report["score_threshold"] = model.score_threshold;
    emit_report(report, report_path, out);
    return 0;
}

int run_train_ocsvm(const TrainArgs& args, double nu, const std::string& kernel_name,
                    const std::string& gamma_text, double tol, std::size_t max_train_rows,
                    const std::string& report_path, std::ostream& out) {
    PreparedTraining prep = prepare_training(args);

    // deterministic stride subsample for tractable SMO on big files
    core::Matrix train = prep.transformed.data();
    std::size_t stride = 1;
    if (max_train_rows > 0 && train.rows > max_train_rows) {
        stride = (train.rows + max_train_rows - 1) / max_train_rows;
        core::Matrix reduced((train.rows + stride - 1) / stride, train.cols);
        for (std::size_t r = 0, k = 0; r < train.rows; r += stride, ++k)
            for (std::size_t c = 0; c < train.cols; ++c)
                reduced.at(k, c) = train.at(r, c);
        train = std::move(reduced);
    }

    ocsvm::TrainOptions options;
    options.nu = nu;
    options.tol = tol;
    if (kernel_name == "rbf")
        options.kernel.kind = ocsvm::KernelKind::rbf;
    else if (kernel_name == "linear")
        options.kernel.kind = ocsvm::KernelKind::linear;
    else
        throw std::invalid_argument("--kernel must be rbf or linear");

    double resolved_gamma = 0.0;
    if (options.kernel.kind == ocsvm::KernelKind::rbf) {
        if (gamma_text == "auto") {
            resolved_gamma = ocsvm::default_gamma(train);
        } else {
            const auto g = util::parse_double(gamma_text);
            if (!g || !(*g > 0.0))
                throw std::invalid_argument("--gamma must be positive or 'auto'");
            resolved_gamma = *g;
        }
        options.kernel.gamma = resolved_gamma;
    }

    const ocsvm::SvmModel model = ocsvm::train_ocsvm(train, options);

    std::ostringstream file;
    file << "mpguard-model 1\ntype ocsvm\n";
    prep.pipeline.save(file);
    ocsvm::save_svm(model, file);
    write_text_file(args.model_out, file.str());

    ordered_json report;
    report["command"] = "train-ocsvm";
    ordered_json cfg = train_config_json(args);
    cfg["nu"] = nu;
    cfg["kernel"] = kernel_name;
    if (options.kernel.kind == ocsvm::KernelKind::rbf) {
        cfg["gamma"] = gamma_text;
        cfg["gamma_resolved"] = resolved_gamma;
    }
    cfg["tol"] = tol;
    cfg["max_train_rows"] = max_train_rows;
    cfg["stride"] = stride;
    report["config"] = cfg;
    report["rows_total"] = prep.raw_rows;
    report["rows_trained"] = train.rows;
    report["support_vectors"] = model.support_vectors.rows;
    report["rho"] = model.rho;
    emit_report(report, report_path, out);
    return 0;
}

int run_score(const std::string& model_path, const std::string& input,
              const std::string& schema_path, const std::string& out_path,
              const std::string& report_path, std::ostream& out) {
    std::ifstream model_file(model_path);
    if (!model_file) throw std::runtime_error("cannot open model '" + model_path + "'");
    std::string line;
    if (!std::getline(model_file, line) || line != "mpguard-model 1")
        throw std::runtime_error("model file: bad container header");
    if (!std::getline(model_file, line) || !line.starts_with("type "))
        throw std::runtime_error("model file: missing type line");
    const std::string type = line.substr(5);

    const preprocess::Pipeline pipeline = preprocess::Pipeline::load(model_file);

    const auto schema = load_schema(schema_path);
    const ingest::Dataset ds = ingest::load_csv(input, schema);
    const preprocess::FeatureMatrix transformed = pipeline.apply(ds.features);

    std::ostringstream csv;
    csv << "row,score,pred\n";
    std::size_t flagged = 0;
    if (type == "iforest") {
        const iforest::ForestModel model = iforest::load_forest(model_file);
        for (std::size_t r = 0; r < transformed.rows(); ++r) {
            const double score = iforest::anomaly_score(model, transformed.row(r));
            const bool attack = score > model.score_threshold;
            flagged += attack ? 1 : 0;
            csv << r << ',' << util::fmt_double(score) << ',' << (attack ? 1 : 0) << '\n';
        }
    } else if (type == "ocsvm") {
        const ocsvm::SvmModel model = ocsvm::load_svm(model_file);
        for (std::size_t r = 0; r < transformed.rows(); ++r) {
            const double value = ocsvm::decision_value(model, transformed.row(r));
            const bool attack = value < 0.0; // decide() == -1
            flagged += attack ? 1 : 0;
            csv << r << ',' << util::fmt_double(value) << ',' << (attack ? 1 : 0) << '\n';
        }
    } else {
        throw std::runtime_error("model file: unknown type '" + type + "'");
    }
    write_text_file(out_path, csv.str());

    ordered_json report;
    report["command"] = "score";
    ordered_json cfg;
    cfg["model"] = model_path;
    cfg["model_type"] = type;
    cfg["input"] = input;
    cfg["out"] = out_path;
    if (!schema_path.empty()) cfg["schema"] = schema_path;
    report["config"] = cfg;
    report["rows"] = transformed.rows();
    report["flagged"] = flagged;
    emit_report(report, report_path, out);
    return 0;
}

int run_eval(const std::string& pred_path, const std::string& truth_path,
             const std::string& schema_path, const std::string& out_path,
             std::ostream& out) {
    std::ifstream pred_file(pred_path);
    if (!pred_file) throw std::runtime_error("cannot open predictions '" + pred_path + "'");
    std::string line;
    if (!std::getline(pred_file, line))
        throw std::runtime_error(pred_path + ":1: missing header");
    const auto header = util::split_csv(line);
    std::optional<std::size_t> pred_col;
    for (std::size_t c = 0; c < header.size(); ++c)
        if (header[c] == "pred") pred_col = c;
    if (!pred_col)
        throw std::runtime_error(pred_path + ":1: no column named 'pred'");

    std::vector<std::uint8_t> pred;
    std::size_t line_no = 1;
    while (std::getline(pred_file, line)) {
        ++line_no;
        if (util::trim(line).empty()) continue;
        const auto fields = util::split_csv(line);
        if (fields.size() != header.size())
            throw std::runtime_error(pred_path + ":" + std::to_string(line_no) +
                                     ": ragged row");
        const auto v = util::parse_int(fields[*pred_col]);
        if (!v || (*v != 0 && *v != 1))
            throw std::runtime_error(pred_path + ":" + std::to_string(line_no) +
                                     ": pred must be 0 or 1");
        pred.push_back(static_cast<std::uint8_t>(*v));
    }

    const auto schema = load_schema(schema_path);
    const ingest::Dataset truth = ingest::load_csv(truth_path, schema);
    const eval::DetectionReport detection = eval::make_report(pred, truth.labels);

    ordered_json report;
    report["command"] = "eval";
    ordered_json cfg;
    cfg["pred"] = pred_path;
    cfg["truth"] = truth_path;
    if (!schema_path.empty()) cfg["schema"] = schema_path;
    if (!out_path.empty()) cfg["out"] = out_path;
    report["config"] = cfg;
    report["report"] = nlohmann::ordered_json::parse(eval::to_json(detection));
    emit_report(report, out_path, out);
    return 0;
}

} // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"mpguard: matrix-profile anomaly detection for industrial process data"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate labeled surrogate process data");
    std::string synth_out, synth_config, synth_preset, synth_report;
    std::size_t synth_length = 250000;
    std::uint64_t synth_seed = 0;
    synth->add_option("--out", synth_out, "output CSV")->required();
    auto* synth_length_opt = synth->add_option("--length", synth_length, "steps (default 250000)");
    auto* synth_seed_opt = synth->add_option("--seed", synth_seed, "RNG seed (default 0)");
    synth->add_option("--config", synth_config, "process config file (key=value)");
    synth->add_option("--preset", synth_preset, "attack preset: paper-mix");
    synth->add_option("--report", synth_report, "also write the JSON report here");

    // profile
    auto* profile = app.add_subcommand("profile", "compute the matrix profile of a channel");
    ProfileArgs profile_args;
    std::string profile_out, profile_report;
    add_profile_args(profile, profile_args);
    profile->add_option("--out", profile_out, "profile CSV to write")->required();
    profile->add_option("--report", profile_report, "also write the JSON report here");

    // count
    auto* count = app.add_subcommand("count", "count similar motif instances per window");
    ProfileArgs count_args;
    std::string count_out, count_report, count_epsilon = "auto:p5";
    add_profile_args(count, count_args);
    count->add_option("--epsilon", count_epsilon,
                      "similarity radius, number or auto:p<percent> (default auto:p5)");
    count->add_option("--out", count_out, "count CSV to write")->required();
    count->add_option("--report", count_report, "also write the JSON report here");

    // detect
    auto* detect = app.add_subcommand("detect", "flag anomalous intervals");
    ProfileArgs detect_args;
    std::string detect_out, detect_pred_out;
    std::string detect_epsilon = "auto:p5", detect_distance = "auto:p99";
    std::int64_t detect_count_threshold = 20, detect_min_gap = 0;
    add_profile_args(detect, detect_args);
    detect->add_option("--epsilon", detect_epsilon,
                       "similarity radius, number or auto:p<percent> (default auto:p5)");
    detect->add_option("--distance-threshold", detect_distance,
                       "number or auto:p<percent> (default auto:p99)");
    detect->add_option("--count-threshold", detect_count_threshold,
                       "flag when similar count drops below this; 0 disables (default 20)");
    detect->add_option("--min-gap", detect_min_gap,
                       "merge flagged runs separated by <= this many indices");
    detect->add_option("--out", detect_out, "JSON report file");
    detect->add_option("--pred-out", detect_pred_out, "per-step 0/1 prediction CSV");

    // plotdata
    auto* plotdata = app.add_subcommand("plotdata", "emit figure-ready per-step CSV");
    ProfileArgs plot_args;
    std::string plot_out, plot_report, plot_epsilon = "auto:p5";
    add_profile_args(plotdata, plot_args);
    plotdata->add_option("--epsilon", plot_epsilon,
                         "similarity radius, number or auto:p<percent> (default auto:p5)");
    plotdata->add_option("--out", plot_out, "plot CSV to write")->required();
    plotdata->add_option("--report", plot_report, "also write the JSON report here");

    // train-iforest
    auto* tif = app.add_subcommand("train-iforest", "fit an isolation forest baseline");
    TrainArgs tif_args;
    std::size_t tif_trees = 100;
    std::optional<std::size_t> tif_subsample, tif_height;
    double tif_contamination = 0.05;
    std::uint64_t tif_seed = 0;
    std::optional<unsigned> tif_threads;
    std::string tif_report;
    add_train_args(tif, tif_args);
    tif->add_option("--trees", tif_trees, "ensemble size (default 100)");
    tif->add_option("--subsample", tif_subsample, "per-tree sample (default min(256, rows))");
    tif->add_option("--height-limit", tif_height, "tree depth cap (default ceil(log2 subsample))");
    tif->add_option("--contamination", tif_contamination,
                    "training fraction scored above the threshold (default 0.05)");
    tif->add_option("--seed", tif_seed, "RNG seed (default 0)");
    tif->add_option("--threads", tif_threads, "worker threads (or MPGUARD_THREADS)");
    tif->add_option("--report", tif_report, "also write the JSON report here");

    // train-ocsvm
    auto* tsvm = app.add_subcommand("train-ocsvm", "fit a nu one-class SVM baseline");
    TrainArgs tsvm_args;
    double tsvm_nu = 0.1, tsvm_tol = 1e-3;
    std::string tsvm_kernel = "rbf", tsvm_gamma = "auto", tsvm_report;
    std::size_t tsvm_max_rows = 20000;
    add_train_args(tsvm, tsvm_args);
    tsvm->add_option("--nu", tsvm_nu, "outlier fraction bound in (0,1) (default 0.1)");
    tsvm->add_option("--kernel", tsvm_kernel, "rbf | linear (default rbf)");
    tsvm->add_option("--gamma", tsvm_gamma, "rbf width, number or 'auto' (default auto)");
    tsvm->add_option("--tol", tsvm_tol, "KKT gap tolerance (default 1e-3)");
    tsvm->add_option("--max-train-rows", tsvm_max_rows,
                     "stride-subsample training beyond this many rows (default 20000)");
    tsvm->add_option("--report", tsvm_report, "also write the JSON report here");

    // score
    auto* score = app.add_subcommand("score", "apply a trained model to a CSV");
    std::string score_model, score_input, score_schema, score_out, score_report;
    score->add_option("--model", score_model, "model file")->required();
    score->add_option("--input", score_input, "CSV to score")->required();
    score->add_option("--out", score_out, "score CSV to write")->required();
    score->add_option("--schema", score_schema, "schema config file");
    score->add_option("--report", score_report, "also write the JSON report here");

    // eval
    auto* evalc = app.add_subcommand("eval", "score predictions against labeled truth");
    std::string eval_pred, eval_truth, eval_schema, eval_out;
    evalc->add_option("--pred", eval_pred, "prediction CSV with a 'pred' column")->required();
    evalc->add_option("--truth", eval_truth, "labeled dataset CSV")->required();
    evalc->add_option("--schema", eval_schema, "schema config file");
    evalc->add_option("--out", eval_out, "JSON report file");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (synth->parsed())
            return run_synth(synth_out, synth_config, synth_preset, synth_length, synth_seed,
                             synth_length_opt->count() > 0, synth_seed_opt->count() > 0,
                             synth_report, out);
        if (profile->parsed()) return run_profile(profile_args, profile_out, profile_report, out);
        if (count->parsed())
            return run_count(count_args, count_epsilon, count_out, count_report, out);
        if (detect->parsed())
            return run_detect(detect_args, detect_epsilon, detect_distance,
                              detect_count_threshold, detect_min_gap, detect_out,
                              detect_pred_out, out);
        if (plotdata->parsed())
            return run_plotdata(plot_args, plot_epsilon, plot_out, plot_report, out);
        if (tif->parsed())
            return run_train_iforest(tif_args, tif_trees, tif_subsample, tif_height,
                                     tif_contamination, tif_seed, tif_threads, tif_report, out);
        if (tsvm->parsed())
            return run_train_ocsvm(tsvm_args, tsvm_nu, tsvm_kernel, tsvm_gamma, tsvm_tol,
                                   tsvm_max_rows, tsvm_report, out);
        if (score->parsed())
            return run_score(score_model, score_input, score_schema, score_out, score_report,
                             out);
        if (evalc->parsed()) return run_eval(eval_pred, eval_truth, eval_schema, eval_out, out);
        err << "error: no subcommand given\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::runtime_error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return 2;
    }
}

int dispatch(const std::vector<std::string>& args) {
    return dispatch(args, std::cout, std::cerr);
}

} // namespace mpguard::cli

// Command-line front end: synthesize datasets, train and persist models,
// predict, run the benchmark protocol, and run the rank statistics.
//
// Exit codes: 0 success, 2 usage error, 3 data error, 4 solver
// non-convergence (train with --strict only).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mvtpm/csv.hpp"
#include "mvtpm/data.hpp"
#include "mvtpm/eval.hpp"
#include "mvtpm/model.hpp"
#include "mvtpm/model_io.hpp"
#include "mvtpm/stats.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNotConverged = 4;

struct TrainConfig {
    double c1 = 1.0, c2 = 1.0, c3 = 1.0, c4 = 1.0, d1 = 1.0, d2 = 1.0;
    double eps1 = 0.1, eps2 = 0.1;
    std::string kernel = "gaussian-paper";
    double sigma = 1.0;
    std::string solver = "projected-gradient";
    double tol = mvtpm::kDefaultQpTol;
    int max_iter = mvtpm::kDefaultQpMaxIter;
    std::optional<std::string> scaling;  // default: the manifest's mode
};

void apply_config_file(TrainConfig& cfg, const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw mvtpm::DataError("cannot open config: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw mvtpm::DataError("config parse error in " + path.string() + ": " + e.what());
    }
    cfg.c1 = j.value("c1", cfg.c1);
    cfg.c2 = j.value("c2", cfg.c2);
    cfg.c3 = j.value("c3", cfg.c3);
    cfg.c4 = j.value("c4", cfg.c4);
    cfg.d1 = j.value("d1", cfg.d1);
    cfg.d2 = j.value("d2", cfg.d2);
    if (j.contains("epsilon")) cfg.eps1 = cfg.eps2 = j.at("epsilon").get<double>();
    cfg.eps1 = j.value("eps1", cfg.eps1);
    cfg.eps2 = j.value("eps2", cfg.eps2);
    cfg.kernel = j.value("kernel", cfg.kernel);
    cfg.sigma = j.value("sigma", cfg.sigma);
    cfg.solver = j.value("solver", cfg.solver);
    cfg.tol = j.value("tol", cfg.tol);
    cfg.max_iter = j.value("max_iter", cfg.max_iter);
    if (j.contains("scaling")) cfg.scaling = j.at("scaling").get<std::string>();
}

void write_labels_csv(const fs::path& path, const std::vector<int>& labels,
                      const mvtpm::LabelMap& map) {
    std::ofstream out(path);
    if (!out) throw mvtpm::DataError("cannot write file: " + path.string());
    for (int y : labels) out << map.name(y) << '\n';
}

// Feature-only load for prediction; labels are optional there.
struct PredictInput {
    mvtpm::Matrix view_a;
    std::optional<mvtpm::Matrix> view_b;
    std::optional<std::vector<int>> labels;
    mvtpm::LabelMap label_map;
};

PredictInput load_predict_input(const fs::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw mvtpm::DataError("cannot open manifest: " + manifest_path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw mvtpm::DataError("manifest parse error: " + std::string(e.what()));
    }
    if (j.value("schema", "") != mvtpm::kManifestSchema)
        throw mvtpm::DataError("manifest: expected schema 'mvtpm-manifest/1'");
    const auto base = manifest_path.parent_path();
    const auto resolve = [&](const std::string& p) {
        fs::path fp(p);
        return fp.is_absolute() ? fp : base / fp;
    };
    const bool header = j.value("has_header", false);
    PredictInput input;
    input.view_a = mvtpm::read_csv_matrix(resolve(j.at("view_a").get<std::string>()), header);
    if (j.contains("view_b"))
        input.view_b = mvtpm::read_csv_matrix(resolve(j.at("view_b").get<std::string>()), header);
    if (j.contains("labels")) {
        const auto raw = mvtpm::read_csv_column(resolve(j.at("labels").get<std::string>()), header);
        const std::string positive = j.value("positive_label", "1");
        std::vector<int> labels;
        labels.reserve(raw.size());
        for (const auto& r : raw) labels.push_back(r == positive ? 1 : -1);
        input.labels = std::move(labels);
    }
    return input;
}

int cmd_synth(const std::string& name, long n, std::uint64_t seed, const fs::path& out_dir) {
    const mvtpm::TwoViewDataset ds = mvtpm::generate_synthetic(name, n, seed);
    fs::create_directories(out_dir);
    mvtpm::write_csv_matrix(out_dir / "viewA.csv", ds.view_a);
    mvtpm::write_csv_matrix(out_dir / "viewB.csv", ds.view_b);
    write_labels_csv(out_dir / "labels.csv", ds.labels, ds.label_map);
    mvtpm::DatasetManifest manifest;
    manifest.name = name;
    manifest.view_a_path = "viewA.csv";
    manifest.view_b_path = "viewB.csv";
    manifest.labels_path = "labels.csv";
    manifest.positive_label = ds.label_map.positive;
    manifest.scaling = mvtpm::ScalingMode::MinMax01;
    mvtpm::write_manifest(manifest, out_dir / "manifest.json");
    std::cout << "wrote " << ds.view_a.rows() << " rows to " << out_dir.string() << "\n";
    return kExitOk;
}

int cmd_train(const fs::path& manifest_path, const fs::path& out_model, const TrainConfig& cfg,
              bool strict) {
    const auto manifest = mvtpm::read_manifest(manifest_path);
    const auto dataset = mvtpm::load_dataset(manifest);

    mvtpm::Hyperparams hp;
    hp.c1 = cfg.c1;
    hp.c2 = cfg.c2;
    hp.c3 = cfg.c3;
    hp.c4 = cfg.c4;
    hp.d1 = cfg.d1;
    hp.d2 = cfg.d2;
    hp.eps1 = cfg.eps1;
    hp.eps2 = cfg.eps2;
    hp.kernel_a = {mvtpm::parse_kernel_kind(cfg.kernel), cfg.sigma};
    hp.kernel_b = hp.kernel_a;

    mvtpm::TrainOptions opts;
    opts.method = mvtpm::parse_solver_method(cfg.solver);
    opts.tol = cfg.tol;
    opts.max_iter = cfg.max_iter;
    opts.scaling =
        cfg.scaling ? mvtpm::parse_scaling_mode(*cfg.scaling) : manifest.scaling;

    const mvtpm::MvTpmModel model = mvtpm::train(dataset, hp, opts);
    mvtpm::save_model(model, out_model);

    const mvtpm::BatchDecisions on_train = mvtpm::predict(model, dataset.view_a, dataset.view_b);
    const double train_acc = mvtpm::accuracy_against(dataset.labels, on_train.labels);

    std::cout << "dataset: " << dataset.name << " (" << dataset.view_a.rows() << " rows, "
              << model.split.p_a.rows() << " positive / " << model.split.n_a.rows()
              << " negative)\n";
    std::cout << "kernel: " << mvtpm::kernel_kind_name(hp.kernel_a.kind)
              << " sigma=" << hp.kernel_a.sigma << "\n";
    const auto& d = model.diag;
    std::printf("positive dual: %s in %d iterations, residual %.3e, duality gap %.3e\n",
                d.converged_positive ? "converged" : "NOT converged", d.iterations_positive,
                d.residual_positive, d.gap_positive);
    std::printf("negative dual: %s in %d iterations, residual %.3e, duality gap %.3e\n",
                d.converged_negative ? "converged" : "NOT converged", d.iterations_negative,
                d.residual_negative, d.gap_negative);
    std::printf("training accuracy: %.4f\n", train_acc);
    std::cout << "model written to " << out_model.string() << "\n";

    if (strict && !d.converged()) {
        std::cerr << "error: solver did not converge and --strict is set\n";
        return kExitNotConverged;
    }
    return kExitOk;
}

int cmd_predict(const fs::path& model_path, const fs::path& manifest_path,
                const fs::path& out_csv) {
    const mvtpm::MvTpmModel model = mvtpm::load_model(model_path);
    const PredictInput input = load_predict_input(manifest_path);
    const mvtpm::BatchDecisions decisions = mvtpm::predict(model, input.view_a, input.view_b);

    std::ofstream out(out_csv);
    if (!out) throw mvtpm::DataError("cannot write file: " + out_csv.string());
    out << "index,f,label\n";
    for (mvtpm::Index i = 0; i < decisions.f.size(); ++i)
        out << i << ',' << mvtpm::format_double(decisions.f[i]) << ','
            << model.label_map.name(decisions.labels[static_cast<std::size_t>(i)]) << '\n';
    std::cout << "wrote " << decisions.f.size() << " predictions to " << out_csv.string() << "\n";
    if (input.labels) {
        const double acc = mvtpm::accuracy_against(*input.labels, decisions.labels);
        std::printf("accuracy against provided labels: %.4f\n", acc);
    }
    return kExitOk;
}

int cmd_benchmark(const std::vector<fs::path>& manifest_paths, const fs::path& out_report,
                  const fs::path& out_matrix, int folds, std::uint64_t seed, int exp_lo,
                  int exp_hi, int exp_step, double epsilon, const std::string& kernel,
                  int threads, double cv_tol, int cv_max_iter, const std::string& method,
                  bool stratified) {
    mvtpm::GridSpec grid;
    for (int e = exp_lo; e <= exp_hi; e += exp_step)
        grid.c1_values.push_back(std::ldexp(1.0, e));
    grid.c2_values = grid.c1_values;
    grid.sigma_values = grid.c1_values;
    grid.epsilon = epsilon;
    grid.kernel = mvtpm::parse_kernel_kind(kernel);

    mvtpm::EvalOptions opts;
    opts.threads = threads;
    opts.cv_tol = cv_tol;
    opts.cv_max_iter = cv_max_iter;
    opts.method = mvtpm::parse_solver_method(method);
    opts.stratified_folds = stratified;

    std::vector<mvtpm::DatasetManifest> manifests;
    manifests.reserve(manifest_paths.size());
    for (const auto& p : manifest_paths) manifests.push_back(mvtpm::read_manifest(p));

    const mvtpm::BenchmarkReport report =
        mvtpm::run_benchmark(manifests, grid, folds, seed, opts);

    std::ofstream out(out_report);
    if (!out) throw mvtpm::DataError("cannot write file: " + out_report.string());
    out << mvtpm::report_to_json(report).dump(2) << '\n';
    if (!out_matrix.empty()) mvtpm::write_accuracy_matrix_csv(out_matrix, report);

    std::size_t failures = 0;
    for (const auto& d : report.datasets) {
        if (!d.ok) {
            ++failures;
            std::cout << d.name << ": ERROR " << d.error << "\n";
            continue;
        }
        std::printf("%s: accuracy %.4f (C1=%g, C2=%g, sigma=%g, cv %.4f)\n", d.name.c_str(),
                    d.metrics.accuracy, d.chosen_c1, d.chosen_c2, d.chosen_sigma, d.cv_accuracy);
    }
    std::cout << "report written to " << out_report.string() << "\n";
    if (!report.datasets.empty() && failures == report.datasets.size()) {
        std::cerr << "error: every dataset failed\n";
        return kExitData;
    }
    return kExitOk;
}

int cmd_stats(const std::optional<fs::path>& input_csv, const std::string& unit, double q_alpha,
              const std::optional<std::string>& ranks_text, int n_datasets,
              const fs::path& out_report) {
    mvtpm::StatsReport report;
    if (input_csv) {
        const auto acc = mvtpm::read_accuracy_csv(*input_csv, mvtpm::parse_accuracy_unit(unit));
        report = mvtpm::stats_from_matrix(acc, q_alpha);
    } else if (ranks_text) {
        std::vector<double> ranks;
        for (const auto& field : mvtpm::split_csv_line(*ranks_text))
            ranks.push_back(mvtpm::parse_double(field, "--ranks"));
        if (n_datasets < 2) throw CLI::ValidationError("--n-datasets is required with --ranks");
        report = mvtpm::stats_from_ranks(
            Eigen::Map<const mvtpm::Vector>(ranks.data(), static_cast<mvtpm::Index>(ranks.size())),
            n_datasets, q_alpha);
    } else {
        throw CLI::ValidationError("either --input or --ranks is required");
    }

    std::cout << "models: ";
    for (std::size_t i = 0; i < report.models.size(); ++i)
        std::cout << (i ? ", " : "") << report.models[i];
    std::cout << "\naverage ranks:";
    for (mvtpm::Index j = 0; j < report.ranks.size(); ++j)
        std::printf(" %.4f", report.ranks[j]);
    std::printf("\nfriedman chi2 = %.4f\nfriedman F = %.4f\nnemenyi CD (q=%.3f) = %.4f\n",
                report.chi2, report.f_statistic, report.q_alpha, report.critical_difference);
    if (report.wtl) {
        std::printf("win-tie-loss significance threshold: %.3f wins of %d datasets\n",
                    report.wtl->threshold, report.n_datasets);
        const auto& w = *report.wtl;
        for (mvtpm::Index a = 0; a < w.wins.rows(); ++a)
            for (mvtpm::Index b = 0; b < w.wins.cols(); ++b)
                if (a != b)
                    std::printf("  %s vs %s: [%d %d %d]%s\n",
                                report.models[static_cast<std::size_t>(a)].c_str(),
                                report.models[static_cast<std::size_t>(b)].c_str(), w.wins(a, b),
                                w.ties(a, b), w.losses(a, b),
                                w.significant[static_cast<std::size_t>(a)]
                                             [static_cast<std::size_t>(b)]
                                    ? "  (significant)"
                                    : "");
    }
    if (!out_report.empty()) {
        std::ofstream out(out_report);
        if (!out) throw mvtpm::DataError("cannot write file: " + out_report.string());
        out << mvtpm::stats_report_json(report).dump(2) << '\n';
        std::cout << "report written to " << out_report.string() << "\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multiview twin parametric-margin SVM toolkit"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic two-view dataset");
    std::string synth_name;
    long synth_n = 800;
    std::uint64_t synth_seed = 1;
    std::string synth_out;
    synth->add_option("--name", synth_name, "synthetic1 | synthetic2 | synthetic3")->required();
    synth->add_option("--n", synth_n, "number of samples (even)")->required();
    synth->add_option("--seed", synth_seed, "random seed");
    synth->add_option("--out", synth_out, "output directory")->required();

    // train
    auto* train = app.add_subcommand("train", "Train a model from a dataset manifest");
    std::string train_manifest, train_out, train_config;
    TrainConfig cfg;
    bool strict = false;
    std::string scaling_flag;
    train->add_option("--manifest", train_manifest, "dataset manifest")->required();
    train->add_option("--out", train_out, "output model file")->required();
    train->add_option("--config", train_config, "JSON config (flags override it)");
    auto* f_c1 = train->add_option("--c1", cfg.c1, "penalty C1");
    auto* f_c2 = train->add_option("--c2", cfg.c2, "penalty C2");
    auto* f_c3 = train->add_option("--c3", cfg.c3, "penalty C3");
    auto* f_c4 = train->add_option("--c4", cfg.c4, "penalty C4");
    auto* f_d1 = train->add_option("--d1", cfg.d1, "view-consistency cap D1");
    auto* f_d2 = train->add_option("--d2", cfg.d2, "view-consistency cap D2");
    double eps_flag = 0.1;
    auto* f_eps = train->add_option("--epsilon", eps_flag, "sets both eps1 and eps2");
    auto* f_eps1 = train->add_option("--eps1", cfg.eps1, "insensitivity eps1");
    auto* f_eps2 = train->add_option("--eps2", cfg.eps2, "insensitivity eps2");
    auto* f_kernel =
        train->add_option("--kernel", cfg.kernel, "linear | gaussian-paper | gaussian-squared");
    auto* f_sigma = train->add_option("--sigma", cfg.sigma, "kernel width for both views");
    auto* f_solver = train->add_option("--solver", cfg.solver, "pg | cd");
    auto* f_tol = train->add_option("--tol", cfg.tol, "solver tolerance");
    auto* f_maxit = train->add_option("--max-iter", cfg.max_iter, "solver iteration cap");
    auto* f_scaling = train->add_option("--scaling", scaling_flag, "none | minmax01 | zscore");
    train->add_flag("--strict", strict, "exit 4 if the solver did not converge");

    // predict
    auto* predict = app.add_subcommand("predict", "Predict with a saved model");
    std::string pred_model, pred_manifest, pred_out;
    predict->add_option("--model", pred_model, "model file")->required();
    predict->add_option("--manifest", pred_manifest, "dataset manifest (labels optional)")
        ->required();
    predict->add_option("--out", pred_out, "output CSV (index,f,label)")->required();

    // benchmark
    auto* bench = app.add_subcommand("benchmark", "Split/tune/test over datasets");
    std::vector<std::string> bench_manifests;
    std::string bench_out = "report.json", bench_matrix;
    int folds = 5;
    std::uint64_t bench_seed = 1;
    int exp_lo = -5, exp_hi = 5, exp_step = 1, threads = 0;
    double bench_eps = 0.1, cv_tol = 1e-4;
    int cv_max_iter = 4000;
    std::string bench_kernel = "gaussian-paper", bench_method = "pg";
    bench->add_option("--manifests", bench_manifests, "dataset manifests")
        ->required()
        ->expected(-1);
    bench->add_option("--out", bench_out, "report JSON path");
    bench->add_option("--matrix", bench_matrix, "accuracy matrix CSV path");
    bench->add_option("--folds", folds, "cross-validation folds");
    bench->add_option("--seed", bench_seed, "random seed");
    bench->add_option("--exp-lo", exp_lo, "smallest power-of-two exponent in the grid");
    bench->add_option("--exp-hi", exp_hi, "largest power-of-two exponent in the grid");
    bench->add_option("--exp-step", exp_step, "exponent stride (coarser grids)");
    bench->add_option("--epsilon", bench_eps, "epsilon for all grid points");
    bench->add_option("--kernel", bench_kernel, "kernel kind for the grid");
    bench->add_option("--threads", threads, "worker threads (0 = hardware)");
    bench->add_option("--cv-tol", cv_tol, "solver tolerance during cross-validation");
    bench->add_option("--cv-max-iter", cv_max_iter, "solver iteration cap during CV");
    bench->add_option("--method", bench_method, "pg | cd");
    bool bench_stratified = false;
    bench->add_flag("--stratified", bench_stratified, "class-stratified CV folds");

    // stats
    auto* stats = app.add_subcommand("stats", "Friedman / Nemenyi / win-tie-loss");
    std::string stats_input, stats_unit = "percent", stats_ranks, stats_out;
    double q_alpha = 2.850;
    int n_datasets = 0;
    stats->add_option("--input", stats_input, "accuracy matrix CSV (header of model names)");
    stats->add_option("--unit", stats_unit, "percent | fraction");
    stats->add_option("--q-alpha", q_alpha, "Nemenyi critical value");
    stats->add_option("--ranks", stats_ranks, "comma-separated average ranks (skip the matrix)");
    stats->add_option("--n-datasets", n_datasets, "dataset count when using --ranks");
    stats->add_option("--out", stats_out, "stats report JSON path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (synth->parsed()) return cmd_synth(synth_name, synth_n, synth_seed, synth_out);
        if (train->parsed()) {
            TrainConfig merged;  // defaults < config file < flags
            if (!train_config.empty()) apply_config_file(merged, train_config);
            if (f_c1->count()) merged.c1 = cfg.c1;
            if (f_c2->count()) merged.c2 = cfg.c2;
            if (f_c3->count()) merged.c3 = cfg.c3;
            if (f_c4->count()) merged.c4 = cfg.c4;
            if (f_d1->count()) merged.d1 = cfg.d1;
            if (f_d2->count()) merged.d2 = cfg.d2;
            if (f_eps->count()) merged.eps1 = merged.eps2 = eps_flag;
            if (f_eps1->count()) merged.eps1 = cfg.eps1;
            if (f_eps2->count()) merged.eps2 = cfg.eps2;
            if (f_kernel->count()) merged.kernel = cfg.kernel;
            if (f_sigma->count()) merged.sigma = cfg.sigma;
            if (f_solver->count()) merged.solver = cfg.solver;
            if (f_tol->count()) merged.tol = cfg.tol;
            if (f_maxit->count()) merged.max_iter = cfg.max_iter;
            if (f_scaling->count()) merged.scaling = scaling_flag;
            return cmd_train(train_manifest, train_out, merged, strict);
        }
        if (predict->parsed()) return cmd_predict(pred_model, pred_manifest, pred_out);
        if (bench->parsed()) {
            std::vector<fs::path> paths(bench_manifests.begin(), bench_manifests.end());
            return cmd_benchmark(paths, bench_out, bench_matrix, folds, bench_seed, exp_lo,
                                 exp_hi, exp_step, bench_eps, bench_kernel, threads, cv_tol,
                                 cv_max_iter, bench_method, bench_stratified);
        }
        if (stats->parsed()) {
            std::optional<fs::path> input;
            if (!stats_input.empty()) input = stats_input;
            std::optional<std::string> ranks;
            if (!stats_ranks.empty()) ranks = stats_ranks;
            return cmd_stats(input, stats_unit, q_alpha, ranks, n_datasets, stats_out);
        }
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const mvtpm::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitUsage;
}

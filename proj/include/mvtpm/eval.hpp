#pragma once

// Metrics, cross-validated grid search, and whole-dataset benchmark runs.
// Grid points are independent, so folds and kernel widths are fanned out
// over a small thread pool; results are reduced in a fixed order so the
// outcome is identical to a sequential run.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mvtpm/data.hpp"
#include "mvtpm/model.hpp"
#include "mvtpm/types.hpp"

namespace mvtpm {

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct ConfusionCounts {
    long tp = 0, tn = 0, fp = 0, fn = 0;

    long total() const { return tp + tn + fp + fn; }
};

inline ConfusionCounts count_confusion(const std::vector<int>& truth,
                                       const std::vector<int>& predicted) {
    require(truth.size() == predicted.size(), "count_confusion: size mismatch");
    ConfusionCounts c;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] > 0)
            (predicted[i] > 0 ? c.tp : c.fn)++;
        else
            (predicted[i] > 0 ? c.fp : c.tn)++;
    }
    return c;
}

/// Sensitivity, precision and specificity are absent (not silently zero)
/// when their denominator is empty.
struct MetricSet {
    double accuracy = 0.0;
    double error_rate = 0.0;
    std::optional<double> sensitivity;
    std::optional<double> precision;
    std::optional<double> specificity;
};

inline MetricSet compute_metrics(const ConfusionCounts& c) {
    const long total = c.total();
    require(total > 0, "compute_metrics: empty confusion counts");
    require(c.tp >= 0 && c.tn >= 0 && c.fp >= 0 && c.fn >= 0,
            "compute_metrics: negative counts");
    MetricSet m;
    m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(total);
    m.error_rate = static_cast<double>(c.fp + c.fn) / static_cast<double>(total);
    if (c.tp + c.fn > 0)
        m.sensitivity = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    if (c.tp + c.fp > 0)
        m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    if (c.tn + c.fp > 0)
        m.specificity = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
    return m;
}

// ---------------------------------------------------------------------------
// Grid search
// ---------------------------------------------------------------------------

/// Hyperparameter grid under the protocol tying C3=C1 and C4=D1=D2=C2.
struct GridSpec {
    std::vector<double> c1_values;
    std::vector<double> c2_values;
    std::vector<double> sigma_values;
    double epsilon = 0.1;
    KernelKind kernel = KernelKind::GaussianPaper;

    static std::vector<double> powers_of_two(int lo, int hi) {
        std::vector<double> v;
        for (int e = lo; e <= hi; ++e) v.push_back(std::ldexp(1.0, e));
        return v;
    }

    /// 2^-5 .. 2^5 on every axis, epsilon 0.1.
    static GridSpec protocol_default() {
        GridSpec g;
        g.c1_values = powers_of_two(-5, 5);
        g.c2_values = powers_of_two(-5, 5);
        g.sigma_values = powers_of_two(-5, 5);
        return g;
    }

    Hyperparams hyperparams(double c1, double c2, double sigma) const {
        return Hyperparams::tied(c1, c2, sigma, kernel, epsilon);
    }
};

inline void validate_grid(const GridSpec& g) {
    require(!g.c1_values.empty() && !g.c2_values.empty() && !g.sigma_values.empty(),
            "grid: every axis needs at least one value");
    require(g.epsilon >= 0.0, "grid: epsilon must be nonnegative");
}

struct GridScore {
    double c1 = 0, c2 = 0, sigma = 0;
    double mean_accuracy = 0.0;
    int folds_used = 0;
};

struct GridSearchResult {
    Hyperparams best;
    double best_score = 0.0;
    std::vector<GridScore> table;  // c1-major, then c2, then sigma, all ascending
    int skipped_folds = 0;
};

struct EvalOptions {
    int threads = 0;  // 0: hardware concurrency
    SolverMethod method = SolverMethod::ProjectedGradient;
    ScalingMode scaling = ScalingMode::MinMax01;
    double cv_tol = 1e-4;  // fold models only rank grid points
    int cv_max_iter = 4000;
    double final_tol = 1e-6;
    int final_max_iter = kDefaultQpMaxIter;
    double split_ratio = 0.7;
    bool stratified_folds = false;
};

namespace detail {

inline int resolve_threads(int requested, std::size_t jobs) {
    int n = requested > 0 ? requested
                          : static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1) n = 1;
    return static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(n), jobs));
}

template <class Fn>
void parallel_tasks(std::size_t count, int threads, const Fn& fn) {
    if (count == 0) return;
    const int n = resolve_threads(threads, count);
    if (n <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n));
    std::exception_ptr error;
    std::mutex error_mutex;
    for (int t = 0; t < n; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

/// Per-(fold, sigma) work unit of the grid search: Gram matrices are built
/// once and shared across the whole (C1, C2) plane.
struct FoldSigmaOutcome {
    std::vector<double> accuracy;  // one entry per (c1, c2) pair
    bool skipped = false;
};

inline std::vector<Index> complement_indices(Index n, const std::vector<Index>& fold) {
    std::vector<char> in_fold(static_cast<std::size_t>(n), 0);
    for (Index i : fold) in_fold[static_cast<std::size_t>(i)] = 1;
    std::vector<Index> out;
    out.reserve(static_cast<std::size_t>(n) - fold.size());
    for (Index i = 0; i < n; ++i)
        if (!in_fold[static_cast<std::size_t>(i)]) out.push_back(i);
    return out;
}

}  // namespace detail

/// Mean validation accuracy over k seeded folds for every grid point; the
/// best point maximizes the mean, ties resolved toward smaller C1, then C2,
/// then sigma. Folds whose training part is single-class are skipped; if
/// every fold skips, this is an error.
inline GridSearchResult cross_validate_grid(const TwoViewDataset& train, const GridSpec& grid,
                                            int folds, std::uint64_t seed,
                                            const EvalOptions& opts = {}) {
    validate_dataset(train);
    validate_grid(grid);
    require(folds >= 2, "cross_validate_grid: folds must be at least 2");

    GridSpec g = grid;
    std::sort(g.c1_values.begin(), g.c1_values.end());
    std::sort(g.c2_values.begin(), g.c2_values.end());
    std::sort(g.sigma_values.begin(), g.sigma_values.end());

    const auto fold_sets = opts.stratified_folds
                               ? stratified_kfold_indices(train.labels, folds, seed)
                               : kfold_indices(train.view_a.rows(), folds, seed);
    const std::size_t n_sigma = g.sigma_values.size();
    const std::size_t n_pairs = g.c1_values.size() * g.c2_values.size();
    const std::size_t n_tasks = fold_sets.size() * n_sigma;

    std::vector<detail::FoldSigmaOutcome> outcomes(n_tasks);

    detail::parallel_tasks(n_tasks, opts.threads, [&](std::size_t task) {
        const std::size_t fold_idx = task / n_sigma;
        const std::size_t sigma_idx = task % n_sigma;
        const double sigma = g.sigma_values[sigma_idx];
        auto& outcome = outcomes[task];

        const auto& val_idx = fold_sets[fold_idx];
        const auto fit_idx = detail::complement_indices(train.view_a.rows(), val_idx);
        TwoViewDataset fit_ds = subset_dataset(train, fit_idx);
        TwoViewDataset val_ds = subset_dataset(train, val_idx);

        const auto [m1, m2] = class_counts(fit_ds);
        if (m1 == 0 || m2 == 0) {
            outcome.skipped = true;
            return;
        }

        const Scaler sa = fit_scaler(fit_ds.view_a, opts.scaling);
        const Scaler sb = fit_scaler(fit_ds.view_b, opts.scaling);
        fit_ds.view_a = apply_scaler(sa, fit_ds.view_a);
        fit_ds.view_b = apply_scaler(sb, fit_ds.view_b);
        const Matrix val_a = apply_scaler(sa, val_ds.view_a);
        const Matrix val_b = apply_scaler(sb, val_ds.view_b);
        const ViewSplit split = split_by_class(fit_ds);

        const KernelSpec ka{g.kernel, sigma};
        const KernelSpec kb{g.kernel, sigma};
        // Shared Gram blocks for this (fold, sigma); only the linear vectors
        // and caps change across the (C1, C2) plane.
        const Matrix F1 = augmented_gram(ka, split.p_a, split.p_a);
        const Matrix F2 = augmented_gram(kb, split.p_b, split.p_b);
        const Matrix F3 = augmented_gram(ka, split.n_a, split.n_a);
        const Matrix F4 = augmented_gram(kb, split.n_b, split.n_b);
        const Matrix G1 = augmented_gram(ka, split.n_a, split.p_a);
        const Matrix G2 = augmented_gram(kb, split.n_b, split.p_b);
        const Matrix kv_pa = augmented_gram(ka, val_a, split.p_a);
        const Matrix kv_na = augmented_gram(ka, val_a, split.n_a);
        const Matrix kv_pb = augmented_gram(kb, val_b, split.p_b);
        const Matrix kv_nb = augmented_gram(kb, val_b, split.n_b);
        const Vector kv_na_sum = kv_na.rowwise().sum();
        const Vector kv_pa_sum = kv_pa.rowwise().sum();
        const Vector kv_nb_sum = kv_nb.rowwise().sum();
        const Vector kv_pb_sum = kv_pb.rowwise().sum();
        const Vector g1e = G1.transpose() * Vector::Ones(G1.rows());
        const Vector g2e = G2.transpose() * Vector::Ones(G2.rows());
        const Vector h1e = G1 * Vector::Ones(G1.cols());
        const Vector h2e = G2 * Vector::Ones(G2.cols());

        const auto linear_vector = [](const Vector& a, const Vector& b, double C, double eps) {
            const Index m = a.size();
            Vector c(4 * m);
            c.segment(0, m) = C * (b - a) - Vector::Constant(m, eps);
            c.segment(m, m) = C * (a - b) - Vector::Constant(m, eps);
            c.segment(2 * m, m) = C * a;
            c.segment(3 * m, m) = C * b;
            return c;
        };

        outcome.accuracy.resize(n_pairs, 0.0);
        std::size_t pair = 0;
        for (double c1 : g.c1_values) {
            for (double c2 : g.c2_values) {
                GramPairOperator pos_op(F1, F2, linear_vector(g1e, g2e, c1, g.epsilon), c2, c2);
                GramPairOperator neg_op(F3, F4, linear_vector(h1e, h2e, c1, g.epsilon), c2, c2);
                QpSolution pos, neg;
                if (opts.method == SolverMethod::CoordinateDescent) {
                    pos = detail::solve_coordinate_descent_impl(pos_op, opts.cv_tol,
                                                                opts.cv_max_iter);
                    neg = detail::solve_coordinate_descent_impl(neg_op, opts.cv_tol,
                                                                opts.cv_max_iter);
                } else {
                    pos = detail::solve_projected_gradient_impl(pos_op, opts.cv_tol,
                                                                opts.cv_max_iter);
                    neg = detail::solve_projected_gradient_impl(neg_op, opts.cv_tol,
                                                                opts.cv_max_iter);
                }
                const auto [s1, s2] = detail::combine_dual(pos.tau, F1.rows());
                const auto [t1, t2] = detail::combine_dual(neg.tau, F3.rows());

                const Vector h1 = kv_pa * s1 - c1 * kv_na_sum + kv_pb * s2 - c1 * kv_nb_sum;
                const Vector h2 = c1 * kv_pa_sum - kv_na * t1 + c1 * kv_pb_sum - kv_nb * t2;
                long correct = 0;
                for (Index i = 0; i < h1.size(); ++i) {
                    const double f = std::abs(h1[i]) - std::abs(h2[i]);
                    const int label = f < 0.0 ? 1 : -1;
                    if (label == val_ds.labels[static_cast<std::size_t>(i)]) ++correct;
                }
                outcome.accuracy[pair] =
                    static_cast<double>(correct) / static_cast<double>(h1.size());
                ++pair;
            }
        }
    });

    GridSearchResult result;
    result.table.resize(n_pairs * n_sigma);
    std::vector<int> used(n_pairs * n_sigma, 0);
    int skipped = 0;
    for (std::size_t task = 0; task < n_tasks; ++task) {
        const std::size_t sigma_idx = task % n_sigma;
        if (outcomes[task].skipped) {
            if (sigma_idx == 0) ++skipped;
            continue;
        }
        for (std::size_t pair = 0; pair < n_pairs; ++pair) {
            const std::size_t entry = pair * n_sigma + sigma_idx;
            result.table[entry].mean_accuracy += outcomes[task].accuracy[pair];
            used[entry]++;
        }
    }
    result.skipped_folds = skipped;

    bool any = false;
    std::size_t entry = 0;
    std::size_t best_entry = 0;
    for (std::size_t i1 = 0; i1 < g.c1_values.size(); ++i1) {
        for (std::size_t i2 = 0; i2 < g.c2_values.size(); ++i2) {
            for (std::size_t is = 0; is < n_sigma; ++is, ++entry) {
                auto& row = result.table[entry];
                row.c1 = g.c1_values[i1];
                row.c2 = g.c2_values[i2];
                row.sigma = g.sigma_values[is];
                row.folds_used = used[entry];
                if (used[entry] > 0) row.mean_accuracy /= used[entry];
                if (used[entry] > 0 && (!any || row.mean_accuracy > result.best_score)) {
                    any = true;
                    result.best_score = row.mean_accuracy;
                    best_entry = entry;
                }
            }
        }
    }
    if (!any) throw DataError("cross_validate_grid: every fold was single-class");
    const auto& b = result.table[best_entry];
    result.best = g.hyperparams(b.c1, b.c2, b.sigma);
    return result;
}

// ---------------------------------------------------------------------------
// Benchmark protocol
// ---------------------------------------------------------------------------

struct DatasetResult {
    std::string name;
    bool ok = false;
    std::string error;
    MetricSet metrics;
    ConfusionCounts confusion;
    double cv_accuracy = 0.0;
    double chosen_c1 = 0.0, chosen_c2 = 0.0, chosen_sigma = 0.0;
    Index n_train = 0, n_test = 0;
    SolverDiagnostics diag;
    KernelKind kernel = KernelKind::GaussianPaper;
};

struct BenchmarkReport {
    std::uint64_t seed = 0;
    int folds = 5;
    std::string model_name = "MvTPMSVM";
    GridSpec grid;
    std::vector<DatasetResult> datasets;
};

/// One dataset through the full protocol: 70:30 split, grid search by k-fold
/// cross-validation on the training part, refit on the whole training part,
/// metrics on the held-out part.
inline DatasetResult benchmark_dataset(const TwoViewDataset& ds, const GridSpec& grid, int folds,
                                       std::uint64_t seed, const EvalOptions& opts = {}) {
    DatasetResult r;
    r.name = ds.name;
    r.kernel = grid.kernel;
    const auto [train_ds, test_ds] = train_test_split(ds, opts.split_ratio, seed);
    r.n_train = train_ds.view_a.rows();
    r.n_test = test_ds.view_a.rows();

    const GridSearchResult search = cross_validate_grid(train_ds, grid, folds, seed, opts);
    r.cv_accuracy = search.best_score;
    r.chosen_c1 = search.best.c1;
    r.chosen_c2 = search.best.c2;
    r.chosen_sigma = search.best.kernel_a.sigma;

    TrainOptions train_opts;
    train_opts.method = opts.method;
    train_opts.tol = opts.final_tol;
    train_opts.max_iter = opts.final_max_iter;
    train_opts.scaling = opts.scaling;
    const MvTpmModel model = train(train_ds, search.best, train_opts);
    r.diag = model.diag;

    const BatchDecisions pred = predict(model, test_ds.view_a, test_ds.view_b);
    r.confusion = count_confusion(test_ds.labels, pred.labels);
    r.metrics = compute_metrics(r.confusion);
    r.ok = true;
    return r;
}

/// Benchmark over manifest-described datasets. Load or protocol failures are
/// recorded per dataset and the run continues. Datasets without a view-B
/// file get their view B synthesized from the training split only.
inline BenchmarkReport run_benchmark(const std::vector<DatasetManifest>& manifests,
                                     const GridSpec& grid, int folds, std::uint64_t seed,
                                     const EvalOptions& opts = {}) {
    validate_grid(grid);
    BenchmarkReport report;
    report.seed = seed;
    report.folds = folds;
    report.grid = grid;
    for (const auto& manifest : manifests) {
        DatasetResult r;
        r.name = manifest.name;
        try {
            TwoViewDataset ds = load_dataset(manifest, /*synthesize=*/false);
            if (!manifest.view_b_path) {
                auto [train_idx, test_idx] =
                    train_test_indices(ds.view_a.rows(), opts.split_ratio, seed);
                // Synthesis basis is fitted on the training rows only, then
                // applied everywhere; the later seeded split reproduces the
                // same partition.
                Matrix train_a(static_cast<Index>(train_idx.size()), ds.view_a.cols());
                for (std::size_t i = 0; i < train_idx.size(); ++i)
                    train_a.row(static_cast<Index>(i)) = ds.view_a.row(train_idx[i]);
                SynthesisPipeline pipeline =
                    fit_view_b_synthesis(train_a, manifest.scaling, *manifest.pca_threshold);
                ds.view_b = synthesize_view_b(pipeline, ds.view_a);
                ds.view_b_synthesis = std::move(pipeline);
            }
            r = benchmark_dataset(ds, grid, folds, seed, opts);
            r.name = manifest.name;
        } catch (const std::exception& e) {
            r.ok = false;
            r.error = e.what();
        }
        report.datasets.push_back(std::move(r));
    }
    return report;
}

// ---------------------------------------------------------------------------
// Report serialization (schema mvtpm-report/1)
// ---------------------------------------------------------------------------

inline constexpr const char* kReportSchema = "mvtpm-report/1";

inline nlohmann::json metrics_to_json(const MetricSet& m) {
    nlohmann::json j;
    j["accuracy"] = m.accuracy;
    j["error_rate"] = m.error_rate;
    j["sensitivity"] = m.sensitivity ? nlohmann::json(*m.sensitivity) : nlohmann::json();
    j["precision"] = m.precision ? nlohmann::json(*m.precision) : nlohmann::json();
    j["specificity"] = m.specificity ? nlohmann::json(*m.specificity) : nlohmann::json();
    return j;
}

inline nlohmann::json report_to_json(const BenchmarkReport& report) {
    nlohmann::json j;
    j["schema"] = kReportSchema;
    j["seed"] = report.seed;
    j["folds"] = report.folds;
    j["model"] = report.model_name;
    j["grid"] = {{"c1", report.grid.c1_values},
                 {"c2", report.grid.c2_values},
                 {"sigma", report.grid.sigma_values},
                 {"epsilon", report.grid.epsilon},
                 {"kernel", kernel_kind_name(report.grid.kernel)}};
    j["datasets"] = nlohmann::json::array();
    for (const auto& d : report.datasets) {
        nlohmann::json e;
        e["name"] = d.name;
        e["ok"] = d.ok;
        if (!d.ok) {
            e["error"] = d.error;
            j["datasets"].push_back(std::move(e));
            continue;
        }
        e["metrics"] = metrics_to_json(d.metrics);
        e["confusion"] = {{"tp", d.confusion.tp},
                          {"tn", d.confusion.tn},
                          {"fp", d.confusion.fp},
                          {"fn", d.confusion.fn}};
        e["chosen"] = {{"c1", d.chosen_c1}, {"c2", d.chosen_c2}, {"sigma", d.chosen_sigma}};
        e["cv_accuracy"] = d.cv_accuracy;
        e["n_train"] = d.n_train;
        e["n_test"] = d.n_test;
        e["kernel"] = kernel_kind_name(d.kernel);
        e["solver"] = {{"converged", d.diag.converged()},
                       {"iterations_positive", d.diag.iterations_positive},
                       {"iterations_negative", d.diag.iterations_negative},
                       {"residual_positive", d.diag.residual_positive},
                       {"residual_negative", d.diag.residual_negative}};
        j["datasets"].push_back(std::move(e));
    }
    return j;
}

/// Flat accuracy matrix (datasets x one model column) consumed by the stats
/// tooling; failed datasets are omitted.
inline void write_accuracy_matrix_csv(const std::filesystem::path& path,
                                      const BenchmarkReport& report) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path.string());
    out << "dataset," << report.model_name << '\n';
    for (const auto& d : report.datasets)
        if (d.ok) out << d.name << ',' << format_double(d.metrics.accuracy) << '\n';
    if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace mvtpm

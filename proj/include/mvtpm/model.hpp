#pragma once

// The classifier core: assembly of the two dual problems, training, recovery
// of the hyperplanes, and the decision rule.
//
// Both duals share one block structure. For the positive-class problem with
// per-view augmented Grams K1 (view A positives) and K2 (view B positives),
// cross Grams G1 (negatives x positives, view A) and G2 (view B), penalty C,
// the problem is
//
//   minimize 1/2 (s1^T K1 s1 + s2^T K2 s2) - c^T tau
//   s1 = alpha1 - beta1 + beta2,  s2 = alpha2 + beta1 - beta2,
//   c_beta1 = C (G2 - G1)^T e - eps,  c_beta2 = C (G1 - G2)^T e - eps,
//   c_alpha1 = C G1^T e,  c_alpha2 = C G2^T e,
//   0 <= alpha <= alpha_cap,  beta1, beta2 >= 0,  beta1 + beta2 <= pair_cap.
//
// The negative-class problem is the mirror image with the class roles and
// (C1,C2,D1,eps1) <-> (C3,C4,D2,eps2) swapped.

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mvtpm/data.hpp"
#include "mvtpm/kernel.hpp"
#include "mvtpm/preprocess.hpp"
#include "mvtpm/qp.hpp"
#include "mvtpm/types.hpp"

namespace mvtpm {

struct Hyperparams {
    double c1 = 1.0, c2 = 1.0, c3 = 1.0, c4 = 1.0;  // penalties
    double d1 = 1.0, d2 = 1.0;                       // view-consistency caps
    double eps1 = 0.1, eps2 = 0.1;                   // insensitivity widths
    KernelSpec kernel_a;
    KernelSpec kernel_b;

    /// The evaluation protocol ties C3=C1 and C4=D1=D2=C2 and uses one
    /// kernel width for both views.
    static Hyperparams tied(double c1, double c2, double sigma, KernelKind kind,
                            double epsilon) {
        Hyperparams hp;
        hp.c1 = hp.c3 = c1;
        hp.c2 = hp.c4 = hp.d1 = hp.d2 = c2;
        hp.eps1 = hp.eps2 = epsilon;
        hp.kernel_a = {kind, sigma};
        hp.kernel_b = {kind, sigma};
        return hp;
    }
};

inline void validate_hyperparams(const Hyperparams& hp) {
    require(hp.c1 > 0 && hp.c2 > 0 && hp.c3 > 0 && hp.c4 > 0,
            "hyperparams: penalties must be positive");
    require(hp.d1 > 0 && hp.d2 > 0, "hyperparams: D1 and D2 must be positive");
    require(hp.eps1 >= 0 && hp.eps2 >= 0, "hyperparams: epsilons must be nonnegative");
    validate_kernel(hp.kernel_a);
    validate_kernel(hp.kernel_b);
}

/// Class-split training matrices: P_* holds positive rows, N_* negative
/// rows, per view.
struct ViewSplit {
    Matrix p_a, p_b;  // m1 rows each
    Matrix n_a, n_b;  // m2 rows each
};

inline void validate_split(const ViewSplit& s) {
    require(s.p_a.rows() >= 1 && s.n_a.rows() >= 1, "split: both classes must be nonempty");
    require(s.p_a.rows() == s.p_b.rows(), "split: positive views disagree in rows");
    require(s.n_a.rows() == s.n_b.rows(), "split: negative views disagree in rows");
    require(s.p_a.cols() == s.n_a.cols(), "split: view A dimensions disagree");
    require(s.p_b.cols() == s.n_b.cols(), "split: view B dimensions disagree");
}

inline ViewSplit split_by_class(const TwoViewDataset& ds) {
    validate_dataset(ds);
    auto [m1, m2] = class_counts(ds);
    require(m1 >= 1 && m2 >= 1, "dataset: both classes must be present");
    ViewSplit s;
    s.p_a.resize(m1, ds.view_a.cols());
    s.p_b.resize(m1, ds.view_b.cols());
    s.n_a.resize(m2, ds.view_a.cols());
    s.n_b.resize(m2, ds.view_b.cols());
    Index ip = 0, in = 0;
    for (Index i = 0; i < ds.view_a.rows(); ++i) {
        if (ds.labels[static_cast<std::size_t>(i)] > 0) {
            s.p_a.row(ip) = ds.view_a.row(i);
            s.p_b.row(ip) = ds.view_b.row(i);
            ++ip;
        } else {
            s.n_a.row(in) = ds.view_a.row(i);
            s.n_b.row(in) = ds.view_b.row(i);
            ++in;
        }
    }
    return s;
}

enum class DualSide { Positive, Negative };

namespace detail {

/// Gram blocks feeding one dual problem.
struct DualBlocks {
    Matrix K1, K2;  // own-class augmented Grams (m x m)
    Matrix G1, G2;  // other-class x own-class augmented Grams
    double penalty = 0.0;    // C1 for the positive problem, C3 for the negative
    double alpha_cap = 0.0;  // C2 / C4
    double pair_cap = 0.0;   // D1 / D2
    double eps = 0.0;        // eps1 / eps2
};

inline DualBlocks dual_blocks(const ViewSplit& s, const Hyperparams& hp, DualSide side) {
    DualBlocks b;
    if (side == DualSide::Positive) {
        b.K1 = augmented_gram(hp.kernel_a, s.p_a, s.p_a);
        b.K2 = augmented_gram(hp.kernel_b, s.p_b, s.p_b);
        b.G1 = augmented_gram(hp.kernel_a, s.n_a, s.p_a);
        b.G2 = augmented_gram(hp.kernel_b, s.n_b, s.p_b);
        b.penalty = hp.c1;
        b.alpha_cap = hp.c2;
        b.pair_cap = hp.d1;
        b.eps = hp.eps1;
    } else {
        b.K1 = augmented_gram(hp.kernel_a, s.n_a, s.n_a);
        b.K2 = augmented_gram(hp.kernel_b, s.n_b, s.n_b);
        b.G1 = augmented_gram(hp.kernel_a, s.p_a, s.n_a);
        b.G2 = augmented_gram(hp.kernel_b, s.p_b, s.n_b);
        b.penalty = hp.c3;
        b.alpha_cap = hp.c4;
        b.pair_cap = hp.d2;
        b.eps = hp.eps2;
    }
    return b;
}

inline Vector dual_linear_vector(const DualBlocks& b) {
    const Index m = b.K1.rows();
    const Vector ones_other = Vector::Ones(b.G1.rows());
    const Vector g1 = b.penalty * (b.G1.transpose() * ones_other);
    const Vector g2 = b.penalty * (b.G2.transpose() * ones_other);
    Vector c(4 * m);
    c.segment(0, m) = g2 - g1 - Vector::Constant(m, b.eps);
    c.segment(m, m) = g1 - g2 - Vector::Constant(m, b.eps);
    c.segment(2 * m, m) = g1;
    c.segment(3 * m, m) = g2;
    return c;
}

inline StructuredQp assemble_dual(const DualBlocks& b) {
    const Index m = b.K1.rows();
    StructuredQp qp;
    qp.block = m;
    qp.alpha_cap = b.alpha_cap;
    qp.pair_cap = b.pair_cap;
    qp.c = dual_linear_vector(b);
    qp.Q.resize(4 * m, 4 * m);
    const Matrix sum = b.K1 + b.K2;
    qp.Q.block(0, 0, m, m) = sum;
    qp.Q.block(0, m, m, m) = -sum;
    qp.Q.block(0, 2 * m, m, m) = -b.K1;
    qp.Q.block(0, 3 * m, m, m) = b.K2;
    qp.Q.block(m, 0, m, m) = -sum;
    qp.Q.block(m, m, m, m) = sum;
    qp.Q.block(m, 2 * m, m, m) = b.K1;
    qp.Q.block(m, 3 * m, m, m) = -b.K2;
    qp.Q.block(2 * m, 0, m, m) = -b.K1;
    qp.Q.block(2 * m, m, m, m) = b.K1;
    qp.Q.block(2 * m, 2 * m, m, m) = b.K1;
    qp.Q.block(2 * m, 3 * m, m, m).setZero();
    qp.Q.block(3 * m, 0, m, m) = b.K2;
    qp.Q.block(3 * m, m, m, m) = -b.K2;
    qp.Q.block(3 * m, 2 * m, m, m).setZero();
    qp.Q.block(3 * m, 3 * m, m, m) = b.K2;
    return qp;
}

/// Combined coefficients of a solved dual: s1 = alpha1 - beta1 + beta2,
/// s2 = alpha2 + beta1 - beta2.
inline std::pair<Vector, Vector> combine_dual(const Vector& tau, Index m) {
    Vector s1 = tau.segment(2 * m, m) - tau.segment(0, m) + tau.segment(m, m);
    Vector s2 = tau.segment(3 * m, m) + tau.segment(0, m) - tau.segment(m, m);
    return {std::move(s1), std::move(s2)};
}

}  // namespace detail

inline StructuredQp assemble_positive_dual(const ViewSplit& split, const Hyperparams& hp) {
    validate_split(split);
    validate_hyperparams(hp);
    return detail::assemble_dual(detail::dual_blocks(split, hp, DualSide::Positive));
}

inline StructuredQp assemble_negative_dual(const ViewSplit& split, const Hyperparams& hp) {
    validate_split(split);
    validate_hyperparams(hp);
    return detail::assemble_dual(detail::dual_blocks(split, hp, DualSide::Negative));
}

// ---------------------------------------------------------------------------
// Duality gap
// ---------------------------------------------------------------------------

struct DualityReport {
    double primal = 0.0;
    double dual = 0.0;  // maximization orientation, constant term included
    double gap = 0.0;
};

/// Reconstructs the primal point from a feasible dual solution, fills the
/// slacks with their minimal feasible values, and evaluates both objectives.
inline DualityReport duality_report(const ViewSplit& split, const Hyperparams& hp,
                                    DualSide side, const QpSolution& solution) {
    validate_split(split);
    validate_hyperparams(hp);
    const auto b = detail::dual_blocks(split, hp, side);
    const Index m = b.K1.rows();
    require(solution.tau.size() == 4 * m, "duality_report: solution has wrong length");
    const auto [s1, s2] = detail::combine_dual(solution.tau, m);
    const Vector ones_other = Vector::Ones(b.G1.rows());

    // Own-class and other-class projections of the reconstructed weight
    // vectors. For the positive problem own1 = A1 v1 and other1 = B1 v1; the
    // negative problem mirrors to own1 = -B1 u1 and other1 = -A1 u1, and
    // every primal term below is invariant under that joint negation, so one
    // formula serves both sides.
    const double C = b.penalty;
    const Matrix other_own_a = augmented_gram(
        hp.kernel_a, side == DualSide::Positive ? split.n_a : split.p_a,
        side == DualSide::Positive ? split.n_a : split.p_a);
    const Matrix other_own_b = augmented_gram(
        hp.kernel_b, side == DualSide::Positive ? split.n_b : split.p_b,
        side == DualSide::Positive ? split.n_b : split.p_b);

    const Vector own1 = b.K1 * s1 - C * (b.G1.transpose() * ones_other);
    const Vector own2 = b.K2 * s2 - C * (b.G2.transpose() * ones_other);
    const Vector other1 = b.G1 * s1 - C * (other_own_a * ones_other);
    const Vector other2 = b.G2 * s2 - C * (other_own_b * ones_other);

    const double norm1 = s1.dot(b.K1 * s1) - 2.0 * C * ones_other.dot(b.G1 * s1) +
                         C * C * ones_other.dot(other_own_a * ones_other);
    const double norm2 = s2.dot(b.K2 * s2) - 2.0 * C * ones_other.dot(b.G2 * s2) +
                         C * C * ones_other.dot(other_own_b * ones_other);

    // Minimal feasible slacks.
    const Vector xi1 = (-own1).cwiseMax(0.0);
    const Vector xi2 = (-own2).cwiseMax(0.0);
    const Vector eta =
        ((own1 - own2).cwiseAbs() - Vector::Constant(m, b.eps)).cwiseMax(0.0);

    DualityReport rep;
    rep.primal = 0.5 * (norm1 + norm2) + C * (other1.sum() + other2.sum()) +
                 b.alpha_cap * (xi1.sum() + xi2.sum()) + b.pair_cap * eta.sum();

    const Vector c = detail::dual_linear_vector(b);
    const double variable_part =
        0.5 * (s1.dot(b.K1 * s1) + s2.dot(b.K2 * s2)) - c.dot(solution.tau);
    const double constant = 0.5 * C * C *
                            (ones_other.dot(other_own_a * ones_other) +
                             ones_other.dot(other_own_b * ones_other));
    rep.dual = -variable_part - constant;
    rep.gap = rep.primal - rep.dual;
    return rep;
}

inline double duality_gap(const ViewSplit& split, const Hyperparams& hp, DualSide side,
                          const QpSolution& solution) {
    return duality_report(split, hp, side, solution).gap;
}

// ---------------------------------------------------------------------------
// Trained model
// ---------------------------------------------------------------------------

struct SolverDiagnostics {
    bool converged_positive = false, converged_negative = false;
    int iterations_positive = 0, iterations_negative = 0;
    double residual_positive = 0.0, residual_negative = 0.0;
    double objective_positive = 0.0, objective_negative = 0.0;
    double gap_positive = std::numeric_limits<double>::quiet_NaN();
    double gap_negative = std::numeric_limits<double>::quiet_NaN();

    bool converged() const { return converged_positive && converged_negative; }
};

struct MvTpmModel {
    Hyperparams hp;
    ViewSplit split;          // training matrices after preprocessing
    Vector s1, s2;            // positive-problem combined duals
    Vector t1, t2;            // negative-problem combined duals
    // Explicit augmented weight vectors, populated per view when that view's
    // kernel is linear.
    std::optional<Vector> v1, v2, u1, u2;
    Scaler scaler_a, scaler_b;
    std::optional<SynthesisPipeline> view_b_synthesis;
    LabelMap label_map;
    SolverDiagnostics diag;
};

enum class SolverMethod { ProjectedGradient, CoordinateDescent };

inline const char* solver_method_name(SolverMethod m) {
    return m == SolverMethod::ProjectedGradient ? "projected-gradient" : "coordinate-descent";
}

inline SolverMethod parse_solver_method(const std::string& name) {
    if (name == "projected-gradient" || name == "pg") return SolverMethod::ProjectedGradient;
    if (name == "coordinate-descent" || name == "cd") return SolverMethod::CoordinateDescent;
    throw std::invalid_argument("unknown solver method: " + name);
}

struct TrainOptions {
    SolverMethod method = SolverMethod::ProjectedGradient;
    double tol = kDefaultQpTol;
    int max_iter = kDefaultQpMaxIter;
    ScalingMode scaling = ScalingMode::MinMax01;
    bool compute_gaps = true;
};

namespace detail {

inline QpSolution solve_blocks(const DualBlocks& b, const TrainOptions& opts) {
    GramPairOperator op(b.K1, b.K2, dual_linear_vector(b), b.alpha_cap, b.pair_cap);
    if (opts.method == SolverMethod::CoordinateDescent)
        return solve_coordinate_descent_impl(op, opts.tol, opts.max_iter);
    return solve_projected_gradient_impl(op, opts.tol, opts.max_iter);
}

/// Augmented weight vector w = X^T coeff + bias row, in [w; b] layout.
inline Vector augmented_combination(const Matrix& X, const Vector& coeff) {
    Vector w(X.cols() + 1);
    w.head(X.cols()) = X.transpose() * coeff;
    w[X.cols()] = coeff.sum();
    return w;
}

}  // namespace detail

/// Trains on an already class-split, already preprocessed sample set.
inline MvTpmModel train_split(const ViewSplit& split, const Hyperparams& hp,
                              const TrainOptions& opts = {}) {
    validate_split(split);
    validate_hyperparams(hp);

    MvTpmModel model;
    model.hp = hp;
    model.split = split;

    const auto pos_blocks = detail::dual_blocks(split, hp, DualSide::Positive);
    const auto neg_blocks = detail::dual_blocks(split, hp, DualSide::Negative);
    const QpSolution pos = detail::solve_blocks(pos_blocks, opts);
    const QpSolution neg = detail::solve_blocks(neg_blocks, opts);

    std::tie(model.s1, model.s2) = detail::combine_dual(pos.tau, split.p_a.rows());
    std::tie(model.t1, model.t2) = detail::combine_dual(neg.tau, split.n_a.rows());

    if (hp.kernel_a.kind == KernelKind::Linear) {
        const Vector ones_n = Vector::Ones(split.n_a.rows());
        const Vector ones_p = Vector::Ones(split.p_a.rows());
        model.v1 = detail::augmented_combination(split.p_a, model.s1) -
                   hp.c1 * detail::augmented_combination(split.n_a, ones_n);
        model.u1 = hp.c3 * detail::augmented_combination(split.p_a, ones_p) -
                   detail::augmented_combination(split.n_a, model.t1);
    }
    if (hp.kernel_b.kind == KernelKind::Linear) {
        const Vector ones_n = Vector::Ones(split.n_b.rows());
        const Vector ones_p = Vector::Ones(split.p_b.rows());
        model.v2 = detail::augmented_combination(split.p_b, model.s2) -
                   hp.c1 * detail::augmented_combination(split.n_b, ones_n);
        model.u2 = hp.c3 * detail::augmented_combination(split.p_b, ones_p) -
                   detail::augmented_combination(split.n_b, model.t2);
    }

    model.diag.converged_positive = pos.converged;
    model.diag.converged_negative = neg.converged;
    model.diag.iterations_positive = pos.iterations;
    model.diag.iterations_negative = neg.iterations;
    model.diag.residual_positive = pos.stationarity_residual;
    model.diag.residual_negative = neg.stationarity_residual;
    model.diag.objective_positive = pos.objective;
    model.diag.objective_negative = neg.objective;
    if (opts.compute_gaps) {
        model.diag.gap_positive = duality_gap(split, hp, DualSide::Positive, pos);
        model.diag.gap_negative = duality_gap(split, hp, DualSide::Negative, neg);
    }
    return model;
}

/// Fits per-view scalers on the dataset, splits it by class, and trains.
inline MvTpmModel train(const TwoViewDataset& ds, const Hyperparams& hp,
                        const TrainOptions& opts = {}) {
    validate_dataset(ds);
    const auto [m1, m2] = class_counts(ds);
    require(m1 >= 1 && m2 >= 1, "train: both classes must be present");

    TwoViewDataset scaled = ds;
    Scaler sa = fit_scaler(ds.view_a, opts.scaling);
    Scaler sb = fit_scaler(ds.view_b, opts.scaling);
    scaled.view_a = apply_scaler(sa, ds.view_a);
    scaled.view_b = apply_scaler(sb, ds.view_b);

    MvTpmModel model = train_split(split_by_class(scaled), hp, opts);
    model.scaler_a = std::move(sa);
    model.scaler_b = std::move(sb);
    model.view_b_synthesis = ds.view_b_synthesis;
    model.label_map = ds.label_map;
    return model;
}

// ---------------------------------------------------------------------------
// Decision functions
// ---------------------------------------------------------------------------

struct HyperplaneValues {
    double h1a = 0, h1b = 0;  // positive-class hyperplanes, view A / B
    double h2a = 0, h2b = 0;  // negative-class hyperplanes
};

struct Decision {
    double f = 0.0;
    int label = -1;
};

/// f = |h1A + h1B| - |h2A + h2B|; negative f picks the +1 class, the
/// boundary f = 0 falls to -1.
inline Decision decide_from_hyperplanes(const HyperplaneValues& h) {
    Decision d;
    d.f = std::abs(h.h1a + h.h1b) - std::abs(h.h2a + h.h2b);
    d.label = d.f < 0.0 ? 1 : -1;
    return d;
}

struct BatchDecisions {
    Vector f;
    std::vector<int> labels;
};

/// Decision values for preprocessed inputs (rows of A and B must match the
/// stored training views). Evaluated through the augmented-kernel expansion:
///   h1A(x) = sum_i s1_i k~(x, P_i) - C1 sum_j k~(x, N_j),
///   h2A(x) = C3 sum_i k~(x, P_i) - sum_j t1_j k~(x, N_j),
/// and the view-B analogues with s2, t2.
inline std::vector<HyperplaneValues> hyperplane_values_batch(const MvTpmModel& model,
                                                             const Matrix& A, const Matrix& B) {
    require(A.rows() == B.rows(), "hyperplane_values: row counts disagree");
    require(A.cols() == model.split.p_a.cols(), "hyperplane_values: view A dimension mismatch");
    require(B.cols() == model.split.p_b.cols(), "hyperplane_values: view B dimension mismatch");

    const Matrix ka_pos = augmented_gram(model.hp.kernel_a, A, model.split.p_a);
    const Matrix ka_neg = augmented_gram(model.hp.kernel_a, A, model.split.n_a);
    const Matrix kb_pos = augmented_gram(model.hp.kernel_b, B, model.split.p_b);
    const Matrix kb_neg = augmented_gram(model.hp.kernel_b, B, model.split.n_b);

    const Vector h1a = ka_pos * model.s1 - model.hp.c1 * ka_neg.rowwise().sum();
    const Vector h1b = kb_pos * model.s2 - model.hp.c1 * kb_neg.rowwise().sum();
    const Vector h2a = model.hp.c3 * ka_pos.rowwise().sum() - ka_neg * model.t1;
    const Vector h2b = model.hp.c3 * kb_pos.rowwise().sum() - kb_neg * model.t2;

    std::vector<HyperplaneValues> out(static_cast<std::size_t>(A.rows()));
    for (Index i = 0; i < A.rows(); ++i)
        out[static_cast<std::size_t>(i)] = {h1a[i], h1b[i], h2a[i], h2b[i]};
    return out;
}

inline HyperplaneValues hyperplane_values(const MvTpmModel& model, const Vector& xa,
                                          const Vector& xb) {
    return hyperplane_values_batch(model, xa.transpose(), xb.transpose())[0];
}

/// Explicit-vector evaluation, available when the kernels are linear:
/// h = [x, 1] . w for each stored augmented weight vector.
inline HyperplaneValues hyperplane_values_explicit(const MvTpmModel& model, const Vector& xa,
                                                   const Vector& xb) {
    require(model.v1 && model.u1, "explicit hyperplanes: view A kernel is not linear");
    require(model.v2 && model.u2, "explicit hyperplanes: view B kernel is not linear");
    require(xa.size() + 1 == model.v1->size(), "explicit hyperplanes: view A dimension mismatch");
    require(xb.size() + 1 == model.v2->size(), "explicit hyperplanes: view B dimension mismatch");
    const auto dot_aug = [](const Vector& x, const Vector& w) {
        return x.dot(w.head(x.size())) + w[x.size()];
    };
    return {dot_aug(xa, *model.v1), dot_aug(xb, *model.v2), dot_aug(xa, *model.u1),
            dot_aug(xb, *model.u2)};
}

inline Decision decide(const MvTpmModel& model, const Vector& xa, const Vector& xb) {
    return decide_from_hyperplanes(hyperplane_values(model, xa, xb));
}

inline BatchDecisions decide_batch(const MvTpmModel& model, const Matrix& A, const Matrix& B) {
    const auto values = hyperplane_values_batch(model, A, B);
    BatchDecisions out;
    out.f.resize(static_cast<Index>(values.size()));
    out.labels.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const Decision d = decide_from_hyperplanes(values[i]);
        out.f[static_cast<Index>(i)] = d.f;
        out.labels.push_back(d.label);
    }
    return out;
}

/// Prediction on raw inputs: synthesizes view B when absent (requires the
/// stored pipeline), then applies the model's per-view scalers.
inline BatchDecisions predict(const MvTpmModel& model, const Matrix& raw_a,
                              const std::optional<Matrix>& raw_b = std::nullopt) {
    Matrix b_source;
    if (raw_b) {
        b_source = *raw_b;
        require(b_source.rows() == raw_a.rows(), "predict: view row counts disagree");
    } else {
        if (!model.view_b_synthesis)
            throw DataError("predict: view B absent and the model stores no synthesis basis");
        b_source = synthesize_view_b(*model.view_b_synthesis, raw_a);
    }
    return decide_batch(model, apply_scaler(model.scaler_a, raw_a),
                        apply_scaler(model.scaler_b, b_source));
}

inline double accuracy_against(const std::vector<int>& truth, const std::vector<int>& predicted) {
    require(truth.size() == predicted.size() && !truth.empty(),
            "accuracy_against: size mismatch or empty");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i)
        if (truth[i] == predicted[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(truth.size());
}

}  // namespace mvtpm

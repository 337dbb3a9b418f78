#pragma once

// Structured convex QP shared by both duals:
//
//   minimize  1/2 tau^T Q tau - c^T tau
//   over      tau = (beta1 | beta2 | alpha1 | alpha2), blocks of length m,
//             beta1, beta2 >= 0,  beta1_i + beta2_i <= pair_cap,
//             0 <= alpha1, alpha2 <= alpha_cap.
//
// Two independent solvers are provided: projected gradient (the default) and
// cyclic exact coordinate descent (used as a cross-checking oracle). Both
// accept either an explicit dense Q or a matrix-free operator built from the
// two augmented Gram matrices that generate Q.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "mvtpm/types.hpp"

namespace mvtpm {

struct StructuredQp {
    Matrix Q;           // 4m x 4m, symmetric PSD
    Vector c;           // 4m
    Index block = 0;    // m
    double alpha_cap = 0.0;
    double pair_cap = 0.0;
};

struct QpSolution {
    Vector tau;
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
    // ||tau - P(tau - grad f(tau))||_inf with P the feasible-set projection.
    double stationarity_residual = std::numeric_limits<double>::infinity();
};

// ---------------------------------------------------------------------------
// Feasible-set projection
// ---------------------------------------------------------------------------

/// Euclidean projection of (a, b) onto the triangle {a>=0, b>=0, a+b<=cap}.
/// Negative coordinates are clamped first; if the sum still exceeds the cap
/// the point is moved onto the segment a+b=cap, transferring mass to the
/// other coordinate when one end goes negative.
inline void project_pair(double& a, double& b, double cap) {
    if (a < 0.0) a = 0.0;
    if (b < 0.0) b = 0.0;
    const double excess = a + b - cap;
    if (excess > 0.0) {
        const double t = 0.5 * excess;
        a -= t;
        b -= t;
        if (a < 0.0) {
            a = 0.0;
            b = cap;
        } else if (b < 0.0) {
            b = 0.0;
            a = cap;
        }
    }
}

inline void project_feasible_inplace(Vector& point, Index m, double alpha_cap, double pair_cap) {
    for (Index i = 0; i < m; ++i) project_pair(point[i], point[m + i], pair_cap);
    for (Index j = 2 * m; j < 4 * m; ++j) point[j] = std::clamp(point[j], 0.0, alpha_cap);
}

inline Vector project_feasible(const Vector& point, const StructuredQp& qp) {
    require(point.size() == 4 * qp.block, "project_feasible: point has wrong length");
    Vector out = point;
    project_feasible_inplace(out, qp.block, qp.alpha_cap, qp.pair_cap);
    return out;
}

// ---------------------------------------------------------------------------
// Spectral bound
// ---------------------------------------------------------------------------

namespace detail {

/// Rayleigh-quotient estimate of the dominant eigenvalue via 200 power
/// iterations from a fixed seeded start. Returns 0 when the iteration fails
/// to grow (zero or non-finite image).
template <class MultiplyFn>
double power_iteration_estimate(const MultiplyFn& multiply, Index n, int iterations = 200) {
    std::mt19937_64 engine(0x5eed5eed1234ULL);
    Vector v(n);
    for (Index i = 0; i < n; ++i) {
        const double u = static_cast<double>(engine() >> 11) * 0x1.0p-53;
        v[i] = 2.0 * u - 1.0;
    }
    double norm = v.norm();
    if (norm == 0.0) return 0.0;
    v /= norm;
    Vector w(n);
    double lambda = 0.0;
    for (int k = 0; k < iterations; ++k) {
        multiply(v, w);
        lambda = v.dot(w);
        const double wn = w.norm();
        if (!std::isfinite(wn) || wn <= 0.0) return 0.0;
        v = w / wn;
    }
    return std::isfinite(lambda) ? lambda : 0.0;
}

}  // namespace detail

/// Upper bound on the largest eigenvalue of a symmetric matrix: power
/// iteration inflated by 1%, falling back to the largest absolute row sum
/// (which bounds the spectral radius) when the iteration does not grow.
inline double spectral_upper_bound(const Matrix& Q) {
    require(Q.rows() == Q.cols(), "spectral_upper_bound: matrix must be square");
    require(Q.allFinite(), "spectral_upper_bound: non-finite entries");
    if (Q.rows() == 0) return 0.0;
    const double estimate = detail::power_iteration_estimate(
        [&](const Vector& x, Vector& y) { y.noalias() = Q * x; }, Q.rows());
    if (estimate <= 0.0) return Q.cwiseAbs().rowwise().sum().maxCoeff();
    return 1.01 * estimate;
}

// ---------------------------------------------------------------------------
// Problem operators
// ---------------------------------------------------------------------------

/// View over an explicitly stored StructuredQp.
class DenseQpOperator {
public:
    explicit DenseQpOperator(const StructuredQp& qp) : qp_(&qp) {
        require(qp.block > 0, "StructuredQp: block size must be positive");
        require(qp.Q.rows() == 4 * qp.block && qp.Q.cols() == 4 * qp.block,
                "StructuredQp: Q must be 4m x 4m");
        require(qp.c.size() == 4 * qp.block, "StructuredQp: c must have length 4m");
        require(qp.Q.allFinite() && qp.c.allFinite(), "StructuredQp: non-finite entries");
    }

    Index size() const { return qp_->c.size(); }
    Index block() const { return qp_->block; }
    double alpha_cap() const { return qp_->alpha_cap; }
    double pair_cap() const { return qp_->pair_cap; }
    const Vector& linear() const { return qp_->c; }

    void multiply(const Vector& tau, Vector& out) const { out.noalias() = qp_->Q * tau; }
    double diag(Index j) const { return qp_->Q(j, j); }
    double pair_cross(Index i) const { return qp_->Q(i, block() + i); }
    void add_scaled_column(Vector& g, Index j, double delta) const {
        g.noalias() += delta * qp_->Q.col(j);
    }
    double spectral_bound() const { return spectral_upper_bound(qp_->Q); }

private:
    const StructuredQp* qp_;
};

/// Matrix-free operator for the duals. With s1 = alpha1 - beta1 + beta2 and
/// s2 = alpha2 + beta1 - beta2, the quadratic form is
/// tau^T Q tau = s1^T K1 s1 + s2^T K2 s2, so products with Q need only the
/// two m x m Gram blocks instead of the 4m x 4m expansion.
class GramPairOperator {
public:
    GramPairOperator(const Matrix& K1, const Matrix& K2, Vector c,
                     double alpha_cap, double pair_cap)
        : K1_(&K1), K2_(&K2), c_(std::move(c)), alpha_cap_(alpha_cap), pair_cap_(pair_cap) {
        require(K1.rows() == K1.cols() && K2.rows() == K2.cols() && K1.rows() == K2.rows(),
                "GramPairOperator: Gram blocks must be square of equal size");
        require(c_.size() == 4 * K1.rows(), "GramPairOperator: c must have length 4m");
        require(K1.allFinite() && K2.allFinite() && c_.allFinite(),
                "GramPairOperator: non-finite entries");
        s1_.resize(K1.rows());
        s2_.resize(K1.rows());
        w1_.resize(K1.rows());
        w2_.resize(K1.rows());
    }

    Index size() const { return c_.size(); }
    Index block() const { return K1_->rows(); }
    double alpha_cap() const { return alpha_cap_; }
    double pair_cap() const { return pair_cap_; }
    const Vector& linear() const { return c_; }

    void multiply(const Vector& tau, Vector& out) const {
        const Index m = block();
        s1_ = tau.segment(2 * m, m) - tau.segment(0, m) + tau.segment(m, m);
        s2_ = tau.segment(3 * m, m) + tau.segment(0, m) - tau.segment(m, m);
        w1_.noalias() = (*K1_) * s1_;
        w2_.noalias() = (*K2_) * s2_;
        out.resize(4 * m);
        out.segment(0, m) = w2_ - w1_;
        out.segment(m, m) = w1_ - w2_;
        out.segment(2 * m, m) = w1_;
        out.segment(3 * m, m) = w2_;
    }

    double diag(Index j) const {
        const Index m = block();
        if (j < 2 * m) {
            const Index i = j < m ? j : j - m;
            return (*K1_)(i, i) + (*K2_)(i, i);
        }
        if (j < 3 * m) return (*K1_)(j - 2 * m, j - 2 * m);
        return (*K2_)(j - 3 * m, j - 3 * m);
    }

    double pair_cross(Index i) const { return -((*K1_)(i, i) + (*K2_)(i, i)); }

    void add_scaled_column(Vector& g, Index j, double delta) const {
        const Index m = block();
        // Column j of Q is determined by how coordinate j enters s1 and s2.
        double into_s1 = 0.0, into_s2 = 0.0;
        Index i = 0;
        if (j < m) {
            i = j;
            into_s1 = -1.0;
            into_s2 = 1.0;
        } else if (j < 2 * m) {
            i = j - m;
            into_s1 = 1.0;
            into_s2 = -1.0;
        } else if (j < 3 * m) {
            i = j - 2 * m;
            into_s1 = 1.0;
        } else {
            i = j - 3 * m;
            into_s2 = 1.0;
        }
        const double d1 = delta * into_s1;
        const double d2 = delta * into_s2;
        if (d1 != 0.0) {
            const auto col = K1_->col(i);
            g.segment(0, m) -= d1 * col;
            g.segment(m, m) += d1 * col;
            g.segment(2 * m, m) += d1 * col;
        }
        if (d2 != 0.0) {
            const auto col = K2_->col(i);
            g.segment(0, m) += d2 * col;
            g.segment(m, m) -= d2 * col;
            g.segment(3 * m, m) += d2 * col;
        }
    }

    double spectral_bound() const {
        const double estimate = detail::power_iteration_estimate(
            [this](const Vector& x, Vector& y) { multiply(x, y); }, size());
        if (estimate > 0.0) return 1.01 * estimate;
        // lambda_max(Q) <= ||J||^2 max(lambda_max(K1), lambda_max(K2)) with
        // ||J||^2 <= 6 for the signed block map, bounded via row sums.
        const double fallback = 6.0 * (K1_->cwiseAbs().rowwise().sum().maxCoeff() +
                                       K2_->cwiseAbs().rowwise().sum().maxCoeff());
        return std::max(fallback, 1e-12);
    }

private:
    const Matrix* K1_;
    const Matrix* K2_;
    Vector c_;
    double alpha_cap_;
    double pair_cap_;
    mutable Vector s1_, s2_, w1_, w2_;
};

// ---------------------------------------------------------------------------
// Solvers
// ---------------------------------------------------------------------------

namespace detail {

template <class Op>
double qp_objective(const Op& op, const Vector& tau, Vector& scratch) {
    op.multiply(tau, scratch);
    return 0.5 * tau.dot(scratch - op.linear());
}

/// Projected gradient with fixed step 1/L, L an upper bound on lambda_max(Q).
/// The stationarity residual uses the full (unit-step) gradient projection.
template <class Op>
QpSolution solve_projected_gradient_impl(const Op& op, double tol, int max_iter,
                                         std::vector<double>* objective_trace = nullptr) {
    require(tol > 0.0, "solve_projected_gradient: tol must be positive");
    require(max_iter > 0, "solve_projected_gradient: max_iter must be positive");
    const Index n = op.size();
    const Index m = op.block();
    const double step = 1.0 / std::max(op.spectral_bound(), 1e-12);

    QpSolution sol;
    Vector tau = Vector::Zero(n);
    Vector g(n), trial(n);
    int it = 0;
    for (; it < max_iter; ++it) {
        op.multiply(tau, g);
        g -= op.linear();
        if (objective_trace) objective_trace->push_back(0.5 * tau.dot(g - op.linear()));
        trial = tau - g;
        project_feasible_inplace(trial, m, op.alpha_cap(), op.pair_cap());
        sol.stationarity_residual = (tau - trial).template lpNorm<Eigen::Infinity>();
        if (sol.stationarity_residual <= tol) {
            sol.converged = true;
            break;
        }
        trial = tau - step * g;
        project_feasible_inplace(trial, m, op.alpha_cap(), op.pair_cap());
        tau.swap(trial);
    }
    sol.iterations = it;
    op.multiply(tau, g);
    sol.objective = 0.5 * tau.dot(g) - op.linear().dot(tau);
    if (!sol.converged) {
        trial = tau - (g - op.linear());
        project_feasible_inplace(trial, m, op.alpha_cap(), op.pair_cap());
        sol.stationarity_residual = (tau - trial).template lpNorm<Eigen::Infinity>();
    }
    sol.tau = std::move(tau);
    return sol;
}

/// Exact minimization of the 1-D restriction over [0, cap]. q is the
/// curvature, gradient the current derivative at x.
inline double clamped_newton_step(double x, double q, double gradient, double cap) {
    if (q > 0.0) return std::clamp(x - gradient / q, 0.0, cap);
    if (gradient > 0.0) return 0.0;
    if (gradient < 0.0) return cap;
    return std::clamp(x, 0.0, cap);
}

/// Cyclic exact coordinate descent: single alpha coordinates via the clamped
/// 1-D quadratic, (beta1_i, beta2_i) pairs via exact minimization of the 2-D
/// quadratic over the triangle (interior point plus the three edges; every
/// candidate is evaluated on the exact local model, so singular Hessians are
/// handled without special cases).
template <class Op>
QpSolution solve_coordinate_descent_impl(const Op& op, double tol, int max_iter) {
    require(tol > 0.0, "solve_coordinate_descent: tol must be positive");
    require(max_iter > 0, "solve_coordinate_descent: max_iter must be positive");
    const Index n = op.size();
    const Index m = op.block();
    const double cap = op.alpha_cap();
    const double pair_cap = op.pair_cap();

    Vector tau = Vector::Zero(n);
    Vector g = -op.linear();  // gradient Q tau - c, maintained incrementally
    Vector trial(n);

    const auto delta_objective = [](double g1, double g2, double q11, double q12, double q22,
                                    double da, double db) {
        return g1 * da + g2 * db + 0.5 * (q11 * da * da + 2.0 * q12 * da * db + q22 * db * db);
    };

    QpSolution sol;
    int sweep = 0;
    for (; sweep < max_iter; ++sweep) {
        // beta pairs
        for (Index i = 0; i < m; ++i) {
            const double a = tau[i], b = tau[m + i];
            const double g1 = g[i], g2 = g[m + i];
            const double q11 = op.diag(i), q22 = op.diag(m + i), q12 = op.pair_cross(i);

            double best_da = 0.0, best_db = 0.0, best_delta = 0.0;
            const auto consider = [&](double ca, double cb) {
                project_pair(ca, cb, pair_cap);
                const double da = ca - a, db = cb - b;
                const double d = delta_objective(g1, g2, q11, q12, q22, da, db);
                if (d < best_delta) {
                    best_delta = d;
                    best_da = da;
                    best_db = db;
                }
            };

            const double det = q11 * q22 - q12 * q12;
            if (det > 0.0) consider(a + (q12 * g2 - q22 * g1) / det, b + (q12 * g1 - q11 * g2) / det);
            // edge a = 0
            consider(0.0, clamped_newton_step(b, q22, g2 - q12 * a, pair_cap));
            // edge b = 0
            consider(clamped_newton_step(a, q11, g1 - q12 * b, pair_cap), 0.0);
            // edge a + b = pair_cap, parameterized by a
            {
                const double h = q11 - 2.0 * q12 + q22;
                double a_edge;
                if (h > 0.0) {
                    a_edge = std::clamp(
                        ((q11 - q12) * a + (q22 - q12) * (pair_cap - b) - (g1 - g2)) / h, 0.0,
                        pair_cap);
                } else {
                    // flat restriction: the slope is constant along the edge
                    const double slope =
                        (g1 - g2) - (q11 - q12) * a + (q12 - q22) * (pair_cap - b);
                    if (slope > 0.0)
                        a_edge = 0.0;
                    else if (slope < 0.0)
                        a_edge = pair_cap;
                    else
                        a_edge = std::clamp(a, 0.0, pair_cap);
                }
                consider(a_edge, pair_cap - a_edge);
            }

            if (best_delta < 0.0) {
                tau[i] = a + best_da;
                tau[m + i] = b + best_db;
                if (best_da != 0.0) op.add_scaled_column(g, i, best_da);
                if (best_db != 0.0) op.add_scaled_column(g, m + i, best_db);
            }
        }
        // alpha coordinates
        for (Index j = 2 * m; j < n; ++j) {
            const double x = tau[j];
            const double next = clamped_newton_step(x, op.diag(j), g[j], cap);
            const double delta = next - x;
            if (delta != 0.0) {
                tau[j] = next;
                op.add_scaled_column(g, j, delta);
            }
        }

        // Refresh the maintained gradient periodically against drift.
        if ((sweep & 63) == 63) {
            op.multiply(tau, g);
            g -= op.linear();
        }
        trial = tau - g;
        project_feasible_inplace(trial, m, cap, pair_cap);
        sol.stationarity_residual = (tau - trial).template lpNorm<Eigen::Infinity>();
        if (sol.stationarity_residual <= tol) {
            // Confirm against the exactly recomputed gradient.
            op.multiply(tau, g);
            g -= op.linear();
            trial = tau - g;
            project_feasible_inplace(trial, m, cap, pair_cap);
            sol.stationarity_residual = (tau - trial).template lpNorm<Eigen::Infinity>();
            if (sol.stationarity_residual <= tol) {
                sol.converged = true;
                ++sweep;
                break;
            }
        }
    }
    sol.iterations = sweep;
    op.multiply(tau, g);
    sol.objective = 0.5 * tau.dot(g) - op.linear().dot(tau);
    sol.tau = std::move(tau);
    return sol;
}

}  // namespace detail

constexpr double kDefaultQpTol = 1e-8;
constexpr int kDefaultQpMaxIter = 50000;

inline QpSolution solve_projected_gradient(const StructuredQp& qp, double tol = kDefaultQpTol,
                                           int max_iter = kDefaultQpMaxIter,
                                           std::vector<double>* objective_trace = nullptr) {
    return detail::solve_projected_gradient_impl(DenseQpOperator(qp), tol, max_iter,
                                                 objective_trace);
}

inline QpSolution solve_coordinate_descent(const StructuredQp& qp, double tol = kDefaultQpTol,
                                           int max_iter = kDefaultQpMaxIter) {
    return detail::solve_coordinate_descent_impl(DenseQpOperator(qp), tol, max_iter);
}

}  // namespace mvtpm

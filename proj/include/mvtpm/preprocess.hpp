#pragma once

// Feature scaling and principal component analysis. PCA doubles as the
// view-B synthesizer for datasets that ship with a single view.

#include <Eigen/Eigenvalues>
#include <string>

#include "mvtpm/types.hpp"

namespace mvtpm {

enum class ScalingMode { None, MinMax01, ZScore };

inline const char* scaling_mode_name(ScalingMode mode) {
    switch (mode) {
        case ScalingMode::None: return "none";
        case ScalingMode::MinMax01: return "minmax01";
        case ScalingMode::ZScore: return "zscore";
    }
    return "unknown";
}

inline ScalingMode parse_scaling_mode(const std::string& name) {
    if (name == "none") return ScalingMode::None;
    if (name == "minmax01") return ScalingMode::MinMax01;
    if (name == "zscore") return ScalingMode::ZScore;
    throw std::invalid_argument("unknown scaling mode: " + name);
}

/// Per-feature affine map x -> (x - offset) * scale. Constant features get
/// scale 0 and therefore map to 0.
struct Scaler {
    ScalingMode mode = ScalingMode::None;
    Vector offset;
    Vector scale;
};

inline Scaler fit_scaler(const Matrix& X, ScalingMode mode) {
    require(X.rows() >= 1, "fit_scaler: empty matrix");
    Scaler s;
    s.mode = mode;
    const Index d = X.cols();
    if (mode == ScalingMode::None) return s;
    s.offset.resize(d);
    s.scale.resize(d);
    for (Index j = 0; j < d; ++j) {
        if (mode == ScalingMode::MinMax01) {
            const double lo = X.col(j).minCoeff();
            const double hi = X.col(j).maxCoeff();
            s.offset[j] = lo;
            s.scale[j] = hi > lo ? 1.0 / (hi - lo) : 0.0;
        } else {
            const double mean = X.col(j).mean();
            const double var = (X.col(j).array() - mean).square().sum() /
                               std::max<Index>(X.rows() - 1, 1);
            const double sd = std::sqrt(var);
            s.offset[j] = mean;
            s.scale[j] = sd > 0.0 ? 1.0 / sd : 0.0;
        }
    }
    return s;
}

inline Matrix apply_scaler(const Scaler& s, const Matrix& X) {
    if (s.mode == ScalingMode::None) return X;
    require(X.cols() == s.offset.size(), "apply_scaler: feature dimension mismatch");
    return (X.rowwise() - s.offset.transpose()).array().rowwise() *
           s.scale.transpose().array();
}

inline Vector apply_scaler_row(const Scaler& s, const Vector& x) {
    if (s.mode == ScalingMode::None) return x;
    require(x.size() == s.offset.size(), "apply_scaler_row: feature dimension mismatch");
    return ((x - s.offset).array() * s.scale.array()).matrix();
}

/// Orthonormal principal axes (rows of `components`), retained so the
/// cumulative explained variance reaches `threshold`.
struct PcaBasis {
    Vector mean;
    Matrix components;                 // r x d, orthonormal rows
    Vector explained_variance_ratio;   // length r
    Vector eigenvalues;                // length r, descending
    double threshold = 0.0;
};

/// Eigen-decomposes the sample covariance (divisor n-1) and keeps the
/// smallest leading set of components whose cumulative variance ratio
/// reaches the threshold. Component signs are fixed so the largest-magnitude
/// entry of each is positive.
inline PcaBasis fit_pca(const Matrix& X, double threshold) {
    require(X.rows() >= 2, "fit_pca: need at least two samples");
    require(threshold > 0.0 && threshold <= 1.0, "fit_pca: threshold must be in (0,1]");
    const Index n = X.rows(), d = X.cols();

    PcaBasis basis;
    basis.threshold = threshold;
    basis.mean = X.colwise().mean();
    Matrix centered = X.rowwise() - basis.mean.transpose();
    Matrix cov = (centered.transpose() * centered) / static_cast<double>(n - 1);

    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    require(eig.info() == Eigen::Success, "fit_pca: eigendecomposition failed");
    // Eigen returns ascending order; reverse to descending.
    Vector values = eig.eigenvalues().reverse();
    Matrix vectors = eig.eigenvectors().rowwise().reverse();
    values = values.cwiseMax(0.0);

    const double total = values.sum();
    require(total > 0.0, "fit_pca: zero total variance");

    Index r = d;
    double cumulative = 0.0;
    for (Index j = 0; j < d; ++j) {
        cumulative += values[j];
        if (cumulative >= threshold * total * (1.0 - 1e-12)) {
            r = j + 1;
            break;
        }
    }

    basis.components.resize(r, d);
    basis.eigenvalues = values.head(r);
    basis.explained_variance_ratio = values.head(r) / total;
    for (Index j = 0; j < r; ++j) {
        Vector comp = vectors.col(j);
        Index argmax = 0;
        comp.cwiseAbs().maxCoeff(&argmax);
        if (comp[argmax] < 0.0) comp = -comp;
        basis.components.row(j) = comp.transpose();
    }
    return basis;
}

inline Matrix pca_project(const PcaBasis& basis, const Matrix& X) {
    require(X.cols() == basis.mean.size(), "pca_project: feature dimension mismatch");
    return (X.rowwise() - basis.mean.transpose()) * basis.components.transpose();
}

/// Deterministic view-B construction for single-view data: scale view A,
/// then project onto the retained principal components.
struct SynthesisPipeline {
    Scaler scaler;
    PcaBasis basis;
};

inline SynthesisPipeline fit_view_b_synthesis(const Matrix& view_a, ScalingMode mode,
                                              double threshold) {
    SynthesisPipeline pipeline;
    pipeline.scaler = fit_scaler(view_a, mode);
    pipeline.basis = fit_pca(apply_scaler(pipeline.scaler, view_a), threshold);
    return pipeline;
}

inline Matrix synthesize_view_b(const SynthesisPipeline& pipeline, const Matrix& view_a) {
    return pca_project(pipeline.basis, apply_scaler(pipeline.scaler, view_a));
}

}  // namespace mvtpm

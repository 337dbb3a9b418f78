#pragma once

// Kernel functions and Gram-matrix construction. All Gram matrices used by
// the duals are "augmented": kernel value plus one, which absorbs the bias
// term exactly as an appended ones column does for the linear kernel.

#include <cmath>
#include <string>

#include "mvtpm/types.hpp"

namespace mvtpm {

enum class KernelKind {
    Linear,
    // exp(-||x-y|| / (2 sigma^2)), unsquared Euclidean norm. This is the
    // form the experiments are defined with; see GaussianSquared for the
    // conventional variant.
    GaussianPaper,
    // exp(-||x-y||^2 / (2 sigma^2))
    GaussianSquared,
};

struct KernelSpec {
    KernelKind kind = KernelKind::GaussianPaper;
    double sigma = 1.0;  // width, used only by the gaussian kinds

    static KernelSpec linear() { return {KernelKind::Linear, 1.0}; }
    static KernelSpec gaussian_paper(double sigma) { return {KernelKind::GaussianPaper, sigma}; }
    static KernelSpec gaussian_squared(double sigma) { return {KernelKind::GaussianSquared, sigma}; }
};

inline const char* kernel_kind_name(KernelKind kind) {
    switch (kind) {
        case KernelKind::Linear: return "linear";
        case KernelKind::GaussianPaper: return "gaussian-paper";
        case KernelKind::GaussianSquared: return "gaussian-squared";
    }
    return "unknown";
}

inline KernelKind parse_kernel_kind(const std::string& name) {
    if (name == "linear") return KernelKind::Linear;
    if (name == "gaussian-paper") return KernelKind::GaussianPaper;
    if (name == "gaussian-squared") return KernelKind::GaussianSquared;
    throw std::invalid_argument("unknown kernel kind: " + name);
}

inline void validate_kernel(const KernelSpec& spec) {
    if (spec.kind != KernelKind::Linear)
        require(spec.sigma > 0.0, "kernel: sigma must be positive");
}

inline double kernel_value(const KernelSpec& spec,
                           const Eigen::Ref<const Vector>& x,
                           const Eigen::Ref<const Vector>& y) {
    require(x.size() == y.size(), "kernel_value: dimension mismatch");
    validate_kernel(spec);
    switch (spec.kind) {
        case KernelKind::Linear:
            return x.dot(y);
        case KernelKind::GaussianPaper:
            return std::exp(-std::sqrt((x - y).squaredNorm()) / (2.0 * spec.sigma * spec.sigma));
        case KernelKind::GaussianSquared:
            return std::exp(-(x - y).squaredNorm() / (2.0 * spec.sigma * spec.sigma));
    }
    throw std::logic_error("kernel_value: unreachable");
}

/// Entry (i,j) is kernel_value(spec, X_i, Y_j) + 1. For the linear kind this
/// reproduces [X,1][Y,1]^T entrywise.
inline Matrix augmented_gram(const KernelSpec& spec,
                             const Eigen::Ref<const Matrix>& X,
                             const Eigen::Ref<const Matrix>& Y) {
    require(X.cols() == Y.cols(), "augmented_gram: feature dimension mismatch");
    validate_kernel(spec);
    const Index n = X.rows(), p = Y.rows();
    Matrix K(n, p);
    const double denom = 2.0 * spec.sigma * spec.sigma;
    for (Index j = 0; j < p; ++j) {
        for (Index i = 0; i < n; ++i) {
            switch (spec.kind) {
                case KernelKind::Linear:
                    K(i, j) = X.row(i).dot(Y.row(j)) + 1.0;
                    break;
                case KernelKind::GaussianPaper:
                    K(i, j) = std::exp(-std::sqrt((X.row(i) - Y.row(j)).squaredNorm()) / denom) + 1.0;
                    break;
                case KernelKind::GaussianSquared:
                    K(i, j) = std::exp(-(X.row(i) - Y.row(j)).squaredNorm() / denom) + 1.0;
                    break;
            }
        }
    }
    return K;
}

}  // namespace mvtpm

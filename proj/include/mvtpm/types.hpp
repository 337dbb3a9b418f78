#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace mvtpm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Raised for malformed files, manifests and datasets (as opposed to
/// programming errors, which use std::invalid_argument).
struct DataError : std::runtime_error {
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool condition, const std::string& message) {
    if (!condition) throw std::invalid_argument(message);
}

}  // namespace mvtpm

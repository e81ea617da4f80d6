#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace ktrees {

/// Row-major 32-bit feature matrix; rows are tokens or examples.
using Matrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Binary labels, one byte per example (0 or 1).
using Labels = std::vector<std::uint8_t>;

enum class Split { Train, Test };

inline const char* to_string(Split s) { return s == Split::Train ? "train" : "test"; }

}  // namespace ktrees

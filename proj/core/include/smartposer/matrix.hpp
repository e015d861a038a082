#pragma once

#include <Eigen/Core>

namespace smartposer {

// Row-major dense matrix; rows are time steps for sequence data.
template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;
template <typename T>
using ColVector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using MatrixD = Matrix<double>;
using MatrixF = Matrix<float>;

}  // namespace smartposer

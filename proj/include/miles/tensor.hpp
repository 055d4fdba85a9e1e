#ifndef MILES_TENSOR_HPP
#define MILES_TENSOR_HPP

#include <string>

#include <Eigen/Core>

namespace miles {

using real = double;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

/// Dense row-major 2-D array. Batches are rows; bias vectors are 1 x d.
using Tensor = MatrixX<real>;

template <typename Derived>
std::string shape_string(const Eigen::DenseBase<Derived>& m) {
  return "[" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + "]";
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.derived().array().isFinite().all();
}

}  // namespace miles

#endif  // MILES_TENSOR_HPP

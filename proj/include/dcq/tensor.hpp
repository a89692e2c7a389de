#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <sstream>
#include <string>

#include "dcq/errors.hpp"

namespace dcq {

/// Dense row-major matrix, the value type of every numeric operation.
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Tensor = Matrix<double>;
using Index = Eigen::Index;

template <typename Derived>
std::string shape_string(const Eigen::DenseBase<Derived>& m) {
  std::ostringstream os;
  os << '[' << m.rows() << 'x' << m.cols() << ']';
  return os.str();
}

template <typename A, typename B>
void require_same_shape(const Eigen::DenseBase<A>& a, const Eigen::DenseBase<B>& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_string(a) + " vs " + shape_string(b));
  }
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.derived().array().isFinite().all();
}

/// Divides each row by max(norm, eps). Zero rows stay zero.
template <typename Derived>
Matrix<typename Derived::Scalar> l2_normalize_rows(const Eigen::MatrixBase<Derived>& x,
                                                   typename Derived::Scalar eps = 1e-12) {
  using Scalar = typename Derived::Scalar;
  Matrix<Scalar> out(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const Scalar n = std::max(x.row(r).norm(), eps);
    out.row(r) = x.row(r) / n;
  }
  return out;
}

/// Elementwise PReLU: x for x >= 0, slope * x otherwise.
template <typename Derived>
Matrix<typename Derived::Scalar> prelu(const Eigen::MatrixBase<Derived>& x, typename Derived::Scalar slope) {
  using Scalar = typename Derived::Scalar;
  return x.unaryExpr([slope](Scalar v) { return v >= Scalar(0) ? v : slope * v; });
}

}  // namespace dcq

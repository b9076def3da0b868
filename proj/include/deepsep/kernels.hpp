#pragma once

#include "deepsep/types.hpp"

// Fixed-order dense kernels. Both the classical recursions and the tape
// evaluate their products through these, so the two paths produce
// identical floating-point results. All matrices here are tiny (<= 10x10).
namespace deepsep::kernels {

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (Eigen::Index j = 0; j < b.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      double acc = 0.0;
      for (Eigen::Index k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
      out(i, j) = acc;
    }
  }
  return out;
}

// Sum of elementwise products, column-major order.
inline double dot(const Matrix& a, const Matrix& b) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) acc += a.data()[i] * b.data()[i];
  return acc;
}

// a b^T for column vectors a, b.
inline Matrix outer(const Matrix& a, const Matrix& b) {
  Matrix out(a.size(), b.size());
  for (Eigen::Index j = 0; j < b.size(); ++j)
    for (Eigen::Index i = 0; i < a.size(); ++i) out(i, j) = a.data()[i] * b.data()[j];
  return out;
}

}  // namespace deepsep::kernels

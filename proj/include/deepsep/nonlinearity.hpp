#pragma once

#include <cmath>
#include <string>

#include "deepsep/types.hpp"

namespace deepsep {

// Elementwise odd nonlinearity used by the classical algorithms.
struct Nonlinearity {
  enum class Kind { Linear, Cubic, Tanh };

  Kind kind = Kind::Linear;
  double scale = 1.0;  // Tanh only: g(s) = tanh(scale * s)

  static Nonlinearity linear() { return {Kind::Linear, 1.0}; }
  static Nonlinearity cubic() { return {Kind::Cubic, 1.0}; }
  static Nonlinearity tanh(double scale = 1.0) { return {Kind::Tanh, scale}; }

  double operator()(double s) const {
    switch (kind) {
      case Kind::Linear:
        return s;
      case Kind::Cubic:
        return s * s * s;
      case Kind::Tanh:
        return std::tanh(scale * s);
    }
    return s;
  }

  Matrix apply(const Matrix& v) const {
    if (kind == Kind::Linear) return v;
    Matrix out(v.rows(), v.cols());
    for (Eigen::Index i = 0; i < v.size(); ++i) out.data()[i] = (*this)(v.data()[i]);
    return out;
  }
};

std::string to_string(const Nonlinearity& g);
Nonlinearity nonlinearity_from_string(const std::string& name, double scale = 1.0);

}  // namespace deepsep

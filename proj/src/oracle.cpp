#include "deepsep/oracle.hpp"

#include <Eigen/LU>
#include <Eigen/QR>
#include <cmath>

#include "deepsep/error.hpp"

namespace deepsep::oracle {

Matrix direct_gain(const Matrix& Y, double beta, const Matrix& G0) {
  if (G0.rows() != G0.cols() || G0.rows() != Y.rows())
    throw DimensionError("gain and output dimensions differ");
  const Eigen::Index t = Y.cols();
  if (t == 0) return G0;
  Eigen::FullPivLU<Matrix> g0(G0);
  if (!g0.isInvertible()) throw SingularError("initial gain is singular");
  Matrix C = std::pow(beta, static_cast<double>(t)) * g0.inverse();
  for (Eigen::Index i = 0; i < t; ++i) {
    const double w = std::pow(beta, static_cast<double>(t - 1 - i));
    C += w * Y.col(i) * Y.col(i).transpose();
  }
  Eigen::FullPivLU<Matrix> lu(C);
  if (!lu.isInvertible()) throw SingularError("accumulated correlation is singular");
  return lu.solve(Matrix::Identity(C.rows(), C.cols()));
}

std::vector<double> fd_gradient(const std::function<double(std::span<const double>)>& f,
                                std::span<const double> point, const FiniteDiffSpec& spec) {
  if (!(spec.h > 0.0)) throw ConfigError("finite-difference step must be positive");
  std::vector<double> p(point.begin(), point.end());
  std::vector<double> grad(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double orig = p[i];
    p[i] = orig + spec.h;
    const double up = f(p);
    p[i] = orig - spec.h;
    const double down = f(p);
    p[i] = orig;
    if (!std::isfinite(up) || !std::isfinite(down))
      throw NumericalError("non-finite value in finite differences", i);
    grad[i] = (up - down) / (2.0 * spec.h);
  }
  return grad;
}

double fd_divergence(const std::function<Vector(const Vector&)>& f, const Vector& x,
                     const FiniteDiffSpec& spec) {
  if (!(spec.h > 0.0)) throw ConfigError("finite-difference step must be positive");
  Vector p = x;
  double div = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    p(i) = x(i) + spec.h;
    const Vector up = f(p);
    p(i) = x(i) - spec.h;
    const Vector down = f(p);
    p(i) = x(i);
    if (up.size() != x.size() || down.size() != x.size())
      throw DimensionError("divergence needs a map from R^d to R^d");
    if (!std::isfinite(up(i)) || !std::isfinite(down(i)))
      throw NumericalError("non-finite value in finite differences", static_cast<std::size_t>(i));
    div += (up(i) - down(i)) / (2.0 * spec.h);
  }
  return div;
}

Matrix batch_least_squares(const Matrix& X, const Matrix& Y, double beta) {
  if (X.cols() != Y.cols()) throw DimensionError("X and Y lengths differ");
  if (!(beta > 0.0)) throw ConfigError("beta must be positive");
  const Eigen::Index T = X.cols();
  // Rows: sqrt(w_t) y(t)^T, right-hand side sqrt(w_t) x(t)^T.
  Matrix lhs(T, Y.rows());
  Matrix rhs(T, X.rows());
  for (Eigen::Index t = 0; t < T; ++t) {
    const double w = std::sqrt(std::pow(beta, static_cast<double>(T - 1 - t)));
    lhs.row(t) = w * Y.col(t).transpose();
    rhs.row(t) = w * X.col(t).transpose();
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(lhs);
  if (qr.rank() < Y.rows()) throw SingularError("output history is rank deficient");
  return qr.solve(rhs).transpose();
}

double straight_mse_sum(const Matrix& y, const Matrix& s) {
  if (y.rows() != s.rows() || y.cols() != s.cols()) throw DimensionError("shape mismatch");
  double total = 0.0;
  for (Eigen::Index t = 0; t < y.cols(); ++t)
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      const double d = s(i, t) - y(i, t);
      total += d * d;
    }
  return total;
}

double straight_penalty(std::span<const double> omegas, double lambda_reg) {
  double total = 0.0;
  for (double w : omegas) {
    if (w < 0.0) total += lambda_reg * -w;
    if (w > 1.0) total += lambda_reg * (w - 1.0);
  }
  return total;
}

Matrix gram_schmidt_projector(const Matrix& A) {
  Matrix Q(A.rows(), 0);
  for (Eigen::Index j = 0; j < A.cols(); ++j) {
    Vector v = A.col(j);
    for (int pass = 0; pass < 2; ++pass)
      for (Eigen::Index k = 0; k < Q.cols(); ++k) v -= Q.col(k).dot(v) * Q.col(k);
    const double n = v.norm();
    if (n <= 1e-12 * A.col(j).norm()) throw SingularError("columns are linearly dependent");
    Q.conservativeResize(Eigen::NoChange, Q.cols() + 1);
    Q.col(Q.cols() - 1) = v / n;
  }
  return Q * Q.transpose();
}

}  // namespace deepsep::oracle

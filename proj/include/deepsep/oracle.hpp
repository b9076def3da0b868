#pragma once

#include <functional>
#include <span>
#include <vector>

#include "deepsep/types.hpp"

// Brute-force references for checking the recursive and differentiated
// code paths. Nothing here calls into the baseline, unrolled or autograd
// code.
namespace deepsep::oracle {

enum class FiniteDiffScheme { Central };

struct FiniteDiffSpec {
  double h = 1e-5;
  FiniteDiffScheme scheme = FiniteDiffScheme::Central;

  static FiniteDiffSpec gradient() { return {1e-5, FiniteDiffScheme::Central}; }
  static FiniteDiffSpec divergence() { return {1e-6, FiniteDiffScheme::Central}; }
};

// Inverse of beta^t G0^-1 + sum_i beta^(t-i) y(i) y(i)^T, built directly
// and inverted with a dense solve. Columns of Y are y(1)..y(t).
Matrix direct_gain(const Matrix& Y, double beta, const Matrix& G0);

// Central-difference gradient of f at `point`.
std::vector<double> fd_gradient(const std::function<double(std::span<const double>)>& f,
                                std::span<const double> point,
                                const FiniteDiffSpec& spec = FiniteDiffSpec::gradient());

// sum_i d f_i / d x_i by central differences.
double fd_divergence(const std::function<Vector(const Vector&)>& f, const Vector& x,
                     const FiniteDiffSpec& spec = FiniteDiffSpec::divergence());

// argmin_W sum_t beta^(T-t) ||x(t) - W y(t)||^2, solved
// by QR on the weighted stacked system. X is l x T, Y is m x T; returns
// W (l x m).
Matrix batch_least_squares(const Matrix& X, const Matrix& Y, double beta);

// Straight-line evaluators.
double straight_mse_sum(const Matrix& y, const Matrix& s);
double straight_penalty(std::span<const double> omegas, double lambda_reg);

// Projector onto range(A) from a Gram-Schmidt basis of its columns.
Matrix gram_schmidt_projector(const Matrix& A);

}  // namespace deepsep::oracle

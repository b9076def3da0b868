#pragma once

#include <span>
#include <string>
#include <vector>

#include "deepsep/autograd.hpp"
#include "deepsep/types.hpp"

namespace deepsep {

enum class LossKind { Mse, RegularizedMse, Sure };

struct LossConfig {
  LossKind kind = LossKind::Mse;
  double lambda_reg = 0.0;  // penalty weight of the regularized loss

  void validate() const;
};

std::string to_string(LossKind k);
LossKind loss_kind_from_string(const std::string& name);

// Sum over t of ||s(t) - y(t)||^2.
ad::Var mse_loss(std::span<const ad::Var> y, const Matrix& S);

// mse_loss + lambda_reg * sum_k [ReLU(-omega_k) + ReLU(omega_k - 1)].
// `omegas` lists the forgetting factor of every layer (a shared factor
// appears once per layer).
ad::Var regularized_loss(std::span<const ad::Var> y, const Matrix& S,
                         std::span<const ad::Var> omegas, double lambda_reg);

// Penalty part on its own.
ad::Var omega_penalty(std::span<const ad::Var> omegas, double lambda_reg);

// How the divergence of y = W^T x is charged.
enum class DivergenceRule {
  // tr(A_pinv W): the Stein term for the source-space risk ||s - y||^2.
  Generalized,
  // Tr(W); needs l = m and only matches the risk when A = I.
  PlainTrace,
};

std::string to_string(DivergenceRule r);
DivergenceRule divergence_rule_from_string(const std::string& name);

struct SureContext {
  Matrix A;                  // l x m
  Matrix P;                  // l x l projector onto range(A)
  Matrix source_projector;   // m x m, A_pinv A (= I_m at full column rank)
  Matrix A_pinv;             // m x l
  double noise_var = 0.0;
  DivergenceRule rule = DivergenceRule::Generalized;

  int l() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(A.cols()); }
};

// Throws SingularError when A is rank deficient (smallest singular value
// <= 1e-10 * largest), ConfigError for a negative noise variance.
SureContext sure_context(const Matrix& A, double noise_var,
                         DivergenceRule rule = DivergenceRule::Generalized);

// Tr(W) for square W.
ad::Var divergence_linear(const ad::Var& W);

// Divergence of x -> W^T x under the context's rule.
ad::Var sure_divergence(const ad::Var& W, const SureContext& ctx);

// Sum over t of
//   ||P_src y(t)||^2 + 2 sigma^2 div(W(t)) - 2 y(t)^T A_pinv x(t),
// where W(t) is the matrix y(t) was read through. Up to the
// parameter-free ||s||^2 this estimates sum_t ||s(t) - y(t)||^2 without
// the sources.
ad::Var sure_loss(std::span<const ad::Var> y, const Matrix& X, std::span<const ad::Var> W,
                  const SureContext& ctx);

// Single-sample value of the same expression, off the tape.
double sure_value(const Vector& y, const Vector& x, const Matrix& W, const SureContext& ctx);

}  // namespace deepsep

#include "deepsep/loss.hpp"

#include <Eigen/SVD>
#include <cmath>

#include "deepsep/error.hpp"
#include "deepsep/kernels.hpp"

namespace deepsep {

void LossConfig::validate() const {
  if (!(lambda_reg >= 0.0)) throw ConfigError("lambda_reg must be non-negative");
}

std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::Mse: return "mse";
    case LossKind::RegularizedMse: return "regularized_mse";
    case LossKind::Sure: return "sure";
  }
  return "?";
}

LossKind loss_kind_from_string(const std::string& name) {
  if (name == "mse") return LossKind::Mse;
  if (name == "regularized_mse") return LossKind::RegularizedMse;
  if (name == "sure") return LossKind::Sure;
  throw ConfigError("unknown loss '" + name + "'");
}

std::string to_string(DivergenceRule r) {
  return r == DivergenceRule::Generalized ? "generalized" : "plain_trace";
}

DivergenceRule divergence_rule_from_string(const std::string& name) {
  if (name == "generalized") return DivergenceRule::Generalized;
  if (name == "plain_trace") return DivergenceRule::PlainTrace;
  throw ConfigError("unknown divergence rule '" + name + "'");
}

namespace {

ad::Tape* tape_of(std::span<const ad::Var> vars) {
  if (vars.empty()) throw DimensionError("loss needs at least one time step");
  if (!vars.front().valid()) throw DimensionError("loss input is not on a tape");
  return vars.front().tape();
}

void check_sequence(std::span<const ad::Var> y, const Matrix& ref, const char* what) {
  if (static_cast<Eigen::Index>(y.size()) != ref.cols())
    throw DimensionError(std::string(what) + " length does not match the output sequence");
  for (const auto& v : y)
    if (v.rows() != ref.rows() || v.cols() != 1)
      throw DimensionError(std::string(what) + " rows do not match the outputs");
}

}  // namespace

ad::Var mse_loss(std::span<const ad::Var> y, const Matrix& S) {
  ad::Tape* tape = tape_of(y);
  check_sequence(y, S, "source sequence");
  ad::Var total;
  for (std::size_t t = 0; t < y.size(); ++t) {
    const ad::Var s = tape->constant(Matrix(S.col(static_cast<Eigen::Index>(t))));
    const ad::Var term = ad::squared_norm(s - y[t]);
    total = total.valid() ? total + term : term;
  }
  return total;
}

ad::Var omega_penalty(std::span<const ad::Var> omegas, double lambda_reg) {
  if (!(lambda_reg >= 0.0)) throw ConfigError("lambda_reg must be non-negative");
  ad::Tape* tape = tape_of(omegas);
  const ad::Var one = tape->constant(1.0);
  ad::Var below;
  ad::Var above;
  for (const auto& w : omegas) {
    if (w.rows() != 1 || w.cols() != 1) throw DimensionError("forgetting factors must be scalars");
    const ad::Var lo = ad::relu(-w);
    const ad::Var hi = ad::relu(w - one);
    below = below.valid() ? below + lo : lo;
    above = above.valid() ? above + hi : hi;
  }
  return ad::scale(below, lambda_reg) + ad::scale(above, lambda_reg);
}

ad::Var regularized_loss(std::span<const ad::Var> y, const Matrix& S,
                         std::span<const ad::Var> omegas, double lambda_reg) {
  const ad::Var data = mse_loss(y, S);
  if (omegas.empty()) return data;
  return data + omega_penalty(omegas, lambda_reg);
}

SureContext sure_context(const Matrix& A, double noise_var, DivergenceRule rule) {
  if (A.rows() < 1 || A.cols() < 1) throw DimensionError("mixing matrix is empty");
  if (A.cols() > A.rows()) throw DimensionError("mixing matrix must have l >= m");
  if (!(noise_var >= 0.0)) throw ConfigError("noise variance must be non-negative");
  if (!A.allFinite()) throw ConfigError("mixing matrix has non-finite entries");
  Eigen::JacobiSVD<Matrix> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double largest = sv(0);
  const double smallest = sv(sv.size() - 1);
  if (!(largest > 0.0) || !(smallest > 1e-10 * largest))
    throw SingularError("mixing matrix is rank deficient");

  SureContext ctx;
  ctx.A = A;
  ctx.noise_var = noise_var;
  ctx.rule = rule;
  const Matrix& U = svd.matrixU();
  ctx.P = U * U.transpose();
  ctx.A_pinv = svd.matrixV() * sv.cwiseInverse().asDiagonal() * U.transpose();
  ctx.source_projector = ctx.A_pinv * A;
  return ctx;
}

ad::Var divergence_linear(const ad::Var& W) {
  if (W.rows() != W.cols())
    throw DimensionError("the trace divergence needs a square separating matrix");
  return ad::trace(W);
}

ad::Var sure_divergence(const ad::Var& W, const SureContext& ctx) {
  if (W.rows() != ctx.l() || W.cols() != ctx.m())
    throw DimensionError("separating matrix does not match the mixing matrix");
  if (ctx.rule == DivergenceRule::PlainTrace) {
    if (ctx.l() != ctx.m())
      throw DimensionError("plain-trace divergence is only defined for l = m");
    return divergence_linear(W);
  }
  const ad::Var pinv = W.tape()->constant(ctx.A_pinv);
  return ad::trace(ad::matmul(pinv, W));
}

ad::Var sure_loss(std::span<const ad::Var> y, const Matrix& X, std::span<const ad::Var> W,
                  const SureContext& ctx) {
  ad::Tape* tape = tape_of(y);
  if (X.rows() != ctx.l()) throw DimensionError("observations do not match the mixing matrix");
  if (static_cast<Eigen::Index>(y.size()) != X.cols() || W.size() != y.size())
    throw DimensionError("SURE inputs have inconsistent lengths");
  const ad::Var proj = tape->constant(ctx.source_projector);
  const double two_var = 2.0 * ctx.noise_var;
  ad::Var total;
  for (std::size_t t = 0; t < y.size(); ++t) {
    if (y[t].rows() != ctx.m() || y[t].cols() != 1)
      throw DimensionError("output size does not match the mixing matrix");
    const Matrix back = kernels::matmul(ctx.A_pinv, X.col(static_cast<Eigen::Index>(t)));
    const ad::Var target = tape->constant(back);
    ad::Var term = ad::squared_norm(ad::matmul(proj, y[t]));
    term = term + ad::scale(sure_divergence(W[t], ctx), two_var);
    term = term - ad::scale(ad::dot(y[t], target), 2.0);
    total = total.valid() ? total + term : term;
  }
  return total;
}

double sure_value(const Vector& y, const Vector& x, const Matrix& W, const SureContext& ctx) {
  if (y.size() != ctx.m() || x.size() != ctx.l() || W.rows() != ctx.l() || W.cols() != ctx.m())
    throw DimensionError("SURE inputs do not match the mixing matrix");
  double div = 0.0;
  if (ctx.rule == DivergenceRule::PlainTrace) {
    if (ctx.l() != ctx.m()) throw DimensionError("plain-trace divergence needs l = m");
    div = W.trace();
  } else {
    div = (ctx.A_pinv * W).trace();
  }
  const Vector py = ctx.source_projector * y;
  return py.squaredNorm() + 2.0 * ctx.noise_var * div - 2.0 * y.dot(ctx.A_pinv * x);
}

}  // namespace deepsep

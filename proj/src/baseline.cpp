#include "deepsep/baseline.hpp"

#include <algorithm>

#include "deepsep/error.hpp"
#include "deepsep/eval.hpp"
#include "deepsep/kernels.hpp"

namespace deepsep {

namespace {

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace

std::string to_string(const Nonlinearity& g) {
  switch (g.kind) {
    case Nonlinearity::Kind::Linear:
      return "linear";
    case Nonlinearity::Kind::Cubic:
      return "cubic";
    case Nonlinearity::Kind::Tanh:
      return "tanh";
  }
  return "unknown";
}

Nonlinearity nonlinearity_from_string(const std::string& name, double scale) {
  if (name == "linear") return Nonlinearity::linear();
  if (name == "cubic") return Nonlinearity::cubic();
  if (name == "tanh") {
    if (!(scale > 0.0)) throw ConfigError("tanh scale must be positive");
    return Nonlinearity::tanh(scale);
  }
  throw ConfigError("unknown nonlinearity '" + name + "'");
}

Matrix InitSpec::initial_w(int l, int m) const {
  return Matrix::Identity(l, l).leftCols(m);
}

Matrix InitSpec::initial_g(int m) const {
  if (!(delta > 0.0)) throw ConfigError("init delta must be positive");
  return Matrix::Identity(m, m) / delta;
}

SeparatorState SeparatorState::initial(int l, int m, const InitSpec& init) {
  return {init.initial_w(l, m), init.initial_g(m)};
}

double EasiConfig::step_at(std::size_t t) const {
  if (schedule.empty()) return step_size;
  return schedule[std::min(t, schedule.size() - 1)];
}

RlsStepResult rls_step(const SeparatorState& state, const Vector& x, const RlsConfig& cfg,
                       std::size_t step_index) {
  if (!(cfg.beta > 0.0 && cfg.beta <= 1.0))
    throw ConfigError("forgetting factor must lie in (0, 1]");
  if (state.W.rows() != x.size() || state.G.rows() != state.W.cols() ||
      state.G.cols() != state.W.cols())
    throw DimensionError("RLS state does not match the observation size");

  // The operation order here is mirrored by the unrolled Deep RLS layer so
  // the two agree bit for bit; keep them in sync.
  const Matrix xm = x;
  const Matrix v = kernels::matmul(state.W.transpose(), xm);
  const Matrix y = cfg.nonlinearity.apply(v);
  const Matrix h = kernels::matmul(state.G, y);
  const double denom = cfg.beta + kernels::dot(y, h);
  const Matrix f = h / denom;
  RlsStepResult out;
  out.state.G = (state.G - kernels::outer(f, h)) / cfg.beta;
  const Matrix e = xm - kernels::matmul(state.W, y);
  out.state.W = state.W + kernels::outer(e, f);
  out.y = y;
  out.e = e;

  if (!all_finite(out.state.W) || !all_finite(out.state.G) || !out.y.allFinite())
    throw NumericalError("RLS step produced a non-finite value", step_index);
  return out;
}

RunRecord rls_run(const MixtureInstance& instance, const RlsConfig& cfg,
                  SeparatorState& final_state) {
  SeparatorState state = SeparatorState::initial(instance.l(), instance.m(), cfg.init);
  RunRecord rec;
  rec.algorithm = "rls";
  rec.y.resize(instance.m(), instance.T());
  for (int t = 0; t < instance.T(); ++t) {
    auto step = rls_step(state, instance.X.col(t), cfg, static_cast<std::size_t>(t));
    rec.y.col(t) = step.y;
    state = std::move(step.state);
  }
  final_state = std::move(state);
  attach_errors(rec, instance.S);
  return rec;
}

RunRecord rls_run(const MixtureInstance& instance, const RlsConfig& cfg) {
  SeparatorState unused;
  return rls_run(instance, cfg, unused);
}

OracleStats OracleStats::zero(int l, int m) {
  return {Matrix::Zero(m, m), Matrix::Zero(l, m)};
}

OracleStats OracleStats::from_initial(const Matrix& W0, const Matrix& G0) {
  const Matrix C0 = G0.inverse();
  return {C0, W0 * C0};
}

void OracleStats::accumulate(const Vector& x, const Vector& y, double beta) {
  C_y = beta * C_y + y * y.transpose();
  C_xy = beta * C_xy + x * y.transpose();
}

Matrix closed_form_w(const OracleStats& stats) {
  const Eigen::Index m = stats.C_y.rows();
  if (stats.C_y.cols() != m || stats.C_xy.cols() != m)
    throw DimensionError("statistics have inconsistent shapes");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(stats.C_y, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().cwiseAbs().minCoeff();
  const double hi = eig.eigenvalues().cwiseAbs().maxCoeff();
  if (!(hi > 0.0) || !(lo > 0.0) || hi / lo > 1e12)
    throw SingularError("autocorrelation statistics are singular (condition > 1e12)");
  // W C_y = C_xy, with C_y symmetric.
  return stats.C_y.ldlt().solve(stats.C_xy.transpose()).transpose();
}

Matrix easi_h(const Vector& y, const Nonlinearity& g) {
  const Matrix gy = g.apply(y);
  const Eigen::Index m = y.size();
  return kernels::outer(y, y) - Matrix::Identity(m, m) + kernels::outer(gy, y) -
         kernels::outer(y, gy);
}

Matrix easi_step(const Matrix& W, const Vector& y, double step_size, const Nonlinearity& g,
                 std::size_t step_index) {
  if (!(step_size >= 0.0)) throw ConfigError("EASI step size must be non-negative");
  if (W.cols() != y.size()) throw DimensionError("EASI output size does not match W");
  const Matrix H = easi_h(y, g);
  const Matrix update = kernels::matmul(W, H.transpose());
  Matrix next = W - step_size * update;
  if (!all_finite(next)) throw NumericalError("EASI step produced a non-finite value", step_index);
  return next;
}

RunRecord easi_run(const MixtureInstance& instance, const EasiConfig& cfg, Matrix& final_w) {
  if (cfg.nonlinearity.kind == Nonlinearity::Kind::Linear)
    throw ConfigError("EASI needs a cubic or tanh nonlinearity");
  Matrix W = cfg.init.initial_w(instance.l(), instance.m());
  RunRecord rec;
  rec.algorithm = "easi";
  rec.y.resize(instance.m(), instance.T());
  for (int t = 0; t < instance.T(); ++t) {
    const Vector y = kernels::matmul(W.transpose(), instance.X.col(t));
    rec.y.col(t) = y;
    W = easi_step(W, y, cfg.step_at(static_cast<std::size_t>(t)), cfg.nonlinearity,
                  static_cast<std::size_t>(t));
  }
  final_w = std::move(W);
  attach_errors(rec, instance.S);
  return rec;
}

RunRecord easi_run(const MixtureInstance& instance, const EasiConfig& cfg) {
  Matrix unused;
  return easi_run(instance, cfg, unused);
}

}  // namespace deepsep

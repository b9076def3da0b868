#pragma once

#include <cstddef>
#include <vector>

#include "deepsep/model.hpp"
#include "deepsep/nonlinearity.hpp"
#include "deepsep/run_record.hpp"
#include "deepsep/types.hpp"

namespace deepsep {

// Starting point shared by the classical and unrolled recursions:
// W(0) is the first m columns of the l x l identity, G(0) = I / delta.
struct InitSpec {
  double delta = 0.01;

  Matrix initial_w(int l, int m) const;
  Matrix initial_g(int m) const;
};

// W (l x m) is the separating matrix, y = W^T x. G (m x m) tracks the
// inverse of the weighted output autocorrelation.
struct SeparatorState {
  Matrix W;
  Matrix G;

  static SeparatorState initial(int l, int m, const InitSpec& init);
};

struct RlsConfig {
  double beta = 0.99;
  Nonlinearity nonlinearity = Nonlinearity::tanh();
  InitSpec init;
};

struct EasiConfig {
  double step_size = 0.01;
  // Optional per-step table; step t uses schedule[min(t, size - 1)].
  std::vector<double> schedule;
  Nonlinearity nonlinearity = Nonlinearity::cubic();
  InitSpec init;

  double step_at(std::size_t t) const;
};

struct RlsStepResult {
  SeparatorState state;
  Vector y;
  Vector e;
};

// One iteration of RLS for (nonlinear) PCA:
//   y = g(W^T x); h = G y; f = h / (beta + y^T h);
//   G <- (G - f h^T) / beta; e = x - W y; W <- W + e f^T.
RlsStepResult rls_step(const SeparatorState& state, const Vector& x, const RlsConfig& cfg,
                       std::size_t step_index = 0);

RunRecord rls_run(const MixtureInstance& instance, const RlsConfig& cfg);

// Same as rls_run but also hands back the final state.
RunRecord rls_run(const MixtureInstance& instance, const RlsConfig& cfg,
                  SeparatorState& final_state);

// Weighted correlation statistics accumulated directly, for checking the
// recursive algorithm.
struct OracleStats {
  Matrix C_y;   // m x m
  Matrix C_xy;  // l x m

  static OracleStats zero(int l, int m);
  // Prior term equivalent to the RLS starting point: C_y = G0^-1, C_xy = W0 G0^-1.
  static OracleStats from_initial(const Matrix& W0, const Matrix& G0);

  void accumulate(const Vector& x, const Vector& y, double beta);
};

// Least-squares separating matrix W = C_xy C_y^-1 (l x m), so that y = W^T x.
Matrix closed_form_w(const OracleStats& stats);

// H(y) = y y^T - I + g(y) y^T - y g(y)^T.
Matrix easi_h(const Vector& y, const Nonlinearity& g);

// W <- W - lambda W H(y)^T. This is the serial relative-gradient update
// written for y = W^T x (the transposed form of B <- B - lambda H B).
Matrix easi_step(const Matrix& W, const Vector& y, double step_size, const Nonlinearity& g,
                 std::size_t step_index = 0);

RunRecord easi_run(const MixtureInstance& instance, const EasiConfig& cfg);
RunRecord easi_run(const MixtureInstance& instance, const EasiConfig& cfg, Matrix& final_w);

}  // namespace deepsep

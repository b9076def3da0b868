// Acceptance checks. Prints one PASS/FAIL line per criterion, writes the
// numbers behind each verdict as CSV under $ACCEPTANCE_OUT (default
// ./acceptance_out), and reruns criteria 1-9 to compare digests.
//
// The exit status reports whether the suite ran to completion; individual
// verdicts are in the printed lines.

#include <Eigen/Eigenvalues>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "deepsep/baseline.hpp"
#include "deepsep/csv.hpp"
#include "deepsep/eval.hpp"
#include "deepsep/loss.hpp"
#include "deepsep/model.hpp"
#include "deepsep/oracle.hpp"
#include "deepsep/rng.hpp"
#include "deepsep/train.hpp"
#include "deepsep/unrolled.hpp"

using namespace deepsep;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
  CsvTable data;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int prec = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

Matrix random_matrix(Rng& rng, int r, int c) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

MixtureInstance mixture(int m, int l, int T, std::uint64_t seed, double noise) {
  GeneratorConfig g;
  g.m = m;
  g.l = l;
  g.T = T;
  g.noise_var = noise;
  g.seed = seed;
  return generate(g);
}

// ---------------------------------------------------------------------------
// 1. Gain recursion vs direct inverse

Outcome criterion1() {
  const auto t0 = Clock::now();
  Outcome out;
  out.data.header = {"run", "rel_err"};
  double worst = 0.0;
  for (int run = 0; run < 20; ++run) {
    const auto inst = mixture(3, 3, 200, mix_seed(101, 0, static_cast<std::uint64_t>(run)), 1e-3);
    RlsConfig cfg;
    cfg.beta = 0.99;
    SeparatorState fin;
    const RunRecord rec = rls_run(inst, cfg, fin);
    const Matrix direct = oracle::direct_gain(rec.y, cfg.beta, cfg.init.initial_g(3));
    const double rel = (fin.G - direct).norm() / direct.norm();
    worst = std::max(worst, rel);
    out.data.rows.push_back({static_cast<double>(run), rel});
  }
  const double secs = seconds_since(t0);
  out.pass = worst <= 1e-8 && secs < 5.0;
  out.detail = "max rel err " + fmt(worst) + " over 20 runs (<= 1e-8), " + fmt(secs) + " s (< 5 s)";
  return out;
}

// ---------------------------------------------------------------------------
// 2. Unrolled networks reduce to the classical algorithms

Outcome criterion2() {
  Outcome out;
  out.data.header = {"seed", "rls_equal", "rls_unshared_equal", "easi_equal"};
  bool all = true;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto inst = mixture(3, 3, 300, mix_seed(202, 0, seed), 1e-3);

    RlsConfig rcfg;
    rcfg.nonlinearity = Nonlinearity::linear();
    const RunRecord rls = rls_run(inst, rcfg);
    DeepRlsParams drls;
    drls.depth = inst.T();
    drls.omegas = {rcfg.beta};
    drls.mlps = {identity_mlp(3)};
    const bool rls_eq = deep_rls_outputs(drls, inst.X, rcfg.init) == rls.y;
    DeepRlsParams unshared = drls;
    unshared.shared = false;
    unshared.omegas.assign(static_cast<std::size_t>(inst.T()), rcfg.beta);
    unshared.mlps.assign(static_cast<std::size_t>(inst.T()), identity_mlp(3));
    const bool rls_u_eq = deep_rls_outputs(unshared, inst.X, rcfg.init) == rls.y;

    EasiConfig ecfg;
    ecfg.step_size = 0.01;
    const RunRecord easi = easi_run(inst, ecfg);
    DeepEasiParams deasi;
    deasi.depth = inst.T();
    deasi.sources = 3;
    deasi.nonlinearity = EasiNonlinearity::Cubic;
    deasi.lambdas = {ecfg.step_size};
    const bool easi_eq = deep_easi_outputs(deasi, inst.X, ecfg.init) == easi.y;

    all = all && rls_eq && rls_u_eq && easi_eq;
    out.data.rows.push_back({static_cast<double>(seed), rls_eq ? 1.0 : 0.0, rls_u_eq ? 1.0 : 0.0,
                             easi_eq ? 1.0 : 0.0});
  }
  out.pass = all;
  out.detail = all ? "bitwise identical outputs on 5 instances (Deep RLS shared/unshared, Deep EASI)"
                   : "outputs differ from the classical runs";
  return out;
}

// ---------------------------------------------------------------------------
// 3. BPTT gradients vs central differences

template <class Params>
void gradient_rows(const Params& p, const MixtureInstance& inst, const LossConfig& loss,
                   double case_id, CsvTable& table, int& bad, double& worst) {
  const LossAndGradient lg = loss_and_gradient(p, inst, loss);
  const auto fd = oracle::fd_gradient(
      [&](std::span<const double> x) {
        Params q = p;
        unflatten(q, x);
        return sequence_loss(q, inst, loss);
      },
      flatten(p), oracle::FiniteDiffSpec{1e-5, oracle::FiniteDiffScheme::Central});
  for (std::size_t i = 0; i < fd.size(); ++i) {
    const double diff = std::abs(lg.gradient[i] - fd[i]);
    const bool ok = diff <= 1e-4 * std::abs(fd[i]) || diff <= 1e-7;
    if (!ok) ++bad;
    if (diff > 1e-7) worst = std::max(worst, diff / std::max(std::abs(fd[i]), 1e-300));
    table.rows.push_back({case_id, static_cast<double>(i), lg.gradient[i], fd[i], ok ? 1.0 : 0.0});
  }
}

Outcome criterion3() {
  const auto t0 = Clock::now();
  Outcome out;
  out.data.header = {"case", "param", "bptt", "finite_diff", "ok"};
  int bad = 0;
  double worst = 0.0;
  int checked_cases = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto inst = mixture(2, 2, 5, mix_seed(303, 0, seed), 1e-2);
    for (bool shared : {true, false}) {
      DeepRlsSpec rs;
      rs.m = 2;
      rs.depth = 5;
      rs.shared = shared;
      rs.seed = seed;
      gradient_rows(init_deep_rls(rs), inst, {LossKind::Mse, 0.0}, checked_cases++, out.data, bad,
                    worst);
      DeepEasiSpec es;
      es.m = 2;
      es.depth = 5;
      es.shared = shared;
      es.seed = seed;
      es.lambda_init = 0.05;
      const auto ep = init_deep_easi(es);
      gradient_rows(ep, inst, {LossKind::Mse, 0.0}, checked_cases++, out.data, bad, worst);
      gradient_rows(ep, inst, {LossKind::Sure, 0.0}, checked_cases++, out.data, bad, worst);
    }
  }
  const double secs = seconds_since(t0);
  out.pass = bad == 0 && secs < 30.0;
  out.detail = std::to_string(out.data.rows.size()) + " parameters in " +
               std::to_string(checked_cases) + " cases, " + std::to_string(bad) +
               " outside tolerance (worst rel " + fmt(worst) + "), " + fmt(secs) + " s (< 30 s)";
  return out;
}

// ---------------------------------------------------------------------------
// 4. SURE unbiasedness

double condition_number(const Matrix& A) {
  Eigen::JacobiSVD<Matrix> svd(A);
  const auto& s = svd.singularValues();
  return s(0) / s(s.size() - 1);
}

struct MonteCarlo {
  double mean_sure_plus_norm = 0.0;
  double empirical_risk = 0.0;
  double se = 0.0;
};

MonteCarlo sure_monte_carlo(const Matrix& A, const Matrix& W, const Vector& s, double var,
                            DivergenceRule rule, std::uint64_t seed) {
  const SureContext ctx = sure_context(A, var, rule);
  Rng rng(seed);
  const int n = 10000;
  const double sd = std::sqrt(var);
  const Vector Ps = ctx.source_projector * s;
  double sum_sure = 0.0;
  double sum_risk = 0.0;
  double sum_d = 0.0;
  double sum_d2 = 0.0;
  for (int k = 0; k < n; ++k) {
    Vector noise(A.rows());
    for (Eigen::Index i = 0; i < noise.size(); ++i) noise(i) = sd * rng.normal();
    const Vector x = A * s + noise;
    const Vector y = W.transpose() * x;
    const double sure = sure_value(y, x, W, ctx) + Ps.squaredNorm();
    const double risk = (Ps - ctx.source_projector * y).squaredNorm();
    sum_sure += sure;
    sum_risk += risk;
    sum_d += sure - risk;
    sum_d2 += (sure - risk) * (sure - risk);
  }
  MonteCarlo mc;
  mc.mean_sure_plus_norm = sum_sure / n;
  mc.empirical_risk = sum_risk / n;
  const double mean_d = sum_d / n;
  mc.se = std::sqrt(std::max(sum_d2 / n - mean_d * mean_d, 0.0) / n);
  return mc;
}

Outcome criterion4() {
  const auto t0 = Clock::now();
  Outcome out;
  out.data.header = {"rule", "mean_sure_plus_norm", "empirical_risk", "se", "z"};
  Rng rng(404);
  Matrix A = random_matrix(rng, 3, 3);
  while (condition_number(A) >= 100.0) A = random_matrix(rng, 3, 3);
  const Matrix W = random_matrix(rng, 3, 3);
  Vector s(3);
  for (int i = 0; i < 3; ++i) s(i) = rng.uniform(-0.5, 0.5);

  const auto mc = sure_monte_carlo(A, W, s, 0.01, DivergenceRule::Generalized, 405);
  const double z = std::abs(mc.mean_sure_plus_norm - mc.empirical_risk) / mc.se;
  out.data.rows.push_back({0.0, mc.mean_sure_plus_norm, mc.empirical_risk, mc.se, z});
  // Plain-trace rule, reported for comparison only.
  const auto lit = sure_monte_carlo(A, W, s, 0.01, DivergenceRule::PlainTrace, 405);
  const double zl = std::abs(lit.mean_sure_plus_norm - lit.empirical_risk) / lit.se;
  out.data.rows.push_back({1.0, lit.mean_sure_plus_norm, lit.empirical_risk, lit.se, zl});

  const double secs = seconds_since(t0);
  out.pass = z <= 3.0 && secs < 10.0;
  out.detail = "cond(A) " + fmt(condition_number(A)) + ", |bias| = " + fmt(z) +
               " SE (<= 3); plain Tr(W) divergence gives " + fmt(zl) + " SE; " + fmt(secs) +
               " s (< 10 s)";
  return out;
}

// ---------------------------------------------------------------------------
// 5. Divergence shortcut

Outcome criterion5() {
  Outcome out;
  out.data.header = {"case", "trace", "fd_divergence", "abs_err"};
  Rng rng(505);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const int d = 2 + k % 4;
    const Matrix W = random_matrix(rng, d, d);
    const Vector x = random_matrix(rng, d, 1);
    const double fd = oracle::fd_divergence(
        [&](const Vector& v) -> Vector { return W.transpose() * v; }, x,
        oracle::FiniteDiffSpec{1e-6, oracle::FiniteDiffScheme::Central});
    const double err = std::abs(fd - W.trace());
    worst = std::max(worst, err);
    out.data.rows.push_back({static_cast<double>(k), W.trace(), fd, err});
  }
  out.pass = worst <= 1e-6;
  out.detail = "max |fd - Tr(W)| = " + fmt(worst) + " over 20 matrices (<= 1e-6)";
  return out;
}

// ---------------------------------------------------------------------------
// 6. EASI separates uniform mixtures

double segment_aligned_mse(const Matrix& y, const Matrix& s, int start, int len) {
  return best_alignment(y.middleCols(start, len), s.middleCols(start, len)).aligned_mse;
}

Outcome criterion6() {
  const auto t0 = Clock::now();
  Outcome out;
  out.data.header = {"seed", "first_10pct", "last_10pct", "ratio", "diverged"};
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto inst = mixture(3, 3, 2000, mix_seed(606, 0, seed), 0.0);
    EasiConfig cfg;
    cfg.step_size = 0.01;
    cfg.nonlinearity = Nonlinearity::cubic();
    try {
      const RunRecord rec = easi_run(inst, cfg);
      const double first = segment_aligned_mse(rec.y, inst.S, 0, 200);
      const double last = segment_aligned_mse(rec.y, inst.S, 1800, 200);
      const bool pass = last < 0.25 * first;
      ok += pass ? 1 : 0;
      out.data.rows.push_back({static_cast<double>(seed), first, last, last / first, 0.0});
    } catch (const NumericalError&) {
      out.data.rows.push_back({static_cast<double>(seed), NAN, NAN, NAN, 1.0});
    }
  }
  const double secs = seconds_since(t0);
  out.pass = ok >= 8 && secs < 30.0;
  std::string ratios;
  for (const auto& r : out.data.rows) ratios += (ratios.empty() ? "" : " ") + fmt(r[3], 2);
  out.detail = std::to_string(ok) + "/10 seeds with last/first < 0.25 (need 8); ratios " + ratios +
               "; " + fmt(secs) + " s (< 30 s)";
  return out;
}

// ---------------------------------------------------------------------------
// 7 and 8. Desk-scale training runs

struct DeskData {
  std::vector<MixtureInstance> train;
  std::vector<MixtureInstance> test;
};

DeskData desk_data() {
  DeskData d;
  for (int i = 0; i < 200; ++i)
    d.train.push_back(mixture(3, 3, 300, mix_seed(707, 0, static_cast<std::uint64_t>(i)), 1e-3));
  for (int i = 0; i < 50; ++i)
    d.test.push_back(mixture(3, 3, 300, mix_seed(707, 1, static_cast<std::uint64_t>(i)), 1e-3));
  return d;
}

TrainConfig desk_train_config(LossKind loss) {
  TrainConfig cfg;
  cfg.epochs = 100;
  cfg.batch_size = 40;
  cfg.learning_rate = 1e-4;
  cfg.loss = {loss, 0.0};
  cfg.seed = 708;
  return cfg;
}

// Per-instance cumulative-MSE curves; rows are instances.
std::vector<std::vector<double>> cumulative_curves(const std::vector<RunRecord>& recs, ErrorKind kind) {
  std::vector<std::vector<double>> out;
  for (const auto& r : recs)
    out.push_back(cumulative_mean(kind == ErrorKind::Raw ? r.sq_err : r.aligned_sq_err));
  return out;
}

std::vector<double> mean_curve(const std::vector<std::vector<double>>& curves,
                               const std::vector<std::size_t>& pick) {
  std::vector<double> m(curves.front().size(), 0.0);
  for (std::size_t i : pick)
    for (std::size_t t = 0; t < m.size(); ++t) m[t] += curves[i][t];
  for (auto& v : m) v /= static_cast<double>(pick.size());
  return m;
}

// First 1-based t at which `curve` is at or below `level`; 0 if never.
int first_reach(const std::vector<double>& curve, double level) {
  for (std::size_t t = 0; t < curve.size(); ++t)
    if (curve[t] <= level) return static_cast<int>(t) + 1;
  return 0;
}

struct DeskRuns {
  std::optional<TrainResult<DeepEasiParams>> easi_mse;
  std::optional<TrainResult<DeepRlsParams>> rls_mse;
  std::optional<TrainResult<DeepEasiParams>> easi_sure;
  std::string easi_mse_error;
  std::string rls_mse_error;
  std::string easi_sure_error;
  double easi_mse_secs = 0.0;
  double rls_mse_secs = 0.0;
  double easi_sure_secs = 0.0;
};

template <class Params>
std::optional<TrainResult<Params>> timed_train(const Params& init, const DeskData& d,
                                               const TrainConfig& cfg, std::string& error,
                                               double& secs) {
  const auto t0 = Clock::now();
  try {
    auto r = train(init, d.train, d.test, cfg);
    secs = seconds_since(t0);
    return r;
  } catch (const Error& e) {
    secs = seconds_since(t0);
    error = e.what();
    return std::nullopt;
  }
}

DeskRuns desk_runs(const DeskData& d, bool need_sure) {
  DeskRuns runs;
  DeepEasiSpec es;
  es.m = 3;
  es.depth = 300;
  es.seed = 709;
  DeepRlsSpec rs;
  rs.m = 3;
  rs.depth = 300;
  rs.seed = 710;
  runs.easi_mse = timed_train(init_deep_easi(es), d, desk_train_config(LossKind::Mse),
                              runs.easi_mse_error, runs.easi_mse_secs);
  runs.rls_mse = timed_train(init_deep_rls(rs), d, desk_train_config(LossKind::Mse),
                             runs.rls_mse_error, runs.rls_mse_secs);
  if (need_sure)
    runs.easi_sure = timed_train(init_deep_easi(es), d, desk_train_config(LossKind::Sure),
                                 runs.easi_sure_error, runs.easi_sure_secs);
  return runs;
}

std::vector<RunRecord> network_records(const std::function<Matrix(const Matrix&)>& forward,
                                       const std::vector<MixtureInstance>& test) {
  std::vector<RunRecord> recs;
  for (const auto& inst : test) {
    RunRecord r;
    r.y = forward(inst.X);
    attach_errors(r, inst.S);
    recs.push_back(std::move(r));
  }
  return recs;
}

Outcome criterion7(const DeskData& d, const DeskRuns& runs) {
  Outcome out;
  out.data.header = {"bootstrap", "deep_easi_t50", "easi_t50", "easi_reach", "deep_rls_t50",
                     "rls_t50", "rls_reach", "easi_ok", "rls_strict_ok", "rls_relaxed_ok"};
  if (!runs.easi_mse || !runs.rls_mse) {
    out.detail = "training failed: " + runs.easi_mse_error + " " + runs.rls_mse_error;
    return out;
  }
  const InitSpec init;
  std::vector<RunRecord> easi;
  std::vector<RunRecord> rls;
  for (const auto& inst : d.test) {
    EasiConfig ecfg;
    ecfg.step_size = 0.01;
    easi.push_back(easi_run(inst, ecfg));
    RlsConfig rcfg;
    rcfg.beta = 0.99;
    rls.push_back(rls_run(inst, rcfg));
  }
  const auto deep_easi = network_records(
      [&](const Matrix& X) { return deep_easi_outputs(runs.easi_mse->params, X, init); }, d.test);
  const auto deep_rls = network_records(
      [&](const Matrix& X) { return deep_rls_outputs(runs.rls_mse->params, X, init); }, d.test);

  const auto c_easi = cumulative_curves(easi, ErrorKind::Aligned);
  const auto c_rls = cumulative_curves(rls, ErrorKind::Aligned);
  const auto c_deasi = cumulative_curves(deep_easi, ErrorKind::Raw);
  const auto c_drls = cumulative_curves(deep_rls, ErrorKind::Raw);

  int easi_ok = 0;
  int strict_ok = 0;
  int relaxed_ok = 0;
  const std::size_t n = d.test.size();
  const std::size_t t50 = 49;
  for (int b = 0; b < 10; ++b) {
    Rng rng(mix_seed(711, 0, static_cast<std::uint64_t>(b)));
    std::vector<std::size_t> pick(n);
    for (auto& p : pick) p = static_cast<std::size_t>(rng.below(n));
    const auto me = mean_curve(c_easi, pick);
    const auto mr = mean_curve(c_rls, pick);
    const auto mde = mean_curve(c_deasi, pick);
    const auto mdr = mean_curve(c_drls, pick);
    const int easi_reach = first_reach(me, mde[t50]);
    const int rls_reach = first_reach(mr, mdr[t50]);
    const bool e_ok = mde[t50] < me[t50] && (easi_reach == 0 || easi_reach >= 100);
    const bool r_relaxed = mdr[t50] < mr[t50];
    const bool r_strict = r_relaxed && (rls_reach == 0 || rls_reach >= 250);
    easi_ok += e_ok;
    strict_ok += e_ok && r_strict;
    relaxed_ok += e_ok && r_relaxed;
    out.data.rows.push_back({static_cast<double>(b), mde[t50], me[t50], static_cast<double>(easi_reach),
                             mdr[t50], mr[t50], static_cast<double>(rls_reach), e_ok ? 1.0 : 0.0,
                             r_strict ? 1.0 : 0.0, r_relaxed ? 1.0 : 0.0});
  }
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  const auto me = mean_curve(c_easi, all);
  const auto mr = mean_curve(c_rls, all);
  const auto mde = mean_curve(c_deasi, all);
  const auto mdr = mean_curve(c_drls, all);
  const double secs = runs.easi_mse_secs + runs.rls_mse_secs;
  const bool strict = strict_ok >= 7;
  const bool relaxed = relaxed_ok >= 7;
  out.pass = (strict || relaxed) && secs < 1800.0;
  out.detail = "cumulative MSE at t=50 (full test set): Deep EASI " + fmt(mde[t50]) + " vs EASI " +
               fmt(me[t50]) + ", Deep RLS " + fmt(mdr[t50]) + " vs RLS " + fmt(mr[t50]) +
               "; bootstraps passing: " + std::to_string(strict_ok) + "/10 with the 250-step RLS gap, " +
               std::to_string(relaxed_ok) + "/10 with RLS dominance at t=50 only (need 7)" +
               (strict ? "" : relaxed ? " [relaxed RLS half used]" : "") + "; training " + fmt(secs) +
               " s";
  return out;
}

Outcome criterion8(const DeskData& d, const DeskRuns& runs) {
  Outcome out;
  out.data.header = {"loss", "test_mse", "epoch0_test_mse"};
  if (!runs.easi_mse || !runs.easi_sure) {
    out.detail = "training failed: " + runs.easi_mse_error + " " + runs.easi_sure_error;
    return out;
  }
  const double mse = mean_test_mse(runs.easi_mse->params, d.test);
  const double sure = mean_test_mse(runs.easi_sure->params, d.test);
  out.data.rows.push_back({0.0, mse, runs.easi_mse->history.epochs.front().test_mse});
  out.data.rows.push_back({1.0, sure, runs.easi_sure->history.epochs.front().test_mse});
  const double secs = runs.easi_mse_secs + runs.easi_sure_secs;
  out.pass = sure <= 1.1 * mse && secs < 1800.0;
  out.detail = "test MSE with SURE " + fmt(sure, 4) + " vs MSE-trained " + fmt(mse, 4) + " (ratio " +
               fmt(sure / mse) + ", need <= 1.1); training " + fmt(secs) + " s";
  return out;
}

// ---------------------------------------------------------------------------
// 9. Penalty drives omega into [0, 1]

Outcome criterion9() {
  Outcome out;
  out.data.header = {"epoch", "omega"};
  std::vector<MixtureInstance> data;
  for (int i = 0; i < 80; ++i)
    data.push_back(mixture(3, 3, 100, mix_seed(909, 0, static_cast<std::uint64_t>(i)), 1e-3));
  DeepRlsSpec spec;
  spec.m = 3;
  spec.depth = 100;
  spec.omega_init = 1.5;
  spec.seed = 910;
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.batch_size = 40;
  cfg.learning_rate = 1e-2;
  cfg.loss = {LossKind::RegularizedMse, 10.0};
  cfg.seed = 911;
  cfg.checkpoint_every = 1;
  int entered = 0;
  auto result = train(init_deep_rls(spec), data, {}, cfg, [&](int epoch, const std::string& text) {
    const auto p = deep_rls_from_checkpoint(text);
    const double w = p.omegas.front();
    out.data.rows.push_back({static_cast<double>(epoch), w});
    if (!entered && w >= 0.0 && w <= 1.01) entered = epoch;
  });
  bool inside = true;
  for (double w : result.params.omegas) inside = inside && w >= 0.0 && w <= 1.01;
  out.pass = inside && entered > 0;
  out.detail = "omega " + fmt(result.params.omegas.front(), 5) + " after 50 epochs (first inside [0, 1.01] at epoch " +
               std::to_string(entered) + ")";
  return out;
}

// ---------------------------------------------------------------------------

struct Criterion {
  int id;
  std::string name;
  Outcome outcome;
};

std::vector<Criterion> run_all() {
  std::vector<Criterion> out;
  out.push_back({1, "inversion-lemma equivalence", criterion1()});
  out.push_back({2, "reduction to baseline", criterion2()});
  out.push_back({3, "gradient correctness", criterion3()});
  out.push_back({4, "SURE unbiasedness", criterion4()});
  out.push_back({5, "divergence shortcut", criterion5()});
  out.push_back({6, "baseline EASI separation", criterion6()});
  const DeskData d = desk_data();
  const DeskRuns runs = desk_runs(d, true);
  out.push_back({7, "convergence ordering", criterion7(d, runs)});
  out.push_back({8, "SURE vs MSE training", criterion8(d, runs)});
  out.push_back({9, "regularization feasibility", criterion9()});
  return out;
}

std::vector<std::string> write_round(const fs::path& dir, const std::vector<Criterion>& crits) {
  fs::create_directories(dir);
  std::vector<std::string> digests;
  for (const auto& c : crits) {
    const std::string text = table_to_csv(c.outcome.data);
    write_text(dir / ("criterion" + std::to_string(c.id) + ".csv"), text);
    digests.push_back(digest_hex(text));
  }
  return digests;
}

void print(int id, const std::string& name, bool pass, const std::string& detail) {
  std::cout << (pass ? "[PASS] " : "[FAIL] ") << id << ". " << name << ": " << detail << std::endl;
}

}  // namespace

int main() {
  const char* env = std::getenv("ACCEPTANCE_OUT");
  const fs::path out_dir = env && *env ? fs::path(env) : fs::path("acceptance_out");
  try {
    const auto t0 = Clock::now();
    const auto first = run_all();
    const auto d1 = write_round(out_dir / "run1", first);
    for (const auto& c : first) print(c.id, c.name, c.outcome.pass, c.outcome.detail);

    const auto second = run_all();
    const auto d2 = write_round(out_dir / "run2", second);
    int same = 0;
    std::string mismatched;
    for (std::size_t i = 0; i < d1.size(); ++i) {
      if (d1[i] == d2[i])
        ++same;
      else
        mismatched += " " + std::to_string(first[i].id);
    }
    const bool det = same == static_cast<int>(d1.size());
    print(10, "determinism", det,
          std::to_string(same) + "/" + std::to_string(d1.size()) + " criterion CSV digests identical on rerun" +
              (det ? "" : " (differ:" + mismatched + ")"));

    int passed = det ? 1 : 0;
    for (const auto& c : first) passed += c.outcome.pass ? 1 : 0;
    std::cout << "summary: " << passed << "/10 criteria passed, " << fmt(seconds_since(t0)) << " s; data in "
              << out_dir.string() << std::endl;
  } catch (const std::exception& e) {
    std::cout << "acceptance suite aborted: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}

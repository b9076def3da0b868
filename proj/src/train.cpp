#include "deepsep/train.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include "deepsep/eval.hpp"
#include "deepsep/rng.hpp"

namespace deepsep {

AdamState AdamState::zeros(std::size_t n) {
  AdamState s;
  s.m.assign(n, 0.0);
  s.v.assign(n, 0.0);
  return s;
}

void adam_step(std::vector<double>& params, std::span<const double> grads, AdamState& state,
               double lr, const AdamConfig& cfg) {
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size())
    throw DimensionError("Adam state, gradient and parameter sizes differ");
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("learning_rate must be a non-negative number");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0))
    throw ConfigError("Adam betas must lie in [0, 1)");
  if (!(adam.eps > 0.0)) throw ConfigError("Adam eps must be positive");
  if (!(clip_norm >= 0.0)) throw ConfigError("clip_norm must be non-negative");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be non-negative");
  if (jobs < 1) throw ConfigError("jobs must be positive");
  loss.validate();
}

TrainingError::TrainingError(const std::string& cause, std::size_t step, int epoch, int batch)
    : NumericalError(Verbatim{},
                     "training diverged at epoch " + std::to_string(epoch) + ", batch " +
                         std::to_string(batch) + ": " + cause,
                     step),
      epoch_(epoch),
      batch_(batch) {}

CsvTable TrainHistory::to_csv_table() const {
  CsvTable t;
  t.header = {"epoch", "train_loss", "test_mse"};
  for (const auto& e : epochs)
    t.rows.push_back({static_cast<double>(e.epoch), e.train_loss, e.test_mse});
  return t;
}

// ---------------------------------------------------------------------------
// Per-sequence passes

namespace {

void check_instance(const MixtureInstance& inst, int m) {
  if (inst.m() != m) throw DimensionError("instance source count does not match the network");
  if (inst.T() < 1) throw DimensionError("instance has no samples");
}

ad::Var build_loss(ad::Tape& tape, const BoundDeepRls& b, const MixtureInstance& inst,
                   const LossConfig& loss, const InitSpec& init) {
  const UnrolledOutput out = deep_rls_forward(tape, b, inst.X, init);
  switch (loss.kind) {
    case LossKind::Mse: return mse_loss(out.y, inst.S);
    case LossKind::RegularizedMse: {
      const auto omegas = b.layer_omegas(inst.T());
      return regularized_loss(out.y, inst.S, omegas, loss.lambda_reg);
    }
    case LossKind::Sure: break;
  }
  throw UnsupportedError("SURE loss is not supported for Deep RLS");
}

ad::Var build_loss(ad::Tape& tape, const BoundDeepEasi& b, const MixtureInstance& inst,
                   const LossConfig& loss, const InitSpec& init, DivergenceRule rule) {
  if (loss.kind == LossKind::RegularizedMse)
    throw UnsupportedError("the regularized loss constrains forgetting factors; Deep EASI has none");
  const UnrolledOutput out = deep_easi_forward(tape, b, inst.X, init);
  if (loss.kind == LossKind::Mse) return mse_loss(out.y, inst.S);
  const SureContext ctx = sure_context(inst.A, inst.noise_var, rule);
  return sure_loss(out.y, inst.X, out.W, ctx);
}

void check_loss(double value) {
  if (!std::isfinite(value)) throw NumericalError("loss is not finite", 0);
}

}  // namespace

LossAndGradient loss_and_gradient(const DeepRlsParams& p, const MixtureInstance& inst,
                                  const LossConfig& loss, const InitSpec& init) {
  check_instance(inst, p.m());
  if (loss.kind == LossKind::Sure) throw UnsupportedError("SURE loss is not supported for Deep RLS");
  ad::Tape tape;
  const BoundDeepRls b = bind(tape, p);
  const ad::Var root = build_loss(tape, b, inst, loss, init);
  LossAndGradient out;
  out.loss = root.scalar();
  check_loss(out.loss);
  out.gradient = gather_gradient(tape.backward(root), b);
  return out;
}

LossAndGradient loss_and_gradient(const DeepEasiParams& p, const MixtureInstance& inst,
                                  const LossConfig& loss, const InitSpec& init,
                                  DivergenceRule rule) {
  check_instance(inst, p.m());
  ad::Tape tape;
  const BoundDeepEasi b = bind(tape, p);
  const ad::Var root = build_loss(tape, b, inst, loss, init, rule);
  LossAndGradient out;
  out.loss = root.scalar();
  check_loss(out.loss);
  out.gradient = gather_gradient(tape.backward(root), b);
  return out;
}

double sequence_loss(const DeepRlsParams& p, const MixtureInstance& inst, const LossConfig& loss,
                     const InitSpec& init) {
  check_instance(inst, p.m());
  ad::Tape tape;
  const BoundDeepRls b = bind(tape, p);
  return build_loss(tape, b, inst, loss, init).scalar();
}

double sequence_loss(const DeepEasiParams& p, const MixtureInstance& inst, const LossConfig& loss,
                     const InitSpec& init, DivergenceRule rule) {
  check_instance(inst, p.m());
  ad::Tape tape;
  const BoundDeepEasi b = bind(tape, p);
  return build_loss(tape, b, inst, loss, init, rule).scalar();
}

double mean_test_mse(const DeepRlsParams& p, std::span<const MixtureInstance> data,
                     const InitSpec& init) {
  if (data.empty()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  for (const auto& inst : data) total += average_mse(deep_rls_outputs(p, inst.X, init), inst.S);
  return total / static_cast<double>(data.size());
}

double mean_test_mse(const DeepEasiParams& p, std::span<const MixtureInstance> data,
                     const InitSpec& init) {
  if (data.empty()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  for (const auto& inst : data) total += average_mse(deep_easi_outputs(p, inst.X, init), inst.S);
  return total / static_cast<double>(data.size());
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(mix_seed(seed, 7, static_cast<std::uint64_t>(epoch)));
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

template <class Params>
struct Trainer {
  const TrainConfig& cfg;
  std::span<const MixtureInstance> data;

  LossAndGradient pass(const Params& p, const MixtureInstance& inst) const {
    if constexpr (std::is_same_v<Params, DeepEasiParams>)
      return loss_and_gradient(p, inst, cfg.loss, cfg.init, cfg.divergence);
    else
      return loss_and_gradient(p, inst, cfg.loss, cfg.init);
  }

  double forward(const Params& p, const MixtureInstance& inst) const {
    if constexpr (std::is_same_v<Params, DeepEasiParams>)
      return sequence_loss(p, inst, cfg.loss, cfg.init, cfg.divergence);
    else
      return sequence_loss(p, inst, cfg.loss, cfg.init);
  }

  // Per-sequence results for one batch, in batch order.
  std::vector<LossAndGradient> run_batch(const Params& p,
                                         std::span<const std::size_t> members) const {
    std::vector<LossAndGradient> results(members.size());
    std::vector<std::exception_ptr> errors(members.size());
    auto work = [&](std::size_t first, std::size_t stride) {
      for (std::size_t i = first; i < members.size(); i += stride) {
        try {
          results[i] = pass(p, data[members[i]]);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.jobs), members.size());
    if (workers <= 1) {
      work(0, 1);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
      for (auto& th : pool) th.join();
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
    return results;
  }

  TrainResult<Params> run(const Params& init, std::span<const MixtureInstance> test,
                          const CheckpointFn& checkpoint) const {
    cfg.validate();
    if (data.empty()) throw ConfigError("training set is empty");
    if constexpr (std::is_same_v<Params, DeepRlsParams>) {
      if (cfg.loss.kind == LossKind::Sure)
        throw UnsupportedError("SURE loss is not supported for Deep RLS");
    }
    init.validate();

    TrainResult<Params> result{init, {}};
    Params& params = result.params;
    std::vector<double> flat = flatten(params);
    AdamState adam = AdamState::zeros(flat.size());

    auto record = [&](int epoch, double train_loss) {
      double test_mse = 0.0;
      try {
        test_mse = mean_test_mse(params, test, cfg.init);
      } catch (const NumericalError& e) {
        throw TrainingError(std::string("test evaluation: ") + e.what(), e.step(), epoch, -1);
      }
      result.history.epochs.push_back({epoch, train_loss, test_mse});
    };
    {
      double total = 0.0;
      try {
        for (const auto& inst : data) total += forward(params, inst);
      } catch (const NumericalError& e) {
        throw TrainingError(e.what(), e.step(), 0, 0);
      }
      record(0, total / static_cast<double>(data.size()));
    }

    const auto n = data.size();
    const auto batch = static_cast<std::size_t>(cfg.batch_size);
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
      const auto order = epoch_order(n, cfg.seed, epoch);
      double epoch_loss = 0.0;
      int batch_index = 0;
      for (std::size_t start = 0; start < n; start += batch, ++batch_index) {
        const std::span<const std::size_t> members(order.data() + start,
                                                   std::min(batch, n - start));
        std::vector<LossAndGradient> parts;
        try {
          parts = run_batch(params, members);
        } catch (const NumericalError& e) {
          throw TrainingError(e.what(), e.step(), epoch, batch_index);
        }
        std::vector<double> grad(flat.size(), 0.0);
        for (const auto& part : parts) {
          epoch_loss += part.loss;
          for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += part.gradient[i];
        }
        const double inv = 1.0 / static_cast<double>(members.size());
        double norm2 = 0.0;
        for (auto& g : grad) {
          g *= inv;
          norm2 += g * g;
        }
        if (!std::isfinite(norm2)) throw TrainingError("gradient is not finite", 0, epoch, batch_index);
        if (cfg.clip_norm > 0.0 && norm2 > cfg.clip_norm * cfg.clip_norm) {
          const double s = cfg.clip_norm / std::sqrt(norm2);
          for (auto& g : grad) g *= s;
        }
        adam_step(flat, grad, adam, cfg.learning_rate, cfg.adam);
        unflatten(params, flat);
      }
      record(epoch, epoch_loss / static_cast<double>(n));
      if (checkpoint && cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0)
        checkpoint(epoch, to_checkpoint_json(params));
    }
    return result;
  }
};

}  // namespace

TrainResult<DeepRlsParams> train(const DeepRlsParams& init, std::span<const MixtureInstance> data,
                                 std::span<const MixtureInstance> test, const TrainConfig& cfg,
                                 const CheckpointFn& checkpoint) {
  return Trainer<DeepRlsParams>{cfg, data}.run(init, test, checkpoint);
}

TrainResult<DeepEasiParams> train(const DeepEasiParams& init,
                                  std::span<const MixtureInstance> data,
                                  std::span<const MixtureInstance> test, const TrainConfig& cfg,
                                  const CheckpointFn& checkpoint) {
  return Trainer<DeepEasiParams>{cfg, data}.run(init, test, checkpoint);
}

}  // namespace deepsep

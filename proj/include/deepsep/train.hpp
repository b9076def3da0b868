#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "deepsep/baseline.hpp"
#include "deepsep/csv.hpp"
#include "deepsep/error.hpp"
#include "deepsep/loss.hpp"
#include "deepsep/model.hpp"
#include "deepsep/unrolled.hpp"

namespace deepsep {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long long step = 0;

  static AdamState zeros(std::size_t n);
};

// Bias-corrected Adam:
//   m <- b1 m + (1-b1) g; v <- b2 v + (1-b2) g^2;
//   p <- p - lr * mhat / (sqrt(vhat) + eps).
void adam_step(std::vector<double>& params, std::span<const double> grads, AdamState& state,
               double lr, const AdamConfig& cfg = {});

struct TrainConfig {
  int epochs = 100;
  int batch_size = 40;
  double learning_rate = 1e-4;
  LossConfig loss;
  AdamConfig adam;
  std::uint64_t seed = 0;
  // Global-norm gradient clip; 0 disables it.
  double clip_norm = 0.0;
  // Checkpoint callback period in epochs; 0 disables it.
  int checkpoint_every = 0;
  // Workers for the per-sequence passes inside a batch. Results are
  // reduced in sequence order, so the outcome does not depend on it.
  int jobs = 1;
  DivergenceRule divergence = DivergenceRule::Generalized;
  InitSpec init;

  void validate() const;
};

// Raised when a forward/backward pass blows up during training.
class TrainingError : public NumericalError {
 public:
  TrainingError(const std::string& cause, std::size_t step, int epoch, int batch);

  int epoch() const noexcept { return epoch_; }
  int batch() const noexcept { return batch_; }

 private:
  int epoch_;
  int batch_;
};

struct EpochRecord {
  int epoch = 0;               // 0 is the initialization
  double train_loss = 0.0;     // mean per-sequence loss
  double test_mse = 0.0;       // mean raw average MSE on the test set, NaN without one
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;

  // Columns epoch, train_loss, test_mse.
  CsvTable to_csv_table() const;
};

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> gradient;  // flatten() order
};

// Loss of one sequence and its gradient by BPTT.
LossAndGradient loss_and_gradient(const DeepRlsParams& p, const MixtureInstance& inst,
                                  const LossConfig& loss, const InitSpec& init = {});
LossAndGradient loss_and_gradient(const DeepEasiParams& p, const MixtureInstance& inst,
                                  const LossConfig& loss, const InitSpec& init = {},
                                  DivergenceRule rule = DivergenceRule::Generalized);

// Forward-only loss of one sequence.
double sequence_loss(const DeepRlsParams& p, const MixtureInstance& inst, const LossConfig& loss,
                     const InitSpec& init = {});
double sequence_loss(const DeepEasiParams& p, const MixtureInstance& inst, const LossConfig& loss,
                     const InitSpec& init = {},
                     DivergenceRule rule = DivergenceRule::Generalized);

// Mean raw average MSE over a set of instances.
double mean_test_mse(const DeepRlsParams& p, std::span<const MixtureInstance> data,
                     const InitSpec& init = {});
double mean_test_mse(const DeepEasiParams& p, std::span<const MixtureInstance> data,
                     const InitSpec& init = {});

template <class Params>
struct TrainResult {
  Params params;
  TrainHistory history;
};

using CheckpointFn = std::function<void(int epoch, const std::string& checkpoint_json)>;

// Mini-batch training with Adam on the batch-mean loss. Each epoch visits
// the training set in a fresh seeded order; the trailing partial batch is
// kept. `test` may be empty.
TrainResult<DeepRlsParams> train(const DeepRlsParams& init, std::span<const MixtureInstance> data,
                                 std::span<const MixtureInstance> test, const TrainConfig& cfg,
                                 const CheckpointFn& checkpoint = {});
TrainResult<DeepEasiParams> train(const DeepEasiParams& init,
                                  std::span<const MixtureInstance> data,
                                  std::span<const MixtureInstance> test, const TrainConfig& cfg,
                                  const CheckpointFn& checkpoint = {});

// Epoch order used by train(): a Fisher-Yates shuffle seeded from
// (seed, epoch).
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch);

}  // namespace deepsep

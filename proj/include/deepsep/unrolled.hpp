#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "deepsep/autograd.hpp"
#include "deepsep/baseline.hpp"
#include "deepsep/types.hpp"

namespace deepsep {

enum class Activation { Tanh, Relu };

struct MlpLayer {
  Matrix weight;  // out x in
  Matrix bias;    // out x 1
};

// Vector-to-vector network: affine layers with the activation between
// them and a linear output layer.
struct MlpParams {
  std::vector<MlpLayer> layers;
  Activation activation = Activation::Tanh;

  int input_dim() const;
  int output_dim() const;
  // Throws DimensionError unless the layers chain from m to m.
  void validate(int m) const;
};

// Starting function the output layer is fitted to.
enum class MlpInit { Identity, Cubic };

struct MlpSpec {
  std::vector<int> hidden{16};
  Activation activation = Activation::Tanh;
  MlpInit init = MlpInit::Identity;
  // Inputs used for the output-layer fit are N(0, r^2) with r uniform in
  // [0.25, 1] * fit_scale.
  double fit_scale = 1.0;
};

// First hidden layer: unit j reads input j mod m with a random gain in
// [0.1, 1.5] / fit_scale; deeper hidden layers ~ N(0, 1/fan_in); zero
// biases. The output layer is a ridge least-squares fit (no bias) of the
// target function over random inputs, so the network starts odd and close
// to the classical nonlinearity.
MlpParams make_mlp(int m, const MlpSpec& spec, std::uint64_t seed);

// Single linear layer with identity weight and zero bias.
MlpParams identity_mlp(int m);

// Parameters of Deep RLS: per-layer forgetting factors and nonlinearities.
// With sharing, one omega and one MLP serve every layer.
struct DeepRlsParams {
  bool shared = true;
  int depth = 0;
  std::vector<double> omegas;
  std::vector<MlpParams> mlps;

  int m() const { return mlps.empty() ? 0 : mlps.front().output_dim(); }
  void validate() const;
};

enum class EasiNonlinearity {
  Mlp,
  Cubic,  // exact g(y) = y^3, no trainable nonlinearity
};

// Parameters of Deep EASI: per-layer step sizes and nonlinearities.
struct DeepEasiParams {
  bool shared = true;
  int depth = 0;
  int sources = 0;
  EasiNonlinearity nonlinearity = EasiNonlinearity::Mlp;
  std::vector<double> lambdas;
  std::vector<MlpParams> mlps;  // empty for the cubic bypass

  int m() const { return sources; }
  void validate() const;
};

struct DeepRlsSpec {
  int m = 3;
  int depth = 300;
  bool shared = true;
  double omega_init = 0.99;
  MlpSpec mlp{};
  std::uint64_t seed = 0;
};

struct DeepEasiSpec {
  int m = 3;
  int depth = 300;
  bool shared = true;
  double lambda_init = 0.01;
  EasiNonlinearity nonlinearity = EasiNonlinearity::Mlp;
  MlpSpec mlp{{16}, Activation::Tanh, MlpInit::Cubic, 1.0};
  std::uint64_t seed = 0;
};

DeepRlsParams init_deep_rls(const DeepRlsSpec& spec);
DeepEasiParams init_deep_easi(const DeepEasiSpec& spec);

// Flat parameter vectors. Order: for each parameter set k (one when
// shared), the scalar omega_k / lambda_k, then each MLP layer's weight
// (column-major) and bias.
std::vector<double> flatten(const DeepRlsParams& p);
std::vector<double> flatten(const DeepEasiParams& p);
void unflatten(DeepRlsParams& p, std::span<const double> flat);
void unflatten(DeepEasiParams& p, std::span<const double> flat);

// Parameters registered as leaves on a tape, in flatten() order.
struct BoundMlp {
  std::vector<ad::Var> weights;
  std::vector<ad::Var> biases;
  Activation activation = Activation::Tanh;
};

struct BoundDeepRls {
  bool shared = true;
  int depth = 0;
  std::vector<ad::Var> omegas;
  std::vector<BoundMlp> mlps;

  // Per-layer omega handle (the shared one repeated when shared).
  ad::Var omega_at(int layer) const;
  std::vector<ad::Var> layer_omegas(int layers) const;
};

struct BoundDeepEasi {
  bool shared = true;
  int depth = 0;
  EasiNonlinearity nonlinearity = EasiNonlinearity::Mlp;
  std::vector<ad::Var> lambdas;
  std::vector<BoundMlp> mlps;

  ad::Var lambda_at(int layer) const;
};

BoundDeepRls bind(ad::Tape& tape, const DeepRlsParams& p);
BoundDeepEasi bind(ad::Tape& tape, const DeepEasiParams& p);

std::vector<double> gather_gradient(const ad::Gradients& g, const BoundDeepRls& b);
std::vector<double> gather_gradient(const ad::Gradients& g, const BoundDeepEasi& b);

ad::Var mlp_forward(const BoundMlp& mlp, const ad::Var& v);

struct UnrolledOutput {
  std::vector<ad::Var> y;  // y[k] is the k-th layer's output
  // Separating matrix each output was read through: W(k-1) for Deep RLS,
  // W(t) (with y(t) = W(t)^T x(t)) for Deep EASI.
  std::vector<ad::Var> W;
  ad::Var final_W;
  std::vector<double> layer_params;  // omega_k or lambda_t actually used

  Matrix y_values() const;
};

// One layer per column of X:
//   y = g_k(W^T x); h = G y; f = h / (omega_k + y^T h);
//   G <- (G - f h^T) / omega_k; e = x - W y; W <- W + e f^T.
UnrolledOutput deep_rls_forward(ad::Tape& tape, const BoundDeepRls& params, const Matrix& X,
                                const InitSpec& init);

// One layer per column of X:
//   y = W^T x; H = y y^T - I + g_t(y) y^T - y g_t(y)^T; W <- W - lambda_t W H^T.
UnrolledOutput deep_easi_forward(ad::Tape& tape, const BoundDeepEasi& params, const Matrix& X,
                                 const InitSpec& init);

// Forward pass on a private tape, returning the m x T outputs.
Matrix deep_rls_outputs(const DeepRlsParams& p, const Matrix& X, const InitSpec& init);
Matrix deep_easi_outputs(const DeepEasiParams& p, const Matrix& X, const InitSpec& init);

// Checkpoints: one JSON document with shapes, flat arrays, the shared flag
// and the unroll depth.
std::string to_checkpoint_json(const DeepRlsParams& p);
std::string to_checkpoint_json(const DeepEasiParams& p);
// "deep_rls" or "deep_easi".
std::string checkpoint_network(const std::string& json_text);
DeepRlsParams deep_rls_from_checkpoint(const std::string& json_text);
DeepEasiParams deep_easi_from_checkpoint(const std::string& json_text);

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

}  // namespace deepsep

#include "deepsep/unrolled.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <nlohmann/json.hpp>

#include "deepsep/error.hpp"
#include "deepsep/rng.hpp"

namespace deepsep {

namespace {

constexpr double kMinGainDenominator = 1e-12;

std::size_t set_count(bool shared, int depth) {
  return shared ? 1u : static_cast<std::size_t>(depth);
}

}  // namespace

std::string to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }

Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  throw ConfigError("unknown activation '" + name + "'");
}

int MlpParams::input_dim() const {
  return layers.empty() ? 0 : static_cast<int>(layers.front().weight.cols());
}

int MlpParams::output_dim() const {
  return layers.empty() ? 0 : static_cast<int>(layers.back().weight.rows());
}

void MlpParams::validate(int m) const {
  if (layers.empty()) throw DimensionError("MLP has no layers");
  if (input_dim() != m || output_dim() != m)
    throw DimensionError("MLP must map R^" + std::to_string(m) + " to itself");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& L = layers[i];
    if (L.bias.rows() != L.weight.rows() || L.bias.cols() != 1)
      throw DimensionError("MLP bias shape does not match its weight");
    if (i > 0 && L.weight.cols() != layers[i - 1].weight.rows())
      throw DimensionError("MLP layer dimensions do not chain");
  }
}

MlpParams identity_mlp(int m) {
  MlpParams p;
  p.layers.push_back({Matrix::Identity(m, m), Matrix::Zero(m, 1)});
  return p;
}

MlpParams make_mlp(int m, const MlpSpec& spec, std::uint64_t seed) {
  if (m < 1) throw DimensionError("MLP width must be positive");
  if (!(spec.fit_scale > 0.0)) throw ConfigError("MLP fit_scale must be positive");
  if (spec.hidden.empty()) {
    if (spec.init != MlpInit::Identity)
      throw ConfigError("a linear MLP can only start as the identity");
    return identity_mlp(m);
  }
  Rng rng(seed);
  MlpParams p;
  p.activation = spec.activation;
  int fan_in = m;
  for (std::size_t layer = 0; layer < spec.hidden.size(); ++layer) {
    const int width = spec.hidden[layer];
    if (width < 1) throw ConfigError("hidden layer width must be positive");
    MlpLayer L{Matrix::Zero(width, fan_in), Matrix::Zero(width, 1)};
    if (layer == 0) {
      // Unit j reads coordinate j mod m with a random gain, so the network
      // starts out elementwise like the classical nonlinearities.
      for (int j = 0; j < width; ++j) {
        const double gain = rng.uniform(0.1, 1.5) / spec.fit_scale;
        L.weight(j, j % m) = rng.uniform01() < 0.5 ? -gain : gain;
      }
    } else {
      const double sd = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (Eigen::Index c = 0; c < L.weight.cols(); ++c)
        for (Eigen::Index r = 0; r < L.weight.rows(); ++r) L.weight(r, c) = sd * rng.normal();
    }
    p.layers.push_back(std::move(L));
    fan_in = width;
  }

  // Fit the output layer: features (n x fan_in) * W_out^T ~= target (n x m).
  constexpr int kFitSamples = 512;
  constexpr double kFitRidge = 1e-6;
  Matrix features(kFitSamples, fan_in);
  Matrix target(kFitSamples, m);
  for (int s = 0; s < kFitSamples; ++s) {
    Matrix v(m, 1);
    const double r = spec.fit_scale * rng.uniform(0.25, 1.0);
    for (int i = 0; i < m; ++i) v(i, 0) = r * rng.normal();
    Matrix h = v;
    for (const auto& L : p.layers) {
      h = L.weight * h + L.bias;
      h = spec.activation == Activation::Tanh ? Matrix(h.array().tanh()) : Matrix(h.cwiseMax(0.0));
    }
    features.row(s) = h.transpose();
    for (int i = 0; i < m; ++i) {
      const double x = v(i, 0);
      target(s, i) = spec.init == MlpInit::Identity ? x : x * x * x;
    }
  }
  // Small ridge term: units on the same coordinate are nearly collinear and
  // the plain solution cancels huge weights against each other.
  Matrix gram = features.transpose() * features;
  gram.diagonal().array() += kFitRidge * kFitSamples;
  const Matrix solution = gram.ldlt().solve(features.transpose() * target);  // fan_in x m
  p.layers.push_back({solution.transpose(), Matrix::Zero(m, 1)});
  return p;
}

void DeepRlsParams::validate() const {
  if (depth < 1) throw ConfigError("unroll depth must be positive");
  const std::size_t k = set_count(shared, depth);
  if (omegas.size() != k || mlps.size() != k)
    throw DimensionError("Deep RLS parameter lists do not match the unroll depth");
  const int width = m();
  for (const auto& mlp : mlps) mlp.validate(width);
  for (double w : omegas)
    if (!std::isfinite(w)) throw ConfigError("forgetting factor is not finite");
}

void DeepEasiParams::validate() const {
  if (depth < 1) throw ConfigError("unroll depth must be positive");
  if (sources < 1) throw ConfigError("source count must be positive");
  const std::size_t k = set_count(shared, depth);
  if (lambdas.size() != k) throw DimensionError("Deep EASI step list does not match the depth");
  if (nonlinearity == EasiNonlinearity::Mlp) {
    if (mlps.size() != k) throw DimensionError("Deep EASI MLP list does not match the depth");
    for (const auto& mlp : mlps) mlp.validate(sources);
  } else if (!mlps.empty()) {
    throw ConfigError("cubic Deep EASI carries no MLP parameters");
  }
  for (double l : lambdas)
    if (!std::isfinite(l)) throw ConfigError("step size is not finite");
}

DeepRlsParams init_deep_rls(const DeepRlsSpec& spec) {
  DeepRlsParams p;
  p.shared = spec.shared;
  p.depth = spec.depth;
  const std::size_t k = set_count(spec.shared, spec.depth);
  p.omegas.assign(k, spec.omega_init);
  for (std::size_t i = 0; i < k; ++i) p.mlps.push_back(make_mlp(spec.m, spec.mlp, mix_seed(spec.seed, 1, i)));
  p.validate();
  return p;
}

DeepEasiParams init_deep_easi(const DeepEasiSpec& spec) {
  DeepEasiParams p;
  p.shared = spec.shared;
  p.depth = spec.depth;
  p.sources = spec.m;
  p.nonlinearity = spec.nonlinearity;
  const std::size_t k = set_count(spec.shared, spec.depth);
  p.lambdas.assign(k, spec.lambda_init);
  if (spec.nonlinearity == EasiNonlinearity::Mlp)
    for (std::size_t i = 0; i < k; ++i) p.mlps.push_back(make_mlp(spec.m, spec.mlp, mix_seed(spec.seed, 2, i)));
  p.validate();
  return p;
}

namespace {

void append_mlp(std::vector<double>& out, const MlpParams& mlp) {
  for (const auto& L : mlp.layers) {
    out.insert(out.end(), L.weight.data(), L.weight.data() + L.weight.size());
    out.insert(out.end(), L.bias.data(), L.bias.data() + L.bias.size());
  }
}

std::size_t read_mlp(MlpParams& mlp, std::span<const double> flat, std::size_t pos) {
  for (auto& L : mlp.layers) {
    for (Eigen::Index i = 0; i < L.weight.size(); ++i) L.weight.data()[i] = flat[pos++];
    for (Eigen::Index i = 0; i < L.bias.size(); ++i) L.bias.data()[i] = flat[pos++];
  }
  return pos;
}

std::size_t mlp_size(const MlpParams& mlp) {
  std::size_t n = 0;
  for (const auto& L : mlp.layers) n += static_cast<std::size_t>(L.weight.size() + L.bias.size());
  return n;
}

}  // namespace

std::vector<double> flatten(const DeepRlsParams& p) {
  std::vector<double> out;
  for (std::size_t k = 0; k < p.omegas.size(); ++k) {
    out.push_back(p.omegas[k]);
    append_mlp(out, p.mlps[k]);
  }
  return out;
}

std::vector<double> flatten(const DeepEasiParams& p) {
  std::vector<double> out;
  for (std::size_t k = 0; k < p.lambdas.size(); ++k) {
    out.push_back(p.lambdas[k]);
    if (p.nonlinearity == EasiNonlinearity::Mlp) append_mlp(out, p.mlps[k]);
  }
  return out;
}

void unflatten(DeepRlsParams& p, std::span<const double> flat) {
  std::size_t expected = p.omegas.size();
  for (const auto& mlp : p.mlps) expected += mlp_size(mlp);
  if (flat.size() != expected) throw DimensionError("flat parameter vector has the wrong length");
  std::size_t pos = 0;
  for (std::size_t k = 0; k < p.omegas.size(); ++k) {
    p.omegas[k] = flat[pos++];
    pos = read_mlp(p.mlps[k], flat, pos);
  }
}

void unflatten(DeepEasiParams& p, std::span<const double> flat) {
  std::size_t expected = p.lambdas.size();
  for (const auto& mlp : p.mlps) expected += mlp_size(mlp);
  if (flat.size() != expected) throw DimensionError("flat parameter vector has the wrong length");
  std::size_t pos = 0;
  for (std::size_t k = 0; k < p.lambdas.size(); ++k) {
    p.lambdas[k] = flat[pos++];
    if (p.nonlinearity == EasiNonlinearity::Mlp) pos = read_mlp(p.mlps[k], flat, pos);
  }
}

namespace {

BoundMlp bind_mlp(ad::Tape& tape, const MlpParams& mlp) {
  BoundMlp b;
  b.activation = mlp.activation;
  for (const auto& L : mlp.layers) {
    b.weights.push_back(tape.leaf(L.weight));
    b.biases.push_back(tape.leaf(L.bias));
  }
  return b;
}

void gather_mlp(std::vector<double>& out, const ad::Gradients& g, const BoundMlp& mlp) {
  for (std::size_t i = 0; i < mlp.weights.size(); ++i) {
    const Matrix gw = g.wrt(mlp.weights[i]);
    const Matrix gb = g.wrt(mlp.biases[i]);
    out.insert(out.end(), gw.data(), gw.data() + gw.size());
    out.insert(out.end(), gb.data(), gb.data() + gb.size());
  }
}

}  // namespace

ad::Var BoundDeepRls::omega_at(int layer) const {
  return shared ? omegas.front() : omegas.at(static_cast<std::size_t>(layer));
}

std::vector<ad::Var> BoundDeepRls::layer_omegas(int layers) const {
  std::vector<ad::Var> out;
  out.reserve(static_cast<std::size_t>(layers));
  for (int k = 0; k < layers; ++k) out.push_back(omega_at(k));
  return out;
}

ad::Var BoundDeepEasi::lambda_at(int layer) const {
  return shared ? lambdas.front() : lambdas.at(static_cast<std::size_t>(layer));
}

BoundDeepRls bind(ad::Tape& tape, const DeepRlsParams& p) {
  p.validate();
  BoundDeepRls b;
  b.shared = p.shared;
  b.depth = p.depth;
  for (std::size_t k = 0; k < p.omegas.size(); ++k) {
    b.omegas.push_back(tape.leaf(p.omegas[k]));
    b.mlps.push_back(bind_mlp(tape, p.mlps[k]));
  }
  return b;
}

BoundDeepEasi bind(ad::Tape& tape, const DeepEasiParams& p) {
  p.validate();
  BoundDeepEasi b;
  b.shared = p.shared;
  b.depth = p.depth;
  b.nonlinearity = p.nonlinearity;
  for (std::size_t k = 0; k < p.lambdas.size(); ++k) {
    b.lambdas.push_back(tape.leaf(p.lambdas[k]));
    if (p.nonlinearity == EasiNonlinearity::Mlp) b.mlps.push_back(bind_mlp(tape, p.mlps[k]));
  }
  return b;
}

std::vector<double> gather_gradient(const ad::Gradients& g, const BoundDeepRls& b) {
  std::vector<double> out;
  for (std::size_t k = 0; k < b.omegas.size(); ++k) {
    out.push_back(g.wrt(b.omegas[k])(0, 0));
    gather_mlp(out, g, b.mlps[k]);
  }
  return out;
}

std::vector<double> gather_gradient(const ad::Gradients& g, const BoundDeepEasi& b) {
  std::vector<double> out;
  for (std::size_t k = 0; k < b.lambdas.size(); ++k) {
    out.push_back(g.wrt(b.lambdas[k])(0, 0));
    if (b.nonlinearity == EasiNonlinearity::Mlp) gather_mlp(out, g, b.mlps[k]);
  }
  return out;
}

ad::Var mlp_forward(const BoundMlp& mlp, const ad::Var& v) {
  if (mlp.weights.empty()) throw DimensionError("MLP has no layers");
  ad::Var h = v;
  for (std::size_t i = 0; i < mlp.weights.size(); ++i) {
    h = ad::matmul(mlp.weights[i], h) + mlp.biases[i];
    if (i + 1 < mlp.weights.size())
      h = mlp.activation == Activation::Tanh ? ad::tanh(h) : ad::relu(h);
  }
  return h;
}

Matrix UnrolledOutput::y_values() const {
  if (y.empty()) return Matrix(0, 0);
  Matrix out(y.front().rows(), static_cast<Eigen::Index>(y.size()));
  for (std::size_t t = 0; t < y.size(); ++t) out.col(static_cast<Eigen::Index>(t)) = y[t].value();
  return out;
}

namespace {

void check_finite(const ad::Var& v, const char* what, std::size_t layer) {
  if (!v.value().allFinite())
    throw NumericalError(std::string(what) + " became non-finite", layer);
}

}  // namespace

UnrolledOutput deep_rls_forward(ad::Tape& tape, const BoundDeepRls& params, const Matrix& X,
                                const InitSpec& init) {
  if (params.omegas.empty()) throw ConfigError("Deep RLS parameters are not bound");
  const int T = static_cast<int>(X.cols());
  if (!params.shared && T != params.depth)
    throw DimensionError("unshared Deep RLS has depth " + std::to_string(params.depth) +
                         " but the sequence has " + std::to_string(T) + " samples");
  const int l = static_cast<int>(X.rows());
  const int m = static_cast<int>(params.mlps.front().weights.back().rows());
  if (m > l) throw DimensionError("more sources than observations");

  UnrolledOutput out;
  ad::Var W = tape.constant(init.initial_w(l, m));
  ad::Var G = tape.constant(init.initial_g(m));
  for (int k = 0; k < T; ++k) {
    const auto layer = static_cast<std::size_t>(k);
    const ad::Var omega = params.omega_at(k);
    const BoundMlp& g = params.shared ? params.mlps.front() : params.mlps[layer];
    const ad::Var x = tape.constant(Matrix(X.col(k)));

    const ad::Var y = mlp_forward(g, ad::matmul(ad::transpose(W), x));
    const ad::Var h = ad::matmul(G, y);
    const ad::Var denom = omega + ad::dot(y, h);
    if (!(std::abs(denom.scalar()) >= kMinGainDenominator))
      throw NumericalError("Deep RLS gain denominator is (near) zero", layer);
    const ad::Var f = ad::divide(h, denom);
    G = ad::divide(G - ad::outer(f, h), omega);
    const ad::Var e = x - ad::matmul(W, y);
    out.W.push_back(W);
    W = W + ad::outer(e, f);

    check_finite(y, "Deep RLS output", layer);
    check_finite(G, "Deep RLS gain matrix", layer);
    check_finite(W, "Deep RLS separating matrix", layer);
    out.y.push_back(y);
    out.layer_params.push_back(omega.scalar());
  }
  out.final_W = W;
  return out;
}

UnrolledOutput deep_easi_forward(ad::Tape& tape, const BoundDeepEasi& params, const Matrix& X,
                                 const InitSpec& init) {
  if (params.lambdas.empty()) throw ConfigError("Deep EASI parameters are not bound");
  const int T = static_cast<int>(X.cols());
  if (!params.shared && T != params.depth)
    throw DimensionError("unshared Deep EASI has depth " + std::to_string(params.depth) +
                         " but the sequence has " + std::to_string(T) + " samples");
  const int l = static_cast<int>(X.rows());
  int m = l;
  if (params.nonlinearity == EasiNonlinearity::Mlp)
    m = static_cast<int>(params.mlps.front().weights.back().rows());
  if (m > l) throw DimensionError("more sources than observations");

  UnrolledOutput out;
  ad::Var W = tape.constant(init.initial_w(l, m));
  const ad::Var identity = tape.constant(Matrix::Identity(m, m));
  for (int t = 0; t < T; ++t) {
    const auto layer = static_cast<std::size_t>(t);
    const ad::Var lambda = params.lambda_at(t);
    const ad::Var x = tape.constant(Matrix(X.col(t)));

    const ad::Var y = ad::matmul(ad::transpose(W), x);
    ad::Var gy;
    if (params.nonlinearity == EasiNonlinearity::Cubic) {
      gy = ad::cube(y);
    } else {
      gy = mlp_forward(params.shared ? params.mlps.front() : params.mlps[layer], y);
    }
    const ad::Var H = ad::outer(y, y) - identity + ad::outer(gy, y) - ad::outer(y, gy);
    out.W.push_back(W);
    W = W - ad::multiply(lambda, ad::matmul(W, ad::transpose(H)));

    check_finite(y, "Deep EASI output", layer);
    check_finite(W, "Deep EASI separating matrix", layer);
    out.y.push_back(y);
    out.layer_params.push_back(lambda.scalar());
  }
  out.final_W = W;
  return out;
}

Matrix deep_rls_outputs(const DeepRlsParams& p, const Matrix& X, const InitSpec& init) {
  ad::Tape tape;
  const auto bound = bind(tape, p);
  return deep_rls_forward(tape, bound, X, init).y_values();
}

Matrix deep_easi_outputs(const DeepEasiParams& p, const Matrix& X, const InitSpec& init) {
  ad::Tape tape;
  const auto bound = bind(tape, p);
  return deep_easi_forward(tape, bound, X, init).y_values();
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

using nlohmann::ordered_json;

ordered_json mlp_to_json(const MlpParams& mlp) {
  ordered_json j;
  j["activation"] = to_string(mlp.activation);
  ordered_json layers = ordered_json::array();
  for (const auto& L : mlp.layers) {
    ordered_json lj;
    lj["rows"] = L.weight.rows();
    lj["cols"] = L.weight.cols();
    lj["weight"] = std::vector<double>(L.weight.data(), L.weight.data() + L.weight.size());
    lj["bias"] = std::vector<double>(L.bias.data(), L.bias.data() + L.bias.size());
    layers.push_back(std::move(lj));
  }
  j["layers"] = std::move(layers);
  return j;
}

MlpParams mlp_from_json(const nlohmann::json& j) {
  MlpParams mlp;
  mlp.activation = activation_from_string(j.at("activation").get<std::string>());
  for (const auto& lj : j.at("layers")) {
    const auto rows = lj.at("rows").get<Eigen::Index>();
    const auto cols = lj.at("cols").get<Eigen::Index>();
    const auto w = lj.at("weight").get<std::vector<double>>();
    const auto b = lj.at("bias").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(w.size()) != rows * cols ||
        static_cast<Eigen::Index>(b.size()) != rows)
      throw IoError("checkpoint layer arrays do not match their shape");
    MlpLayer L{Eigen::Map<const Matrix>(w.data(), rows, cols),
               Eigen::Map<const Matrix>(b.data(), rows, 1)};
    mlp.layers.push_back(std::move(L));
  }
  return mlp;
}

nlohmann::json parse_checkpoint(const std::string& text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
}

}  // namespace

std::string to_checkpoint_json(const DeepRlsParams& p) {
  ordered_json j;
  j["network"] = "deep_rls";
  j["shared"] = p.shared;
  j["depth"] = p.depth;
  j["omegas"] = p.omegas;
  ordered_json mlps = ordered_json::array();
  for (const auto& mlp : p.mlps) mlps.push_back(mlp_to_json(mlp));
  j["mlps"] = std::move(mlps);
  return j.dump(2) + "\n";
}

std::string to_checkpoint_json(const DeepEasiParams& p) {
  ordered_json j;
  j["network"] = "deep_easi";
  j["shared"] = p.shared;
  j["depth"] = p.depth;
  j["sources"] = p.sources;
  j["nonlinearity"] = p.nonlinearity == EasiNonlinearity::Mlp ? "mlp" : "cubic";
  j["lambdas"] = p.lambdas;
  ordered_json mlps = ordered_json::array();
  for (const auto& mlp : p.mlps) mlps.push_back(mlp_to_json(mlp));
  j["mlps"] = std::move(mlps);
  return j.dump(2) + "\n";
}

std::string checkpoint_network(const std::string& json_text) {
  const auto j = parse_checkpoint(json_text);
  if (!j.contains("network")) throw IoError("checkpoint has no 'network' field");
  return j.at("network").get<std::string>();
}

DeepRlsParams deep_rls_from_checkpoint(const std::string& json_text) {
  const auto j = parse_checkpoint(json_text);
  DeepRlsParams p;
  try {
    if (j.at("network").get<std::string>() != "deep_rls")
      throw IoError("checkpoint is not a Deep RLS network");
    p.shared = j.at("shared").get<bool>();
    p.depth = j.at("depth").get<int>();
    p.omegas = j.at("omegas").get<std::vector<double>>();
    for (const auto& mj : j.at("mlps")) p.mlps.push_back(mlp_from_json(mj));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed Deep RLS checkpoint: ") + e.what());
  }
  p.validate();
  return p;
}

DeepEasiParams deep_easi_from_checkpoint(const std::string& json_text) {
  const auto j = parse_checkpoint(json_text);
  DeepEasiParams p;
  try {
    if (j.at("network").get<std::string>() != "deep_easi")
      throw IoError("checkpoint is not a Deep EASI network");
    p.shared = j.at("shared").get<bool>();
    p.depth = j.at("depth").get<int>();
    p.sources = j.at("sources").get<int>();
    const auto nl = j.at("nonlinearity").get<std::string>();
    if (nl != "mlp" && nl != "cubic") throw IoError("unknown Deep EASI nonlinearity " + nl);
    p.nonlinearity = nl == "mlp" ? EasiNonlinearity::Mlp : EasiNonlinearity::Cubic;
    p.lambdas = j.at("lambdas").get<std::vector<double>>();
    for (const auto& mj : j.at("mlps")) p.mlps.push_back(mlp_from_json(mj));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed Deep EASI checkpoint: ") + e.what());
  }
  p.validate();
  return p;
}

}  // namespace deepsep

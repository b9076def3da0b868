#include "deepsep/model.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "deepsep/csv.hpp"
#include "deepsep/error.hpp"

namespace deepsep {

MixtureInstance generate(const GeneratorConfig& cfg) {
  if (cfg.m < 1 || cfg.l < 1) throw DimensionError("m and l must be positive");
  if (cfg.m > cfg.l) throw DimensionError("source count m exceeds observation count l");
  if (cfg.T < 1) throw DimensionError("sequence length T must be at least 1");
  if (!(cfg.noise_var >= 0.0)) throw ConfigError("noise_var must be non-negative");
  if (cfg.source_dist == SourceDistribution::Custom && !cfg.custom_sampler)
    throw ConfigError("custom source distribution requires a sampler");

  Rng rng(cfg.seed);
  MixtureInstance inst;
  inst.noise_var = cfg.noise_var;
  inst.seed = cfg.seed;

  inst.A.resize(cfg.l, cfg.m);
  for (int r = 0; r < cfg.l; ++r)
    for (int c = 0; c < cfg.m; ++c) inst.A(r, c) = rng.normal();

  inst.S.resize(cfg.m, cfg.T);
  for (int t = 0; t < cfg.T; ++t) {
    for (int i = 0; i < cfg.m; ++i) {
      switch (cfg.source_dist) {
        case SourceDistribution::UniformZeroMean:
          inst.S(i, t) = rng.uniform01() - 0.5;
          break;
        case SourceDistribution::Uniform01:
          inst.S(i, t) = rng.uniform01();
          break;
        case SourceDistribution::Custom:
          inst.S(i, t) = cfg.custom_sampler(rng);
          break;
      }
    }
  }

  inst.X = inst.A * inst.S;
  if (cfg.noise_var > 0.0) {
    const double sigma = std::sqrt(cfg.noise_var);
    for (int t = 0; t < cfg.T; ++t)
      for (int r = 0; r < cfg.l; ++r) inst.X(r, t) += sigma * rng.normal();
  }
  return inst;
}

double empirical_kurtosis(std::span<const double> signal) {
  if (signal.size() < 4) throw DimensionError("kurtosis needs at least 4 samples");
  const double n = static_cast<double>(signal.size());
  double mean = 0.0;
  for (double v : signal) mean += v;
  mean /= n;
  double m2 = 0.0;
  double m4 = 0.0;
  for (double v : signal) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m4 += d2 * d2;
  }
  m2 /= n;
  m4 /= n;
  // Relative spread below 1e-9 is indistinguishable from a constant signal.
  const double scale = std::max(std::abs(mean), 1e-300);
  if (m2 == 0.0 || std::sqrt(m2) <= 1e-9 * scale)
    throw DegenerateSignalError("signal has (numerically) zero variance");
  return m4 / (m2 * m2) - 3.0;
}

std::string to_string(SourceDistribution d) {
  switch (d) {
    case SourceDistribution::UniformZeroMean:
      return "uniform_zero_mean";
    case SourceDistribution::Uniform01:
      return "uniform01";
    case SourceDistribution::Custom:
      return "custom";
  }
  return "unknown";
}

SourceDistribution source_distribution_from_string(const std::string& name) {
  if (name == "uniform_zero_mean") return SourceDistribution::UniformZeroMean;
  if (name == "uniform01") return SourceDistribution::Uniform01;
  if (name == "custom") return SourceDistribution::Custom;
  throw ConfigError("unknown source distribution '" + name + "'");
}

void save_instance(const std::filesystem::path& dir, const MixtureInstance& inst) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_matrix_csv(dir / "S.csv", inst.S);
  write_matrix_csv(dir / "A.csv", inst.A);
  write_matrix_csv(dir / "X.csv", inst.X);
  nlohmann::ordered_json meta;
  meta["m"] = inst.m();
  meta["l"] = inst.l();
  meta["T"] = inst.T();
  meta["noise_var"] = inst.noise_var;
  meta["seed"] = inst.seed;
  write_text(dir / "meta.json", meta.dump(2) + "\n");
}

MixtureInstance load_instance(const std::filesystem::path& dir) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_text(dir / "meta.json"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad meta.json in " + dir.string() + ": " + e.what());
  }
  MixtureInstance inst;
  inst.S = read_matrix_csv(dir / "S.csv");
  inst.A = read_matrix_csv(dir / "A.csv");
  inst.X = read_matrix_csv(dir / "X.csv");
  try {
    inst.noise_var = meta.at("noise_var").get<double>();
    inst.seed = meta.at("seed").get<std::uint64_t>();
    const int m = meta.at("m").get<int>();
    const int l = meta.at("l").get<int>();
    const int T = meta.at("T").get<int>();
    // A 0-column CSV reads back as an empty matrix; restore the row count.
    if (T == 0) {
      inst.S.resize(m, 0);
      inst.X.resize(l, 0);
    }
    if (inst.m() != m || inst.l() != l || inst.T() != T || inst.A.rows() != l ||
        inst.A.cols() != m)
      throw IoError("instance files disagree with meta.json in " + dir.string());
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad meta.json in " + dir.string() + ": " + e.what());
  }
  return inst;
}

}  // namespace deepsep

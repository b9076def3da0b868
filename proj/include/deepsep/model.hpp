#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>

#include "deepsep/rng.hpp"
#include "deepsep/types.hpp"

namespace deepsep {

enum class SourceDistribution {
  UniformZeroMean,  // U(-0.5, 0.5)
  Uniform01,        // U(0, 1), the literal non-centred variant
  Custom,
};

struct GeneratorConfig {
  int m = 3;
  int l = 3;
  int T = 300;
  SourceDistribution source_dist = SourceDistribution::UniformZeroMean;
  // Used only with SourceDistribution::Custom; draws one source sample.
  std::function<double(Rng&)> custom_sampler;
  double noise_var = 1e-3;
  std::uint64_t seed = 0;
};

// One sequence of the linear mixture x(t) = A s(t) + n(t).
// Column t of S and X holds s(t) and x(t).
struct MixtureInstance {
  Matrix S;  // m x T
  Matrix A;  // l x m
  Matrix X;  // l x T
  double noise_var = 0.0;
  std::uint64_t seed = 0;

  int m() const { return static_cast<int>(S.rows()); }
  int l() const { return static_cast<int>(X.rows()); }
  int T() const { return static_cast<int>(X.cols()); }
};

// Draw order is fixed: A row-major, then S column by column, then the
// noise column by column (skipped entirely when noise_var == 0).
MixtureInstance generate(const GeneratorConfig& cfg);

// Excess kurtosis E[(s-mu)^4] / sigma^4 - 3 with population moments.
double empirical_kurtosis(std::span<const double> signal);

std::string to_string(SourceDistribution d);
SourceDistribution source_distribution_from_string(const std::string& name);

// Directory layout: S.csv, A.csv, X.csv and meta.json.
void save_instance(const std::filesystem::path& dir, const MixtureInstance& inst);
MixtureInstance load_instance(const std::filesystem::path& dir);

}  // namespace deepsep

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "deepsep/baseline.hpp"
#include "deepsep/eval.hpp"
#include "deepsep/model.hpp"
#include "deepsep/train.hpp"
#include "deepsep/unrolled.hpp"

namespace deepsep::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitIo = 4;

enum class Algorithm { Rls, Easi, DeepRls, DeepEasi };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& name);

struct DatasetSizes {
  int train = 0;
  int test = 0;
};

struct ExperimentConfig {
  GeneratorConfig generator;
  DatasetSizes dataset;
  std::optional<std::filesystem::path> dataset_dir;
  Algorithm algorithm = Algorithm::Rls;
  std::string label;  // curve column name; defaults to the algorithm id
  RlsConfig rls;
  EasiConfig easi;
  DeepRlsSpec deep_rls;
  DeepEasiSpec deep_easi;
  TrainConfig train;
  CurveMode curve_mode = CurveMode::Cumulative;
  std::optional<std::filesystem::path> checkpoint;  // network to evaluate
  std::filesystem::path output_dir;

  // Fully resolved form, defaults included.
  nlohmann::ordered_json to_json() const;
};

// Parses a config document; unknown keys and bad values raise ConfigError.
// A relative output_dir is placed under `output_root` when one is given.
ExperimentConfig parse_config(const nlohmann::json& doc,
                              const std::optional<std::filesystem::path>& output_root = {});

// Applies one "dotted.key=value" override. The value is read as JSON when
// it parses, otherwise as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides,
                             const std::optional<std::filesystem::path>& output_root);

// Seed of instance `index` in split 0 (train) or 1 (test).
std::uint64_t instance_seed(std::uint64_t base, int split, int index);

std::vector<MixtureInstance> make_split(const ExperimentConfig& cfg, int split);

struct CommandResult {
  std::filesystem::path output_dir;
  std::vector<std::filesystem::path> files;
};

CommandResult cmd_gen(const ExperimentConfig& cfg);
CommandResult cmd_baseline(const ExperimentConfig& cfg, bool verify, std::ostream& report);
CommandResult cmd_train(const ExperimentConfig& cfg, bool verify, std::ostream& report);
CommandResult cmd_eval(const ExperimentConfig& cfg);

// Merges curve tables column-wise; all inputs must have the same length.
CurveTable merge_curves(const std::vector<CurveTable>& curves);

// Entry point; returns the process exit code.
int run(int argc, char** argv);

}  // namespace deepsep::cli

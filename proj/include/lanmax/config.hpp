#pragma once

// Experiment configuration in a plain-text INI-style format:
//
//   # comment
//   [section]
//   key = value
//   list_key = 0.1, 0.05, 0
//
// Sections: experiment, dataset, model, inner, outer, energy, eval, pareto,
// sweep, sensitivity. Every key is optional; missing keys take the defaults
// below. Unknown sections or keys and out-of-range values are errors that name
// the offending line.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lanmax/dataset.hpp"
#include "lanmax/eval.hpp"
#include "lanmax/net.hpp"
#include "lanmax/outer.hpp"

namespace lanmax {

enum class ExperimentKind { train, uniform_sweep, sensitivity, pareto };
enum class DataSource { blobs, rings, idx };
enum class Architecture { mlp, conv };

struct DatasetConfig {
  DataSource source = DataSource::blobs;
  SyntheticSpec synthetic;
  IdxSpec idx;
  bool operator==(const DatasetConfig&) const = default;
};

struct ModelConfig {
  Architecture arch = Architecture::mlp;
  std::vector<std::size_t> hidden = {256, 256};  // widths at rho = 1
  std::vector<std::size_t> conv_channels = {8};   // conv arch only
  std::size_t kernel = 3;
  double rho = 1.0;
  bool bias = true;
  bool fan_in_scale = true;  // scale each linear map by 1/sqrt(fan_in)
  double init_range = 0.1;
  bool operator==(const ModelConfig&) const = default;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::train;
  std::vector<std::uint64_t> seeds = {1};
  int threads = 1;

  DatasetConfig dataset;
  ModelConfig model;
  InnerOptConfig inner;
  OuterConfig outer{.alpha = 0.001};
  EnergyModel energy;  // layer_sizes unused here
  McOptions eval;

  std::vector<double> alphas = {0.1, 0.05, 0.03, 0.02, 0.01, 0.001, 0.0};
  bool uniform_baseline = true;
  std::vector<double> baseline_rates = {0.0, 1e-4, 1e-3, 1e-2, 5e-2, 1e-1};

  std::vector<double> sweep_train_rates = {0.0, 1e-4, 1e-3, 1e-2, 5e-2, 1e-1};
  std::vector<double> sweep_eval_rates = {0.0, 1e-4, 1e-3, 1e-2, 5e-2, 1e-1};

  std::filesystem::path checkpoint;
  double sensitivity_p = 0.01;
  int sensitivity_trials = 20;

  bool operator==(const ExperimentConfig&) const = default;
};

std::string to_string(ExperimentKind k);

// Throws ParseError with "<path>:<line>: ..." messages.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {},
                              const std::string& source_name = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

// Emits every key, so parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& cfg);

// Whole-config checks that do not belong to a single key (s <= epochs,
// referenced files exist, ...). Called by parse_config.
void validate_config(const ExperimentConfig& cfg);

}  // namespace lanmax

#pragma once

// Monte-Carlo evaluation of networks whose weights are read from faulty memory.

#include <cstddef>
#include <functional>
#include <vector>

#include "lanmax/dataset.hpp"
#include "lanmax/faultmem.hpp"
#include "lanmax/net.hpp"

namespace lanmax {

struct McOptions {
  // Stop once the full confidence interval is at most this wide (percentage points).
  double target_interval = 5.0;
  double confidence = 0.95;
  int min_trials = 5;
  int max_trials = 200;

  void validate() const;
  bool operator==(const McOptions&) const = default;
};

struct AccuracyEstimate {
  double mean = 0.0;          // percent
  double ci_halfwidth = 0.0;  // percent
  double confidence = 0.95;
  int trials = 0;
  bool converged = false;
};

// Two-sided standard normal critical value, e.g. 1.959964 for 0.95.
double normal_critical_value(double confidence);

// Runs `trial` (one accuracy sample in percent per call) until the normal
// approximation CI over trial means is narrow enough or max_trials is hit.
AccuracyEstimate estimate_until_converged(const std::function<double()>& trial,
                                          const McOptions& opts);

// Test accuracy in percent of one fixed set of weights.
double score_accuracy(const BinaryNetwork& net, const LayerSigns& weights, const Dataset& test);

// One trial = one fresh corruption of every layer at p plus a full pass over
// the test set. An all-zero p is deterministic: one trial, zero half-width.
AccuracyEstimate mc_accuracy(const BinaryNetwork& net, const NoiseVector& p, const Dataset& test,
                             const McOptions& opts, Rng& rng);

using UniformTrainer = std::function<BinaryNetwork(double p_t)>;

struct SweepMatrix {
  std::vector<double> train_rates;
  std::vector<double> eval_rates;
  // cells[i][j]: network trained at train_rates[i], evaluated at eval_rates[j].
  std::vector<std::vector<AccuracyEstimate>> cells;
};

SweepMatrix uniform_noise_sweep(const std::vector<double>& train_rates,
                                const std::vector<double>& eval_rates,
                                const UniformTrainer& trainer, const Dataset& test,
                                const McOptions& opts, Rng& rng);

struct SensitivityResult {
  std::size_t layer = 0;  // zero-based
  std::vector<double> samples;
  AccuracyEstimate baseline;
};

// Accuracy samples with the signs of `layer` replaced by i.i.d. uniform +/-1
// values in every trial, the other layers corrupted at p_uniform.
std::vector<double> randomized_layer_accuracy(const BinaryNetwork& net, double p_uniform,
                                              std::size_t layer, int trials, const Dataset& test,
                                              Rng& rng);

// randomized_layer_accuracy plus the mc_accuracy baseline at p_uniform.
// Throws std::out_of_range for an invalid layer and ConfigurationError for
// fewer than 10 trials.
SensitivityResult layer_sensitivity(const BinaryNetwork& net, double p_uniform, std::size_t layer,
                                    int trials, const Dataset& test, const McOptions& opts,
                                    Rng& rng);

}  // namespace lanmax

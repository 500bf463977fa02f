#include "lanmax/eval.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <stdexcept>
#include <string>

#include "lanmax/errors.hpp"

namespace lanmax {

namespace {

constexpr std::size_t kEvalChunk = 512;

// Welford running mean / variance.
struct RunningStats {
  int n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void push(double x) {
    ++n;
    const double d = x - mean;
    mean += d / n;
    m2 += d * (x - mean);
  }
  double sample_variance() const { return n > 1 ? m2 / (n - 1) : 0.0; }
};

}  // namespace

void McOptions::validate() const {
  if (!(target_interval > 0.0)) throw ConfigurationError("target interval must be > 0");
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw ConfigurationError("confidence must be in (0, 1)");
  }
  if (min_trials < 2) throw ConfigurationError("min_trials must be >= 2");
  if (max_trials < min_trials) throw ConfigurationError("max_trials must be >= min_trials");
}

double normal_critical_value(double confidence) {
  const boost::math::normal_distribution<double> n01;
  return boost::math::quantile(n01, 0.5 + confidence / 2.0);
}

AccuracyEstimate estimate_until_converged(const std::function<double()>& trial,
                                          const McOptions& opts) {
  opts.validate();
  const double z = normal_critical_value(opts.confidence);
  RunningStats stats;
  AccuracyEstimate est;
  est.confidence = opts.confidence;
  while (stats.n < opts.max_trials) {
    stats.push(trial());
    if (stats.n < 2) continue;
    est.ci_halfwidth = z * std::sqrt(stats.sample_variance() / stats.n);
    if (stats.n >= opts.min_trials && 2.0 * est.ci_halfwidth <= opts.target_interval) {
      est.converged = true;
      break;
    }
  }
  est.mean = stats.mean;
  est.trials = stats.n;
  return est;
}

double score_accuracy(const BinaryNetwork& net, const LayerSigns& weights, const Dataset& test) {
  if (test.size() == 0) throw ConfigurationError("empty test set");
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < test.size(); start += kEvalChunk) {
    const std::size_t end = std::min(test.size(), start + kEvalChunk);
    idx.resize(end - start);
    for (std::size_t i = start; i < end; ++i) idx[i - start] = i;
    const Matrix logits = forward(net, weights, test.gather(idx));
    correct += count_correct(logits, test.gather_labels(idx));
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(test.size());
}

AccuracyEstimate mc_accuracy(const BinaryNetwork& net, const NoiseVector& p, const Dataset& test,
                             const McOptions& opts, Rng& rng) {
  opts.validate();
  if (p.size() != net.num_layers()) {
    throw ConfigurationError("mc_accuracy: noise vector length does not match network");
  }
  const LayerSigns binary = net.binary_weights();
  if (p.all_zero()) {
    AccuracyEstimate est;
    est.mean = score_accuracy(net, binary, test);
    est.confidence = opts.confidence;
    est.trials = 1;
    est.converged = true;
    return est;
  }
  LayerSigns corrupted;
  return estimate_until_converged(
      [&] {
        corrupt_weights_into(binary, p, rng, corrupted);
        return score_accuracy(net, corrupted, test);
      },
      opts);
}

SweepMatrix uniform_noise_sweep(const std::vector<double>& train_rates,
                                const std::vector<double>& eval_rates,
                                const UniformTrainer& trainer, const Dataset& test,
                                const McOptions& opts, Rng& rng) {
  if (train_rates.empty() || eval_rates.empty()) {
    throw ConfigurationError("uniform sweep needs non-empty rate lists");
  }
  SweepMatrix m{train_rates, eval_rates, {}};
  for (double pt : train_rates) {
    const BinaryNetwork net = trainer(pt);
    std::vector<AccuracyEstimate> row;
    for (double pe : eval_rates) {
      row.push_back(mc_accuracy(net, NoiseVector::uniform(net.num_layers(), pe), test, opts, rng));
    }
    m.cells.push_back(std::move(row));
  }
  return m;
}

std::vector<double> randomized_layer_accuracy(const BinaryNetwork& net, double p_uniform,
                                              std::size_t layer, int trials, const Dataset& test,
                                              Rng& rng) {
  if (layer >= net.num_layers()) {
    throw std::out_of_range("layer " + std::to_string(layer + 1) + " outside 1.." +
                            std::to_string(net.num_layers()));
  }
  const NoiseVector p = NoiseVector::uniform(net.num_layers(), p_uniform);
  const LayerSigns binary = net.binary_weights();
  LayerSigns corrupted;
  std::bernoulli_distribution coin(0.5);
  std::vector<double> samples;
  for (int t = 0; t < trials; ++t) {
    corrupt_weights_into(binary, p, rng, corrupted);
    for (Sign& w : corrupted[layer]) w = coin(rng) ? Sign{1} : Sign{-1};
    samples.push_back(score_accuracy(net, corrupted, test));
  }
  return samples;
}

SensitivityResult layer_sensitivity(const BinaryNetwork& net, double p_uniform, std::size_t layer,
                                    int trials, const Dataset& test, const McOptions& opts,
                                    Rng& rng) {
  if (layer >= net.num_layers()) {
    throw std::out_of_range("layer_sensitivity: layer " + std::to_string(layer + 1) +
                            " outside 1.." + std::to_string(net.num_layers()));
  }
  if (trials < 10) throw ConfigurationError("layer_sensitivity needs >= 10 trials");
  SensitivityResult res;
  res.layer = layer;
  res.baseline = mc_accuracy(net, NoiseVector::uniform(net.num_layers(), p_uniform), test, opts, rng);
  res.samples = randomized_layer_accuracy(net, p_uniform, layer, trials, test, rng);
  return res;
}

}  // namespace lanmax

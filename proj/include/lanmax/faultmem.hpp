#pragma once

// Unreliable weight memory: per-bit binary symmetric channel faults and the
// exponential energy/reliability law eta(p) = -ln(p) / a.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace lanmax {

using Rng = std::mt19937_64;

// A single binarized weight, always -1 or +1.
using Sign = std::int8_t;
using SignArray = std::vector<Sign>;
// One SignArray per weight-bearing layer.
using LayerSigns = std::vector<SignArray>;

inline constexpr double kDefaultPMin = 1e-4;
inline constexpr double kPMax = 0.5;

// Per-bit read fault probability of one memory configuration.
class FaultRate {
 public:
  // Throws DomainError unless p_min <= value <= 0.5.
  explicit FaultRate(double value, double p_min = kDefaultPMin);
  double value() const { return value_; }

 private:
  double value_;
};

// Per-layer fault probabilities, one entry per weight-bearing layer.
// Zero entries are allowed so that reliable baselines can be represented;
// the optimizer keeps its own vector inside [p_min, p_max] via clamp().
class NoiseVector {
 public:
  NoiseVector() = default;
  explicit NoiseVector(std::vector<double> rates);
  static NoiseVector uniform(std::size_t layers, double p);

  std::size_t size() const { return rates_.size(); }
  double operator[](std::size_t l) const { return rates_[l]; }
  double& operator[](std::size_t l) { return rates_[l]; }
  const std::vector<double>& rates() const { return rates_; }

  bool all_zero() const;
  bool within(double lo, double hi) const;
  void clamp(double lo, double hi);
  double sum() const;

  bool operator==(const NoiseVector&) const = default;

 private:
  std::vector<double> rates_;
};

struct EnergyModel {
  double a = 12.8;
  int zeta = 1;
  std::vector<std::size_t> layer_sizes;
  double reliable_eta = 1.0;

  // Throws ConfigurationError when a <= 0, zeta < 1 or any n_l == 0.
  void validate() const;
  std::size_t total_parameters() const;
  bool operator==(const EnergyModel&) const = default;
};

struct NetworkEnergy {
  double absolute = 0.0;
  double normalized = 0.0;
};

// Energy per bit. p == 0 exactly is the reliable memory and costs
// model.reliable_eta; otherwise -ln(p)/a. Throws DomainError outside [0, 0.5].
double eta(double p, const EnergyModel& model);

// Reads one stored bit through BSC(p).
Sign bsc_sample(Sign bit, double p, Rng& rng);

// Passes every weight of layer l through BSC(p[l]). Fresh faults per call.
LayerSigns corrupt_weights(const LayerSigns& weights, const NoiseVector& p, Rng& rng);

// Same as corrupt_weights, writing into a preallocated output of matching shape.
void corrupt_weights_into(const LayerSigns& weights, const NoiseVector& p, Rng& rng,
                          LayerSigns& out);

// E(p) = zeta * sum_l eta(p_l) n_l, normalized by the reliable one-bit network
// of the same architecture (sum_l n_l).
NetworkEnergy network_energy(const NoiseVector& p, const EnergyModel& model);

}  // namespace lanmax

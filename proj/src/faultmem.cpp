#include "lanmax/faultmem.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "lanmax/errors.hpp"

namespace lanmax {

FaultRate::FaultRate(double value, double p_min) : value_(value) {
  if (!(value >= p_min && value <= kPMax)) {
    throw DomainError("fault rate " + std::to_string(value) + " outside [" +
                      std::to_string(p_min) + ", 0.5]");
  }
}

NoiseVector::NoiseVector(std::vector<double> rates) : rates_(std::move(rates)) {
  for (double p : rates_) {
    if (!(p >= 0.0 && p <= kPMax)) {
      throw DomainError("noise level " + std::to_string(p) + " outside [0, 0.5]");
    }
  }
}

NoiseVector NoiseVector::uniform(std::size_t layers, double p) {
  return NoiseVector(std::vector<double>(layers, p));
}

bool NoiseVector::all_zero() const {
  return std::all_of(rates_.begin(), rates_.end(), [](double p) { return p == 0.0; });
}

bool NoiseVector::within(double lo, double hi) const {
  return std::all_of(rates_.begin(), rates_.end(),
                     [&](double p) { return p >= lo && p <= hi; });
}

void NoiseVector::clamp(double lo, double hi) {
  for (double& p : rates_) p = std::clamp(p, lo, hi);
}

double NoiseVector::sum() const { return std::accumulate(rates_.begin(), rates_.end(), 0.0); }

void EnergyModel::validate() const {
  if (!(a > 0.0)) throw ConfigurationError("energy model: a must be > 0");
  if (zeta < 1) throw ConfigurationError("energy model: zeta must be >= 1");
  for (std::size_t n : layer_sizes) {
    if (n == 0) throw ConfigurationError("energy model: layer with zero parameters");
  }
}

std::size_t EnergyModel::total_parameters() const {
  return std::accumulate(layer_sizes.begin(), layer_sizes.end(), std::size_t{0});
}

double eta(double p, const EnergyModel& model) {
  if (!(p >= 0.0 && p <= kPMax)) {
    throw DomainError("eta: p = " + std::to_string(p) + " outside [0, 0.5]");
  }
  if (p == 0.0) return model.reliable_eta;
  return -std::log(p) / model.a;
}

Sign bsc_sample(Sign bit, double p, Rng& rng) {
  std::bernoulli_distribution flip(p);
  return flip(rng) ? static_cast<Sign>(-bit) : bit;
}

void corrupt_weights_into(const LayerSigns& weights, const NoiseVector& p, Rng& rng,
                          LayerSigns& out) {
  if (weights.size() != p.size()) {
    throw ConfigurationError("corrupt_weights: " + std::to_string(weights.size()) +
                             " layers but noise vector of length " +
                             std::to_string(p.size()));
  }
  out.resize(weights.size());
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const SignArray& src = weights[l];
    SignArray& dst = out[l];
    dst.assign(src.begin(), src.end());
    const double rate = p[l];
    if (rate == 0.0) continue;
    if (!(rate > 0.0 && rate <= kPMax)) {
      throw DomainError("corrupt_weights: p = " + std::to_string(rate));
    }
    // Jump directly between flipped positions; gaps are geometric(rate).
    std::geometric_distribution<std::size_t> gap(rate);
    for (std::size_t i = gap(rng); i < dst.size(); i += gap(rng) + 1) {
      dst[i] = static_cast<Sign>(-dst[i]);
    }
  }
}

LayerSigns corrupt_weights(const LayerSigns& weights, const NoiseVector& p, Rng& rng) {
  LayerSigns out;
  corrupt_weights_into(weights, p, rng, out);
  return out;
}

NetworkEnergy network_energy(const NoiseVector& p, const EnergyModel& model) {
  model.validate();
  if (p.size() != model.layer_sizes.size()) {
    throw ConfigurationError("network_energy: noise vector of length " +
                             std::to_string(p.size()) + " for " +
                             std::to_string(model.layer_sizes.size()) + " layers");
  }
  double sum = 0.0;
  for (std::size_t l = 0; l < p.size(); ++l) {
    sum += eta(p[l], model) * static_cast<double>(model.layer_sizes[l]);
  }
  NetworkEnergy e;
  e.absolute = static_cast<double>(model.zeta) * sum;
  e.normalized = e.absolute / static_cast<double>(model.total_parameters());
  return e;
}

}  // namespace lanmax

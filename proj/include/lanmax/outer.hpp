#pragma once

// Layerwise noise maximisation: the outer optimizer over per-layer fault rates.
//
// Every minibatch of an active epoch runs the network at a randomly perturbed
// noise vector and records the surrogate outer loss there. At the end of the
// epoch a least-squares fit of those records against the applied noise levels
// gives the outer gradient, which is normalized and used for one momentum step
// on the noise vector.

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "lanmax/dataset.hpp"
#include "lanmax/faultmem.hpp"
#include "lanmax/net.hpp"

namespace lanmax {

struct OuterConfig {
  double alpha = 0.0;
  double lambda = 5e-4;
  double h = 0.01;
  int s = 160;  // last epoch with outer updates; 0 disables the outer loop
  double beta = 0.2;
  double p_min = kDefaultPMin;
  double p_max = kPMax;
  double p_init = 0.01;

  void validate(int total_epochs) const;
  bool operator==(const OuterConfig&) const = default;
};

struct LossRecord {
  NoiseVector perturbed_p;
  double surrogate = 0.0;
};

struct EpochLog {
  std::vector<LossRecord> records;
};

struct OuterState {
  NoiseVector p;
  double best_loss = std::numeric_limits<double>::infinity();
  std::vector<double> velocity;
  int epoch = 1;

  static OuterState initial(std::size_t layers, const OuterConfig& cfg);
};

// Offsets every coordinate by one of {-h, 0, +h} (uniformly) and clamps the
// result to [p_min, p_max].
NoiseVector perturb(const NoiseVector& p, double h, Rng& rng, double p_min, double p_max);

// A_hat / A_star + alpha * sqrt(E_norm(p)) + lambda * sum_l p_l.
double surrogate_loss(double a_hat, double a_star, const NoiseVector& p, const OuterConfig& cfg,
                      const EnergyModel& energy);

// Least-squares slopes of surrogate ~ b0 + sum_l b_l p_l over the records.
// Regressors are centred, so columns that never vary get a zero slope; the
// remaining rank deficiency is resolved by the minimum-norm solution.
// Throws InsufficientDataError when there are fewer than L + 2 records.
std::vector<double> ols_gradient(const EpochLog& log);

inline constexpr double kGradientNormFloor = 1e-12;

// g / ||g||, or g unchanged when ||g|| <= 1e-12 (the caller skips the update).
std::vector<double> normalize_gradient(std::span<const double> g);

// Nesterov step on p with momentum beta at learning rate `lr`, clamped to
// [p_min, p_max]. The velocity buffer lives in `state` across epochs.
void outer_step(OuterState& state, std::span<const double> g_unit, const OuterConfig& cfg, double lr);

enum class OuterUpdate { applied, skipped_degenerate, skipped_insufficient, inactive };

std::string to_string(OuterUpdate u);

struct EpochRecord {
  int epoch = 0;
  NoiseVector p;  // after this epoch's outer update
  double energy = 0.0;
  double mean_loss = 0.0;
  double best_loss = 0.0;
  std::vector<double> slopes;  // raw OLS slopes, empty when no fit was made
  double gradient_norm = 0.0;  // norm of the applied normalized gradient (1 or 0)
  double lr = 0.0;
  OuterUpdate update = OuterUpdate::inactive;
};

struct TrainResult {
  NoiseVector p;
  BinaryNetwork net;
  std::vector<EpochRecord> epochs;
  std::vector<double> best_loss_trace;  // A_star after every minibatch
  std::vector<NoiseVector> applied_noise;  // noise actually used for every minibatch
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Joint training of weights and per-layer noise. `energy.layer_sizes` is
// filled from the network; `energy.a` and `energy.zeta` are used as given.
TrainResult train_lanmax(const Dataset& train, BinaryNetwork net, const InnerOptConfig& inner,
                         const OuterConfig& outer, EnergyModel energy, Rng& rng,
                         const EpochCallback& on_epoch = {});

// Training under a fixed uniform fault rate p_t (0 allowed).
TrainResult train_uniform(const Dataset& train, BinaryNetwork net, const InnerOptConfig& inner,
                          double p_t, Rng& rng, const EpochCallback& on_epoch = {});

}  // namespace lanmax

#include "lanmax/outer.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "lanmax/errors.hpp"

namespace lanmax {

void OuterConfig::validate(int total_epochs) const {
  if (!(alpha >= 0.0)) throw ConfigurationError("alpha must be >= 0");
  if (!(lambda >= 0.0)) throw ConfigurationError("lambda must be >= 0");
  if (!(h >= 0.0)) throw ConfigurationError("h must be >= 0");
  if (!(beta >= 0.0 && beta < 1.0)) throw ConfigurationError("beta must be in [0, 1)");
  if (!(p_min > 0.0 && p_min <= p_init && p_init <= p_max && p_max <= kPMax)) {
    throw ConfigurationError("need 0 < p_min <= p_init <= p_max <= 0.5");
  }
  if (s < 0 || s > total_epochs) {
    throw ConfigurationError("s must be in [0, epochs] (got " + std::to_string(s) + ")");
  }
}

OuterState OuterState::initial(std::size_t layers, const OuterConfig& cfg) {
  OuterState st;
  st.p = NoiseVector::uniform(layers, cfg.p_init);
  st.velocity.assign(layers, 0.0);
  return st;
}

NoiseVector perturb(const NoiseVector& p, double h, Rng& rng, double p_min, double p_max) {
  std::uniform_int_distribution<int> offset(-1, 1);
  std::vector<double> out(p.size());
  for (std::size_t l = 0; l < p.size(); ++l) {
    out[l] = std::clamp(p[l] + h * offset(rng), p_min, p_max);
  }
  return NoiseVector(std::move(out));
}

double surrogate_loss(double a_hat, double a_star, const NoiseVector& p, const OuterConfig& cfg,
                      const EnergyModel& energy) {
  if (!(a_star > 0.0)) {
    throw NumericError("surrogate loss: best minibatch loss must be > 0 (got " +
                       std::to_string(a_star) + ")");
  }
  const double e = network_energy(p, energy).normalized;
  return a_hat / a_star + cfg.alpha * std::sqrt(e) + cfg.lambda * p.sum();
}

std::vector<double> ols_gradient(const EpochLog& log) {
  const std::size_t m = log.records.size();
  if (m == 0) throw InsufficientDataError("ols_gradient: empty epoch log");
  const std::size_t layers = log.records.front().perturbed_p.size();
  if (m < layers + 2) {
    throw InsufficientDataError("ols_gradient: " + std::to_string(m) + " records for " +
                                std::to_string(layers) + " layers (need >= " +
                                std::to_string(layers + 2) + ")");
  }
  Eigen::MatrixXd x(m, layers);
  Eigen::VectorXd y(m);
  for (std::size_t k = 0; k < m; ++k) {
    const LossRecord& r = log.records[k];
    if (r.perturbed_p.size() != layers) {
      throw ConfigurationError("ols_gradient: records have differing layer counts");
    }
    for (std::size_t l = 0; l < layers; ++l) x(k, l) = r.perturbed_p[l];
    y(k) = r.surrogate;
  }
  // Centring absorbs the intercept.
  x.rowwise() -= x.colwise().mean();
  y.array() -= y.mean();
  // A constant column centres to rounding residue; pin it to exactly zero so
  // the minimum-norm solve gives it a zero slope.
  for (Eigen::Index l = 0; l < x.cols(); ++l) {
    const auto col = x.col(l);
    if (col.cwiseAbs().maxCoeff() <= 1e-14 * (1.0 + std::abs(col.mean()))) x.col(l).setZero();
  }
  std::vector<double> slopes(layers, 0.0);
  if (x.isZero(0.0)) return slopes;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(x);
  const Eigen::VectorXd b = cod.solve(y);
  std::copy(b.data(), b.data() + b.size(), slopes.begin());
  return slopes;
}

std::vector<double> normalize_gradient(std::span<const double> g) {
  double sq = 0.0;
  for (double v : g) sq += v * v;
  const double norm = std::sqrt(sq);
  std::vector<double> out(g.begin(), g.end());
  if (!(norm > kGradientNormFloor)) return out;
  for (double& v : out) v /= norm;
  return out;
}

void outer_step(OuterState& state, std::span<const double> g_unit, const OuterConfig& cfg,
                double lr) {
  if (g_unit.size() != state.p.size() || state.velocity.size() != state.p.size()) {
    throw ConfigurationError("outer_step: gradient/velocity size does not match noise vector");
  }
  std::vector<double> p = state.p.rates();
  nesterov_step(p, g_unit, state.velocity, lr, cfg.beta, 0.0);
  for (double& v : p) v = std::clamp(v, cfg.p_min, cfg.p_max);
  state.p = NoiseVector(std::move(p));
}

std::string to_string(OuterUpdate u) {
  switch (u) {
    case OuterUpdate::applied: return "applied";
    case OuterUpdate::skipped_degenerate: return "skipped_degenerate";
    case OuterUpdate::skipped_insufficient: return "skipped_insufficient";
    case OuterUpdate::inactive: return "inactive";
  }
  return "unknown";
}

namespace {

std::string describe(const NoiseVector& p) {
  std::ostringstream os;
  os << '[';
  for (std::size_t l = 0; l < p.size(); ++l) os << (l ? ", " : "") << p[l];
  os << ']';
  return os.str();
}

// Shared loop. Outer updates run for epochs 1..outer_epochs; afterwards (or
// throughout when outer_epochs == 0) weights are corrupted at the fixed state.p.
TrainResult run_training(const Dataset& train, BinaryNetwork net, const InnerOptConfig& inner,
                         const OuterConfig& outer, const EnergyModel& energy, OuterState state,
                         int outer_epochs, Rng& rng, const EpochCallback& on_epoch) {
  inner.validate();
  net.validate();
  if (train.size() == 0) throw ConfigurationError("empty training set");
  if (train.features() != net.input_size()) {
    throw StructuralError("dataset has " + std::to_string(train.features()) +
                          " features, network expects " + std::to_string(net.input_size()));
  }
  const std::size_t layers = net.num_layers();
  const std::size_t batch = std::min(inner.batch_size, train.size());
  const std::size_t minibatches = train.size() / batch;

  TrainResult result;
  InnerVelocity velocity = InnerVelocity::zeros_like(net);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  LayerSigns binary;
  LayerSigns corrupted;

  for (int epoch = 1; epoch <= inner.epochs; ++epoch) {
    state.epoch = epoch;
    const bool active = epoch <= outer_epochs;
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog log;
    double loss_sum = 0.0;

    for (std::size_t k = 0; k < minibatches; ++k) {
      const std::span<const std::size_t> idx(order.data() + k * batch, batch);
      const Matrix x = train.gather(idx, &rng);
      const std::vector<int> y = train.gather_labels(idx);

      const NoiseVector applied =
          active ? perturb(state.p, outer.h, rng, outer.p_min, outer.p_max) : state.p;
      binary = net.binary_weights();
      corrupt_weights_into(binary, applied, rng, corrupted);
      const Gradients g = backward_ste(net, corrupted, x, y);

      state.best_loss = std::min(state.best_loss, g.loss);
      result.best_loss_trace.push_back(state.best_loss);
      result.applied_noise.push_back(applied);
      loss_sum += g.loss;

      if (active) {
        const double lk = surrogate_loss(g.loss, state.best_loss, applied, outer, energy);
        if (!std::isfinite(lk)) {
          throw NumericError("non-finite surrogate loss at epoch " + std::to_string(epoch) +
                             ", minibatch " + std::to_string(k + 1) + ": A_hat=" +
                             std::to_string(g.loss) + " A_star=" +
                             std::to_string(state.best_loss) + " p=" + describe(applied));
        }
        log.records.push_back({applied, lk});
      } else if (!std::isfinite(g.loss)) {
        throw NumericError("non-finite inner loss at epoch " + std::to_string(epoch) +
                           ", minibatch " + std::to_string(k + 1));
      }
      sgd_inner_step(net, g, velocity, inner, epoch);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr_schedule(epoch, inner);
    rec.mean_loss = loss_sum / static_cast<double>(minibatches);
    rec.best_loss = state.best_loss;
    if (active) {
      if (log.records.size() < layers + 2) {
        rec.update = OuterUpdate::skipped_insufficient;
      } else {
        rec.slopes = ols_gradient(log);
        const std::vector<double> unit = normalize_gradient(rec.slopes);
        const double raw_norm = std::sqrt(std::inner_product(
            rec.slopes.begin(), rec.slopes.end(), rec.slopes.begin(), 0.0));
        if (raw_norm > kGradientNormFloor) {
          outer_step(state, unit, outer, rec.lr);
          rec.update = OuterUpdate::applied;
          rec.gradient_norm = std::sqrt(
              std::inner_product(unit.begin(), unit.end(), unit.begin(), 0.0));
        } else {
          rec.update = OuterUpdate::skipped_degenerate;
        }
      }
    }
    rec.p = state.p;
    rec.energy = network_energy(state.p, energy).normalized;
    if (on_epoch) on_epoch(rec);
    result.epochs.push_back(std::move(rec));
  }
  result.p = state.p;
  result.net = std::move(net);
  return result;
}

}  // namespace

TrainResult train_lanmax(const Dataset& train, BinaryNetwork net, const InnerOptConfig& inner,
                         const OuterConfig& outer, EnergyModel energy, Rng& rng,
                         const EpochCallback& on_epoch) {
  outer.validate(inner.epochs);
  energy.layer_sizes = net.layer_sizes();
  energy.validate();
  OuterState state = OuterState::initial(net.num_layers(), outer);
  return run_training(train, std::move(net), inner, outer, energy, std::move(state), outer.s, rng,
                      on_epoch);
}

TrainResult train_uniform(const Dataset& train, BinaryNetwork net, const InnerOptConfig& inner,
                          double p_t, Rng& rng, const EpochCallback& on_epoch) {
  EnergyModel energy;
  energy.layer_sizes = net.layer_sizes();
  OuterState state;
  state.p = NoiseVector::uniform(net.num_layers(), p_t);
  state.velocity.assign(net.num_layers(), 0.0);
  OuterConfig outer;
  outer.s = 0;
  return run_training(train, std::move(net), inner, outer, energy, std::move(state), 0, rng,
                      on_epoch);
}

}  // namespace lanmax

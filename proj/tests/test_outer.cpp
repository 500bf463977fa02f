#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "lanmax/dataset.hpp"
#include "lanmax/errors.hpp"
#include "lanmax/outer.hpp"
#include "oracles.hpp"

using namespace lanmax;

namespace {

EpochLog linear_log(std::size_t m, std::size_t layers, const std::vector<double>& slopes,
                    double intercept, double noise_sd, Rng& rng) {
  std::uniform_real_distribution<double> u(1e-4, 0.5);
  std::normal_distribution<double> noise(0.0, noise_sd > 0 ? noise_sd : 1.0);
  EpochLog log;
  for (std::size_t k = 0; k < m; ++k) {
    std::vector<double> p(layers);
    double y = intercept;
    for (std::size_t l = 0; l < layers; ++l) {
      p[l] = u(rng);
      y += slopes[l] * p[l];
    }
    if (noise_sd > 0) y += noise(rng);
    log.records.push_back({NoiseVector(p), y});
  }
  return log;
}

oracle::OlsFit oracle_fit(const EpochLog& log) {
  std::vector<oracle::Vec> x;
  oracle::Vec y;
  for (const auto& r : log.records) {
    x.push_back(r.perturbed_p.rates());
    y.push_back(r.surrogate);
  }
  return oracle::ols_normal_equations(x, y);
}

struct SmallTask {
  Dataset train;
  BinaryNetwork net;
};

SmallTask small_task() {
  SyntheticSpec spec;
  spec.n_train = 512;
  spec.n_test = 64;
  spec.features = 8;
  spec.classes = 3;
  spec.seed = 3;
  Rng rng(17);
  SmallTask t{make_synthetic(spec).train,
              BinaryNetwork::create({LayerSpec::dense(8, 16, true, 1.0 / std::sqrt(8.0)),
                                     LayerSpec::dense(16, 3, true, 0.25)},
                                    0.1, rng)};
  return t;
}

InnerOptConfig short_inner() {
  InnerOptConfig c;
  c.epochs = 6;
  c.batch_size = 32;
  c.lr_decay_period = 3;
  return c;
}

}  // namespace

TEST_CASE("perturb") {
  Rng rng(1);
  const NoiseVector p({0.01, 0.2, 1e-4});
  CHECK(perturb(p, 0.0, rng, 1e-4, 0.5) == p);
  for (int i = 0; i < 200; ++i) {
    const NoiseVector q = perturb(p, 0.01, rng, 1e-4, 0.5);
    CHECK(q.within(1e-4, 0.5));
    const double d = (q[1] - p[1]) / 0.01;
    CHECK(std::abs(d - std::round(d)) < 1e-9);
    CHECK(std::abs(d) < 1.5);
    // 0.01 - 0.01 = 0 clamps up to 1e-4.
    CHECK((q[0] == 1e-4 || q[0] == 0.01 || q[0] == 0.02));
    // 1e-4 - 0.01 clamps back to 1e-4.
    CHECK((q[2] == 1e-4 || std::abs(q[2] - 0.0101) < 1e-15));
  }

  SUBCASE("each offset has frequency 1/3") {
    const int n = 300000;
    int counts[3] = {0, 0, 0};
    const NoiseVector mid({0.25});
    for (int i = 0; i < n; ++i) {
      const double d = perturb(mid, 0.01, rng, 1e-4, 0.5)[0] - 0.25;
      counts[d < -0.005 ? 0 : (d > 0.005 ? 2 : 1)] += 1;
    }
    const double sigma = std::sqrt(n * (1.0 / 3) * (2.0 / 3));
    for (int c : counts) CHECK(std::abs(c - n / 3.0) <= 3 * sigma);
  }
}

TEST_CASE("surrogate_loss") {
  OuterConfig cfg;
  cfg.alpha = 0.0;
  cfg.lambda = 0.0;
  EnergyModel e;
  e.layer_sizes = {10, 10, 10, 10};
  const NoiseVector p = NoiseVector::uniform(4, 0.01);
  CHECK(surrogate_loss(0.7, 0.7, p, cfg, e) == 1.0);

  // E_norm = 4 with zeta = 4 at eta = 1.
  cfg.alpha = 1.0;
  e.zeta = 4;
  CHECK(surrogate_loss(0.7, 0.7, NoiseVector::uniform(4, std::exp(-12.8)), cfg, e) ==
        doctest::Approx(3.0).epsilon(1e-14));

  cfg.alpha = 0.0;
  cfg.lambda = 5e-4;
  CHECK(surrogate_loss(2.0, 2.0, p, cfg, e) == doctest::Approx(1.00002).epsilon(1e-15));

  CHECK_THROWS_AS(surrogate_loss(1.0, 0.0, p, cfg, e), NumericError);
}

TEST_CASE("ols_gradient") {
  Rng rng(2);
  SUBCASE("noiseless two-layer landscape") {
    const EpochLog log = linear_log(50, 2, {3.0, -2.0}, 7.0, 0.0, rng);
    const auto g = ols_gradient(log);
    CHECK(std::abs(g[0] - 3.0) < 1e-8);
    CHECK(std::abs(g[1] + 2.0) < 1e-8);
    const auto ref = oracle_fit(log);
    CHECK(std::abs(g[0] - ref.coef[1]) < 1e-8);
    CHECK(std::abs(g[1] - ref.coef[2]) < 1e-8);
  }
  SUBCASE("constant losses give zero slopes") {
    EpochLog log = linear_log(20, 3, {0, 0, 0}, 1.5, 0.0, rng);
    for (double v : ols_gradient(log)) CHECK(v == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  }
  SUBCASE("a column that never varies gets slope zero") {
    EpochLog log = linear_log(30, 2, {4.0, 0.0}, 0.0, 0.0, rng);
    for (auto& r : log.records) r.perturbed_p[1] = 0.05;
    const auto g = ols_gradient(log);
    CHECK(std::abs(g[0] - 4.0) < 1e-8);
    CHECK(g[1] == 0.0);
  }
  SUBCASE("collinear columns get the minimum-norm split") {
    EpochLog log = linear_log(30, 2, {2.0, 0.0}, 0.0, 0.0, rng);
    for (auto& r : log.records) r.perturbed_p[1] = r.perturbed_p[0];
    const auto g = ols_gradient(log);
    CHECK(g[0] == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(g[1] == doctest::Approx(1.0).epsilon(1e-8));
  }
  SUBCASE("noisy slope within five standard errors") {
    const EpochLog log = linear_log(400, 1, {3.0}, 0.0, 1e-3, rng);
    const auto fit = oracle_fit(log);
    CHECK(std::abs(ols_gradient(log)[0] - 3.0) <= 5 * fit.std_error[1]);
  }
  SUBCASE("needs L + 2 records") {
    CHECK_THROWS_AS(ols_gradient(linear_log(4, 3, {1, 1, 1}, 0, 0, rng)), InsufficientDataError);
    CHECK_NOTHROW(ols_gradient(linear_log(5, 3, {1, 1, 1}, 0, 0, rng)));
    CHECK_THROWS_AS(ols_gradient(EpochLog{}), InsufficientDataError);
  }
  SUBCASE("noise decay alone has slope lambda on a flat landscape") {
    OuterConfig cfg;
    cfg.lambda = 5e-4;
    EnergyModel e;
    e.layer_sizes = {100, 200, 300};
    EpochLog log;
    const NoiseVector p = NoiseVector::uniform(3, 0.05);
    for (int k = 0; k < 64; ++k) {
      const NoiseVector q = perturb(p, 0.01, rng, 1e-4, 0.5);
      log.records.push_back({q, surrogate_loss(0.9, 0.9, q, cfg, e)});
    }
    for (double v : ols_gradient(log)) CHECK(std::abs(v - 5e-4) < 1e-9);
  }
}

TEST_CASE("normalize_gradient") {
  const std::vector<double> g = {3.0, 4.0};
  const auto n = normalize_gradient(g);
  CHECK(n[0] == doctest::Approx(0.6));
  CHECK(n[1] == doctest::Approx(0.8));
  const std::vector<double> z = {0.0, 0.0};
  CHECK(normalize_gradient(z) == z);

  Rng rng(3);
  std::normal_distribution<double> d(0.0, 100.0);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> v(1 + i % 7);
    for (double& x : v) x = d(rng);
    const auto u = normalize_gradient(v);
    double s = 0.0;
    for (double x : u) s += x * x;
    CHECK(std::abs(std::sqrt(s) - 1.0) < 1e-12);
  }
}

TEST_CASE("outer_step") {
  OuterConfig cfg;
  SUBCASE("plain step") {
    cfg.beta = 0.0;
    OuterState st = OuterState::initial(1, cfg);
    const std::vector<double> g = {-1.0};
    outer_step(st, g, cfg, 0.01);
    CHECK(st.p[0] == doctest::Approx(0.02).epsilon(1e-14));
  }
  SUBCASE("fixed point") {
    OuterState st = OuterState::initial(3, cfg);
    const std::vector<double> g = {0.0, 0.0, 0.0};
    outer_step(st, g, cfg, 0.1);
    CHECK(st.p == NoiseVector::uniform(3, 0.01));
  }
  SUBCASE("clamps to the bounds") {
    OuterState st = OuterState::initial(2, cfg);
    const std::vector<double> g = {1.0, -1.0};
    outer_step(st, g, cfg, 5.0);
    CHECK(st.p[0] == 1e-4);
    CHECK(st.p[1] == 0.5);
  }
  SUBCASE("momentum carries across steps") {
    cfg.beta = 0.2;
    OuterState st = OuterState::initial(1, cfg);
    const std::vector<double> g = {-1.0};
    outer_step(st, g, cfg, 0.01);  // v = -1, step 0.01 * 1.2
    CHECK(st.p[0] == doctest::Approx(0.022));
    outer_step(st, g, cfg, 0.01);  // v = -1.2, step 0.01 * 1.24
    CHECK(st.p[0] == doctest::Approx(0.0344));
  }
}

TEST_CASE("configuration checks") {
  OuterConfig cfg;
  CHECK_NOTHROW(cfg.validate(200));
  CHECK_THROWS_AS(cfg.validate(100), ConfigurationError);
  cfg.s = 10;
  cfg.p_init = 0.6;
  CHECK_THROWS_AS(cfg.validate(20), ConfigurationError);
  cfg.p_init = 0.01;
  cfg.beta = 1.0;
  CHECK_THROWS_AS(cfg.validate(20), ConfigurationError);
  cfg.beta = 0.2;
  cfg.alpha = -1.0;
  CHECK_THROWS_AS(cfg.validate(20), ConfigurationError);
}

TEST_CASE("train_lanmax without outer signal keeps p_init") {
  const SmallTask t = small_task();
  const InnerOptConfig inner = short_inner();
  OuterConfig outer;
  outer.s = 4;
  SUBCASE("alpha = lambda = h = 0") {
    outer.alpha = 0.0;
    outer.lambda = 0.0;
    outer.h = 0.0;
  }
  SUBCASE("s = 0") {
    outer.alpha = 0.1;
    outer.s = 0;
  }
  Rng rng(5);
  const TrainResult r = train_lanmax(t.train, t.net, inner, outer, EnergyModel{}, rng);
  CHECK(r.p == NoiseVector::uniform(2, 0.01));
  for (const auto& e : r.epochs) CHECK(e.update != OuterUpdate::applied);
}

TEST_CASE("train_lanmax invariants") {
  const SmallTask t = small_task();
  const InnerOptConfig inner = short_inner();
  OuterConfig outer;
  outer.alpha = 0.05;
  outer.h = 0.02;
  outer.s = 4;
  outer.p_init = 0.05;
  Rng rng(6);
  std::vector<EpochRecord> seen;
  const TrainResult r =
      train_lanmax(t.train, t.net, inner, outer, EnergyModel{}, rng,
                   [&](const EpochRecord& e) { seen.push_back(e); });
  REQUIRE(r.epochs.size() == 6);
  CHECK(seen.size() == 6);
  CHECK(r.applied_noise.size() == 6 * (512 / 32));
  for (const auto& p : r.applied_noise) CHECK(p.within(1e-4, 0.5));
  for (std::size_t i = 1; i < r.best_loss_trace.size(); ++i) {
    CHECK(r.best_loss_trace[i] <= r.best_loss_trace[i - 1]);
  }
  for (const auto& e : r.epochs) {
    CHECK(e.p.within(1e-4, 0.5));
    CHECK((e.gradient_norm == 0.0 || std::abs(e.gradient_norm - 1.0) < 1e-12));
    if (e.epoch > outer.s) {
      CHECK(e.update == OuterUpdate::inactive);
      CHECK(e.p == r.epochs[outer.s - 1].p);
    }
  }
  // After s, every minibatch runs at the final p.
  for (std::size_t k = 4 * 16; k < r.applied_noise.size(); ++k) CHECK(r.applied_noise[k] == r.p);

  Rng again(6);
  const TrainResult r2 = train_lanmax(t.train, t.net, inner, outer, EnergyModel{}, again);
  CHECK(r2.p == r.p);
  CHECK(r2.net.latent == r.net.latent);
}

TEST_CASE("too few minibatches for the regression are logged, not fatal") {
  const SmallTask t = small_task();
  InnerOptConfig inner = short_inner();
  inner.batch_size = 200;  // two minibatches per epoch, two layers need four
  OuterConfig outer;
  outer.alpha = 0.1;
  outer.s = 3;
  Rng rng(7);
  const TrainResult r = train_lanmax(t.train, t.net, inner, outer, EnergyModel{}, rng);
  for (int k = 0; k < 3; ++k) CHECK(r.epochs[k].update == OuterUpdate::skipped_insufficient);
  CHECK(r.p == NoiseVector::uniform(2, 0.01));
}

TEST_CASE("train_uniform") {
  const SmallTask t = small_task();
  Rng rng(8);
  const TrainResult r = train_uniform(t.train, t.net, short_inner(), 0.0, rng);
  CHECK(r.p.all_zero());
  for (const auto& p : r.applied_noise) CHECK(p.all_zero());
  CHECK(r.epochs.back().mean_loss < r.epochs.front().mean_loss);
  CHECK_THROWS_AS(train_uniform(t.train, t.net, short_inner(), 0.7, rng), DomainError);
}

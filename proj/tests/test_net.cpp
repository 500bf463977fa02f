#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <numeric>

#include "lanmax/errors.hpp"
#include "lanmax/net.hpp"
#include "oracles.hpp"

using namespace lanmax;

namespace {

Matrix random_batch(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix x(rows, cols);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
  return x;
}

std::vector<oracle::Vec> as_real(const LayerSigns& w) {
  std::vector<oracle::Vec> out;
  for (const auto& layer : w) out.emplace_back(layer.begin(), layer.end());
  return out;
}

oracle::Vec row_of(const Matrix& x, Eigen::Index i) {
  return oracle::Vec(x.row(i).data(), x.row(i).data() + x.cols());
}

BinaryNetwork small_mlp(Rng& rng) {
  return BinaryNetwork::create({LayerSpec::dense(6, 10, true, 1.0 / std::sqrt(6.0)),
                                LayerSpec::dense(10, 8, true, 1.0 / std::sqrt(10.0)),
                                LayerSpec::dense(8, 3, true, 1.0 / std::sqrt(8.0))},
                               0.5, rng);
}

BinaryNetwork small_cnn(Rng& rng) {
  return BinaryNetwork::create({LayerSpec::conv2d(2, 3, 3, 5, 4, true, 1.0 / std::sqrt(18.0)),
                                LayerSpec::dense(60, 4, true, 1.0 / std::sqrt(60.0))},
                               0.5, rng);
}

void randomize_bias(BinaryNetwork& net, Rng& rng) {
  std::normal_distribution<double> n(0.0, 0.3);
  for (auto& b : net.bias) {
    for (double& v : b) v = n(rng);
  }
}

// Fraction of coordinates where the analytic gradient agrees with central
// differences of the oracle loss to relative error < 1e-4.
double fd_agreement(const BinaryNetwork& net, const LayerSigns& signs, const Matrix& x,
                    const std::vector<int>& y) {
  const Gradients g = backward_ste(net, signs, x, y);
  std::vector<oracle::Vec> xs;
  for (Eigen::Index i = 0; i < x.rows(); ++i) xs.push_back(row_of(x, i));
  std::vector<oracle::Vec> w = as_real(signs);
  const double eps = 1e-5;
  std::size_t ok = 0, total = 0;
  for (std::size_t l = 0; l < w.size(); ++l) {
    for (std::size_t i = 0; i < w[l].size(); ++i) {
      const double orig = w[l][i];
      w[l][i] = orig + eps;
      const double up = oracle::mean_loss(net, w, xs, y);
      w[l][i] = orig - eps;
      const double down = oracle::mean_loss(net, w, xs, y);
      w[l][i] = orig;
      const double fd = (up - down) / (2 * eps);
      const double a = g.weights[l][i];
      const double denom = std::max({std::abs(a), std::abs(fd), 1e-8});
      ok += std::abs(a - fd) / denom < 1e-4;
      ++total;
    }
  }
  return static_cast<double>(ok) / static_cast<double>(total);
}

}  // namespace

TEST_CASE("binarize") {
  const std::vector<double> in = {0.3, -0.7, 0.0, -0.0, 1.0, -1e-300};
  CHECK(binarize(in) == SignArray{1, -1, 1, 1, 1, -1});
}

TEST_CASE("layer shapes and validation") {
  const LayerSpec c = LayerSpec::conv2d(3, 8, 3, 10, 12);
  CHECK(c.weight_count() == 8 * 3 * 9);
  CHECK(c.input_size() == 3 * 10 * 12);
  CHECK(c.output_size() == 8 * 10 * 12);
  CHECK(c.bias_count() == 0);
  CHECK_THROWS_AS(LayerSpec::conv2d(1, 1, 2, 4, 4).validate(), StructuralError);
  Rng rng(1);
  CHECK_THROWS_AS(BinaryNetwork::create({LayerSpec::dense(4, 5), LayerSpec::dense(6, 2)}, 0.1, rng),
                  StructuralError);
  const BinaryNetwork net = small_mlp(rng);
  CHECK(net.layer_sizes() == std::vector<std::size_t>{60, 80, 24});
  CHECK_THROWS_AS(forward(net, net.binary_weights(), Matrix::Zero(2, 5)), StructuralError);
  LayerSigns short_w = net.binary_weights();
  short_w[1].pop_back();
  CHECK_THROWS_AS(forward(net, short_w, Matrix::Zero(2, 6)), StructuralError);
}

TEST_CASE("all-ones weights and inputs give logit d") {
  Rng rng(3);
  BinaryNetwork net = BinaryNetwork::create({LayerSpec::dense(7, 2)}, 0.1, rng);
  const LayerSigns ones = {SignArray(14, 1)};
  const Matrix logits = forward(net, ones, Matrix::Ones(1, 7));
  CHECK(logits(0, 0) == 7.0);
  CHECK(logits(0, 1) == 7.0);
}

TEST_CASE("forward matches the scalar oracle") {
  Rng rng(11);
  for (int variant = 0; variant < 2; ++variant) {
    BinaryNetwork net = variant == 0 ? small_mlp(rng) : small_cnn(rng);
    randomize_bias(net, rng);
    const LayerSigns w = net.binary_weights();
    const Matrix x = random_batch(9, static_cast<Eigen::Index>(net.input_size()), rng);
    const Matrix logits = forward(net, w, x);
    const auto real = as_real(w);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const oracle::Vec ref = oracle::forward_sample(net, real, row_of(x, i));
      for (Eigen::Index c = 0; c < logits.cols(); ++c) {
        CHECK(std::abs(logits(i, c) - ref[c]) < 1e-6 * std::max(1.0, std::abs(ref[c])));
      }
    }
  }
}

TEST_CASE("inner_loss") {
  SUBCASE("uniform logits give ln C") {
    const Matrix logits = Matrix::Constant(3, 5, 2.5);
    CHECK(inner_loss(logits, std::vector<int>{0, 4, 2}) == doctest::Approx(std::log(5.0)));
  }
  SUBCASE("large logits stay finite") {
    Matrix logits(1, 3);
    logits << 1000.0, -1000.0, 999.0;
    CHECK(inner_loss(logits, std::vector<int>{0}) == doctest::Approx(std::log1p(std::exp(-1.0))));
  }
  SUBCASE("matches the long double oracle") {
    Rng rng(4);
    const Matrix logits = random_batch(20, 6, rng) * 3.0;
    std::vector<int> y(20);
    long double ref = 0.0L;
    for (int i = 0; i < 20; ++i) {
      y[i] = i % 6;
      ref += oracle::cross_entropy(row_of(logits, i), y[i]);
    }
    ref /= 20;
    CHECK(std::abs(inner_loss(logits, y) - static_cast<double>(ref)) < 1e-6 * static_cast<double>(ref));
  }
  SUBCASE("count_correct breaks ties toward the first index") {
    Matrix logits(2, 3);
    logits << 1, 1, 0, 0, 2, 2;
    CHECK(count_correct(logits, std::vector<int>{0, 2}) == 1);
  }
}

TEST_CASE("backward_ste matches central finite differences") {
  Rng rng(21);
  SUBCASE("mlp") {
    BinaryNetwork net = small_mlp(rng);
    randomize_bias(net, rng);
    const Matrix x = random_batch(16, 6, rng);
    std::vector<int> y(16);
    for (int i = 0; i < 16; ++i) y[i] = i % 3;
    CHECK(fd_agreement(net, net.binary_weights(), x, y) >= 0.95);
  }
  SUBCASE("cnn") {
    BinaryNetwork net = small_cnn(rng);
    randomize_bias(net, rng);
    const Matrix x = random_batch(6, 40, rng);
    const std::vector<int> y = {0, 1, 2, 3, 0, 1};
    CHECK(fd_agreement(net, net.binary_weights(), x, y) >= 0.95);
  }
  SUBCASE("bias gradient") {
    BinaryNetwork net = small_mlp(rng);
    randomize_bias(net, rng);
    const LayerSigns w = net.binary_weights();
    const Matrix x = random_batch(8, 6, rng);
    const std::vector<int> y = {0, 1, 2, 0, 1, 2, 0, 1};
    const Gradients g = backward_ste(net, w, x, y);
    const double eps = 1e-6;
    for (std::size_t i = 0; i < net.bias[2].size(); ++i) {
      BinaryNetwork up = net, down = net;
      up.bias[2][i] += eps;
      down.bias[2][i] -= eps;
      const double fd =
          (inner_loss(forward(up, w, x), y) - inner_loss(forward(down, w, x), y)) / (2 * eps);
      CHECK(g.bias[2][i] == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("gradient properties") {
  Rng rng(8);
  BinaryNetwork net = small_mlp(rng);
  const LayerSigns w = net.binary_weights();

  SUBCASE("zero input gives zero first-layer weight gradient") {
    const Gradients g = backward_ste(net, w, Matrix::Zero(4, 6), std::vector<int>{0, 1, 2, 0});
    for (double v : g.weights[0]) CHECK(v == 0.0);
  }
  SUBCASE("duplicating a batch leaves the mean gradient unchanged") {
    const Matrix x = random_batch(5, 6, rng);
    const std::vector<int> y = {0, 1, 2, 1, 0};
    Matrix xx(10, 6);
    xx << x, x;
    std::vector<int> yy = y;
    yy.insert(yy.end(), y.begin(), y.end());
    const Gradients a = backward_ste(net, w, x, y);
    const Gradients b = backward_ste(net, w, xx, yy);
    CHECK(a.loss == doctest::Approx(b.loss));
    for (std::size_t l = 0; l < a.weights.size(); ++l) {
      for (std::size_t i = 0; i < a.weights[l].size(); ++i) {
        CHECK(std::abs(a.weights[l][i] - b.weights[l][i]) < 1e-12);
      }
    }
  }
}

TEST_CASE("learning-rate schedule") {
  InnerOptConfig cfg;
  CHECK(lr_schedule(1, cfg) == 0.1);
  CHECK(lr_schedule(60, cfg) == 0.1);
  CHECK(lr_schedule(61, cfg) == doctest::Approx(0.02).epsilon(1e-14));
  CHECK(lr_schedule(121, cfg) == doctest::Approx(0.004).epsilon(1e-14));
  CHECK(lr_schedule(200, cfg) == doctest::Approx(0.0008).epsilon(1e-14));
  CHECK_THROWS_AS(lr_schedule(0, cfg), DomainError);
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigurationError);
}

TEST_CASE("nesterov_step") {
  SUBCASE("first step from rest, no decay") {
    std::vector<double> x = {1.0}, v = {0.0};
    const std::vector<double> g = {0.5};
    nesterov_step(x, g, v, 0.1, 0.9, 0.0);
    // v = 0.5; x = 1 - 0.1 * (0.5 + 0.45)
    CHECK(v[0] == doctest::Approx(0.5));
    CHECK(x[0] == doctest::Approx(0.905));
  }
  SUBCASE("weight decay enters the gradient") {
    std::vector<double> x = {2.0}, v = {0.0};
    const std::vector<double> g = {0.0};
    nesterov_step(x, g, v, 0.5, 0.0, 0.1);
    CHECK(x[0] == doctest::Approx(1.9));
  }
  SUBCASE("inner step clips latent weights but not biases") {
    Rng rng(2);
    BinaryNetwork net = BinaryNetwork::create({LayerSpec::dense(2, 1, true)}, 0.1, rng);
    net.latent[0] = {0.99, -0.99};
    Gradients g;
    g.weights = {{-10.0, 10.0}};
    g.bias = {{-100.0}};
    InnerVelocity vel = InnerVelocity::zeros_like(net);
    InnerOptConfig cfg;
    cfg.momentum = 0.0;
    cfg.weight_decay = 0.0;
    sgd_inner_step(net, g, vel, cfg, 1);
    CHECK(net.latent[0] == std::vector<double>{1.0, -1.0});
    CHECK(net.bias[0][0] == doctest::Approx(10.0));
  }
}

TEST_CASE("a few steps of training reduce the loss deterministically") {
  auto run = [](std::uint64_t seed) {
    Rng rng(seed);
    BinaryNetwork net = small_mlp(rng);
    Matrix x = random_batch(64, 6, rng);
    std::vector<int> y(64);
    for (int i = 0; i < 64; ++i) y[i] = x(i, 0) > 0 ? 0 : (x(i, 1) > 0 ? 1 : 2);
    InnerOptConfig cfg;
    cfg.learning_rate = 0.05;
    InnerVelocity vel = InnerVelocity::zeros_like(net);
    std::vector<double> losses;
    for (int step = 0; step < 60; ++step) {
      const Gradients g = backward_ste(net, net.binary_weights(), x, y);
      losses.push_back(g.loss);
      sgd_inner_step(net, g, vel, cfg, 1);
    }
    return std::make_pair(losses, net.latent);
  };
  const auto a = run(5);
  const auto b = run(5);
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  const double head = std::accumulate(a.first.begin(), a.first.begin() + 5, 0.0);
  const double tail = std::accumulate(a.first.end() - 5, a.first.end(), 0.0);
  CHECK(tail < head);
}

TEST_CASE("checkpoint round trip") {
  Rng rng(9);
  Checkpoint ck;
  ck.net = small_cnn(rng);
  randomize_bias(ck.net, rng);
  ck.p = NoiseVector({0.0123456789012345, 1e-4});
  ck.seed = 123456789012345ULL;
  ck.epoch = 17;
  const auto dir = std::filesystem::temp_directory_path() / "lanmax_test_net";
  std::filesystem::create_directories(dir);
  const auto path = dir / "ck.json";
  save_checkpoint(path, ck);
  const Checkpoint back = load_checkpoint(path);
  CHECK(back.net.layers == ck.net.layers);
  CHECK(back.net.latent == ck.net.latent);
  CHECK(back.net.bias == ck.net.bias);
  CHECK(back.p == ck.p);
  CHECK(back.seed == ck.seed);
  CHECK(back.epoch == 17);

  std::ofstream(dir / "bad.json") << R"({"format": "something-else", "version": 1})";
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.json"), StructuralError);
  std::ofstream(dir / "trunc.json") << R"({"format": "lanmax-checkpoint", "vers)";
  CHECK_THROWS_AS(load_checkpoint(dir / "trunc.json"), StructuralError);
  std::filesystem::remove_all(dir);
}

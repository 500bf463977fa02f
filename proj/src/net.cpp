#include "lanmax/net.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include "json.hpp"
#include "lanmax/errors.hpp"

namespace lanmax {

namespace {

using ConstRowMap = Eigen::Map<const Matrix>;
using RowMap = Eigen::Map<Matrix>;

std::string layer_name(std::size_t l) { return "layer " + std::to_string(l + 1); }

// Weight matrix of a layer as doubles: (out x in) for dense,
// (out_channels x in_channels*k*k) for conv.
Matrix weight_matrix(const LayerSpec& spec, const SignArray& signs) {
  const std::size_t rows = spec.kind == LayerKind::dense ? spec.out_features : spec.out_channels;
  const std::size_t cols = spec.weight_count() / rows;
  Matrix w(rows, cols);
  double* dst = w.data();
  for (std::size_t i = 0; i < signs.size(); ++i) dst[i] = static_cast<double>(signs[i]);
  return w;
}

// cols(c*k*k + ky*k + kx, y*W + x) = in(c, y + ky - r, x + kx - r), zero outside.
void im2col(const LayerSpec& s, const double* in, Matrix& cols) {
  const long k = static_cast<long>(s.kernel);
  const long r = k / 2;
  const long h = static_cast<long>(s.height);
  const long w = static_cast<long>(s.width);
  cols.resize(static_cast<long>(s.in_channels) * k * k, h * w);
  for (long c = 0; c < static_cast<long>(s.in_channels); ++c) {
    const double* plane = in + c * h * w;
    for (long ky = 0; ky < k; ++ky) {
      for (long kx = 0; kx < k; ++kx) {
        double* row = cols.row((c * k + ky) * k + kx).data();
        for (long y = 0; y < h; ++y) {
          const long sy = y + ky - r;
          for (long x = 0; x < w; ++x) {
            const long sx = x + kx - r;
            row[y * w + x] =
                (sy >= 0 && sy < h && sx >= 0 && sx < w) ? plane[sy * w + sx] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const LayerSpec& s, const Matrix& cols, double* out) {
  const long k = static_cast<long>(s.kernel);
  const long r = k / 2;
  const long h = static_cast<long>(s.height);
  const long w = static_cast<long>(s.width);
  for (long c = 0; c < static_cast<long>(s.in_channels); ++c) {
    double* plane = out + c * h * w;
    for (long ky = 0; ky < k; ++ky) {
      for (long kx = 0; kx < k; ++kx) {
        const double* row = cols.row((c * k + ky) * k + kx).data();
        for (long y = 0; y < h; ++y) {
          const long sy = y + ky - r;
          if (sy < 0 || sy >= h) continue;
          for (long x = 0; x < w; ++x) {
            const long sx = x + kx - r;
            if (sx >= 0 && sx < w) plane[sy * w + sx] += row[y * w + x];
          }
        }
      }
    }
  }
}

Matrix linear_forward(const LayerSpec& spec, const Matrix& weights, const std::vector<double>& bias,
                      const Matrix& in) {
  const Eigen::Index batch = in.rows();
  Matrix out(batch, static_cast<Eigen::Index>(spec.output_size()));
  if (spec.kind == LayerKind::dense) {
    out.noalias() = spec.scale * (in * weights.transpose());
    if (spec.has_bias) {
      out.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.data(), bias.size());
    }
    return out;
  }
  const Eigen::Index hw = static_cast<Eigen::Index>(spec.height * spec.width);
  const Eigen::Index out_ch = static_cast<Eigen::Index>(spec.out_channels);
  Matrix cols;
  for (Eigen::Index b = 0; b < batch; ++b) {
    im2col(spec, in.row(b).data(), cols);
    RowMap o(out.row(b).data(), out_ch, hw);
    o.noalias() = spec.scale * (weights * cols);
    if (spec.has_bias) {
      for (Eigen::Index c = 0; c < out_ch; ++c) o.row(c).array() += bias[c];
    }
  }
  return out;
}

struct Trace {
  std::vector<Matrix> inputs;  // activation entering layer l
  std::vector<Matrix> pre;     // z_l before ReLU
};

void check_shapes(const BinaryNetwork& net, const LayerSigns& corrupted, const Matrix& x) {
  if (corrupted.size() != net.num_layers()) {
    throw StructuralError("got weights for " + std::to_string(corrupted.size()) +
                          " layers, network has " + std::to_string(net.num_layers()));
  }
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    if (corrupted[l].size() != net.layers[l].weight_count()) {
      throw StructuralError(layer_name(l) + ": expected " +
                            std::to_string(net.layers[l].weight_count()) + " weights, got " +
                            std::to_string(corrupted[l].size()));
    }
  }
  if (x.rows() < 1) throw StructuralError("empty input batch");
  if (static_cast<std::size_t>(x.cols()) != net.input_size()) {
    throw StructuralError("input has " + std::to_string(x.cols()) + " features, network expects " +
                          std::to_string(net.input_size()));
  }
}

Matrix run_forward(const BinaryNetwork& net, const std::vector<Matrix>& weights, const Matrix& x,
                   Trace* trace) {
  Matrix a = x;
  const std::size_t last = net.num_layers() - 1;
  for (std::size_t l = 0; l <= last; ++l) {
    Matrix z = linear_forward(net.layers[l], weights[l], net.bias[l], a);
    if (trace) trace->inputs.push_back(std::move(a));
    if (l == last) {
      if (trace) trace->pre.push_back(z);
      return z;
    }
    a = z.cwiseMax(0.0);
    if (trace) trace->pre.push_back(std::move(z));
  }
  return a;
}

std::vector<Matrix> weight_matrices(const BinaryNetwork& net, const LayerSigns& signs) {
  std::vector<Matrix> w;
  w.reserve(net.num_layers());
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    w.push_back(weight_matrix(net.layers[l], signs[l]));
  }
  return w;
}

}  // namespace

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out, bool bias, double scale) {
  LayerSpec s;
  s.kind = LayerKind::dense;
  s.in_features = in;
  s.out_features = out;
  s.has_bias = bias;
  s.scale = scale;
  return s;
}

LayerSpec LayerSpec::conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
                            std::size_t height, std::size_t width, bool bias, double scale) {
  LayerSpec s;
  s.kind = LayerKind::conv2d;
  s.in_channels = in_ch;
  s.out_channels = out_ch;
  s.kernel = kernel;
  s.height = height;
  s.width = width;
  s.has_bias = bias;
  s.scale = scale;
  return s;
}

std::size_t LayerSpec::weight_count() const {
  if (kind == LayerKind::dense) return in_features * out_features;
  return out_channels * in_channels * kernel * kernel;
}

std::size_t LayerSpec::bias_count() const {
  if (!has_bias) return 0;
  return kind == LayerKind::dense ? out_features : out_channels;
}

std::size_t LayerSpec::input_size() const {
  return kind == LayerKind::dense ? in_features : in_channels * height * width;
}

std::size_t LayerSpec::output_size() const {
  return kind == LayerKind::dense ? out_features : out_channels * height * width;
}

void LayerSpec::validate() const {
  if (weight_count() == 0) throw StructuralError("layer without weights");
  if (kind == LayerKind::conv2d) {
    if (kernel % 2 == 0) throw StructuralError("conv kernel must be odd");
    if (height == 0 || width == 0) throw StructuralError("conv layer with empty feature map");
  }
  if (!(scale > 0.0) || !std::isfinite(scale)) throw StructuralError("layer scale must be > 0");
}

BinaryNetwork BinaryNetwork::create(std::vector<LayerSpec> layers, double init_range, Rng& rng) {
  if (layers.empty()) throw StructuralError("network needs at least one layer");
  BinaryNetwork net;
  net.layers = std::move(layers);
  std::uniform_real_distribution<double> init(-init_range, init_range);
  for (const LayerSpec& spec : net.layers) {
    std::vector<double> w(spec.weight_count());
    for (double& v : w) v = init(rng);
    net.latent.push_back(std::move(w));
    net.bias.emplace_back(spec.bias_count(), 0.0);
  }
  net.validate();
  return net;
}

void BinaryNetwork::validate() const {
  if (layers.empty()) throw StructuralError("network needs at least one layer");
  if (latent.size() != layers.size() || bias.size() != layers.size()) {
    throw StructuralError("parameter arrays do not match layer count");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].validate();
    if (l > 0 && layers[l].input_size() != layers[l - 1].output_size()) {
      throw StructuralError(layer_name(l) + " input size " +
                            std::to_string(layers[l].input_size()) + " != previous output " +
                            std::to_string(layers[l - 1].output_size()));
    }
    if (latent[l].size() != layers[l].weight_count() || bias[l].size() != layers[l].bias_count()) {
      throw StructuralError(layer_name(l) + ": parameter array size mismatch");
    }
  }
}

std::vector<std::size_t> BinaryNetwork::layer_sizes() const {
  std::vector<std::size_t> n;
  for (const LayerSpec& s : layers) n.push_back(s.weight_count());
  return n;
}

LayerSigns BinaryNetwork::binary_weights() const {
  LayerSigns out;
  out.reserve(latent.size());
  for (const auto& w : latent) out.push_back(binarize(w));
  return out;
}

SignArray binarize(std::span<const double> latent) {
  SignArray out(latent.size());
  std::transform(latent.begin(), latent.end(), out.begin(),
                 [](double v) { return static_cast<Sign>(v < 0.0 ? -1 : 1); });
  return out;
}

Matrix forward(const BinaryNetwork& net, const LayerSigns& corrupted, const Matrix& x) {
  check_shapes(net, corrupted, x);
  return run_forward(net, weight_matrices(net, corrupted), x, nullptr);
}

double inner_loss(const Matrix& logits, std::span<const int> targets) {
  if (static_cast<std::size_t>(logits.rows()) != targets.size()) {
    throw StructuralError("logits and targets are not batch-aligned");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const auto row = logits.row(i);
    const double m = row.maxCoeff();
    const double lse = m + std::log((row.array() - m).exp().sum());
    total += lse - row(targets[i]);
  }
  return total / static_cast<double>(logits.rows());
}

std::size_t count_correct(const Matrix& logits, std::span<const int> targets) {
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index arg = 0;
    logits.row(i).maxCoeff(&arg);
    if (arg == targets[i]) ++correct;
  }
  return correct;
}

Gradients backward_ste(const BinaryNetwork& net, const LayerSigns& corrupted, const Matrix& x,
                       std::span<const int> targets) {
  check_shapes(net, corrupted, x);
  if (static_cast<std::size_t>(x.rows()) != targets.size()) {
    throw StructuralError("inputs and targets are not batch-aligned");
  }
  const std::vector<Matrix> weights = weight_matrices(net, corrupted);
  Trace trace;
  const Matrix logits = run_forward(net, weights, x, &trace);

  const Eigen::Index batch = x.rows();
  const Eigen::Index classes = logits.cols();
  Gradients g;
  g.weights.resize(net.num_layers());
  g.bias.resize(net.num_layers());
  g.loss = inner_loss(logits, targets);

  // dL/dz for the softmax cross-entropy head, averaged over the batch.
  Matrix dz(batch, classes);
  for (Eigen::Index i = 0; i < batch; ++i) {
    const auto row = logits.row(i);
    const double m = row.maxCoeff();
    Eigen::RowVectorXd e = (row.array() - m).exp();
    e /= e.sum();
    e(targets[i]) -= 1.0;
    dz.row(i) = e / static_cast<double>(batch);
  }

  for (std::size_t l = net.num_layers(); l-- > 0;) {
    const LayerSpec& spec = net.layers[l];
    const Matrix& in = trace.inputs[l];
    const Matrix& w = weights[l];
    Matrix dw(w.rows(), w.cols());
    std::vector<double> db(spec.bias_count(), 0.0);
    Matrix din;
    if (spec.kind == LayerKind::dense) {
      dw.noalias() = spec.scale * (dz.transpose() * in);
      if (spec.has_bias) {
        const Eigen::RowVectorXd s = dz.colwise().sum();
        std::copy(s.data(), s.data() + s.size(), db.begin());
      }
      if (l > 0) din.noalias() = spec.scale * (dz * w);
    } else {
      dw.setZero();
      const Eigen::Index hw = static_cast<Eigen::Index>(spec.height * spec.width);
      const Eigen::Index out_ch = static_cast<Eigen::Index>(spec.out_channels);
      if (l > 0) din = Matrix::Zero(batch, in.cols());
      Matrix cols;
      Matrix dcols;
      for (Eigen::Index b = 0; b < batch; ++b) {
        im2col(spec, in.row(b).data(), cols);
        ConstRowMap dout(dz.row(b).data(), out_ch, hw);
        dw.noalias() += spec.scale * (dout * cols.transpose());
        if (spec.has_bias) {
          for (Eigen::Index c = 0; c < out_ch; ++c) db[c] += dout.row(c).sum();
        }
        if (l > 0) {
          dcols.noalias() = spec.scale * (w.transpose() * dout);
          col2im_add(spec, dcols, din.row(b).data());
        }
      }
    }
    g.weights[l].assign(dw.data(), dw.data() + dw.size());
    g.bias[l] = std::move(db);
    if (l > 0) {
      dz = din.cwiseProduct((trace.pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return g;
}

void InnerOptConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigurationError("inner learning rate must be > 0");
  if (!(lr_decay_factor > 0.0 && lr_decay_factor <= 1.0)) {
    throw ConfigurationError("lr decay factor must be in (0, 1]");
  }
  if (lr_decay_period < 1) throw ConfigurationError("lr decay period must be >= 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigurationError("momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigurationError("weight decay must be >= 0");
  if (batch_size < 1) throw ConfigurationError("batch size must be >= 1");
  if (epochs < 1) throw ConfigurationError("epochs must be >= 1");
}

double lr_schedule(int epoch, const InnerOptConfig& cfg) {
  if (epoch < 1) throw DomainError("lr_schedule: epochs are counted from 1");
  const int drops = (epoch - 1) / cfg.lr_decay_period;
  return cfg.learning_rate * std::pow(cfg.lr_decay_factor, drops);
}

void nesterov_step(std::span<double> params, std::span<const double> grad,
                   std::span<double> velocity, double lr, double momentum, double weight_decay) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i] + weight_decay * params[i];
    velocity[i] = momentum * velocity[i] + g;
    params[i] -= lr * (g + momentum * velocity[i]);
  }
}

InnerVelocity InnerVelocity::zeros_like(const BinaryNetwork& net) {
  InnerVelocity v;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    v.weights.emplace_back(net.latent[l].size(), 0.0);
    v.bias.emplace_back(net.bias[l].size(), 0.0);
  }
  return v;
}

void sgd_inner_step(BinaryNetwork& net, const Gradients& grads, InnerVelocity& velocity,
                    const InnerOptConfig& cfg, int epoch) {
  const double lr = lr_schedule(epoch, cfg);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    if (grads.weights[l].size() != net.latent[l].size() ||
        velocity.weights[l].size() != net.latent[l].size()) {
      throw StructuralError(layer_name(l) + ": gradient/velocity size mismatch");
    }
    nesterov_step(net.latent[l], grads.weights[l], velocity.weights[l], lr, cfg.momentum,
                  cfg.weight_decay);
    for (double& w : net.latent[l]) w = std::clamp(w, -1.0, 1.0);
    nesterov_step(net.bias[l], grads.bias[l], velocity.bias[l], lr, cfg.momentum,
                  cfg.weight_decay);
  }
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr const char* kCheckpointFormat = "lanmax-checkpoint";
constexpr int kCheckpointVersion = 1;

nlohmann::json spec_to_json(const LayerSpec& s) {
  nlohmann::json j;
  j["has_bias"] = s.has_bias;
  j["scale"] = s.scale;
  if (s.kind == LayerKind::dense) {
    j["kind"] = "dense";
    j["in_features"] = s.in_features;
    j["out_features"] = s.out_features;
  } else {
    j["kind"] = "conv2d";
    j["in_channels"] = s.in_channels;
    j["out_channels"] = s.out_channels;
    j["kernel"] = s.kernel;
    j["height"] = s.height;
    j["width"] = s.width;
  }
  return j;
}

LayerSpec spec_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  const bool bias = j.at("has_bias").get<bool>();
  const double scale = j.at("scale").get<double>();
  if (kind == "dense") {
    return LayerSpec::dense(j.at("in_features").get<std::size_t>(),
                            j.at("out_features").get<std::size_t>(), bias, scale);
  }
  if (kind == "conv2d") {
    return LayerSpec::conv2d(j.at("in_channels").get<std::size_t>(),
                             j.at("out_channels").get<std::size_t>(),
                             j.at("kernel").get<std::size_t>(), j.at("height").get<std::size_t>(),
                             j.at("width").get<std::size_t>(), bias, scale);
  }
  throw StructuralError("checkpoint: unknown layer kind '" + kind + "'");
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  ckpt.net.validate();
  nlohmann::json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["seed"] = ckpt.seed;
  j["epoch"] = ckpt.epoch;
  j["noise"] = ckpt.p.rates();
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < ckpt.net.num_layers(); ++l) {
    nlohmann::json layer;
    layer["spec"] = spec_to_json(ckpt.net.layers[l]);
    layer["latent"] = ckpt.net.latent[l];
    layer["bias"] = ckpt.net.bias[l];
    layers.push_back(std::move(layer));
  }
  j["layers"] = std::move(layers);

  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    out << j.dump() << '\n';
    if (!out) throw std::runtime_error("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
    if (j.at("format").get<std::string>() != kCheckpointFormat) {
      throw StructuralError("not a lanmax checkpoint: " + path.string());
    }
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw StructuralError("unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint ckpt;
    ckpt.seed = j.at("seed").get<std::uint64_t>();
    ckpt.epoch = j.at("epoch").get<int>();
    ckpt.p = NoiseVector(j.at("noise").get<std::vector<double>>());
    for (const auto& layer : j.at("layers")) {
      ckpt.net.layers.push_back(spec_from_json(layer.at("spec")));
      ckpt.net.latent.push_back(layer.at("latent").get<std::vector<double>>());
      ckpt.net.bias.push_back(layer.at("bias").get<std::vector<double>>());
    }
    ckpt.net.validate();
    if (ckpt.p.size() != ckpt.net.num_layers()) {
      throw StructuralError("checkpoint noise vector does not match layer count");
    }
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw StructuralError("malformed checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace lanmax

#include "lanmax/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>
#include <random>

#include "lanmax/errors.hpp"

namespace lanmax {

namespace {

void standardize(Dataset& train, Dataset& test) {
  const Eigen::Index d = train.inputs.cols();
  for (Eigen::Index j = 0; j < d; ++j) {
    const double mean = train.inputs.col(j).mean();
    const double var = (train.inputs.col(j).array() - mean).square().mean();
    const double inv = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
    train.inputs.col(j) = (train.inputs.col(j).array() - mean) * inv;
    test.inputs.col(j) = (test.inputs.col(j).array() - mean) * inv;
  }
}

// Shifts by (dy, dx) with zero fill, then optionally mirrors horizontally.
void augment_image(const ImageShape& s, std::size_t pad, Rng& rng, double* pixels) {
  std::uniform_int_distribution<long> shift(-static_cast<long>(pad), static_cast<long>(pad));
  std::bernoulli_distribution coin(0.5);
  const long dy = shift(rng);
  const long dx = shift(rng);
  const bool flip = coin(rng);
  const long h = static_cast<long>(s.height);
  const long w = static_cast<long>(s.width);
  std::vector<double> plane(static_cast<std::size_t>(h * w));
  for (std::size_t c = 0; c < s.channels; ++c) {
    double* p = pixels + c * h * w;
    std::copy(p, p + h * w, plane.begin());
    for (long y = 0; y < h; ++y) {
      for (long x = 0; x < w; ++x) {
        const long sy = y - dy;
        const long sx0 = x - dx;
        const long sx = flip ? (w - 1 - sx0) : sx0;
        p[y * w + x] = (sy >= 0 && sy < h && sx >= 0 && sx < w) ? plane[sy * w + sx] : 0.0;
      }
    }
  }
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

}  // namespace

Matrix Dataset::gather(std::span<const std::size_t> indices, Rng* augment_rng) const {
  Matrix out(static_cast<Eigen::Index>(indices.size()), inputs.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = inputs.row(static_cast<Eigen::Index>(indices[i]));
  }
  if (augment && image && augment_rng) {
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      augment_image(*image, augment_pad, *augment_rng, out.row(i).data());
    }
  }
  return out;
}

std::vector<int> Dataset::gather_labels(std::span<const std::size_t> indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(labels[i]);
  return out;
}

DatasetSplit make_synthetic(const SyntheticSpec& spec) {
  if (spec.classes < 2) throw ConfigurationError("synthetic dataset needs >= 2 classes");
  if (spec.features < 2) throw ConfigurationError("synthetic dataset needs >= 2 features");
  if (spec.n_train == 0 || spec.n_test == 0) {
    throw ConfigurationError("synthetic dataset needs non-empty splits");
  }
  Rng rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t d = spec.features;

  Matrix centres(static_cast<Eigen::Index>(spec.classes), static_cast<Eigen::Index>(d));
  for (Eigen::Index c = 0; c < centres.rows(); ++c) {
    for (Eigen::Index j = 0; j < centres.cols(); ++j) centres(c, j) = spec.spread * normal(rng);
  }

  auto draw = [&](std::size_t n) {
    Dataset ds;
    ds.num_classes = spec.classes;
    ds.inputs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    ds.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const int label = static_cast<int>(i % spec.classes);
      ds.labels[i] = label;
      auto row = ds.inputs.row(static_cast<Eigen::Index>(i));
      if (spec.kind == SyntheticKind::blobs) {
        for (std::size_t j = 0; j < d; ++j) {
          row(static_cast<Eigen::Index>(j)) = centres(label, static_cast<Eigen::Index>(j)) + normal(rng);
        }
      } else {
        // Random direction, radius (label + 1) plus radial noise.
        double norm = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          const double v = normal(rng);
          row(static_cast<Eigen::Index>(j)) = v;
          norm += v * v;
        }
        const double radius = static_cast<double>(label + 1) + spec.spread * normal(rng);
        row *= radius / std::sqrt(norm);
      }
    }
    return ds;
  };

  DatasetSplit split{draw(spec.n_train), draw(spec.n_test)};
  standardize(split.train, split.test);
  return split;
}

IdxArray read_idx(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open IDX file " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  const std::string where = path.string() + ": ";
  if (bytes.size() < 4) {
    throw IngestionError(where + "truncated header at byte offset " + std::to_string(bytes.size()));
  }
  if (bytes[0] != 0 || bytes[1] != 0) {
    throw IngestionError(where + "bad magic number at byte offset 0 (leading bytes must be zero)");
  }
  if (bytes[2] != 0x08) {
    throw IngestionError(where + "unsupported element type 0x" + std::to_string(bytes[2]) +
                         " at byte offset 2 (only unsigned byte 0x08)");
  }
  const std::size_t rank = bytes[3];
  if (rank == 0) throw IngestionError(where + "zero dimensions at byte offset 3");
  const std::size_t header = 4 + 4 * rank;
  if (bytes.size() < header) {
    throw IngestionError(where + "truncated dimension list at byte offset " +
                         std::to_string(bytes.size()));
  }
  IdxArray out;
  std::size_t count = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    out.dims.push_back(read_be32(bytes, 4 + 4 * i));
    count *= out.dims.back();
  }
  if (bytes.size() - header < count) {
    throw IngestionError(where + "truncated data: expected " + std::to_string(count) +
                         " bytes after header, file ends at byte offset " +
                         std::to_string(bytes.size()));
  }
  if (bytes.size() - header > count) {
    throw IngestionError(where + "trailing bytes after data at byte offset " +
                         std::to_string(header + count));
  }
  out.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
  return out;
}

void write_idx(const std::filesystem::path& path, const IdxArray& array) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError("cannot write IDX file " + path.string());
  const std::uint8_t head[4] = {0, 0, 0x08, static_cast<std::uint8_t>(array.dims.size())};
  out.write(reinterpret_cast<const char*>(head), 4);
  for (std::uint32_t d : array.dims) {
    const std::uint8_t be[4] = {static_cast<std::uint8_t>(d >> 24), static_cast<std::uint8_t>(d >> 16),
                                static_cast<std::uint8_t>(d >> 8), static_cast<std::uint8_t>(d)};
    out.write(reinterpret_cast<const char*>(be), 4);
  }
  out.write(reinterpret_cast<const char*>(array.data.data()),
            static_cast<std::streamsize>(array.data.size()));
}

Dataset load_idx_pair(const std::filesystem::path& images, const std::filesystem::path& labels,
                      std::size_t max_samples) {
  const IdxArray img = read_idx(images);
  const IdxArray lab = read_idx(labels);
  if (img.dims.size() != 3) {
    throw IngestionError(images.string() + ": expected magic 0x00000803 (3 dimensions) at byte offset 0");
  }
  if (lab.dims.size() != 1) {
    throw IngestionError(labels.string() + ": expected magic 0x00000801 (1 dimension) at byte offset 0");
  }
  if (img.dims[0] != lab.dims[0]) {
    throw IngestionError("image count " + std::to_string(img.dims[0]) + " in " + images.string() +
                         " does not match label count " + std::to_string(lab.dims[0]) + " in " +
                         labels.string() + " (byte offset 4)");
  }
  std::size_t n = img.dims[0];
  if (max_samples > 0) n = std::min(n, max_samples);
  const std::size_t pixels = std::size_t{img.dims[1]} * img.dims[2];

  Dataset ds;
  ds.image = ImageShape{1, img.dims[1], img.dims[2]};
  ds.inputs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(pixels));
  ds.labels.resize(n);
  int max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < pixels; ++j) {
      ds.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          img.data[i * pixels + j] / 255.0;
    }
    ds.labels[i] = lab.data[i];
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.num_classes = static_cast<std::size_t>(max_label) + 1;
  return ds;
}

DatasetSplit load_idx(const IdxSpec& spec) {
  DatasetSplit split{load_idx_pair(spec.train_images, spec.train_labels, spec.max_train),
                     load_idx_pair(spec.test_images, spec.test_labels, spec.max_test)};
  if (split.train.features() != split.test.features()) {
    throw IngestionError("train and test images have different sizes");
  }
  const std::size_t classes = std::max(split.train.num_classes, split.test.num_classes);
  split.train.num_classes = classes;
  split.test.num_classes = classes;
  split.train.augment = spec.augment;
  return split;
}

}  // namespace lanmax

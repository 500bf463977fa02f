#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lanmax/faultmem.hpp"
#include "lanmax/net.hpp"

namespace lanmax {

struct ImageShape {
  std::size_t channels = 1;
  std::size_t height = 0;
  std::size_t width = 0;
  bool operator==(const ImageShape&) const = default;
};

struct Dataset {
  Matrix inputs;  // one sample per row
  std::vector<int> labels;
  std::size_t num_classes = 0;
  std::optional<ImageShape> image;
  // Random horizontal flip + pad-and-crop when batches are drawn. Images only.
  bool augment = false;
  std::size_t augment_pad = 4;

  std::size_t size() const { return labels.size(); }
  std::size_t features() const { return static_cast<std::size_t>(inputs.cols()); }

  // Rows `indices` as a batch. Augmentation is applied only when `augment_rng`
  // is given and the dataset is augmentable.
  Matrix gather(std::span<const std::size_t> indices, Rng* augment_rng = nullptr) const;
  std::vector<int> gather_labels(std::span<const std::size_t> indices) const;
};

struct DatasetSplit {
  Dataset train;
  Dataset test;
};

enum class SyntheticKind { blobs, rings };

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::blobs;
  std::size_t n_train = 4096;
  std::size_t n_test = 2048;
  std::size_t classes = 4;
  std::size_t features = 32;
  // Blobs: isotropic unit-variance clusters whose centres are drawn with this
  // per-coordinate standard deviation. Rings: radial noise.
  double spread = 0.5;
  std::uint64_t seed = 7;
  bool operator==(const SyntheticSpec&) const = default;
};

struct IdxSpec {
  std::filesystem::path train_images;
  std::filesystem::path train_labels;
  std::filesystem::path test_images;
  std::filesystem::path test_labels;
  std::size_t max_train = 0;  // 0 keeps every sample
  std::size_t max_test = 0;
  bool augment = false;
  bool operator==(const IdxSpec&) const = default;
};

// Seeded synthetic classification task, inputs standardized per feature with
// the training statistics.
DatasetSplit make_synthetic(const SyntheticSpec& spec);

struct IdxArray {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;
};

// Big-endian IDX file of unsigned bytes (magic 0x00000801 / 0x00000803 / ...).
// Throws IngestionError naming the byte offset of the problem.
IdxArray read_idx(const std::filesystem::path& path);
void write_idx(const std::filesystem::path& path, const IdxArray& array);

// Image/label pair -> dataset with pixels scaled to [0, 1].
Dataset load_idx_pair(const std::filesystem::path& images, const std::filesystem::path& labels,
                      std::size_t max_samples = 0);
DatasetSplit load_idx(const IdxSpec& spec);

}  // namespace lanmax

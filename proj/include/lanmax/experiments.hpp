#pragma once

// Experiment drivers behind the CLI: single training run, uniform-noise sweep,
// layer sensitivity and the alpha/energy Pareto sweep. Every driver is a pure
// function of (config, seeds) and writes its CSVs through write_file_atomic,
// so reruns produce identical bytes regardless of the thread count.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lanmax/config.hpp"
#include "lanmax/csv.hpp"
#include "lanmax/eval.hpp"
#include "lanmax/outer.hpp"
#include "lanmax/plot.hpp"

namespace lanmax {

// Independent stream per (seed, purpose, index).
Rng derive_rng(std::uint64_t seed, std::uint64_t purpose, std::uint64_t index = 0);

enum StreamPurpose : std::uint64_t {
  kStreamInit = 1,
  kStreamTrain = 2,
  kStreamEval = 3,
  kStreamSensitivity = 4,
};

DatasetSplit load_dataset(const DatasetConfig& cfg);
std::vector<LayerSpec> build_architecture(const ModelConfig& model, const Dataset& data);
// Same initial weights for every run sharing a seed.
BinaryNetwork make_network(const ModelConfig& model, const Dataset& data, std::uint64_t seed);

// Runs fn(0..n-1) on up to `threads` workers. Exceptions are rethrown after
// all jobs finished, lowest index first.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

CsvTable epoch_log_table(const std::vector<EpochRecord>& epochs, std::size_t layers);

struct ParetoPoint {
  double alpha = 0.0;
  std::uint64_t seed = 0;
  NoiseVector p;
  double energy = 0.0;  // normalized
  double acc_mean = 0.0;
  double acc_halfwidth = 0.0;
  int trials = 0;
  bool operator==(const ParetoPoint&) const = default;
};

struct UniformPoint {
  double p_t = 0.0;
  std::uint64_t seed = 0;
  double energy = 0.0;
  double acc_mean = 0.0;
  double acc_halfwidth = 0.0;
  int trials = 0;
};

struct FailedRun {
  std::string context;
  std::string message;
};

struct ParetoReport {
  std::vector<ParetoPoint> points;
  std::vector<UniformPoint> uniform;
  std::vector<FailedRun> failures;
  double fp16_energy = 16.0;
  std::vector<TrainResult> runs;  // in points order; empty entries for failed runs
};

CsvTable pareto_table(const std::vector<ParetoPoint>& points);
std::vector<ParetoPoint> pareto_points_from(const CsvTable& table);

ParetoReport run_pareto(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

struct SweepReport {
  std::vector<std::uint64_t> seeds;
  std::vector<SweepMatrix> per_seed;
  SweepMatrix mean;
};

SweepReport run_uniform_sweep(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

struct SensitivityReport {
  AccuracyEstimate baseline;
  std::vector<SensitivityResult> layers;
  std::vector<BoxStats> boxes;
};

SensitivityReport run_sensitivity(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

struct TrainReport {
  TrainResult result;
  AccuracyEstimate accuracy;
  double energy = 0.0;
};

// One LaNMax run at cfg.outer.alpha for the first seed; writes the epoch log,
// a checkpoint and the final evaluation.
TrainReport run_train(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

// Evaluates a checkpoint at its stored noise vector, or at a uniform level.
AccuracyEstimate run_eval(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint,
                          const std::optional<double>& uniform_p,
                          const std::filesystem::path& out_dir);

}  // namespace lanmax

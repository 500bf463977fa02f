// Command-line driver for the LaNMax experiments.
//
//   lanmax train         --config desk.cfg --out runs/train
//   lanmax pareto        --config desk.cfg --out runs/pareto --threads 4
//   lanmax uniform-sweep --config desk.cfg --out runs/sweep
//   lanmax sensitivity   --config desk.cfg --checkpoint runs/train/checkpoint.json --out runs/sens
//   lanmax eval          --config desk.cfg --checkpoint runs/train/checkpoint.json [--p 0.01]

#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "lanmax/config.hpp"
#include "lanmax/experiments.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "lanmax_out";
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "experiment config file (defaults when omitted)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "run with this single seed instead of the config's list");
  cmd->add_option("--out", f.out, "output directory")->capture_default_str();
  cmd->add_option("--threads", f.threads, "worker threads")->check(CLI::PositiveNumber);
}

lanmax::ExperimentConfig resolve(const CommonFlags& f, lanmax::ExperimentKind kind) {
  lanmax::ExperimentConfig cfg = f.config.empty() ? lanmax::ExperimentConfig{} : lanmax::load_config(f.config);
  cfg.kind = kind;
  if (f.seed) cfg.seeds = {*f.seed};
  if (f.threads) cfg.threads = *f.threads;
  return cfg;
}

void print_estimate(const lanmax::AccuracyEstimate& a) {
  std::cout << "accuracy " << a.mean << " % +/- " << a.ci_halfwidth << " (" << a.trials
            << " trials" << (a.converged ? "" : ", not converged") << ")\n";
}

}  // namespace

int main(int argc, char** argv) {
  using namespace lanmax;
  CLI::App app{"Layerwise noise maximisation for binary networks in unreliable memory"};
  app.require_subcommand(1);

  CommonFlags train_f, pareto_f, sweep_f, sens_f, eval_f;
  auto* train = app.add_subcommand("train", "one LaNMax training run at [outer] alpha");
  add_common(train, train_f);
  auto* pareto = app.add_subcommand("pareto", "alpha sweep against uniform-noise baselines");
  add_common(pareto, pareto_f);
  auto* sweep = app.add_subcommand("uniform-sweep", "train at uniform p_t, evaluate over p");
  add_common(sweep, sweep_f);
  auto* sens = app.add_subcommand("sensitivity", "per-layer randomization of a checkpoint");
  add_common(sens, sens_f);
  std::string sens_ckpt;
  sens->add_option("--checkpoint", sens_ckpt, "checkpoint (overrides [sensitivity] checkpoint)")
      ->check(CLI::ExistingFile);
  auto* eval = app.add_subcommand("eval", "Monte-Carlo accuracy of a checkpoint");
  add_common(eval, eval_f);
  std::string eval_ckpt;
  std::optional<double> eval_p;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint to evaluate")->required()->check(CLI::ExistingFile);
  eval->add_option("--p", eval_p, "evaluate at this uniform noise level instead of the stored one")
      ->check(CLI::Range(0.0, 0.5));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      const ExperimentConfig cfg = resolve(train_f, ExperimentKind::train);
      const TrainReport rep = run_train(cfg, train_f.out);
      std::cout << "final p:";
      for (double p : rep.result.p.rates()) std::cout << ' ' << p;
      std::cout << "\nnormalized energy " << rep.energy << '\n';
      print_estimate(rep.accuracy);
    } else if (*pareto) {
      const ExperimentConfig cfg = resolve(pareto_f, ExperimentKind::pareto);
      const ParetoReport rep = run_pareto(cfg, pareto_f.out);
      for (const ParetoPoint& pt : rep.points) {
        std::cout << "alpha " << pt.alpha << " seed " << pt.seed << ": E " << pt.energy << ", acc "
                  << pt.acc_mean << " +/- " << pt.acc_halfwidth << '\n';
      }
      for (const UniformPoint& u : rep.uniform) {
        std::cout << "uniform p_t " << u.p_t << " seed " << u.seed << ": E " << u.energy << ", acc "
                  << u.acc_mean << " +/- " << u.acc_halfwidth << '\n';
      }
      for (const FailedRun& f : rep.failures) std::cerr << "FAILED " << f.context << ": " << f.message << '\n';
      if (!rep.failures.empty()) return 2;
    } else if (*sweep) {
      const ExperimentConfig cfg = resolve(sweep_f, ExperimentKind::uniform_sweep);
      const SweepReport rep = run_uniform_sweep(cfg, sweep_f.out);
      for (std::size_t r = 0; r < rep.mean.train_rates.size(); ++r) {
        std::cout << "p_t " << rep.mean.train_rates[r] << ':';
        for (const AccuracyEstimate& c : rep.mean.cells[r]) std::cout << ' ' << c.mean;
        std::cout << '\n';
      }
    } else if (*sens) {
      ExperimentConfig cfg = sens_f.config.empty() ? ExperimentConfig{} : load_config(sens_f.config);
      if (!sens_ckpt.empty()) cfg.checkpoint = sens_ckpt;
      cfg.kind = ExperimentKind::sensitivity;
      if (sens_f.seed) cfg.seeds = {*sens_f.seed};
      if (sens_f.threads) cfg.threads = *sens_f.threads;
      const SensitivityReport rep = run_sensitivity(cfg, sens_f.out);
      std::cout << "baseline ";
      print_estimate(rep.baseline);
      for (std::size_t l = 0; l < rep.boxes.size(); ++l) {
        std::cout << "layer " << (l + 1) << ": median " << rep.boxes[l].median << " [" << rep.boxes[l].min
                  << ", " << rep.boxes[l].max << "]\n";
      }
    } else if (*eval) {
      const ExperimentConfig cfg = resolve(eval_f, ExperimentKind::train);
      print_estimate(run_eval(cfg, eval_ckpt, eval_p, eval_f.out));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

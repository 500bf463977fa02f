#include "lanmax/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

#include "lanmax/errors.hpp"

namespace lanmax {

namespace {

std::string seed_str(std::uint64_t s) { return std::to_string(s); }

std::vector<std::string> p_columns(std::size_t layers, const std::string& prefix = "p_") {
  std::vector<std::string> cols;
  for (std::size_t l = 1; l <= layers; ++l) cols.push_back(prefix + std::to_string(l));
  return cols;
}

void append(std::vector<std::string>& row, const std::vector<double>& values) {
  for (double v : values) row.push_back(format_double(v));
}

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

}  // namespace

Rng derive_rng(std::uint64_t seed, std::uint64_t purpose, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(purpose), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

DatasetSplit load_dataset(const DatasetConfig& cfg) {
  switch (cfg.source) {
    case DataSource::blobs: {
      SyntheticSpec s = cfg.synthetic;
      s.kind = SyntheticKind::blobs;
      return make_synthetic(s);
    }
    case DataSource::rings: {
      SyntheticSpec s = cfg.synthetic;
      s.kind = SyntheticKind::rings;
      return make_synthetic(s);
    }
    case DataSource::idx:
      return load_idx(cfg.idx);
  }
  throw ConfigurationError("unknown dataset source");
}

std::vector<LayerSpec> build_architecture(const ModelConfig& model, const Dataset& data) {
  auto scale = [&](std::size_t fan_in) {
    return model.fan_in_scale ? 1.0 / std::sqrt(static_cast<double>(fan_in)) : 1.0;
  };
  auto width = [&](std::size_t base) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(base * model.rho)));
  };
  std::vector<LayerSpec> layers;
  std::size_t in = data.features();
  if (model.arch == Architecture::conv) {
    if (!data.image) throw ConfigurationError("conv architecture needs image data");
    std::size_t ch = data.image->channels;
    for (std::size_t c : model.conv_channels) {
      const std::size_t out = width(c);
      layers.push_back(LayerSpec::conv2d(ch, out, model.kernel, data.image->height,
                                         data.image->width, model.bias,
                                         scale(ch * model.kernel * model.kernel)));
      ch = out;
    }
    in = ch * data.image->height * data.image->width;
  }
  for (std::size_t h : model.hidden) {
    const std::size_t out = width(h);
    layers.push_back(LayerSpec::dense(in, out, model.bias, scale(in)));
    in = out;
  }
  layers.push_back(LayerSpec::dense(in, data.num_classes, model.bias, scale(in)));
  return layers;
}

BinaryNetwork make_network(const ModelConfig& model, const Dataset& data, std::uint64_t seed) {
  Rng rng = derive_rng(seed, kStreamInit);
  return BinaryNetwork::create(build_architecture(model, data), model.init_range, rng);
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  auto run = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) run(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) run(i);
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

CsvTable epoch_log_table(const std::vector<EpochRecord>& epochs, std::size_t layers) {
  CsvTable t;
  t.schema = "epoch_log";
  t.header = {"epoch"};
  for (auto& c : p_columns(layers)) t.header.push_back(c);
  for (const char* c : {"E_norm", "mean_loss", "best_loss"}) t.header.emplace_back(c);
  for (auto& c : p_columns(layers, "slope_")) t.header.push_back(c);
  for (const char* c : {"grad_norm", "lr", "outer_update"}) t.header.emplace_back(c);
  for (const EpochRecord& r : epochs) {
    std::vector<std::string> row{std::to_string(r.epoch)};
    append(row, r.p.rates());
    append(row, {r.energy, r.mean_loss, r.best_loss});
    if (r.slopes.empty()) {
      row.insert(row.end(), layers, "");
    } else {
      append(row, r.slopes);
    }
    append(row, {r.gradient_norm, r.lr});
    row.push_back(to_string(r.update));
    t.add_row(std::move(row));
  }
  return t;
}

CsvTable pareto_table(const std::vector<ParetoPoint>& points) {
  CsvTable t;
  t.schema = "pareto";
  const std::size_t layers = points.empty() ? 0 : points.front().p.size();
  t.header = {"alpha", "seed"};
  for (auto& c : p_columns(layers)) t.header.push_back(c);
  for (const char* c : {"E_norm", "acc_mean", "acc_halfwidth", "trials"}) t.header.emplace_back(c);
  for (const ParetoPoint& pt : points) {
    std::vector<std::string> row{format_double(pt.alpha), seed_str(pt.seed)};
    append(row, pt.p.rates());
    append(row, {pt.energy, pt.acc_mean, pt.acc_halfwidth});
    row.push_back(std::to_string(pt.trials));
    t.add_row(std::move(row));
  }
  return t;
}

std::vector<ParetoPoint> pareto_points_from(const CsvTable& t) {
  std::vector<ParetoPoint> out;
  std::vector<std::size_t> pcols;
  for (std::size_t l = 1;; ++l) {
    const std::string name = "p_" + std::to_string(l);
    if (std::find(t.header.begin(), t.header.end(), name) == t.header.end()) break;
    pcols.push_back(t.column(name));
  }
  for (const auto& row : t.rows) {
    ParetoPoint pt;
    pt.alpha = parse_double(row[t.column("alpha")]);
    pt.seed = std::stoull(row[t.column("seed")]);
    std::vector<double> p;
    for (std::size_t c : pcols) p.push_back(parse_double(row[c]));
    pt.p = NoiseVector(std::move(p));
    pt.energy = parse_double(row[t.column("E_norm")]);
    pt.acc_mean = parse_double(row[t.column("acc_mean")]);
    pt.acc_halfwidth = parse_double(row[t.column("acc_halfwidth")]);
    pt.trials = std::stoi(row[t.column("trials")]);
    out.push_back(std::move(pt));
  }
  return out;
}

ParetoReport run_pareto(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  validate_config(cfg);
  const DatasetSplit data = load_dataset(cfg.dataset);
  const std::size_t n_seeds = cfg.seeds.size();
  const std::size_t n_lanmax = cfg.alphas.size() * n_seeds;
  const std::size_t n_uniform = cfg.uniform_baseline ? cfg.baseline_rates.size() * n_seeds : 0;

  ParetoReport report;
  report.points.resize(n_lanmax);
  report.runs.resize(n_lanmax);
  report.uniform.resize(n_uniform);
  std::vector<std::string> errors(n_lanmax + n_uniform);
  std::vector<bool> ok(n_lanmax + n_uniform, false);
  std::vector<CsvTable> logs(n_lanmax + n_uniform);

  parallel_for(n_lanmax + n_uniform, cfg.threads, [&](std::size_t job) {
    try {
      if (job < n_lanmax) {
        const std::size_t ai = job / n_seeds;
        const std::uint64_t seed = cfg.seeds[job % n_seeds];
        OuterConfig outer = cfg.outer;
        outer.alpha = cfg.alphas[ai];
        Rng train_rng = derive_rng(seed, kStreamTrain, ai);
        TrainResult r = train_lanmax(data.train, make_network(cfg.model, data.train, seed),
                                     cfg.inner, outer, cfg.energy, train_rng);
        Rng eval_rng = derive_rng(seed, kStreamEval, ai);
        const AccuracyEstimate acc = mc_accuracy(r.net, r.p, data.test, cfg.eval, eval_rng);
        EnergyModel em = cfg.energy;
        em.layer_sizes = r.net.layer_sizes();
        ParetoPoint& pt = report.points[job];
        pt.alpha = outer.alpha;
        pt.seed = seed;
        pt.p = r.p;
        pt.energy = network_energy(r.p, em).normalized;
        pt.acc_mean = acc.mean;
        pt.acc_halfwidth = acc.ci_halfwidth;
        pt.trials = acc.trials;
        logs[job] = epoch_log_table(r.epochs, r.net.num_layers());
        report.runs[job] = std::move(r);
      } else {
        const std::size_t u = job - n_lanmax;
        const std::size_t ri = u / n_seeds;
        const std::uint64_t seed = cfg.seeds[u % n_seeds];
        const double pt_rate = cfg.baseline_rates[ri];
        Rng train_rng = derive_rng(seed, kStreamTrain, 1000 + ri);
        TrainResult r = train_uniform(data.train, make_network(cfg.model, data.train, seed),
                                      cfg.inner, pt_rate, train_rng);
        Rng eval_rng = derive_rng(seed, kStreamEval, 1000 + ri);
        const AccuracyEstimate acc = mc_accuracy(r.net, r.p, data.test, cfg.eval, eval_rng);
        EnergyModel em = cfg.energy;
        em.layer_sizes = r.net.layer_sizes();
        UniformPoint& up = report.uniform[u];
        up.p_t = pt_rate;
        up.seed = seed;
        up.energy = network_energy(r.p, em).normalized;
        up.acc_mean = acc.mean;
        up.acc_halfwidth = acc.ci_halfwidth;
        up.trials = acc.trials;
        logs[job] = epoch_log_table(r.epochs, r.net.num_layers());
      }
      ok[job] = true;
    } catch (const std::exception& e) {
      errors[job] = e.what();
    }
  });

  // Collect failures and drop their placeholder points.
  std::vector<ParetoPoint> points;
  std::vector<TrainResult> runs;
  for (std::size_t j = 0; j < n_lanmax; ++j) {
    if (ok[j]) {
      points.push_back(report.points[j]);
      runs.push_back(std::move(report.runs[j]));
    } else {
      report.failures.push_back({"alpha=" + format_double(cfg.alphas[j / n_seeds]) +
                                     " seed=" + seed_str(cfg.seeds[j % n_seeds]),
                                 errors[j]});
    }
  }
  std::vector<UniformPoint> uniform;
  for (std::size_t u = 0; u < n_uniform; ++u) {
    if (ok[n_lanmax + u]) {
      uniform.push_back(report.uniform[u]);
    } else {
      report.failures.push_back({"p_t=" + format_double(cfg.baseline_rates[u / n_seeds]) +
                                     " seed=" + seed_str(cfg.seeds[u % n_seeds]),
                                 errors[n_lanmax + u]});
    }
  }
  report.points = std::move(points);
  report.runs = std::move(runs);
  report.uniform = std::move(uniform);

  if (out_dir.empty()) return report;

  write_file_atomic(out_dir / "pareto.csv", pareto_table(report.points).str());

  CsvTable ut;
  ut.schema = "pareto_uniform";
  ut.header = {"p_t", "seed", "E_norm", "acc_mean", "acc_halfwidth", "trials"};
  for (const UniformPoint& u : report.uniform) {
    ut.add_row({format_double(u.p_t), seed_str(u.seed), format_double(u.energy),
                format_double(u.acc_mean), format_double(u.acc_halfwidth), std::to_string(u.trials)});
  }
  write_file_atomic(out_dir / "pareto_uniform.csv", ut.str());

  CsvTable et;
  et.schema = "errors";
  et.header = {"context", "message"};
  for (const FailedRun& f : report.failures) {
    std::string msg = f.message;
    std::replace(msg.begin(), msg.end(), ',', ';');
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    et.add_row({f.context, msg});
  }
  write_file_atomic(out_dir / "pareto_errors.csv", et.str());

  for (std::size_t job = 0; job < logs.size(); ++job) {
    if (!ok[job]) continue;
    std::string name;
    if (job < n_lanmax) {
      name = "lanmax_alpha" + std::to_string(job / n_seeds) + "_seed" + seed_str(cfg.seeds[job % n_seeds]);
    } else {
      const std::size_t u = job - n_lanmax;
      name = "uniform_rate" + std::to_string(u / n_seeds) + "_seed" + seed_str(cfg.seeds[u % n_seeds]);
    }
    write_file_atomic(out_dir / "logs" / (name + ".csv"), logs[job].str());
  }

  // Seed-averaged curves.
  LinePlot plot;
  plot.title = "Accuracy vs normalized memory energy";
  plot.x_label = "normalized energy E (log scale)";
  plot.y_label = "average accuracy (%)";
  plot.log_x = true;
  Series lanmax_series{"BC, LaNMax (alpha sweep)", {}, true};
  for (double a : cfg.alphas) {
    std::vector<double> es, accs;
    for (const ParetoPoint& pt : report.points) {
      if (pt.alpha == a) {
        es.push_back(pt.energy);
        accs.push_back(pt.acc_mean);
      }
    }
    if (!es.empty()) lanmax_series.points.emplace_back(mean_of(es), mean_of(accs));
  }
  std::sort(lanmax_series.points.begin(), lanmax_series.points.end());
  plot.series.push_back(lanmax_series);
  if (cfg.uniform_baseline) {
    Series us{"BC, uniform noise", {}, true};
    std::optional<double> noiseless_acc;
    for (double r : cfg.baseline_rates) {
      std::vector<double> es, accs;
      for (const UniformPoint& u : report.uniform) {
        if (u.p_t == r) {
          es.push_back(u.energy);
          accs.push_back(u.acc_mean);
        }
      }
      if (es.empty()) continue;
      us.points.emplace_back(mean_of(es), mean_of(accs));
      if (r == 0.0) noiseless_acc = mean_of(accs);
    }
    std::sort(us.points.begin(), us.points.end());
    plot.series.push_back(us);
    if (noiseless_acc) {
      plot.series.push_back({"FP16, noiseless (energy only)", {{report.fp16_energy, *noiseless_acc}}, false});
    }
  }
  write_file_atomic(out_dir / "pareto.svg", plot.svg());
  return report;
}

SweepReport run_uniform_sweep(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  validate_config(cfg);
  const DatasetSplit data = load_dataset(cfg.dataset);
  const std::size_t n_seeds = cfg.seeds.size();
  const std::size_t n_rates = cfg.sweep_train_rates.size();
  std::vector<SweepMatrix> rows(n_seeds * n_rates);

  parallel_for(rows.size(), cfg.threads, [&](std::size_t job) {
    const std::uint64_t seed = cfg.seeds[job / n_rates];
    const std::size_t ri = job % n_rates;
    Rng train_rng = derive_rng(seed, kStreamTrain, 2000 + ri);
    Rng eval_rng = derive_rng(seed, kStreamEval, 2000 + ri);
    const UniformTrainer trainer = [&](double p_t) {
      return train_uniform(data.train, make_network(cfg.model, data.train, seed), cfg.inner, p_t,
                           train_rng)
          .net;
    };
    rows[job] = uniform_noise_sweep({cfg.sweep_train_rates[ri]}, cfg.sweep_eval_rates, trainer,
                                    data.test, cfg.eval, eval_rng);
  });

  SweepReport rep;
  rep.seeds = cfg.seeds;
  rep.mean = SweepMatrix{cfg.sweep_train_rates, cfg.sweep_eval_rates, {}};
  rep.mean.cells.assign(n_rates, std::vector<AccuracyEstimate>(cfg.sweep_eval_rates.size()));
  for (std::size_t s = 0; s < n_seeds; ++s) {
    SweepMatrix m{cfg.sweep_train_rates, cfg.sweep_eval_rates, {}};
    for (std::size_t r = 0; r < n_rates; ++r) m.cells.push_back(rows[s * n_rates + r].cells.front());
    rep.per_seed.push_back(std::move(m));
  }
  for (std::size_t r = 0; r < n_rates; ++r) {
    for (std::size_t e = 0; e < cfg.sweep_eval_rates.size(); ++e) {
      AccuracyEstimate& cell = rep.mean.cells[r][e];
      double hw2 = 0.0;
      for (const SweepMatrix& m : rep.per_seed) {
        cell.mean += m.cells[r][e].mean;
        hw2 += m.cells[r][e].ci_halfwidth * m.cells[r][e].ci_halfwidth;
        cell.trials += m.cells[r][e].trials;
      }
      cell.mean /= static_cast<double>(n_seeds);
      cell.ci_halfwidth = std::sqrt(hw2) / static_cast<double>(n_seeds);
      cell.confidence = cfg.eval.confidence;
      cell.converged = true;
    }
  }

  if (out_dir.empty()) return rep;

  CsvTable mean;
  mean.schema = "sweep";
  mean.header = {"p_t", "p_eval", "acc_mean", "acc_halfwidth"};
  CsvTable runs;
  runs.schema = "sweep_runs";
  runs.header = {"seed", "p_t", "p_eval", "acc_mean", "acc_halfwidth", "trials"};
  LinePlot plot;
  plot.title = "Accuracy vs evaluation noise for uniform training noise p_t";
  plot.x_label = "p (log scale)";
  plot.y_label = "average accuracy (%)";
  plot.log_x = true;
  for (std::size_t r = 0; r < n_rates; ++r) {
    Series s{"p_t = " + format_double(cfg.sweep_train_rates[r]), {}, true};
    for (std::size_t e = 0; e < cfg.sweep_eval_rates.size(); ++e) {
      const AccuracyEstimate& c = rep.mean.cells[r][e];
      mean.add_row({format_double(cfg.sweep_train_rates[r]), format_double(cfg.sweep_eval_rates[e]),
                    format_double(c.mean), format_double(c.ci_halfwidth)});
      s.points.emplace_back(cfg.sweep_eval_rates[e], c.mean);
    }
    plot.series.push_back(std::move(s));
  }
  for (std::size_t si = 0; si < n_seeds; ++si) {
    for (std::size_t r = 0; r < n_rates; ++r) {
      for (std::size_t e = 0; e < cfg.sweep_eval_rates.size(); ++e) {
        const AccuracyEstimate& c = rep.per_seed[si].cells[r][e];
        runs.add_row({seed_str(cfg.seeds[si]), format_double(cfg.sweep_train_rates[r]),
                      format_double(cfg.sweep_eval_rates[e]), format_double(c.mean),
                      format_double(c.ci_halfwidth), std::to_string(c.trials)});
      }
    }
  }
  write_file_atomic(out_dir / "uniform_sweep.csv", mean.str());
  write_file_atomic(out_dir / "uniform_sweep_runs.csv", runs.str());
  write_file_atomic(out_dir / "uniform_sweep.svg", plot.svg());
  return rep;
}

SensitivityReport run_sensitivity(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  validate_config(cfg);
  const Checkpoint ckpt = load_checkpoint(cfg.checkpoint);
  const DatasetSplit data = load_dataset(cfg.dataset);
  const std::uint64_t seed = cfg.seeds.front();
  const std::size_t layers = ckpt.net.num_layers();

  SensitivityReport rep;
  Rng base_rng = derive_rng(seed, kStreamSensitivity, 0);
  rep.baseline = mc_accuracy(ckpt.net, NoiseVector::uniform(layers, cfg.sensitivity_p), data.test,
                             cfg.eval, base_rng);
  rep.layers.resize(layers);
  parallel_for(layers, cfg.threads, [&](std::size_t l) {
    Rng rng = derive_rng(seed, kStreamSensitivity, l + 1);
    SensitivityResult r;
    r.layer = l;
    r.baseline = rep.baseline;
    r.samples = randomized_layer_accuracy(ckpt.net, cfg.sensitivity_p, l, cfg.sensitivity_trials,
                                          data.test, rng);
    rep.layers[l] = std::move(r);
  });
  for (const SensitivityResult& r : rep.layers) rep.boxes.push_back(box_stats(r.samples));

  if (out_dir.empty()) return rep;
  CsvTable t;
  t.schema = "sensitivity";
  t.header = {"layer", "min", "q1", "median", "q3", "max", "baseline"};
  BoxPlot plot;
  plot.title = "Layer sensitivity under uniform noise p = " + format_double(cfg.sensitivity_p);
  plot.x_label = "layer index";
  plot.y_label = "accuracy distribution (%)";
  plot.baseline = rep.baseline.mean;
  for (std::size_t l = 0; l < layers; ++l) {
    const BoxStats& b = rep.boxes[l];
    t.add_row({std::to_string(l + 1), format_double(b.min), format_double(b.q1),
               format_double(b.median), format_double(b.q3), format_double(b.max),
               format_double(rep.baseline.mean)});
    plot.labels.push_back(std::to_string(l + 1));
    plot.boxes.push_back(b);
  }
  write_file_atomic(out_dir / "sensitivity.csv", t.str());

  CsvTable raw;
  raw.schema = "sensitivity_samples";
  raw.header = {"layer", "trial", "accuracy"};
  for (const SensitivityResult& r : rep.layers) {
    for (std::size_t i = 0; i < r.samples.size(); ++i) {
      raw.add_row({std::to_string(r.layer + 1), std::to_string(i + 1), format_double(r.samples[i])});
    }
  }
  write_file_atomic(out_dir / "sensitivity_samples.csv", raw.str());
  write_file_atomic(out_dir / "sensitivity.svg", plot.svg());
  return rep;
}

namespace {

CsvTable eval_table(const std::string& context, const NoiseVector& p, const AccuracyEstimate& a) {
  CsvTable t;
  t.schema = "eval";
  t.header = {"context"};
  for (auto& c : p_columns(p.size())) t.header.push_back(c);
  for (const char* c : {"acc_mean", "acc_halfwidth", "trials", "converged"}) t.header.emplace_back(c);
  std::vector<std::string> row{context};
  append(row, p.rates());
  append(row, {a.mean, a.ci_halfwidth});
  row.push_back(std::to_string(a.trials));
  row.push_back(a.converged ? "true" : "false");
  t.add_row(std::move(row));
  return t;
}

}  // namespace

TrainReport run_train(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  validate_config(cfg);
  const DatasetSplit data = load_dataset(cfg.dataset);
  const std::uint64_t seed = cfg.seeds.front();
  Rng train_rng = derive_rng(seed, kStreamTrain, 0);
  TrainReport rep;
  rep.result = train_lanmax(data.train, make_network(cfg.model, data.train, seed), cfg.inner,
                            cfg.outer, cfg.energy, train_rng);
  Rng eval_rng = derive_rng(seed, kStreamEval, 0);
  rep.accuracy = mc_accuracy(rep.result.net, rep.result.p, data.test, cfg.eval, eval_rng);
  EnergyModel em = cfg.energy;
  em.layer_sizes = rep.result.net.layer_sizes();
  rep.energy = network_energy(rep.result.p, em).normalized;

  if (out_dir.empty()) return rep;
  std::filesystem::create_directories(out_dir);
  write_file_atomic(out_dir / "epoch_log.csv",
                    epoch_log_table(rep.result.epochs, rep.result.net.num_layers()).str());
  save_checkpoint(out_dir / "checkpoint.json",
                  Checkpoint{rep.result.net, rep.result.p, seed, cfg.inner.epochs});
  write_file_atomic(out_dir / "eval.csv",
                    eval_table("train_seed" + seed_str(seed), rep.result.p, rep.accuracy).str());
  return rep;
}

AccuracyEstimate run_eval(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint,
                          const std::optional<double>& uniform_p,
                          const std::filesystem::path& out_dir) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const DatasetSplit data = load_dataset(cfg.dataset);
  const NoiseVector p =
      uniform_p ? NoiseVector::uniform(ckpt.net.num_layers(), *uniform_p) : ckpt.p;
  Rng rng = derive_rng(cfg.seeds.front(), kStreamEval, 0);
  const AccuracyEstimate acc = mc_accuracy(ckpt.net, p, data.test, cfg.eval, rng);
  if (!out_dir.empty()) {
    write_file_atomic(out_dir / "eval.csv",
                      eval_table(checkpoint.filename().string(), p, acc).str());
  }
  return acc;
}

}  // namespace lanmax

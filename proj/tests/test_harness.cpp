#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "lanmax/config.hpp"
#include "lanmax/csv.hpp"
#include "lanmax/errors.hpp"
#include "lanmax/experiments.hpp"
#include "lanmax/plot.hpp"

using namespace lanmax;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

ExperimentConfig tiny_config() {
  return parse_config(R"(
[experiment]
seeds = 1, 2
[dataset]
n_train = 256
n_test = 128
features = 6
classes = 3
[model]
hidden = 12
[inner]
epochs = 3
batch_size = 32
lr_decay_period = 2
[outer]
s = 2
h = 0.02
[pareto]
alphas = 0.1, 0
baseline_rates = 0, 0.05
[sweep]
train_rates = 0, 0.05
eval_rates = 0, 0.05, 0.1
[sensitivity]
trials = 10
)");
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// Balanced-tag check good enough for the writer's output: every opened
// element is closed in order.
bool tags_balanced(const std::string& svg) {
  std::vector<std::string> stack;
  std::size_t pos = 0;
  while ((pos = svg.find('<', pos)) != std::string::npos) {
    const std::size_t end = svg.find('>', pos);
    if (end == std::string::npos) return false;
    std::string tag = svg.substr(pos + 1, end - pos - 1);
    pos = end + 1;
    if (tag.starts_with('?') || tag.starts_with('!')) continue;
    if (tag.ends_with('/')) continue;
    const std::string name = tag.substr(tag.starts_with('/') ? 1 : 0, tag.find_first_of(" \t\n") -
                                                                         (tag.starts_with('/') ? 1 : 0));
    if (tag.starts_with('/')) {
      if (stack.empty() || stack.back() != name) return false;
      stack.pop_back();
    } else {
      stack.push_back(name);
    }
  }
  return stack.empty();
}

}  // namespace

TEST_CASE("format_double round trips exactly") {
  Rng rng(1);
  std::uniform_int_distribution<std::uint64_t> bits;
  for (int i = 0; i < 20000; ++i) {
    const std::uint64_t b = bits(rng);
    double v;
    std::memcpy(&v, &b, sizeof v);
    if (!std::isfinite(v)) continue;
    REQUIRE(parse_double(format_double(v)) == v);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1e-4) == "1e-04");
  CHECK(format_double(0.0) == "0");
  CHECK_THROWS(parse_double("1.0x"));
  CHECK_THROWS(parse_double(""));
}

TEST_CASE("csv tables") {
  CsvTable t{"demo", 1, {"a", "b"}, {}};
  t.add_row({"1", "x"});
  t.add_row({"2", "y"});
  CHECK(t.str() == "# lanmax demo v1\na,b\n1,x\n2,y\n");
  const CsvTable back = parse_csv(t.str());
  CHECK(back.schema == "demo");
  CHECK(back.header == t.header);
  CHECK(back.rows == t.rows);
  CHECK(back.column("b") == 1);
  CHECK_THROWS_AS(back.column("c"), std::out_of_range);
  CHECK_THROWS(t.add_row({"only one"}));
  CHECK_THROWS(parse_csv("a,b\n1,2\n"));
  CHECK_THROWS(parse_csv("# lanmax demo v1\na,b\n1\n"));

  TempDir tmp("lanmax_test_csv");
  write_file_atomic(tmp.path / "t.csv", t.str());
  CHECK(read_csv(tmp.path / "t.csv").rows == t.rows);
  CHECK_FALSE(fs::exists(tmp.path / "t.csv.tmp"));
}

TEST_CASE("pareto points survive a csv round trip") {
  Rng rng(2);
  std::uniform_real_distribution<double> u(1e-4, 0.5);
  std::vector<ParetoPoint> pts;
  for (int i = 0; i < 30; ++i) {
    ParetoPoint p;
    p.alpha = u(rng);
    p.seed = static_cast<std::uint64_t>(i) * 977;
    p.p = NoiseVector({u(rng), u(rng), u(rng)});
    p.energy = u(rng);
    p.acc_mean = 100 * u(rng);
    p.acc_halfwidth = u(rng);
    p.trials = i + 1;
    pts.push_back(p);
  }
  CHECK(pareto_points_from(parse_csv(pareto_table(pts).str())) == pts);
}

TEST_CASE("box statistics") {
  CHECK(quantile({1, 2, 3, 4}, 0.5) == 2.5);
  CHECK(quantile({1, 2, 3, 4}, 0.25) == 1.75);
  const BoxStats b = box_stats({5, 1, 4, 2, 3});
  CHECK(b.min == 1);
  CHECK(b.q1 == 2);
  CHECK(b.median == 3);
  CHECK(b.q3 == 4);
  CHECK(b.max == 5);
  CHECK_THROWS(box_stats({}));

  Rng rng(3);
  std::normal_distribution<double> n(50, 10);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s(1 + trial % 23);
    for (double& v : s) v = n(rng);
    const BoxStats st = box_stats(s);
    CHECK(st.min <= st.q1);
    CHECK(st.q1 <= st.median);
    CHECK(st.median <= st.q3);
    CHECK(st.q3 <= st.max);
    CHECK(st.min == *std::min_element(s.begin(), s.end()));
    CHECK(st.max == *std::max_element(s.begin(), s.end()));
  }
}

TEST_CASE("svg output is well formed") {
  LinePlot lp{"t <&> title", "x", "y", true, {{"a", {{1e-4, 50}, {0.1, 60}}, true}}, 55.0};
  const std::string svg = lp.svg();
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("t &lt;&amp;&gt; title") != std::string::npos);
  CHECK(tags_balanced(svg));
  BoxPlot bp{"b", "layer", "acc", {"1", "2"}, {box_stats({1, 2, 3}), box_stats({4, 5})}, 3.0};
  CHECK(tags_balanced(bp.svg()));
  CHECK(tags_balanced(LinePlot{}.svg()));
}

TEST_CASE("derived random streams") {
  Rng a = derive_rng(1, kStreamTrain, 0);
  Rng b = derive_rng(1, kStreamTrain, 0);
  CHECK(a() == b());
  std::vector<std::uint64_t> firsts;
  for (std::uint64_t seed : {1, 2}) {
    for (std::uint64_t purpose : {kStreamInit, kStreamTrain, kStreamEval}) {
      for (std::uint64_t idx : {0, 1, 1000}) firsts.push_back(derive_rng(seed, purpose, idx)());
    }
  }
  std::sort(firsts.begin(), firsts.end());
  CHECK(std::adjacent_find(firsts.begin(), firsts.end()) == firsts.end());
}

TEST_CASE("parallel_for") {
  std::vector<int> hits(50, 0);
  parallel_for(50, 4, [&](std::size_t i) { hits[i] += 1; });
  CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  std::atomic<int> done{0};
  try {
    parallel_for(10, 3, [&](std::size_t i) {
      ++done;
      if (i == 7 || i == 2) throw std::runtime_error("job " + std::to_string(i));
    });
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()) == "job 2");
  }
  CHECK(done == 10);
}

TEST_CASE("architecture") {
  const ExperimentConfig cfg = tiny_config();
  const DatasetSplit data = load_dataset(cfg.dataset);
  const auto layers = build_architecture(cfg.model, data.train);
  REQUIRE(layers.size() == 2);
  CHECK(layers[0].in_features == 6);
  CHECK(layers[0].out_features == 12);
  CHECK(layers[1].out_features == 3);
  CHECK(layers[0].scale == doctest::Approx(1.0 / std::sqrt(6.0)));
  ModelConfig wide = cfg.model;
  wide.rho = 2.5;
  CHECK(build_architecture(wide, data.train)[0].out_features == 30);
  CHECK(make_network(cfg.model, data.train, 4).latent == make_network(cfg.model, data.train, 4).latent);
  CHECK(make_network(cfg.model, data.train, 4).latent != make_network(cfg.model, data.train, 5).latent);
}

TEST_CASE("pareto driver: cardinalities, files and thread independence") {
  ExperimentConfig cfg = tiny_config();
  TempDir one("lanmax_test_pareto1"), four("lanmax_test_pareto4");
  const ParetoReport r = run_pareto(cfg, one.path);
  cfg.threads = 4;
  run_pareto(cfg, four.path);

  CHECK(r.points.size() == 4);
  CHECK(r.uniform.size() == 4);
  CHECK(r.failures.empty());
  for (const auto& pt : r.points) {
    CHECK(pt.p.within(1e-4, 0.5));
    CHECK(pt.energy > 0.0);
  }
  for (const char* f : {"pareto.csv", "pareto_uniform.csv", "pareto_errors.csv", "pareto.svg",
                        "logs/lanmax_alpha0_seed1.csv", "logs/uniform_rate1_seed2.csv"}) {
    INFO(f);
    REQUIRE(fs::exists(one.path / f));
    CHECK(slurp(one.path / f) == slurp(four.path / f));
  }
  CHECK(pareto_points_from(read_csv(one.path / "pareto.csv")) == r.points);
  CHECK(tags_balanced(slurp(one.path / "pareto.svg")));
  const CsvTable log = read_csv(one.path / "logs/lanmax_alpha0_seed1.csv");
  CHECK(log.rows.size() == 3);
  CHECK(log.rows[2][log.column("outer_update")] == "inactive");
}

TEST_CASE("sweep, train, eval and sensitivity drivers") {
  ExperimentConfig cfg = tiny_config();
  TempDir tmp("lanmax_test_drivers");

  const SweepReport sw = run_uniform_sweep(cfg, tmp.path / "sweep");
  CHECK(sw.per_seed.size() == 2);
  CHECK(sw.mean.cells.size() == 2);
  CHECK(sw.mean.cells[0].size() == 3);
  CHECK(read_csv(tmp.path / "sweep/uniform_sweep.csv").rows.size() == 6);
  CHECK(read_csv(tmp.path / "sweep/uniform_sweep_runs.csv").rows.size() == 12);

  cfg.outer.alpha = 0.1;
  const TrainReport tr = run_train(cfg, tmp.path / "train");
  CHECK(read_csv(tmp.path / "train/epoch_log.csv").rows.size() == 3);
  CHECK(fs::exists(tmp.path / "train/checkpoint.json"));
  const AccuracyEstimate again =
      run_eval(cfg, tmp.path / "train/checkpoint.json", std::nullopt, tmp.path / "eval");
  CHECK(again.mean == doctest::Approx(tr.accuracy.mean).epsilon(0.05));
  CHECK(read_csv(tmp.path / "eval/eval.csv").rows.size() == 1);
  const AccuracyEstimate clean =
      run_eval(cfg, tmp.path / "train/checkpoint.json", 0.0, tmp.path / "eval0");
  CHECK(clean.trials == 1);

  cfg.checkpoint = tmp.path / "train/checkpoint.json";
  const SensitivityReport sr = run_sensitivity(cfg, tmp.path / "sens");
  CHECK(sr.layers.size() == 2);
  CHECK(sr.boxes.size() == 2);
  for (const auto& l : sr.layers) CHECK(l.samples.size() == 10);
  CHECK(read_csv(tmp.path / "sens/sensitivity.csv").rows.size() == 2);
  CHECK(read_csv(tmp.path / "sens/sensitivity_samples.csv").rows.size() == 20);
  CHECK(tags_balanced(slurp(tmp.path / "sens/sensitivity.svg")));
}

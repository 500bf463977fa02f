#include "lanmax/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "lanmax/csv.hpp"
#include "lanmax/errors.hpp"

namespace lanmax {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (item.empty()) throw std::invalid_argument("empty list element");
    out.push_back(item);
  }
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

long long parse_int(const std::string& s) {
  std::size_t pos = 0;
  const long long v = std::stoll(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("not an integer: '" + s + "'");
  return v;
}

std::uint64_t parse_u64(const std::string& s) {
  if (s.empty() || s[0] == '-') throw std::invalid_argument("not a non-negative integer: '" + s + "'");
  std::size_t pos = 0;
  const unsigned long long v = std::stoull(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("not an integer: '" + s + "'");
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "yes" || s == "1") return true;
  if (s == "false" || s == "no" || s == "0") return false;
  throw std::invalid_argument("not a boolean: '" + s + "'");
}

double num(const std::string& s) {
  try {
    return parse_double(s);
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument("not a number: '" + s + "'");
  }
}

double at_least(double v, double lo, const char* what) {
  if (!(v >= lo)) throw std::invalid_argument(std::string(what) + " must be >= " + format_double(lo));
  return v;
}

double positive(double v, const char* what) {
  if (!(v > 0.0)) throw std::invalid_argument(std::string(what) + " must be > 0");
  return v;
}

double rate(double v, const char* what) {
  if (!(v >= 0.0 && v <= 0.5)) throw std::invalid_argument(std::string(what) + " must be in [0, 0.5]");
  return v;
}

std::size_t count(const std::string& s, const char* what) {
  const long long v = parse_int(s);
  if (v < 1) throw std::invalid_argument(std::string(what) + " must be >= 1");
  return static_cast<std::size_t>(v);
}

template <class T, class F>
std::string join(const std::vector<T>& xs, F f) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? ", " : "") + f(xs[i]);
  return out;
}

std::string join_doubles(const std::vector<double>& xs) { return join(xs, format_double); }

template <class T>
std::string join_ints(const std::vector<T>& xs) {
  return join(xs, [](T v) { return std::to_string(v); });
}

std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) out.push_back(num(item));
  return out;
}

struct Field {
  std::function<void(ExperimentConfig&, const std::string&, const std::filesystem::path&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;
using PathSetter = std::function<void(ExperimentConfig&, const std::string&, const std::filesystem::path&)>;

Field field(Setter set, std::function<std::string(const ExperimentConfig&)> get) {
  return {[set](ExperimentConfig& c, const std::string& v, const std::filesystem::path&) { set(c, v); },
          std::move(get)};
}

Field path_field(PathSetter set,
                 std::function<std::string(const ExperimentConfig&)> get) {
  return {std::move(set), std::move(get)};
}

std::filesystem::path resolve(const std::string& v, const std::filesystem::path& base) {
  std::filesystem::path p(v);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p.lexically_normal();
}

const char* kind_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::train: return "train";
    case ExperimentKind::uniform_sweep: return "uniform-sweep";
    case ExperimentKind::sensitivity: return "sensitivity";
    case ExperimentKind::pareto: return "pareto";
  }
  return "?";
}

const char* source_name(DataSource s) {
  switch (s) {
    case DataSource::blobs: return "blobs";
    case DataSource::rings: return "rings";
    case DataSource::idx: return "idx";
  }
  return "?";
}

// Ordered so serialization is stable: section -> key -> field.
const std::vector<std::pair<std::string, std::vector<std::pair<std::string, Field>>>>& schema() {
  using C = ExperimentConfig;
  static const std::vector<std::pair<std::string, std::vector<std::pair<std::string, Field>>>> s = {
      {"experiment",
       {
           {"kind", field(
                        [](C& c, const std::string& v) {
                          if (v == "train") c.kind = ExperimentKind::train;
                          else if (v == "uniform-sweep") c.kind = ExperimentKind::uniform_sweep;
                          else if (v == "sensitivity") c.kind = ExperimentKind::sensitivity;
                          else if (v == "pareto") c.kind = ExperimentKind::pareto;
                          else throw std::invalid_argument("unknown experiment kind '" + v + "'");
                        },
                        [](const C& c) { return std::string(kind_name(c.kind)); })},
           {"seeds", field(
                         [](C& c, const std::string& v) {
                           c.seeds.clear();
                           for (const auto& s : split_list(v)) c.seeds.push_back(parse_u64(s));
                         },
                         [](const C& c) { return join_ints(c.seeds); })},
           {"threads", field([](C& c, const std::string& v) { c.threads = static_cast<int>(count(v, "threads")); },
                             [](const C& c) { return std::to_string(c.threads); })},
       }},
      {"dataset",
       {
           {"source", field(
                          [](C& c, const std::string& v) {
                            if (v == "blobs") c.dataset.source = DataSource::blobs;
                            else if (v == "rings") c.dataset.source = DataSource::rings;
                            else if (v == "idx") c.dataset.source = DataSource::idx;
                            else throw std::invalid_argument("unknown dataset source '" + v + "'");
                          },
                          [](const C& c) { return std::string(source_name(c.dataset.source)); })},
           {"n_train", field([](C& c, const std::string& v) { c.dataset.synthetic.n_train = count(v, "n_train"); },
                             [](const C& c) { return std::to_string(c.dataset.synthetic.n_train); })},
           {"n_test", field([](C& c, const std::string& v) { c.dataset.synthetic.n_test = count(v, "n_test"); },
                            [](const C& c) { return std::to_string(c.dataset.synthetic.n_test); })},
           {"classes", field(
                           [](C& c, const std::string& v) {
                             c.dataset.synthetic.classes = count(v, "classes");
                             if (c.dataset.synthetic.classes < 2) throw std::invalid_argument("classes must be >= 2");
                           },
                           [](const C& c) { return std::to_string(c.dataset.synthetic.classes); })},
           {"features", field(
                            [](C& c, const std::string& v) {
                              c.dataset.synthetic.features = count(v, "features");
                              if (c.dataset.synthetic.features < 2) throw std::invalid_argument("features must be >= 2");
                            },
                            [](const C& c) { return std::to_string(c.dataset.synthetic.features); })},
           {"spread", field([](C& c, const std::string& v) { c.dataset.synthetic.spread = at_least(num(v), 0.0, "spread"); },
                            [](const C& c) { return format_double(c.dataset.synthetic.spread); })},
           {"seed", field([](C& c, const std::string& v) { c.dataset.synthetic.seed = parse_u64(v); },
                          [](const C& c) { return std::to_string(c.dataset.synthetic.seed); })},
           {"train_images", path_field(
                                       [](C& c, const std::string& v, const std::filesystem::path& b) { c.dataset.idx.train_images = resolve(v, b); },
                                       [](const C& c) { return c.dataset.idx.train_images.string(); })},
           {"train_labels", path_field(
                                       [](C& c, const std::string& v, const std::filesystem::path& b) { c.dataset.idx.train_labels = resolve(v, b); },
                                       [](const C& c) { return c.dataset.idx.train_labels.string(); })},
           {"test_images", path_field(
                                      [](C& c, const std::string& v, const std::filesystem::path& b) { c.dataset.idx.test_images = resolve(v, b); },
                                      [](const C& c) { return c.dataset.idx.test_images.string(); })},
           {"test_labels", path_field(
                                      [](C& c, const std::string& v, const std::filesystem::path& b) { c.dataset.idx.test_labels = resolve(v, b); },
                                      [](const C& c) { return c.dataset.idx.test_labels.string(); })},
           {"max_train", field([](C& c, const std::string& v) { c.dataset.idx.max_train = static_cast<std::size_t>(parse_u64(v)); },
                               [](const C& c) { return std::to_string(c.dataset.idx.max_train); })},
           {"max_test", field([](C& c, const std::string& v) { c.dataset.idx.max_test = static_cast<std::size_t>(parse_u64(v)); },
                              [](const C& c) { return std::to_string(c.dataset.idx.max_test); })},
           {"augment", field([](C& c, const std::string& v) { c.dataset.idx.augment = parse_bool(v); },
                             [](const C& c) { return std::string(c.dataset.idx.augment ? "true" : "false"); })},
       }},
      {"model",
       {
           {"arch", field(
                        [](C& c, const std::string& v) {
                          if (v == "mlp") c.model.arch = Architecture::mlp;
                          else if (v == "conv") c.model.arch = Architecture::conv;
                          else throw std::invalid_argument("unknown architecture '" + v + "'");
                        },
                        [](const C& c) { return std::string(c.model.arch == Architecture::mlp ? "mlp" : "conv"); })},
           {"hidden", field(
                          [](C& c, const std::string& v) {
                            c.model.hidden.clear();
                            for (const auto& s : split_list(v)) c.model.hidden.push_back(count(s, "hidden width"));
                          },
                          [](const C& c) { return join_ints(c.model.hidden); })},
           {"conv_channels", field(
                                 [](C& c, const std::string& v) {
                                   c.model.conv_channels.clear();
                                   for (const auto& s : split_list(v)) c.model.conv_channels.push_back(count(s, "conv channels"));
                                 },
                                 [](const C& c) { return join_ints(c.model.conv_channels); })},
           {"kernel", field(
                          [](C& c, const std::string& v) {
                            c.model.kernel = count(v, "kernel");
                            if (c.model.kernel % 2 == 0) throw std::invalid_argument("kernel must be odd");
                          },
                          [](const C& c) { return std::to_string(c.model.kernel); })},
           {"rho", field([](C& c, const std::string& v) { c.model.rho = positive(num(v), "rho"); },
                         [](const C& c) { return format_double(c.model.rho); })},
           {"bias", field([](C& c, const std::string& v) { c.model.bias = parse_bool(v); },
                          [](const C& c) { return std::string(c.model.bias ? "true" : "false"); })},
           {"fan_in_scale", field([](C& c, const std::string& v) { c.model.fan_in_scale = parse_bool(v); },
                                  [](const C& c) { return std::string(c.model.fan_in_scale ? "true" : "false"); })},
           {"init_range", field(
                              [](C& c, const std::string& v) {
                                c.model.init_range = positive(num(v), "init_range");
                                if (c.model.init_range > 1.0) throw std::invalid_argument("init_range must be <= 1");
                              },
                              [](const C& c) { return format_double(c.model.init_range); })},
       }},
      {"inner",
       {
           {"learning_rate", field([](C& c, const std::string& v) { c.inner.learning_rate = positive(num(v), "learning_rate"); },
                                   [](const C& c) { return format_double(c.inner.learning_rate); })},
           {"lr_decay_factor", field(
                                   [](C& c, const std::string& v) {
                                     c.inner.lr_decay_factor = positive(num(v), "lr_decay_factor");
                                     if (c.inner.lr_decay_factor > 1.0) throw std::invalid_argument("lr_decay_factor must be <= 1");
                                   },
                                   [](const C& c) { return format_double(c.inner.lr_decay_factor); })},
           {"lr_decay_period", field([](C& c, const std::string& v) { c.inner.lr_decay_period = static_cast<int>(count(v, "lr_decay_period")); },
                                     [](const C& c) { return std::to_string(c.inner.lr_decay_period); })},
           {"momentum", field(
                            [](C& c, const std::string& v) {
                              c.inner.momentum = at_least(num(v), 0.0, "momentum");
                              if (c.inner.momentum >= 1.0) throw std::invalid_argument("momentum must be < 1");
                            },
                            [](const C& c) { return format_double(c.inner.momentum); })},
           {"weight_decay", field([](C& c, const std::string& v) { c.inner.weight_decay = at_least(num(v), 0.0, "weight_decay"); },
                                  [](const C& c) { return format_double(c.inner.weight_decay); })},
           {"batch_size", field([](C& c, const std::string& v) { c.inner.batch_size = count(v, "batch_size"); },
                                [](const C& c) { return std::to_string(c.inner.batch_size); })},
           {"epochs", field([](C& c, const std::string& v) { c.inner.epochs = static_cast<int>(count(v, "epochs")); },
                            [](const C& c) { return std::to_string(c.inner.epochs); })},
       }},
      {"outer",
       {
           {"alpha", field([](C& c, const std::string& v) { c.outer.alpha = at_least(num(v), 0.0, "alpha"); },
                           [](const C& c) { return format_double(c.outer.alpha); })},
           {"lambda", field([](C& c, const std::string& v) { c.outer.lambda = at_least(num(v), 0.0, "lambda"); },
                            [](const C& c) { return format_double(c.outer.lambda); })},
           {"h", field([](C& c, const std::string& v) { c.outer.h = at_least(num(v), 0.0, "h"); },
                       [](const C& c) { return format_double(c.outer.h); })},
           {"s", field(
                     [](C& c, const std::string& v) {
                       const long long s = parse_int(v);
                       if (s < 0) throw std::invalid_argument("s must be >= 0");
                       c.outer.s = static_cast<int>(s);
                     },
                     [](const C& c) { return std::to_string(c.outer.s); })},
           {"beta", field(
                        [](C& c, const std::string& v) {
                          c.outer.beta = at_least(num(v), 0.0, "beta");
                          if (c.outer.beta >= 1.0) throw std::invalid_argument("beta must be < 1");
                        },
                        [](const C& c) { return format_double(c.outer.beta); })},
           {"p_min", field([](C& c, const std::string& v) { c.outer.p_min = positive(rate(num(v), "p_min"), "p_min"); },
                           [](const C& c) { return format_double(c.outer.p_min); })},
           {"p_max", field([](C& c, const std::string& v) { c.outer.p_max = positive(rate(num(v), "p_max"), "p_max"); },
                           [](const C& c) { return format_double(c.outer.p_max); })},
           {"p_init", field([](C& c, const std::string& v) { c.outer.p_init = positive(rate(num(v), "p_init"), "p_init"); },
                            [](const C& c) { return format_double(c.outer.p_init); })},
       }},
      {"energy",
       {
           {"a", field([](C& c, const std::string& v) { c.energy.a = positive(num(v), "a"); },
                       [](const C& c) { return format_double(c.energy.a); })},
           {"zeta", field([](C& c, const std::string& v) { c.energy.zeta = static_cast<int>(count(v, "zeta")); },
                          [](const C& c) { return std::to_string(c.energy.zeta); })},
       }},
      {"eval",
       {
           {"target_interval", field([](C& c, const std::string& v) { c.eval.target_interval = positive(num(v), "target_interval"); },
                                     [](const C& c) { return format_double(c.eval.target_interval); })},
           {"confidence", field(
                              [](C& c, const std::string& v) {
                                c.eval.confidence = positive(num(v), "confidence");
                                if (c.eval.confidence >= 1.0) throw std::invalid_argument("confidence must be < 1");
                              },
                              [](const C& c) { return format_double(c.eval.confidence); })},
           {"min_trials", field(
                              [](C& c, const std::string& v) {
                                c.eval.min_trials = static_cast<int>(count(v, "min_trials"));
                                if (c.eval.min_trials < 2) throw std::invalid_argument("min_trials must be >= 2");
                              },
                              [](const C& c) { return std::to_string(c.eval.min_trials); })},
           {"max_trials", field([](C& c, const std::string& v) { c.eval.max_trials = static_cast<int>(count(v, "max_trials")); },
                                [](const C& c) { return std::to_string(c.eval.max_trials); })},
       }},
      {"pareto",
       {
           {"alphas", field(
                          [](C& c, const std::string& v) {
                            c.alphas = parse_doubles(v);
                            for (double a : c.alphas) at_least(a, 0.0, "alpha");
                          },
                          [](const C& c) { return join_doubles(c.alphas); })},
           {"uniform_baseline", field([](C& c, const std::string& v) { c.uniform_baseline = parse_bool(v); },
                                      [](const C& c) { return std::string(c.uniform_baseline ? "true" : "false"); })},
           {"baseline_rates", field(
                                  [](C& c, const std::string& v) {
                                    c.baseline_rates = parse_doubles(v);
                                    for (double p : c.baseline_rates) rate(p, "baseline rate");
                                  },
                                  [](const C& c) { return join_doubles(c.baseline_rates); })},
       }},
      {"sweep",
       {
           {"train_rates", field(
                               [](C& c, const std::string& v) {
                                 c.sweep_train_rates = parse_doubles(v);
                                 for (double p : c.sweep_train_rates) rate(p, "train rate");
                               },
                               [](const C& c) { return join_doubles(c.sweep_train_rates); })},
           {"eval_rates", field(
                              [](C& c, const std::string& v) {
                                c.sweep_eval_rates = parse_doubles(v);
                                for (double p : c.sweep_eval_rates) rate(p, "eval rate");
                              },
                              [](const C& c) { return join_doubles(c.sweep_eval_rates); })},
       }},
      {"sensitivity",
       {
           {"checkpoint", path_field(
                                     [](C& c, const std::string& v, const std::filesystem::path& b) { c.checkpoint = resolve(v, b); },
                                     [](const C& c) { return c.checkpoint.string(); })},
           {"p_uniform", field([](C& c, const std::string& v) { c.sensitivity_p = rate(num(v), "p_uniform"); },
                               [](const C& c) { return format_double(c.sensitivity_p); })},
           {"trials", field(
                          [](C& c, const std::string& v) {
                            c.sensitivity_trials = static_cast<int>(count(v, "trials"));
                            if (c.sensitivity_trials < 10) throw std::invalid_argument("trials must be >= 10");
                          },
                          [](const C& c) { return std::to_string(c.sensitivity_trials); })},
       }},
  };
  return s;
}

const Field* find_field(const std::string& section, const std::string& key) {
  for (const auto& [name, fields] : schema()) {
    if (name != section) continue;
    for (const auto& [k, f] : fields) {
      if (k == key) return &f;
    }
  }
  return nullptr;
}

bool known_section(const std::string& section) {
  return std::any_of(schema().begin(), schema().end(),
                     [&](const auto& s) { return s.first == section; });
}

void require_file(const std::filesystem::path& p, const char* what) {
  if (p.empty()) throw ParseError(std::string(what) + " is required for this dataset/experiment");
  if (!std::filesystem::is_regular_file(p)) {
    throw ParseError(std::string(what) + " '" + p.string() + "' does not exist");
  }
}

}  // namespace

std::string to_string(ExperimentKind k) { return kind_name(k); }

void validate_config(const ExperimentConfig& cfg) {
  try {
    if (cfg.seeds.empty()) throw ParseError("experiment.seeds must not be empty");
    cfg.inner.validate();
    cfg.outer.validate(cfg.inner.epochs);
    cfg.eval.validate();
    EnergyModel e = cfg.energy;
    e.layer_sizes.clear();
    e.validate();
    if (cfg.model.hidden.empty()) throw ParseError("model.hidden must list at least one width");
    if (cfg.model.arch == Architecture::conv && cfg.dataset.source != DataSource::idx) {
      throw ParseError("model.arch = conv needs image data (dataset.source = idx)");
    }
    if (cfg.dataset.source == DataSource::idx) {
      require_file(cfg.dataset.idx.train_images, "dataset.train_images");
      require_file(cfg.dataset.idx.train_labels, "dataset.train_labels");
      require_file(cfg.dataset.idx.test_images, "dataset.test_images");
      require_file(cfg.dataset.idx.test_labels, "dataset.test_labels");
    }
    if (cfg.kind == ExperimentKind::sensitivity) require_file(cfg.checkpoint, "sensitivity.checkpoint");
  } catch (const ConfigurationError& e) {
    throw ParseError(std::string("invalid configuration: ") + e.what());
  }
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir,
                              const std::string& source_name) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  std::map<std::string, int> seen;
  int line_no = 0;
  auto fail = [&](const std::string& msg) -> ParseError {
    return ParseError(source_name + ":" + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw fail("malformed section header '" + line + "'");
      section = trim(line.substr(1, line.size() - 2));
      if (!known_section(section)) throw fail("unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw fail("expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) throw fail("key '" + key + "' outside of any section");
    const Field* f = find_field(section, key);
    if (!f) throw fail("unknown key '" + key + "' in [" + section + "]");
    const std::string full = section + "." + key;
    if (auto it = seen.find(full); it != seen.end()) {
      throw fail("duplicate key '" + full + "' (first set on line " + std::to_string(it->second) + ")");
    }
    seen[full] = line_no;
    if (value.empty()) throw fail("empty value for '" + full + "'");
    try {
      f->set(cfg, value, base_dir);
    } catch (const std::exception& e) {
      throw fail(full + ": " + e.what());
    }
  }
  try {
    validate_config(cfg);
  } catch (const ParseError& e) {
    throw ParseError(source_name + ": " + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path(), path.string());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  bool first = true;
  for (const auto& [section, fields] : schema()) {
    if (!first) os << '\n';
    first = false;
    os << '[' << section << "]\n";
    for (const auto& [key, f] : fields) {
      const std::string v = f.get(cfg);
      if (v.empty()) continue;  // unset paths
      os << key << " = " << v << '\n';
    }
  }
  return os.str();
}

}  // namespace lanmax

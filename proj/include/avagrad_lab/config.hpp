#ifndef AVAGRAD_LAB_CONFIG_HPP_
#define AVAGRAD_LAB_CONFIG_HPP_

// Sectioned key = value experiment files:
//
//   # comment
//   [problem]
//   kind = synth
//   C = 999
//
// Sections and keys are fixed; anything unknown is an error so that a typo
// cannot silently fall back to a default.

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "avagrad_lab/core.hpp"
#include "avagrad_lab/optim.hpp"
#include "avagrad_lab/problems.hpp"
#include "avagrad_lab/sweep.hpp"

namespace avalab {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ConfigValue {
  std::string text;
  int line = 0;
};

using ConfigDocument = std::map<std::string, std::map<std::string, ConfigValue>>;

inline const std::map<std::string, std::set<std::string>>& config_schema() {
  static const std::map<std::string, std::set<std::string>> schema = {
      {"problem",
       {"kind", "C", "delta", "dim", "curvatures", "condition", "noise_std",
        "n_in", "n_hidden", "n_classes", "batch_size", "dataset",
        "validation_dataset", "n_per_class", "val_per_class", "separation",
        "data_seed"}},
      {"optimizer",
       {"method", "alpha", "alpha_schedule", "epsilon", "beta1", "beta1_schedule",
        "beta2", "beta2_schedule", "weight_decay", "decay_mode"}},
      {"run",
       {"T", "seed", "num_seeds", "record_every", "out", "w1", "converge_grad_sq"}},
      {"grid", {"default", "alphas", "epsilons", "methods", "workers"}},
      {"check", {"fd_h", "fd_points", "fd_tol"}},
  };
  return schema;
}

inline ConfigDocument parse_config(std::istream& in, const std::string& source) {
  ConfigDocument doc;
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto fail = [&](const std::string& what) {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": " + what);
    };
    std::string_view text = line;
    if (const auto hash = text.find('#'); hash != std::string_view::npos) {
      text = text.substr(0, hash);
    }
    text = detail::trim(text);
    if (text.empty()) continue;
    if (text.front() == '[') {
      if (text.back() != ']') fail("malformed section header");
      section = std::string(detail::trim(text.substr(1, text.size() - 2)));
      if (!config_schema().contains(section)) fail("unknown section [" + section + "]");
      doc[section];
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) fail("expected key = value");
    if (section.empty()) fail("key outside of any section");
    const std::string key(detail::trim(text.substr(0, eq)));
    const std::string value(detail::trim(text.substr(eq + 1)));
    if (!config_schema().at(section).contains(key)) {
      fail("unknown key '" + key + "' in [" + section + "]");
    }
    if (doc[section].contains(key)) fail("duplicate key '" + key + "'");
    doc[section][key] = ConfigValue{value, line_no};
  }
  return doc;
}

inline ConfigDocument load_config_document(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  return parse_config(in, path);
}

struct ProblemSpec {
  std::string kind = "synth";
  // synth
  double C = 999.0;
  double delta = 1.0;
  // quadratic
  std::size_t dim = 10;
  std::vector<double> curvatures;  // empty: geometric from 1 to `condition`
  double condition = 10.0;
  double noise_std = 0.0;
  // mlp
  std::size_t n_in = 2;
  std::size_t n_hidden = 8;
  std::size_t n_classes = 3;
  std::size_t batch_size = 16;
  std::string dataset;             // CSV path; empty: Gaussian blobs
  std::string validation_dataset;  // CSV path
  std::size_t n_per_class = 50;
  std::size_t val_per_class = 50;
  double separation = 2.0;
  std::uint64_t data_seed = 0;
};

struct RunSpec {
  std::int64_t T = 1000;
  std::optional<std::uint64_t> seed;
  std::size_t num_seeds = 1;
  std::int64_t record_every = 1;
  std::string out = "out";
  std::vector<double> w1;  // empty: problem default
  double converge_grad_sq = 0.0;
};

struct GridConfig {
  bool use_default = false;
  std::vector<double> alphas;
  std::vector<double> epsilons;
  std::vector<Method> methods;
  std::size_t workers = 1;
};

struct CheckSpec {
  double fd_h = 1e-5;
  std::size_t fd_points = 20;
  std::optional<double> fd_tol;
};

struct ExperimentConfig {
  ProblemSpec problem;
  Method method = Method::kAdam;
  HyperParams hp;
  RunSpec run;
  std::optional<GridConfig> grid;
  CheckSpec check;
};

namespace detail {

inline std::string where(const std::string& source, const ConfigValue& v) {
  return source + ":" + std::to_string(v.line) + ": ";
}

inline double to_double(const std::string& source, const std::string& key,
                        const ConfigValue& v) {
  double x = 0.0;
  if (!parse_number(v.text, x) || !std::isfinite(x)) {
    throw ConfigError(where(source, v) + key + ": expected a number, got '" +
                      v.text + "'");
  }
  return x;
}

inline std::uint64_t to_u64(const std::string& source, const std::string& key,
                            const ConfigValue& v) {
  std::uint64_t x = 0;
  if (!parse_number(v.text, x)) {
    throw ConfigError(where(source, v) + key +
                      ": expected a non-negative integer, got '" + v.text + "'");
  }
  return x;
}

inline bool to_bool(const std::string& source, const std::string& key,
                    const ConfigValue& v) {
  if (v.text == "true" || v.text == "1" || v.text == "yes") return true;
  if (v.text == "false" || v.text == "0" || v.text == "no") return false;
  throw ConfigError(where(source, v) + key + ": expected true/false, got '" +
                    v.text + "'");
}

inline std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto t = trim(item);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

inline std::vector<double> to_double_list(const std::string& source,
                                          const std::string& key,
                                          const ConfigValue& v) {
  std::vector<double> out;
  for (const auto& item : split_list(v.text)) {
    out.push_back(to_double(source, key, ConfigValue{item, v.line}));
  }
  if (out.empty()) throw ConfigError(where(source, v) + key + ": empty list");
  return out;
}

}  // namespace detail

inline ExperimentConfig build_config(const ConfigDocument& doc,
                                     const std::string& source) {
  ExperimentConfig cfg;
  auto section = [&](const std::string& name) -> const std::map<std::string, ConfigValue>* {
    const auto it = doc.find(name);
    return it == doc.end() ? nullptr : &it->second;
  };
  auto each = [&](const std::string& name, auto&& fn) {
    if (const auto* s = section(name)) {
      for (const auto& [key, value] : *s) fn(key, value);
    }
  };
  auto num = [&](const std::string& k, const ConfigValue& v) {
    return detail::to_double(source, k, v);
  };
  auto u64 = [&](const std::string& k, const ConfigValue& v) {
    return detail::to_u64(source, k, v);
  };
  auto wrap = [&](const ConfigValue& v, auto&& fn) {
    try {
      fn();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(detail::where(source, v) + e.what());
    }
  };

  auto& p = cfg.problem;
  each("problem", [&](const std::string& k, const ConfigValue& v) {
    if (k == "kind") p.kind = v.text;
    else if (k == "C") p.C = num(k, v);
    else if (k == "delta") p.delta = num(k, v);
    else if (k == "dim") p.dim = u64(k, v);
    else if (k == "curvatures") p.curvatures = detail::to_double_list(source, k, v);
    else if (k == "condition") p.condition = num(k, v);
    else if (k == "noise_std") p.noise_std = num(k, v);
    else if (k == "n_in") p.n_in = u64(k, v);
    else if (k == "n_hidden") p.n_hidden = u64(k, v);
    else if (k == "n_classes") p.n_classes = u64(k, v);
    else if (k == "batch_size") p.batch_size = u64(k, v);
    else if (k == "dataset") p.dataset = v.text;
    else if (k == "validation_dataset") p.validation_dataset = v.text;
    else if (k == "n_per_class") p.n_per_class = u64(k, v);
    else if (k == "val_per_class") p.val_per_class = u64(k, v);
    else if (k == "separation") p.separation = num(k, v);
    else if (k == "data_seed") p.data_seed = u64(k, v);
  });
  if (p.kind != "synth" && p.kind != "quadratic" && p.kind != "mlp") {
    throw ConfigError(source + ": unknown problem kind '" + p.kind + "'");
  }

  double alpha = cfg.hp.alpha.base(), beta1 = 0.9, beta2 = 0.999;
  auto alpha_kind = Schedule::Kind::kConstant;
  auto beta1_kind = Schedule::Kind::kConstant;
  auto beta2_kind = Schedule::Kind::kConstant;
  each("optimizer", [&](const std::string& k, const ConfigValue& v) {
    wrap(v, [&] {
      if (k == "method") cfg.method = parse_method(v.text);
      else if (k == "alpha") alpha = num(k, v);
      else if (k == "alpha_schedule") alpha_kind = parse_schedule_kind(v.text);
      else if (k == "epsilon") cfg.hp.epsilon = num(k, v);
      else if (k == "beta1") beta1 = num(k, v);
      else if (k == "beta1_schedule") beta1_kind = parse_schedule_kind(v.text);
      else if (k == "beta2") beta2 = num(k, v);
      else if (k == "beta2_schedule") beta2_kind = parse_schedule_kind(v.text);
      else if (k == "weight_decay") cfg.hp.weight_decay = num(k, v);
      else if (k == "decay_mode") cfg.hp.decay_mode = parse_decay_mode(v.text);
    });
  });
  cfg.hp.alpha = Schedule(alpha_kind, alpha);
  cfg.hp.beta1 = Schedule(beta1_kind, beta1);
  cfg.hp.beta2 = Schedule(beta2_kind, beta2);

  auto& r = cfg.run;
  each("run", [&](const std::string& k, const ConfigValue& v) {
    if (k == "T") r.T = static_cast<std::int64_t>(u64(k, v));
    else if (k == "seed") r.seed = u64(k, v);
    else if (k == "num_seeds") r.num_seeds = u64(k, v);
    else if (k == "record_every") r.record_every = static_cast<std::int64_t>(u64(k, v));
    else if (k == "out") r.out = v.text;
    else if (k == "w1") r.w1 = detail::to_double_list(source, k, v);
    else if (k == "converge_grad_sq") r.converge_grad_sq = num(k, v);
  });

  if (section("grid") != nullptr) {
    GridConfig g;
    each("grid", [&](const std::string& k, const ConfigValue& v) {
      wrap(v, [&] {
        if (k == "default") g.use_default = detail::to_bool(source, k, v);
        else if (k == "alphas") g.alphas = detail::to_double_list(source, k, v);
        else if (k == "epsilons") g.epsilons = detail::to_double_list(source, k, v);
        else if (k == "workers") g.workers = u64(k, v);
        else if (k == "methods") {
          for (const auto& name : detail::split_list(v.text)) {
            g.methods.push_back(parse_method(name));
          }
        }
      });
    });
    cfg.grid = std::move(g);
  }

  each("check", [&](const std::string& k, const ConfigValue& v) {
    if (k == "fd_h") cfg.check.fd_h = num(k, v);
    else if (k == "fd_points") cfg.check.fd_points = u64(k, v);
    else if (k == "fd_tol") cfg.check.fd_tol = num(k, v);
  });

  try {
    cfg.hp.validate();
  } catch (const std::exception& e) {
    throw ConfigError(source + ": [optimizer] " + e.what());
  }
  if (r.T < 1) throw ConfigError(source + ": [run] T must be >= 1");
  if (r.num_seeds < 1) throw ConfigError(source + ": [run] num_seeds must be >= 1");
  if (r.record_every < 1) throw ConfigError(source + ": [run] record_every must be >= 1");
  if (cfg.grid && cfg.grid->workers < 1) {
    throw ConfigError(source + ": [grid] workers must be >= 1");
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  return build_config(load_config_document(path), path);
}

// Base seed: explicit value, else AVAGRAD_LAB_SEED, else 0.
inline std::uint64_t resolve_base_seed(const ExperimentConfig& cfg) {
  if (cfg.run.seed) return *cfg.run.seed;
  if (const char* env = std::getenv("AVAGRAD_LAB_SEED")) {
    std::uint64_t s = 0;
    if (!detail::parse_number(std::string_view(env), s)) {
      throw ConfigError("AVAGRAD_LAB_SEED: expected a non-negative integer, got '" +
                        std::string(env) + "'");
    }
    return s;
  }
  return 0;
}

inline std::vector<double> resolve_curvatures(const ProblemSpec& p) {
  if (!p.curvatures.empty()) return p.curvatures;
  std::vector<double> c(p.dim);
  for (std::size_t i = 0; i < p.dim; ++i) {
    const double frac = p.dim > 1 ? static_cast<double>(i) / static_cast<double>(p.dim - 1) : 0.0;
    c[i] = std::pow(p.condition, frac);
  }
  return c;
}

inline std::shared_ptr<const StochasticProblem> build_problem(const ProblemSpec& p) {
  if (p.kind == "synth") return synth_make(p.C, p.delta);
  if (p.kind == "quadratic") {
    const auto c = resolve_curvatures(p);
    RngStream rng = RngStream::derive(p.data_seed, {0x71756164ULL});
    return quadratic_make(c.size(), Vector(c), p.noise_std, rng);
  }
  if (p.kind == "mlp") {
    LabeledSet train, validation;
    if (!p.dataset.empty()) {
      train = load_csv_dataset(p.dataset, p.n_in, p.n_classes);
    } else {
      RngStream rng = RngStream::derive(p.data_seed, {0x747261696eULL});
      train = gaussian_blobs(p.n_per_class, p.n_classes, p.n_in, p.separation, rng);
    }
    if (!p.validation_dataset.empty()) {
      validation = load_csv_dataset(p.validation_dataset, p.n_in, p.n_classes);
    } else if (p.dataset.empty() && p.val_per_class > 0) {
      RngStream rng = RngStream::derive(p.data_seed, {0x76616cULL});
      validation = gaussian_blobs(p.val_per_class, p.n_classes, p.n_in, p.separation, rng);
    }
    std::optional<LabeledSet> val;
    if (!validation.empty()) val = std::move(validation);
    return mlp_make(p.n_in, p.n_hidden, p.n_classes, std::move(train), p.batch_size,
                    std::move(val));
  }
  throw ConfigError("unknown problem kind '" + p.kind + "'");
}

inline std::string join_doubles(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i > 0) out += ",";
    out += format_double(xs[i]);
  }
  return out;
}

// Serializes the effective configuration back to the file format; loading
// the result yields the same experiment.
inline std::string to_config_text(const ExperimentConfig& cfg, std::uint64_t base_seed) {
  std::ostringstream o;
  const auto& p = cfg.problem;
  o << "[problem]\nkind = " << p.kind << '\n';
  if (p.kind == "synth") {
    o << "C = " << format_double(p.C) << "\ndelta = " << format_double(p.delta) << '\n';
  } else if (p.kind == "quadratic") {
    o << "curvatures = " << join_doubles(resolve_curvatures(p)) << '\n'
      << "dim = " << resolve_curvatures(p).size() << '\n'
      << "noise_std = " << format_double(p.noise_std) << '\n'
      << "data_seed = " << p.data_seed << '\n';
  } else {
    o << "n_in = " << p.n_in << "\nn_hidden = " << p.n_hidden
      << "\nn_classes = " << p.n_classes << "\nbatch_size = " << p.batch_size << '\n';
    if (!p.dataset.empty()) o << "dataset = " << p.dataset << '\n';
    if (!p.validation_dataset.empty()) {
      o << "validation_dataset = " << p.validation_dataset << '\n';
    }
    o << "n_per_class = " << p.n_per_class << "\nval_per_class = " << p.val_per_class
      << "\nseparation = " << format_double(p.separation)
      << "\ndata_seed = " << p.data_seed << '\n';
  }
  const auto& hp = cfg.hp;
  o << "\n[optimizer]\nmethod = " << method_name(cfg.method)
    << "\nalpha = " << format_double(hp.alpha.base())
    << "\nalpha_schedule = " << schedule_kind_name(hp.alpha.kind())
    << "\nepsilon = " << format_double(hp.epsilon)
    << "\nbeta1 = " << format_double(hp.beta1.base())
    << "\nbeta1_schedule = " << schedule_kind_name(hp.beta1.kind())
    << "\nbeta2 = " << format_double(hp.beta2.base())
    << "\nbeta2_schedule = " << schedule_kind_name(hp.beta2.kind())
    << "\nweight_decay = " << format_double(hp.weight_decay)
    << "\ndecay_mode = " << decay_mode_name(hp.decay_mode) << '\n';
  const auto& r = cfg.run;
  o << "\n[run]\nT = " << r.T << "\nseed = " << base_seed << "\nnum_seeds = " << r.num_seeds
    << "\nrecord_every = " << r.record_every << "\nout = " << r.out << '\n';
  if (!r.w1.empty()) o << "w1 = " << join_doubles(r.w1) << '\n';
  if (r.converge_grad_sq > 0.0) {
    o << "converge_grad_sq = " << format_double(r.converge_grad_sq) << '\n';
  }
  if (cfg.grid) {
    const auto& g = *cfg.grid;
    o << "\n[grid]\ndefault = " << (g.use_default ? "true" : "false") << '\n';
    if (!g.alphas.empty()) o << "alphas = " << join_doubles(g.alphas) << '\n';
    if (!g.epsilons.empty()) o << "epsilons = " << join_doubles(g.epsilons) << '\n';
    if (!g.methods.empty()) {
      o << "methods = ";
      for (std::size_t i = 0; i < g.methods.size(); ++i) {
        o << (i ? "," : "") << method_name(g.methods[i]);
      }
      o << '\n';
    }
    o << "workers = " << g.workers << '\n';
  }
  const auto& c = cfg.check;
  o << "\n[check]\nfd_h = " << format_double(c.fd_h) << "\nfd_points = " << c.fd_points
    << '\n';
  if (c.fd_tol) o << "fd_tol = " << format_double(*c.fd_tol) << '\n';
  return o.str();
}

}  // namespace avalab

#endif  // AVAGRAD_LAB_CONFIG_HPP_

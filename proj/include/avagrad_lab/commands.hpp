#ifndef AVAGRAD_LAB_COMMANDS_HPP_
#define AVAGRAD_LAB_COMMANDS_HPP_

// Subcommand bodies for the avagrad_lab executable. They take parsed options
// and output streams and return the process exit code:
//   0  success
//   1  configuration or I/O error
//   2  a trial diverged (run) or a check failed (check)

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "avagrad_lab/config.hpp"
#include "avagrad_lab/core.hpp"
#include "avagrad_lab/optim.hpp"
#include "avagrad_lab/problems.hpp"
#include "avagrad_lab/runner.hpp"
#include "avagrad_lab/sweep.hpp"

namespace avalab {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitDiverged = 2;
inline constexpr int kExitCheckFailed = 2;

struct CommandOptions {
  std::string config_path;
  std::optional<std::size_t> workers;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<double> alpha;
  std::optional<double> epsilon;
  std::optional<std::string> method;
  std::optional<std::int64_t> steps;
  std::optional<std::size_t> seeds;  // synthfig: number of seeds
};

inline void apply_overrides(ExperimentConfig& cfg, const CommandOptions& opt) {
  if (opt.alpha) cfg.hp.alpha = Schedule(cfg.hp.alpha.kind(), *opt.alpha);
  if (opt.epsilon) cfg.hp.epsilon = *opt.epsilon;
  if (opt.method) cfg.method = parse_method(*opt.method);
  if (opt.steps) cfg.run.T = *opt.steps;
  if (opt.seed) cfg.run.seed = *opt.seed;
  if (opt.out) cfg.run.out = *opt.out;
  if (opt.seeds) cfg.run.num_seeds = *opt.seeds;
  if (opt.workers && cfg.grid) cfg.grid->workers = *opt.workers;
}

inline std::string settings_header(const ExperimentConfig& cfg, std::uint64_t base_seed) {
  const auto& hp = cfg.hp;
  return "# problem=" + cfg.problem.kind + " method=" + std::string(method_name(cfg.method)) +
         " alpha=" + format_double(hp.alpha.base()) +
         " alpha_schedule=" + schedule_kind_name(hp.alpha.kind()) +
         " epsilon=" + format_double(hp.epsilon) + " beta1=" + format_double(hp.beta1.base()) +
         " beta1_schedule=" + schedule_kind_name(hp.beta1.kind()) +
         " beta2=" + format_double(hp.beta2.base()) +
         " beta2_schedule=" + schedule_kind_name(hp.beta2.kind()) +
         " weight_decay=" + format_double(hp.weight_decay) +
         " decay_mode=" + std::string(decay_mode_name(hp.decay_mode)) +
         " T=" + std::to_string(cfg.run.T) + " seed=" + std::to_string(base_seed) +
         " num_seeds=" + std::to_string(cfg.run.num_seeds) +
         " record_every=" + std::to_string(cfg.run.record_every);
}

// Start point for trial `index`: the configured w1, else the problem default.
inline Vector trial_start(const ExperimentConfig& cfg, const StochasticProblem& problem,
                          std::uint64_t base_seed, std::uint64_t index) {
  if (!cfg.run.w1.empty()) return Vector(cfg.run.w1);
  RngStream init = RngStream::derive(base_seed, {index, 0x696e6974ULL});
  return problem.initial_point(init);
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out << text;
  out.flush();
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

inline int cmd_run(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    ExperimentConfig cfg = load_config(opt.config_path);
    apply_overrides(cfg, opt);
    const std::uint64_t base_seed = resolve_base_seed(cfg);
    const auto problem = build_problem(cfg.problem);
    const std::filesystem::path dir(cfg.run.out);
    std::filesystem::create_directories(dir);

    out << settings_header(cfg, base_seed) << '\n';
    write_text_file(dir / "effective.cfg", to_config_text(cfg, base_seed));

    bool any_diverged = false;
    for (std::uint64_t i = 0; i < cfg.run.num_seeds; ++i) {
      TrialConfig tc;
      tc.method = cfg.method;
      tc.hp = cfg.hp;
      tc.problem = problem;
      tc.T = cfg.run.T;
      tc.w1 = trial_start(cfg, *problem, base_seed, i);
      tc.seed = mix_seed(base_seed, {i});
      tc.record_every = cfg.run.record_every;
      tc.converge_grad_sq = cfg.run.converge_grad_sq;
      const TrialRecord rec = run_trial(tc);
      export_trajectory(rec, (dir / ("trajectory_seed" + std::to_string(i) + ".csv")).string());
      out << summary_line(rec) << '\n';
      any_diverged = any_diverged || rec.status == TrialStatus::kDiverged;
    }
    return any_diverged ? kExitDiverged : kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
}

// ---------------------------------------------------------------------------
// Synthetic-problem figure data: Adam, AMSGrad and Delayed Adam on the
// two-outcome problem with C = 999, delta = 1.
// ---------------------------------------------------------------------------

struct SynthFigSettings {
  std::int64_t T = 1'000'000;
  std::size_t seeds = 10;
  std::uint64_t base_seed = 0;
  std::size_t workers = 1;
  double alpha = 1e-5;
  double beta2 = 0.99;
  double epsilon = 1e-8;
  double w1 = 0.5;
};

inline constexpr std::array<Method, 3> kSynthFigMethods = {
    Method::kAdam, Method::kAmsGrad, Method::kDelayedAdam};

struct SynthFigResult {
  // records[method index][seed index]
  std::array<std::vector<TrialRecord>, 3> records;
  double w_star = 0.0;
};

inline SynthFigResult run_synthfig(const SynthFigSettings& s) {
  const auto problem = synth_make(999.0, 1.0);
  SynthFigResult result;
  result.w_star = problem->w_star();
  for (auto& per_method : result.records) per_method.resize(s.seeds);
  const std::int64_t stride = std::max<std::int64_t>(1, s.T / 1000);
  parallel_for(3 * s.seeds, s.workers, [&](std::size_t job) {
    const std::size_t m = job / s.seeds;
    const std::size_t seed_idx = job % s.seeds;
    TrialConfig tc;
    tc.method = kSynthFigMethods[m];
    tc.hp.alpha = Schedule::constant(s.alpha);
    tc.hp.beta1 = Schedule::constant(0.0);
    tc.hp.beta2 = Schedule::constant(s.beta2);
    tc.hp.epsilon = s.epsilon;
    tc.problem = problem;
    tc.T = s.T;
    tc.w1 = Vector{s.w1};
    // Same sample path for every method at a given seed index.
    tc.seed = mix_seed(s.base_seed, {seed_idx});
    tc.record_every = stride;
    result.records[m][seed_idx] = run_trial(tc);
  });
  return result;
}

inline void write_synthfig_csv(const SynthFigResult& r, std::ostream& out, bool iterate_panel) {
  out << "t";
  for (Method m : kSynthFigMethods) out << ',' << method_name(m);
  out << '\n';
  const auto& rows0 = r.records[0].front().rows;
  for (std::size_t i = 0; i < rows0.size(); ++i) {
    out << rows0[i].t;
    for (const auto& per_method : r.records) {
      double sum = 0.0;
      for (const auto& rec : per_method) {
        const auto& row = rec.rows.at(i);
        sum += iterate_panel ? row.w_mean : row.grad_norm_sq_mean;
      }
      out << ',' << format_double(sum / static_cast<double>(per_method.size()));
    }
    out << '\n';
  }
}

inline int cmd_synthfig(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    SynthFigSettings s;
    if (opt.steps) s.T = *opt.steps;
    if (opt.seeds) s.seeds = *opt.seeds;
    if (opt.workers) s.workers = *opt.workers;
    ExperimentConfig seed_cfg;
    seed_cfg.run.seed = opt.seed;
    s.base_seed = resolve_base_seed(seed_cfg);
    if (s.T < 1 || s.seeds < 1 || s.workers < 1) {
      throw std::invalid_argument("synthfig: steps, seeds and workers must be >= 1");
    }
    const std::filesystem::path dir(opt.out.value_or("synthfig"));
    std::filesystem::create_directories(dir);

    const SynthFigResult r = run_synthfig(s);
    for (bool left : {true, false}) {
      const auto path = dir / (left ? "fig1_left.csv" : "fig1_right.csv");
      std::ofstream f(path, std::ios::binary);
      if (!f) throw std::runtime_error(path.string() + ": cannot open for writing");
      write_synthfig_csv(r, f, left);
      f.flush();
      if (!f) throw std::runtime_error(path.string() + ": write failed");
    }
    out << "# synthfig T=" << s.T << " seeds=" << s.seeds << " seed=" << s.base_seed
        << " w_star=" << format_double(r.w_star) << '\n';
    for (std::size_t m = 0; m < kSynthFigMethods.size(); ++m) {
      double w = 0.0, g = 0.0, tail = 0.0;
      for (const auto& rec : r.records[m]) {
        w += rec.w_prefix_mean();
        g += rec.grad_sq_prefix_mean();
        tail += rec.tail_grad_sq_mean();
      }
      const double n = static_cast<double>(r.records[m].size());
      out << "method=" << method_name(kSynthFigMethods[m])
          << " w_prefix_mean=" << format_double(w / n)
          << " grad_norm_sq_prefix_mean=" << format_double(g / n)
          << " tail_grad_norm_sq_mean=" << format_double(tail / n) << '\n';
    }
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
}

// ---------------------------------------------------------------------------

inline GridSpec grid_spec_from_config(const ExperimentConfig& cfg,
                                      std::shared_ptr<const StochasticProblem> problem,
                                      std::uint64_t base_seed) {
  if (!cfg.grid) throw ConfigError("sweep: config has no [grid] section");
  const GridConfig& g = *cfg.grid;
  GridSpec spec;
  if (g.use_default) {
    if (!g.alphas.empty() || !g.epsilons.empty()) {
      throw ConfigError("sweep: [grid] default = true conflicts with explicit alphas/epsilons");
    }
    const Grid d = default_grid();
    spec.alphas = d.alphas;
    spec.epsilons = d.epsilons;
  } else {
    if (g.alphas.empty() || g.epsilons.empty()) {
      throw ConfigError("sweep: [grid] needs alphas and epsilons or default = true");
    }
    spec.alphas = g.alphas;
    spec.epsilons = g.epsilons;
  }
  spec.methods = g.methods.empty() ? std::vector<Method>{cfg.method} : g.methods;
  for (std::uint64_t i = 0; i < cfg.run.num_seeds; ++i) spec.seeds.push_back(i);
  spec.problem = std::move(problem);
  spec.T = cfg.run.T;
  spec.base_seed = base_seed;
  spec.hp_template = cfg.hp;
  if (!cfg.run.w1.empty()) spec.w1 = Vector(cfg.run.w1);
  return spec;
}

inline int cmd_sweep(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    ExperimentConfig cfg = load_config(opt.config_path);
    apply_overrides(cfg, opt);
    const std::uint64_t base_seed = resolve_base_seed(cfg);
    GridSpec spec = grid_spec_from_config(cfg, build_problem(cfg.problem), base_seed);
    spec.validate();
    const std::filesystem::path dir(cfg.run.out);
    std::filesystem::create_directories(dir);
    write_text_file(dir / "effective.cfg", to_config_text(cfg, base_seed));

    const auto cells = run_sweep(spec, cfg.grid->workers, &err);
    export_heatmap(cells, (dir / "heatmap.csv").string());

    std::string summary = "method,separability_index\n";
    for (Method m : spec.methods) {
      summary += std::string(method_name(m)) + ",";
      try {
        summary += format_double(separability_index(cells, m));
      } catch (const std::exception& e) {
        err << "warning: " << method_name(m) << ": " << e.what() << '\n';
      }
      summary += "\n";
    }
    write_text_file(dir / "separability.csv", summary);
    out << "# sweep cells=" << cells.size() << " seed=" << base_seed << '\n' << summary;
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
}

// ---------------------------------------------------------------------------

inline int cmd_check(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    ExperimentConfig cfg = load_config(opt.config_path);
    apply_overrides(cfg, opt);
    cfg.hp.validate();
    const std::uint64_t base_seed = resolve_base_seed(cfg);
    const auto problem = build_problem(cfg.problem);
    const Vector w1 = trial_start(cfg, *problem, base_seed, 0);
    bool pass = true;

    // Gradient check at perturbed copies of the start point.
    const double fd_tol = cfg.check.fd_tol.value_or(cfg.problem.kind == "mlp" ? 1e-5 : 1e-7);
    RngStream rng = RngStream::derive(base_seed, {0x6664ULL});
    double fd_worst = 0.0;
    for (std::size_t k = 0; k < cfg.check.fd_points; ++k) {
      Vector w = w1;
      for (double& x : w) x += 0.5 * rng.normal();
      const SampleToken token = problem->sample(rng);
      fd_worst = std::max(fd_worst, fd_check(*problem, w, token, cfg.check.fd_h));
    }
    out << "fd_max_rel_err=" << format_double(fd_worst) << " tol=" << format_double(fd_tol)
        << '\n';
    pass = pass && fd_worst <= fd_tol;

    // Rate/sample correlation at the start state (v_0 = 0).
    if (problem->outcomes()) {
      const OptimizerState state = init_state(Method::kDelayedAdam, problem->dim());
      const double adam = norms(bias_gap(w1, state, cfg.hp, *problem, BiasMode::kAdam)).l2;
      const double delayed =
          norms(bias_gap(w1, state, cfg.hp, *problem, BiasMode::kDelayed)).l2;
      out << "bias_gap_adam=" << format_double(adam) << '\n'
          << "bias_gap_delayed=" << format_double(delayed) << '\n';
      pass = pass && delayed <= 1e-15;
    } else {
      out << "bias_gap=unavailable\n";
    }

    const auto constants = problem->constants(w1);
    if (constants && constants->all_finite() && constants->D_gap > 0.0) {
      TrialConfig tc;
      tc.method = cfg.method;
      tc.hp = cfg.hp;
      tc.problem = problem;
      tc.T = cfg.run.T;
      tc.w1 = w1;
      tc.seed = mix_seed(base_seed, {0});
      tc.record_every = cfg.run.T;
      const TrialRecord rec = run_trial(tc);
      if (rec.status == TrialStatus::kDiverged) {
        out << "bound=unavailable (trial diverged)\n";
        pass = false;
      } else {
        const bool momentum = cfg.hp.beta1.sup() > 0.0;
        const std::vector<BoundVariant> variants =
            momentum ? std::vector<BoundVariant>{BoundVariant::kMomentum}
                     : std::vector<BoundVariant>{BoundVariant::kConditional,
                                                 BoundVariant::kUnconditional};
        for (BoundVariant v : variants) {
          const BoundReport b = eval_bound(rec, *constants, v);
          out << "bound_" << bound_variant_name(v) << " lhs=" << format_double(b.lhs)
              << " rhs=" << format_double(b.rhs) << " M=" << format_double(b.constants.M)
              << " D=" << format_double(b.constants.D_gap)
              << " G_inf=" << format_double(b.constants.G_inf) << '\n';
          if (v == BoundVariant::kUnconditional) pass = pass && b.lhs <= b.rhs;
        }
      }
    } else {
      out << "bound=unavailable (no finite problem constants)\n";
    }
    out << "check=" << (pass ? "pass" : "fail") << '\n';
    return pass ? kExitOk : kExitCheckFailed;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
}

}  // namespace avalab

#endif  // AVAGRAD_LAB_COMMANDS_HPP_

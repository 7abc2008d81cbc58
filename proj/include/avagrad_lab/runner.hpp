#ifndef AVAGRAD_LAB_RUNNER_HPP_
#define AVAGRAD_LAB_RUNNER_HPP_

// Single-trial execution plus the diagnostics computed from a finished trial:
// prefix averages, the rate-weighted iterate distribution, the O(1/sqrt T)
// bound evaluator and the sample/rate correlation ("bias") gap.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <memory>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "avagrad_lab/core.hpp"
#include "avagrad_lab/optim.hpp"
#include "avagrad_lab/problems.hpp"

namespace avalab {

enum class TrialStatus { kFinished, kConverged, kDiverged };

inline std::string_view status_name(TrialStatus s) {
  switch (s) {
    case TrialStatus::kFinished: return "finished";
    case TrialStatus::kConverged: return "converged";
    case TrialStatus::kDiverged: return "diverged";
  }
  return "finished";
}

struct TrialConfig {
  Method method = Method::kAdam;
  HyperParams hp;
  std::shared_ptr<const StochasticProblem> problem;
  std::int64_t T = 1;
  Vector w1;
  std::uint64_t seed = 0;
  std::int64_t record_every = 1;
  // Stop with status converged once ||grad f(w_t)||^2 <= this value.
  // Disabled when <= 0.
  double converge_grad_sq = 0.0;
};

struct TrajectoryRow {
  std::int64_t t = 0;
  double w_mean = 0.0;             // prefix mean of the coordinate-averaged iterate
  double grad_norm_sq_mean = 0.0;  // prefix mean of ||grad f(w_t)||^2
  double alpha_t = 0.0;
  double eta_min = 0.0;
  double eta_l2 = 0.0;
  double alpha_eff = 0.0;
};

struct TrialRecord {
  Method method = Method::kAdam;
  HyperParams hp;
  std::int64_t T = 0;      // requested
  std::int64_t steps = 0;  // completed
  std::int64_t record_every = 1;
  std::size_t dim = 0;
  std::uint64_t seed = 0;
  TrialStatus status = TrialStatus::kFinished;
  // False when ||grad f|| came from the sampled gradient because the problem
  // has no exact full gradient.
  bool grad_norm_exact = true;

  // Full-resolution accumulators over t = 1..steps.
  double sum_w = 0.0;
  double sum_grad_sq = 0.0;
  std::int64_t tail_start = 1;  // first step of the final-10% window
  double tail_sum_grad_sq = 0.0;
  std::int64_t tail_count = 0;
  double Z = 0.0;                     // sum alpha_eff * min_i eta
  double sum_weighted_grad_sq = 0.0;  // sum alpha_eff * min_i eta * ||grad f||^2
  double sum_alpha_eff_sq_eta_sq = 0.0;  // sum alpha_eff^2 * ||eta||^2
  double max_alpha_eff_eta_max = 0.0;    // max alpha_eff * max_i eta
  double sum_alpha = 0.0;
  double sum_alpha_sq = 0.0;
  double sum_alpha_grad_sq = 0.0;
  double eta_min_overall = std::numeric_limits<double>::infinity();
  double eta_max_overall = 0.0;

  std::vector<TrajectoryRow> rows;
  Vector w1;
  Vector final_w;

  double w_prefix_mean() const { return steps > 0 ? sum_w / steps : 0.0; }
  double grad_sq_prefix_mean() const {
    return steps > 0 ? sum_grad_sq / steps : 0.0;
  }
  double tail_grad_sq_mean() const {
    return tail_count > 0 ? tail_sum_grad_sq / tail_count
                          : std::numeric_limits<double>::quiet_NaN();
  }
};

namespace detail {

inline double coordinate_mean(const Vector& w) {
  double s = 0.0;
  for (double x : w) s += x;
  return s / static_cast<double>(w.size());
}

inline double sum_sq(const Vector& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

}  // namespace detail

inline TrialRecord run_trial(const TrialConfig& cfg) {
  if (!cfg.problem) throw std::invalid_argument("run_trial: no problem");
  if (cfg.T < 1) throw std::invalid_argument("run_trial: T must be >= 1");
  if (cfg.record_every < 1) {
    throw std::invalid_argument("run_trial: record_every must be >= 1");
  }
  const StochasticProblem& problem = *cfg.problem;
  const std::size_t d = problem.dim();
  if (cfg.w1.size() != d) {
    throw std::invalid_argument("run_trial: w1 has dimension " +
                                std::to_string(cfg.w1.size()) +
                                ", problem has " + std::to_string(d));
  }
  cfg.hp.validate();

  TrialRecord rec;
  rec.method = cfg.method;
  rec.hp = cfg.hp;
  rec.T = cfg.T;
  rec.record_every = cfg.record_every;
  rec.dim = d;
  rec.seed = cfg.seed;
  rec.w1 = cfg.w1;
  rec.tail_start = cfg.T - std::max<std::int64_t>(1, cfg.T / 10) + 1;

  const Domain domain = problem.domain();
  RngStream rng(cfg.seed);
  OptimizerState state = init_state(cfg.method, d);
  Vector w = domain.boxed ? clamp_box(cfg.w1, domain.lo, domain.hi) : cfg.w1;

  TrajectoryRow last{};
  for (std::int64_t t = 1; t <= cfg.T; ++t) {
    const SampleToken token = problem.sample(rng);
    const Vector g = problem.grad(w, token);
    double grad_sq;
    if (auto fg = problem.full_grad(w)) {
      grad_sq = detail::sum_sq(*fg);
    } else {
      grad_sq = detail::sum_sq(g);
      rec.grad_norm_exact = false;
    }
    if (!std::isfinite(grad_sq) || !g.is_finite()) {
      rec.status = TrialStatus::kDiverged;
      break;
    }
    const double w_mean = detail::coordinate_mean(w);

    StepReport report;
    try {
      report = step(state, cfg.hp, w, g);
    } catch (const NonFiniteError&) {
      rec.status = TrialStatus::kDiverged;
      break;
    }
    if (domain.boxed) w = clamp_box(w, domain.lo, domain.hi);

    rec.steps = t;
    rec.sum_w += w_mean;
    rec.sum_grad_sq += grad_sq;
    if (t >= rec.tail_start) {
      rec.tail_sum_grad_sq += grad_sq;
      ++rec.tail_count;
    }
    const double weight = report.alpha_eff * report.eta_min;
    rec.Z += weight;
    rec.sum_weighted_grad_sq += weight * grad_sq;
    rec.sum_alpha_eff_sq_eta_sq +=
        report.alpha_eff * report.alpha_eff * report.eta_l2 * report.eta_l2;
    rec.max_alpha_eff_eta_max =
        std::max(rec.max_alpha_eff_eta_max, report.alpha_eff * report.eta_max);
    rec.sum_alpha += report.alpha_t;
    rec.sum_alpha_sq += report.alpha_t * report.alpha_t;
    rec.sum_alpha_grad_sq += report.alpha_t * grad_sq;
    rec.eta_min_overall = std::min(rec.eta_min_overall, report.eta_min);
    rec.eta_max_overall = std::max(rec.eta_max_overall, report.eta_max);

    last = TrajectoryRow{t,
                         rec.sum_w / static_cast<double>(t),
                         rec.sum_grad_sq / static_cast<double>(t),
                         report.alpha_t,
                         report.eta_min,
                         report.eta_l2,
                         report.alpha_eff};
    if (t % cfg.record_every == 0 || t == cfg.T) rec.rows.push_back(last);

    if (cfg.converge_grad_sq > 0.0 && grad_sq <= cfg.converge_grad_sq) {
      rec.status = TrialStatus::kConverged;
      break;
    }
  }
  // Partial trials still end with a row for their last completed step.
  if (rec.steps > 0 && (rec.rows.empty() || rec.rows.back().t != rec.steps)) {
    rec.rows.push_back(last);
  }
  rec.final_w = std::move(w);
  return rec;
}

inline std::string summary_line(const TrialRecord& rec) {
  return "status=" + std::string(status_name(rec.status)) +
         " final_grad_norm_sq_mean=" + format_double(rec.grad_sq_prefix_mean()) +
         " Z=" + format_double(rec.Z);
}

// Weights p(t) proportional to alpha_eff_t * min_i eta_{t,i} (or uniform).
// Needs the per-step trace, i.e. record_every == 1.
inline std::vector<double> iterate_distribution(const TrialRecord& rec,
                                                bool uniform = false) {
  if (rec.status == TrialStatus::kDiverged) {
    throw std::invalid_argument("iterate_distribution: trial diverged");
  }
  if (rec.record_every != 1 ||
      rec.rows.size() != static_cast<std::size_t>(rec.steps) || rec.steps == 0) {
    throw std::invalid_argument(
        "iterate_distribution: needs a full-resolution record (record_every = 1)");
  }
  std::vector<double> p(rec.rows.size());
  if (uniform) {
    std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(p.size()));
    return p;
  }
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = rec.rows[i].alpha_eff * rec.rows[i].eta_min;
    z += p[i];
  }
  if (!(z > 0.0)) throw std::domain_error("iterate_distribution: zero total weight");
  for (double& x : p) x /= z;
  return p;
}

enum class BoundVariant {
  kConditional,    // realized rates, beta1 = 0
  kUnconditional,  // worst-case rate bounds from epsilon and G_2, beta1 = 0
  kMomentum,       // realized rates with beta1_t <= beta1 / sqrt(t)
};

inline std::string_view bound_variant_name(BoundVariant v) {
  switch (v) {
    case BoundVariant::kConditional: return "conditional";
    case BoundVariant::kUnconditional: return "unconditional";
    case BoundVariant::kMomentum: return "momentum";
  }
  return "conditional";
}

struct BoundReport {
  BoundVariant variant = BoundVariant::kConditional;
  double lhs = 0.0;  // P-weighted mean of ||grad f(w_t)||^2
  double rhs = 0.0;
  ProblemConstants constants;
  // alpha_t = gamma_t * scale with scale = sqrt(2 D / (T M G_inf^2)).
  double scale = 0.0;
};

// Rate bounds [L, H] used by the unconditional variant.
inline std::pair<double, double> worst_case_rate_bounds(Method method,
                                                        const HyperParams& hp,
                                                        double g2) {
  if (!is_adaptive(method)) return {1.0, 1.0};
  const auto [lo, hi] = eta_bounds(hp, g2);
  // sqrt(d) * eta_i / ||eta|| with every eta_j in [lo, hi].
  if (is_avagrad(method)) return {lo / hi, hi / lo};
  return {lo, hi};
}

// Evaluates the rate bound for a finished trial. gamma_t is recovered from
// the applied step multiplier as alpha_eff_t / scale, so a run configured
// with alpha = gamma * scale has constant gamma (AvaGrad: gamma_t =
// gamma * sqrt(d) / ||eta_t||).
inline BoundReport eval_bound(const TrialRecord& rec, const ProblemConstants& c,
                              BoundVariant variant) {
  if (!c.all_finite() || !(c.M > 0.0) || !(c.D_gap > 0.0) || !(c.G_inf > 0.0)) {
    throw std::invalid_argument(
        "eval_bound: problem constants unavailable or degenerate");
  }
  if (rec.status == TrialStatus::kDiverged || rec.steps != rec.T) {
    throw std::invalid_argument("eval_bound: trial did not complete all T steps");
  }
  const double beta1 = rec.hp.beta1.sup();
  if (variant != BoundVariant::kMomentum && beta1 > 0.0) {
    throw std::invalid_argument("eval_bound: " +
                                std::string(bound_variant_name(variant)) +
                                " variant requires beta1 = 0");
  }
  if (variant == BoundVariant::kMomentum && !(beta1 < 1.0)) {
    throw std::invalid_argument("eval_bound: beta1 must be < 1");
  }

  const double T = static_cast<double>(rec.T);
  const double d = static_cast<double>(rec.dim);
  BoundReport out;
  out.variant = variant;
  out.constants = c;
  out.scale = std::sqrt(2.0 * c.D_gap / (T * c.M * c.G_inf * c.G_inf));
  const double prefactor = std::sqrt(c.M * c.D_gap * c.G_inf * c.G_inf / (2.0 * T));
  const double s = out.scale;

  switch (variant) {
    case BoundVariant::kConditional:
    case BoundVariant::kMomentum: {
      if (!(rec.Z > 0.0)) throw std::domain_error("eval_bound: Z = 0");
      out.lhs = rec.sum_weighted_grad_sq / rec.Z;
      const double sum_gamma_l = rec.Z / s;
      double numer = T + rec.sum_alpha_eff_sq_eta_sq / (s * s);
      double factor = 1.0;
      if (variant == BoundVariant::kMomentum) {
        const double max_gamma_h = rec.max_alpha_eff_eta_max / s;
        numer += 2.0 * T * beta1 *
                 std::sqrt(2.0 * d * c.G_2 * c.G_2 / (c.M * c.D_gap)) *
                 max_gamma_h;
        factor = 1.0 / (1.0 - beta1);
      }
      out.rhs = factor * prefactor * numer / sum_gamma_l;
      break;
    }
    case BoundVariant::kUnconditional: {
      if (!(rec.sum_alpha > 0.0)) throw std::domain_error("eval_bound: sum alpha = 0");
      const auto [L, H] = worst_case_rate_bounds(rec.method, rec.hp, c.G_2);
      // p(t) proportional to alpha_t * L with L constant.
      out.lhs = rec.sum_alpha_grad_sq / rec.sum_alpha;
      const double numer = T + d * H * H * rec.sum_alpha_sq / (s * s);
      out.rhs = prefactor * numer / (L * rec.sum_alpha / s);
      break;
    }
  }
  if (!std::isfinite(out.lhs) || !std::isfinite(out.rhs)) {
    throw NonFiniteError("eval_bound: non-finite result");
  }
  return out;
}

enum class BiasMode { kAdam, kDelayed };

// E_s[eta_t(s) (.) g_t(s)] - eta_delayed (.) grad f(w), enumerated exactly
// over the problem's outcomes. `state` is the optimizer state before the step
// (so v is v_{t-1}); only v and t are read.
inline Vector bias_gap(const Vector& w, const OptimizerState& state,
                       const HyperParams& hp, const StochasticProblem& problem,
                       BiasMode mode) {
  const auto outcomes = problem.outcomes();
  if (!outcomes) {
    throw std::invalid_argument("bias_gap: " + problem.name() +
                                " has no enumerable outcome set");
  }
  const std::size_t d = w.size();
  if (state.v.size() != d) {
    throw std::invalid_argument("bias_gap: state has no second-moment buffer of matching size");
  }
  const double beta2 = hp.beta2(state.t + 1);

  Vector delayed_rate(d);
  for (std::size_t i = 0; i < d; ++i) {
    delayed_rate[i] = 1.0 / (std::sqrt(state.v[i]) + hp.epsilon);
  }

  Vector expected_grad = Vector::zeros(d);
  Vector expected_scaled = Vector::zeros(d);  // adam mode only
  for (const Outcome& o : *outcomes) {
    const Vector g = problem.grad(w, o.token);
    for (std::size_t i = 0; i < d; ++i) {
      expected_grad[i] += o.probability * g[i];
      if (mode == BiasMode::kAdam) {
        const double v_next = beta2 * state.v[i] + (1.0 - beta2) * g[i] * g[i];
        const double rate = 1.0 / (std::sqrt(v_next) + hp.epsilon);
        expected_scaled[i] += o.probability * (rate * g[i]);
      }
    }
  }

  Vector gap(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double reference = delayed_rate[i] * expected_grad[i];
    // The delayed rate does not depend on the sample, so the expectation
    // factors as rate * E[g].
    const double actual =
        mode == BiasMode::kDelayed ? delayed_rate[i] * expected_grad[i]
                                   : expected_scaled[i];
    gap[i] = actual - reference;
  }
  return gap;
}

inline void write_trajectory(const TrialRecord& rec, std::ostream& out) {
  out << "t,w_mean,grad_norm_sq_mean,alpha_t,eta_min,eta_l2,alpha_eff\n";
  for (const auto& r : rec.rows) {
    out << r.t << ',' << format_double(r.w_mean) << ','
        << format_double(r.grad_norm_sq_mean) << ',' << format_double(r.alpha_t)
        << ',' << format_double(r.eta_min) << ',' << format_double(r.eta_l2)
        << ',' << format_double(r.alpha_eff) << '\n';
  }
}

inline void export_trajectory(const TrialRecord& rec, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  write_trajectory(rec, out);
  out.flush();
  if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace avalab

#endif  // AVAGRAD_LAB_RUNNER_HPP_

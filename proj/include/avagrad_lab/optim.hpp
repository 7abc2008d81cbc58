#ifndef AVAGRAD_LAB_OPTIM_HPP_
#define AVAGRAD_LAB_OPTIM_HPP_

// Optimizer family built around the common update
//
//   w_{t+1} = w_t - alpha_t * eta_t (.) m_t
//
// where the methods differ only in how eta_t is formed and in which order the
// second-moment buffer is refreshed. Moments start at zero and are never
// bias-corrected.

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

#include "avagrad_lab/core.hpp"

namespace avalab {

enum class Method {
  kSgd,
  kMomentumSgd,
  kAdam,
  kAmsGrad,
  kAdamW,
  kDelayedAdam,
  kAvaGrad,
  kAvaGradW,
};

inline constexpr std::array<Method, 8> kAllMethods = {
    Method::kSgd,    Method::kMomentumSgd, Method::kAdam,    Method::kAmsGrad,
    Method::kAdamW,  Method::kDelayedAdam, Method::kAvaGrad, Method::kAvaGradW,
};

inline std::string_view method_name(Method m) {
  switch (m) {
    case Method::kSgd: return "sgd";
    case Method::kMomentumSgd: return "momentum_sgd";
    case Method::kAdam: return "adam";
    case Method::kAmsGrad: return "amsgrad";
    case Method::kAdamW: return "adamw";
    case Method::kDelayedAdam: return "delayed_adam";
    case Method::kAvaGrad: return "avagrad";
    case Method::kAvaGradW: return "avagradw";
  }
  return "unknown";
}

inline Method parse_method(std::string_view name) {
  for (Method m : kAllMethods) {
    if (method_name(m) == name) return m;
  }
  throw std::invalid_argument("unknown optimizer method '" + std::string(name) +
                              "'");
}

// Methods whose eta_t is computed from v_{t-1} and is therefore independent
// of the current sample.
constexpr bool uses_delayed_rate(Method m) {
  return m == Method::kDelayedAdam || m == Method::kAvaGrad ||
         m == Method::kAvaGradW;
}

constexpr bool is_adaptive(Method m) {
  return m != Method::kSgd && m != Method::kMomentumSgd;
}

constexpr bool is_avagrad(Method m) {
  return m == Method::kAvaGrad || m == Method::kAvaGradW;
}

enum class DecayMode { kNone, kCoupledL2, kDecoupled };

inline std::string_view decay_mode_name(DecayMode d) {
  switch (d) {
    case DecayMode::kNone: return "none";
    case DecayMode::kCoupledL2: return "coupled_l2";
    case DecayMode::kDecoupled: return "decoupled";
  }
  return "none";
}

inline DecayMode parse_decay_mode(std::string_view name) {
  if (name == "none") return DecayMode::kNone;
  if (name == "coupled_l2") return DecayMode::kCoupledL2;
  if (name == "decoupled") return DecayMode::kDecoupled;
  throw std::invalid_argument("unknown decay mode '" + std::string(name) + "'");
}

struct HyperParams {
  Schedule alpha = Schedule::constant(1e-3);
  double epsilon = 1e-8;
  Schedule beta1 = Schedule::constant(0.9);
  Schedule beta2 = Schedule::constant(0.999);
  double weight_decay = 0.0;
  DecayMode decay_mode = DecayMode::kNone;

  void validate() const {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
      throw std::invalid_argument("epsilon must be finite and > 0");
    }
    for (const auto* s : {&beta1, &beta2}) {
      if (s->kind() != Schedule::Kind::kInverseT &&
          !(s->base() >= 0.0 && s->base() < 1.0)) {
        throw std::invalid_argument("beta schedules must stay in [0, 1)");
      }
    }
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
      throw std::invalid_argument("weight_decay must be finite and >= 0");
    }
  }
};

// AdamW and AvaGradW always use decoupled decay; the other methods follow
// hp.decay_mode.
inline DecayMode effective_decay(Method m, const HyperParams& hp) {
  if (m == Method::kAdamW || m == Method::kAvaGradW) {
    return DecayMode::kDecoupled;
  }
  return hp.decay_mode;
}

struct OptimizerState {
  Method method = Method::kSgd;
  Vector m;
  Vector v;      // empty for SGD / MomentumSGD
  Vector v_hat;  // AMSGrad only
  std::int64_t t = 0;

  std::size_t dim() const { return m.size(); }
};

struct StepReport {
  Vector eta;
  double alpha_t = 0.0;
  // Global multiplier actually applied: alpha_t, or alpha_t * sqrt(d)/||eta||
  // for AvaGrad.
  double alpha_eff = 0.0;
  double eta_min = 0.0;
  double eta_max = 0.0;
  double eta_l2 = 0.0;
};

inline OptimizerState init_state(Method method, std::size_t d) {
  if (d == 0) throw std::invalid_argument("init_state: dimension must be >= 1");
  OptimizerState s;
  s.method = method;
  s.m = Vector::zeros(d);
  if (is_adaptive(method)) s.v = Vector::zeros(d);
  if (method == Method::kAmsGrad) s.v_hat = Vector::zeros(d);
  return s;
}

// Rate bounds 1/(G2 + eps) <= eta_i <= 1/eps that hold for Delayed Adam.
inline std::pair<double, double> eta_bounds(const HyperParams& hp, double g2) {
  if (!(hp.epsilon > 0.0)) throw std::invalid_argument("eta_bounds: epsilon <= 0");
  if (!(g2 >= 0.0)) throw std::invalid_argument("eta_bounds: G2 < 0");
  return {1.0 / (g2 + hp.epsilon), 1.0 / hp.epsilon};
}

// eta * sqrt(d) / ||eta||_2, i.e. eta rescaled so that ||result / sqrt(d)|| = 1.
inline Vector normalized_eta(const Vector& eta) {
  if (eta.empty()) throw std::invalid_argument("normalized_eta: empty vector");
  for (double e : eta) {
    if (!(e > 0.0)) {
      throw std::domain_error("normalized_eta: rates must be strictly positive");
    }
  }
  const double l2 = norms(eta).l2;
  if (!(l2 > 0.0) || !std::isfinite(l2)) {
    throw std::domain_error("normalized_eta: degenerate norm");
  }
  const double factor = std::sqrt(static_cast<double>(eta.size())) / l2;
  Vector out(eta.size());
  for (std::size_t i = 0; i < eta.size(); ++i) out[i] = eta[i] * factor;
  return out;
}

namespace detail {

inline void fill_rate_stats(StepReport& r) {
  const Norms n = norms(r.eta);
  r.eta_min = n.min;
  r.eta_max = n.max;
  r.eta_l2 = n.l2;
}

}  // namespace detail

// Performs step t = state.t + 1 in place. On a non-finite result neither w
// nor state is modified and NonFiniteError is thrown.
inline StepReport step(OptimizerState& state, const HyperParams& hp, Vector& w,
                       const Vector& g) {
  const std::size_t d = w.size();
  if (d == 0 || g.size() != d || state.m.size() != d) {
    throw std::invalid_argument("step: dimension mismatch");
  }
  if (!(hp.epsilon > 0.0)) throw std::invalid_argument("step: epsilon <= 0");
  if (!g.is_finite()) throw NonFiniteError("step: non-finite gradient");

  const Method method = state.method;
  const std::int64_t t = state.t + 1;
  const double alpha = hp.alpha(t);
  const double beta1 = hp.beta1(t);
  const double beta2 = hp.beta2(t);
  const DecayMode decay = effective_decay(method, hp);
  const double lambda = decay == DecayMode::kNone ? 0.0 : hp.weight_decay;

  Vector grad = g;
  if (decay == DecayMode::kCoupledL2) {
    for (std::size_t i = 0; i < d; ++i) grad[i] += lambda * w[i];
  }

  StepReport report;
  report.alpha_t = alpha;
  report.alpha_eff = alpha;

  Vector m_next(d);
  Vector v_next = state.v;
  Vector v_hat_next = state.v_hat;
  Vector w_next(d);

  if (method == Method::kSgd) {
    m_next = grad;
  } else {
    for (std::size_t i = 0; i < d; ++i) {
      m_next[i] = beta1 * state.m[i] + (1.0 - beta1) * grad[i];
    }
  }

  auto refresh_v = [&] {
    for (std::size_t i = 0; i < d; ++i) {
      v_next[i] = beta2 * state.v[i] + (1.0 - beta2) * grad[i] * grad[i];
    }
  };

  report.eta = Vector(d);
  switch (method) {
    case Method::kSgd:
    case Method::kMomentumSgd:
      report.eta = Vector::ones(d);
      break;
    case Method::kAdam:
    case Method::kAdamW:
      refresh_v();
      for (std::size_t i = 0; i < d; ++i) {
        report.eta[i] = 1.0 / (std::sqrt(v_next[i]) + hp.epsilon);
      }
      break;
    case Method::kAmsGrad:
      refresh_v();
      for (std::size_t i = 0; i < d; ++i) {
        v_hat_next[i] = std::max(state.v_hat[i], v_next[i]);
        report.eta[i] = 1.0 / (std::sqrt(v_hat_next[i]) + hp.epsilon);
      }
      break;
    case Method::kDelayedAdam:
    case Method::kAvaGrad:
    case Method::kAvaGradW:
      // Rate from v_{t-1}; v is refreshed only after the parameter update.
      for (std::size_t i = 0; i < d; ++i) {
        report.eta[i] = 1.0 / (std::sqrt(state.v[i]) + hp.epsilon);
      }
      break;
  }
  if (!report.eta.is_finite()) throw NonFiniteError("step: non-finite rates");
  detail::fill_rate_stats(report);

  if (is_avagrad(method)) {
    const double root_d = std::sqrt(static_cast<double>(d));
    report.alpha_eff = alpha * root_d / report.eta_l2;
    // eta / ||eta / sqrt(d)||, which is exactly 1 when d = 1.
    const double rms = report.eta_l2 / root_d;
    for (std::size_t i = 0; i < d; ++i) {
      w_next[i] = w[i] - alpha * (report.eta[i] / rms) * m_next[i];
    }
  } else {
    for (std::size_t i = 0; i < d; ++i) {
      w_next[i] = w[i] - alpha * report.eta[i] * m_next[i];
    }
  }
  if (decay == DecayMode::kDecoupled) {
    for (std::size_t i = 0; i < d; ++i) w_next[i] -= alpha * lambda * w[i];
  }

  if (uses_delayed_rate(method)) refresh_v();

  if (!w_next.is_finite() || !m_next.is_finite() || !v_next.is_finite() ||
      !v_hat_next.is_finite() || !std::isfinite(report.alpha_eff)) {
    throw NonFiniteError("step " + std::to_string(t) +
                         ": non-finite parameters or moments");
  }

  w = std::move(w_next);
  state.m = std::move(m_next);
  state.v = std::move(v_next);
  state.v_hat = std::move(v_hat_next);
  state.t = t;
  return report;
}

}  // namespace avalab

#endif  // AVAGRAD_LAB_OPTIM_HPP_

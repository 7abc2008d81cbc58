#ifndef AVAGRAD_LAB_TESTS_REFERENCE_OPTIM_HPP_
#define AVAGRAD_LAB_TESTS_REFERENCE_OPTIM_HPP_

// Scalar-loop restatement of the update equations, written without reusing
// any library helper other than the hyperparameter schedules.

#include <algorithm>
#include <cmath>
#include <vector>

#include "avagrad_lab/optim.hpp"

namespace testref {

struct RefState {
  std::vector<double> m, v, vhat;
  long t = 0;
};

inline RefState from(const avalab::OptimizerState& s) {
  RefState r;
  r.m.assign(s.m.begin(), s.m.end());
  r.v.assign(s.v.begin(), s.v.end());
  r.vhat.assign(s.v_hat.begin(), s.v_hat.end());
  r.t = s.t;
  return r;
}

// Updates w and state in place; returns the per-coordinate rates used.
inline std::vector<double> ref_step(avalab::Method method, const avalab::HyperParams& hp,
                                    RefState& s, std::vector<double>& w,
                                    const std::vector<double>& g_raw) {
  using avalab::Method;
  const std::size_t d = w.size();
  const long t = s.t + 1;
  const double a = hp.alpha(t), b1 = hp.beta1(t), b2 = hp.beta2(t), eps = hp.epsilon;
  const bool w_variant = method == Method::kAdamW || method == Method::kAvaGradW;
  const bool coupled = !w_variant && hp.decay_mode == avalab::DecayMode::kCoupledL2;
  const bool decoupled = w_variant || hp.decay_mode == avalab::DecayMode::kDecoupled;
  const double lam = hp.weight_decay;

  std::vector<double> g = g_raw;
  if (coupled) {
    for (std::size_t i = 0; i < d; ++i) g[i] = g_raw[i] + lam * w[i];
  }
  std::vector<double> eta(d, 1.0);
  std::vector<double> w_old = w;

  if (method == Method::kSgd) {
    for (std::size_t i = 0; i < d; ++i) {
      s.m[i] = g[i];
      w[i] = w_old[i] - a * g[i];
    }
  } else if (method == Method::kMomentumSgd) {
    for (std::size_t i = 0; i < d; ++i) {
      s.m[i] = b1 * s.m[i] + (1 - b1) * g[i];
      w[i] = w_old[i] - a * s.m[i];
    }
  } else if (method == Method::kAdam || method == Method::kAdamW ||
             method == Method::kAmsGrad) {
    for (std::size_t i = 0; i < d; ++i) {
      s.m[i] = b1 * s.m[i] + (1 - b1) * g[i];
      s.v[i] = b2 * s.v[i] + (1 - b2) * g[i] * g[i];
      double denom = s.v[i];
      if (method == Method::kAmsGrad) {
        s.vhat[i] = std::max(s.vhat[i], s.v[i]);
        denom = s.vhat[i];
      }
      eta[i] = 1 / (std::sqrt(denom) + eps);
      w[i] = w_old[i] - a * eta[i] * s.m[i];
    }
  } else {
    double sq = 0;
    for (std::size_t i = 0; i < d; ++i) {
      eta[i] = 1 / (std::sqrt(s.v[i]) + eps);
      sq += eta[i] * eta[i];
    }
    // ||eta / sqrt(d)||_2
    const double norm = std::sqrt(sq / static_cast<double>(d));
    const bool ava = method == Method::kAvaGrad || method == Method::kAvaGradW;
    for (std::size_t i = 0; i < d; ++i) {
      s.m[i] = b1 * s.m[i] + (1 - b1) * g[i];
      const double rate = ava ? eta[i] / norm : eta[i];
      w[i] = w_old[i] - a * rate * s.m[i];
      s.v[i] = b2 * s.v[i] + (1 - b2) * g[i] * g[i];
    }
  }
  if (decoupled && lam != 0) {
    for (std::size_t i = 0; i < d; ++i) w[i] -= a * lam * w_old[i];
  }
  s.t = t;
  return eta;
}

}  // namespace testref

#endif  // AVAGRAD_LAB_TESTS_REFERENCE_OPTIM_HPP_

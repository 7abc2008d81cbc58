#ifndef AVAGRAD_LAB_SWEEP_HPP_
#define AVAGRAD_LAB_SWEEP_HPP_

// alpha x epsilon grid sweeps. Every cell owns its RNG stream, derived from
// the cell's identity, so results do not depend on scheduling.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "avagrad_lab/core.hpp"
#include "avagrad_lab/optim.hpp"
#include "avagrad_lab/problems.hpp"
#include "avagrad_lab/runner.hpp"

namespace avalab {

// Runs body(i) for i in [0, n) on `workers` threads. The first exception
// thrown by a body is rethrown after all threads join.
inline void parallel_for(std::size_t n, std::size_t workers,
                         const std::function<void(std::size_t)>& body) {
  if (workers == 0) throw std::invalid_argument("parallel_for: workers must be >= 1");
  workers = std::min(workers, std::max<std::size_t>(n, 1));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto run = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
}

struct Grid {
  std::vector<double> alphas;
  std::vector<double> epsilons;
};

// epsilon in {1, 2} x 10^k from 1e-8 to 100; alpha in {1, 5} x 10^k from
// 5e-7 to 5000. 21 values each.
inline Grid default_grid() {
  auto decimal = [](int mantissa, int exponent) {
    return std::stod(std::to_string(mantissa) + "e" + std::to_string(exponent));
  };
  Grid g;
  for (int k = -8; k <= 1; ++k) {
    g.epsilons.push_back(decimal(1, k));
    g.epsilons.push_back(decimal(2, k));
  }
  g.epsilons.push_back(decimal(1, 2));
  g.alphas.push_back(decimal(5, -7));
  for (int k = -6; k <= 3; ++k) {
    g.alphas.push_back(decimal(1, k));
    g.alphas.push_back(decimal(5, k));
  }
  return g;
}

struct GridSpec {
  std::vector<double> alphas;
  std::vector<double> epsilons;
  std::vector<Method> methods;
  std::vector<std::uint64_t> seeds;
  std::shared_ptr<const StochasticProblem> problem;
  std::int64_t T = 1000;
  std::uint64_t base_seed = 0;
  // alpha and epsilon are overwritten per cell; the alpha schedule kind is kept.
  HyperParams hp_template;
  // Start point; when empty each seed draws problem.initial_point() from a
  // stream shared by all cells with that seed.
  Vector w1;

  void validate() const {
    if (!problem) throw std::invalid_argument("grid: no problem");
    if (alphas.empty() || epsilons.empty() || methods.empty() || seeds.empty()) {
      throw std::invalid_argument("grid: alphas, epsilons, methods and seeds must be non-empty");
    }
    for (const auto* list : {&alphas, &epsilons}) {
      for (std::size_t i = 0; i < list->size(); ++i) {
        if (!((*list)[i] > 0.0) || !std::isfinite((*list)[i])) {
          throw std::invalid_argument("grid: values must be finite and > 0");
        }
        if (i > 0 && !((*list)[i - 1] < (*list)[i])) {
          throw std::invalid_argument("grid: values must be strictly ascending");
        }
      }
    }
    if (T < 1) throw std::invalid_argument("grid: T must be >= 1");
  }

  std::size_t cell_count() const {
    return methods.size() * alphas.size() * epsilons.size() * seeds.size();
  }
};

enum class CellStatus { kFinished, kConverged, kDiverged, kFailed };

inline std::string_view cell_status_name(CellStatus s) {
  switch (s) {
    case CellStatus::kFinished: return "finished";
    case CellStatus::kConverged: return "converged";
    case CellStatus::kDiverged: return "diverged";
    case CellStatus::kFailed: return "failed";
  }
  return "failed";
}

struct HeatmapCell {
  Method method = Method::kAdam;
  double alpha = 0.0;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  double final_metric = std::numeric_limits<double>::infinity();
  CellStatus status = CellStatus::kFinished;

  bool ok() const {
    return (status == CellStatus::kFinished || status == CellStatus::kConverged) &&
           std::isfinite(final_metric);
  }
};

inline std::uint64_t cell_seed(std::uint64_t base, Method m, std::size_t alpha_idx,
                               std::size_t eps_idx, std::size_t seed_idx) {
  return mix_seed(base, {static_cast<std::uint64_t>(m), alpha_idx, eps_idx, seed_idx});
}

inline HeatmapCell run_cell(const GridSpec& spec, std::size_t m_idx,
                            std::size_t a_idx, std::size_t e_idx,
                            std::size_t s_idx) {
  HeatmapCell cell;
  cell.method = spec.methods[m_idx];
  cell.alpha = spec.alphas[a_idx];
  cell.epsilon = spec.epsilons[e_idx];
  cell.seed = spec.seeds[s_idx];
  try {
    TrialConfig cfg;
    cfg.method = cell.method;
    cfg.hp = spec.hp_template;
    cfg.hp.alpha = Schedule(spec.hp_template.alpha.kind(), cell.alpha);
    cfg.hp.epsilon = cell.epsilon;
    cfg.problem = spec.problem;
    cfg.T = spec.T;
    cfg.seed = cell_seed(spec.base_seed, cell.method, a_idx, e_idx, s_idx);
    cfg.record_every = spec.T;
    if (spec.w1.empty()) {
      RngStream init = RngStream::derive(spec.base_seed, {cell.seed, 0x696e6974ULL});
      cfg.w1 = spec.problem->initial_point(init);
    } else {
      cfg.w1 = spec.w1;
    }
    const TrialRecord rec = run_trial(cfg);
    if (rec.status == TrialStatus::kDiverged) {
      cell.status = CellStatus::kDiverged;
    } else {
      const double metric = spec.problem->eval_metric(rec.final_w);
      if (std::isfinite(metric)) {
        cell.final_metric = metric;
        cell.status = rec.status == TrialStatus::kConverged ? CellStatus::kConverged
                                                            : CellStatus::kFinished;
      } else {
        cell.status = CellStatus::kDiverged;
      }
    }
  } catch (const NonFiniteError&) {
    cell.status = CellStatus::kDiverged;
  } catch (const std::exception&) {
    cell.status = CellStatus::kFailed;
  }
  if (!cell.ok()) cell.final_metric = std::numeric_limits<double>::infinity();
  return cell;
}

// Executes every (method, alpha, epsilon, seed) cell once. Output is sorted by
// (method position in spec.methods, alpha, epsilon, seed). Progress goes to
// `progress` as "done/total" lines when non-null.
inline std::vector<HeatmapCell> run_sweep(const GridSpec& spec, std::size_t workers,
                                          std::ostream* progress = nullptr) {
  spec.validate();
  const std::size_t na = spec.alphas.size(), ne = spec.epsilons.size(),
                    ns = spec.seeds.size();
  const std::size_t total = spec.cell_count();
  std::vector<HeatmapCell> cells(total);
  std::atomic<std::size_t> done{0};
  std::mutex progress_mu;
  parallel_for(total, workers, [&](std::size_t i) {
    const std::size_t s = i % ns;
    const std::size_t e = (i / ns) % ne;
    const std::size_t a = (i / (ns * ne)) % na;
    const std::size_t m = i / (ns * ne * na);
    cells[i] = run_cell(spec, m, a, e, s);
    const std::size_t n = done.fetch_add(1) + 1;
    if (progress != nullptr) {
      std::lock_guard lock(progress_mu);
      *progress << n << '/' << total << '\n';
    }
  });
  auto method_pos = [&](Method m) {
    return std::find(spec.methods.begin(), spec.methods.end(), m) - spec.methods.begin();
  };
  std::stable_sort(cells.begin(), cells.end(),
                   [&](const HeatmapCell& x, const HeatmapCell& y) {
                     return std::tuple(method_pos(x.method), x.alpha, x.epsilon, x.seed) <
                            std::tuple(method_pos(y.method), y.alpha, y.epsilon, y.seed);
                   });
  return cells;
}

// Fraction of epsilon values whose best alpha (mean metric over seeds,
// failures ranked worst, ties toward smaller alpha) equals the modal best
// alpha. 1.0 means the optimal alpha does not move with epsilon.
inline double separability_index(const std::vector<HeatmapCell>& cells, Method method) {
  // epsilon -> alpha -> (sum, count, any_failed)
  struct Acc {
    double sum = 0.0;
    std::size_t n = 0;
    bool failed = false;
  };
  std::map<double, std::map<double, Acc>> table;
  for (const auto& c : cells) {
    if (c.method != method) continue;
    Acc& acc = table[c.epsilon][c.alpha];
    if (c.ok()) {
      acc.sum += c.final_metric;
      ++acc.n;
    } else {
      acc.failed = true;
    }
  }
  if (table.size() < 2) {
    throw std::invalid_argument("separability_index: need at least two epsilon values for " +
                                std::string(method_name(method)));
  }
  std::map<double, std::size_t> votes;
  for (const auto& [eps, column] : table) {
    double best_alpha = 0.0;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [alpha, acc] : column) {  // ascending alpha
      if (acc.failed || acc.n == 0) continue;
      const double mean = acc.sum / static_cast<double>(acc.n);
      if (mean < best) {
        best = mean;
        best_alpha = alpha;
      }
    }
    if (!std::isfinite(best)) {
      throw std::domain_error("separability_index: every alpha diverged at epsilon " +
                              format_double(eps));
    }
    ++votes[best_alpha];
  }
  std::size_t modal = 0;
  for (const auto& [alpha, n] : votes) modal = std::max(modal, n);
  return static_cast<double>(modal) / static_cast<double>(table.size());
}

inline void write_heatmap(const std::vector<HeatmapCell>& cells, std::ostream& out) {
  out << "method,alpha,epsilon,seed,final_metric,status\n";
  for (const auto& c : cells) {
    out << method_name(c.method) << ',' << format_double(c.alpha) << ','
        << format_double(c.epsilon) << ',' << c.seed << ',';
    if (c.ok()) out << format_double(c.final_metric);
    out << ',' << cell_status_name(c.status) << '\n';
  }
}

inline void export_heatmap(const std::vector<HeatmapCell>& cells, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  write_heatmap(cells, out);
  out.flush();
  if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace avalab

#endif  // AVAGRAD_LAB_SWEEP_HPP_

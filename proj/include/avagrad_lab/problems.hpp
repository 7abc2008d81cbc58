#ifndef AVAGRAD_LAB_PROBLEMS_HPP_
#define AVAGRAD_LAB_PROBLEMS_HPP_

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "avagrad_lab/core.hpp"

namespace avalab {

struct Domain {
  bool boxed = false;
  double lo = 0.0;
  double hi = 0.0;

  static Domain unconstrained() { return {}; }
  static Domain box(double lo, double hi) { return {true, lo, hi}; }
};

// Smoothness M, initial gap D >= f(w1) - f(w*), and gradient bounds
// ||grad f_s||_inf <= G_inf, ||grad f_s||_2 <= G_2. Unbounded quantities are
// +inf.
struct ProblemConstants {
  double M = 0.0;
  double D_gap = 0.0;
  double G_inf = 0.0;
  double G_2 = 0.0;

  bool all_finite() const {
    return std::isfinite(M) && std::isfinite(D_gap) && std::isfinite(G_inf) &&
           std::isfinite(G_2);
  }
};

// Index into a finite outcome set (synthetic family).
struct OutcomeToken {
  std::size_t index = 0;
};
// Gaussian perturbation of the target (quadratic family).
struct NoiseToken {
  Vector target;
};
// Mini-batch of dataset rows (MLP).
struct BatchToken {
  std::vector<std::size_t> rows;
};

using SampleToken = std::variant<OutcomeToken, NoiseToken, BatchToken>;

struct Outcome {
  double probability;
  SampleToken token;
};

class StochasticProblem {
 public:
  virtual ~StochasticProblem() = default;

  virtual std::string name() const = 0;
  virtual std::size_t dim() const = 0;
  virtual Domain domain() const { return Domain::unconstrained(); }

  virtual SampleToken sample(RngStream& rng) const = 0;
  virtual Vector grad(const Vector& w, const SampleToken& token) const = 0;
  virtual double loss(const Vector& w, const SampleToken& token) const = 0;

  virtual std::optional<Vector> full_grad(const Vector&) const {
    return std::nullopt;
  }
  virtual std::optional<double> full_loss(const Vector&) const {
    return std::nullopt;
  }
  // Constants for a run started at w1 (D depends on the start point).
  virtual std::optional<ProblemConstants> constants(const Vector&) const {
    return std::nullopt;
  }
  // Full outcome distribution for problems with finitely many samples.
  virtual std::optional<std::vector<Outcome>> outcomes() const {
    return std::nullopt;
  }

  virtual Vector initial_point(RngStream&) const { return Vector::zeros(dim()); }

  // Scalar quality used by sweeps (lower is better).
  virtual double eval_metric(const Vector& w) const {
    const auto f = full_loss(w);
    return f ? *f : std::numeric_limits<double>::quiet_NaN();
  }

 protected:
  void check_dim(const Vector& w) const {
    if (w.size() != dim()) {
      throw std::invalid_argument(name() + ": expected dimension " +
                                  std::to_string(dim()) + ", got " +
                                  std::to_string(w.size()));
    }
  }
};

// ---------------------------------------------------------------------------
// Synthetic two-outcome problem on [0, 1]:
//   f_s(w) = C w^2 / 2  with probability p = (1 + delta) / (C + 1)
//   f_s(w) = -w         otherwise
// ---------------------------------------------------------------------------

struct SynthParams {
  double C = 999.0;
  double delta = 1.0;

  double p() const { return (1.0 + delta) / (C + 1.0); }
  double w_star() const { return (1.0 - p()) / (C * p()); }
};

class SynthProblem final : public StochasticProblem {
 public:
  static constexpr std::size_t kRare = 0;
  static constexpr std::size_t kCommon = 1;

  explicit SynthProblem(SynthParams params) : params_(params), p_(params.p()) {
    if (!(params.C > 1.0) || !std::isfinite(params.C)) {
      throw std::invalid_argument("synth: C must be finite and > 1");
    }
    if (!(params.delta >= 0.0)) {
      throw std::invalid_argument("synth: delta must be >= 0");
    }
    if (!(p_ > 0.0 && p_ < 1.0)) {
      throw std::invalid_argument("synth: p = (1+delta)/(C+1) must lie in (0,1)");
    }
    if (!(params.C > (1.0 - p_) / p_)) {
      throw std::invalid_argument("synth: need C > (1-p)/p so that w* < 1");
    }
  }

  const SynthParams& params() const { return params_; }
  double p() const { return p_; }
  double w_star() const { return params_.w_star(); }

  std::string name() const override { return "synth"; }
  std::size_t dim() const override { return 1; }
  Domain domain() const override { return Domain::box(0.0, 1.0); }

  SampleToken sample(RngStream& rng) const override {
    return OutcomeToken{rng.bernoulli(p_) ? kRare : kCommon};
  }

  Vector grad(const Vector& w, const SampleToken& token) const override {
    check_dim(w);
    return Vector{outcome_grad(w[0], outcome_of(token))};
  }

  double loss(const Vector& w, const SampleToken& token) const override {
    check_dim(w);
    const double x = w[0];
    return outcome_of(token) == kRare ? params_.C * x * x / 2.0 : -x;
  }

  // Written as the two-term expectation so it agrees bit-for-bit with
  // enumeration over outcomes().
  std::optional<Vector> full_grad(const Vector& w) const override {
    check_dim(w);
    return Vector{expected_grad(w[0])};
  }

  std::optional<double> full_loss(const Vector& w) const override {
    check_dim(w);
    return objective(w[0]);
  }

  std::optional<ProblemConstants> constants(const Vector& w1) const override {
    check_dim(w1);
    ProblemConstants c;
    c.M = p_ * params_.C;
    c.G_inf = std::max(params_.C, 1.0);
    c.G_2 = c.G_inf;
    c.D_gap = gap(w1[0]);
    return c;
  }

  std::optional<std::vector<Outcome>> outcomes() const override {
    return std::vector<Outcome>{{p_, OutcomeToken{kRare}},
                                {1.0 - p_, OutcomeToken{kCommon}}};
  }

  Vector initial_point(RngStream&) const override { return Vector{0.5}; }

  double eval_metric(const Vector& w) const override {
    check_dim(w);
    return gap(w[0]);
  }

  // f(w) - f(w*) as p C (w - w*)^2 / 2, free of cancellation.
  double gap(double w) const {
    const double r = w - w_star();
    return p_ * params_.C * r * r / 2.0;
  }

  double objective(double w) const {
    return p_ * (params_.C * w * w / 2.0) + (1.0 - p_) * (-w);
  }
  double expected_grad(double w) const {
    return p_ * (params_.C * w) + (1.0 - p_) * (-1.0);
  }
  double outcome_grad(double w, std::size_t outcome) const {
    return outcome == kRare ? params_.C * w : -1.0;
  }

 private:
  static std::size_t outcome_of(const SampleToken& token) {
    const auto* o = std::get_if<OutcomeToken>(&token);
    if (o == nullptr || o->index > kCommon) {
      throw std::invalid_argument("synth: token is not a synth outcome");
    }
    return o->index;
  }

  SynthParams params_;
  double p_;
};

inline std::shared_ptr<const SynthProblem> synth_make(double C, double delta) {
  return std::make_shared<const SynthProblem>(SynthParams{C, delta});
}

// ---------------------------------------------------------------------------
// Noisy separable quadratic: f_s(w) = 1/2 sum_i c_i (w_i - xi_i)^2 with
// xi ~ N(w*, noise_std^2 I).
// ---------------------------------------------------------------------------

class QuadraticProblem final : public StochasticProblem {
 public:
  QuadraticProblem(Vector curvatures, double noise_std, Vector w_star)
      : curv_(std::move(curvatures)),
        noise_std_(noise_std),
        w_star_(std::move(w_star)) {
    if (curv_.empty()) throw std::invalid_argument("quadratic: dimension must be >= 1");
    for (double c : curv_) {
      if (!(c > 0.0)) throw std::invalid_argument("quadratic: curvatures must be > 0");
    }
    if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) {
      throw std::invalid_argument("quadratic: noise_std must be finite and >= 0");
    }
    if (w_star_.size() != curv_.size()) {
      throw std::invalid_argument("quadratic: w* dimension mismatch");
    }
  }

  const Vector& curvatures() const { return curv_; }
  const Vector& w_star() const { return w_star_; }
  double noise_std() const { return noise_std_; }

  std::string name() const override { return "quadratic"; }
  std::size_t dim() const override { return curv_.size(); }

  SampleToken sample(RngStream& rng) const override {
    Vector target = w_star_;
    if (noise_std_ > 0.0) {
      for (double& x : target) x += noise_std_ * rng.normal();
    }
    return NoiseToken{std::move(target)};
  }

  Vector grad(const Vector& w, const SampleToken& token) const override {
    check_dim(w);
    const Vector& xi = target_of(token);
    Vector g(dim());
    for (std::size_t i = 0; i < dim(); ++i) g[i] = curv_[i] * (w[i] - xi[i]);
    return g;
  }

  double loss(const Vector& w, const SampleToken& token) const override {
    check_dim(w);
    return half_weighted_sq(w, target_of(token));
  }

  std::optional<Vector> full_grad(const Vector& w) const override {
    return grad(w, NoiseToken{w_star_});
  }

  std::optional<double> full_loss(const Vector& w) const override {
    check_dim(w);
    double noise_term = 0.0;
    for (double c : curv_) noise_term += c;
    return half_weighted_sq(w, w_star_) +
           0.5 * noise_term * noise_std_ * noise_std_;
  }

  // Gradients are unbounded on R^d, so G_inf and G_2 are reported as +inf.
  std::optional<ProblemConstants> constants(const Vector& w1) const override {
    check_dim(w1);
    ProblemConstants c;
    c.M = norms(curv_).max;
    c.D_gap = half_weighted_sq(w1, w_star_);
    c.G_inf = std::numeric_limits<double>::infinity();
    c.G_2 = std::numeric_limits<double>::infinity();
    return c;
  }

  double eval_metric(const Vector& w) const override {
    check_dim(w);
    return half_weighted_sq(w, w_star_);
  }

 private:
  const Vector& target_of(const SampleToken& token) const {
    const auto* n = std::get_if<NoiseToken>(&token);
    if (n == nullptr || n->target.size() != dim()) {
      throw std::invalid_argument("quadratic: token is not a quadratic sample");
    }
    return n->target;
  }

  double half_weighted_sq(const Vector& w, const Vector& target) const {
    double s = 0.0;
    for (std::size_t i = 0; i < dim(); ++i) {
      const double r = w[i] - target[i];
      s += curv_[i] * r * r;
    }
    return 0.5 * s;
  }

  Vector curv_;
  double noise_std_;
  Vector w_star_;
};

inline std::shared_ptr<const QuadraticProblem> quadratic_make(
    std::size_t dim, Vector curvatures, double noise_std, Vector w_star) {
  if (curvatures.size() != dim) {
    throw std::invalid_argument("quadratic: curvature count does not match dim");
  }
  return std::make_shared<const QuadraticProblem>(std::move(curvatures),
                                                  noise_std, std::move(w_star));
}

// w* drawn from N(0, I) using rng.
inline std::shared_ptr<const QuadraticProblem> quadratic_make(
    std::size_t dim, Vector curvatures, double noise_std, RngStream& rng) {
  Vector w_star(dim);
  for (double& x : w_star) x = rng.normal();
  return quadratic_make(dim, std::move(curvatures), noise_std, std::move(w_star));
}

// ---------------------------------------------------------------------------
// Labeled data
// ---------------------------------------------------------------------------

struct LabeledSet {
  std::size_t n_in = 0;
  std::vector<double> features;  // row-major, size() * n_in
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features).subspan(i * n_in, n_in);
  }
  void push_back(std::span<const double> x, int label) {
    features.insert(features.end(), x.begin(), x.end());
    labels.push_back(label);
  }
};

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Class k is centred at separation * u_k, where u_k is the unit vector at
// angle 2*pi*k/n_classes in the plane of the first two coordinates (or
// cos(angle) along the only axis when n_in == 1). Unit covariance. Rows are
// emitted class by class.
inline LabeledSet gaussian_blobs(std::size_t n_per_class, std::size_t n_classes,
                                 std::size_t n_in, double separation,
                                 RngStream& rng) {
  if (n_per_class == 0 || n_classes == 0 || n_in == 0) {
    throw std::invalid_argument("gaussian_blobs: counts must be >= 1");
  }
  LabeledSet set;
  set.n_in = n_in;
  std::vector<double> x(n_in);
  for (std::size_t k = 0; k < n_classes; ++k) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) /
                         static_cast<double>(n_classes);
    for (std::size_t n = 0; n < n_per_class; ++n) {
      for (std::size_t i = 0; i < n_in; ++i) x[i] = rng.normal();
      x[0] += separation * std::cos(angle);
      if (n_in > 1) x[1] += separation * std::sin(angle);
      set.push_back(x, static_cast<int>(k));
    }
  }
  return set;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n';
  };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace detail

// One example per line: f_1,...,f_{n_in},label. No header. LF or CRLF.
// Blank lines are skipped.
inline LabeledSet parse_csv_dataset(std::istream& in, const std::string& source,
                                    std::size_t n_in, std::size_t n_classes) {
  LabeledSet set;
  set.n_in = n_in;
  std::string line;
  std::size_t line_no = 0;
  std::vector<double> x(n_in);
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view text = detail::trim(line);
    if (text.empty()) continue;
    const auto fail = [&](const std::string& what) {
      throw DatasetError(source + ":" + std::to_string(line_no) + ": " + what);
    };
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = text.find(',', start);
      fields.push_back(text.substr(start, comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (fields.size() != n_in + 1) {
      fail("expected " + std::to_string(n_in + 1) + " fields, got " +
           std::to_string(fields.size()));
    }
    for (std::size_t i = 0; i < n_in; ++i) {
      if (!detail::parse_number(fields[i], x[i]) || !std::isfinite(x[i])) {
        fail("cannot parse feature " + std::to_string(i + 1) + " '" +
             std::string(fields[i]) + "'");
      }
    }
    long long label = 0;
    if (!detail::parse_number(fields[n_in], label)) {
      fail("cannot parse label '" + std::string(fields[n_in]) + "'");
    }
    if (label < 0 || static_cast<unsigned long long>(label) >= n_classes) {
      fail("label " + std::to_string(label) + " outside [0, " +
           std::to_string(n_classes) + ")");
    }
    set.push_back(x, static_cast<int>(label));
  }
  if (set.empty()) throw DatasetError(source + ": dataset is empty");
  return set;
}

inline LabeledSet load_csv_dataset(const std::string& path, std::size_t n_in,
                                   std::size_t n_classes) {
  std::ifstream in(path);
  if (!in) throw DatasetError(path + ": cannot open dataset file");
  return parse_csv_dataset(in, path, n_in, n_classes);
}

// ---------------------------------------------------------------------------
// Two-layer tanh perceptron with softmax cross-entropy.
//
// Parameter layout (flattened): W1 [n_hidden x n_in], b1 [n_hidden],
// W2 [n_classes x n_hidden], b2 [n_classes].
// ---------------------------------------------------------------------------

struct MlpShape {
  std::size_t n_in = 0;
  std::size_t n_hidden = 0;
  std::size_t n_classes = 0;

  std::size_t w1() const { return 0; }
  std::size_t b1() const { return n_hidden * n_in; }
  std::size_t w2() const { return b1() + n_hidden; }
  std::size_t b2() const { return w2() + n_classes * n_hidden; }
  std::size_t dim() const {
    return (n_in + 1) * n_hidden + (n_hidden + 1) * n_classes;
  }
};

class MlpProblem final : public StochasticProblem {
 public:
  MlpProblem(MlpShape shape, LabeledSet train, std::size_t batch_size,
             std::optional<LabeledSet> validation = std::nullopt)
      : shape_(shape),
        train_(std::move(train)),
        validation_(std::move(validation)),
        batch_size_(batch_size) {
    if (shape.n_in == 0 || shape.n_hidden == 0 || shape.n_classes == 0) {
      throw std::invalid_argument("mlp: dimensions must be >= 1");
    }
    if (train_.empty()) throw std::invalid_argument("mlp: empty training set");
    if (batch_size == 0) throw std::invalid_argument("mlp: batch size must be >= 1");
    check_set(train_);
    if (validation_) check_set(*validation_);
  }

  const MlpShape& shape() const { return shape_; }
  const LabeledSet& train() const { return train_; }
  const std::optional<LabeledSet>& validation() const { return validation_; }

  std::string name() const override { return "mlp"; }
  std::size_t dim() const override { return shape_.dim(); }

  // Uniform batch without replacement (partial Fisher-Yates).
  SampleToken sample(RngStream& rng) const override {
    const std::size_t n = train_.size();
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    const std::size_t k = std::min(batch_size_, n);
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + rng.uniform_index(n - i);
      std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return BatchToken{std::move(idx)};
  }

  Vector grad(const Vector& w, const SampleToken& token) const override {
    check_dim(w);
    Vector g = Vector::zeros(dim());
    const auto& rows = rows_of(token);
    for (std::size_t r : rows) accumulate(w, train_, r, &g);
    scale_in_place(g, 1.0 / static_cast<double>(rows.size()));
    return g;
  }

  double loss(const Vector& w, const SampleToken& token) const override {
    check_dim(w);
    const auto& rows = rows_of(token);
    double total = 0.0;
    for (std::size_t r : rows) total += accumulate(w, train_, r, nullptr);
    return total / static_cast<double>(rows.size());
  }

  std::optional<Vector> full_grad(const Vector& w) const override {
    check_dim(w);
    Vector g = Vector::zeros(dim());
    for (std::size_t r = 0; r < train_.size(); ++r) accumulate(w, train_, r, &g);
    scale_in_place(g, 1.0 / static_cast<double>(train_.size()));
    return g;
  }

  std::optional<double> full_loss(const Vector& w) const override {
    return mean_loss(w, train_);
  }

  // Glorot-uniform weights, zero biases.
  Vector initial_point(RngStream& rng) const override {
    Vector w = Vector::zeros(dim());
    const double r1 = std::sqrt(6.0 / static_cast<double>(shape_.n_in + shape_.n_hidden));
    const double r2 =
        std::sqrt(6.0 / static_cast<double>(shape_.n_hidden + shape_.n_classes));
    for (std::size_t i = shape_.w1(); i < shape_.b1(); ++i) {
      w[i] = r1 * (2.0 * rng.uniform() - 1.0);
    }
    for (std::size_t i = shape_.w2(); i < shape_.b2(); ++i) {
      w[i] = r2 * (2.0 * rng.uniform() - 1.0);
    }
    return w;
  }

  // Held-out cross-entropy when a validation set exists, else training loss.
  double eval_metric(const Vector& w) const override {
    return mean_loss(w, validation_ ? *validation_ : train_);
  }

  double mean_loss(const Vector& w, const LabeledSet& set) const {
    check_dim(w);
    double total = 0.0;
    for (std::size_t r = 0; r < set.size(); ++r) total += accumulate(w, set, r, nullptr);
    return total / static_cast<double>(set.size());
  }

  double error_rate(const Vector& w, const LabeledSet& set) const {
    check_dim(w);
    std::size_t wrong = 0;
    std::vector<double> hidden(shape_.n_hidden), logits(shape_.n_classes);
    for (std::size_t r = 0; r < set.size(); ++r) {
      forward(w, set.row(r), hidden, logits);
      const auto best = std::max_element(logits.begin(), logits.end()) - logits.begin();
      if (best != set.labels[r]) ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(set.size());
  }

  // Softmax probabilities for one input.
  std::vector<double> predict(const Vector& w, std::span<const double> x) const {
    check_dim(w);
    std::vector<double> hidden(shape_.n_hidden), logits(shape_.n_classes);
    forward(w, x, hidden, logits);
    softmax_in_place(logits);
    return logits;
  }

 private:
  void check_set(const LabeledSet& set) const {
    if (set.n_in != shape_.n_in) {
      throw std::invalid_argument("mlp: dataset has " + std::to_string(set.n_in) +
                                  " features, model expects " +
                                  std::to_string(shape_.n_in));
    }
    for (int y : set.labels) {
      if (y < 0 || static_cast<std::size_t>(y) >= shape_.n_classes) {
        throw std::invalid_argument("mlp: label outside class range");
      }
    }
  }

  const std::vector<std::size_t>& rows_of(const SampleToken& token) const {
    const auto* b = std::get_if<BatchToken>(&token);
    if (b == nullptr || b->rows.empty()) {
      throw std::invalid_argument("mlp: token is not a non-empty batch");
    }
    for (std::size_t r : b->rows) {
      if (r >= train_.size()) throw std::invalid_argument("mlp: batch row out of range");
    }
    return b->rows;
  }

  static void scale_in_place(Vector& v, double c) {
    for (double& x : v) x *= c;
  }

  static void softmax_in_place(std::vector<double>& z) {
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double& x : z) {
      x = std::exp(x - zmax);
      sum += x;
    }
    for (double& x : z) x /= sum;
  }

  void forward(const Vector& w, std::span<const double> x,
               std::vector<double>& hidden, std::vector<double>& logits) const {
    const auto& s = shape_;
    for (std::size_t j = 0; j < s.n_hidden; ++j) {
      double a = w[s.b1() + j];
      for (std::size_t i = 0; i < s.n_in; ++i) a += w[s.w1() + j * s.n_in + i] * x[i];
      hidden[j] = std::tanh(a);
    }
    for (std::size_t k = 0; k < s.n_classes; ++k) {
      double z = w[s.b2() + k];
      for (std::size_t j = 0; j < s.n_hidden; ++j) {
        z += w[s.w2() + k * s.n_hidden + j] * hidden[j];
      }
      logits[k] = z;
    }
  }

  // Returns the example's loss; adds its gradient to *g when non-null.
  double accumulate(const Vector& w, const LabeledSet& set, std::size_t r,
                    Vector* g) const {
    const auto& s = shape_;
    const auto x = set.row(r);
    const auto y = static_cast<std::size_t>(set.labels[r]);
    std::vector<double> hidden(s.n_hidden), logits(s.n_classes);
    forward(w, x, hidden, logits);

    const double zmax = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double z : logits) sum += std::exp(z - zmax);
    const double log_norm = zmax + std::log(sum);
    const double loss = log_norm - logits[y];
    if (g == nullptr) return loss;

    std::vector<double> dz(s.n_classes), dh(s.n_hidden, 0.0);
    for (std::size_t k = 0; k < s.n_classes; ++k) {
      dz[k] = std::exp(logits[k] - log_norm) - (k == y ? 1.0 : 0.0);
    }
    Vector& grad = *g;
    for (std::size_t k = 0; k < s.n_classes; ++k) {
      grad[s.b2() + k] += dz[k];
      for (std::size_t j = 0; j < s.n_hidden; ++j) {
        grad[s.w2() + k * s.n_hidden + j] += dz[k] * hidden[j];
        dh[j] += w[s.w2() + k * s.n_hidden + j] * dz[k];
      }
    }
    for (std::size_t j = 0; j < s.n_hidden; ++j) {
      const double da = dh[j] * (1.0 - hidden[j] * hidden[j]);
      grad[s.b1() + j] += da;
      for (std::size_t i = 0; i < s.n_in; ++i) {
        grad[s.w1() + j * s.n_in + i] += da * x[i];
      }
    }
    return loss;
  }

  MlpShape shape_;
  LabeledSet train_;
  std::optional<LabeledSet> validation_;
  std::size_t batch_size_;
};

inline std::shared_ptr<const MlpProblem> mlp_make(
    std::size_t n_in, std::size_t n_hidden, std::size_t n_classes,
    LabeledSet dataset, std::size_t batch_size,
    std::optional<LabeledSet> validation = std::nullopt) {
  return std::make_shared<const MlpProblem>(MlpShape{n_in, n_hidden, n_classes},
                                            std::move(dataset), batch_size,
                                            std::move(validation));
}

// Largest per-coordinate relative error between grad(w, token) and a central
// difference of loss(., token); the denominator is floored at 1e-8.
inline double fd_check(const StochasticProblem& problem, const Vector& w,
                       const SampleToken& token, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("fd_check: h must be > 0");
  const Vector g = problem.grad(w, token);
  double worst = 0.0;
  Vector probe = w;
  for (std::size_t i = 0; i < w.size(); ++i) {
    probe[i] = w[i] + h;
    const double up = problem.loss(probe, token);
    probe[i] = w[i] - h;
    const double down = problem.loss(probe, token);
    probe[i] = w[i];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NonFiniteError("fd_check: non-finite loss at coordinate " +
                           std::to_string(i));
    }
    const double fd = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(fd), std::abs(g[i]), 1e-8});
    worst = std::max(worst, std::abs(fd - g[i]) / denom);
  }
  return worst;
}

}  // namespace avalab

#endif  // AVAGRAD_LAB_PROBLEMS_HPP_

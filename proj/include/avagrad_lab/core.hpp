#ifndef AVAGRAD_LAB_CORE_HPP_
#define AVAGRAD_LAB_CORE_HPP_

// Dense vectors, scalar schedules and the deterministic RNG contract shared
// by every other header in the library.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace avalab {

// Raised when an operation would produce NaN or Inf. Optimizers surface
// divergence through this type so callers can tell it apart from bad input.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(),
                     [](double x) { return std::isfinite(x); });
}

// Shortest round-trip representation is not required; 17 significant digits
// always round-trips and keeps CSV output byte-stable across runs.
inline std::string format_double(double x) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x,
                                 std::chars_format::general, 17);
  if (ec != std::errc{}) throw std::runtime_error("format_double failed");
  return std::string(buf.data(), end);
}

class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t d, double fill = 0.0) : data_(d, fill) {}
  Vector(std::initializer_list<double> xs) : data_(xs) { check_finite(); }
  explicit Vector(std::vector<double> xs) : data_(std::move(xs)) {
    check_finite();
  }

  static Vector zeros(std::size_t d) { return Vector(d, 0.0); }
  static Vector ones(std::size_t d) { return Vector(d, 1.0); }

  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> span() { return data_; }
  std::span<const double> span() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  bool is_finite() const { return all_finite(data_); }

  friend bool operator==(const Vector&, const Vector&) = default;

 private:
  void check_finite() const {
    if (!is_finite()) throw NonFiniteError("vector contains NaN or Inf");
  }

  std::vector<double> data_;
};

enum class BinaryOp { kAdd, kSub, kMul, kDiv };

inline Vector elementwise(const Vector& a, const Vector& b, BinaryOp op) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("elementwise: length mismatch (" +
                                std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + ")");
  }
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    switch (op) {
      case BinaryOp::kAdd: out[i] = a[i] + b[i]; break;
      case BinaryOp::kSub: out[i] = a[i] - b[i]; break;
      case BinaryOp::kMul: out[i] = a[i] * b[i]; break;
      case BinaryOp::kDiv:
        if (b[i] == 0.0) {
          throw std::domain_error("elementwise: division by zero at index " +
                                  std::to_string(i));
        }
        out[i] = a[i] / b[i];
        break;
    }
  }
  if (!out.is_finite()) throw NonFiniteError("elementwise: non-finite output");
  return out;
}

struct ScalarOp {
  enum class Kind { kSqrt, kSquare, kAddScalar, kScale };
  Kind kind;
  double c = 0.0;

  static ScalarOp sqrt() { return {Kind::kSqrt}; }
  static ScalarOp square() { return {Kind::kSquare}; }
  static ScalarOp add_scalar(double c) { return {Kind::kAddScalar, c}; }
  static ScalarOp scale(double c) { return {Kind::kScale, c}; }
};

inline Vector map_scalar(const Vector& a, ScalarOp op) {
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    switch (op.kind) {
      case ScalarOp::Kind::kSqrt:
        if (a[i] < 0.0) {
          throw std::domain_error("map_scalar: sqrt of negative value at index " +
                                  std::to_string(i));
        }
        out[i] = std::sqrt(a[i]);
        break;
      case ScalarOp::Kind::kSquare: out[i] = a[i] * a[i]; break;
      case ScalarOp::Kind::kAddScalar: out[i] = a[i] + op.c; break;
      case ScalarOp::Kind::kScale: out[i] = a[i] * op.c; break;
    }
  }
  if (!out.is_finite()) throw NonFiniteError("map_scalar: non-finite output");
  return out;
}

struct Norms {
  double l2;
  double linf;
  double min;
  double max;
};

inline Norms norms(const Vector& a) {
  if (a.empty()) throw std::invalid_argument("norms: empty vector");
  Norms n{0.0, 0.0, a[0], a[0]};
  double sum_sq = 0.0;
  for (double x : a) {
    sum_sq += x * x;
    n.linf = std::max(n.linf, std::abs(x));
    n.min = std::min(n.min, x);
    n.max = std::max(n.max, x);
  }
  n.l2 = std::sqrt(sum_sq);
  return n;
}

// Euclidean projection onto the box [lo, hi]^d.
inline Vector clamp_box(const Vector& a, double lo, double hi) {
  if (lo > hi) throw std::invalid_argument("clamp_box: lo > hi");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out[i] = std::min(hi, std::max(lo, a[i]));
  }
  return out;
}

// Step-indexed scalar used for alpha_t, beta1_t and beta2_t. Steps are
// 1-based.
class Schedule {
 public:
  enum class Kind { kConstant, kInverseSqrt, kInverseT };

  Schedule() = default;
  Schedule(Kind kind, double base) : kind_(kind), base_(base) {
    if (!std::isfinite(base)) {
      throw std::invalid_argument("Schedule: non-finite base value");
    }
  }

  static Schedule constant(double base) { return {Kind::kConstant, base}; }
  static Schedule inverse_sqrt(double base) {
    return {Kind::kInverseSqrt, base};
  }
  // 1 - 1/t; the base is unused.
  static Schedule inverse_t() { return {Kind::kInverseT, 0.0}; }

  Kind kind() const { return kind_; }
  double base() const { return base_; }

  double operator()(std::int64_t t) const {
    if (t < 1) {
      throw std::invalid_argument("Schedule: step index must be >= 1, got " +
                                  std::to_string(t));
    }
    switch (kind_) {
      case Kind::kConstant: return base_;
      case Kind::kInverseSqrt: return base_ / std::sqrt(static_cast<double>(t));
      case Kind::kInverseT: return 1.0 - 1.0 / static_cast<double>(t);
    }
    return base_;
  }

  // Largest value over all t >= 1. Every supported kind is bounded by it.
  double sup() const {
    switch (kind_) {
      case Kind::kConstant:
      case Kind::kInverseSqrt: return std::max(base_, 0.0);
      case Kind::kInverseT: return 1.0;
    }
    return base_;
  }

  friend bool operator==(const Schedule&, const Schedule&) = default;

 private:
  Kind kind_ = Kind::kConstant;
  double base_ = 0.0;
};

inline double schedule_eval(const Schedule& s, std::int64_t t) { return s(t); }

inline std::string schedule_kind_name(Schedule::Kind k) {
  switch (k) {
    case Schedule::Kind::kConstant: return "constant";
    case Schedule::Kind::kInverseSqrt: return "inverse_sqrt";
    case Schedule::Kind::kInverseT: return "inverse_t";
  }
  return "constant";
}

inline Schedule::Kind parse_schedule_kind(const std::string& name) {
  if (name == "constant") return Schedule::Kind::kConstant;
  if (name == "inverse_sqrt") return Schedule::Kind::kInverseSqrt;
  if (name == "inverse_t") return Schedule::Kind::kInverseT;
  throw std::invalid_argument("unknown schedule kind '" + name + "'");
}

// SplitMix64 finalizer. Used both as the generator's output function and as
// the published seed-mixing function for derived streams.
constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// mix(base, i0, i1, ...) = splitmix64(... splitmix64(splitmix64(base) ^ i0) ^ i1 ...)
inline std::uint64_t mix_seed(std::uint64_t base,
                              std::initializer_list<std::uint64_t> indices) {
  std::uint64_t h = splitmix64(base);
  for (std::uint64_t i : indices) h = splitmix64(h ^ i);
  return h;
}

// Counter-based stream: draw k is splitmix64(key + k * golden). Identical
// seeds give identical sequences on every platform; distributions are
// implemented here rather than through <random> whose algorithms are
// implementation-defined.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : key_(splitmix64(seed)) {}

  static RngStream derive(std::uint64_t base,
                          std::initializer_list<std::uint64_t> indices) {
    return RngStream(mix_seed(base, indices));
  }

  std::uint64_t next_u64() {
    return splitmix64(key_ + 0x9E3779B97F4A7C15ULL * counter_++);
  }

  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Unbiased integer in [0, n) by rejection.
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: n must be > 0");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller; the spare deviate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  std::uint64_t draws() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace avalab

#endif  // AVAGRAD_LAB_CORE_HPP_

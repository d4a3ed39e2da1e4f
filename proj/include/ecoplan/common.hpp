// Shared error types, numeric helpers, and small polynomial utilities used
// across the planner modules.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace ecoplan {

inline constexpr double kInfiniteCost = std::numeric_limits<double>::infinity();

// Power-limited force targets diverge as v -> 0; real motors are torque
// limited, so optimal-power evaluations floor the speed here.
inline constexpr double kSpeedFloor = 0.1;  // m/s

inline bool is_blocked(double cost) { return std::isinf(cost); }

// Planner-level failures that callers are expected to handle (fall back,
// replan, or stop), as opposed to precondition bugs.
class PlannerError : public std::runtime_error {
 public:
  enum class Code {
    BlockedPath,
    CorridorCollapse,
    InfeasibleHorizon,
    ComparisonMismatch,
  };

  PlannerError(Code code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  Code code() const { return code_; }

 private:
  Code code_;
};

// Projection onto a reference line found two equidistant, non-adjacent
// candidates; carries both arc-length candidates for the caller.
class AmbiguousProjectionError : public std::runtime_error {
 public:
  AmbiguousProjectionError(double s_a, double s_b)
      : std::runtime_error("ambiguous projection: s=" + std::to_string(s_a) +
                           " and s=" + std::to_string(s_b) +
                           " are equidistant"),
        s_first(s_a),
        s_second(s_b) {}

  double s_first;
  double s_second;
};

// Dense polynomial with fixed max degree, coefficient order a0 + a1 x + ...
// Degrees stay tiny (quintics and their squares), so std::array is enough.
template <std::size_t N>
struct Poly {
  std::array<double, N> c{};

  double eval(double x) const {
    double acc = 0.0;
    for (std::size_t i = N; i-- > 0;) acc = acc * x + c[i];
    return acc;
  }
};

template <std::size_t N>
Poly<N> poly_derivative(const Poly<N>& p) {
  Poly<N> d;
  for (std::size_t i = 1; i < N; ++i) d.c[i - 1] = p.c[i] * static_cast<double>(i);
  d.c[N - 1] = 0.0;
  return d;
}

template <std::size_t N, std::size_t M>
Poly<N + M - 1> poly_multiply(const Poly<N>& a, const Poly<M>& b) {
  Poly<N + M - 1> r;
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < M; ++j) r.c[i + j] += a.c[i] * b.c[j];
  return r;
}

// Definite integral over [0, x1].
template <std::size_t N>
double poly_integral(const Poly<N>& p, double x1) {
  double acc = 0.0;
  for (std::size_t i = N; i-- > 0;)
    acc = acc * x1 + p.c[i] / static_cast<double>(i + 1);
  return acc * x1;
}

// FNV-1a, used for scenario identity hashes (stable across platforms,
// unlike std::hash).
inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= static_cast<std::uint64_t>(b);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace ecoplan

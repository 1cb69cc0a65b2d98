#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>

#include "linproj/canonicalize.hpp"
#include "linproj/errors.hpp"
#include "linproj/operator.hpp"
#include "linproj/vector_ops.hpp"

namespace linproj {

/// Entropy-regularized projection problem
///   min_{0<=x<=u}  -c^T x + (1/theta) sum_j [r_j log r_j + (1-r_j) log(1-r_j)],  r = x/u,
///   s.t. A x = b.
struct EntropicProblem {
  LinearOperator a;
  Vector b;
  Vector u;
  Vector c;
  double theta = 1.0;

  std::size_t rows() const noexcept { return a.rows(); }
  std::size_t cols() const noexcept { return a.cols(); }

  void validate() const {
    detail::require(std::isfinite(theta) && theta > 0.0, "EntropicProblem: theta must be positive and finite");
    detail::require(b.size() == a.rows(), "EntropicProblem: b length != rows");
    detail::require(u.size() == a.cols() && c.size() == a.cols(),
                    "EntropicProblem: u/c length != cols");
    detail::require(all_finite(b) && all_finite(c) && all_finite(u), "EntropicProblem: non-finite data");
    for (double v : u) detail::require(v > 0.0, "EntropicProblem: u must be strictly positive");
  }
};

inline EntropicProblem make_entropic(const StandardProblem& sp, Vector c, double theta) {
  EntropicProblem ep{sp.a, sp.b, sp.u, std::move(c), theta};
  ep.validate();
  return ep;
}

struct SmoothnessConstants {
  double strong_convexity = 0.0;
  double lipschitz = 0.0;
};

// Largest value below 1; keeps x(y) strictly inside (0, u) when the sigmoid saturates.
inline constexpr double kSigmoidCeiling = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
inline constexpr double kSigmoidFloor = std::numeric_limits<double>::min();

inline double sigmoid(double z) {
  double s;
  if (z >= 0.0) {
    s = 1.0 / (1.0 + std::exp(-z));
  } else {
    const double e = std::exp(z);
    s = e / (1.0 + e);
  }
  return std::clamp(s, kSigmoidFloor, kSigmoidCeiling);
}

/// log(sigmoid(z)) without overflow for large |z|.
inline double log_sigmoid(double z) {
  return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

namespace detail {

inline void check_dual_point(const EntropicProblem& ep, std::span<const double> y) {
  require(y.size() == ep.rows(), "dual point length != number of constraints");
  require(all_finite(y), "dual point is not finite");
}

// s = c + A^T y, the per-variable reduced score.
inline void reduced_score(const EntropicProblem& ep, std::span<const double> y, std::span<double> s) {
  ep.a.apply_transpose(y, s);
  for (std::size_t j = 0; j < s.size(); ++j) s[j] += ep.c[j];
}

// x(y) and -g(y) from one shared A^T y product.
inline double primal_and_dual_value(const EntropicProblem& ep, std::span<const double> y,
                                    std::span<double> x, std::span<double> scratch) {
  reduced_score(ep, y, scratch);
  double sum_log = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double z = ep.theta * ep.u[j] * scratch[j];
    x[j] = ep.u[j] * sigmoid(z);
    sum_log += log_sigmoid(-z);
  }
  return -sum_log / ep.theta - dot(ep.b, y);
}

inline double dual_value(const EntropicProblem& ep, std::span<const double> y, std::span<double> scratch) {
  reduced_score(ep, y, scratch);
  double sum_log = 0.0;
  for (std::size_t j = 0; j < scratch.size(); ++j) sum_log += log_sigmoid(-ep.theta * ep.u[j] * scratch[j]);
  return -sum_log / ep.theta - dot(ep.b, y);
}

}  // namespace detail

/// x(y) = u * sigmoid(theta u (c + A^T y)); strictly inside (0, u).
inline Vector primal_from_dual(const EntropicProblem& ep, std::span<const double> y) {
  detail::check_dual_point(ep, y);
  Vector s(ep.cols());
  detail::reduced_score(ep, y, s);
  Vector x(ep.cols());
  for (std::size_t j = 0; j < x.size(); ++j) x[j] = ep.u[j] * sigmoid(ep.theta * ep.u[j] * s[j]);
  return x;
}

/// -g(y) = -(1/theta) sum log sigmoid(theta u (-c - A^T y)) - b^T y.
inline double dual_objective(const EntropicProblem& ep, std::span<const double> y) {
  detail::check_dual_point(ep, y);
  Vector scratch(ep.cols());
  return detail::dual_value(ep, y, scratch);
}

/// grad(-g)(y) = A x(y) - b.
inline Vector dual_gradient(const EntropicProblem& ep, std::span<const double> y) {
  const Vector x = primal_from_dual(ep, y);
  Vector r = matvec(ep.a, x);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= ep.b[i];
  return r;
}

inline constexpr double kEntropyClamp = 1e-15;

/// f(x) = -c^T x + (1/theta) sum [r log r + (1-r) log(1-r)], r = x/u clamped to
/// [1e-15, 1 - 1e-15] so the 0 log 0 = 0 limit is respected at the bounds.
inline double primal_objective(const EntropicProblem& ep, std::span<const double> x) {
  detail::require(x.size() == ep.cols(), "primal_objective: length != cols");
  double lin = 0.0;
  double ent = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double r_raw = x[j] / ep.u[j];
    detail::require(r_raw >= 0.0 && r_raw <= 1.0, "primal_objective: x outside [0, u]");
    const double r = std::clamp(r_raw, kEntropyClamp, 1.0 - kEntropyClamp);
    lin += ep.c[j] * x[j];
    ent += r * std::log(r) + (1.0 - r) * std::log1p(-r);
  }
  return -lin + ent / ep.theta;
}

/// theta u (c + A^T y) - logit(x/u); zero when x = x(y). Evaluated in logit
/// space to avoid cancellation near saturation.
inline Vector stationarity_residual(const EntropicProblem& ep, std::span<const double> y,
                                    std::span<const double> x) {
  detail::check_dual_point(ep, y);
  detail::require(x.size() == ep.cols(), "stationarity_residual: length != cols");
  Vector s(ep.cols());
  detail::reduced_score(ep, y, s);
  for (std::size_t j = 0; j < s.size(); ++j) {
    const double r = x[j] / ep.u[j];
    s[j] = ep.theta * ep.u[j] * s[j] - (std::log(r) - std::log1p(-r));
  }
  return s;
}

inline SmoothnessConstants smoothness_constants(const EntropicProblem& ep, double norm_estimate) {
  detail::require(norm_estimate >= 0.0, "smoothness_constants: negative norm estimate");
  const double umax = ep.u.empty() ? 0.0 : *std::max_element(ep.u.begin(), ep.u.end());
  const double u2 = umax * umax;
  return {4.0 / (ep.theta * u2), ep.theta * u2 * norm_estimate * norm_estimate / 4.0};
}

}  // namespace linproj

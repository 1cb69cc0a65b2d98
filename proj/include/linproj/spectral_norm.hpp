#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "linproj/operator.hpp"

namespace linproj {

namespace detail {

// Number of eigenvalues of the symmetric tridiagonal (diag, off) below x.
inline std::size_t sturm_count(const std::vector<double>& diag, const std::vector<double>& off, double x) {
  std::size_t count = 0;
  double d = 1.0;
  for (std::size_t i = 0; i < diag.size(); ++i) {
    const double b2 = i == 0 ? 0.0 : off[i - 1] * off[i - 1];
    d = diag[i] - x - (i == 0 ? 0.0 : b2 / d);
    if (d == 0.0) d = -1e-300;
    if (d < 0.0) ++count;
  }
  return count;
}

inline double largest_tridiagonal_eigenvalue(const std::vector<double>& diag, const std::vector<double>& off) {
  double lo = 0.0, hi = 0.0;
  for (std::size_t i = 0; i < diag.size(); ++i) {
    const double r = (i > 0 ? std::abs(off[i - 1]) : 0.0) + (i < off.size() ? std::abs(off[i]) : 0.0);
    lo = std::min(lo, diag[i] - r);
    hi = std::max(hi, diag[i] + r);
  }
  for (int it = 0; it < 200 && hi - lo > 4e-16 * std::max(std::abs(lo), std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (sturm_count(diag, off, mid) == diag.size()) hi = mid;
    else lo = mid;
  }
  return lo;
}

}  // namespace detail

/// Lanczos on A^T A from a fixed-seed Gaussian start; returns the square root
/// of the top Ritz value. Uses only matvecs with A and A^T, never exceeds
/// ||A||_2 (up to rounding) and is exact once the Krylov space is invariant.
inline double estimate_spectral_norm(const LinearOperator& op, int iters = 100, std::uint64_t seed = 0) {
  detail::require(iters >= 1, "estimate_spectral_norm: iters must be >= 1");
  if (op.rows() == 0 || op.cols() == 0) return 0.0;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::size_t n = op.cols();
  Vector q(n), q_prev(n, 0.0), w(n), av(op.rows());
  for (double& e : q) e = gauss(rng);
  const double nq = norm2(q);
  for (double& e : q) e /= nq;

  std::vector<double> alpha, beta;
  double beta_prev = 0.0;
  for (int it = 0; it < iters; ++it) {
    op.apply(q, av);
    op.apply_transpose(av, w);
    const double a = dot(q, w);
    alpha.push_back(a);
    for (std::size_t j = 0; j < n; ++j) w[j] -= a * q[j] + beta_prev * q_prev[j];
    const double b = norm2(w);
    if (it + 1 == iters || b <= 1e-13 * std::max(std::abs(a), 1e-300)) break;
    beta.push_back(b);
    q_prev.swap(q);
    for (std::size_t j = 0; j < n; ++j) q[j] = w[j] / b;
    beta_prev = b;
  }
  return std::sqrt(std::max(0.0, detail::largest_tridiagonal_eigenvalue(alpha, beta)));
}

}  // namespace linproj

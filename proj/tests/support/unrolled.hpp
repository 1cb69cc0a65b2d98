#pragma once

// Forward-mode differentiation through a literal re-implementation of the
// accelerated dual loop. Control flow (accept/reject, termination) follows
// the primal values only, so the derivative is that of the unrolled trace.

#include <cmath>
#include <vector>

#include "linproj/operator.hpp"

namespace linproj::testing {

struct Fwd {
  double v = 0.0;
  double d = 0.0;
};

inline Fwd operator+(Fwd a, Fwd b) { return {a.v + b.v, a.d + b.d}; }
inline Fwd operator-(Fwd a, Fwd b) { return {a.v - b.v, a.d - b.d}; }
inline Fwd operator-(Fwd a) { return {-a.v, -a.d}; }
inline Fwd operator*(Fwd a, Fwd b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
inline Fwd operator*(double s, Fwd a) { return {s * a.v, s * a.d}; }
inline Fwd operator/(Fwd a, Fwd b) { return {a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)}; }
inline Fwd fsqrt(Fwd a) {
  const double s = std::sqrt(a.v);
  return {s, a.d / (2 * s)};
}
inline Fwd fsigmoid(Fwd z) {
  const double s = z.v >= 0 ? 1 / (1 + std::exp(-z.v)) : std::exp(z.v) / (1 + std::exp(z.v));
  return {s, s * (1 - s) * z.d};
}
inline Fwd flog_sigmoid(Fwd z) {
  const double l = z.v >= 0 ? -std::log1p(std::exp(-z.v)) : z.v - std::log1p(std::exp(z.v));
  const double s = z.v >= 0 ? 1 / (1 + std::exp(-z.v)) : std::exp(z.v) / (1 + std::exp(z.v));
  return {l, (1 - s) * z.d};
}

struct UnrolledResult {
  std::vector<Fwd> x;
  std::size_t iterations = 0;
  double residual = 0.0;
};

/// Algorithm 1 with c carrying a tangent. Same defaults as the product solver
/// (L0 = theta, y0 = 0, delta = 10 eps (1 + |-g(lambda)|)).
inline UnrolledResult unrolled_solve(const DenseMatrix& a, const std::vector<double>& b, const std::vector<double>& u,
                                     const std::vector<Fwd>& c, double theta, double eps, std::size_t max_iter) {
  const std::size_t m = a.rows(), n = a.cols();
  using V = std::vector<Fwd>;
  auto score = [&](const V& y) {
    V s(n);
    for (std::size_t j = 0; j < n; ++j) {
      Fwd t = c[j];
      for (std::size_t i = 0; i < m; ++i) t = t + a(i, j) * y[i];
      s[j] = t;
    }
    return s;
  };
  auto primal = [&](const V& y) {
    const V s = score(y);
    V x(n);
    for (std::size_t j = 0; j < n; ++j) x[j] = u[j] * fsigmoid(theta * u[j] * s[j]);
    return x;
  };
  auto neg_dual = [&](const V& y) {
    const V s = score(y);
    Fwd v{};
    for (std::size_t j = 0; j < n; ++j) v = v - (1 / theta) * flog_sigmoid(-(theta * u[j] * s[j]));
    for (std::size_t i = 0; i < m; ++i) v = v - b[i] * y[i];
    return v;
  };
  auto resid = [&](const V& x) {
    V r(m);
    for (std::size_t i = 0; i < m; ++i) {
      Fwd t{-b[i], 0.0};
      for (std::size_t j = 0; j < n; ++j) t = t + a(i, j) * x[j];
      r[i] = t;
    }
    return r;
  };
  auto norm_v = [&](const V& r) {
    double s = 0;
    for (const auto& e : r) s += e.v * e.v;
    return std::sqrt(s);
  };

  V eta(m), zeta(m);
  V x_hat = primal(eta);
  double m_est = theta;
  Fwd beta{};
  bool flag = false;
  UnrolledResult out;
  double res = norm_v(resid(x_hat));
  while (res > eps && out.iterations < max_iter) {
    for (int trial = 0; trial < 64; ++trial) {
      const Fwd alpha = (Fwd{1, 0} + fsqrt(Fwd{1, 0} + (4 * m_est) * beta)) / Fwd{2 * m_est, 0};
      const Fwd beta_next = beta + alpha;
      const Fwd tau = alpha / beta_next;
      V lambda(m), zeta_next(m), eta_next(m);
      for (std::size_t i = 0; i < m; ++i) lambda[i] = eta[i] + tau * (zeta[i] - eta[i]);
      const V x_l = primal(lambda);
      const V g = resid(x_l);
      double g2 = 0;
      for (const auto& e : g) g2 += e.v * e.v;
      for (std::size_t i = 0; i < m; ++i) zeta_next[i] = zeta[i] - alpha * g[i];
      for (std::size_t i = 0; i < m; ++i) eta_next[i] = eta[i] + tau * (zeta_next[i] - eta[i]);
      const double d_l = neg_dual(lambda).v;
      const double d_n = neg_dual(eta_next).v;
      const double delta = 10 * 2.220446049250313e-16 * (1 + std::abs(d_l));
      if (d_n - d_l - delta <= -g2 / (2 * m_est)) {
        if (flag) m_est = std::max(m_est / 2, 1e-12 * theta);
        for (std::size_t j = 0; j < n; ++j) x_hat[j] = x_hat[j] + tau * (x_l[j] - x_hat[j]);
        flag = true;
        eta = eta_next;
        zeta = zeta_next;
        beta = beta_next;
        ++out.iterations;
        break;
      }
      m_est *= 2;
      flag = false;
    }
    res = norm_v(resid(x_hat));
  }
  out.x = x_hat;
  out.residual = res;
  return out;
}

}  // namespace linproj::testing

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "linproj/dual.hpp"
#include "linproj/errors.hpp"
#include "linproj/operator.hpp"
#include "linproj/parallel.hpp"
#include "linproj/vector_ops.hpp"

namespace linproj {

enum class SolveStatus { converged, iter_limit, stalled };

inline std::string_view to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::iter_limit: return "iter_limit";
    case SolveStatus::stalled: return "stalled";
  }
  return "unknown";
}

/// One trial step of the accelerated dual method. Rejected trials are logged
/// too; `decrease - delta <= required` is exactly the acceptance test.
struct StepRecord {
  std::size_t iteration = 0;  // accepted iterations so far
  double m_est = 0.0;         // Lipschitz estimate used by this trial
  double alpha = 0.0;
  double decrease = 0.0;      // -g(eta_next) - (-g(lambda))
  double required = 0.0;      // -||A x(lambda) - b||^2 / (2 M)
  double delta = 0.0;
  bool accepted = false;
  double residual = 0.0;      // ||A x_hat - b|| after the trial
  double dual_value = 0.0;    // -g(eta) after the trial
};

struct SolverConfig {
  /// Inverse temperature used when a caller builds problems from this config
  /// (layer, CLI). solve() itself reads theta from the problem.
  double theta = 1.0;
  double epsilon = 1e-6;                 // absolute Euclidean residual tolerance
  std::optional<double> l0;              // initial Lipschitz estimate; default theta
  Vector y0;                             // initial dual; empty means zeros
  std::optional<double> delta;           // decrease-test relaxation; default 10 eps (1 + |-g(lambda)|)
  std::size_t max_iter = 100000;
  std::size_t max_backtracks_per_iter = 60;
  std::function<void(const StepRecord&)> step_log;

  void validate() const {
    detail::require(std::isfinite(theta) && theta > 0.0, "SolverConfig: theta must be positive");
    detail::require(std::isfinite(epsilon) && epsilon > 0.0, "SolverConfig: epsilon must be positive");
    detail::require(!l0 || (std::isfinite(*l0) && *l0 > 0.0), "SolverConfig: l0 must be positive");
    detail::require(!delta || (std::isfinite(*delta) && *delta >= 0.0), "SolverConfig: delta must be non-negative");
    detail::require(max_iter >= 1, "SolverConfig: max_iter must be >= 1");
    detail::require(all_finite(y0), "SolverConfig: y0 not finite");
  }
};

struct Solution {
  Vector x;  // averaged primal iterate
  Vector y;  // final eta
  double residual = 0.0;
  std::size_t iterations = 0;
  std::size_t backtracks = 0;
  double dual_value = 0.0;
  SolveStatus status = SolveStatus::stalled;
};

/// ||A x - b||_2
inline double residual(const EntropicProblem& ep, std::span<const double> x) {
  detail::require(x.size() == ep.cols(), "residual: length != cols");
  Vector r(ep.rows());
  ep.a.apply(x, r);
  double s = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double d = r[i] - ep.b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

/// Adaptive primal-dual accelerated gradient descent on -g with the
/// two-consecutive-success halving of M and the delta-relaxed decrease test.
inline Solution solve(const EntropicProblem& ep, const SolverConfig& cfg) {
  ep.validate();
  cfg.validate();
  const std::size_t m = ep.rows();
  const std::size_t n = ep.cols();
  detail::require(cfg.y0.empty() || cfg.y0.size() == m, "solve: y0 length != number of constraints");

  constexpr double kMachineEps = std::numeric_limits<double>::epsilon();
  const double l0 = cfg.l0.value_or(ep.theta);
  // M is kept away from 0 so the step rule never divides by zero, and a
  // blow-up past l0 / eps means the decrease test can no longer be met.
  const double m_floor = 1e-12 * l0;
  const double m_cap = l0 / kMachineEps;

  Vector eta = cfg.y0.empty() ? Vector(m, 0.0) : cfg.y0;
  Vector zeta = eta;
  Vector lambda(m), zeta_next(m), eta_next(m), grad(m), ax(m);
  Vector x_hat(n), x_lambda(n), scratch(n);

  double dual_eta = detail::primal_and_dual_value(ep, eta, x_hat, scratch);

  auto residual_of = [&](std::span<const double> x) {
    ep.a.apply(x, ax);
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double d = ax[i] - ep.b[i];
      s += d * d;
    }
    return std::sqrt(s);
  };

  Solution best;
  best.x = x_hat;
  best.y = eta;
  best.residual = residual_of(x_hat);
  best.dual_value = dual_eta;

  double res = best.residual;
  double m_est = l0;
  double beta = 0.0;
  bool last_accepted = false;
  std::size_t k = 0;
  std::size_t backtracks = 0;
  SolveStatus status = SolveStatus::converged;

  auto snapshot = [&] {
    if (res <= best.residual) {
      best.x = x_hat;
      best.y = eta;
      best.residual = res;
      best.dual_value = dual_eta;
    }
  };

  while (res > cfg.epsilon) {
    if (k >= cfg.max_iter) {
      status = SolveStatus::iter_limit;
      break;
    }
    std::size_t trials = 0;
    bool stalled = false;
    for (;;) {
      const double alpha = (1.0 + std::sqrt(1.0 + 4.0 * m_est * beta)) / (2.0 * m_est);
      const double beta_next = beta + alpha;
      const double tau = alpha / beta_next;

      for (std::size_t i = 0; i < m; ++i) lambda[i] = eta[i] + tau * (zeta[i] - eta[i]);
      const double dual_lambda = detail::primal_and_dual_value(ep, lambda, x_lambda, scratch);
      ep.a.apply(x_lambda, grad);
      double grad_sq = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        grad[i] -= ep.b[i];
        grad_sq += grad[i] * grad[i];
      }
      for (std::size_t i = 0; i < m; ++i) zeta_next[i] = zeta[i] - alpha * grad[i];
      for (std::size_t i = 0; i < m; ++i) eta_next[i] = eta[i] + tau * (zeta_next[i] - eta[i]);
      const double dual_next = detail::dual_value(ep, eta_next, scratch);

      const double delta = cfg.delta.value_or(10.0 * kMachineEps * (1.0 + std::abs(dual_lambda)));
      const double decrease = dual_next - dual_lambda;
      const double required = -grad_sq / (2.0 * m_est);
      const bool accepted = decrease - delta <= required;

      StepRecord rec{k, m_est, alpha, decrease, required, delta, accepted, res, dual_eta};

      if (accepted) {
        if (last_accepted) m_est = std::max(m_est / 2.0, m_floor);
        for (std::size_t j = 0; j < n; ++j) x_hat[j] += tau * (x_lambda[j] - x_hat[j]);
        last_accepted = true;
        eta.swap(eta_next);
        zeta.swap(zeta_next);
        beta = beta_next;
        dual_eta = dual_next;
        ++k;
        res = residual_of(x_hat);
        if (cfg.step_log) {
          rec.iteration = k;
          rec.residual = res;
          rec.dual_value = dual_eta;
          cfg.step_log(rec);
        }
        break;
      }

      m_est *= 2.0;
      last_accepted = false;
      ++trials;
      ++backtracks;
      if (cfg.step_log) cfg.step_log(rec);
      if (trials > cfg.max_backtracks_per_iter || m_est > m_cap || !std::isfinite(m_est)) {
        stalled = true;
        break;
      }
    }
    if (stalled) {
      status = SolveStatus::stalled;
      break;
    }
    snapshot();
  }

  Solution out;
  if (status == SolveStatus::converged) {
    out.x = std::move(x_hat);
    out.y = std::move(eta);
    out.residual = res;
    out.dual_value = dual_eta;
  } else {
    out = std::move(best);
  }
  out.iterations = k;
  out.backtracks = backtracks;
  out.status = status;
  return out;
}

enum class BatchMode { independent, block_diagonal };

/// Solves many problems. Independent mode gives each instance its own
/// termination; block-diagonal mode stacks them into one system and stops on
/// the joint residual, so per-instance residuals may individually exceed
/// epsilon / sqrt(k) only up to the joint bound.
inline std::vector<Solution> solve_batch(const std::vector<EntropicProblem>& problems, const SolverConfig& cfg,
                                         BatchMode mode = BatchMode::independent,
                                         Execution exec = Execution::sequential) {
  detail::require(!problems.empty(), "solve_batch: empty batch");
  for (const auto& p : problems) p.validate();
  cfg.validate();

  if (mode == BatchMode::independent) {
    std::vector<Solution> out(problems.size());
    detail::parallel_for(problems.size(), exec, [&](std::size_t i) { out[i] = solve(problems[i], cfg); });
    return out;
  }

  const double theta = problems.front().theta;
  std::vector<LinearOperator> ops;
  Vector b, u, c;
  for (const auto& p : problems) {
    detail::require(p.theta == theta, "solve_batch: block-diagonal mode requires a shared theta");
    ops.push_back(p.a);
    b.insert(b.end(), p.b.begin(), p.b.end());
    u.insert(u.end(), p.u.begin(), p.u.end());
    c.insert(c.end(), p.c.begin(), p.c.end());
  }
  const EntropicProblem stacked{block_diag(std::move(ops)), std::move(b), std::move(u), std::move(c), theta};
  const Solution joint = solve(stacked, cfg);

  std::vector<Solution> out;
  std::size_t row = 0, col = 0;
  for (const auto& p : problems) {
    Solution s;
    s.x.assign(joint.x.begin() + static_cast<std::ptrdiff_t>(col),
               joint.x.begin() + static_cast<std::ptrdiff_t>(col + p.cols()));
    s.y.assign(joint.y.begin() + static_cast<std::ptrdiff_t>(row),
               joint.y.begin() + static_cast<std::ptrdiff_t>(row + p.rows()));
    s.residual = residual(p, s.x);
    s.dual_value = dual_objective(p, s.y);
    s.iterations = joint.iterations;
    s.backtracks = joint.backtracks;
    s.status = joint.status;
    out.push_back(std::move(s));
    row += p.rows();
    col += p.cols();
  }
  return out;
}

}  // namespace linproj

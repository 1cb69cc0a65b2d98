#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>

#include "linproj/backward.hpp"
#include "linproj/solver.hpp"

namespace linproj {

/// Finite-difference check of the backward pass. The scalar loss is
/// l = dl_dx . x + dl_dy . y evaluated on re-solves of perturbed problems,
/// each warm-started from the unperturbed dual. A difference quotient
/// amplifies solution error by 1/step, so each probe re-solve is followed by
/// Newton steps on h(y) = 0 that drive the residual to rounding level.
struct GradcheckOptions {
  double forward_epsilon = 1e-10;
  double step = 1e-5;
  std::size_t polish_steps = 20;
  std::size_t max_iter = 5'000'000;
  double backward_tol = 1e-12;
  /// |a - b| / max(|a|, |b|, floor); with floor 1e-3 a tolerance of 1e-4
  /// accepts 1e-4 relative or 1e-7 absolute error.
  double floor = 1e-3;
  bool check_matrix = true;
};

struct BlockError {
  double max_rel = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
  std::size_t unconverged = 0;  // probes whose re-solve hit a limit
};

struct GradcheckReport {
  BlockError c, b, u, a;
  GradientBundle analytic;
  bool converged = true;

  double max_rel() const { return std::max({c.max_rel, b.max_rel, u.max_rel, a.max_rel}); }
  bool passed(double tol) const { return converged && max_rel() <= tol; }
};

inline double gradient_rel_err(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

namespace detail {

// Rebuilds an operator with one stored entry replaced; entries are numbered
// in for_each_entry order.
inline LinearOperator with_entry(const LinearOperator& op, std::size_t k, double value) {
  if (const auto* d = op.as_dense()) {
    Vector e = d->entries();
    e[k] = value;
    return DenseMatrix(d->rows(), d->cols(), std::move(e));
  }
  const CsrMatrix c = to_csr(op);
  Vector v = c.values();
  v[k] = value;
  return CsrMatrix(c.rows(), c.cols(), c.row_offsets(), c.col_indices(), std::move(v));
}

inline Vector stored_values(const LinearOperator& op) {
  Vector v;
  op.for_each_entry([&](std::size_t, std::size_t, double x) { v.push_back(x); });
  return v;
}

/// Damped Newton on h(y) = A x(y) - b with CG for the step. Returns the
/// iterate with the smallest residual, so it never does worse than `y`.
inline Vector polish_dual(const EntropicProblem& ep, Vector y, std::size_t max_steps) {
  Vector h = dual_gradient(ep, y);
  double res = norm2(h);
  for (std::size_t it = 0; it < max_steps && res > 0.0; ++it) {
    Vector step;
    try {
      step = cg_solve(KktOperator(ep, primal_from_dual(ep, y)), h, 1e-14, 10 * ep.rows() + 10).z;
    } catch (const SingularKkt& e) {
      step = e.best_iterate();
    } catch (const ContractViolation&) {
      break;  // saturated coordinates: no usable Jacobian
    }
    bool improved = false;
    for (double t = 1.0; t >= 1.0 / 64; t /= 2) {
      Vector trial = y;
      axpy(-t, step, trial);
      Vector h_trial = dual_gradient(ep, trial);
      const double r = norm2(h_trial);
      if (r < res) {
        y = std::move(trial);
        h = std::move(h_trial);
        res = r;
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }
  return y;
}

}  // namespace detail

inline GradcheckReport gradcheck(const EntropicProblem& ep, const AdjointSeed& seed,
                                 const GradcheckOptions& opts = {}) {
  ep.validate();
  SolverConfig cfg;
  cfg.epsilon = opts.forward_epsilon;
  cfg.max_iter = opts.max_iter;

  GradcheckReport report;
  const Solution base = solve(ep, cfg);
  if (base.status != SolveStatus::converged) {
    report.converged = false;
    return report;
  }
  report.analytic = backward(ep, base, seed, opts.backward_tol);

  SolverConfig warm = cfg;
  warm.y0 = base.y;
  auto loss = [&](const EntropicProblem& p) -> std::optional<double> {
    const Solution s = solve(p, warm);
    if (s.status != SolveStatus::converged) return std::nullopt;
    const Vector y = detail::polish_dual(p, s.y, opts.polish_steps);
    double l = dot(seed.dl_dx, primal_from_dual(p, y));
    if (!seed.dl_dy.empty()) l += dot(seed.dl_dy, y);
    return l;
  };

  const double h = opts.step;
  auto probe = [&](BlockError& block, std::size_t index, double analytic,
                   const std::function<EntropicProblem(double)>& perturbed) {
    const auto plus = loss(perturbed(h));
    const auto minus = loss(perturbed(-h));
    if (!plus || !minus) {
      report.converged = false;
      ++block.unconverged;
      return;
    }
    const double numeric = (*plus - *minus) / (2.0 * h);
    const double err = gradient_rel_err(analytic, numeric, opts.floor);
    if (block.checked++ == 0 || err > block.max_rel) {
      block.max_rel = err;
      block.worst_index = index;
      block.analytic = analytic;
      block.numeric = numeric;
    }
  };

  for (std::size_t j = 0; j < ep.cols(); ++j) {
    probe(report.c, j, report.analytic.dl_dc[j], [&](double d) {
      EntropicProblem p = ep;
      p.c[j] += d;
      return p;
    });
  }
  for (std::size_t i = 0; i < ep.rows(); ++i) {
    probe(report.b, i, report.analytic.dl_db[i], [&](double d) {
      EntropicProblem p = ep;
      p.b[i] += d;
      return p;
    });
  }
  for (std::size_t j = 0; j < ep.cols(); ++j) {
    probe(report.u, j, report.analytic.dl_du[j], [&](double d) {
      EntropicProblem p = ep;
      p.u[j] += d;
      return p;
    });
  }
  if (opts.check_matrix) {
    const Vector values = detail::stored_values(ep.a);
    Vector grads;
    std::visit([&](const auto& g) { grads = detail::stored_values(g); }, report.analytic.dl_dA);
    if (ep.a.realization() == Realization::dense) grads.resize(values.size());
    for (std::size_t k = 0; k < values.size(); ++k) {
      probe(report.a, k, grads[k], [&](double d) {
        EntropicProblem p = ep;
        p.a = detail::with_entry(ep.a, k, values[k] + d);
        return p;
      });
    }
  }
  return report;
}

}  // namespace linproj

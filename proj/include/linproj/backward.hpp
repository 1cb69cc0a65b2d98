#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "linproj/dual.hpp"
#include "linproj/errors.hpp"
#include "linproj/operator.hpp"
#include "linproj/solver.hpp"
#include "linproj/vector_ops.hpp"

namespace linproj {

/// Upstream gradients of the loss with respect to the layer outputs.
struct AdjointSeed {
  Vector dl_dx;
  Vector dl_dy;  // empty means zero
};

/// Gradients with respect to the problem data. dl_dA is dense when A is dense
/// and carries A's stored pattern otherwise.
struct GradientBundle {
  std::variant<DenseMatrix, CsrMatrix> dl_dA;
  Vector dl_db;
  Vector dl_dc;
  Vector dl_du;
};

/// h(y) = A x(y) - b, the optimality condition the backward pass differentiates.
inline Vector kkt_residual_h(const EntropicProblem& ep, std::span<const double> y) {
  return dual_gradient(ep, y);
}

/// v -> A diag(w) A^T v + shift v with w = theta x (u - x). Symmetric PSD.
class KktOperator {
 public:
  KktOperator(const EntropicProblem& ep, std::span<const double> x) : a_(ep.a), w_(ep.cols()) {
    detail::require(x.size() == ep.cols(), "KktOperator: x length != cols");
    for (std::size_t j = 0; j < w_.size(); ++j) {
      w_[j] = ep.theta * x[j] * (ep.u[j] - x[j]);
      detail::require(w_[j] > 0.0, "KktOperator: x must be strictly inside (0, u)");
    }
    tmp_.resize(w_.size());
  }

  std::size_t size() const noexcept { return a_.rows(); }
  const Vector& weights() const noexcept { return w_; }
  double shift() const noexcept { return shift_; }

  KktOperator with_shift(double mu) const {
    KktOperator k = *this;
    k.shift_ = mu;
    return k;
  }

  /// trace(A diag(w) A^T) = sum_j w_j ||A e_j||^2
  double trace() const {
    double t = 0.0;
    a_.for_each_entry([&](std::size_t, std::size_t j, double v) { t += w_[j] * v * v; });
    return t;
  }

  void apply(std::span<const double> v, std::span<double> out) const {
    a_.apply_transpose(v, tmp_);
    for (std::size_t j = 0; j < tmp_.size(); ++j) tmp_[j] *= w_[j];
    a_.apply(tmp_, out);
    if (shift_ != 0.0)
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += shift_ * v[i];
  }

  Vector operator()(std::span<const double> v) const {
    detail::require(v.size() == size(), "KktOperator: vector length mismatch");
    Vector out(size());
    apply(v, out);
    return out;
  }

 private:
  LinearOperator a_;
  Vector w_;
  double shift_ = 0.0;
  mutable Vector tmp_;
};

struct CgResult {
  Vector z;
  std::size_t iterations = 0;
  double residual = 0.0;     // ||op(z) - rhs||, recomputed at exit
  bool regularized = false;  // Tikhonov retry was needed
};

namespace detail {

struct CgAttempt {
  Vector z;
  std::size_t iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

inline double true_residual(const KktOperator& op, std::span<const double> z, std::span<const double> rhs,
                            std::span<double> work) {
  op.apply(z, work);
  double s = 0.0;
  for (std::size_t i = 0; i < rhs.size(); ++i) s += (work[i] - rhs[i]) * (work[i] - rhs[i]);
  return std::sqrt(s);
}

inline CgAttempt run_cg(const KktOperator& op, std::span<const double> rhs, double target,
                        std::size_t max_iter) {
  constexpr std::size_t kStagnationWindow = 10;
  const std::size_t m = rhs.size();
  CgAttempt out;
  out.z.assign(m, 0.0);
  Vector r(rhs.begin(), rhs.end());
  Vector p = r, q(m);
  Vector best_z = out.z;
  double rr = dot(r, r);
  double best_res = std::sqrt(rr);
  std::size_t since_improvement = 0;

  while (out.iterations < max_iter) {
    if (std::sqrt(rr) <= target) {
      // Recurrence residual can drift from the true one; confirm before stopping.
      const double actual = true_residual(op, out.z, rhs, q);
      if (actual <= target) break;
      for (std::size_t i = 0; i < m; ++i) r[i] = rhs[i] - q[i];
      p = r;
      rr = dot(r, r);
    }
    op.apply(p, q);
    const double pq = dot(p, q);
    if (!(pq > 0.0)) break;  // direction in the null space
    const double step = rr / pq;
    axpy(step, p, out.z);
    axpy(-step, q, r);
    const double rr_next = dot(r, r);
    for (std::size_t i = 0; i < m; ++i) p[i] = r[i] + (rr_next / rr) * p[i];
    rr = rr_next;
    ++out.iterations;

    const double res = std::sqrt(rr);
    if (res < best_res) {
      best_res = res;
      best_z = out.z;
      since_improvement = 0;
    } else if (++since_improvement >= kStagnationWindow) {
      break;
    }
  }
  const double final_res = true_residual(op, out.z, rhs, q);
  const double best_true = true_residual(op, best_z, rhs, q);
  if (best_true < final_res) {
    out.z = std::move(best_z);
    out.residual = best_true;
  } else {
    out.residual = final_res;
  }
  out.converged = out.residual <= target;
  return out;
}

}  // namespace detail

/// Conjugate gradients on the KKT operator using only matvecs. On failure,
/// retries once with a Tikhonov shift of 1e-12 * trace / m.
inline CgResult cg_solve(const KktOperator& op, std::span<const double> rhs, double tol,
                         std::optional<std::size_t> max_iter = std::nullopt) {
  detail::require(rhs.size() == op.size(), "cg_solve: rhs length != operator size");
  detail::require(all_finite(rhs), "cg_solve: rhs not finite");
  detail::require(tol > 0.0, "cg_solve: tol must be positive");
  const std::size_t m = rhs.size();
  const std::size_t cap = max_iter.value_or(std::max<std::size_t>(2 * m, 1));
  const double target = tol * std::max(1.0, norm2(rhs));

  if (norm2(rhs) == 0.0) return {Vector(m, 0.0), 0, 0.0, false};

  detail::CgAttempt first = detail::run_cg(op, rhs, target, cap);
  if (first.converged) return {std::move(first.z), first.iterations, first.residual, false};

  const double mu = 1e-12 * op.trace() / static_cast<double>(m);
  const KktOperator shifted = op.with_shift(mu);
  detail::CgAttempt second = detail::run_cg(shifted, rhs, target, cap);
  // The shifted system is always solvable; accept it only if it also solves the original one.
  Vector work(m);
  second.residual = detail::true_residual(op, second.z, rhs, work);
  if (second.residual <= target)
    return {std::move(second.z), first.iterations + second.iterations, second.residual, true};

  auto& best = second.residual < first.residual ? second : first;
  throw SingularKkt("cg_solve: KKT system did not converge (residual " + std::to_string(best.residual) +
                        ", target " + std::to_string(target) + ")",
                    std::move(best.z), best.residual);
}

inline constexpr double kDefaultBackwardTol = 1e-10;

/// Implicit-differentiation backward pass through the optimality condition
/// h(y) = 0. Only matvecs with A and A^T plus one CG solve are needed.
inline GradientBundle backward(const EntropicProblem& ep, const Solution& sol, const AdjointSeed& seed,
                               double tol = kDefaultBackwardTol,
                               std::optional<std::size_t> cg_max_iter = std::nullopt) {
  ep.validate();
  const std::size_t m = ep.rows();
  const std::size_t n = ep.cols();
  detail::require(sol.status == SolveStatus::converged, "backward: solution did not converge");
  detail::require(sol.x.size() == n && sol.y.size() == m, "backward: solution shape mismatch");
  detail::require(seed.dl_dx.size() == n, "backward: dl_dx length != cols");
  detail::require(seed.dl_dy.empty() || seed.dl_dy.size() == m, "backward: dl_dy length != rows");
  detail::require(all_finite(seed.dl_dx) && all_finite(seed.dl_dy), "backward: seed not finite");

  const KktOperator kkt(ep, sol.x);
  const Vector& w = kkt.weights();

  Vector v1(n);
  for (std::size_t j = 0; j < n; ++j) v1[j] = seed.dl_dx[j] * w[j];
  Vector q = matvec(ep.a, v1);
  if (!seed.dl_dy.empty())
    for (std::size_t i = 0; i < m; ++i) q[i] += seed.dl_dy[i];

  Vector p = m == 0 ? Vector{} : cg_solve(kkt, q, tol, cg_max_iter).z;
  const Vector r = rmatvec(ep.a, p);

  // g = dl/dx - A^T dl/dh, shared by every block of the bundle.
  Vector g(n);
  for (std::size_t j = 0; j < n; ++j) g[j] = seed.dl_dx[j] - r[j];

  GradientBundle out;
  out.dl_dc.resize(n);
  for (std::size_t j = 0; j < n; ++j) out.dl_dc[j] = g[j] * w[j];

  // dx/du = (x - w * (-c - A^T y)) / u
  const Vector aty = rmatvec(ep.a, sol.y);
  out.dl_du.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double s = -ep.c[j] - aty[j];
    out.dl_du[j] = g[j] * (sol.x[j] - w[j] * s) / ep.u[j];
  }

  out.dl_db = p;

  auto entry = [&](std::size_t i, std::size_t j) { return sol.y[i] * out.dl_dc[j] - p[i] * sol.x[j]; };
  if (ep.a.realization() == Realization::dense) {
    Vector e(m * n);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) e[i * n + j] = entry(i, j);
    out.dl_dA = DenseMatrix(m, n, std::move(e));
  } else {
    const CsrMatrix pattern = to_csr(ep.a);
    Vector vals(pattern.nnz());
    pattern.for_each_entry([&, k = std::size_t{0}](std::size_t i, std::size_t j, double) mutable {
      vals[k++] = entry(i, j);
    });
    out.dl_dA = CsrMatrix(m, n, pattern.row_offsets(), pattern.col_indices(), std::move(vals));
  }
  return out;
}

}  // namespace linproj

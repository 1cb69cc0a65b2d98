#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "linproj/errors.hpp"
#include "linproj/operator.hpp"

namespace linproj {

/// User-facing constraints:  a1 x <= b1,  a2 x >= b2,  a3 x = b3,  lower <= x <= upper.
struct GeneralConstraints {
  LinearOperator a1, a2, a3;
  Vector b1, b2, b3;
  Vector lower, upper;

  std::size_t num_vars() const noexcept { return lower.size(); }

  /// Box-only constraint set over `lower.size()` variables.
  static GeneralConstraints box(Vector lower, Vector upper) {
    const std::size_t n = lower.size();
    GeneralConstraints gc;
    gc.a1 = DenseMatrix::zeros(0, n);
    gc.a2 = DenseMatrix::zeros(0, n);
    gc.a3 = DenseMatrix::zeros(0, n);
    gc.lower = std::move(lower);
    gc.upper = std::move(upper);
    return gc;
  }

  void validate() const {
    const std::size_t n = num_vars();
    detail::require(upper.size() == n, "GeneralConstraints: lower/upper length mismatch");
    detail::require(a1.cols() == n && a2.cols() == n && a3.cols() == n,
                    "GeneralConstraints: operator column count != number of variables");
    detail::require(b1.size() == a1.rows(), "GeneralConstraints: b1 length != a1 rows");
    detail::require(b2.size() == a2.rows(), "GeneralConstraints: b2 length != a2 rows");
    detail::require(b3.size() == a3.rows(), "GeneralConstraints: b3 length != a3 rows");
    detail::require(all_finite(lower) && all_finite(upper), "GeneralConstraints: non-finite bound");
    detail::require(all_finite(b1) && all_finite(b2) && all_finite(b3),
                    "GeneralConstraints: non-finite right-hand side");
    for (std::size_t j = 0; j < n; ++j)
      detail::require(lower[j] <= upper[j], "GeneralConstraints: lower > upper");
  }
};

/// Maps standard-form points back to the original variables.
struct Embedding {
  std::size_t n_original = 0;
  Vector shift;                               // = lower
  std::vector<std::size_t> kept_indices;      // original index of each leading standard column
  std::map<std::size_t, double> fixed_values; // eliminated zero-width variables
  std::size_t rows_le = 0, rows_ge = 0, rows_eq = 0;
  /// For each kept slack column (in order), the stacked row it belongs to.
  std::vector<std::size_t> slack_rows;

  std::size_t num_kept() const noexcept { return kept_indices.size(); }
  std::size_t num_standard() const noexcept { return kept_indices.size() + slack_rows.size(); }
};

/// A x = b,  0 <= x <= u  with u > 0.
struct StandardProblem {
  LinearOperator a;
  Vector b;
  Vector u;
  Embedding embedding;

  std::size_t rows() const noexcept { return a.rows(); }
  std::size_t cols() const noexcept { return a.cols(); }
};

struct CanonicalForm {
  StandardProblem problem;
  Vector c;
};

inline constexpr double kDefaultFeasibilityTol = 1e-9;

/// Standard-form cost: c' restricted to kept variables, zero on slacks.
inline Vector lift_cost(const Embedding& emb, std::span<const double> c_prime) {
  detail::require(c_prime.size() == emb.n_original, "lift_cost: length != number of original variables");
  Vector c(emb.num_standard(), 0.0);
  for (std::size_t k = 0; k < emb.kept_indices.size(); ++k) c[k] = c_prime[emb.kept_indices[k]];
  return c;
}

/// Inverse of lift_cost for gradients: kept coordinates pass through, fixed ones get 0.
inline Vector restrict_gradient(const Embedding& emb, std::span<const double> g_std) {
  detail::require(g_std.size() == emb.num_standard(), "restrict_gradient: length mismatch");
  Vector g(emb.n_original, 0.0);
  for (std::size_t k = 0; k < emb.kept_indices.size(); ++k) g[emb.kept_indices[k]] = g_std[k];
  return g;
}

inline CanonicalForm canonicalize(const GeneralConstraints& gc, std::span<const double> c_prime,
                                  double feasibility_tol = kDefaultFeasibilityTol) {
  gc.validate();
  const std::size_t n = gc.num_vars();
  detail::require(c_prime.size() == n, "canonicalize: cost length != number of variables");
  detail::require(all_finite(c_prime), "canonicalize: non-finite cost");
  detail::require(feasibility_tol >= 0.0, "canonicalize: negative feasibility tolerance");

  Embedding emb;
  emb.n_original = n;
  emb.shift = gc.lower;
  emb.rows_le = gc.a1.rows();
  emb.rows_ge = gc.a2.rows();
  emb.rows_eq = gc.a3.rows();

  constexpr std::size_t kDropped = static_cast<std::size_t>(-1);
  std::vector<std::size_t> position(n, kDropped);
  for (std::size_t j = 0; j < n; ++j) {
    if (gc.lower[j] == gc.upper[j]) {
      emb.fixed_values.emplace(j, gc.lower[j]);
    } else {
      position[j] = emb.kept_indices.size();
      emb.kept_indices.push_back(j);
    }
  }

  const std::size_t m = emb.rows_le + emb.rows_ge + emb.rows_eq;
  const std::size_t row_ge0 = emb.rows_le;
  const std::size_t row_eq0 = emb.rows_le + emb.rows_ge;

  // b - A l for every block; shifting x' by l moves all rows, equality rows included.
  Vector b(m);
  {
    const Vector l1 = matvec(gc.a1, gc.lower);
    const Vector l2 = matvec(gc.a2, gc.lower);
    const Vector l3 = matvec(gc.a3, gc.lower);
    for (std::size_t i = 0; i < emb.rows_le; ++i) b[i] = gc.b1[i] - l1[i];
    for (std::size_t i = 0; i < emb.rows_ge; ++i) b[row_ge0 + i] = gc.b2[i] - l2[i];
    for (std::size_t i = 0; i < emb.rows_eq; ++i) b[row_eq0 + i] = gc.b3[i] - l3[i];
  }

  // Slack capacities from the positive/negative parts of each inequality row.
  Vector cap1 = gc.b1;
  gc.a1.for_each_entry([&](std::size_t i, std::size_t j, double v) {
    cap1[i] -= v > 0.0 ? v * gc.lower[j] : v * gc.upper[j];
  });
  Vector cap2(emb.rows_ge);
  for (std::size_t i = 0; i < emb.rows_ge; ++i) cap2[i] = -gc.b2[i];
  gc.a2.for_each_entry([&](std::size_t i, std::size_t j, double v) {
    cap2[i] += v > 0.0 ? v * gc.upper[j] : v * gc.lower[j];
  });

  Vector slack_caps;
  std::vector<double> slack_signs;
  auto add_slack = [&](std::size_t row, double cap, double sign) {
    if (cap < -feasibility_tol)
      throw CertifiedInfeasible("canonicalize: inequality row " + std::to_string(row) +
                                    " has negative slack capacity " + std::to_string(cap),
                                row, cap);
    if (cap <= feasibility_tol) return;  // binding row, becomes an equality
    emb.slack_rows.push_back(row);
    slack_caps.push_back(cap);
    slack_signs.push_back(sign);
  };
  for (std::size_t i = 0; i < emb.rows_le; ++i) add_slack(i, cap1[i], 1.0);
  for (std::size_t i = 0; i < emb.rows_ge; ++i) add_slack(row_ge0 + i, cap2[i], -1.0);

  const std::size_t n_kept = emb.kept_indices.size();
  const std::size_t n_std = n_kept + emb.slack_rows.size();

  Vector u(n_std);
  for (std::size_t k = 0; k < n_kept; ++k) {
    const std::size_t j = emb.kept_indices[k];
    u[k] = gc.upper[j] - gc.lower[j];
  }
  for (std::size_t s = 0; s < slack_caps.size(); ++s) u[n_kept + s] = slack_caps[s];

  const bool all_dense = gc.a1.realization() == Realization::dense &&
                         gc.a2.realization() == Realization::dense &&
                         gc.a3.realization() == Realization::dense;

  LinearOperator a;
  if (all_dense) {
    Vector e(m * n_std, 0.0);
    auto put = [&](std::size_t row0) {
      return [&, row0](std::size_t i, std::size_t j, double v) {
        if (position[j] != kDropped) e[(row0 + i) * n_std + position[j]] = v;
      };
    };
    gc.a1.for_each_entry(put(0));
    gc.a2.for_each_entry(put(row_ge0));
    gc.a3.for_each_entry(put(row_eq0));
    for (std::size_t s = 0; s < emb.slack_rows.size(); ++s)
      e[emb.slack_rows[s] * n_std + n_kept + s] = slack_signs[s];
    a = DenseMatrix(m, n_std, std::move(e));
  } else {
    std::vector<std::tuple<std::size_t, std::size_t, double>> t;
    auto put = [&](std::size_t row0) {
      return [&, row0](std::size_t i, std::size_t j, double v) {
        if (position[j] != kDropped) t.emplace_back(row0 + i, position[j], v);
      };
    };
    gc.a1.for_each_entry(put(0));
    gc.a2.for_each_entry(put(row_ge0));
    gc.a3.for_each_entry(put(row_eq0));
    for (std::size_t s = 0; s < emb.slack_rows.size(); ++s)
      t.emplace_back(emb.slack_rows[s], n_kept + s, slack_signs[s]);
    a = CsrMatrix::from_triplets(m, n_std, std::move(t));
  }

  CanonicalForm out;
  out.c = lift_cost(emb, c_prime);
  out.problem = StandardProblem{std::move(a), std::move(b), std::move(u), std::move(emb)};
  return out;
}

/// Original-space point from a standard-form point; slack coordinates are dropped.
inline Vector recover(std::span<const double> x_std, const Embedding& emb) {
  detail::require(x_std.size() == emb.num_standard(), "recover: length != standard problem size");
  Vector x(emb.n_original);
  for (std::size_t k = 0; k < emb.kept_indices.size(); ++k) {
    const std::size_t j = emb.kept_indices[k];
    x[j] = x_std[k] + emb.shift[j];
  }
  for (const auto& [j, v] : emb.fixed_values) x[j] = v;
  return x;
}

/// Standard-form image of an original point: shifted variables plus the
/// slack values that close each kept inequality row.
inline Vector embed_point(const GeneralConstraints& gc, const Embedding& emb,
                          std::span<const double> x_prime) {
  detail::require(x_prime.size() == emb.n_original, "embed_point: length mismatch");
  Vector x(emb.num_standard());
  for (std::size_t k = 0; k < emb.kept_indices.size(); ++k) {
    const std::size_t j = emb.kept_indices[k];
    x[k] = x_prime[j] - emb.shift[j];
  }
  const Vector r1 = matvec(gc.a1, x_prime);
  const Vector r2 = matvec(gc.a2, x_prime);
  for (std::size_t s = 0; s < emb.slack_rows.size(); ++s) {
    const std::size_t row = emb.slack_rows[s];
    const std::size_t out = emb.kept_indices.size() + s;
    if (row < emb.rows_le)
      x[out] = gc.b1[row] - r1[row];
    else
      x[out] = r2[row - emb.rows_le] - gc.b2[row - emb.rows_le];
  }
  return x;
}

/// Largest violation of any original constraint (rows and box) at x'.
inline double constraint_violation(const GeneralConstraints& gc, std::span<const double> x_prime) {
  detail::require(x_prime.size() == gc.num_vars(), "constraint_violation: length mismatch");
  double worst = 0.0;
  const Vector r1 = matvec(gc.a1, x_prime);
  const Vector r2 = matvec(gc.a2, x_prime);
  const Vector r3 = matvec(gc.a3, x_prime);
  for (std::size_t i = 0; i < r1.size(); ++i) worst = std::max(worst, r1[i] - gc.b1[i]);
  for (std::size_t i = 0; i < r2.size(); ++i) worst = std::max(worst, gc.b2[i] - r2[i]);
  for (std::size_t i = 0; i < r3.size(); ++i) worst = std::max(worst, std::abs(r3[i] - gc.b3[i]));
  for (std::size_t j = 0; j < x_prime.size(); ++j) {
    worst = std::max(worst, gc.lower[j] - x_prime[j]);
    worst = std::max(worst, x_prime[j] - gc.upper[j]);
  }
  return worst;
}

/// 1 + the largest Euclidean row norm over a1, a2, a3: the factor that turns a
/// standard-form residual bound into an original-side violation bound.
inline double feasibility_scale(const GeneralConstraints& gc) {
  double worst = 0.0;
  for (const LinearOperator* op : {&gc.a1, &gc.a2, &gc.a3}) {
    Vector sq(op->rows(), 0.0);
    op->for_each_entry([&](std::size_t i, std::size_t, double v) { sq[i] += v * v; });
    for (double s : sq) worst = std::max(worst, std::sqrt(s));
  }
  return 1.0 + worst;
}

}  // namespace linproj

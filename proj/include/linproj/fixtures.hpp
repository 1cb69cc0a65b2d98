#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "linproj/canonicalize.hpp"
#include "linproj/errors.hpp"
#include "linproj/operator.hpp"

// Constraint families used as test corpora and benchmarks. All indices are
// zero-based. Only constraint structure is generated, never cost models.

namespace linproj::fixtures {

using Triplets = std::vector<std::tuple<std::size_t, std::size_t, double>>;

inline LinearOperator make_operator(std::size_t rows, std::size_t cols, Triplets t, Realization repr) {
  CsrMatrix csr = CsrMatrix::from_triplets(rows, cols, std::move(t));
  if (repr == Realization::dense) return densify(LinearOperator(std::move(csr)));
  return csr;
}

namespace detail {

inline GeneralConstraints with_rows(std::size_t n, Triplets le, Vector b1, Triplets ge, Vector b2, Triplets eq,
                                    Vector b3, Vector lower, Vector upper, Realization repr) {
  GeneralConstraints gc;
  gc.a1 = make_operator(b1.size(), n, std::move(le), repr);
  gc.a2 = make_operator(b2.size(), n, std::move(ge), repr);
  gc.a3 = make_operator(b3.size(), n, std::move(eq), repr);
  gc.b1 = std::move(b1);
  gc.b2 = std::move(b2);
  gc.b3 = std::move(b3);
  gc.lower = std::move(lower);
  gc.upper = std::move(upper);
  gc.validate();
  return gc;
}

// Doubly-stochastic rows over an n x n assignment X (row-major, X[i][j] = city i at step j)
// plus the two fixed cells.
inline void tsp_rows(std::size_t n, std::size_t s, std::size_t e, Triplets& eq, Vector& b) {
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) eq.emplace_back(b.size(), i * n + j, 1.0);
    b.push_back(1.0);
  }
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) eq.emplace_back(b.size(), i * n + j, 1.0);
    b.push_back(1.0);
  }
  eq.emplace_back(b.size(), s * n + 0, 1.0);
  b.push_back(1.0);
  eq.emplace_back(b.size(), e * n + (n - 1), 1.0);
  b.push_back(1.0);
}

}  // namespace detail

/// n x n assignment with start city s at step 0 and end city e at step n-1.
inline GeneralConstraints gen_tsp_start_end(std::size_t n, std::size_t s, std::size_t e,
                                            Realization repr = Realization::csr) {
  ::linproj::detail::require(n >= 2, "gen_tsp_start_end: n must be >= 2");
  ::linproj::detail::require(s < n && e < n, "gen_tsp_start_end: city index out of range");
  ::linproj::detail::require(s != e, "gen_tsp_start_end: start and end cities must differ");
  Triplets eq;
  Vector b3;
  detail::tsp_rows(n, s, e, eq, b3);
  return detail::with_rows(n * n, {}, {}, {}, {}, std::move(eq), std::move(b3), Vector(n * n, 0.0),
                           Vector(n * n, 1.0), repr);
}

/// Start/end constraints plus: city p is visited within the first m_steps + 1 positions.
inline GeneralConstraints gen_tsp_priority(std::size_t n, std::size_t s, std::size_t e, std::size_t p,
                                           std::size_t m_steps, Realization repr = Realization::csr) {
  ::linproj::detail::require(n >= 2, "gen_tsp_priority: n must be >= 2");
  ::linproj::detail::require(s < n && e < n && p < n, "gen_tsp_priority: city index out of range");
  ::linproj::detail::require(s != e, "gen_tsp_priority: start and end cities must differ");
  ::linproj::detail::require(p != s && p != e, "gen_tsp_priority: priority city must differ from start and end");
  ::linproj::detail::require(m_steps >= 1 && m_steps < n, "gen_tsp_priority: m_steps must be in [1, n)");
  Triplets eq;
  Vector b3;
  detail::tsp_rows(n, s, e, eq, b3);
  for (std::size_t j = 0; j <= m_steps; ++j) eq.emplace_back(b3.size(), p * n + j, 1.0);
  b3.push_back(1.0);
  return detail::with_rows(n * n, {}, {}, {}, {}, std::move(eq), std::move(b3), Vector(n * n, 0.0),
                           Vector(n * n, 1.0), repr);
}

/// Partial matching between m and n nodes with exactly p matched pairs:
/// column sums <= 1, row sums <= 1, total = p.
inline GeneralConstraints gen_partial_matching(std::size_t m, std::size_t n, std::size_t p,
                                               Realization repr = Realization::csr) {
  ::linproj::detail::require(m >= 1 && n >= 1, "gen_partial_matching: empty graph");
  ::linproj::detail::require(p >= 1 && p <= std::min(m, n), "gen_partial_matching: p must be in [1, min(m, n)]");
  const std::size_t vars = m * n;
  Triplets le, eq;
  Vector b1;
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < m; ++i) le.emplace_back(b1.size(), i * n + j, 1.0);
    b1.push_back(1.0);
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) le.emplace_back(b1.size(), i * n + j, 1.0);
    b1.push_back(1.0);
  }
  for (std::size_t k = 0; k < vars; ++k) eq.emplace_back(0, k, 1.0);
  return detail::with_rows(vars, std::move(le), std::move(b1), {}, {}, std::move(eq),
                           Vector{static_cast<double>(p)}, Vector(vars, 0.0), Vector(vars, 1.0), repr);
}

/// Weights sum to one and the preferred set holds at least q. A q above |S|
/// is accepted here and rejected by canonicalization as infeasible.
inline GeneralConstraints gen_portfolio(std::size_t n, const std::vector<std::size_t>& preferred, double q,
                                        Realization repr = Realization::csr) {
  ::linproj::detail::require(n >= 1, "gen_portfolio: n must be >= 1");
  ::linproj::detail::require(q > 0.0, "gen_portfolio: q must be positive");
  const std::set<std::size_t> uniq(preferred.begin(), preferred.end());
  ::linproj::detail::require(!uniq.empty() && uniq.size() == preferred.size(),
                             "gen_portfolio: preferred set must be non-empty without duplicates");
  ::linproj::detail::require(*uniq.rbegin() < n, "gen_portfolio: preferred index out of range");
  Triplets ge, eq;
  for (std::size_t j = 0; j < n; ++j) eq.emplace_back(0, j, 1.0);
  for (std::size_t j : uniq) ge.emplace_back(0, j, 1.0);
  return detail::with_rows(n, {}, {}, std::move(ge), Vector{q}, std::move(eq), Vector{1.0}, Vector(n, 0.0),
                           Vector(n, 1.0), repr);
}

/// Unit-commitment logical and minimum up/down-time rows over (u, v, w) per
/// generator and period. Variable layout per generator g:
///   u at 3Tg + t, v at 3Tg + T + t, w at 3Tg + 2T + t.
inline GeneralConstraints gen_uc_min_updown(std::size_t g_count, std::size_t t_count,
                                            const std::vector<std::size_t>& ut, const std::vector<std::size_t>& dt,
                                            const std::vector<int>& u0, Realization repr = Realization::csr) {
  ::linproj::detail::require(g_count >= 1 && t_count >= 1, "gen_uc_min_updown: empty horizon");
  ::linproj::detail::require(ut.size() == g_count && dt.size() == g_count && u0.size() == g_count,
                             "gen_uc_min_updown: per-generator arrays must have g_count entries");
  const std::size_t T = t_count;
  Triplets le, eq;
  Vector b1, b3;
  for (std::size_t g = 0; g < g_count; ++g) {
    ::linproj::detail::require(ut[g] >= 1 && ut[g] <= T, "gen_uc_min_updown: up-time out of [1, T]");
    ::linproj::detail::require(dt[g] >= 1 && dt[g] <= T, "gen_uc_min_updown: down-time out of [1, T]");
    ::linproj::detail::require(u0[g] == 0 || u0[g] == 1, "gen_uc_min_updown: u0 must be binary");
    const std::size_t base = 3 * T * g;
    auto u = [&](std::size_t t) { return base + t; };
    auto v = [&](std::size_t t) { return base + T + t; };
    auto w = [&](std::size_t t) { return base + 2 * T + t; };

    // u(t) - u(t-1) - v(t) + w(t) = 0, with u(-1) = u0 folded into the rhs.
    for (std::size_t t = 0; t < T; ++t) {
      const std::size_t row = b3.size();
      eq.emplace_back(row, u(t), 1.0);
      if (t > 0) eq.emplace_back(row, u(t - 1), -1.0);
      eq.emplace_back(row, v(t), -1.0);
      eq.emplace_back(row, w(t), 1.0);
      b3.push_back(t == 0 ? static_cast<double>(u0[g]) : 0.0);
    }
    // sum_{i=t-UT+1}^{t} v(i) - u(t) <= 0
    for (std::size_t t = ut[g] - 1; t < T; ++t) {
      const std::size_t row = b1.size();
      for (std::size_t i = t + 1 - ut[g]; i <= t; ++i) le.emplace_back(row, v(i), 1.0);
      le.emplace_back(row, u(t), -1.0);
      b1.push_back(0.0);
    }
    // sum_{i=t-DT+1}^{t} w(i) + u(t) <= 1
    for (std::size_t t = dt[g] - 1; t < T; ++t) {
      const std::size_t row = b1.size();
      for (std::size_t i = t + 1 - dt[g]; i <= t; ++i) le.emplace_back(row, w(i), 1.0);
      le.emplace_back(row, u(t), 1.0);
      b1.push_back(1.0);
    }
  }
  const std::size_t vars = 3 * T * g_count;
  return detail::with_rows(vars, std::move(le), std::move(b1), {}, {}, std::move(eq), std::move(b3),
                           Vector(vars, 0.0), Vector(vars, 1.0), repr);
}

enum class Family { tsp_start_end, tsp_priority, partial_matching, portfolio, uc_min_updown };

inline std::string_view to_string(Family f) {
  switch (f) {
    case Family::tsp_start_end: return "tsp_start_end";
    case Family::tsp_priority: return "tsp_priority";
    case Family::partial_matching: return "partial_matching";
    case Family::portfolio: return "portfolio";
    case Family::uc_min_updown: return "uc_min_updown";
  }
  return "unknown";
}

inline std::optional<Family> parse_family(std::string_view name) {
  for (Family f : {Family::tsp_start_end, Family::tsp_priority, Family::partial_matching, Family::portfolio,
                   Family::uc_min_updown})
    if (to_string(f) == name) return f;
  return std::nullopt;
}

/// Flat parameter record; each family reads the fields it needs.
struct FixtureSpec {
  Family family = Family::partial_matching;
  std::size_t n = 3;         // cities / right nodes / assets
  std::size_t m = 3;         // left nodes (matching)
  std::size_t start = 0, end = 1, priority = 2, m_steps = 1;
  std::size_t p = 1;         // matched pairs
  std::vector<std::size_t> preferred{0};
  double q = 0.5;
  std::size_t generators = 1, periods = 3;
  std::vector<std::size_t> up_time{2}, down_time{2};
  std::vector<int> initial_on{0};
  std::uint64_t seed = 0;
  Realization repr = Realization::csr;
};

inline GeneralConstraints generate(const FixtureSpec& s) {
  switch (s.family) {
    case Family::tsp_start_end: return gen_tsp_start_end(s.n, s.start, s.end, s.repr);
    case Family::tsp_priority: return gen_tsp_priority(s.n, s.start, s.end, s.priority, s.m_steps, s.repr);
    case Family::partial_matching: return gen_partial_matching(s.m, s.n, s.p, s.repr);
    case Family::portfolio: return gen_portfolio(s.n, s.preferred, s.q, s.repr);
    case Family::uc_min_updown:
      return gen_uc_min_updown(s.generators, s.periods, s.up_time, s.down_time, s.initial_on, s.repr);
  }
  throw ContractViolation("generate: unknown family");
}

/// `count` cost vectors with entries uniform in [-1, 1].
inline std::vector<Vector> random_costs(std::size_t n, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<Vector> out(count, Vector(n));
  for (auto& c : out)
    for (double& v : c) v = dist(rng);
  return out;
}

}  // namespace linproj::fixtures

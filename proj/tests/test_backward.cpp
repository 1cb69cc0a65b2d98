#include <gtest/gtest.h>

#include <random>

#include "linproj/backward.hpp"
#include "linproj/gradcheck.hpp"
#include "support/oracles.hpp"
#include "support/unrolled.hpp"

namespace linproj {
namespace {

using testing::random_problem;

EntropicProblem closed_form() { return {DenseMatrix(1, 2, {1, 1}), {1}, {1, 1}, {1, 0}, 1.0}; }

// Hand evaluation at y* = -0.5, x* = (sigma(0.5), sigma(-0.5)), w = sigma(0.5) sigma(-0.5).
constexpr double kWeight = 0.235003712201594489;
constexpr double kDlDc = 0.117501856100797245;
constexpr double kDlDu0 = 0.369980593651325905;
constexpr double kDlDu1 = -0.130019406348674095;

SolverConfig tight() {
  SolverConfig cfg;
  cfg.epsilon = 1e-10;
  cfg.max_iter = 20'000'000;
  return cfg;
}

const Vector& dense_values(const GradientBundle& g) { return std::get<DenseMatrix>(g.dl_dA).entries(); }

Vector random_vector(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector v(n);
  for (double& e : v) e = gauss(rng);
  return v;
}

TEST(KktResidual, Examples) {
  EXPECT_NEAR(kkt_residual_h(closed_form(), Vector{-0.5})[0], 0.0, 1e-12);
  EXPECT_NEAR(kkt_residual_h(closed_form(), Vector{0})[0], 0.2310585786300049, 1e-15);
  EntropicProblem free{DenseMatrix::zeros(0, 2), {}, {1, 1}, {0, 0}, 1.0};
  EXPECT_TRUE(kkt_residual_h(free, Vector{}).empty());
}

TEST(CgSolve, ClosedFormScalarSystem) {
  const KktOperator op(closed_form(), primal_from_dual(closed_form(), Vector{-0.5}));
  EXPECT_NEAR(op(Vector{1.0})[0], 2 * kWeight, 1e-15);
  const CgResult r = cg_solve(op, Vector{kWeight}, 1e-12);
  EXPECT_NEAR(r.z[0], 0.5, 1e-12);
  EXPECT_FALSE(r.regularized);
}

TEST(CgSolve, ZeroRhsTakesNoIterations) {
  std::mt19937_64 rng(51);
  const EntropicProblem ep = random_problem(rng, 3, 6, 1.0);
  const KktOperator op(ep, primal_from_dual(ep, Vector(3, 0.0)));
  const CgResult r = cg_solve(op, Vector(3, 0.0), 1e-10);
  EXPECT_EQ(r.iterations, 0u);
  EXPECT_EQ(r.z, Vector(3, 0.0));
}

TEST(CgSolve, RankDeficientConsistentSystem) {
  // rows 0 and 2 coincide, so A diag(w) A^T is singular
  EntropicProblem ep{DenseMatrix(3, 4, {1, 2, 0, 1, 0, 1, 1, 0, 1, 2, 0, 1}), {1, 1, 1}, {1, 1, 1, 1}, {0.3, -0.2, 0.1, 0.4},
                     1.0};
  const KktOperator op(ep, primal_from_dual(ep, Vector(3, 0.0)));
  const Vector rhs = op(Vector{0.7, -0.4, 0.2});
  const double tol = 1e-10;
  const CgResult r = cg_solve(op, rhs, tol);
  EXPECT_LE(norm2(subtract(op(r.z), rhs)), tol * std::max(1.0, norm2(rhs)));
}

TEST(CgSolve, InconsistentSingularSystemRaises) {
  EntropicProblem ep{DenseMatrix(2, 2, {1, 1, 1, 1}), {1, 1}, {1, 1}, {0, 0}, 1.0};
  const KktOperator op(ep, primal_from_dual(ep, Vector(2, 0.0)));
  try {
    cg_solve(op, Vector{1, -1}, 1e-10);
    FAIL() << "expected SingularKkt";
  } catch (const SingularKkt& e) {
    EXPECT_EQ(e.best_iterate().size(), 2u);
  }
}

TEST(CgSolve, Contracts) {
  const KktOperator op(closed_form(), Vector{0.5, 0.5});
  EXPECT_THROW(cg_solve(op, Vector{1.0}, 0.0), ContractViolation);
  EXPECT_THROW(cg_solve(op, Vector{NAN}, 1e-10), ContractViolation);
  EXPECT_THROW(cg_solve(op, Vector{1.0, 2.0}, 1e-10), ContractViolation);
}

TEST(Backward, ClosedFormGradients) {
  const EntropicProblem ep = closed_form();
  const Solution sol = solve(ep, tight());
  ASSERT_EQ(sol.status, SolveStatus::converged);
  const GradientBundle g = backward(ep, sol, {{1, 0}, {}});
  EXPECT_NEAR(g.dl_dc[0], kDlDc, 1e-8);
  EXPECT_NEAR(g.dl_dc[1], -kDlDc, 1e-8);
  EXPECT_NEAR(g.dl_db[0], 0.5, 1e-8);
  EXPECT_NEAR(g.dl_du[0], kDlDu0, 1e-8);
  EXPECT_NEAR(g.dl_du[1], kDlDu1, 1e-8);
  EXPECT_NEAR(dense_values(g)[0], -kDlDu0, 1e-8);
  EXPECT_NEAR(dense_values(g)[1], kDlDu1, 1e-8);
}

TEST(Backward, ZeroSeedGivesZeroGradients) {
  std::mt19937_64 rng(52);
  const EntropicProblem ep = random_problem(rng, 3, 7, 2.0);
  const Solution sol = solve(ep, tight());
  ASSERT_EQ(sol.status, SolveStatus::converged);
  const GradientBundle g = backward(ep, sol, {Vector(7, 0.0), Vector(3, 0.0)});
  EXPECT_EQ(g.dl_dc, Vector(7, 0.0));
  EXPECT_EQ(g.dl_du, Vector(7, 0.0));
  EXPECT_EQ(g.dl_db, Vector(3, 0.0));
  for (double v : dense_values(g)) EXPECT_EQ(v, 0.0);
}

TEST(Backward, SimplexGradientSumsToZero) {
  std::mt19937_64 rng(53);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (std::size_t n : {2u, 3u, 5u, 10u}) {
    Vector c(n);
    for (double& v : c) v = unit(rng);
    EntropicProblem ep{DenseMatrix(1, n, Vector(n, 1.0)), {1}, Vector(n, 1.0), c, 2.0};
    const Solution sol = solve(ep, tight());
    ASSERT_EQ(sol.status, SolveStatus::converged);
    const GradientBundle g = backward(ep, sol, {random_vector(rng, n), {}});
    double total = 0.0;
    for (double v : g.dl_dc) total += v;
    EXPECT_LE(std::abs(total), 1e-10) << "n=" << n;
  }
}

TEST(Backward, Contracts) {
  const EntropicProblem ep = closed_form();
  Solution sol = solve(ep, tight());
  EXPECT_THROW(backward(ep, sol, {{1, 0, 0}, {}}), ContractViolation);
  EXPECT_THROW(backward(ep, sol, {{1, 0}, {1, 1}}), ContractViolation);
  EXPECT_THROW(backward(ep, sol, {{NAN, 0}, {}}), ContractViolation);
  sol.status = SolveStatus::iter_limit;
  EXPECT_THROW(backward(ep, sol, {{1, 0}, {}}), ContractViolation);
}

TEST(Backward, UnconstrainedInstance) {
  EntropicProblem ep{DenseMatrix::zeros(0, 2), {}, {1, 2}, {0.5, -0.25}, 2.0};
  const Solution sol = solve(ep, SolverConfig{});
  const GradientBundle g = backward(ep, sol, {{1, 1}, {}});
  ASSERT_TRUE(g.dl_db.empty());
  for (std::size_t j = 0; j < 2; ++j) {
    const double x = sol.x[j];
    EXPECT_NEAR(g.dl_dc[j], ep.theta * x * (ep.u[j] - x), 1e-15);
  }
}

TEST(Backward, SparsePatternMatchesDense) {
  std::mt19937_64 rng(54);
  const EntropicProblem dense = random_problem(rng, 3, 6, 1.0);
  // keep a random subset of the entries; b is recomputed from an interior point
  std::vector<std::tuple<std::size_t, std::size_t, double>> kept;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const DenseMatrix& d = *dense.a.as_dense();
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 6; ++j)
      if (j % 3 == i || unit(rng) < 0.4) kept.emplace_back(i, j, d(i, j));
  const CsrMatrix csr = CsrMatrix::from_triplets(3, 6, kept);
  EntropicProblem sparse = dense;
  sparse.a = csr;
  Vector x0(6);
  for (std::size_t j = 0; j < 6; ++j) x0[j] = 0.5 * sparse.u[j];
  sparse.b = matvec(sparse.a, x0);
  EntropicProblem as_dense = sparse;
  as_dense.a = densify(csr);

  const Solution s1 = solve(sparse, tight()), s2 = solve(as_dense, tight());
  ASSERT_EQ(s1.status, SolveStatus::converged);
  const AdjointSeed seed{random_vector(rng, 6), random_vector(rng, 3)};
  const GradientBundle gs = backward(sparse, s1, seed), gd = backward(as_dense, s2, seed);
  const auto& pattern = std::get<CsrMatrix>(gs.dl_dA);
  EXPECT_EQ(pattern.row_offsets(), csr.row_offsets());
  EXPECT_EQ(pattern.col_indices(), csr.col_indices());
  const DenseMatrix& full = std::get<DenseMatrix>(gd.dl_dA);
  pattern.for_each_entry([&](std::size_t i, std::size_t j, double v) { EXPECT_NEAR(v, full(i, j), 1e-9); });
  for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(gs.dl_dc[j], gd.dl_dc[j], 1e-8);
}

// ---------------------------------------------------------------------------

TEST(BackwardProperty, MatchesFiniteDifferences) {
  std::mt19937_64 rng(55);
  std::uniform_int_distribution<std::size_t> md(1, 4), extra(0, 6);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = md(rng);
    const std::size_t n = std::min<std::size_t>(10, m + 1 + extra(rng));
    const EntropicProblem ep = random_problem(rng, m, n, 1.0 + trial % 3);
    const AdjointSeed seed{random_vector(rng, n), trial % 2 ? random_vector(rng, m) : Vector{}};
    const GradcheckReport rep = gradcheck(ep, seed);
    ASSERT_TRUE(rep.converged) << "trial " << trial;
    EXPECT_LE(rep.c.max_rel, 1e-4) << "trial " << trial;
    EXPECT_LE(rep.b.max_rel, 1e-4) << "trial " << trial;
    EXPECT_LE(rep.u.max_rel, 1e-4) << "trial " << trial;
    EXPECT_LE(rep.a.max_rel, 1e-4) << "trial " << trial;
    EXPECT_EQ(rep.a.checked, m * n);
  }
}

TEST(BackwardProperty, LinearInSeed) {
  std::mt19937_64 rng(56);
  std::uniform_real_distribution<double> scale(-3.0, 3.0);
  for (int trial = 0; trial < 30; ++trial) {
    const EntropicProblem ep = random_problem(rng, 1 + trial % 4, 6, 1.5);
    SolverConfig cfg;
    cfg.epsilon = 1e-8;
    cfg.max_iter = 20'000'000;
    const Solution sol = solve(ep, cfg);
    ASSERT_EQ(sol.status, SolveStatus::converged);
    const AdjointSeed seed{random_vector(rng, 6), random_vector(rng, ep.rows())};
    const double alpha = scale(rng);
    AdjointSeed scaled = seed;
    for (double& v : scaled.dl_dx) v *= alpha;
    for (double& v : scaled.dl_dy) v *= alpha;
    const GradientBundle g = backward(ep, sol, seed, 1e-14), gs = backward(ep, sol, scaled, 1e-14);
    auto check = [&](const Vector& a, const Vector& b) {
      for (std::size_t k = 0; k < a.size(); ++k)
        EXPECT_LE(std::abs(alpha * a[k] - b[k]), 1e-12 * std::max(1.0, std::abs(b[k]))) << "trial " << trial;
    };
    check(g.dl_dc, gs.dl_dc);
    check(g.dl_db, gs.dl_db);
    check(g.dl_du, gs.dl_du);
    check(dense_values(g), dense_values(gs));
  }
}

TEST(BackwardProperty, KktOperatorSymmetricPsd) {
  std::mt19937_64 rng(57);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 1 + trial % 5;
    const EntropicProblem ep = random_problem(rng, m, 2 + trial % 9, 0.5 + trial % 4);
    const KktOperator op(ep, primal_from_dual(ep, random_vector(rng, m)));
    for (double w : op.weights()) EXPECT_GT(w, 0.0);
    const Vector v = random_vector(rng, m), w = random_vector(rng, m);
    EXPECT_LE(std::abs(dot(v, op(w)) - dot(w, op(v))), 1e-12 * std::max(1.0, std::abs(dot(v, op(w)))));
    EXPECT_GE(dot(v, op(v)), -1e-12);
  }
}

TEST(BackwardProperty, AgreesWithUnrolledSolver) {
  std::mt19937_64 rng(58);
  for (int trial = 0; trial < 6; ++trial) {
    const std::size_t m = 1 + trial % 2, n = 2 + trial % 3;
    const EntropicProblem ep = random_problem(rng, m, n, 1.0);
    const DenseMatrix& a = *ep.a.as_dense();
    const Vector seed = random_vector(rng, n);

    auto tangent_c = [&](std::size_t k) {
      std::vector<testing::Fwd> c(n);
      for (std::size_t j = 0; j < n; ++j) c[j] = {ep.c[j], j == k ? 1.0 : 0.0};
      return c;
    };
    auto directional = [&](const testing::UnrolledResult& r) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += seed[j] * r.x[j].d;
      return s;
    };

    // Validate the forward-mode trace against central differences of the same
    // trace over a short prefix. Later accept/reject tests compare dual values at
    // rounding level, so a perturbation of c can flip them and the unrolled map
    // is only piecewise smooth there.
    for (std::size_t k = 0; k < n; ++k) {
      const auto traced = testing::unrolled_solve(a, ep.b, ep.u, tangent_c(k), ep.theta, 0.0, 10);
      auto value = [&](double ck) {
        auto c = tangent_c(k);
        c[k].v = ck;
        const auto r = testing::unrolled_solve(a, ep.b, ep.u, c, ep.theta, 0.0, 10);
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += seed[j] * r.x[j].v;
        return s;
      };
      const double fd = testing::central_difference(value, ep.c[k], 1e-6);
      EXPECT_LE(testing::rel_err(directional(traced), fd), 1e-6) << "trial " << trial << " k " << k;
    }

    const Solution sol = solve(ep, tight());
    ASSERT_EQ(sol.status, SolveStatus::converged);
    const GradientBundle g = backward(ep, sol, {seed, {}}, 1e-14);
    for (std::size_t k = 0; k < n; ++k) {
      const auto full = testing::unrolled_solve(a, ep.b, ep.u, tangent_c(k), ep.theta, 1e-11, 20'000'000);
      ASSERT_LE(full.residual, 1e-11);
      EXPECT_LE(std::abs(directional(full) - g.dl_dc[k]), 1e-6) << "trial " << trial << " k " << k;
    }
  }
}

}  // namespace
}  // namespace linproj

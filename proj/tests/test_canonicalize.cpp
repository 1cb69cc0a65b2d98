#include <gtest/gtest.h>

#include <random>

#include "linproj/canonicalize.hpp"

namespace linproj {
namespace {

GeneralConstraints one_le_row(Vector row, double rhs, Vector lower, Vector upper) {
  GeneralConstraints gc = GeneralConstraints::box(std::move(lower), std::move(upper));
  const std::size_t n = row.size();
  gc.a1 = DenseMatrix(1, n, std::move(row));
  gc.b1 = {rhs};
  return gc;
}

TEST(Canonicalize, SingleLessEqualRow) {
  const auto gc = one_le_row({1, 1}, 1, {0, 0}, {1, 1});
  const CanonicalForm cf = canonicalize(gc, Vector{1, 0});
  EXPECT_EQ(densify(cf.problem.a).entries(), (Vector{1, 1, 1}));
  EXPECT_EQ(cf.problem.b, (Vector{1}));
  EXPECT_EQ(cf.problem.u, (Vector{1, 1, 1}));
  EXPECT_EQ(cf.c, (Vector{1, 0, 0}));
}

TEST(Canonicalize, ShiftedBounds) {
  const auto gc = one_le_row({1, -1}, 1, {-1, -1}, {1, 1});
  const CanonicalForm cf = canonicalize(gc, Vector{0, 0});
  EXPECT_EQ(densify(cf.problem.a).entries(), (Vector{1, -1, 1}));
  EXPECT_EQ(cf.problem.b, (Vector{1}));
  EXPECT_EQ(cf.problem.u, (Vector{2, 2, 3}));
}

TEST(Canonicalize, EqualityRowAddsNoSlack) {
  GeneralConstraints gc = GeneralConstraints::box({0, 0}, {1, 1});
  gc.a3 = DenseMatrix(1, 2, {1, 1});
  gc.b3 = {1};
  const CanonicalForm cf = canonicalize(gc, Vector{0, 0});
  EXPECT_EQ(densify(cf.problem.a).entries(), (Vector{1, 1}));
  EXPECT_EQ(cf.problem.b, (Vector{1}));
  EXPECT_EQ(cf.problem.u, (Vector{1, 1}));
}

TEST(Canonicalize, GreaterEqualRowUsesNegativeSlack) {
  GeneralConstraints gc = GeneralConstraints::box({0, 0}, {1, 1});
  gc.a2 = DenseMatrix(1, 2, {1, 1});
  gc.b2 = {0.5};
  const CanonicalForm cf = canonicalize(gc, Vector{0, 0});
  EXPECT_EQ(densify(cf.problem.a).entries(), (Vector{1, 1, -1}));
  EXPECT_EQ(cf.problem.b, (Vector{0.5}));
  EXPECT_EQ(cf.problem.u, (Vector{1, 1, 1.5}));
}

TEST(Canonicalize, NegativeSlackCapacityIsInfeasible) {
  // x1 + x2 <= -1 with x in [0,1]^2 can never hold
  const auto gc = one_le_row({1, 1}, -1, {0, 0}, {1, 1});
  try {
    canonicalize(gc, Vector{0, 0});
    FAIL() << "expected CertifiedInfeasible";
  } catch (const CertifiedInfeasible& e) {
    EXPECT_EQ(e.row(), 0u);
    EXPECT_DOUBLE_EQ(e.capacity(), -1.0);
  }
}

TEST(Canonicalize, ContractViolations) {
  EXPECT_THROW(canonicalize(GeneralConstraints::box({0, 1}, {1, 0}), Vector{0, 0}), ContractViolation);
  EXPECT_THROW(canonicalize(GeneralConstraints::box({0, 0}, {1, INFINITY}), Vector{0, 0}), ContractViolation);
  EXPECT_THROW(canonicalize(GeneralConstraints::box({0, 0}, {1, 1}), Vector{0}), ContractViolation);
}

TEST(Canonicalize, FixedVariableIsEliminated) {
  GeneralConstraints gc = GeneralConstraints::box({0, 1}, {1, 1});
  gc.a3 = DenseMatrix(1, 2, {1, 1});
  gc.b3 = {1.4};
  const CanonicalForm cf = canonicalize(gc, Vector{2, 3});
  EXPECT_EQ(cf.problem.a.cols(), 1u);
  EXPECT_NEAR(cf.problem.b[0], 0.4, 1e-15);
  EXPECT_EQ(cf.c, (Vector{2}));
  EXPECT_EQ(recover(Vector{0.4}, cf.problem.embedding), (Vector{0.4, 1.0}));
}

TEST(Canonicalize, ZeroCapacitySlackIsEliminated) {
  // x1 + x2 >= 2 on [0,1]^2 has capacity A⁺u - b = 0: no slack, the row binds
  GeneralConstraints gc = GeneralConstraints::box({0, 0}, {1, 1});
  gc.a2 = DenseMatrix(1, 2, {1, 1});
  gc.b2 = {2};
  const CanonicalForm cf = canonicalize(gc, Vector{0, 0});
  EXPECT_EQ(cf.problem.a.cols(), 2u);
  EXPECT_EQ(cf.problem.b, (Vector{2}));
  EXPECT_TRUE(cf.problem.embedding.slack_rows.empty());
}

TEST(Canonicalize, CsrInputsGiveCsrOutput) {
  GeneralConstraints gc = GeneralConstraints::box({0, 0, 0}, {1, 1, 1});
  gc.a1 = CsrMatrix::from_dense(DenseMatrix(1, 3, {1, 0, 1}));
  gc.b1 = {1};
  const CanonicalForm cf = canonicalize(gc, Vector{0, 0, 0});
  EXPECT_EQ(cf.problem.a.realization(), Realization::csr);
  EXPECT_EQ(densify(cf.problem.a).entries(), (Vector{1, 0, 1, 1}));
}

TEST(Recover, Examples) {
  Embedding e;
  e.n_original = 2;
  e.shift = {0, 0};
  e.kept_indices = {0, 1};
  e.slack_rows = {0};
  EXPECT_EQ(recover(Vector{0.5, 0.5, 0.123}, e), (Vector{0.5, 0.5}));

  e.shift = {-1, -1};
  const Vector r = recover(Vector{1.2, 0.3, 0.0}, e);
  EXPECT_NEAR(r[0], 0.2, 1e-15);
  EXPECT_NEAR(r[1], -0.7, 1e-15);

  EXPECT_THROW(recover(Vector{1, 2}, e), ContractViolation);
}

// ---------------------------------------------------------------------------
// Random instances: rows of every kind, some fixed variables, shifted boxes.

struct RandomInstance {
  GeneralConstraints gc;
  Vector feasible;  // a point satisfying all original constraints
};

RandomInstance random_instance(std::mt19937_64& rng, bool sparse) {
  std::uniform_int_distribution<std::size_t> nd(1, 10), md(0, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::size_t n = nd(rng);
  Vector lower(n), upper(n), x(n);
  for (std::size_t j = 0; j < n; ++j) {
    lower[j] = 2 * gauss(rng);
    upper[j] = unit(rng) < 0.15 ? lower[j] : lower[j] + 0.1 + 3 * unit(rng);
    x[j] = lower[j] + (upper[j] - lower[j]) * unit(rng);
  }
  auto block = [&](std::size_t m) {
    Vector e(m * n);
    for (double& v : e) v = unit(rng) < 0.6 ? gauss(rng) : 0.0;
    DenseMatrix d(m, n, std::move(e));
    return sparse ? LinearOperator(CsrMatrix::from_dense(d)) : LinearOperator(d);
  };
  GeneralConstraints gc = GeneralConstraints::box(lower, upper);
  gc.a1 = block(md(rng));
  gc.a2 = block(md(rng));
  gc.a3 = block(md(rng));
  gc.b1 = matvec(gc.a1, x);
  gc.b2 = matvec(gc.a2, x);
  gc.b3 = matvec(gc.a3, x);
  for (double& v : gc.b1) v += unit(rng);
  for (double& v : gc.b2) v -= unit(rng);
  return {gc, x};
}

TEST(CanonicalizeProperty, EmbeddingLandsInStandardFeasibleSet) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    const auto [gc, xp] = random_instance(rng, trial % 2 == 1);
    const CanonicalForm cf = canonicalize(gc, Vector(gc.num_vars(), 0.0));
    const StandardProblem& sp = cf.problem;
    const Vector xs = embed_point(gc, sp.embedding, xp);
    const Vector ax = matvec(sp.a, xs);
    for (std::size_t i = 0; i < ax.size(); ++i)
      EXPECT_NEAR(ax[i], sp.b[i], 1e-10 * (1 + std::abs(sp.b[i]))) << "trial " << trial;
    for (std::size_t j = 0; j < xs.size(); ++j) {
      EXPECT_GE(xs[j], -1e-12) << "trial " << trial;
      EXPECT_LE(xs[j], sp.u[j] + 1e-12) << "trial " << trial;
      EXPECT_GT(sp.u[j], 0.0);
    }
    EXPECT_EQ(sp.a.rows(), gc.a1.rows() + gc.a2.rows() + gc.a3.rows());
  }
}

TEST(CanonicalizeProperty, RoundTripWithinScaledTolerance) {
  std::mt19937_64 rng(22);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    const auto [gc, xp] = random_instance(rng, trial % 2 == 0);
    const CanonicalForm cf = canonicalize(gc, Vector(gc.num_vars(), 0.0));
    const StandardProblem& sp = cf.problem;
    const double tau = 1e-6;
    Vector xs = embed_point(gc, sp.embedding, xp);
    // Perturb by at most tau in the residual and box, then recover.
    Vector d(xs.size());
    for (double& v : d) v = gauss(rng);
    const double scale = tau / std::max(1.0, norm2(matvec(sp.a, d)) + norm_inf(d));
    for (std::size_t j = 0; j < xs.size(); ++j) xs[j] = std::clamp(xs[j] + scale * d[j], -tau, sp.u[j] + tau);
    Vector r = matvec(sp.a, xs);
    double res = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) res = std::max(res, std::abs(r[i] - sp.b[i]));
    ASSERT_LE(res, 10 * tau);
    const double viol = constraint_violation(gc, recover(xs, sp.embedding));
    EXPECT_LE(viol, feasibility_scale(gc) * std::max(res, tau) * (1 + 1e-9)) << "trial " << trial;
  }
}

TEST(CanonicalizeProperty, CostPaddingAndObjectiveConsistency) {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto [gc, xp] = random_instance(rng, false);
    Vector cp(gc.num_vars());
    for (double& v : cp) v = gauss(rng);
    const CanonicalForm cf = canonicalize(gc, cp);
    const Embedding& e = cf.problem.embedding;
    for (std::size_t k = 0; k < e.kept_indices.size(); ++k) EXPECT_EQ(cf.c[k], cp[e.kept_indices[k]]);
    for (std::size_t k = e.kept_indices.size(); k < cf.c.size(); ++k) EXPECT_EQ(cf.c[k], 0.0);

    const Vector xs = embed_point(gc, e, xp);
    double lhs = -dot(cf.c, xs);
    double rhs = 0.0;
    for (std::size_t j : e.kept_indices) rhs -= cp[j] * (xp[j] - e.shift[j]);
    EXPECT_NEAR(lhs, rhs, 1e-12 * (1 + std::abs(rhs)));
  }
}

TEST(CanonicalizeProperty, DenseAndCsrInputsAgree) {
  std::mt19937_64 rng(24);
  for (int trial = 0; trial < 100; ++trial) {
    auto inst = random_instance(rng, false);
    GeneralConstraints sparse = inst.gc;
    sparse.a1 = to_csr(inst.gc.a1);
    sparse.a2 = to_csr(inst.gc.a2);
    sparse.a3 = to_csr(inst.gc.a3);
    const CanonicalForm d = canonicalize(inst.gc, Vector(inst.gc.num_vars(), 0.0));
    const CanonicalForm s = canonicalize(sparse, Vector(inst.gc.num_vars(), 0.0));
    EXPECT_EQ(densify(d.problem.a).entries(), densify(s.problem.a).entries());
    EXPECT_EQ(d.problem.b, s.problem.b);
    EXPECT_EQ(d.problem.u, s.problem.u);
  }
}

}  // namespace
}  // namespace linproj

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "linproj/backward.hpp"
#include "linproj/canonicalize.hpp"
#include "linproj/dual.hpp"
#include "linproj/parallel.hpp"
#include "linproj/solver.hpp"
#include "linproj/spectral_norm.hpp"

namespace linproj {

/// A projection onto a fixed constraint set. Canonicalization and the
/// spectral-norm estimate are computed once and reused for every cost vector.
struct ProjectionLayer {
  GeneralConstraints constraints;
  StandardProblem standard;
  SolverConfig config;
  double norm_estimate = 0.0;
  /// Seed each instance of a batch with the previous instance's dual. Forces
  /// sequential execution and makes results depend on batch order.
  bool warm_start = false;

  const Embedding& embedding() const noexcept { return standard.embedding; }
  std::size_t num_original() const noexcept { return standard.embedding.n_original; }
};

/// Retained forward state for one instance's backward call.
struct ProjectionContext {
  EntropicProblem problem;
};

struct ProjectionResult {
  Vector x_original;
  Solution solution;
  std::shared_ptr<const ProjectionContext> context;
};

inline ProjectionLayer build_layer(const GeneralConstraints& gc, const SolverConfig& cfg,
                                   double feasibility_tol = kDefaultFeasibilityTol) {
  cfg.validate();
  const Vector placeholder(gc.num_vars(), 0.0);
  CanonicalForm cf = canonicalize(gc, placeholder, feasibility_tol);
  ProjectionLayer layer;
  layer.constraints = gc;
  layer.standard = std::move(cf.problem);
  layer.config = cfg;
  layer.norm_estimate = estimate_spectral_norm(layer.standard.a, 100, 0);
  return layer;
}

namespace detail {

inline ProjectionResult project_one(const ProjectionLayer& layer, std::span<const double> c_prime,
                                    const SolverConfig& cfg) {
  require(all_finite(c_prime), "project: non-finite cost");
  auto ctx = std::make_shared<ProjectionContext>(
      ProjectionContext{make_entropic(layer.standard, lift_cost(layer.embedding(), c_prime), cfg.theta)});
  ProjectionResult r;
  r.solution = solve(ctx->problem, cfg);
  r.x_original = recover(r.solution.x, layer.embedding());
  r.context = std::move(ctx);
  return r;
}

}  // namespace detail

inline std::vector<ProjectionResult> project(const ProjectionLayer& layer, const std::vector<Vector>& c_batch,
                                             Execution exec = Execution::sequential) {
  for (const auto& c : c_batch)
    detail::require(c.size() == layer.num_original(), "project: cost length != number of variables");
  std::vector<ProjectionResult> out(c_batch.size());
  if (layer.warm_start) {
    SolverConfig cfg = layer.config;
    for (std::size_t i = 0; i < c_batch.size(); ++i) {
      out[i] = detail::project_one(layer, c_batch[i], cfg);
      cfg.y0 = out[i].solution.y;
    }
    return out;
  }
  detail::parallel_for(c_batch.size(), exec,
                       [&](std::size_t i) { out[i] = detail::project_one(layer, c_batch[i], layer.config); });
  return out;
}

/// CG tolerance matched to the forward accuracy: implicit gradients are only
/// as accurate as h(y) = 0 holds, so there is no point asking CG for more
/// than the square of the forward residual scale.
inline double backward_tolerance(const ProjectionLayer& layer) {
  const double scale = std::max(1.0, norm2(layer.standard.b));
  const double rel = layer.config.epsilon / scale;
  return std::max(kDefaultBackwardTol, rel * rel);
}

/// Full gradient bundle for one projected instance, in standard-form coordinates.
inline GradientBundle project_backward_full(const ProjectionLayer& layer, const ProjectionResult& result,
                                            std::span<const double> seed_original) {
  detail::require(result.context != nullptr, "project_backward: result has no forward context");
  detail::require(result.solution.status == SolveStatus::converged,
                  "project_backward: gradients requested after a non-converged forward pass");
  detail::require(seed_original.size() == layer.num_original(), "project_backward: seed length mismatch");
  AdjointSeed seed{lift_cost(layer.embedding(), seed_original), {}};
  return backward(result.context->problem, result.solution, seed, backward_tolerance(layer));
}

/// dl/dc' for each instance. Eliminated fixed variables receive zero gradient.
inline std::vector<Vector> project_backward(const ProjectionLayer& layer, const std::vector<ProjectionResult>& results,
                                            const std::vector<Vector>& seeds,
                                            Execution exec = Execution::sequential) {
  detail::require(results.size() == seeds.size(), "project_backward: results/seeds count mismatch");
  std::vector<Vector> out(results.size());
  detail::parallel_for(results.size(), exec, [&](std::size_t i) {
    const GradientBundle g = project_backward_full(layer, results[i], seeds[i]);
    out[i] = restrict_gradient(layer.embedding(), g.dl_dc);
  });
  return out;
}

/// Row-major convenience: `c_rows` holds `batch` cost vectors back to back.
inline std::vector<ProjectionResult> project_rows(const ProjectionLayer& layer, std::span<const double> c_rows,
                                                  std::size_t batch, Execution exec = Execution::sequential) {
  const std::size_t n = layer.num_original();
  detail::require(c_rows.size() == batch * n, "project_rows: buffer size != batch * n");
  std::vector<Vector> costs;
  costs.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i)
    costs.emplace_back(c_rows.begin() + static_cast<std::ptrdiff_t>(i * n),
                       c_rows.begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
  return project(layer, costs, exec);
}

}  // namespace linproj

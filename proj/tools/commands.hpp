#pragma once

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "problem_file.hpp"

namespace linproj::cli {

enum ExitCode : int { ok = 0, gradient_mismatch = 1, input_error = 2, infeasible = 3, not_converged = 4 };

struct Overrides {
  std::optional<double> theta;
  std::optional<double> epsilon;
  std::optional<std::size_t> max_iter;

  void apply(SolverSection& s) const {
    if (theta) s.theta = *theta;
    if (epsilon) s.epsilon = *epsilon;
    if (max_iter) s.max_iter = *max_iter;
  }
};

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------

struct ProjectOptions {
  bool standard_form = false;
  Execution exec = Execution::sequential;
  std::ostream* step_log = nullptr;  // line-delimited JSON records
};

inline int cmd_project(const ProblemFile& pf, const ProjectOptions& opts, std::ostream& out, std::ostream& err) {
  if (pf.costs.empty()) {
    err << "project: the problem file has no cost vectors\n";
    return input_error;
  }
  ProjectionLayer layer;
  try {
    layer = build_layer(pf.constraints, pf.solver.to_config());
  } catch (const CertifiedInfeasible& e) {
    err << "project: " << e.what() << "\n";
    return infeasible;
  }

  std::vector<ProjectionResult> results;
  if (opts.step_log) {
    std::size_t current = 0;
    layer.config.step_log = [&](const StepRecord& r) {
      Json rec;
      rec["instance"] = current;
      rec["iteration"] = r.iteration;
      rec["m"] = r.m_est;
      rec["alpha"] = r.alpha;
      rec["decrease"] = r.decrease;
      rec["required"] = r.required;
      rec["delta"] = r.delta;
      rec["accepted"] = r.accepted;
      rec["residual"] = r.residual;
      rec["dual_value"] = r.dual_value;
      *opts.step_log << rec.dump() << "\n";
    };
    for (current = 0; current < pf.costs.size(); ++current)
      results.push_back(std::move(project(layer, {pf.costs[current]}).front()));
  } else {
    results = project(layer, pf.costs, opts.exec);
  }

  Json doc;
  doc["version"] = kFormatVersion;
  Json list = Json::array();
  bool all_converged = true;
  for (const auto& r : results) {
    Json rec;
    rec["status"] = std::string(to_string(r.solution.status));
    rec["x"] = r.x_original;
    rec["residual"] = r.solution.residual;
    rec["violation"] = constraint_violation(pf.constraints, r.x_original);
    rec["iterations"] = r.solution.iterations;
    rec["backtracks"] = r.solution.backtracks;
    rec["dual_value"] = r.solution.dual_value;
    list.push_back(std::move(rec));
    all_converged = all_converged && r.solution.status == SolveStatus::converged;
  }
  doc["results"] = std::move(list);
  if (opts.standard_form) {
    Json sf;
    sf["a"] = cli::detail::matrix_json(layer.standard.a);
    sf["b"] = layer.standard.b;
    sf["u"] = layer.standard.u;
    Json costs = Json::array();
    for (const auto& c : pf.costs) costs.push_back(lift_cost(layer.embedding(), c));
    sf["c"] = std::move(costs);
    doc["standard_form"] = std::move(sf);
  }
  out << doc.dump(2) << "\n";
  return all_converged ? ok : not_converged;
}

// ---------------------------------------------------------------------------

struct GradcheckCliOptions {
  std::uint64_t seed = 0;
  std::size_t max_vars = 64;
  double tolerance = 1e-4;
  GradcheckOptions fd;
};

inline int cmd_gradcheck(const ProblemFile& pf, const GradcheckCliOptions& opts, std::ostream& out,
                         std::ostream& err) {
  if (pf.costs.empty()) {
    err << "gradcheck: the problem file has no cost vectors\n";
    return input_error;
  }
  ProjectionLayer layer;
  try {
    layer = build_layer(pf.constraints, pf.solver.to_config());
  } catch (const CertifiedInfeasible& e) {
    err << "gradcheck: " << e.what() << "\n";
    return infeasible;
  }
  if (layer.standard.a.cols() > opts.max_vars) {
    err << "gradcheck: " << layer.standard.a.cols() << " standard-form variables exceed the limit of "
        << opts.max_vars << "\n";
    return input_error;
  }

  bool passed = true;
  out << "instance block max_rel_err worst_index analytic numeric\n";
  for (std::size_t k = 0; k < pf.costs.size(); ++k) {
    const EntropicProblem ep = make_entropic(layer.standard, lift_cost(layer.embedding(), pf.costs[k]), pf.solver.theta);
    std::mt19937_64 rng(opts.seed + k);
    std::normal_distribution<double> gauss(0.0, 1.0);
    AdjointSeed seed{Vector(ep.cols()), Vector(ep.rows())};
    for (double& v : seed.dl_dx) v = gauss(rng);
    for (double& v : seed.dl_dy) v = gauss(rng);

    const GradcheckReport rep = gradcheck(ep, seed, opts.fd);
    if (!rep.converged) {
      err << "gradcheck: instance " << k << " did not converge at epsilon " << opts.fd.forward_epsilon << "\n";
      return not_converged;
    }
    const std::pair<const char*, const BlockError*> blocks[] = {{"c", &rep.c}, {"b", &rep.b}, {"u", &rep.u}, {"A", &rep.a}};
    for (const auto& [name, block] : blocks) {
      if (block->checked == 0) continue;
      out << k << " " << name << " " << cli::detail::fmt(block->max_rel) << " " << block->worst_index << " "
          << cli::detail::fmt(block->analytic) << " " << cli::detail::fmt(block->numeric) << "\n";
    }
    passed = passed && rep.passed(opts.tolerance);

    // A zero seed must give exactly zero gradients.
    SolverConfig cfg;
    cfg.epsilon = opts.fd.forward_epsilon;
    cfg.max_iter = opts.fd.max_iter;
    const GradientBundle zero = backward(ep, solve(ep, cfg), {Vector(ep.cols(), 0.0), {}}, opts.fd.backward_tol);
    bool exact = true;
    for (const Vector* v : {&zero.dl_dc, &zero.dl_db, &zero.dl_du})
      for (double e : *v) exact = exact && e == 0.0;
    std::visit([&](const auto& m) { m.for_each_entry([&](std::size_t, std::size_t, double e) { exact = exact && e == 0.0; }); },
               zero.dl_dA);
    out << k << " zero_seed " << (exact ? "exact" : "nonzero") << "\n";
    passed = passed && exact;
  }
  out << (passed ? "PASS" : "FAIL") << " tolerance " << cli::detail::fmt(opts.tolerance) << "\n";
  return passed ? ok : gradient_mismatch;
}

// ---------------------------------------------------------------------------

struct BenchOptions {
  fixtures::FixtureSpec spec;
  std::vector<double> thetas{1.0};
  std::vector<double> epsilons{1e-6};
  std::size_t repetitions = 5;
  std::size_t max_iter = 100000;
  Execution exec = Execution::sequential;
};

struct BenchRow {
  std::string family;
  std::size_t n = 0, m = 0;
  double theta = 0.0, epsilon = 0.0;
  double iterations = 0.0;  // mean over repetitions
  double backtracks = 0.0;
  double wall_ms = 0.0;
  double residual = 0.0;  // worst over repetitions
  bool converged = true;
};

/// One row per (theta, epsilon) cell; every cell projects the same seeded costs.
inline std::vector<BenchRow> bench_rows(const BenchOptions& opts) {
  const GeneralConstraints gc = fixtures::generate(opts.spec);
  const auto costs = fixtures::random_costs(gc.num_vars(), opts.repetitions, opts.spec.seed);
  std::vector<BenchRow> rows;
  for (double theta : opts.thetas) {
    for (double eps : opts.epsilons) {
      SolverConfig cfg;
      cfg.theta = theta;
      cfg.epsilon = eps;
      cfg.max_iter = opts.max_iter;
      const ProjectionLayer layer = build_layer(gc, cfg);
      const auto t0 = std::chrono::steady_clock::now();
      const auto results = project(layer, costs, opts.exec);
      const auto t1 = std::chrono::steady_clock::now();
      BenchRow row;
      row.family = std::string(fixtures::to_string(opts.spec.family));
      row.n = layer.standard.a.cols();
      row.m = layer.standard.rows();
      row.theta = theta;
      row.epsilon = eps;
      row.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
      for (const auto& r : results) {
        row.iterations += static_cast<double>(r.solution.iterations);
        row.backtracks += static_cast<double>(r.solution.backtracks);
        row.residual = std::max(row.residual, r.solution.residual);
        row.converged = row.converged && r.solution.status == SolveStatus::converged;
      }
      row.iterations /= static_cast<double>(results.size());
      row.backtracks /= static_cast<double>(results.size());
      rows.push_back(row);
    }
  }
  return rows;
}

inline int cmd_bench(const BenchOptions& opts, std::ostream& out, std::ostream& err) {
  if (opts.repetitions == 0 || opts.thetas.empty() || opts.epsilons.empty()) {
    err << "bench: empty sweep\n";
    return input_error;
  }
  std::vector<BenchRow> rows;
  try {
    rows = bench_rows(opts);
  } catch (const CertifiedInfeasible& e) {
    err << "bench: " << e.what() << "\n";
    return infeasible;
  }
  out << std::left << std::setw(18) << "family" << std::setw(6) << "n" << std::setw(6) << "m" << std::setw(11)
      << "theta" << std::setw(11) << "epsilon" << std::setw(12) << "iterations" << std::setw(12) << "backtracks"
      << std::setw(12) << "wall_ms" << "residual\n";
  bool all_converged = true;
  for (const auto& r : rows) {
    out << std::left << std::setw(18) << r.family << std::setw(6) << r.n << std::setw(6) << r.m << std::setw(11)
        << cli::detail::fmt(r.theta) << std::setw(11) << cli::detail::fmt(r.epsilon) << std::setw(12)
        << std::fixed << std::setprecision(1) << r.iterations << std::setw(12) << r.backtracks << std::setw(12)
        << std::setprecision(3) << r.wall_ms << std::defaultfloat << cli::detail::fmt(r.residual)
        << (r.converged ? "" : "  (not converged)") << "\n";
    all_converged = all_converged && r.converged;
  }
  return all_converged ? ok : not_converged;
}

// ---------------------------------------------------------------------------

struct GenerateOptions {
  fixtures::FixtureSpec spec;
  std::size_t costs = 1;
  SolverSection solver;
};

inline int cmd_generate(const GenerateOptions& opts, std::ostream& out, std::ostream& err) {
  ProblemFile pf;
  try {
    pf.constraints = fixtures::generate(opts.spec);
  } catch (const ContractViolation& e) {
    err << "generate: " << e.what() << "\n";
    return input_error;
  }
  pf.costs = fixtures::random_costs(pf.constraints.num_vars(), opts.costs, opts.spec.seed);
  pf.solver = opts.solver;
  out << problem_text(pf);
  return ok;
}

}  // namespace linproj::cli

#include <fstream>
#include <iostream>
#include <memory>

#include "CLI11.hpp"
#include "commands.hpp"

using namespace linproj;
using namespace linproj::cli;

namespace {

struct FamilyFlags {
  std::string family;
  fixtures::FixtureSpec spec;
  bool dense = false;

  void attach(CLI::App* sub) {
    sub->add_option("--family", family, "tsp_start_end | tsp_priority | partial_matching | portfolio | uc_min_updown")
        ->required();
    sub->add_option("--n", spec.n, "cities, right nodes or assets");
    sub->add_option("--m", spec.m, "left nodes (matching)");
    sub->add_option("--p", spec.p, "matched pairs");
    sub->add_option("--start", spec.start, "start city");
    sub->add_option("--end", spec.end, "end city");
    sub->add_option("--priority", spec.priority, "priority city");
    sub->add_option("--steps", spec.m_steps, "priority city must appear within the first steps+1 positions");
    sub->add_option("--preferred", spec.preferred, "preferred asset indices")->delimiter(',');
    sub->add_option("--q", spec.q, "minimum weight on preferred assets");
    sub->add_option("--generators", spec.generators, "generator count");
    sub->add_option("--periods", spec.periods, "time periods");
    sub->add_option("--up-time", spec.up_time, "minimum up time per generator")->delimiter(',');
    sub->add_option("--down-time", spec.down_time, "minimum down time per generator")->delimiter(',');
    sub->add_option("--initial-on", spec.initial_on, "initial on/off state per generator")->delimiter(',');
    sub->add_flag("--dense", dense, "dense operators instead of CSR");
  }

  // false on an unknown family name
  bool resolve(std::uint64_t seed) {
    const auto f = fixtures::parse_family(family);
    if (!f) return false;
    spec.family = *f;
    spec.seed = seed;
    spec.repr = dense ? Realization::dense : Realization::csr;
    return true;
  }
};

class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty() || path == "-") return;
    file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
    if (!*file_) throw InputError("cannot write '" + path + "'");
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entropy-regularized LP projection: project, gradcheck, bench, generate"};
  app.require_subcommand(1);

  Overrides overrides;
  std::uint64_t seed = 0;
  bool parallel = false;
  auto solver_flags = [&](CLI::App* sub) {
    sub->add_option_function<double>("--theta", [&](double v) { overrides.theta = v; }, "inverse temperature");
    sub->add_option_function<double>("--epsilon", [&](double v) { overrides.epsilon = v; }, "residual tolerance");
    sub->add_option_function<std::size_t>("--max-iter", [&](std::size_t v) { overrides.max_iter = v; },
                                          "iteration limit");
  };

  std::string input, output, log_path;
  bool standard_form = false;
  auto* project = app.add_subcommand("project", "project every cost vector of a problem file");
  project->add_option("input", input, "problem file")->required();
  project->add_option("-o,--output", output, "solution file (default stdout)");
  solver_flags(project);
  project->add_flag("--standard-form", standard_form, "also write the canonical (A, b, u, c)");
  project->add_option("--log-steps", log_path, "write one JSON line per solver trial step ('-' for stderr)");
  project->add_flag("--parallel", parallel, "solve instances concurrently");

  std::size_t max_vars = 64;
  auto* grad = app.add_subcommand("gradcheck", "compare analytic gradients with finite differences");
  grad->add_option("input", input, "problem file")->required();
  solver_flags(grad);
  grad->add_option("--seed", seed, "seed for the random adjoint vectors");
  grad->add_option("--max-vars", max_vars, "refuse larger standard forms");

  FamilyFlags bench_family;
  BenchOptions bench_opts;
  auto* bench = app.add_subcommand("bench", "iteration counts over theta and epsilon sweeps");
  bench_family.attach(bench);
  bench->add_option("--thetas", bench_opts.thetas, "theta values")->delimiter(',');
  bench->add_option("--epsilons", bench_opts.epsilons, "epsilon values")->delimiter(',');
  bench->add_option("--repetitions", bench_opts.repetitions, "random cost vectors per cell");
  bench->add_option("--max-iter", bench_opts.max_iter, "iteration limit");
  bench->add_option("--seed", seed, "seed for the cost vectors");
  bench->add_flag("--parallel", parallel, "solve repetitions concurrently");

  FamilyFlags gen_family;
  GenerateOptions gen_opts;
  auto* generate = app.add_subcommand("generate", "write a fixture problem file");
  gen_family.attach(generate);
  generate->add_option("--costs", gen_opts.costs, "number of random cost vectors");
  generate->add_option("--seed", seed, "seed for the cost vectors");
  generate->add_option("-o,--output", output, "problem file (default stdout)");
  solver_flags(generate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : input_error;
  }
  const Execution exec = parallel ? Execution::parallel : Execution::sequential;

  try {
    if (*project) {
      ProblemFile pf = parse_problem_text(read_text(input));
      overrides.apply(pf.solver);
      pf.solver.to_config().validate();
      ProjectOptions opts;
      opts.standard_form = standard_form;
      opts.exec = exec;
      std::unique_ptr<std::ofstream> log_file;
      if (log_path == "-") {
        opts.step_log = &std::cerr;
      } else if (!log_path.empty()) {
        log_file = std::make_unique<std::ofstream>(log_path);
        if (!*log_file) throw InputError("cannot write '" + log_path + "'");
        opts.step_log = log_file.get();
      }
      Output out(output);
      return cmd_project(pf, opts, out.stream(), std::cerr);
    }
    if (*grad) {
      ProblemFile pf = parse_problem_text(read_text(input));
      overrides.apply(pf.solver);
      GradcheckCliOptions opts;
      opts.seed = seed;
      opts.max_vars = max_vars;
      if (overrides.epsilon) opts.fd.forward_epsilon = *overrides.epsilon;
      if (overrides.max_iter) opts.fd.max_iter = *overrides.max_iter;
      return cmd_gradcheck(pf, opts, std::cout, std::cerr);
    }
    if (*bench) {
      if (!bench_family.resolve(seed)) throw InputError("unknown family '" + bench_family.family + "'");
      bench_opts.spec = bench_family.spec;
      bench_opts.exec = exec;
      return cmd_bench(bench_opts, std::cout, std::cerr);
    }
    if (!gen_family.resolve(seed)) throw InputError("unknown family '" + gen_family.family + "'");
    gen_opts.spec = gen_family.spec;
    overrides.apply(gen_opts.solver);
    gen_opts.solver.to_config().validate();
    Output out(output);
    return cmd_generate(gen_opts, out.stream(), std::cerr);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return input_error;
  } catch (const ContractViolation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return input_error;
  } catch (const CertifiedInfeasible& e) {
    std::cerr << "error: " << e.what() << "\n";
    return infeasible;
  }
}

// Command-line driver: simulate, equilibrium, diagram, verify.
//
// Exit codes: 0 success, 1 usage, 2 numerical failure, 3 I/O.

#include <cstdint>
#include <iostream>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ktraffic/ktraffic.hpp"

namespace {

using namespace ktraffic;

enum ExitCode : int { kOk = 0, kUsage = 1, kNumerical = 2, kIo = 3 };

constexpr std::uint64_t kDefaultSeed = 20130101;

struct RunConfig {
  int n = 2;
  double rho = 0.0;
  int rho_steps = 201;
  double t_final = 1000.0;
  double dt = 0.01;
  double steady_tol = 1e-10;
  double eta0 = 1.0;
  std::string method = "recursive";
  std::string units = "dimensionless";
  std::string init = "uniform";
  std::uint64_t seed = kDefaultSeed;
  bool seed_given = false;
  int jobs = 1;
  int stride = 100;
  int n_max = 6;
  bool corrupt_table = false;
  std::string out_csv;
  std::string out_json;
  std::string out_svg;

  ModelParams params() const {
    ModelParams p;
    p.n = n;
    p.eta0 = eta0;
    p.validate();
    return p;
  }

  IntegrationConfig integration() const {
    IntegrationConfig c;
    c.dt = dt;
    c.t_final = t_final;
    c.steady_tol = steady_tol;
    c.max_steps = static_cast<long long>(t_final / dt) + 2;
    c.validate();
    return c;
  }

  void check_outputs() const {
    std::set<std::string> seen;
    for (const auto* path : {&out_csv, &out_json, &out_svg}) {
      if (path->empty() || *path == "-") continue;
      if (!seen.insert(*path).second) throw InvalidParameter("output paths must be distinct: " + *path);
    }
  }
};

KineticState initial_state(const RunConfig& cfg) {
  const bool random = cfg.init == "random" || (cfg.init == "auto" && cfg.seed_given);
  if (!random) return uniform_state(cfg.n, cfg.rho);
  std::mt19937_64 rng(cfg.seed);
  return random_simplex_state(cfg.n, cfg.rho, rng);
}

void print_state(std::ostream& out, const char* label, const Vector& f) {
  out << label << " = (";
  for (std::size_t j = 0; j < f.size(); ++j) out << (j ? ", " : "") << format_number(f[j]);
  out << ")\n";
}

int run_simulate(const RunConfig& cfg) {
  cfg.check_outputs();
  const ModelParams params = cfg.params();
  const IntegrationConfig integration = cfg.integration();
  const SpeedLattice lattice(cfg.n);
  const KineticState f0 = initial_state(cfg);

  std::optional<std::ofstream> file;
  std::ostream* csv = nullptr;
  if (cfg.out_csv == "-") {
    csv = &std::cout;
  } else if (!cfg.out_csv.empty()) {
    file.emplace(open_output(cfg.out_csv));
    csv = &*file;
  }
  if (csv) write_trajectory_header(*csv, cfg.n);
  long long last_step = -1;
  StateObserver observer;
  if (csv) {
    observer = [&](const KineticState& s, long long step) {
      if (step % cfg.stride == 0) {
        write_trajectory_row(*csv, s, lattice);
        last_step = step;
      }
    };
  }
  const SteadyResult result = integrate_to_steady(f0, integration, params, observer);
  if (csv && last_step != result.steps) write_trajectory_row(*csv, result.state, lattice);
  if (file) finish_output(*file, cfg.out_csv);

  std::ostream& out = cfg.out_csv == "-" ? std::cerr : std::cout;
  const Observables obs = observables(result.state, lattice);
  print_state(out, "f", result.state.f);
  out << "t = " << format_number(result.state.t) << ", steps = " << result.steps << '\n';
  out << "rho = " << format_number(obs.rho) << ", q = " << format_number(obs.q) << ", u = " << format_number(obs.u)
      << '\n';
  out << "residual = " << format_number(result.residual) << ", converged = " << (result.converged ? "true" : "false")
      << '\n';
  return kOk;
}

void emit_json(const RunConfig& cfg, const nlohmann::json& report) {
  const std::string text = report.dump(2) + "\n";
  std::cout << text;
  if (!cfg.out_json.empty() && cfg.out_json != "-") {
    auto file = open_output(cfg.out_json);
    file << text;
    finish_output(file, cfg.out_json);
  }
}

int run_equilibrium(const RunConfig& cfg) {
  cfg.check_outputs();
  const ModelParams params = cfg.params();
  if (cfg.method == "recursive") {
    const EquilibriumResult eq = equilibrium_recursive(cfg.n, cfg.rho, params);
    nlohmann::json report = equilibrium_to_json(eq);
    report["stability"] = stability_to_json(eq.stability);
    emit_json(cfg, report);
    return kOk;
  }
  if (cfg.method == "integrate") {
    const SteadyResult res = integrate_to_steady(initial_state(cfg), cfg.integration(), params);
    EquilibriumResult eq;
    eq.n = cfg.n;
    eq.rho = cfg.rho;
    eq.f_inf = res.state.f;
    eq.phase = phase_of(cfg.rho);
    eq.stability = classify_stability(eq.f_inf, cfg.rho, params);
    eq.stable = eq.stability.verdict == Verdict::Stable;
    nlohmann::json report = equilibrium_to_json(eq);
    report["stability"] = stability_to_json(eq.stability);
    report["converged"] = res.converged;
    report["t"] = round_significant(res.state.t);
    emit_json(cfg, report);
    return res.converged ? kOk : kNumerical;
  }
  if (cfg.method == "bruteforce") {
    if (cfg.n > kBruteForceMaxN)
      throw CapabilityError("bruteforce supports n <= " + std::to_string(kBruteForceMaxN) + ", got " +
                            std::to_string(cfg.n));
    const auto candidates = equilibrium_bruteforce(cfg.n, cfg.rho, params);
    auto list = nlohmann::json::array();
    const Candidate* chosen = nullptr;
    int stable_count = 0;
    for (const auto& c : candidates) {
      auto branches = nlohmann::json::array();
      for (const auto& b : c.branches) branches.push_back(branch_to_json(b));
      list.push_back({{"f", detail::number_array(c.f)},
                      {"verdict", to_string(c.stability.verdict)},
                      {"stable", c.stable},
                      {"branch_data", branches}});
      if (c.stable) {
        ++stable_count;
        chosen = &c;
      }
    }
    EquilibriumResult eq;
    eq.n = cfg.n;
    eq.rho = cfg.rho;
    eq.phase = phase_of(cfg.rho);
    if (chosen) {
      eq.f_inf = chosen->f;
      eq.branch_data = chosen->branches;
      eq.stable = true;
    } else {
      eq.f_inf.assign(static_cast<std::size_t>(cfg.n), 0.0);
    }
    nlohmann::json report = equilibrium_to_json(eq);
    report["candidate_count"] = candidates.size();
    report["stable_count"] = stable_count;
    report["candidates"] = list;
    emit_json(cfg, report);
    if (stable_count != 1) {
      std::cerr << "expected exactly one stable equilibrium, found " << stable_count << '\n';
      return kNumerical;
    }
    return kOk;
  }
  throw InvalidParameter("unknown method '" + cfg.method + "'");
}

int run_diagram(const RunConfig& cfg) {
  cfg.check_outputs();
  const ModelParams params = cfg.params();
  SweepMethod method;
  if (cfg.method == "recursive") method = SweepMethod::Recursive;
  else if (cfg.method == "integrate") method = SweepMethod::Integrate;
  else throw InvalidParameter("diagram method must be recursive or integrate");

  SweepOptions options;
  options.params = params;
  options.jobs = cfg.jobs;
  if (method == SweepMethod::Integrate) {
    options.integration.dt = cfg.dt;
    options.integration.t_final = cfg.t_final;
    options.integration.max_steps = static_cast<long long>(cfg.t_final / cfg.dt) + 2;
    options.integration.validate();
  }
  Diagram diagram = sweep(cfg.n, default_grid(cfg.rho_steps), method, options);
  int unconverged = 0;
  for (const auto& p : diagram.points) unconverged += p.converged ? 0 : 1;
  const bool physical = cfg.units == "physical";
  if (physical) diagram = rescale_dimensional(diagram, params);

  if (!cfg.out_csv.empty()) {
    if (cfg.out_csv == "-") {
      write_diagram_csv(std::cout, diagram);
    } else {
      auto file = open_output(cfg.out_csv);
      write_diagram_csv(file, diagram);
      finish_output(file, cfg.out_csv);
    }
  }
  if (!cfg.out_json.empty()) {
    const std::string text = diagram_to_json(diagram).dump(2) + "\n";
    if (cfg.out_json == "-") {
      std::cout << text;
    } else {
      auto file = open_output(cfg.out_json);
      file << text;
      finish_output(file, cfg.out_json);
    }
  }
  if (!cfg.out_svg.empty()) {
    auto file = open_output(cfg.out_svg);
    write_diagram_svg(file, diagram, params);
    finish_output(file, cfg.out_svg);
  }

  std::ostream& out = (cfg.out_csv == "-" || cfg.out_json == "-") ? std::cerr : std::cout;
  out << "sigma = " << format_number(diagram.sigma) << (physical ? " veh/km" : "") << '\n';
  out << "q_max = " << format_number(diagram.q_max) << (physical ? " veh/h" : "") << '\n';
  if (!diagram.sigma_found) out << "warning: no free phase detected\n";
  if (diagram.sigma_degenerate) out << "warning: free phase spans the whole density range\n";
  if (unconverged > 0) out << "warning: " << unconverged << " point(s) did not reach steady state\n";
  return kOk;
}

int run_verify(const RunConfig& cfg) {
  VerifyOptions opt;
  opt.n_max = cfg.n_max;
  opt.seed = cfg.seed;
  opt.params = cfg.params();
  opt.inject_corrupt_table = cfg.corrupt_table;
  bool ok = true;
  for (const auto& g : ktraffic::run_verify(opt)) {
    std::cout << (g.passed ? "PASS " : "FAIL ") << g.name << ": " << g.detail << '\n';
    ok = ok && g.passed;
  }
  return ok ? kOk : kNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatially homogeneous discrete kinetic traffic model"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto add_model = [&](CLI::App* cmd, bool needs_rho) {
    cmd->add_option("--n", cfg.n, "number of speed classes (>= 2)")->check(CLI::Range(2, 100000));
    auto* rho = cmd->add_option("--rho", cfg.rho, "dimensionless density in [0,1]")->check(CLI::Range(0.0, 1.0));
    if (needs_rho) rho->required();
    cmd->add_option("--eta0", cfg.eta0, "interaction-rate constant")->check(CLI::PositiveNumber);
  };
  auto add_integration = [&](CLI::App* cmd) {
    cmd->add_option("--t-final", cfg.t_final, "integration horizon")->check(CLI::NonNegativeNumber);
    cmd->add_option("--dt", cfg.dt, "time step")->check(CLI::PositiveNumber);
  };
  auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option_function<std::uint64_t>(
        "--seed", [&](const std::uint64_t& s) { cfg.seed = s; cfg.seed_given = true; },
        "seed for random initial data");
    cmd->add_option("--init", cfg.init, "initial profile: uniform, random, or auto (random iff --seed)")
        ->check(CLI::IsMember({"uniform", "random", "auto"}));
  };

  auto* simulate = app.add_subcommand("simulate", "integrate one trajectory to steady state");
  add_model(simulate, true);
  add_integration(simulate);
  add_seed(simulate);
  cfg.init = "auto";
  simulate->add_option("--steady-tol", cfg.steady_tol, "stop when ||rhs||_1 drops below this")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--stride", cfg.stride, "record every k-th step")->check(CLI::PositiveNumber);
  simulate->add_option("--out-csv", cfg.out_csv, "trajectory CSV ('-' for stdout)");

  auto* equilibrium = app.add_subcommand("equilibrium", "report the stable equilibrium as JSON");
  add_model(equilibrium, true);
  add_integration(equilibrium);
  add_seed(equilibrium);
  equilibrium->add_option("--method", cfg.method, "recursive, integrate or bruteforce")
      ->check(CLI::IsMember({"recursive", "integrate", "bruteforce"}));
  equilibrium->add_option("--out-json", cfg.out_json, "also write the report here");

  auto* diagram = app.add_subcommand("diagram", "fundamental and speed diagrams");
  add_model(diagram, false);
  diagram->add_option("--t-final", cfg.t_final, "integration horizon per point (integrate method)");
  diagram->add_option("--dt", cfg.dt, "time step (integrate method)")->check(CLI::PositiveNumber);
  diagram->add_option("--rho-steps", cfg.rho_steps, "number of grid points on [0,1]")->check(CLI::Range(3, 10000000));
  diagram->add_option("--method", cfg.method, "recursive or integrate")
      ->check(CLI::IsMember({"recursive", "integrate"}));
  diagram->add_option("--units", cfg.units, "dimensionless or physical")
      ->check(CLI::IsMember({"dimensionless", "physical"}));
  diagram->add_option("--jobs", cfg.jobs, "worker threads")->check(CLI::Range(1, 1024));
  diagram->add_option("--out-csv", cfg.out_csv, "CSV output ('-' for stdout)");
  diagram->add_option("--out-json", cfg.out_json, "JSON output ('-' for stdout)");
  diagram->add_option("--out-svg", cfg.out_svg, "SVG output");

  auto* verify = app.add_subcommand("verify", "run the invariant suite");
  verify->add_option("--n-max", cfg.n_max, "largest number of speed classes checked")->check(CLI::Range(2, 50));
  verify->add_option("--seed", cfg.seed, "seed for randomized checks");
  verify->add_option("--eta0", cfg.eta0, "interaction-rate constant")->check(CLI::PositiveNumber);
  verify->add_flag("--inject-corrupt-table", cfg.corrupt_table, "negative control: corrupt one table entry")
      ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*simulate) return run_simulate(cfg);
    if (*equilibrium) return run_equilibrium(cfg);
    if (*diagram) {
      if (!diagram->count("--dt")) cfg.dt = default_sweep_config().dt;
      if (!diagram->count("--t-final")) cfg.t_final = default_sweep_config().t_final;
      return run_diagram(cfg);
    }
    if (*verify) return run_verify(cfg);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const InvalidParameter& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const DomainError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const PreconditionError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const CapabilityError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  }
  return kUsage;
}

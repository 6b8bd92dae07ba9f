#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "ktraffic/dynamics.hpp"
#include "ktraffic/equilibrium.hpp"
#include "ktraffic/error.hpp"
#include "ktraffic/lattice_games.hpp"

namespace ktraffic {

enum class SweepMethod { Recursive, Integrate };

inline const char* to_string(SweepMethod m) { return m == SweepMethod::Recursive ? "recursive" : "integrate"; }

enum class Units { Dimensionless, Physical };

struct DiagramPoint {
  double rho = 0.0;
  double q = 0.0;
  double u = 1.0;
  Phase phase = Phase::Free;
  bool converged = true;  // false when the integrator hit its horizon first
};

struct Diagram {
  int n = 0;
  SweepMethod method = SweepMethod::Recursive;
  Units units = Units::Dimensionless;
  std::vector<DiagramPoint> points;
  double sigma = 0.0;
  double q_max = 0.0;
  bool sigma_degenerate = false;
  bool sigma_found = false;
};

/// Speed threshold separating free flow (u = u_max) from congestion.
inline constexpr double kFreeSpeedTol = 1e-9;

/// `points` uniform samples of [0,1] with rho = 1/2 inserted if missing.
inline std::vector<double> default_grid(int points = 201) {
  if (points < 2) throw InvalidParameter("density grid needs at least 2 points");
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(points) + 1);
  for (int i = 0; i < points; ++i) grid.push_back(static_cast<double>(i) / (points - 1));
  grid.back() = 1.0;
  if (!std::binary_search(grid.begin(), grid.end(), 0.5)) {
    grid.insert(std::upper_bound(grid.begin(), grid.end(), 0.5), 0.5);
  }
  return grid;
}

/// Sweep configuration for the Integrate method. A coarser step than the
/// trajectory default is fine: RK4 fixed points are exactly the equilibria.
inline IntegrationConfig default_sweep_config() {
  IntegrationConfig cfg;
  cfg.dt = 0.1;
  cfg.t_final = 1e5;
  cfg.steady_tol = 1e-15;  // relaxation rate is eta0 rho^2, tiny near rho = 0
  cfg.max_steps = 2'000'000;
  return cfg;
}

struct SweepOptions {
  IntegrationConfig integration = default_sweep_config();
  ModelParams params{};
  int jobs = 1;
};

namespace detail {

inline DiagramPoint sample_point(int n, double rho, SweepMethod method, const SweepOptions& options,
                                 const SpeedLattice& lattice) {
  DiagramPoint p;
  p.rho = rho;
  if (method == SweepMethod::Recursive) {
    const EquilibriumResult eq = equilibrium_recursive(n, rho, options.params);
    const Observables obs = observables(eq.f_inf, lattice);
    p.q = obs.q;
    p.u = obs.u;
    p.phase = eq.phase;
  } else {
    ModelParams params = options.params;
    params.n = n;
    const SteadyResult res = integrate_to_steady(uniform_state(n, rho), options.integration, params);
    const Observables obs = observables(res.state, lattice);
    p.q = obs.q;
    p.u = obs.u;
    p.converged = res.converged;
    p.phase = p.u >= 1.0 - kFreeSpeedTol ? Phase::Free : Phase::Congested;
  }
  return p;
}

}  // namespace detail

/// Largest density of the initial free-flow run, i.e. where u stays >= 1 - tol.
struct SigmaEstimate {
  double sigma = 0.0;
  bool degenerate = false;  // free phase spans the whole grid
};

inline SigmaEstimate detect_sigma(const Diagram& diagram, double u_tol = kFreeSpeedTol) {
  const auto& pts = diagram.points;
  if (pts.size() < 3) throw MalformedDiagram("sigma detection needs at least 3 points");
  std::size_t i = 0;
  while (i < pts.size() && pts[i].rho <= 0.0) ++i;
  if (i == pts.size() || pts[i].u < 1.0 - u_tol)
    throw MalformedDiagram("no free phase: speed already below maximum at the first positive density");
  while (i + 1 < pts.size() && pts[i + 1].u >= 1.0 - u_tol) ++i;
  return SigmaEstimate{pts[i].rho, i + 1 == pts.size()};
}

/// Fundamental and speed diagram at every grid density. Points are computed
/// independently (optionally on `jobs` threads) and stored in grid order.
inline Diagram sweep(int n, const std::vector<double>& grid, SweepMethod method,
                     const SweepOptions& options = {}) {
  if (n < 2) throw InvalidParameter("sweep: n must be >= 2");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    require_unit_density(grid[i]);
    if (i > 0 && !(grid[i] > grid[i - 1])) throw InvalidParameter("sweep: grid must be sorted and deduplicated");
  }
  const SpeedLattice lattice(n);
  Diagram d;
  d.n = n;
  d.method = method;
  d.points.resize(grid.size());

  const int workers = std::clamp(options.jobs, 1, static_cast<int>(std::max<std::size_t>(grid.size(), 1)));
  if (workers == 1) {
    for (std::size_t i = 0; i < grid.size(); ++i)
      d.points[i] = detail::sample_point(n, grid[i], method, options, lattice);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = next++; i < grid.size(); i = next++)
            d.points[i] = detail::sample_point(n, grid[i], method, options, lattice);
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  for (const auto& p : d.points) d.q_max = std::max(d.q_max, p.q);
  d.sigma = std::numeric_limits<double>::quiet_NaN();
  if (d.points.size() >= 3) {
    try {
      const SigmaEstimate s = detect_sigma(d);
      d.sigma = s.sigma;
      d.sigma_degenerate = s.degenerate;
      d.sigma_found = true;
    } catch (const MalformedDiagram&) {
      // reported through sigma_found; points stay usable
    }
  }
  return d;
}

/// rho -> veh/km, u -> km/h, q -> veh/h.
inline Diagram rescale_dimensional(const Diagram& diagram, const ModelParams& params) {
  if (diagram.units == Units::Physical) return diagram;
  Diagram out = diagram;
  out.units = Units::Physical;
  for (auto& p : out.points) {
    p.rho *= params.rho_max;
    p.u *= params.v_max;
    p.q *= params.rho_max * params.v_max;
  }
  out.sigma *= params.rho_max;
  out.q_max *= params.rho_max * params.v_max;
  return out;
}

}  // namespace ktraffic

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ktraffic/diagrams.hpp"
#include "ktraffic/dynamics.hpp"
#include "ktraffic/equilibrium.hpp"
#include "ktraffic/format.hpp"
#include "ktraffic/lattice_games.hpp"

namespace ktraffic {

struct VerifyOptions {
  int n_min = 2;
  int n_max = 6;
  std::uint64_t seed = 20130101;
  ModelParams params{};
  /// Negative control: perturb one table entry before the stochasticity check.
  bool inject_corrupt_table = false;
};

struct GroupResult {
  std::string name;
  bool passed = true;
  std::string detail;
};

namespace verify_detail {

inline std::vector<double> unit_grid(int points) {
  std::vector<double> g;
  for (int i = 0; i < points; ++i) g.push_back(static_cast<double>(i) / (points - 1));
  return g;
}

inline GroupResult stochasticity(const VerifyOptions& opt) {
  GroupResult r{"stochasticity", true, {}};
  double worst = 0.0;
  int support_violations = 0;
  for (int n = opt.n_min; n <= opt.n_max; ++n) {
    for (double rho : unit_grid(101)) {
      GameTable table = build_game_table(n, rho);
      if (opt.inject_corrupt_table) table.at(1, 1, 1) += 1e-3;
      for (int h = 1; h <= n; ++h) {
        for (int k = 1; k <= n; ++k) {
          worst = std::max(worst, std::abs(table.row_sum(h, k) - 1.0));
          for (int j = 1; j <= n; ++j) {
            const double a = table(h, k, j);
            const bool allowed = h <= k ? (j == h || j == h + 1) : (j == h || j == k);
            if (a < 0.0 || a > 1.0 || (a > 0.0 && !allowed)) ++support_violations;
          }
        }
      }
    }
  }
  r.passed = worst == 0.0 && support_violations == 0;
  r.detail = "max |row sum - 1| = " + format_number(worst) + ", support violations = " +
             std::to_string(support_violations);
  return r;
}

inline GroupResult rhs_sum(const VerifyOptions& opt, std::mt19937_64& rng) {
  GroupResult r{"rhs-sum-zero", true, {}};
  double worst = 0.0;
  for (int n = opt.n_min; n <= opt.n_max; ++n) {
    for (int draw = 0; draw < 50; ++draw) {
      const KineticState s = random_simplex_state(n, unit_uniform(rng), rng);
      const Vector d = rhs(s, opt.params);
      double sum = 0.0;
      for (double x : d) sum += x;
      worst = std::max(worst, std::abs(sum));
    }
  }
  r.passed = worst <= 1e-13 * opt.params.eta0;
  r.detail = "max |sum rhs| = " + format_number(worst);
  return r;
}

inline GroupResult conservation(const VerifyOptions& opt, std::mt19937_64& rng) {
  GroupResult r{"conservation-positivity", true, {}};
  double drift = 0.0;
  double min_pre = 0.0;
  double clamp = 0.0;
  for (int n = opt.n_min; n <= opt.n_max; ++n) {
    for (double rho : {0.2, 0.5, 0.8}) {
      const KineticState f0 = random_simplex_state(n, rho, rng);
      StepStats stats;
      const KineticState end = integrate_to_time(f0, 100.0, 0.01, opt.params, &stats);
      drift = std::max({drift, stats.max_density_drift, std::abs(end.density() - f0.density())});
      min_pre = std::min(min_pre, stats.min_component_preclamp);
      clamp = std::max(clamp, stats.max_clamp_change);
    }
  }
  r.passed = drift <= 1e-10 && min_pre >= -1e-12 && clamp <= 1e-12;
  r.detail = "max density drift = " + format_number(drift) + ", min pre-clamp component = " + format_number(min_pre);
  return r;
}

inline GroupResult continuity(const VerifyOptions& opt, std::mt19937_64& rng) {
  GroupResult r{"continuity-estimate", true, {}};
  int failures = 0;
  int cases = 0;
  double worst_ratio = 0.0;
  IntegrationConfig cfg;
  for (int draw = 0; draw < 100; ++draw) {
    const int n = opt.n_min + static_cast<int>(rng() % static_cast<std::uint64_t>(opt.n_max - opt.n_min + 1));
    const double rho = unit_uniform(rng);
    const KineticState f0 = random_simplex_state(n, rho, rng);
    KineticState g0 = random_simplex_state(n, rho, rng);
    // same density to the last bit
    g0.f.back() += f0.density() - g0.density();
    g0.f.back() = std::max(g0.f.back(), 0.0);
    if (std::abs(g0.density() - f0.density()) > 1e-12) continue;
    for (double t : {0.5, 1.0, 2.0}) {
      const ContinuityGap gap = continuity_gap(f0, g0, t, opt.params, cfg);
      ++cases;
      if (!gap.holds()) ++failures;
      if (gap.bound > 0.0) worst_ratio = std::max(worst_ratio, gap.lhs / gap.bound);
    }
  }
  r.passed = failures == 0 && cases > 0;
  r.detail = std::to_string(cases) + " cases, max lhs/bound = " + format_number(worst_ratio);
  return r;
}

inline GroupResult residual(const VerifyOptions& opt) {
  GroupResult r{"equilibrium-residual", true, {}};
  double worst = 0.0;
  for (int n = opt.n_min; n <= opt.n_max; ++n)
    for (double rho : unit_grid(101))
      worst = std::max(worst, norm1(rhs(equilibrium_recursive(n, rho, opt.params).f_inf, opt.params)));
  r.passed = worst <= 1e-12;
  r.detail = "max ||rhs(f_inf)||_1 = " + format_number(worst);
  return r;
}

inline GroupResult uniqueness(const VerifyOptions& opt) {
  GroupResult r{"uniqueness", true, {}};
  int bad = 0;
  double worst = 0.0;
  for (int n = opt.n_min; n <= std::min(opt.n_max, kBruteForceMaxN); ++n) {
    for (int i = 1; i <= 20; ++i) {
      const double rho = i / 20.0;
      const auto candidates = equilibrium_bruteforce(n, rho, opt.params);
      const auto reference = equilibrium_recursive(n, rho, opt.params);
      int stable = 0;
      for (const auto& c : candidates) {
        if (!c.stable) continue;
        ++stable;
        worst = std::max(worst, distance1(c.f, reference.f_inf));
      }
      if (stable != 1) ++bad;
    }
  }
  r.passed = bad == 0 && worst <= 1e-10;
  r.detail = std::to_string(bad) + " (n,rho) pairs without a unique stable equilibrium, max deviation = " +
             format_number(worst);
  return r;
}

inline GroupResult attractivity(const VerifyOptions& opt, std::mt19937_64& rng) {
  GroupResult r{"attractivity", true, {}};
  IntegrationConfig cfg = default_sweep_config();
  double worst = 0.0;
  int unconverged = 0;
  for (int n = opt.n_min; n <= opt.n_max; ++n) {
    for (double rho : {0.1, 0.3, 0.7, 0.9}) {
      const Vector target = equilibrium_recursive(n, rho, opt.params).f_inf;
      for (int draw = 0; draw < 5; ++draw) {
        const SteadyResult res = integrate_to_steady(random_simplex_state(n, rho, rng), cfg, opt.params);
        if (!res.converged) ++unconverged;
        worst = std::max(worst, distance1(res.state.f, target));
      }
    }
  }
  r.passed = worst <= 1e-6 && unconverged == 0;
  r.detail = "max ||f(T) - f_inf||_1 = " + format_number(worst) + ", unconverged = " + std::to_string(unconverged);
  return r;
}

inline GroupResult sigma(const VerifyOptions& opt) {
  GroupResult r{"critical-density", true, {}};
  double worst = 0.0;
  for (int n = opt.n_min; n <= opt.n_max; ++n) {
    const Diagram d = sweep(n, default_grid(), SweepMethod::Recursive);
    worst = std::max(worst, std::abs(d.sigma - 0.5));
  }
  r.passed = worst <= 0.005;
  r.detail = "max |sigma - 1/2| = " + format_number(worst);
  return r;
}

}  // namespace verify_detail

/// Runs every invariant group; each result carries a one-line summary.
inline std::vector<GroupResult> run_verify(const VerifyOptions& opt) {
  if (opt.n_min < 2 || opt.n_max < opt.n_min) throw InvalidParameter("verify: need 2 <= n_min <= n_max");
  opt.params.validate();
  std::mt19937_64 rng(opt.seed);
  std::vector<GroupResult> out;
  out.push_back(verify_detail::stochasticity(opt));
  out.push_back(verify_detail::rhs_sum(opt, rng));
  out.push_back(verify_detail::conservation(opt, rng));
  out.push_back(verify_detail::continuity(opt, rng));
  out.push_back(verify_detail::residual(opt));
  out.push_back(verify_detail::uniqueness(opt));
  out.push_back(verify_detail::attractivity(opt, rng));
  out.push_back(verify_detail::sigma(opt));
  return out;
}

}  // namespace ktraffic

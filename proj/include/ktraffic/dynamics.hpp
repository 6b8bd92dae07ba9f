#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ktraffic/error.hpp"
#include "ktraffic/format.hpp"
#include "ktraffic/lattice_games.hpp"

namespace ktraffic {

using Vector = std::vector<double>;

/// Components in (-kClampTolerance, 0) are clamped; anything lower aborts.
inline constexpr double kClampTolerance = 1e-12;

struct KineticState {
  Vector f;
  double t = 0.0;

  int n() const { return static_cast<int>(f.size()); }
  double density() const { return std::accumulate(f.begin(), f.end(), 0.0); }
};

struct Observables {
  double rho = 0.0;
  double q = 0.0;
  double u = 1.0;
};

struct IntegrationConfig {
  double dt = 0.01;
  double t_final = 1e4;
  double steady_tol = 1e-10;
  long long max_steps = 10'000'000;

  void validate() const {
    if (!(dt > 0.0)) throw InvalidParameter("dt must be positive");
    if (!(steady_tol > 0.0)) throw InvalidParameter("steady_tol must be positive");
    if (!(t_final >= 0.0)) throw InvalidParameter("t_final must be nonnegative");
    if (max_steps < 0) throw InvalidParameter("max_steps must be nonnegative");
  }
};

inline double norm1(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s;
}

inline double distance1(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

inline void require_valid_state(std::span<const double> f) {
  if (f.size() < 2) throw InvalidParameter("state needs at least two speed classes");
  double sum = 0.0;
  for (double x : f) {
    if (!std::isfinite(x)) throw DomainError("state has non-finite component");
    if (x < -kClampTolerance) throw DomainError("state has negative component " + format_number(x));
    sum += x;
  }
  if (sum > 1.0 + 1e-12) throw DomainError("state density exceeds 1: " + format_number(sum));
}

namespace detail {

/// Gain term sum_{h,k} A^j_hk f_h f_k accumulated into `gain`.
inline void accumulate_gain(const SparseGameTable& table, std::span<const double> f, std::span<double> gain) {
  const int n = table.n();
  std::fill(gain.begin(), gain.end(), 0.0);
  for (int h = 0; h < n; ++h) {
    const double fh = f[static_cast<std::size_t>(h)];
    if (fh == 0.0) continue;
    for (int k = 0; k < n; ++k) {
      const double w = fh * f[static_cast<std::size_t>(k)];
      const auto& cell = table.outcomes(h, k);
      gain[static_cast<std::size_t>(cell[0].target)] += cell[0].prob * w;
      gain[static_cast<std::size_t>(cell[1].target)] += cell[1].prob * w;
    }
  }
}

inline double clamp_density(double rho) { return std::clamp(rho, 0.0, 1.0); }

}  // namespace detail

/// df_j/dt = eta[rho] (sum_{h,k} A^j_hk[rho] f_h f_k - rho f_j), rho = sum f.
/// Only the table argument is clamped to [0,1]; eta and the loss term use the
/// raw sum so that sum_j rhs_j = 0 holds even after round-off pushes it past 1.
inline void rhs_into(std::span<const double> f, const ModelParams& params, std::span<double> out) {
  const double rho = std::accumulate(f.begin(), f.end(), 0.0);
  if (!std::isfinite(rho)) throw IntegrationDiverged("non-finite state");
  const SparseGameTable table(static_cast<int>(f.size()), detail::clamp_density(rho));
  detail::accumulate_gain(table, f, out);
  const double eta = params.eta0 * rho;
  for (std::size_t j = 0; j < f.size(); ++j) out[j] = eta * (out[j] - rho * f[j]);
}

inline Vector rhs(std::span<const double> f, const ModelParams& params) {
  Vector out(f.size());
  rhs_into(f, params, out);
  return out;
}

inline Vector rhs(const KineticState& state, const ModelParams& params) { return rhs(state.f, params); }

/// Per-trajectory diagnostics for the conservation and positivity guarantees.
struct StepStats {
  double min_component_preclamp = std::numeric_limits<double>::infinity();
  double max_clamp_change = 0.0;
  double max_density_drift = 0.0;
};

/// Clamp tiny negative components and move the clamped mass into the largest one.
inline void apply_positivity_policy(Vector& f, StepStats* stats = nullptr) {
  double deficit = 0.0;
  double min_value = std::numeric_limits<double>::infinity();
  for (double& x : f) {
    min_value = std::min(min_value, x);
    if (x < -kClampTolerance)
      throw IntegrationDiverged("positivity violated: component " + format_number(x) + " below -1e-12");
    if (x < 0.0) {
      deficit += x;
      if (stats) stats->max_clamp_change = std::max(stats->max_clamp_change, -x);
      x = 0.0;
    }
  }
  if (deficit != 0.0) *std::max_element(f.begin(), f.end()) += deficit;
  if (stats) stats->min_component_preclamp = std::min(stats->min_component_preclamp, min_value);
}

namespace detail {

/// Classical RK4 without the positivity policy.
inline Vector rk4_raw(std::span<const double> y, double dt, const ModelParams& params) {
  const std::size_t n = y.size();
  Vector k1(n), k2(n), k3(n), k4(n), tmp(n);
  rhs_into(y, params, k1);
  for (std::size_t j = 0; j < n; ++j) tmp[j] = y[j] + 0.5 * dt * k1[j];
  rhs_into(tmp, params, k2);
  for (std::size_t j = 0; j < n; ++j) tmp[j] = y[j] + 0.5 * dt * k2[j];
  rhs_into(tmp, params, k3);
  for (std::size_t j = 0; j < n; ++j) tmp[j] = y[j] + dt * k3[j];
  rhs_into(tmp, params, k4);
  Vector out(n);
  for (std::size_t j = 0; j < n; ++j) {
    out[j] = y[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    if (!std::isfinite(out[j])) throw IntegrationDiverged("non-finite value after RK4 step");
  }
  return out;
}

}  // namespace detail

/// One classical RK4 step followed by the positivity policy.
inline KineticState step(const KineticState& state, double dt, const ModelParams& params, StepStats* stats = nullptr) {
  if (!(dt > 0.0)) throw InvalidParameter("dt must be positive");
  KineticState next{detail::rk4_raw(state.f, dt, params), state.t + dt};
  apply_positivity_policy(next.f, stats);
  if (stats) {
    const double drift = std::abs(next.density() - state.density());
    stats->max_density_drift = std::max(stats->max_density_drift, drift);
  }
  return next;
}

struct SteadyResult {
  KineticState state;
  bool converged = false;
  long long steps = 0;
  double residual = 0.0;  // ||rhs||_1 at the returned state
  StepStats stats;
};

using StateObserver = std::function<void(const KineticState&, long long step)>;

/// Integrate until ||rhs||_1 < steady_tol, t_final, or max_steps.
/// The observer (if any) sees the initial state and every accepted step.
inline SteadyResult integrate_to_steady(const KineticState& f0, const IntegrationConfig& config,
                                        const ModelParams& params, const StateObserver& observer = {}) {
  config.validate();
  require_valid_state(f0.f);
  SteadyResult result;
  result.state = f0;
  const double rho0 = f0.density();
  Vector r(f0.f.size());
  if (observer) observer(result.state, 0);
  while (true) {
    rhs_into(result.state.f, params, r);
    result.residual = norm1(r);
    if (!std::isfinite(result.residual)) throw IntegrationDiverged("non-finite right-hand side");
    if (result.residual < config.steady_tol) {
      result.converged = true;
      break;
    }
    if (result.steps >= config.max_steps || result.state.t >= config.t_final - 1e-12 * config.dt) break;
    const double h = std::min(config.dt, config.t_final - result.state.t);
    result.state = step(result.state, h, params, &result.stats);
    ++result.steps;
    result.stats.max_density_drift =
        std::max(result.stats.max_density_drift, std::abs(result.state.density() - rho0));
    if (observer) observer(result.state, result.steps);
  }
  return result;
}

/// Advance exactly to time t (last step shortened) without a steady-state stop.
inline KineticState integrate_to_time(const KineticState& f0, double t, double dt, const ModelParams& params,
                                      StepStats* stats = nullptr) {
  if (!(dt > 0.0)) throw InvalidParameter("dt must be positive");
  KineticState s = f0;
  const double t_end = f0.t + t;
  while (s.t < t_end - 1e-12 * dt) s = step(s, std::min(dt, t_end - s.t), params, stats);
  s.t = t_end;
  return s;
}

/// rho, flux and mean speed; u := 1 at rho = 0 by continuity.
inline Observables observables(std::span<const double> f, const SpeedLattice& lattice) {
  if (static_cast<int>(f.size()) != lattice.size()) throw InvalidParameter("state and lattice sizes differ");
  Observables obs;
  for (std::size_t j = 0; j < f.size(); ++j) {
    obs.rho += f[j];
    obs.q += lattice.speeds()[j] * f[j];
  }
  obs.u = obs.rho > 0.0 ? std::clamp(obs.q / obs.rho, 0.0, 1.0) : 1.0;
  return obs;
}

inline Observables observables(const KineticState& state, const SpeedLattice& lattice) {
  return observables(state.f, lattice);
}

struct ContinuityGap {
  double lhs = 0.0;
  double bound = 0.0;
  bool holds() const { return lhs <= bound; }
};

/// Both sides of the a-priori continuity estimate
///   ||g(t)-f(t)||_1 + ||g'(t)-f'(t)||_1 <= (1+3 eta0) e^{3 eta0 t} ||g0-f0||_1.
/// With eta[rho] = eta0 rho on [0,1] the sup of eta is eta0 itself.
inline ContinuityGap continuity_gap(const KineticState& f0, const KineticState& g0, double t,
                                    const ModelParams& params, const IntegrationConfig& config) {
  if (f0.f.size() != g0.f.size()) throw PreconditionError("continuity_gap: states have different sizes");
  require_valid_state(f0.f);
  require_valid_state(g0.f);
  if (std::abs(f0.density() - g0.density()) > 1e-12)
    throw PreconditionError("continuity_gap: initial data must share the same density");
  if (!(t >= 0.0)) throw InvalidParameter("continuity_gap: t must be nonnegative");
  const KineticState ft = integrate_to_time(f0, t, config.dt, params);
  const KineticState gt = integrate_to_time(g0, t, config.dt, params);
  const Vector dft = rhs(ft, params);
  const Vector dgt = rhs(gt, params);
  ContinuityGap gap;
  gap.lhs = distance1(gt.f, ft.f) + distance1(dgt, dft);
  gap.bound = (1.0 + 3.0 * params.eta0) * std::exp(3.0 * params.eta0 * t) * distance1(g0.f, f0.f);
  return gap;
}

inline KineticState uniform_state(int n, double rho) {
  if (n < 2) throw InvalidParameter("n must be >= 2");
  require_unit_density(rho);
  return KineticState{Vector(static_cast<std::size_t>(n), rho / n), 0.0};
}

/// Uniform double in [0,1) from the top 53 bits; bit-stable across standard libraries.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform point on the simplex {f >= 0, sum f = rho} by stick-breaking.
inline KineticState random_simplex_state(int n, double rho, std::mt19937_64& rng) {
  if (n < 2) throw InvalidParameter("n must be >= 2");
  require_unit_density(rho);
  Vector f(static_cast<std::size_t>(n));
  double remaining = 1.0;
  for (int k = 0; k < n - 1; ++k) {
    // Beta(1, n-1-k) by inversion
    const double b = n - 1 - k;
    const double piece = 1.0 - std::pow(1.0 - unit_uniform(rng), 1.0 / b);
    f[static_cast<std::size_t>(k)] = remaining * piece;
    remaining -= f[static_cast<std::size_t>(k)];
  }
  f.back() = std::max(remaining, 0.0);
  for (double& x : f) x *= rho;
  return KineticState{std::move(f), 0.0};
}

/// CSV header `t,f_1,...,f_n,rho,q,u`.
inline void write_trajectory_header(std::ostream& out, int n) {
  out << 't';
  for (int j = 1; j <= n; ++j) out << ",f_" << j;
  out << ",rho,q,u\n";
}

inline void write_trajectory_row(std::ostream& out, const KineticState& state, const SpeedLattice& lattice) {
  out << format_number(state.t);
  for (double x : state.f) out << ',' << format_number(x);
  const Observables obs = observables(state, lattice);
  out << ',' << format_number(obs.rho) << ',' << format_number(obs.q) << ',' << format_number(obs.u) << '\n';
}

}  // namespace ktraffic

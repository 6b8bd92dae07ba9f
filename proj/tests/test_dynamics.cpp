#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "ktraffic/dynamics.hpp"
#include "ktraffic/equilibrium.hpp"

namespace ktraffic {
namespace {

// Independent n = 2 expansion of the gain terms from the eight table entries:
//   A[1][1] = (rho, 1-rho), A[1][2] = (rho, 1-rho), A[2][1] = (rho, 1-rho), A[2][2] = (0, 1)
Vector hand_expanded_rhs_n2(double f1, double f2, double eta0) {
  const double rho = f1 + f2;
  const double gain1 = rho * f1 * f1 + rho * f1 * f2 + rho * f2 * f1;
  const double gain2 = (1 - rho) * f1 * f1 + (1 - rho) * f1 * f2 + (1 - rho) * f2 * f1 + 1.0 * f2 * f2;
  return {eta0 * rho * (gain1 - rho * f1), eta0 * rho * (gain2 - rho * f2)};
}

TEST(Rhs, MatchesHandExpansionForTwoClasses) {
  const ModelParams params;
  const Vector f{0.2, 0.5};
  const Vector got = rhs(f, params);
  const Vector want = hand_expanded_rhs_n2(0.2, 0.5, 1.0);
  EXPECT_NEAR(got[0], want[0], 1e-15);
  EXPECT_NEAR(got[1], want[1], 1e-15);
}

TEST(Rhs, EmptyRoadIsFrozen) {
  const Vector d = rhs(Vector{0.0, 0.0}, ModelParams{});
  EXPECT_EQ(d[0], 0.0);
  EXPECT_EQ(d[1], 0.0);
}

TEST(Rhs, VanishesAtRecursiveEquilibrium) {
  for (int n = 2; n <= 8; ++n)
    for (double rho : {0.1, 0.5, 0.62, 0.9, 1.0}) {
      const auto eq = equilibrium_recursive(n, rho);
      EXPECT_LE(norm1(rhs(eq.f_inf, ModelParams{})), 1e-12) << n << ' ' << rho;
    }
}

TEST(RhsProperty, SumsToZero) {
  std::mt19937_64 rng(11);
  for (double eta0 : {0.5, 1.0, 3.0}) {
    ModelParams params;
    params.eta0 = eta0;
    for (int n = 2; n <= 10; ++n) {
      for (int draw = 0; draw < 40; ++draw) {
        const auto s = random_simplex_state(n, unit_uniform(rng), rng);
        double sum = 0.0;
        for (double x : rhs(s, params)) sum += x;
        ASSERT_LE(std::abs(sum), 1e-13 * eta0) << "n=" << n;
      }
    }
  }
}

TEST(Step, FixedPointIsPreserved) {
  const auto eq = equilibrium_recursive(4, 0.8);
  const KineticState next = step(KineticState{eq.f_inf, 0.0}, 0.01, ModelParams{});
  EXPECT_LE(distance1(next.f, eq.f_inf), 1e-12);
  EXPECT_DOUBLE_EQ(next.t, 0.01);
}

TEST(Step, ConservesDensityPerStep) {
  std::mt19937_64 rng(3);
  for (int n = 2; n <= 8; ++n) {
    const auto s = random_simplex_state(n, 0.65, rng);
    const auto next = step(s, 0.01, ModelParams{});
    EXPECT_LE(std::abs(next.density() - s.density()), 1e-13);
  }
}

TEST(Step, RejectsNonPositiveTimeStep) {
  EXPECT_THROW(step(uniform_state(2, 0.5), 0.0, ModelParams{}), InvalidParameter);
}

TEST(Step, LongRunKeepsDensity) {
  KineticState s{{0.35, 0.35}, 0.0};
  StepStats stats;
  for (int i = 0; i < 10000; ++i) s = step(s, 0.01, ModelParams{}, &stats);
  EXPECT_NEAR(s.density(), 0.7, 1e-10);
  EXPECT_LE(stats.max_density_drift, 1e-13);
}

TEST(PositivityPolicy, ClampsRoundOffAndKeepsMass) {
  Vector f{-5e-13, 0.3, 0.2};
  StepStats stats;
  apply_positivity_policy(f, &stats);
  EXPECT_EQ(f[0], 0.0);
  EXPECT_NEAR(f[0] + f[1] + f[2], 0.5 - 5e-13, 1e-16);
  EXPECT_EQ(stats.min_component_preclamp, -5e-13);
  EXPECT_LE(stats.max_clamp_change, 1e-12);
}

TEST(PositivityPolicy, AbortsOnRealViolation) {
  Vector f{-1e-9, 0.3};
  EXPECT_THROW(apply_positivity_policy(f), IntegrationDiverged);
}

TEST(Step, NonFiniteStateDiverges) {
  KineticState s{{std::nan(""), 0.3}, 0.0};
  EXPECT_THROW(step(s, 0.01, ModelParams{}), IntegrationDiverged);
}

// Fourth-order check: errors at dt and dt/2 against a dt/16 reference.
TEST(Integrator, IsFourthOrder) {
  const ModelParams params;
  const KineticState f0{{0.25, 0.05, 0.1, 0.2}, 0.0};
  const double T = 4.0;
  const KineticState ref = integrate_to_time(f0, T, 0.4 / 16, params);
  const KineticState coarse = integrate_to_time(f0, T, 0.4, params);
  const KineticState fine = integrate_to_time(f0, T, 0.2, params);
  const double e1 = distance1(coarse.f, ref.f);
  const double e2 = distance1(fine.f, ref.f);
  ASSERT_GT(e2, 0.0);
  EXPECT_NEAR(e1 / e2, 16.0, 2.5) << e1 << ' ' << e2;
}

TEST(IntegrateToSteady, CongestedTwoClass) {
  IntegrationConfig cfg;
  const auto res = integrate_to_steady(KineticState{{0.35, 0.35}, 0.0}, cfg, ModelParams{});
  ASSERT_TRUE(res.converged);
  EXPECT_NEAR(res.state.f[0], 0.4, 1e-8);
  EXPECT_NEAR(res.state.f[1], 0.3, 1e-8);
}

TEST(IntegrateToSteady, FreeTwoClass) {
  IntegrationConfig cfg;
  cfg.t_final = 1e5;
  const auto res = integrate_to_steady(KineticState{{0.15, 0.15}, 0.0}, cfg, ModelParams{});
  ASSERT_TRUE(res.converged);
  EXPECT_NEAR(res.state.f[0], 0.0, 1e-6);
  EXPECT_NEAR(res.state.f[1], 0.3, 1e-6);
}

TEST(IntegrateToSteady, ThreeClassMatchesHandEvaluatedQuadratic) {
  // f1 = 2 rho - 1, f2 from the j = 2 quadratic evaluated by hand, f3 by mass.
  const double rho = 0.75;
  const double f1 = 0.5;
  const double f2 = (-0.25 + std::sqrt(0.34375)) / 1.5;
  const Vector oracle{f1, f2, rho - f1 - f2};
  IntegrationConfig cfg;
  const auto res = integrate_to_steady(uniform_state(3, rho), cfg, ModelParams{});
  ASSERT_TRUE(res.converged);
  EXPECT_LE(distance1(res.state.f, oracle), 1e-6);
  EXPECT_LE(distance1(res.state.f, equilibrium_recursive(3, rho).f_inf), 1e-6);
}

TEST(IntegrateToSteady, StopsAtStepCap) {
  IntegrationConfig cfg;
  cfg.max_steps = 5;
  const auto res = integrate_to_steady(uniform_state(3, 0.4), cfg, ModelParams{});
  EXPECT_FALSE(res.converged);
  EXPECT_EQ(res.steps, 5);
}

TEST(IntegrateToSteady, EmptyRoadConvergesImmediately) {
  const auto res = integrate_to_steady(uniform_state(2, 0.0), IntegrationConfig{}, ModelParams{});
  EXPECT_TRUE(res.converged);
  EXPECT_EQ(res.steps, 0);
}

TEST(IntegrateToSteady, RejectsInvalidConfig) {
  IntegrationConfig cfg;
  cfg.dt = -1.0;
  EXPECT_THROW(integrate_to_steady(uniform_state(2, 0.5), cfg, ModelParams{}), InvalidParameter);
}

TEST(ConservationProperty, LongTrajectories) {
  std::mt19937_64 rng(5);
  for (int n : {2, 4, 7}) {
    for (double rho : {0.15, 0.5, 0.85}) {
      const auto f0 = random_simplex_state(n, rho, rng);
      StepStats stats;
      integrate_to_time(f0, 100.0, 0.01, ModelParams{}, &stats);
      EXPECT_LE(stats.max_density_drift, 1e-10);
      EXPECT_GE(stats.min_component_preclamp, -1e-12);
      EXPECT_LE(stats.max_clamp_change, 1e-12);
    }
  }
}

TEST(Observables, FreeFlowTwoClass) {
  const auto obs = observables(Vector{0.0, 0.3}, build_lattice(2));
  EXPECT_DOUBLE_EQ(obs.rho, 0.3);
  EXPECT_DOUBLE_EQ(obs.q, 0.3);
  EXPECT_DOUBLE_EQ(obs.u, 1.0);
}

TEST(Observables, CongestedTwoClass) {
  const auto obs = observables(Vector{0.4, 0.3}, build_lattice(2));
  EXPECT_DOUBLE_EQ(obs.rho, 0.7);
  EXPECT_DOUBLE_EQ(obs.q, 0.3);
  EXPECT_NEAR(obs.u, 3.0 / 7.0, 1e-15);
}

TEST(Observables, EmptyRoadExtendsSpeedByContinuity) {
  const auto obs = observables(Vector{0.0, 0.0, 0.0}, build_lattice(3));
  EXPECT_EQ(obs.rho, 0.0);
  EXPECT_EQ(obs.q, 0.0);
  EXPECT_EQ(obs.u, 1.0);
}

TEST(ContinuityGap, IdenticalDataGiveZero) {
  const KineticState f0{{0.35, 0.35}, 0.0};
  const auto gap = continuity_gap(f0, f0, 1.0, ModelParams{}, IntegrationConfig{});
  EXPECT_EQ(gap.lhs, 0.0);
  EXPECT_EQ(gap.bound, 0.0);
  EXPECT_TRUE(gap.holds());
}

TEST(ContinuityGap, TwoClassInstance) {
  const auto gap = continuity_gap(KineticState{{0.35, 0.35}, 0.0}, KineticState{{0.5, 0.2}, 0.0}, 1.0,
                                  ModelParams{}, IntegrationConfig{});
  EXPECT_NEAR(gap.bound, 4.0 * std::exp(3.0) * 0.3, 1e-12);
  EXPECT_LE(gap.lhs, gap.bound);
}

TEST(ContinuityGap, RejectsDensityMismatch) {
  EXPECT_THROW(continuity_gap(KineticState{{0.35, 0.35}, 0.0}, KineticState{{0.5, 0.3}, 0.0}, 1.0, ModelParams{},
                              IntegrationConfig{}),
               PreconditionError);
}

TEST(ContinuityGapProperty, EstimateHoldsOnRandomPairs) {
  std::mt19937_64 rng(77);
  for (int draw = 0; draw < 100; ++draw) {
    const int n = 2 + static_cast<int>(rng() % 5);
    const double rho = unit_uniform(rng);
    const auto f0 = random_simplex_state(n, rho, rng);
    auto g0 = random_simplex_state(n, rho, rng);
    g0.f.back() = std::max(0.0, g0.f.back() + f0.density() - g0.density());
    if (std::abs(g0.density() - f0.density()) > 1e-12) continue;
    const auto gap = continuity_gap(f0, g0, 1.0, ModelParams{}, IntegrationConfig{});
    ASSERT_LE(gap.lhs, gap.bound) << "draw " << draw;
  }
}

TEST(RandomSimplex, NonnegativeWithExactDensityAndDeterministic) {
  std::mt19937_64 a(9), b(9);
  for (int i = 0; i < 200; ++i) {
    const auto s = random_simplex_state(5, 0.6, a);
    const auto t = random_simplex_state(5, 0.6, b);
    EXPECT_EQ(s.f, t.f);
    for (double x : s.f) EXPECT_GE(x, 0.0);
    EXPECT_NEAR(s.density(), 0.6, 1e-15);
  }
}

TEST(RandomSimplex, MarginalMeanIsUniform) {
  std::mt19937_64 rng(21);
  const int n = 4;
  std::vector<double> mean(n, 0.0);
  const int draws = 20000;
  for (int i = 0; i < draws; ++i) {
    const auto s = random_simplex_state(n, 1.0, rng);
    for (int j = 0; j < n; ++j) mean[static_cast<std::size_t>(j)] += s.f[static_cast<std::size_t>(j)] / draws;
  }
  for (double m : mean) EXPECT_NEAR(m, 0.25, 0.01);
}

TEST(TrajectoryCsv, HeaderAndRow) {
  std::ostringstream out;
  write_trajectory_header(out, 2);
  write_trajectory_row(out, KineticState{{0.4, 0.3}, 1.5}, build_lattice(2));
  EXPECT_EQ(out.str(), "t,f_1,f_2,rho,q,u\n1.5,0.4,0.3,0.7,0.3,0.428571428571429\n");
}

}  // namespace
}  // namespace ktraffic

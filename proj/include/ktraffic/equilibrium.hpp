#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ktraffic/dynamics.hpp"
#include "ktraffic/error.hpp"
#include "ktraffic/lattice_games.hpp"

namespace ktraffic {

enum class Phase { Free, Congested };

inline const char* to_string(Phase p) { return p == Phase::Free ? "Free" : "Congested"; }

/// Phase boundary: rho <= 1/2 is free flow.
inline Phase phase_of(double rho) { return rho <= 0.5 ? Phase::Free : Phase::Congested; }

enum class Verdict { Stable, Unstable, Marginal };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Stable: return "Stable";
    case Verdict::Unstable: return "Unstable";
    case Verdict::Marginal: return "Marginal";
  }
  return "?";
}

inline constexpr double kEigTol = 1e-9;

/// Scalar quadratic a x^2 + b x + c = 0 governing one equilibrium component,
/// with the other components fixed at their equilibrium values.
struct BranchRecord {
  int j = 0;  // 1-based class index
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double discriminant = 0.0;
  double root = 0.0;
  bool larger_root = true;
};

struct StabilityReport {
  std::vector<double> jacobian_eigen_real_parts;  // full n x n spectrum
  int zero_mode_index = -1;                        // 0-based into the above
  double zero_mode_eigenvector_sum = 0.0;
  std::vector<double> restricted_real_parts;  // spectrum on {sum df = 0}
  Verdict verdict = Verdict::Marginal;
  std::string note;
};

struct EquilibriumResult {
  int n = 0;
  double rho = 0.0;
  Vector f_inf;
  std::vector<BranchRecord> branch_data;
  Phase phase = Phase::Free;
  bool stable = false;
  StabilityReport stability;
};

/// Stable root of rho (2 rho - 1 - f1) f1 = 0.
inline double equilibrium_f1(double rho) {
  require_unit_density(rho);
  return rho <= 0.5 ? 0.0 : 2.0 * rho - 1.0;
}

namespace detail {

/// Coefficients of the equilibrium quadratic for class j >= 2, given
/// prefix = (f_1, ..., f_{j-1}).
inline BranchRecord quadratic_for(int j, double rho, std::span<const double> prefix) {
  const double s_prev = std::accumulate(prefix.begin(), prefix.end(), 0.0);  // sum_{k<j}
  const double f_prev = prefix.back();                                       // f_{j-1}
  const double s_prev2 = s_prev - f_prev;                                    // sum_{k<j-1}
  BranchRecord rec;
  rec.j = j;
  rec.a = -rho;
  rec.b = (1.0 - 3.0 * rho) * s_prev + rho * (2.0 * rho - 1.0);
  rec.c = (1.0 - rho) * f_prev * (rho - s_prev2);
  rec.discriminant = rec.b * rec.b + 4.0 * rho * rec.c;
  return rec;
}

inline BranchRecord quadratic_for_first(double rho) {
  BranchRecord rec;
  rec.j = 1;
  rec.a = -rho;
  rec.b = rho * (2.0 * rho - 1.0);
  rec.c = 0.0;
  rec.discriminant = rec.b * rec.b;
  return rec;
}

/// Clamp round-off negatives of the discriminant; reject genuine ones.
inline double checked_sqrt_discriminant(const BranchRecord& rec) {
  const double scale = std::max({1.0, rec.b * rec.b, std::abs(4.0 * rec.a * rec.c)});
  if (rec.discriminant < -1e-14 * scale)
    throw InternalConsistency("negative discriminant " + format_number(rec.discriminant) + " at class " +
                              std::to_string(rec.j));
  return std::sqrt(std::max(rec.discriminant, 0.0));
}

/// Both roots of -rho x^2 + b x + c, larger first, without cancellation.
inline std::pair<double, double> roots_of(const BranchRecord& rec, double rho) {
  const double sq = checked_sqrt_discriminant(rec);
  double larger;
  double smaller;
  if (rec.b >= 0.0) {
    larger = (rec.b + sq) / (2.0 * rho);
    smaller = larger != 0.0 ? (-rec.c / rho) / larger : (rec.b - sq) / (2.0 * rho);
  } else {
    smaller = (rec.b - sq) / (2.0 * rho);
    larger = (-rec.c / rho) / smaller;
  }
  return {larger, smaller};
}

}  // namespace detail

struct QuadraticRoot {
  double f = 0.0;
  double delta = 0.0;
  BranchRecord record;
};

/// Larger (stable) root of the class-j equilibrium quadratic, 2 <= j, given
/// the already determined components f_1..f_{j-1}.
inline QuadraticRoot equilibrium_quadratic(int j, double rho, std::span<const double> prefix) {
  if (j < 2) throw InvalidParameter("equilibrium_quadratic: j must be >= 2");
  if (static_cast<int>(prefix.size()) != j - 1)
    throw InvalidParameter("equilibrium_quadratic: prefix must hold f_1..f_{j-1}");
  if (!(rho > 0.0 && rho <= 1.0)) throw DomainError("equilibrium_quadratic: rho must lie in (0,1]");
  double sum = 0.0;
  for (double x : prefix) {
    if (x < 0.0) throw PreconditionError("equilibrium_quadratic: negative prefix component");
    sum += x;
  }
  if (sum > rho + 1e-12) throw PreconditionError("equilibrium_quadratic: prefix exceeds density");
  BranchRecord rec = detail::quadratic_for(j, rho, prefix);
  rec.root = std::max(detail::roots_of(rec, rho).first, 0.0);
  rec.larger_root = true;
  return QuadraticRoot{rec.root, rec.discriminant, rec};
}

/// Analytic Jacobian d rhs_j / d f_i.
enum class JacobianMode {
  /// rho = sum f everywhere, so eta[rho] and A[rho] are differentiated too.
  Composite,
  /// eta and the table frozen at the given rho; loss written as f_j sum_k f_k.
  FrozenTable,
};

inline Eigen::MatrixXd jacobian(std::span<const double> f, double rho, const ModelParams& params,
                                JacobianMode mode = JacobianMode::Composite) {
  const int n = static_cast<int>(f.size());
  require_unit_density(rho);
  const SparseGameTable table(n, rho);
  const double mass = std::accumulate(f.begin(), f.end(), 0.0);
  Eigen::MatrixXd dgain = Eigen::MatrixXd::Zero(n, n);  // d gain_j / d f_i, table fixed
  Eigen::VectorXd gain = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd gain_rho = Eigen::VectorXd::Zero(n);  // d gain_j / d rho
  for (int h = 0; h < n; ++h) {
    for (int k = 0; k < n; ++k) {
      const double fh = f[static_cast<std::size_t>(h)];
      const double fk = f[static_cast<std::size_t>(k)];
      for (const Outcome& o : table.outcomes(h, k)) {
        gain(o.target) += o.prob * fh * fk;
        gain_rho(o.target) += o.slope * fh * fk;
        dgain(o.target, h) += o.prob * fk;
        dgain(o.target, k) += o.prob * fh;
      }
    }
  }
  Eigen::MatrixXd J(n, n);
  const double eta = params.eta0 * rho;
  for (int j = 0; j < n; ++j) {
    const double fj = f[static_cast<std::size_t>(j)];
    for (int i = 0; i < n; ++i) {
      const double kron = i == j ? 1.0 : 0.0;
      if (mode == JacobianMode::Composite) {
        // rhs_j = eta0 rho (gain_j(rho) - rho f_j), rho = sum f
        J(j, i) = params.eta0 * (gain(j) - rho * fj) +
                  eta * (dgain(j, i) + gain_rho(j) - fj - rho * kron);
      } else {
        J(j, i) = eta * (dgain(j, i) - fj - mass * kron);
      }
    }
  }
  return J;
}

/// Jacobian in the coordinates f_1..f_{n-1} of the invariant hyperplane
/// {sum df = 0} (basis e_i - e_n). The rho-derivative terms of the composite
/// convention are constant along 1^T and vanish here, so both conventions agree.
inline Eigen::MatrixXd restricted_jacobian(const Eigen::MatrixXd& J) {
  const Eigen::Index n = J.rows();
  Eigen::MatrixXd R(n - 1, n - 1);
  for (Eigen::Index i = 0; i < n - 1; ++i)
    for (Eigen::Index c = 0; c < n - 1; ++c) R(i, c) = J(i, c) - J(i, n - 1);
  return R;
}

/// Linear stability of the equilibrium f at density rho.
inline StabilityReport classify_stability(std::span<const double> f, double rho, const ModelParams& params) {
  StabilityReport report;
  const int n = static_cast<int>(f.size());
  const Eigen::MatrixXd J = jacobian(f, rho, params);

  Eigen::EigenSolver<Eigen::MatrixXd> full(J);
  const auto values = full.eigenvalues();
  report.jacobian_eigen_real_parts.resize(static_cast<std::size_t>(n));
  double smallest = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    report.jacobian_eigen_real_parts[static_cast<std::size_t>(i)] = values(i).real();
    if (std::abs(values(i).real()) < smallest) {
      smallest = std::abs(values(i).real());
      report.zero_mode_index = i;
    }
  }
  report.zero_mode_eigenvector_sum = std::abs(full.eigenvectors().col(report.zero_mode_index).sum());

  if (rho == 0.0) {
    report.restricted_real_parts.assign(static_cast<std::size_t>(n - 1), 0.0);
    report.verdict = Verdict::Marginal;
    report.note = "rho = 0: interaction rate vanishes, dynamics frozen";
    return report;
  }

  Eigen::EigenSolver<Eigen::MatrixXd> restricted(restricted_jacobian(J), false);
  bool any_positive = false;
  bool any_marginal = false;
  for (Eigen::Index i = 0; i < restricted.eigenvalues().size(); ++i) {
    const double re = restricted.eigenvalues()(i).real();
    report.restricted_real_parts.push_back(re);
    if (re > kEigTol) any_positive = true;
    else if (re >= -kEigTol) any_marginal = true;
  }
  std::sort(report.restricted_real_parts.begin(), report.restricted_real_parts.end());
  if (any_positive) {
    report.verdict = Verdict::Unstable;
  } else if (any_marginal) {
    report.verdict = Verdict::Marginal;
    report.note = "non-hyperbolic equilibrium: eigenvalue within eig_tol on the zero-sum hyperplane";
  } else {
    report.verdict = Verdict::Stable;
  }
  if (report.zero_mode_eigenvector_sum < 1e-8 && report.verdict != Verdict::Marginal)
    report.note = "mass-mode eigenvector has vanishing sum";
  return report;
}

inline StabilityReport classify_stability(const EquilibriumResult& eq, const ModelParams& params) {
  return classify_stability(eq.f_inf, eq.rho, params);
}

/// Stable if linearly stable, or non-hyperbolic while sitting on the larger
/// root of every scalar quadratic (negative leading coefficient).
inline bool counts_as_stable(const StabilityReport& report, const std::vector<BranchRecord>& branches) {
  if (report.verdict == Verdict::Stable) return true;
  if (report.verdict == Verdict::Unstable || branches.empty()) return false;
  return std::all_of(branches.begin(), branches.end(), [](const BranchRecord& b) { return b.larger_root; });
}

/// Unique stable equilibrium: f_1 by cases, f_j from the larger quadratic
/// root for 2 <= j <= n-1, and f_n by mass subtraction.
inline EquilibriumResult equilibrium_recursive(int n, double rho, const ModelParams& params = {}) {
  if (n < 2) throw InvalidParameter("equilibrium_recursive: n must be >= 2");
  require_unit_density(rho);
  EquilibriumResult eq;
  eq.n = n;
  eq.rho = rho;
  eq.phase = phase_of(rho);
  eq.f_inf.assign(static_cast<std::size_t>(n), 0.0);
  if (rho > 0.0) {
    BranchRecord first = detail::quadratic_for_first(rho);
    first.root = equilibrium_f1(rho);
    eq.branch_data.push_back(first);
    eq.f_inf[0] = first.root;
    for (int j = 2; j <= n - 1; ++j) {
      const QuadraticRoot r = equilibrium_quadratic(j, rho, std::span<const double>(eq.f_inf.data(), j - 1));
      eq.f_inf[static_cast<std::size_t>(j - 1)] = r.f;
      eq.branch_data.push_back(r.record);
    }
    double s = 0.0;
    for (int j = 0; j < n - 1; ++j) s += eq.f_inf[static_cast<std::size_t>(j)];
    eq.f_inf.back() = std::max(rho - s, 0.0);
  }
  eq.stability = classify_stability(eq.f_inf, rho, params);
  eq.stable = rho > 0.0 && counts_as_stable(eq.stability, eq.branch_data);
  return eq;
}

struct Candidate {
  Vector f;
  std::vector<BranchRecord> branches;
  StabilityReport stability;
  bool stable = false;
  double residual = 0.0;
};

inline constexpr int kBruteForceMaxN = 12;

/// Every nonnegative equilibrium reachable by choosing either root at every
/// level of the triangular system, with a stability verdict for each.
inline std::vector<Candidate> equilibrium_bruteforce(int n, double rho, const ModelParams& params = {}) {
  if (n < 2) throw InvalidParameter("equilibrium_bruteforce: n must be >= 2");
  if (n > kBruteForceMaxN)
    throw CapabilityError("brute-force enumeration is limited to n <= " + std::to_string(kBruteForceMaxN));
  if (!(rho > 0.0 && rho <= 1.0)) throw DomainError("equilibrium_bruteforce: rho must lie in (0,1]");

  constexpr double kNegTol = 1e-14;
  std::vector<Candidate> raw;
  Vector f(static_cast<std::size_t>(n), 0.0);
  std::vector<BranchRecord> branches;

  // depth-first over root choices for classes 1..n-1
  std::function<void(int)> descend = [&](int j) {
    if (j == n) {
      double s = 0.0;
      for (int i = 0; i < n - 1; ++i) s += f[static_cast<std::size_t>(i)];
      const double last = rho - s;
      if (last < -kNegTol) return;
      f.back() = std::max(last, 0.0);
      raw.push_back(Candidate{f, branches, {}, false, 0.0});
      return;
    }
    BranchRecord rec = j == 1 ? detail::quadratic_for_first(rho)
                              : detail::quadratic_for(j, rho, std::span<const double>(f.data(), j - 1));
    const double scale = std::max({1.0, rec.b * rec.b, std::abs(4.0 * rec.a * rec.c)});
    if (rec.discriminant < -1e-14 * scale) return;  // complex roots on this branch
    const auto [larger, smaller] = detail::roots_of(rec, rho);
    const bool tie = std::abs(larger - smaller) <= 1e-15;
    for (int pick = 0; pick < (tie ? 1 : 2); ++pick) {
      const double root = pick == 0 ? larger : smaller;
      if (root < -kNegTol) continue;
      rec.root = std::max(root, 0.0);
      rec.larger_root = pick == 0;
      f[static_cast<std::size_t>(j - 1)] = rec.root;
      branches.push_back(rec);
      descend(j + 1);
      branches.pop_back();
    }
    f[static_cast<std::size_t>(j - 1)] = 0.0;
  };
  descend(1);

  std::vector<Candidate> out;
  for (Candidate& c : raw) {
    const bool duplicate = std::any_of(out.begin(), out.end(), [&](const Candidate& o) {
      return distance1(o.f, c.f) <= 1e-13;
    });
    if (duplicate) continue;
    c.residual = norm1(rhs(c.f, params));
    if (c.residual > 1e-10)
      throw InternalConsistency("enumerated candidate is not an equilibrium, residual " + format_number(c.residual));
    c.stability = classify_stability(c.f, rho, params);
    c.stable = counts_as_stable(c.stability, c.branches);
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace ktraffic

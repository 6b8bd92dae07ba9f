#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "ktraffic/error.hpp"

namespace ktraffic {

/// Physical and model constants. Densities and speeds are dimensionless
/// everywhere inside the library; rho_max and v_max only rescale output.
struct ModelParams {
  int n = 2;
  double rho_max = 200.0;  // vehicles/km
  double v_max = 100.0;    // km/h
  double eta0 = 1.0;

  void validate() const {
    if (n < 2) throw InvalidParameter("number of speed classes must be >= 2, got " + std::to_string(n));
    if (!(eta0 > 0.0)) throw InvalidParameter("eta0 must be positive");
    if (!(rho_max > 0.0)) throw InvalidParameter("rho_max must be positive");
    if (!(v_max > 0.0)) throw InvalidParameter("v_max must be positive");
  }
};

inline void require_unit_density(double rho) {
  if (!(rho >= 0.0 && rho <= 1.0))
    throw DomainError("dimensionless density must lie in [0,1], got " + std::to_string(rho));
}

/// Uniform lattice of dimensionless speeds v_j = (j-1)/(n-1), j = 1..n.
class SpeedLattice {
 public:
  explicit SpeedLattice(int n) {
    if (n < 2) throw InvalidParameter("speed lattice needs n >= 2, got " + std::to_string(n));
    speeds_.resize(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) speeds_[static_cast<std::size_t>(j)] = static_cast<double>(j) / (n - 1);
    speeds_.back() = 1.0;
  }

  int size() const { return static_cast<int>(speeds_.size()); }
  /// 1-based.
  double speed(int j) const { return speeds_.at(static_cast<std::size_t>(j - 1)); }
  const std::vector<double>& speeds() const { return speeds_; }

 private:
  std::vector<double> speeds_;
};

inline SpeedLattice build_lattice(int n) { return SpeedLattice(n); }

/// eta = eta0 * rho.
inline double interaction_rate(double rho, const ModelParams& params) {
  require_unit_density(rho);
  return params.eta0 * rho;
}

/// One nonzero outcome of an (h,k) encounter: the candidate ends in class
/// `target` (0-based) with probability `prob`. `slope` is d prob / d rho.
struct Outcome {
  int target = 0;
  double prob = 0.0;
  double slope = 0.0;
};

/// Two-outcome form of the table of games. Every (h,k) pair has at most two
/// nonzero outcomes, so this is exact. Internal layout is 0-based.
class SparseGameTable {
 public:
  SparseGameTable(int n, double rho) : n_(n), rho_(rho), cells_(static_cast<std::size_t>(n) * n) {
    if (n < 2) throw InvalidParameter("table of games needs n >= 2, got " + std::to_string(n));
    require_unit_density(rho);
    const double keep = rho;
    const double other = 1.0 - rho;
    for (int h = 0; h < n; ++h) {
      for (int k = 0; k < n; ++k) {
        auto& cell = cells_[index(h, k)];
        if (h <= k) {
          if (h == n - 1) {
            cell = {Outcome{h, 1.0, 0.0}, Outcome{h, 0.0, 0.0}};
          } else {
            cell = {Outcome{h, keep, 1.0}, Outcome{h + 1, other, -1.0}};
          }
        } else {
          // faster candidate: queue behind the field vehicle or overtake
          cell = {Outcome{k, keep, 1.0}, Outcome{h, other, -1.0}};
        }
      }
    }
  }

  int n() const { return n_; }
  double rho() const { return rho_; }
  /// 0-based.
  const std::array<Outcome, 2>& outcomes(int h, int k) const { return cells_[index(h, k)]; }
  std::array<Outcome, 2>& mutable_outcomes(int h, int k) { return cells_[index(h, k)]; }

 private:
  std::size_t index(int h, int k) const { return static_cast<std::size_t>(h) * n_ + k; }

  int n_;
  double rho_;
  std::vector<std::array<Outcome, 2>> cells_;
};

/// Dense n x n x n table A[h][k][j] = P(v_h -> v_j | field vehicle at v_k).
/// Public indexing is 1-based.
class GameTable {
 public:
  GameTable(int n, double rho) : n_(n), rho_(rho), entries_(static_cast<std::size_t>(n) * n * n, 0.0) {
    const SparseGameTable sparse(n, rho);
    for (int h = 0; h < n; ++h)
      for (int k = 0; k < n; ++k)
        for (const Outcome& o : sparse.outcomes(h, k)) entries_[flat(h, k, o.target)] += o.prob;
  }

  int n() const { return n_; }
  double rho() const { return rho_; }

  double operator()(int h, int k, int j) const { return entries_.at(flat(h - 1, k - 1, j - 1)); }
  double& at(int h, int k, int j) { return entries_.at(flat(h - 1, k - 1, j - 1)); }

  /// Sum over j of A[h][k][j].
  double row_sum(int h, int k) const {
    double s = 0.0;
    for (int j = 1; j <= n_; ++j) s += (*this)(h, k, j);
    return s;
  }

  int support_size(int h, int k) const {
    int count = 0;
    for (int j = 1; j <= n_; ++j) count += (*this)(h, k, j) > 0.0 ? 1 : 0;
    return count;
  }

 private:
  std::size_t flat(int h, int k, int j) const {
    if (h < 0 || k < 0 || j < 0 || h >= n_ || k >= n_ || j >= n_) throw std::out_of_range("game table index");
    return (static_cast<std::size_t>(h) * n_ + k) * n_ + j;
  }

  int n_;
  double rho_;
  std::vector<double> entries_;
};

inline GameTable build_game_table(int n, double rho) { return GameTable(n, rho); }

}  // namespace ktraffic

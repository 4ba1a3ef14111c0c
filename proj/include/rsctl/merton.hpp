#pragma once

// Consumption-investment example with power utility and regime-switching market coefficients.
//
// Sign convention: the payoff E[int g(tau,s) c^gamma ds + h(tau) X_T^gamma] is maximized; the
// PDE core minimizes, so merton_model() carries running cost -g c^gamma and terminal cost
// -h X^gamma, and its value field equals -phi x^gamma.

#include <cstdint>
#include <functional>
#include <vector>

#include "rsctl/grid.hpp"
#include "rsctl/model.hpp"

namespace rsctl {

struct MertonSpec {
  std::vector<double> drift;       ///< b(i), excess return of the risky asset
  std::vector<double> volatility;  ///< sigma(i) > 0
  double gamma = 0.5;              ///< risk exponent in (0, 1)
  std::function<double(double tau, double s)> consumption_weight;  ///< g(tau, s) >= 0
  std::function<double(double tau)> bequest_weight;                ///< h(tau) > 0
  Eigen::MatrixXd generator;       ///< constant Q
  double horizon = 1.0;

  int regimes() const { return static_cast<int>(drift.size()); }
  void validate() const;
  /// gamma b^2 / (2 (1 - gamma) sigma^2) for regime i.
  double growth(int regime) const;

  /// Two regimes, hyperbolic consumption weight 1/(1 + kappa (s - tau)), unit bequest weight.
  static MertonSpec hyperbolic(double kappa = 1.0);
  /// Same market with anchor-free weights g(s) = 1/(1 + kappa s), h = 1.
  static MertonSpec anchor_free(double kappa = 1.0);
};

/// phi_i(s) on the grid nodes (rows: time index, columns: regime), RK4 backward.
/// Weights are read as g(s, s) and h(T), which is exact for anchor-free data.
Eigen::MatrixXd solve_time_consistent(const MertonSpec& spec, const TimeGrid& times);

/// phi(tau; s, i) with g(tau, .) and h(tau) frozen at the anchor.
Eigen::MatrixXd solve_precommitted(const MertonSpec& spec, double tau, const TimeGrid& times);

/// phi(tau, s, i) for tau_idx <= s_idx on a shared grid.
struct EquilibriumPhi {
  TimeGrid times;
  std::vector<Eigen::MatrixXd> rows;  ///< rows[r](s_idx - r, i)
  std::vector<double> history;        ///< sup-norm diagonal change per iteration

  double at(int tau_idx, int s_idx, int regime) const { return rows[tau_idx](s_idx - tau_idx, regime); }
  double diagonal(int s_idx, int regime) const { return at(s_idx, s_idx, regime); }
  /// Diagonal at an arbitrary s by linear interpolation between nodes.
  double diagonal_at(double s, int regime) const;
};

EquilibriumPhi solve_equilibrium_ode(const MertonSpec& spec, const TimeGrid& times, double tol = 1e-12,
                                     int max_iter = 200);

struct MertonControls {
  double investment = 0.0;   ///< amount held in the risky asset
  double consumption = 0.0;  ///< consumption rate
};

/// Equilibrium pair from the diagonal phi(s, s, i).
MertonControls equilibrium_strategy(const MertonSpec& spec, double phi_diagonal, double s, double x, int regime);
/// Time-consistent pair (weights read at (s, s)).
MertonControls time_consistent_strategy(const MertonSpec& spec, double phi, double s, double x, int regime);
/// Pre-committed pair for anchor tau.
MertonControls precommitted_strategy(const MertonSpec& spec, double tau, double phi, double s, double x,
                                     int regime);

/// Minimization form of the example for the PDE stack; control = (risky amount, consumption).
Model merton_model(const MertonSpec& spec, double psi_clamp = 1e-8);

/// Grid with the homogeneity condition gamma V - x V_x = 0 at both edges.
SpatialGrid merton_grid(const MertonSpec& spec, double x_min, double x_max, int n_x, int buffer = 0);

/// Feedback in proportional form: control = (fraction_invested * x, fraction_consumed * x).
struct ProportionalStrategy {
  std::function<double(double s, int regime)> invested;
  std::function<double(double s, int regime)> consumed;
};

ProportionalStrategy equilibrium_fractions(const MertonSpec& spec, const EquilibriumPhi& phi);
ProportionalStrategy time_consistent_fractions(const MertonSpec& spec, const Eigen::MatrixXd& phi,
                                               const TimeGrid& times);

struct MonteCarloEstimate {
  double estimate = 0.0;
  double standard_error = 0.0;
  long paths = 0;
};

/// E[int_t^T g(t, s) c^gamma ds + h(t) X_T^gamma] from X(t) = x, alpha(t) = regime.
MonteCarloEstimate monte_carlo_payoff(const MertonSpec& spec, const ProportionalStrategy& strategy, double t,
                                      double x, int regime, long n_paths, std::uint64_t seed, double h = 1e-3,
                                      int workers = 1);

}  // namespace rsctl

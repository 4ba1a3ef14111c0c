#pragma once

// Recursive cost of a feedback strategy through its representation PDE, and the spike test
// of approximate local optimality.

#include <vector>

#include "rsctl/equilibrium_solver.hpp"
#include "rsctl/numerics.hpp"

namespace rsctl {

/// Theta(t; s, x, i) for one anchor t under a fixed strategy.
struct RecursiveCostField {
  double anchor = 0.0;
  ValueField theta;
  FeedbackStrategy strategy;
  ControlledCoefficient diffusion;

  /// J(t, x, i; Psi) = Y(t; t, x, i).
  double value(int x_idx, int regime) const { return theta(0, x_idx, regime); }
  /// Z = Theta_x * sigma under the strategy's control at that node.
  double z(int s_idx, int x_idx, int regime) const;
  /// Jump component Theta(., j) - Theta(., i).
  double gamma(int s_idx, int x_idx, int regime, int target) const;
};

RecursiveCostField evaluate_cost(const Model& model, const FeedbackStrategy& strategy, double anchor,
                                 const SolverGrids& grids);

/// Control applied on the spike interval [t, t + eps].
struct Perturbation {
  enum class Kind { Constant, Strategy, AnchorOptimal };
  Kind kind = Kind::Constant;
  Control control;
  FeedbackStrategy strategy;

  static Perturbation constant(const Control& u);
  static Perturbation follow(const FeedbackStrategy& strategy);
  /// Pointwise Hamiltonian minimizer for the anchor t (the pre-committed choice).
  static Perturbation anchor_optimal();
};

struct SpikeResult {
  double epsilon = 0.0;      ///< realized spike length (snapped to the grid)
  Eigen::MatrixXd gain;      ///< n_x by m field of [J(u + Psi) - J(Psi)] / eps
  double min_gain = 0.0;     ///< over interior nodes
};

SpikeResult spike_gain(const Model& model, const EquilibriumSolution& solution, double t, double epsilon,
                       const Perturbation& perturbation);

struct SpikeStudy {
  std::vector<SpikeResult> results;
  LineFit fit;                     ///< min_gain against epsilon
  std::vector<double> constants;   ///< max(0, -min_gain) / eps per rung
  bool constants_stable = false;   ///< within a factor 2 (or all zero)
};

/// Spike test over a ladder of spike lengths given as fractions of T.
SpikeStudy spike_study(const Model& model, const EquilibriumSolution& solution, double t,
                       const Perturbation& perturbation, const std::vector<double>& fractions = {0.1, 0.05, 0.025});

}  // namespace rsctl

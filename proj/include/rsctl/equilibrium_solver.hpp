#pragma once

// Two-time equilibrium field Theta(tau, s, x, i) solved by fixed-point iteration on its
// diagonal, slab by slab backward from T.

#include <vector>

#include "rsctl/grid.hpp"
#include "rsctl/model.hpp"
#include "rsctl/partition_game.hpp"
#include "rsctl/pde_core.hpp"

namespace rsctl {

/// Theta on the triangle tau_idx <= s_idx of one shared time grid.
class TwoTimeField {
 public:
  TwoTimeField() = default;
  TwoTimeField(TimeGrid times, SpatialGrid grid, int regimes);

  const TimeGrid& times() const { return times_; }
  const SpatialGrid& grid() const { return grid_; }
  int regimes() const { return regimes_; }

  Eigen::MatrixXd& at(int tau_idx, int s_idx);
  const Eigen::MatrixXd& at(int tau_idx, int s_idx) const;
  const Eigen::MatrixXd& diagonal(int s_idx) const { return at(s_idx, s_idx); }

  /// Row tau as a value field on [tau, T] (requires tau < T).
  ValueField row(int tau_idx) const;

 private:
  TimeGrid times_;
  SpatialGrid grid_;
  int regimes_ = 1;
  std::vector<std::vector<Eigen::MatrixXd>> rows_;
};

struct SweepRecord {
  int slab = 0;
  int sweep = 0;
  double slab_width = 0.0;
  double diag_change = 0.0;  ///< sup-norm change of the diagonal, all nodes
  double residual = 0.0;     ///< sup-norm fixed-point residual on the interior
};

struct EquilibriumOptions {
  double tol = 1e-8;
  int max_sweeps = 60;
  double slab_width = 0.0;  ///< 0 selects T/8
  int workers = 1;
};

struct EquilibriumSolution {
  TwoTimeField theta;
  ValueField value;           ///< V(s) = Theta(s, s)
  FeedbackStrategy strategy;  ///< node k: psi(s_k; s_k, Theta(s_k, s_k)); drives the step ending at s_k
  std::vector<SweepRecord> log;
  std::vector<Warning> warnings;
};

EquilibriumSolution solve_equilibrium(const Model& model, const SolverGrids& grids,
                                      const EquilibriumOptions& options = {});

/// psi(s; s, x, i, D, D_x, D_xx) at every node of a diagonal level D.
ControlLevel diagonal_controls(const Model& model, const SpatialGrid& grid,
                               const std::shared_ptr<const GeneratorNodes>& q, const Eigen::MatrixXd& diagonal,
                               double s, std::vector<Warning>* warnings = nullptr);

/// Max over interior nodes and anchor rows of the finite-difference residual of the
/// equilibrium system (forward time difference, node strategy).
double residual(const Model& model, const EquilibriumSolution& solution);

struct PartitionDistance {
  double value = 0.0;
  double gradient = 0.0;
  double strategy = 0.0;
};

/// Distances between Theta^Pi (anchor block of tau) and Theta over the interior.
PartitionDistance compare_to_partition(const EquilibriumSolution& solution, const PiSolution& pi);

}  // namespace rsctl

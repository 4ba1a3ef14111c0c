#pragma once

// Players on a time partition: each player k optimizes over [t_{k-1}, t_k] with anchor t_{k-1}
// and evaluates the remaining horizon under the strategy already fixed by later players.

#include <optional>
#include <vector>

#include "rsctl/grid.hpp"
#include "rsctl/model.hpp"
#include "rsctl/pde_core.hpp"

namespace rsctl {

struct SolverGrids {
  SpatialGrid space;
  TimeGrid time;  ///< covers [0, T]
};

/// Knots 0 = t_0 < ... < t_N = T.
class Partition {
 public:
  explicit Partition(std::vector<double> knots);
  static Partition uniform(double horizon, int count);

  const std::vector<double>& knots() const { return knots_; }
  int count() const { return static_cast<int>(knots_.size()) - 1; }
  double mesh() const;
  double horizon() const { return knots_.back(); }

 private:
  std::vector<double> knots_;
};

/// t^Pi(s): left knot of the block containing s; the last block is closed at T.
double anchor(const Partition& partition, double s);

struct PiSolution {
  Partition partition{{0.0, 1.0}};
  TimeGrid times;
  std::vector<int> knot_index;  ///< time-grid index of each knot
  ValueField value;             ///< V^Pi on [0, T], right-continuous at knots
  FeedbackStrategy strategy;    ///< Psi^Pi (node k holds the control of the step ending at node k)
  std::vector<ValueField> blocks;  ///< blocks[k-1] = Theta^k on [t_{k-1}, T]
  std::vector<Warning> warnings;

  /// Block number k (1-based) whose anchor applies at time index s_idx.
  int block_of(int s_idx) const;
};

PiSolution run_cycles(const Model& model, const Partition& partition, const SolverGrids& grids);

struct EquilibriumSolution;

struct ConvergenceRow {
  int count = 0;
  double mesh = 0.0;
  std::optional<double> sup_diff_value;     ///< against the previous partition
  std::optional<double> sup_diff_strategy;  ///< against the previous partition
  std::optional<double> distance_to_equilibrium;
};

/// Solve each partition and tabulate successive sup-norm differences over the interior.
std::vector<ConvergenceRow> refine_and_compare(const Model& model, const std::vector<Partition>& partitions,
                                              const SolverGrids& grids,
                                              const EquilibriumSolution* equilibrium = nullptr);

/// Sup-norm of the difference of two strategies over all time levels and interior nodes.
double strategy_sup_diff(const FeedbackStrategy& a, const FeedbackStrategy& b);

}  // namespace rsctl

#pragma once

// Space/time grids, value fields and grid-backed feedback strategies.

#include <Eigen/Core>

#include <algorithm>
#include <functional>
#include <vector>

#include "rsctl/control.hpp"

namespace rsctl {

enum class BoundaryKind {
  LinearExtrapolation,  ///< second difference vanishes at the edge
  Dirichlet,            ///< prescribed value(s, regime)
  Robin,                ///< value_coef * V + slope_coef * V_x = rhs (second-order one-sided V_x)
};

struct BoundaryCondition {
  BoundaryKind kind = BoundaryKind::LinearExtrapolation;
  std::function<double(double s, int regime)> value;  ///< Dirichlet data
  double value_coef = 0.0;
  double slope_coef = 0.0;
  double rhs = 0.0;

  static BoundaryCondition extrapolate() { return {}; }
  static BoundaryCondition dirichlet(std::function<double(double, int)> value);
  static BoundaryCondition robin(double value_coef, double slope_coef, double rhs);
};

/// Uniform grid on [x_min, x_max] with per-edge boundary conditions.
struct SpatialGrid {
  double x_min = -1.0;
  double x_max = 1.0;
  int n_x = 101;
  BoundaryCondition left;
  BoundaryCondition right;
  int buffer = 0;  ///< nodes at each edge excluded from error norms

  SpatialGrid() = default;
  SpatialGrid(double lo, double hi, int n, int buffer_nodes = 0);

  double dx() const { return (x_max - x_min) / (n_x - 1); }
  double x(int k) const { return k + 1 == n_x ? x_max : x_min + k * dx(); }
  Eigen::VectorXd nodes() const;
  /// First and last node of the norm interior (buffer excluded, edges excluded).
  int interior_begin() const { return std::max(1, buffer); }
  int interior_end() const { return n_x - std::max(1, buffer); }
  void validate() const;
  bool same_nodes(const SpatialGrid& other) const;
};

/// Strictly increasing time nodes.
struct TimeGrid {
  std::vector<double> nodes;

  TimeGrid() = default;
  explicit TimeGrid(std::vector<double> n);
  static TimeGrid uniform(double t0, double t1, int steps);

  int size() const { return static_cast<int>(nodes.size()); }
  int steps() const { return size() - 1; }
  double front() const { return nodes.front(); }
  double back() const { return nodes.back(); }
  double operator[](int k) const { return nodes[static_cast<size_t>(k)]; }
  double max_step() const;
  /// Index of node t (relative tolerance 1e-12 of the span), or -1.
  int find(double t) const;
  /// Nodes first..last inclusive.
  TimeGrid slice(int first, int last) const;
};

/// V[s_idx](x_idx, regime) on a time grid; one n_x-by-m matrix per time node.
class ValueField {
 public:
  ValueField() = default;
  ValueField(TimeGrid times, SpatialGrid grid, int regimes);

  const TimeGrid& times() const { return times_; }
  const SpatialGrid& grid() const { return grid_; }
  int regimes() const { return regimes_; }

  Eigen::MatrixXd& level(int s_idx) { return levels_[static_cast<size_t>(s_idx)]; }
  const Eigen::MatrixXd& level(int s_idx) const { return levels_[static_cast<size_t>(s_idx)]; }
  double operator()(int s_idx, int x_idx, int regime) const { return levels_[s_idx](x_idx, regime); }

  /// Central / one-sided second-order space differences (same stencils everywhere).
  double dx_value(int s_idx, int x_idx, int regime) const;
  double dxx_value(int s_idx, int x_idx, int regime) const;

  bool all_finite() const;

 private:
  TimeGrid times_;
  SpatialGrid grid_;
  int regimes_ = 1;
  std::vector<Eigen::MatrixXd> levels_;
};

/// Per-node controls of one time level: n_x rows, (regime * dim + component) columns.
using ControlLevel = Eigen::MatrixXd;

/// Grid-backed feedback map Psi(s, x, i).
///
/// Solver convention: the backward step over [s_{k-1}, s_k] applies the controls stored at
/// node k. Off-grid queries use bilinear interpolation in (s, x), then clamp to U.
class FeedbackStrategy {
 public:
  FeedbackStrategy() = default;
  FeedbackStrategy(TimeGrid times, SpatialGrid grid, int regimes, ControlSet controls);

  const TimeGrid& times() const { return times_; }
  const SpatialGrid& grid() const { return grid_; }
  int regimes() const { return regimes_; }
  int dimension() const { return controls_.dimension(); }
  const ControlSet& controls() const { return controls_; }

  ControlLevel& level(int s_idx) { return levels_[static_cast<size_t>(s_idx)]; }
  const ControlLevel& level(int s_idx) const { return levels_[static_cast<size_t>(s_idx)]; }

  Control at(int s_idx, int x_idx, int regime) const;
  void set(int s_idx, int x_idx, int regime, const Control& u);

  /// Interpolated, clamped control; throws DomainError outside the stored time range.
  Control operator()(double s, double x, int regime) const;

  /// Strategy that applies the same control everywhere.
  static FeedbackStrategy constant(TimeGrid times, SpatialGrid grid, int regimes, ControlSet controls,
                                   const Control& u);

 private:
  TimeGrid times_;
  SpatialGrid grid_;
  int regimes_ = 1;
  ControlSet controls_;
  std::vector<ControlLevel> levels_;
};

/// Largest absolute difference over the norm interior of two fields sharing grids.
double interior_sup_diff(const ValueField& a, const ValueField& b);

}  // namespace rsctl

#pragma once

#include <Eigen/Core>

#include <functional>
#include <vector>

namespace rsctl {

/// Control value: a short vector living on the stack (at most four components).
using Control = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 4, 1>;

inline Control scalar_control(double u) {
  Control c(1);
  c[0] = u;
  return c;
}

/// Admissible control set: a box (bounds may be infinite) or a finite list of points.
class ControlSet {
 public:
  /// The interval [-1, 1].
  ControlSet();

  static ControlSet interval(double lower, double upper);
  static ControlSet box(const Control& lower, const Control& upper);
  static ControlSet finite(std::vector<Control> points);

  int dimension() const { return dimension_; }
  bool is_finite() const { return !points_.empty(); }
  const Control& lower() const { return lower_; }
  const Control& upper() const { return upper_; }
  const std::vector<Control>& points() const { return points_; }

  /// Range searched along an unbounded axis (the truncation clamp).
  void set_search_range(const Control& lower, const Control& upper);
  const Control& search_lower() const { return search_lower_; }
  const Control& search_upper() const { return search_upper_; }
  bool is_bounded() const;

  /// Nearest admissible point (componentwise clamp for boxes, nearest point for finite sets).
  Control clamp(const Control& u) const;
  bool contains(const Control& u, double tol = 0.0) const;

  /// Candidate controls for grid search, in ascending lexicographic order.
  /// One axis receives `points_per_axis` nodes; d axes receive ceil(points^(1/d)) each.
  std::vector<Control> search_grid(int points_per_axis) const;

  /// True when u sits on a truncation clamp of an unbounded axis.
  bool on_truncation_edge(const Control& u) const;

  bool operator==(const ControlSet& other) const;

 private:
  int dimension_ = 1;
  Control lower_, upper_;
  Control search_lower_, search_upper_;
  std::vector<Control> points_;
};

/// Controlled coefficient b(s, x, i, u) or sigma(s, x, i, u).
using ControlledCoefficient = std::function<double(double s, double x, int regime, const Control& u)>;

/// State dynamics of the controlled regime-switching diffusion (scalar state, scalar noise).
struct ControlledDynamics {
  ControlledCoefficient drift;
  ControlledCoefficient diffusion;
  ControlSet controls;
  double lipschitz = 1.0;  ///< declared constant, used by validators
  Control anchor_control;  ///< reference control u0 of the growth bound

  /// Spot-check finiteness and |b(s,0,i,u0)| + |sigma(s,0,i,u0)| <= L at a few times.
  void validate(int regimes, double t0, double t1) const;
};

}  // namespace rsctl

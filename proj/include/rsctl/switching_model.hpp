#pragma once

// State-dependent switching geometry: threshold chain, mark intervals, mark measure
// and the generator matrix Q(x).
//
// Regimes are 0-based in this API (regime r corresponds to label r + 1 in outputs).

#include <Eigen/Core>

#include <functional>
#include <vector>

#include "rsctl/random.hpp"

namespace rsctl {

using ScalarFunction = std::function<double(double)>;

/// Generator matrix source x -> Q(x).
using GeneratorFunction = std::function<Eigen::MatrixXd(double x)>;

struct HalfOpenInterval {
  double lower = 0.0;
  double upper = 0.0;
  bool empty() const { return !(upper > lower); }
  double length() const { return empty() ? 0.0 : upper - lower; }
  bool contains(double v) const { return v >= lower && v < upper; }
};

/// Mark measure on [-beta0, beta0] with density pi0 and total mass 1.
class LevyMeasure {
 public:
  static LevyMeasure uniform(double beta0);

  /// Density must be nonnegative and integrate to 1; `rate_bound` is the declared K
  /// bounding every interval mass.
  LevyMeasure(double beta0, ScalarFunction density, double rate_bound = 1.0);

  double beta0() const { return beta0_; }
  double total_mass() const { return 1.0; }
  double rate_bound() const { return rate_bound_; }
  double density(double theta) const;

  /// Mass of an interval (clipped to the mark space), by adaptive Simpson with tolerance 1e-10.
  double measure(const HalfOpenInterval& interval) const;

  /// Draw a mark (exact for constant densities, rejection sampling otherwise).
  double sample(Engine& engine) const;

 private:
  double beta0_;
  ScalarFunction density_;
  double rate_bound_;
  double envelope_ = 0.0;
  bool constant_ = false;
};

/// Threshold chain beta_{ik}(x), k = 0..m, for each regime row.
///
/// Rows are supplied as m functions beta_{i1}..beta_{im}; beta_{i0} is derived
/// (beta_{10} = beta_{11}, beta_{i0} = beta_{(i-1)m}).
class RegimeGeometry {
 public:
  RegimeGeometry(int regimes, double beta0, std::vector<std::vector<ScalarFunction>> rows, double x_min,
                 double x_max, int validation_samples = 1001);

  int regimes() const { return regimes_; }
  double beta0() const { return beta0_; }
  double x_min() const { return x_min_; }
  double x_max() const { return x_max_; }

  /// beta_{row, k}(x) with k in 0..m.
  double threshold(int row, int k, double x) const;

  /// Mark interval for the move row -> target at state x.
  HalfOpenInterval interval(int row, int target, double x) const;

  /// Regime reached from `row` when mark theta arrives at state x (row itself when no interval holds it).
  int mark_to_jump(double x, int row, double theta) const;

  /// Check chain ordering, diagonal coincidence and the [-beta0, beta0] bound at x.
  void validate_at(double x) const;

 private:
  int regimes_;
  double beta0_;
  std::vector<std::vector<ScalarFunction>> rows_;
  double x_min_, x_max_;
};

/// Q(x): off-diagonals are interval masses, diagonal is the negative row sum.
Eigen::MatrixXd rate_matrix(const RegimeGeometry& geometry, const LevyMeasure& levy, double x);

struct MeasureGap {
  double gap_out = 0.0;  ///< pi(Delta^delta \ Delta)
  double gap_in = 0.0;   ///< pi(Delta \ Delta^{-delta})
};

/// Mass gained and lost when the interval endpoints are extremized over |y - x| <= delta
/// (64 equispaced samples per ball plus the centre).
MeasureGap interval_measure_gap(const RegimeGeometry& geometry, const LevyMeasure& levy, int row, int target,
                                double x, double delta);

/// Geometry plus mark measure: everything needed to simulate the switching process.
struct SwitchingMechanism {
  RegimeGeometry geometry;
  LevyMeasure levy;

  GeneratorFunction generator() const;
};

/// Geometry with constant thresholds realizing a constant generator under the uniform
/// mark density (requires the off-diagonal total to be at most 1).
SwitchingMechanism mechanism_for_constant_generator(const Eigen::MatrixXd& q, double beta0 = 1.0,
                                                    double x_min = -1e6, double x_max = 1e6);

}  // namespace rsctl

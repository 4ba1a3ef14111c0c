#include "rsctl/switching_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "rsctl/errors.hpp"
#include "rsctl/numerics.hpp"

namespace rsctl {
namespace {

constexpr double kQuadratureTol = 1e-10;
constexpr double kMassTol = 1e-8;
constexpr int kBallSamples = 64;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

double chain_tol(double a, double b) { return 1e-12 * std::max({1.0, std::abs(a), std::abs(b)}); }

}  // namespace

// ---------------------------------------------------------------- LevyMeasure

LevyMeasure LevyMeasure::uniform(double beta0) {
  if (!(beta0 > 0)) throw ConfigError("mark bound beta0 must be positive");
  const double c = 1.0 / (2.0 * beta0);
  return LevyMeasure(beta0, [c](double) { return c; });
}

LevyMeasure::LevyMeasure(double beta0, ScalarFunction density, double rate_bound)
    : beta0_(beta0), density_(std::move(density)), rate_bound_(rate_bound) {
  if (!(beta0_ > 0)) throw ConfigError("mark bound beta0 must be positive");
  if (!density_) throw ConfigError("mark density missing");
  double lo = std::numeric_limits<double>::infinity(), hi = 0;
  const int samples = 4097;
  for (int k = 0; k < samples; ++k) {
    const double th = -beta0_ + 2 * beta0_ * k / (samples - 1);
    const double d = density_(th);
    if (!(d >= 0) || !std::isfinite(d))
      throw ConfigError("mark density negative or non-finite", {{"theta", fmt(th)}, {"density", fmt(d)}});
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  constant_ = (lo == hi);
  envelope_ = hi;
  const double mass = adaptive_simpson<double>(density_, -beta0_, beta0_, kQuadratureTol);
  if (std::abs(mass - 1.0) > kMassTol)
    throw ConfigError("mark density must integrate to 1 over [-beta0, beta0]", {{"integral", fmt(mass)}});
}

double LevyMeasure::density(double theta) const {
  if (theta < -beta0_ || theta > beta0_) return 0.0;
  return density_(theta);
}

double LevyMeasure::measure(const HalfOpenInterval& interval) const {
  const double a = std::max(interval.lower, -beta0_);
  const double b = std::min(interval.upper, beta0_);
  if (!(b > a)) return 0.0;
  return adaptive_simpson<double>(density_, a, b, kQuadratureTol);
}

double LevyMeasure::sample(Engine& engine) const {
  std::uniform_real_distribution<double> mark(-beta0_, beta0_);
  if (constant_) return mark(engine);
  std::uniform_real_distribution<double> level(0.0, envelope_);
  // Rejection against the sampled maximum of the density.
  for (;;) {
    const double th = mark(engine);
    if (level(engine) <= density_(th)) return th;
  }
}

// ------------------------------------------------------------- RegimeGeometry

RegimeGeometry::RegimeGeometry(int regimes, double beta0, std::vector<std::vector<ScalarFunction>> rows,
                               double x_min, double x_max, int validation_samples)
    : regimes_(regimes), beta0_(beta0), rows_(std::move(rows)), x_min_(x_min), x_max_(x_max) {
  if (regimes_ < 1) throw ConfigError("regime count must be positive");
  if (!(beta0_ > 0)) throw ConfigError("mark bound beta0 must be positive");
  if (static_cast<int>(rows_.size()) != regimes_)
    throw ConfigError("threshold table needs one row per regime");
  for (const auto& row : rows_) {
    if (static_cast<int>(row.size()) != regimes_)
      throw ConfigError("each threshold row needs m entries beta_i1..beta_im");
    for (const auto& f : row)
      if (!f) throw ConfigError("threshold function missing");
  }
  if (!(x_max_ >= x_min_)) throw ConfigError("geometry domain is empty");
  const int n = std::max(validation_samples, 2);
  for (int k = 0; k < n; ++k) validate_at(x_min_ + (x_max_ - x_min_) * k / (n - 1));
}

double RegimeGeometry::threshold(int row, int k, double x) const {
  if (row < 0 || row >= regimes_ || k < 0 || k > regimes_)
    throw DomainError("threshold index out of range", {{"row", std::to_string(row + 1)}, {"k", std::to_string(k)}});
  if (k == 0) return row == 0 ? rows_[0][0](x) : rows_[static_cast<size_t>(row - 1)].back()(x);
  return rows_[static_cast<size_t>(row)][static_cast<size_t>(k - 1)](x);
}

HalfOpenInterval RegimeGeometry::interval(int row, int target, double x) const {
  if (target < 0 || target >= regimes_) throw DomainError("target regime out of range");
  if (row == target) return {0.0, 0.0};
  const double lo = threshold(row, target, x);
  const double hi = threshold(row, target + 1, x);
  if (hi < lo - chain_tol(lo, hi))
    throw GeometryError("mark interval endpoints reversed",
                        {{"i", std::to_string(row + 1)}, {"j", std::to_string(target + 1)}, {"x", fmt(x)}});
  return {lo, hi};
}

int RegimeGeometry::mark_to_jump(double x, int row, double theta) const {
  if (!(theta >= -beta0_ && theta <= beta0_)) throw DomainError("mark outside [-beta0, beta0]", {{"theta", fmt(theta)}});
  int hit = row;
  for (int j = 0; j < regimes_; ++j) {
    if (j == row) continue;
    if (interval(row, j, x).contains(theta)) {
      if (hit != row)
        throw GeometryError("mark lies in two mark intervals",
                            {{"i", std::to_string(row + 1)}, {"x", fmt(x)}, {"theta", fmt(theta)}});
      hit = j;
    }
  }
  return hit;
}

void RegimeGeometry::validate_at(double x) const {
  for (int i = 0; i < regimes_; ++i) {
    double prev = threshold(i, 0, x);
    for (int k = 0; k <= regimes_; ++k) {
      const double v = threshold(i, k, x);
      if (!std::isfinite(v))
        throw GeometryError("threshold not finite", {{"i", std::to_string(i + 1)}, {"j", std::to_string(k)}, {"x", fmt(x)}});
      if (v < -beta0_ - chain_tol(v, beta0_) || v > beta0_ + chain_tol(v, beta0_))
        throw GeometryError("threshold outside [-beta0, beta0]",
                            {{"i", std::to_string(i + 1)}, {"j", std::to_string(k)}, {"x", fmt(x)}});
      if (v < prev - chain_tol(v, prev))
        throw GeometryError("threshold chain ordering violated",
                            {{"i", std::to_string(i + 1)}, {"j", std::to_string(k)}, {"x", fmt(x)}});
      prev = v;
    }
    const double before = threshold(i, i, x), own = threshold(i, i + 1, x);
    if (std::abs(before - own) > chain_tol(before, own))
      throw GeometryError("diagonal thresholds beta_i(i-1) and beta_ii differ",
                          {{"i", std::to_string(i + 1)}, {"j", std::to_string(i + 1)}, {"x", fmt(x)}});
  }
}

Eigen::MatrixXd rate_matrix(const RegimeGeometry& geometry, const LevyMeasure& levy, double x) {
  const int m = geometry.regimes();
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    double sum = 0.0;
    for (int j = 0; j < m; ++j) {
      if (j == i) continue;
      q(i, j) = levy.measure(geometry.interval(i, j, x));
      sum += q(i, j);
    }
    q(i, i) = -sum;
  }
  return q;
}

MeasureGap interval_measure_gap(const RegimeGeometry& geometry, const LevyMeasure& levy, int row, int target,
                                double x, double delta) {
  if (delta < 0) throw ConfigError("ball radius must be nonnegative");
  if (delta == 0 || row == target) return {};
  double lo_min = geometry.threshold(row, target, x), lo_max = lo_min;
  double hi_min = geometry.threshold(row, target + 1, x), hi_max = hi_min;
  for (int k = 0; k < kBallSamples; ++k) {
    const double y = x - delta + 2 * delta * k / (kBallSamples - 1);
    const double lo = geometry.threshold(row, target, y), hi = geometry.threshold(row, target + 1, y);
    lo_min = std::min(lo_min, lo);
    lo_max = std::max(lo_max, lo);
    hi_min = std::min(hi_min, hi);
    hi_max = std::max(hi_max, hi);
  }
  const HalfOpenInterval base = geometry.interval(row, target, x);
  const double mass = levy.measure(base);
  MeasureGap gap;
  gap.gap_out = std::max(0.0, levy.measure({lo_min, hi_max}) - mass);
  gap.gap_in = std::max(0.0, mass - levy.measure({lo_max, hi_min}));
  return gap;
}

GeneratorFunction SwitchingMechanism::generator() const {
  return [geometry = geometry, levy = levy](double x) { return rate_matrix(geometry, levy, x); };
}

SwitchingMechanism mechanism_for_constant_generator(const Eigen::MatrixXd& q, double beta0, double x_min,
                                                    double x_max) {
  const int m = static_cast<int>(q.rows());
  if (q.cols() != m) throw ConfigError("generator must be square");
  double total = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      if (i == j) continue;
      if (q(i, j) < 0) throw ConfigError("generator off-diagonal entries must be nonnegative");
      total += q(i, j);
    }
  if (total > 1.0 + 1e-12)
    throw ConfigError("off-diagonal rates exceed the unit mark mass", {{"total", fmt(total)}});
  // Lay the intervals out consecutively from -beta0 under the uniform density 1/(2 beta0).
  std::vector<std::vector<ScalarFunction>> rows(static_cast<size_t>(m));
  double cursor = -beta0;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      if (j != i) cursor = std::min(beta0, cursor + 2 * beta0 * q(i, j));
      const double c = cursor;
      rows[static_cast<size_t>(i)].push_back([c](double) { return c; });
    }
  }
  return {RegimeGeometry(m, beta0, std::move(rows), x_min, x_max, 2), LevyMeasure::uniform(beta0)};
}

}  // namespace rsctl

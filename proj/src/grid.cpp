#include "rsctl/grid.hpp"

#include <cmath>
#include <string>

#include "rsctl/errors.hpp"
#include "rsctl/numerics.hpp"

namespace rsctl {

BoundaryCondition BoundaryCondition::dirichlet(std::function<double(double, int)> value) {
  BoundaryCondition bc;
  bc.kind = BoundaryKind::Dirichlet;
  bc.value = std::move(value);
  return bc;
}

BoundaryCondition BoundaryCondition::robin(double value_coef, double slope_coef, double rhs) {
  BoundaryCondition bc;
  bc.kind = BoundaryKind::Robin;
  bc.value_coef = value_coef;
  bc.slope_coef = slope_coef;
  bc.rhs = rhs;
  return bc;
}

// ----------------------------------------------------------------- SpatialGrid

SpatialGrid::SpatialGrid(double lo, double hi, int n, int buffer_nodes)
    : x_min(lo), x_max(hi), n_x(n), buffer(buffer_nodes) {
  validate();
}

Eigen::VectorXd SpatialGrid::nodes() const {
  Eigen::VectorXd v(n_x);
  for (int k = 0; k < n_x; ++k) v[k] = x(k);
  return v;
}

void SpatialGrid::validate() const {
  if (n_x < 3) throw ConfigError("spatial grid needs n_x >= 3", {{"n_x", std::to_string(n_x)}});
  if (!(x_max > x_min)) throw ConfigError("spatial grid needs x_max > x_min");
  if (buffer < 0 || 2 * std::max(1, buffer) >= n_x) throw ConfigError("buffer zone leaves no interior");
  if (left.kind == BoundaryKind::Dirichlet && !left.value) throw ConfigError("left Dirichlet data missing");
  if (right.kind == BoundaryKind::Dirichlet && !right.value) throw ConfigError("right Dirichlet data missing");
}

bool SpatialGrid::same_nodes(const SpatialGrid& other) const {
  return n_x == other.n_x && x_min == other.x_min && x_max == other.x_max;
}

// -------------------------------------------------------------------- TimeGrid

TimeGrid::TimeGrid(std::vector<double> n) : nodes(std::move(n)) {
  if (nodes.size() < 2) throw ConfigError("time grid needs at least two nodes");
  for (size_t k = 1; k < nodes.size(); ++k)
    if (!(nodes[k] > nodes[k - 1])) throw ConfigError("time grid must be strictly increasing");
}

TimeGrid TimeGrid::uniform(double t0, double t1, int steps) {
  if (steps < 1 || !(t1 > t0)) throw ConfigError("uniform time grid needs t1 > t0 and steps >= 1");
  std::vector<double> n(static_cast<size_t>(steps) + 1);
  for (int k = 0; k <= steps; ++k) n[static_cast<size_t>(k)] = t0 + (t1 - t0) * k / steps;
  n.back() = t1;
  return TimeGrid(std::move(n));
}

double TimeGrid::max_step() const {
  double h = 0.0;
  for (size_t k = 1; k < nodes.size(); ++k) h = std::max(h, nodes[k] - nodes[k - 1]);
  return h;
}

int TimeGrid::find(double t) const {
  const double tol = 1e-12 * std::max(1.0, std::abs(back() - front()));
  const auto it = std::lower_bound(nodes.begin(), nodes.end(), t - tol);
  if (it != nodes.end() && std::abs(*it - t) <= tol) return static_cast<int>(it - nodes.begin());
  return -1;
}

TimeGrid TimeGrid::slice(int first, int last) const {
  if (first < 0 || last >= size() || last <= first) throw DomainError("time grid slice out of range");
  return TimeGrid(std::vector<double>(nodes.begin() + first, nodes.begin() + last + 1));
}

// ------------------------------------------------------------------ ValueField

ValueField::ValueField(TimeGrid times, SpatialGrid grid, int regimes)
    : times_(std::move(times)), grid_(std::move(grid)), regimes_(regimes) {
  levels_.assign(static_cast<size_t>(times_.size()), Eigen::MatrixXd::Zero(grid_.n_x, regimes_));
}

double ValueField::dx_value(int s_idx, int x_idx, int regime) const {
  return first_difference(levels_[static_cast<size_t>(s_idx)].col(regime), x_idx, grid_.dx());
}

double ValueField::dxx_value(int s_idx, int x_idx, int regime) const {
  return second_difference(levels_[static_cast<size_t>(s_idx)].col(regime), x_idx, grid_.dx());
}

bool ValueField::all_finite() const {
  for (const auto& l : levels_)
    if (!l.allFinite()) return false;
  return true;
}

double interior_sup_diff(const ValueField& a, const ValueField& b) {
  if (!a.grid().same_nodes(b.grid()) || a.times().size() != b.times().size() || a.regimes() != b.regimes())
    throw ConfigError("field comparison needs matching grids");
  double out = 0.0;
  const int lo = a.grid().interior_begin(), hi = a.grid().interior_end();
  for (int k = 0; k < a.times().size(); ++k)
    out = std::max(out, (a.level(k).middleRows(lo, hi - lo) - b.level(k).middleRows(lo, hi - lo)).cwiseAbs().maxCoeff());
  return out;
}

// ------------------------------------------------------------ FeedbackStrategy

FeedbackStrategy::FeedbackStrategy(TimeGrid times, SpatialGrid grid, int regimes, ControlSet controls)
    : times_(std::move(times)), grid_(std::move(grid)), regimes_(regimes), controls_(std::move(controls)) {
  levels_.assign(static_cast<size_t>(times_.size()),
                 ControlLevel::Zero(grid_.n_x, regimes_ * controls_.dimension()));
}

Control FeedbackStrategy::at(int s_idx, int x_idx, int regime) const {
  const int d = dimension();
  return levels_[static_cast<size_t>(s_idx)].row(x_idx).segment(regime * d, d).transpose();
}

void FeedbackStrategy::set(int s_idx, int x_idx, int regime, const Control& u) {
  const int d = dimension();
  levels_[static_cast<size_t>(s_idx)].row(x_idx).segment(regime * d, d) = u.transpose();
}

Control FeedbackStrategy::operator()(double s, double x, int regime) const {
  const double tol = 1e-12 * std::max(1.0, std::abs(times_.back() - times_.front()));
  if (s < times_.front() - tol || s > times_.back() + tol)
    throw DomainError("strategy queried outside its time range", {{"s", std::to_string(s)}});
  if (regime < 0 || regime >= regimes_) throw DomainError("strategy queried at unknown regime");
  const auto& tn = times_.nodes;
  size_t hi = static_cast<size_t>(std::upper_bound(tn.begin(), tn.end(), s) - tn.begin());
  hi = std::clamp<size_t>(hi, 1, tn.size() - 1);
  const size_t lo = hi - 1;
  const double ws = std::clamp((s - tn[lo]) / (tn[hi] - tn[lo]), 0.0, 1.0);
  const double xc = std::clamp(x, grid_.x_min, grid_.x_max);
  int k = static_cast<int>(std::floor((xc - grid_.x_min) / grid_.dx()));
  k = std::clamp(k, 0, grid_.n_x - 2);
  const double wx = std::clamp((xc - grid_.x(k)) / grid_.dx(), 0.0, 1.0);
  const int lo_i = static_cast<int>(lo), hi_i = static_cast<int>(hi);
  const Control u = (1 - ws) * ((1 - wx) * at(lo_i, k, regime) + wx * at(lo_i, k + 1, regime)) +
                    ws * ((1 - wx) * at(hi_i, k, regime) + wx * at(hi_i, k + 1, regime));
  return controls_.clamp(u);
}

FeedbackStrategy FeedbackStrategy::constant(TimeGrid times, SpatialGrid grid, int regimes, ControlSet controls,
                                            const Control& u) {
  FeedbackStrategy f(std::move(times), std::move(grid), regimes, std::move(controls));
  for (int k = 0; k < f.times().size(); ++k)
    for (int x = 0; x < f.grid().n_x; ++x)
      for (int i = 0; i < regimes; ++i) f.set(k, x, i, u);
  return f;
}

}  // namespace rsctl

#include "rsctl/control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "rsctl/errors.hpp"

namespace rsctl {
namespace {

constexpr double kDefaultSearchHalfWidth = 10.0;

bool lex_less(const Control& a, const Control& b) {
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    if (a[k] < b[k]) return true;
    if (a[k] > b[k]) return false;
  }
  return false;
}

}  // namespace

ControlSet::ControlSet()
    : lower_(scalar_control(-1.0)),
      upper_(scalar_control(1.0)),
      search_lower_(scalar_control(-1.0)),
      search_upper_(scalar_control(1.0)) {}

ControlSet ControlSet::interval(double lower, double upper) {
  return box(scalar_control(lower), scalar_control(upper));
}

ControlSet ControlSet::box(const Control& lower, const Control& upper) {
  if (lower.size() != upper.size() || lower.size() < 1 || lower.size() > 4)
    throw ConfigError("control box bounds must have matching dimension 1..4");
  ControlSet set;
  set.dimension_ = static_cast<int>(lower.size());
  set.lower_ = lower;
  set.upper_ = upper;
  set.points_.clear();
  for (Eigen::Index k = 0; k < lower.size(); ++k) {
    if (std::isnan(lower[k]) || std::isnan(upper[k]) || lower[k] > upper[k])
      throw ConfigError("control box has empty or NaN axis", {{"axis", std::to_string(k)}});
  }
  set.search_lower_ = lower;
  set.search_upper_ = upper;
  for (Eigen::Index k = 0; k < lower.size(); ++k) {
    if (!std::isfinite(lower[k]))
      set.search_lower_[k] = std::isfinite(upper[k]) ? upper[k] - 2 * kDefaultSearchHalfWidth : -kDefaultSearchHalfWidth;
    if (!std::isfinite(upper[k]))
      set.search_upper_[k] = std::isfinite(lower[k]) ? lower[k] + 2 * kDefaultSearchHalfWidth : kDefaultSearchHalfWidth;
  }
  return set;
}

ControlSet ControlSet::finite(std::vector<Control> points) {
  if (points.empty()) throw ConfigError("finite control set is empty");
  const auto dim = points.front().size();
  for (const auto& p : points)
    if (p.size() != dim) throw ConfigError("finite control set mixes dimensions");
  std::sort(points.begin(), points.end(), lex_less);
  ControlSet set;
  set.dimension_ = static_cast<int>(dim);
  set.points_ = std::move(points);
  set.lower_ = set.points_.front();
  set.upper_ = set.points_.front();
  for (const auto& p : set.points_) {
    set.lower_ = set.lower_.cwiseMin(p);
    set.upper_ = set.upper_.cwiseMax(p);
  }
  set.search_lower_ = set.lower_;
  set.search_upper_ = set.upper_;
  return set;
}

void ControlSet::set_search_range(const Control& lower, const Control& upper) {
  if (lower.size() != dimension_ || upper.size() != dimension_)
    throw ConfigError("search range dimension mismatch");
  search_lower_ = lower.cwiseMax(lower_);
  search_upper_ = upper.cwiseMin(upper_);
}

bool ControlSet::is_bounded() const { return lower_.allFinite() && upper_.allFinite(); }

Control ControlSet::clamp(const Control& u) const {
  if (points_.empty()) return u.cwiseMax(lower_).cwiseMin(upper_);
  const Control* best = &points_.front();
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& p : points_) {
    const double d = (p - u).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = &p;
    }
  }
  return *best;
}

bool ControlSet::contains(const Control& u, double tol) const {
  if (u.size() != dimension_) return false;
  if (points_.empty()) return ((u - lower_).array() >= -tol).all() && ((upper_ - u).array() >= -tol).all();
  return std::any_of(points_.begin(), points_.end(),
                     [&](const Control& p) { return (p - u).cwiseAbs().maxCoeff() <= tol; });
}

std::vector<Control> ControlSet::search_grid(int points_per_axis) const {
  if (!points_.empty()) return points_;
  int per_axis = points_per_axis;
  if (dimension_ > 1)
    per_axis = static_cast<int>(std::ceil(std::pow(static_cast<double>(points_per_axis), 1.0 / dimension_)));
  per_axis = std::max(per_axis, 2);
  std::vector<Control> grid;
  std::vector<int> idx(static_cast<size_t>(dimension_), 0);
  while (true) {
    Control u(dimension_);
    for (int a = 0; a < dimension_; ++a) {
      const double lo = search_lower_[a], hi = search_upper_[a];
      u[a] = (lo == hi) ? lo : lo + (hi - lo) * idx[static_cast<size_t>(a)] / (per_axis - 1);
    }
    grid.push_back(u);
    int a = dimension_ - 1;
    while (a >= 0 && ++idx[static_cast<size_t>(a)] == per_axis) idx[static_cast<size_t>(a--)] = 0;
    if (a < 0) break;
  }
  return grid;
}

bool ControlSet::on_truncation_edge(const Control& u) const {
  if (!points_.empty()) return false;
  for (int a = 0; a < dimension_; ++a) {
    if (!std::isfinite(lower_[a]) && u[a] <= search_lower_[a]) return true;
    if (!std::isfinite(upper_[a]) && u[a] >= search_upper_[a]) return true;
  }
  return false;
}

bool ControlSet::operator==(const ControlSet& other) const {
  if (dimension_ != other.dimension_ || points_.size() != other.points_.size()) return false;
  for (size_t k = 0; k < points_.size(); ++k)
    if (points_[k] != other.points_[k]) return false;
  return lower_ == other.lower_ && upper_ == other.upper_ && search_lower_ == other.search_lower_ &&
         search_upper_ == other.search_upper_;
}

void ControlledDynamics::validate(int regimes, double t0, double t1) const {
  if (!drift || !diffusion) throw ConfigError("dynamics need drift and diffusion");
  const Control u0 = anchor_control.size() ? anchor_control : controls.clamp(Control::Zero(controls.dimension()));
  for (int k = 0; k <= 4; ++k) {
    const double s = t0 + (t1 - t0) * k / 4.0;
    for (int i = 0; i < regimes; ++i) {
      const double b = drift(s, 0.0, i, u0), sig = diffusion(s, 0.0, i, u0);
      if (!std::isfinite(b) || !std::isfinite(sig))
        throw ConfigError("dynamics not finite at the anchor control", {{"s", std::to_string(s)}});
      if (std::abs(b) + std::abs(sig) > lipschitz * (1 + 1e-12))
        throw ConfigError("growth bound |b| + |sigma| <= L fails at x = 0",
                          {{"s", std::to_string(s)}, {"regime", std::to_string(i + 1)}});
    }
  }
}

}  // namespace rsctl

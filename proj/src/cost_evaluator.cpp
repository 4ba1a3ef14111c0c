#include "rsctl/cost_evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rsctl/errors.hpp"

namespace rsctl {
namespace {

/// Strategy controls at time s on `grid`: exact node copy when grids agree, else interpolation.
ControlLevel controls_on(const FeedbackStrategy& strategy, double s, const SpatialGrid& grid) {
  const int k = strategy.grid().same_nodes(grid) ? strategy.times().find(s) : -1;
  if (k >= 0) return strategy.level(k);
  const int d = strategy.dimension(), m = strategy.regimes();
  ControlLevel u(grid.n_x, m * d);
  for (int x = 0; x < grid.n_x; ++x)
    for (int i = 0; i < m; ++i) u.row(x).segment(i * d, d) = strategy(s, grid.x(x), i).transpose();
  return u;
}

ControlLevel constant_level(const Control& c, int n_x, int regimes) {
  const int d = static_cast<int>(c.size());
  ControlLevel u(n_x, regimes * d);
  for (int x = 0; x < n_x; ++x)
    for (int i = 0; i < regimes; ++i) u.row(x).segment(i * d, d) = c.transpose();
  return u;
}

}  // namespace

double RecursiveCostField::z(int s_idx, int x_idx, int regime) const {
  const double s = theta.times()[s_idx];
  const double x = theta.grid().x(x_idx);
  const ControlLevel u = controls_on(strategy, s, theta.grid());
  const int d = strategy.dimension();
  const Control c = u.row(x_idx).segment(regime * d, d).transpose();
  return theta.dx_value(s_idx, x_idx, regime) * diffusion(s, x, regime, c);
}

double RecursiveCostField::gamma(int s_idx, int x_idx, int regime, int target) const {
  return theta(s_idx, x_idx, target) - theta(s_idx, x_idx, regime);
}

RecursiveCostField evaluate_cost(const Model& model, const FeedbackStrategy& strategy, double anchor,
                                 const SolverGrids& grids) {
  model.validate();
  const TimeGrid& times = grids.time;
  const int t_idx = times.find(anchor);
  const int last = times.size() - 1;
  if (t_idx < 0) throw ConfigError("anchor is not a time-grid node", {{"anchor", std::to_string(anchor)}});
  if (t_idx == last) throw DomainError("anchor must precede the horizon");
  const double tol = 1e-12 * (times.back() - times.front());
  if (strategy.times().front() > anchor + tol || strategy.times().back() < times.back() - tol)
    throw DomainError("strategy is not defined on the whole of [t, T]",
                      {{"strategy_from", std::to_string(strategy.times().front())},
                       {"strategy_to", std::to_string(strategy.times().back())}});
  const BackwardStepper stepper(anchored_problem(model, anchor, grids.space));
  RecursiveCostField out;
  out.anchor = anchor;
  out.theta = solve_closed_loop(stepper, strategy, times.slice(t_idx, last), stepper.terminal_level());
  out.strategy = strategy;
  out.diffusion = model.dynamics.diffusion;
  return out;
}

Perturbation Perturbation::constant(const Control& u) {
  Perturbation p;
  p.kind = Kind::Constant;
  p.control = u;
  return p;
}

Perturbation Perturbation::follow(const FeedbackStrategy& strategy) {
  Perturbation p;
  p.kind = Kind::Strategy;
  p.strategy = strategy;
  return p;
}

Perturbation Perturbation::anchor_optimal() {
  Perturbation p;
  p.kind = Kind::AnchorOptimal;
  return p;
}

SpikeResult spike_gain(const Model& model, const EquilibriumSolution& solution, double t, double epsilon,
                       const Perturbation& perturbation) {
  const TwoTimeField& theta = solution.theta;
  const TimeGrid& times = theta.times();
  const SpatialGrid& grid = theta.grid();
  const int m = theta.regimes(), last = times.size() - 1;
  const double span = times.back() - times.front();
  const int t_idx = times.find(t);
  if (t_idx < 0) throw ConfigError("spike start is not a time-grid node", {{"t", std::to_string(t)}});
  if (!(epsilon > 0) || t + epsilon > times.back() + 1e-12 * span)
    throw ConfigError("spike must satisfy 0 < eps and t + eps <= T", {{"eps", std::to_string(epsilon)}});
  const auto it = std::lower_bound(times.nodes.begin(), times.nodes.end(), t + epsilon);
  int e_idx = static_cast<int>(it - times.nodes.begin());
  if (e_idx > last) e_idx = last;
  if (e_idx > 0 && std::abs(times[e_idx - 1] - (t + epsilon)) < std::abs(times[e_idx] - (t + epsilon))) --e_idx;
  if (e_idx - t_idx < 2)
    throw ResolutionError("spike length is below two time steps",
                          {{"eps", std::to_string(epsilon)}, {"dt", std::to_string(times.max_step())}});

  const BackwardStepper stepper(anchored_problem(model, t, grid));
  const int d = model.dynamics.controls.dimension();
  if (perturbation.kind == Perturbation::Kind::Constant && perturbation.control.size() != d)
    throw ConfigError("perturbation control has the wrong dimension");
  Eigen::MatrixXd v = theta.at(t_idx, e_idx), v_prev;
  for (int j = e_idx; j > t_idx; --j) {
    ControlLevel u;
    switch (perturbation.kind) {
      case Perturbation::Kind::Constant:
        u = constant_level(model.dynamics.controls.clamp(perturbation.control), grid.n_x, m);
        break;
      case Perturbation::Kind::Strategy:
        u = controls_on(perturbation.strategy, times[j], grid);
        break;
      case Perturbation::Kind::AnchorOptimal:
        u = stepper.minimize(v, times[j]);
        break;
    }
    stepper.step_controlled(v, times[j], times[j - 1], u, v_prev);
    v.swap(v_prev);
  }
  SpikeResult out;
  out.epsilon = times[e_idx] - t;
  out.gain = (v - theta.diagonal(t_idx)) / out.epsilon;
  out.min_gain = out.gain.middleRows(grid.interior_begin(), grid.interior_end() - grid.interior_begin()).minCoeff();
  return out;
}

SpikeStudy spike_study(const Model& model, const EquilibriumSolution& solution, double t,
                       const Perturbation& perturbation, const std::vector<double>& fractions) {
  const TimeGrid& times = solution.theta.times();
  const double span = times.back() - times.front();
  SpikeStudy study;
  std::vector<double> eps, gains;
  for (double f : fractions) {
    SpikeResult r = spike_gain(model, solution, t, f * span, perturbation);
    eps.push_back(r.epsilon);
    gains.push_back(r.min_gain);
    study.constants.push_back(std::max(0.0, -r.min_gain) / r.epsilon);
    study.results.push_back(std::move(r));
  }
  if (eps.size() >= 2) study.fit = fit_line(eps, gains);
  else if (!eps.empty()) study.fit = {gains.front(), 0.0};
  const auto [lo, hi] = std::minmax_element(study.constants.begin(), study.constants.end());
  study.constants_stable = !study.constants.empty() && (*hi == 0.0 || *hi <= 2.0 * *lo);
  return study;
}

}  // namespace rsctl

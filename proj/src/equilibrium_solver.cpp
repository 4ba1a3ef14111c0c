#include "rsctl/equilibrium_solver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rsctl/errors.hpp"
#include "rsctl/sde_engine.hpp"

namespace rsctl {

TwoTimeField::TwoTimeField(TimeGrid times, SpatialGrid grid, int regimes)
    : times_(std::move(times)), grid_(std::move(grid)), regimes_(regimes) {
  const int n = times_.size();
  rows_.resize(static_cast<size_t>(n));
  for (int r = 0; r < n; ++r)
    rows_[static_cast<size_t>(r)].assign(static_cast<size_t>(n - r), Eigen::MatrixXd::Zero(grid_.n_x, regimes_));
}

Eigen::MatrixXd& TwoTimeField::at(int tau_idx, int s_idx) {
  return rows_[static_cast<size_t>(tau_idx)][static_cast<size_t>(s_idx - tau_idx)];
}

const Eigen::MatrixXd& TwoTimeField::at(int tau_idx, int s_idx) const {
  return rows_[static_cast<size_t>(tau_idx)][static_cast<size_t>(s_idx - tau_idx)];
}

ValueField TwoTimeField::row(int tau_idx) const {
  const int last = times_.size() - 1;
  ValueField out(times_.slice(tau_idx, last), grid_, regimes_);
  for (int s = tau_idx; s <= last; ++s) out.level(s - tau_idx) = at(tau_idx, s);
  return out;
}

ControlLevel diagonal_controls(const Model& model, const SpatialGrid& grid,
                               const std::shared_ptr<const GeneratorNodes>& q, const Eigen::MatrixXd& diagonal,
                               double s, std::vector<Warning>* warnings) {
  const BackwardStepper stepper(anchored_problem(model, s, grid), q);
  return stepper.minimize(diagonal, s, warnings);
}

namespace {

double sup_change(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int lo, int hi) {
  return (a.middleRows(lo, hi - lo) - b.middleRows(lo, hi - lo)).cwiseAbs().maxCoeff();
}

}  // namespace

EquilibriumSolution solve_equilibrium(const Model& model, const SolverGrids& grids, const EquilibriumOptions& options) {
  model.validate();
  const TimeGrid& times = grids.time;
  const SpatialGrid& space = grids.space;
  const int n = times.size(), last = n - 1, m = model.regimes;
  const double span = times.back() - times.front();
  double width = options.slab_width > 0 ? options.slab_width : span / 8.0;
  if (width > span * (1 + 1e-12)) throw ConfigError("slab width exceeds the horizon");
  if (!(options.tol > 0) || options.max_sweeps < 1) throw ConfigError("tolerance and sweep budget must be positive");

  const auto q = generator_nodes(model.generator, space, m);
  std::vector<BackwardStepper> steppers;
  steppers.reserve(static_cast<size_t>(n));
  for (int r = 0; r < n; ++r) steppers.emplace_back(anchored_problem(model, times[r], space), q);
  steppers.front().check_step(times.max_step());

  EquilibriumSolution sol;
  sol.theta = TwoTimeField(times, space, m);
  TwoTimeField& theta = sol.theta;
  for (int r = 0; r < n; ++r) theta.at(r, last) = steppers[static_cast<size_t>(r)].terminal_level();

  std::vector<ControlLevel> psi(static_cast<size_t>(n));
  auto controls_at = [&](int k) {
    return steppers[static_cast<size_t>(k)].minimize(theta.diagonal(k), times[k], &sol.warnings);
  };
  psi[static_cast<size_t>(last)] = controls_at(last);

  // March row r from level `top` down to `bottom` with the stored controls.
  auto march = [&](int r, int top, int bottom) {
    const BackwardStepper& st = steppers[static_cast<size_t>(r)];
    for (int j = top; j > bottom; --j)
      st.step_controlled(theta.at(r, j), times[j], times[j - 1], psi[static_cast<size_t>(j)], theta.at(r, j - 1));
  };
  auto rows_parallel = [&](int first, int count, const std::function<void(int)>& body) {
    parallel_for(count, options.workers, [&](long begin, long end, int) {
      for (long k = begin; k < end; ++k) body(first + static_cast<int>(k));
    });
  };

  const int lo = space.interior_begin(), hi = space.interior_end();
  int top = last, slab = 0;
  while (top > 0) {
    int bottom = top - 1;
    while (bottom > 0 && times[bottom - 1] >= times[top] - width - 1e-12 * span) --bottom;
    for (;;) {
      std::vector<Eigen::MatrixXd> guess(static_cast<size_t>(top - bottom));
      for (int k = bottom; k < top; ++k)
        guess[static_cast<size_t>(k - bottom)] = steppers[static_cast<size_t>(k)].terminal_level();
      std::vector<double> history;
      bool converged = false;
      for (int sweep = 1; sweep <= options.max_sweeps; ++sweep) {
        for (int k = bottom + 1; k < top; ++k)
          psi[static_cast<size_t>(k)] = steppers[static_cast<size_t>(k)].minimize(
              guess[static_cast<size_t>(k - bottom)], times[k], &sol.warnings);
        rows_parallel(bottom, top - bottom, [&](int r) { march(r, top, r); });
        double change = 0.0, resid = 0.0;
        for (int k = bottom; k < top; ++k) {
          Eigen::MatrixXd& g = guess[static_cast<size_t>(k - bottom)];
          change = std::max(change, (theta.diagonal(k) - g).cwiseAbs().maxCoeff());
          resid = std::max(resid, sup_change(theta.diagonal(k), g, lo, hi));
          g = theta.diagonal(k);
        }
        if (!std::isfinite(change)) throw NumericError("equilibrium sweep produced non-finite values");
        sol.log.push_back({slab, sweep, times[top] - times[bottom], change, resid});
        history.push_back(change);
        if (change < options.tol) {
          converged = true;
          break;
        }
      }
      if (converged) break;
      if (top - bottom <= 1)
        throw NonConvergenceError("equilibrium fixed point did not converge", history,
                                  {{"slab_end", std::to_string(times[top])}, {"sweeps", std::to_string(options.max_sweeps)}});
      bottom = top - (top - bottom) / 2;
      width = times[top] - times[bottom];
      add_warning(sol.warnings, "slab-halved", "fixed point stalled; slab width halved to " + std::to_string(width));
    }
    // Consistency pass: controls from the final diagonal, one column at a time.
    for (int j = top; j > bottom; --j) {
      if (j < top) psi[static_cast<size_t>(j)] = controls_at(j);
      rows_parallel(bottom, j - bottom, [&](int r) {
        steppers[static_cast<size_t>(r)].step_controlled(theta.at(r, j), times[j], times[j - 1],
                                                         psi[static_cast<size_t>(j)], theta.at(r, j - 1));
      });
    }
    psi[static_cast<size_t>(bottom)] = controls_at(bottom);
    // Rows anchored below the slab cross it under the converged controls.
    rows_parallel(0, bottom, [&](int r) { march(r, top, bottom); });
    top = bottom;
    ++slab;
  }

  sol.value = ValueField(times, space, m);
  sol.strategy = FeedbackStrategy(times, space, m, model.dynamics.controls);
  for (int k = 0; k < n; ++k) {
    sol.value.level(k) = theta.diagonal(k);
    sol.strategy.level(k) = psi[static_cast<size_t>(k)];
  }
  if (!sol.value.all_finite()) throw NumericError("equilibrium value not finite");
  return sol;
}

double residual(const Model& model, const EquilibriumSolution& solution) {
  const TwoTimeField& theta = solution.theta;
  const TimeGrid& times = theta.times();
  const SpatialGrid& grid = theta.grid();
  const int n = times.size(), last = n - 1, m = theta.regimes();
  const int d = solution.strategy.dimension();
  const double dx = grid.dx();
  const auto q = generator_nodes(model.generator, grid, m);
  double out = 0.0;
  for (int r = 0; r < last; ++r) {
    const double tau = times[r];
    for (int k = r; k < last; ++k) {
      const double s = times[k], dt = times[k + 1] - s;
      const Eigen::MatrixXd& v = theta.at(r, k);
      const Eigen::MatrixXd& v_next = theta.at(r, k + 1);
      const ControlLevel& u = solution.strategy.level(k);
      for (int x = grid.interior_begin(); x < grid.interior_end(); ++x) {
        const double xv = grid.x(x);
        for (int i = 0; i < m; ++i) {
          const Control c = u.row(x).segment(i * d, d).transpose();
          const double sig = model.dynamics.diffusion(s, xv, i, c);
          const double p = (v(x + 1, i) - v(x - 1, i)) / (2 * dx);
          const double pp = (v(x + 1, i) - 2 * v(x, i) + v(x - 1, i)) / (dx * dx);
          const double coupling = (*q)[static_cast<size_t>(x)].row(i).dot(v.row(x));
          const double value = (v_next(x, i) - v(x, i)) / dt + 0.5 * sig * sig * pp +
                               model.dynamics.drift(s, xv, i, c) * p + coupling +
                               model.running(tau, s, xv, i, v(x, i), p * sig, coupling, c);
          out = std::max(out, std::abs(value));
        }
      }
    }
  }
  return out;
}

PartitionDistance compare_to_partition(const EquilibriumSolution& solution, const PiSolution& pi) {
  const TwoTimeField& theta = solution.theta;
  const TimeGrid& times = theta.times();
  if (pi.times.nodes != times.nodes || !pi.value.grid().same_nodes(theta.grid()) ||
      pi.value.regimes() != theta.regimes())
    throw ConfigError("partition and equilibrium solutions use different grids");
  const SpatialGrid& grid = theta.grid();
  const int n = times.size(), last = n - 1;
  const double dx = grid.dx();
  PartitionDistance out;
  for (int r = 0; r < n; ++r) {
    const int k = pi.block_of(r);
    const int a = pi.knot_index[static_cast<size_t>(k - 1)];
    const ValueField& block = pi.blocks[static_cast<size_t>(k - 1)];
    for (int s = r; s <= last; ++s) {
      const Eigen::MatrixXd& u = block.level(s - a);
      const Eigen::MatrixXd& v = theta.at(r, s);
      for (int x = grid.interior_begin(); x < grid.interior_end(); ++x) {
        out.value = std::max(out.value, (u.row(x) - v.row(x)).cwiseAbs().maxCoeff());
        const Eigen::RowVectorXd du = (u.row(x + 1) - u.row(x - 1)) / (2 * dx);
        const Eigen::RowVectorXd dv = (v.row(x + 1) - v.row(x - 1)) / (2 * dx);
        out.gradient = std::max(out.gradient, (du - dv).cwiseAbs().maxCoeff());
      }
    }
  }
  out.strategy = strategy_sup_diff(pi.strategy, solution.strategy);
  return out;
}

}  // namespace rsctl

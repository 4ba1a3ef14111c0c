#include "rsctl/partition_game.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rsctl/equilibrium_solver.hpp"
#include "rsctl/errors.hpp"

namespace rsctl {

Partition::Partition(std::vector<double> knots) : knots_(std::move(knots)) {
  if (knots_.size() < 2) throw ConfigError("partition needs at least two knots");
  for (size_t k = 1; k < knots_.size(); ++k)
    if (!(knots_[k] > knots_[k - 1]))
      throw ConfigError("partition knots must be strictly increasing", {{"index", std::to_string(k)}});
}

Partition Partition::uniform(double horizon, int count) {
  if (count < 1 || !(horizon > 0)) throw ConfigError("uniform partition needs count >= 1 and T > 0");
  std::vector<double> knots(static_cast<size_t>(count) + 1);
  for (int k = 0; k <= count; ++k) knots[static_cast<size_t>(k)] = horizon * k / count;
  knots.back() = horizon;
  return Partition(std::move(knots));
}

double Partition::mesh() const {
  double out = 0.0;
  for (size_t k = 1; k < knots_.size(); ++k) out = std::max(out, knots_[k] - knots_[k - 1]);
  return out;
}

double anchor(const Partition& partition, double s) {
  const auto& t = partition.knots();
  if (s < t.front() || s > t.back()) throw DomainError("time outside the partition span", {{"s", std::to_string(s)}});
  if (s >= t[t.size() - 2]) return t[t.size() - 2];
  const auto it = std::upper_bound(t.begin(), t.end(), s);
  return *(it - 1);
}

int PiSolution::block_of(int s_idx) const {
  const int n = static_cast<int>(knot_index.size()) - 1;
  for (int k = 1; k < n; ++k)
    if (s_idx < knot_index[static_cast<size_t>(k)]) return k;
  return n;
}

PiSolution run_cycles(const Model& model, const Partition& partition, const SolverGrids& grids) {
  model.validate();
  const TimeGrid& times = grids.time;
  const int last = times.size() - 1;
  const int n_blocks = partition.count();
  PiSolution out;
  out.partition = partition;
  out.times = times;
  for (double t : partition.knots()) {
    const int idx = times.find(t);
    if (idx < 0) throw ConfigError("partition knot is not a time-grid node", {{"knot", std::to_string(t)}});
    out.knot_index.push_back(idx);
  }
  if (out.knot_index.front() != 0 || out.knot_index.back() != last)
    throw ConfigError("partition must span the time grid");

  const int m = model.regimes;
  const auto q = generator_nodes(model.generator, grids.space, m);
  out.value = ValueField(times, grids.space, m);
  out.strategy = FeedbackStrategy(times, grids.space, m, model.dynamics.controls);
  out.blocks.resize(static_cast<size_t>(n_blocks));

  for (int k = n_blocks; k >= 1; --k) {
    try {
      const int a = out.knot_index[static_cast<size_t>(k - 1)];
      const int b = out.knot_index[static_cast<size_t>(k)];
      const double anchor_time = times[a];
      const BackwardStepper stepper(anchored_problem(model, anchor_time, grids.space), q);
      stepper.check_step(times.max_step());
      ValueField block(times.slice(a, last), grids.space, m);
      block.level(last - a) = stepper.terminal_level();
      // Representation PDE on [t_k, T] under the strategy fixed by later players.
      for (int j = last; j > b; --j)
        stepper.step_controlled(block.level(j - a), times[j], times[j - 1], out.strategy.level(j),
                                block.level(j - 1 - a));
      // Player k optimizes on [t_{k-1}, t_k].
      std::vector<Warning> warnings;
      for (int j = b; j > a; --j) {
        out.strategy.level(j) = stepper.minimize(block.level(j - a), times[j], &warnings);
        stepper.step_controlled(block.level(j - a), times[j], times[j - 1], out.strategy.level(j),
                                block.level(j - 1 - a));
      }
      if (k == 1) out.strategy.level(0) = stepper.minimize(block.level(0), times[0], &warnings);
      for (const Warning& w : warnings)
        add_warning(out.warnings, w.code, w.message + " (cycle " + std::to_string(k) + ")", w.count);
      for (int j = a; j < b; ++j) out.value.level(j) = block.level(j - a);
      if (k == n_blocks) out.value.level(last) = block.level(last - a);
      if (!block.all_finite()) throw NumericError("cycle produced non-finite values");
      out.blocks[static_cast<size_t>(k - 1)] = std::move(block);
    } catch (Error& e) {
      e.add_context("cycle", std::to_string(k));
      throw;
    }
  }
  return out;
}

double strategy_sup_diff(const FeedbackStrategy& a, const FeedbackStrategy& b) {
  if (a.times().size() != b.times().size() || !a.grid().same_nodes(b.grid()) || a.regimes() != b.regimes() ||
      a.dimension() != b.dimension())
    throw ConfigError("strategies live on different grids");
  const SpatialGrid& g = a.grid();
  double out = 0.0;
  for (int k = 0; k < a.times().size(); ++k)
    for (int x = g.interior_begin(); x < g.interior_end(); ++x)
      out = std::max(out, (a.level(k).row(x) - b.level(k).row(x)).cwiseAbs().maxCoeff());
  return out;
}

std::vector<ConvergenceRow> refine_and_compare(const Model& model, const std::vector<Partition>& partitions,
                                              const SolverGrids& grids, const EquilibriumSolution* equilibrium) {
  std::vector<ConvergenceRow> table;
  std::optional<PiSolution> previous;
  for (const Partition& p : partitions) {
    PiSolution sol = run_cycles(model, p, grids);
    ConvergenceRow row;
    row.count = p.count();
    row.mesh = p.mesh();
    if (previous) {
      row.sup_diff_value = interior_sup_diff(sol.value, previous->value);
      row.sup_diff_strategy = strategy_sup_diff(sol.strategy, previous->strategy);
    }
    if (equilibrium) row.distance_to_equilibrium = compare_to_partition(*equilibrium, sol).value;
    table.push_back(row);
    previous = std::move(sol);
  }
  return table;
}

}  // namespace rsctl

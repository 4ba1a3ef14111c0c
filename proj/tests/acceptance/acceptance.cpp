// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include "rsctl/cost_evaluator.hpp"
#include "rsctl/equilibrium_solver.hpp"
#include "rsctl/merton.hpp"
#include "rsctl/partition_game.hpp"
#include "rsctl/pde_core.hpp"
#include "rsctl/presets.hpp"
#include "rsctl/sde_engine.hpp"

using namespace rsctl;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Verdict()>& check) {
  const auto start = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = check();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!v.pass) ++failures;
  std::printf("%s %2d %-28s %s (%.1f s)\n", v.pass ? "PASS" : "FAIL", id, name.c_str(), v.detail.c_str(), seconds);
  std::fflush(stdout);
}

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

double elapsed_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

int workers() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

/// Shared Merton equilibrium on the default production grid.
struct MertonReference {
  MertonSpec spec = MertonSpec::hyperbolic();
  Model model = merton_model(spec);
  SolverGrids grids{merton_grid(spec, 0.25, 2.25, 201, 20), TimeGrid::uniform(0, 1, 320)};
  EquilibriumSolution solution = solve_equilibrium(model, grids);
};

const MertonReference& merton_reference() {
  static const MertonReference ref;
  return ref;
}

Verdict transition_rates() {
  const auto start = std::chrono::steady_clock::now();
  const SwitchingMechanism tanh = switching_preset("tanh");
  const Model model = quadratic_model(tanh);
  double worst = 0.0;
  for (double x : {-1.0, 0.0, 1.0}) {
    const Eigen::MatrixXd q = rate_matrix(tanh.geometry, tanh.levy, x);
    for (int i = 0; i < 2; ++i) {
      const RateEstimate est =
          estimate_transition_rate(model.dynamics, tanh.geometry, tanh.levy, x, i, 1 - i, 1e-3, 100000,
                                   101 + static_cast<std::uint64_t>(10 * (x + 1) + i), workers());
      worst = std::max(worst, std::abs(est.rate - q(i, 1 - i)) / est.standard_error);
    }
  }
  const double seconds = elapsed_since(start);
  return {worst < 3.0 && seconds < 30.0, fmt("max |z| = %.2f, %.1f s", worst, seconds)};
}

Verdict generator_validity() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> draw(-10.0, 10.0);
  double worst = 0.0;
  bool diagonal_empty = true;
  for (const char* name : {"tanh", "affine", "constant"}) {
    const SwitchingMechanism mech = switching_preset(name);
    for (int k = 0; k < 1000; ++k) {
      const double x = draw(rng);
      const Eigen::MatrixXd q = rate_matrix(mech.geometry, mech.levy, x);
      for (int i = 0; i < q.rows(); ++i) {
        const double scale = std::max(q.row(i).cwiseAbs().sum(), 1e-300);
        worst = std::max(worst, std::abs(q.row(i).sum()) / scale);
        diagonal_empty &= mech.geometry.interval(i, i, x).empty();
      }
    }
  }
  return {worst <= 1e-12 && diagonal_empty, fmt("max relative row sum %.1e, diagonal intervals empty: %s", worst,
                                                diagonal_empty ? "yes" : "no")};
}

/// Constant invested and consumed fractions of wealth, stored on the grid.
FeedbackStrategy proportional(const Model& model, const SolverGrids& grids, double invested, double consumed) {
  FeedbackStrategy s(grids.time, grids.space, model.regimes, model.dynamics.controls);
  for (int k = 0; k < grids.time.size(); ++k)
    for (int x = 0; x < grids.space.n_x; ++x) {
      const double w = std::max(grids.space.x(x), 0.0);
      Control u(2);
      u << invested * w, consumed * w;
      for (int i = 0; i < model.regimes; ++i) s.set(k, x, i, u);
    }
  return s;
}

Verdict verification_inequality() {
  const auto start = std::chrono::steady_clock::now();
  const MertonSpec spec = MertonSpec::hyperbolic();
  const Model model = merton_model(spec);
  const SolverGrids grids{merton_grid(spec, 0.25, 2.25, 101, 10), TimeGrid::uniform(0, 1, 160)};
  const SolverGrids fine{merton_grid(spec, 0.25, 2.25, 201, 20), TimeGrid::uniform(0, 1, 320)};
  const HjbSolution hjb = solve_hjb(anchored_problem(model, 0.0, grids.space), grids.time);
  const HjbSolution hjb_fine = solve_hjb(anchored_problem(model, 0.0, fine.space), fine.time);
  const SpatialGrid& g = grids.space;
  // Measured grid error: coarse against fine HJB at shared nodes.
  double grid_error = 0.0;
  for (int x = g.interior_begin(); x < g.interior_end(); ++x)
    for (int i = 0; i < 2; ++i) {
      const int xf = static_cast<int>(std::lround((g.x(x) - fine.space.x_min) / fine.space.dx()));
      grid_error = std::max(grid_error, std::abs(hjb.value(0, x, i) - hjb_fine.value(0, xf, i)));
    }
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> draw(0.0, 1.5);
  double worst = -1e300;
  for (int trial = 0; trial < 5; ++trial) {
    const double invested = draw(rng), consumed = draw(rng);
    const RecursiveCostField cost = evaluate_cost(model, proportional(model, grids, invested, consumed), 0.0, grids);
    for (int x = g.interior_begin(); x < g.interior_end(); ++x)
      for (int i = 0; i < 2; ++i) worst = std::max(worst, hjb.value(0, x, i) - cost.value(x, i));
  }
  const double seconds = elapsed_since(start);
  return {worst <= 2 * grid_error && seconds < 120.0,
          fmt("max(V - J) = %.2e, grid error %.2e, %.1f s", worst, grid_error, seconds)};
}

PDEProblem heat(double diffusion, double x_min, double x_max, int n_x, std::function<double(double, int)> terminal) {
  PDEProblem p;
  p.grid = SpatialGrid(x_min, x_max, n_x, 0);
  p.regimes = 1;
  p.diffusion = [diffusion](double, double, int) { return diffusion; };
  p.drift = [](double, double, int) { return 0.0; };
  p.terminal = std::move(terminal);
  return p;
}

Verdict kernel_oracle_agreement() {
  const auto bump = [](double x, int) { return std::abs(x) < 1 ? std::exp(1.0 - 1.0 / (1.0 - x * x)) : 0.0; };
  const PDEProblem p = heat(0.1, -4, 4, 401, bump);
  const ValueField v = solve_linear_parabolic(p, TimeGrid::uniform(0, 1, 400));
  const ValueField oracle = kernel_oracle(p, TimeGrid({0.0, 0.25, 0.5, 0.75, 1.0}));
  double err = 0.0;
  for (int k = 0; k < 5; ++k)
    for (int x = p.grid.interior_begin(); x < p.grid.interior_end(); ++x)
      err = std::max(err, std::abs(v(100 * k, x, 0) - oracle(k, x, 0)));
  return {err <= 1e-3, fmt("interior sup %.2e", err)};
}

double manufactured_error(int n_x, int n_t) {
  const auto exact = [](double s, double x) { return std::exp(-s) * (1 + x * x); };
  PDEProblem p;
  p.grid = SpatialGrid(-1.0, 1.0, n_x, 0);
  p.grid.left = BoundaryCondition::dirichlet([exact](double s, int) { return exact(s, -1.0); });
  p.grid.right = BoundaryCondition::dirichlet([exact](double s, int) { return exact(s, 1.0); });
  p.diffusion = [](double, double, int) { return 0.2; };
  p.drift = [](double, double, int) { return 0.3; };
  p.source = [exact](double s, double x, int, double, double, double) {
    return exact(s, x) - 0.4 * std::exp(-s) - 0.6 * x * std::exp(-s);
  };
  p.terminal = [exact](double x, int) { return exact(1.0, x); };
  const TimeGrid times = TimeGrid::uniform(0, 1, n_t);
  const ValueField v = solve_linear_parabolic(p, times);
  double err = 0.0;
  for (int k = 0; k < times.size(); ++k)
    for (int x = p.grid.interior_begin(); x < p.grid.interior_end(); ++x)
      err = std::max(err, std::abs(v(k, x, 0) - exact(times[k], p.grid.x(x))));
  return err;
}

Verdict convergence_order() {
  const double e1 = manufactured_error(21, 20), e2 = manufactured_error(41, 40), e3 = manufactured_error(81, 80);
  const double r1 = e1 / e2, r2 = e2 / e3;
  return {r1 >= 3 && r1 <= 5 && r2 >= 3 && r2 <= 5, fmt("ratios %.2f, %.2f", r1, r2)};
}

Verdict time_consistent_collapse() {
  const Model model = quadratic_model(switching_preset("tanh", -2.0, 2.0), 0.0, 1.0);
  const SolverGrids grids{SpatialGrid(-2.0, 2.0, 81, 8), TimeGrid::uniform(0.0, 1.0, 80)};
  const PiSolution one = run_cycles(model, Partition::uniform(1.0, 1), grids);
  const PiSolution four = run_cycles(model, Partition::uniform(1.0, 4), grids);
  const double partition_gap = interior_sup_diff(one.value, four.value);
  const EquilibriumSolution eq = solve_equilibrium(model, grids);
  const SpatialGrid& g = grids.space;
  double anchor_gap = 0.0;
  for (int s = 0; s < grids.time.size(); ++s)
    for (int r = 0; r <= s; ++r)
      anchor_gap = std::max(anchor_gap, (eq.theta.at(r, s) - eq.theta.at(0, s))
                                            .middleRows(g.interior_begin(), g.interior_end() - g.interior_begin())
                                            .cwiseAbs()
                                            .maxCoeff());
  return {partition_gap <= 1e-6 && anchor_gap <= 1e-6,
          fmt("|V(N=1) - V(N=4)| = %.1e, max anchor spread %.1e", partition_gap, anchor_gap)};
}

Verdict merton_reduction() {
  const TimeGrid times = TimeGrid::uniform(0, 1, 200);
  const MertonSpec free = MertonSpec::anchor_free();
  const Eigen::MatrixXd tc = solve_time_consistent(free, times);
  const EquilibriumPhi eq = solve_equilibrium_ode(free, times);
  double reduction = 0.0;
  for (int r = 0; r < times.size(); ++r)
    for (int s = r; s < times.size(); ++s)
      for (int i = 0; i < 2; ++i) reduction = std::max(reduction, std::abs(eq.at(r, s, i) - tc(s, i)));

  MertonSpec single;
  single.drift = {0.08};
  single.volatility = {0.3};
  single.gamma = 0.4;
  single.consumption_weight = [](double, double) { return 0.0; };
  single.bequest_weight = [](double) { return 1.7; };
  single.generator = Eigen::MatrixXd::Zero(1, 1);
  single.horizon = 2.0;
  const TimeGrid long_times = TimeGrid::uniform(0, 2, 200);
  const Eigen::MatrixXd phi = solve_time_consistent(single, long_times);
  const double growth = 0.4 * 0.08 * 0.08 / (2 * 0.6 * 0.09);
  double closed = 0.0;
  for (int k = 0; k < long_times.size(); ++k)
    closed = std::max(closed, std::abs(phi(k, 0) - 1.7 * std::exp(growth * (2 - long_times[k]))));
  return {reduction <= 1e-8 && closed <= 1e-8, fmt("|eq - tc| = %.1e, closed form %.1e", reduction, closed)};
}

Verdict ansatz_cross_validation() {
  const MertonReference& ref = merton_reference();
  const EquilibriumPhi phi = solve_equilibrium_ode(ref.spec, ref.grids.time);
  const SpatialGrid& g = ref.grids.space;
  double err = 0.0;
  for (int r = 0; r < ref.grids.time.size(); r += 2)
    for (int s = r; s < ref.grids.time.size(); ++s)
      for (int x = g.interior_begin(); x < g.interior_end(); ++x)
        for (int i = 0; i < 2; ++i) {
          const double exact = -phi.at(r, s, i) * std::pow(g.x(x), ref.spec.gamma);
          err = std::max(err, std::abs(ref.solution.theta.at(r, s)(x, i) - exact) / std::abs(exact));
        }
  return {err <= 5e-3, fmt("max relative error %.2e", err)};
}

Verdict monte_carlo_value() {
  const auto start = std::chrono::steady_clock::now();
  const MertonSpec spec = MertonSpec::hyperbolic();
  const EquilibriumPhi phi = solve_equilibrium_ode(spec, TimeGrid::uniform(0, 1, 1000));
  const double x = 1.0;
  double worst = 0.0;
  std::string detail;
  for (int i = 0; i < 2; ++i) {
    const MonteCarloEstimate est =
        monte_carlo_payoff(spec, equilibrium_fractions(spec, phi), 0.0, x, i, 100000, 900 + i, 1e-3, workers());
    const double predicted = phi.diagonal(0, i) * std::pow(x, spec.gamma);
    const double z = std::abs(est.estimate - predicted) / est.standard_error;
    worst = std::max(worst, z);
    detail += fmt("regime %d: %.5f vs %.5f (z %.2f); ", i + 1, est.estimate, predicted, z);
  }
  const double seconds = elapsed_since(start);
  return {worst < 3.0 && seconds < 120.0, detail + fmt("%.1f s", seconds)};
}

Verdict partition_convergence() {
  const MertonReference& ref = merton_reference();
  double d[3];
  const int counts[3] = {8, 16, 32};
  for (int k = 0; k < 3; ++k)
    d[k] = compare_to_partition(ref.solution, run_cycles(ref.model, Partition::uniform(1.0, counts[k]), ref.grids)).value;
  const double r1 = d[0] / d[1], r2 = d[1] / d[2];
  const bool ok = d[1] < d[0] && d[2] < d[1] && r1 >= 1.5 && r1 <= 2.5 && r2 >= 1.5 && r2 <= 2.5;
  return {ok, fmt("distances %.4f, %.4f, %.4f; ratios %.2f, %.2f", d[0], d[1], d[2], r1, r2)};
}

Verdict local_optimality() {
  const MertonReference& ref = merton_reference();
  const Control matched = ref.solution.strategy(0.5, 0.75, 0);
  const SpikeStudy study = spike_study(ref.model, ref.solution, 0.5, Perturbation::constant(matched));
  double worst_constant = 0.0;
  bool bounded = true;
  for (size_t k = 0; k < study.results.size(); ++k) {
    worst_constant = std::max(worst_constant, study.constants[k]);
    bounded &= study.results[k].min_gain >= -study.constants[k] * study.results[k].epsilon * (1 + 1e-12);
  }
  return {bounded && study.constants_stable && study.fit.intercept >= -1e-3,
          fmt("min gains %.2e, %.2e, %.2e; C = %.2e, stable: %s; intercept %.2e", study.results[0].min_gain,
              study.results[1].min_gain, study.results[2].min_gain, worst_constant,
              study.constants_stable ? "yes" : "no", study.fit.intercept)};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

Verdict reproducibility() {
  const fs::path root = fs::temp_directory_path() / "rsctl-acceptance-repro";
  fs::remove_all(root);
  long compared = 0;
  for (const char* sub : {"equilibrium", "simulate"}) {
    for (const char* run : {"a", "b"}) {
      const std::string cmd = std::string(RSCTL_BINARY) + " " + sub + " --config " + RSCTL_SOURCE_DIR +
                              "/configs/merton.yaml --output " + (root / sub / run).string() + " > /dev/null";
      if (std::system(cmd.c_str()) != 0) return {false, "command failed: " + cmd};
    }
    for (const auto& entry : fs::directory_iterator(root / sub / "a")) {
      const fs::path other = root / sub / "b" / entry.path().filename();
      if (!fs::exists(other) || slurp(entry.path()) != slurp(other))
        return {false, "differs: " + entry.path().filename().string()};
      ++compared;
    }
  }
  return {compared > 0, fmt("%ld artifacts byte-identical", compared)};
}

}  // namespace

int main() {
  report(1, "transition-rate law", transition_rates);
  report(2, "generator validity", generator_validity);
  report(3, "verification inequality", verification_inequality);
  report(4, "kernel oracle", kernel_oracle_agreement);
  report(5, "convergence order", convergence_order);
  report(6, "time-consistent collapse", time_consistent_collapse);
  report(7, "Merton reduction", merton_reduction);
  report(8, "ansatz cross-validation", ansatz_cross_validation);
  report(9, "Monte Carlo vs ODE value", monte_carlo_value);
  report(10, "partition convergence", partition_convergence);
  report(11, "approximate local optimality", local_optimality);
  report(12, "reproducibility", reproducibility);
  return failures == 0 ? 0 : 1;
}

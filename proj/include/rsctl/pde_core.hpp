#pragma once

// Finite-difference solvers for coupled m-regime backward parabolic systems
//
//   V_s + a V_xx + beta V_x + [Q(x) V]_i + g(s, x, i, V_i, V_x, [QV]_i) = 0,  V(T) = terminal,
//
// and for HJB systems where (a, beta, g) come from a control chosen per node.
//
// Scheme: Crank-Nicolson for diffusion and drift, per-regime tridiagonal solves; the coupling
// and the source are explicit (Heun predictor-corrector between the two time levels).

#include <Eigen/Core>

#include <atomic>
#include <memory>
#include <optional>
#include <vector>

#include "rsctl/errors.hpp"
#include "rsctl/grid.hpp"
#include "rsctl/model.hpp"

namespace rsctl {

using LinearCoefficient = std::function<double(double s, double x, int regime)>;
/// g(s, x, i, y, p, coupling) with p = V_x.
using LinearSource = std::function<double(double s, double x, int regime, double y, double p, double coupling)>;
/// g(s, x, i, y, z, coupling, u) with z = V_x * sigma.
using ControlledSource =
    std::function<double(double s, double x, int regime, double y, double z, double coupling, const Control& u)>;
using PointMinimizer =
    std::function<Control(double s, double x, int regime, double y, double coupling, double p, double pp)>;

struct HamiltonianBlock {
  ControlSet controls;
  ControlledCoefficient drift;
  ControlledCoefficient diffusion;
  ControlledSource running;
  PointMinimizer minimizer;  ///< optional; grid search over U otherwise
  int search_points = 257;
  std::shared_ptr<std::atomic<long>> clamp_events;
};

struct PDEProblem {
  SpatialGrid grid;
  int regimes = 1;
  GeneratorFunction coupling;  ///< empty means Q = 0
  LinearCoefficient diffusion;  ///< a(s, x, i) >= 0
  LinearCoefficient drift;
  LinearSource source;  ///< optional
  std::function<double(double x, int regime)> terminal;
  std::optional<Eigen::MatrixXd> terminal_values;  ///< overrides `terminal` when set
  std::optional<HamiltonianBlock> hamiltonian;
  double ellipticity = 0.0;
};

/// Problem for a fixed anchor tau: terminal h(tau, .), running cost g(tau, ...).
PDEProblem anchored_problem(const Model& model, double anchor, const SpatialGrid& grid);

/// Per-node generator matrices for a grid.
using GeneratorNodes = std::vector<Eigen::MatrixXd>;
std::shared_ptr<const GeneratorNodes> generator_nodes(const GeneratorFunction& q, const SpatialGrid& grid,
                                                      int regimes);

/// Backward time stepping for one problem. Stateless between calls; safe to share across threads.
class BackwardStepper {
 public:
  explicit BackwardStepper(PDEProblem problem, std::shared_ptr<const GeneratorNodes> q_nodes = nullptr);

  const PDEProblem& problem() const { return problem_; }
  const std::shared_ptr<const GeneratorNodes>& q_nodes() const { return q_; }
  double coupling_bound() const { return coupling_bound_; }

  Eigen::MatrixXd terminal_level() const;

  /// Hamiltonian minimizer at every node given the level at time s.
  ControlLevel minimize(const Eigen::MatrixXd& level, double s, std::vector<Warning>* warnings = nullptr) const;

  /// Step V(s_next) -> V(s_prev) with frozen per-node controls (Hamiltonian block).
  void step_controlled(const Eigen::MatrixXd& v_next, double s_next, double s_prev, const ControlLevel& u,
                       Eigen::MatrixXd& v_prev) const;

  /// Step V(s_next) -> V(s_prev) for the linear block.
  void step_linear(const Eigen::MatrixXd& v_next, double s_next, double s_prev, Eigen::MatrixXd& v_prev) const;

  /// Configuration error when dt * max|q_ii| >= 1.
  void check_step(double dt) const;

 private:
  PDEProblem problem_;
  std::shared_ptr<const GeneratorNodes> q_;
  double coupling_bound_ = 0.0;
};

ValueField solve_linear_parabolic(const PDEProblem& problem, const TimeGrid& times);

struct HjbSolution {
  ValueField value;
  FeedbackStrategy strategy;
  std::vector<Warning> warnings;
};

/// Policy-evaluation splitting: minimize at the known level, freeze, take one linear step.
HjbSolution solve_hjb(const PDEProblem& problem, const TimeGrid& times);

/// Representation PDE with the Hamiltonian block's coefficients closed under a given strategy.
ValueField solve_closed_loop(const PDEProblem& problem, const FeedbackStrategy& strategy, const TimeGrid& times);

/// Same, starting from an explicit terminal level (used for block and spike solves).
ValueField solve_closed_loop(const BackwardStepper& stepper, const FeedbackStrategy& strategy,
                             const TimeGrid& times, const Eigen::MatrixXd& terminal);

/// sigma^2/2 D^2V + b DV + [Q(x) V]_i at an interior node, central differences.
double apply_generator(const ValueField& field, int s_idx, int x_idx, int regime, const Control& u,
                       const ControlledDynamics& dynamics, const GeneratorFunction& q);

/// Gaussian-convolution solution for constant a per regime, zero drift, source and coupling.
ValueField kernel_oracle(const PDEProblem& problem, const TimeGrid& times);

}  // namespace rsctl

#include "rsctl/pde_core.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "rsctl/numerics.hpp"

namespace rsctl {
namespace {

/// Boundary value as an affine map of the two nearest inner nodes:
/// V_edge = c0 + c1 * V_near1 + c2 * V_near2.
struct EdgeMap {
  double c0 = 0.0, c1 = 2.0, c2 = -1.0;
};

EdgeMap edge_map(const BoundaryCondition& bc, bool left, double dx, double s, int regime) {
  switch (bc.kind) {
    case BoundaryKind::LinearExtrapolation:
      return {0.0, 2.0, -1.0};
    case BoundaryKind::Dirichlet:
      return {bc.value(s, regime), 0.0, 0.0};
    case BoundaryKind::Robin: {
      const double a = bc.value_coef, b = bc.slope_coef;
      const double denom = left ? a - 1.5 * b / dx : a + 1.5 * b / dx;
      if (denom == 0.0) throw ConfigError("Robin boundary condition is degenerate on this grid");
      const double sign = left ? -1.0 : 1.0;
      return {bc.rhs / denom, sign * (2.0 * b / dx) / denom, -sign * (0.5 * b / dx) / denom};
    }
  }
  return {};
}

void apply_edges(const SpatialGrid& grid, double s, int regime, Eigen::Ref<Eigen::VectorXd> col) {
  const int n = grid.n_x;
  const double dx = grid.dx();
  const EdgeMap l = edge_map(grid.left, true, dx, s, regime);
  const EdgeMap r = edge_map(grid.right, false, dx, s, regime);
  col[0] = l.c0 + l.c1 * col[1] + l.c2 * col[2];
  col[n - 1] = r.c0 + r.c1 * col[n - 2] + r.c2 * col[n - 3];
}

double coupling_term(const GeneratorNodes& q, const Eigen::MatrixXd& v, int k, int regime) {
  return q[static_cast<size_t>(k)].row(regime).dot(v.row(k));
}

/// One backward Crank-Nicolson step. coef(s, k, i) -> {a, beta};
/// src(s, k, i, y, p, coupling) -> g. Coupling and g are explicit (Heun).
template <class CoefFn, class SrcFn>
void cn_step(const PDEProblem& problem, const GeneratorNodes& q, bool explicit_terms, const Eigen::MatrixXd& v_next,
             double s_next, double s_prev, CoefFn&& coef, SrcFn&& src, Eigen::MatrixXd& v_prev) {
  const SpatialGrid& grid = problem.grid;
  const int n = grid.n_x, m = problem.regimes, inner = n - 2;
  const double dx = grid.dx(), dt = s_next - s_prev;
  const double idx2 = 1.0 / (dx * dx), i2dx = 0.5 / dx;

  auto explicit_part = [&](const Eigen::MatrixXd& v, double s, Eigen::MatrixXd& out) {
    out.resize(n, m);
    for (int i = 0; i < m; ++i)
      for (int k = 1; k < n - 1; ++k) {
        const double c = coupling_term(q, v, k, i);
        const double p = (v(k + 1, i) - v(k - 1, i)) * i2dx;
        out(k, i) = c + src(s, k, i, v(k, i), p, c);
      }
  };

  // Right-hand side from the known level, and one factorization per regime.
  Eigen::MatrixXd base(inner, m);
  std::vector<TridiagonalFactor<double>> factors(static_cast<size_t>(m));
  Eigen::VectorXd lower(inner), diag(inner), upper(inner);
  for (int i = 0; i < m; ++i) {
    for (int k = 1; k < n - 1; ++k) {
      const auto [a, b] = coef(s_next, k, i);
      const double lv = a * (v_next(k + 1, i) - 2 * v_next(k, i) + v_next(k - 1, i)) * idx2 +
                        b * (v_next(k + 1, i) - v_next(k - 1, i)) * i2dx;
      base(k - 1, i) = v_next(k, i) + 0.5 * dt * lv;
    }
    for (int k = 1; k < n - 1; ++k) {
      const auto [a, b] = coef(s_prev, k, i);
      lower[k - 1] = -0.5 * dt * (a * idx2 - b * i2dx);
      diag[k - 1] = 1.0 + dt * a * idx2;
      upper[k - 1] = -0.5 * dt * (a * idx2 + b * i2dx);
    }
    // Eliminate the edge unknowns through their boundary maps.
    const EdgeMap l = edge_map(grid.left, true, dx, s_prev, i);
    const EdgeMap r = edge_map(grid.right, false, dx, s_prev, i);
    diag[0] += lower[0] * l.c1;
    upper[0] += lower[0] * l.c2;
    base(0, i) -= lower[0] * l.c0;
    lower[0] = 0.0;
    diag[inner - 1] += upper[inner - 1] * r.c1;
    lower[inner - 1] += upper[inner - 1] * r.c2;
    base(inner - 1, i) -= upper[inner - 1] * r.c0;
    upper[inner - 1] = 0.0;
    factors[static_cast<size_t>(i)].factor(lower, diag, upper);
  }

  auto solve_all = [&](const Eigen::MatrixXd& extra) {
    v_prev.resize(n, m);
    Eigen::VectorXd rhs(inner);
    for (int i = 0; i < m; ++i) {
      rhs = base.col(i);
      if (extra.size()) rhs += extra.col(i).segment(1, inner);
      factors[static_cast<size_t>(i)].solve(rhs);
      v_prev.col(i).segment(1, inner) = rhs;
      apply_edges(grid, s_prev, i, v_prev.col(i));
    }
  };

  if (!explicit_terms) {
    solve_all(Eigen::MatrixXd());
    return;
  }
  Eigen::MatrixXd f_next, f_pred;
  explicit_part(v_next, s_next, f_next);
  solve_all(dt * f_next);
  explicit_part(v_prev, s_prev, f_pred);
  solve_all(0.5 * dt * (f_next + f_pred));
}

void check_diffusion(double a, const PDEProblem& problem, bool controlled, double s, double x, int regime) {
  if (!(a >= 0) || !std::isfinite(a))
    throw ConfigError("diffusion coefficient must be finite and nonnegative",
                      {{"s", std::to_string(s)}, {"x", std::to_string(x)}, {"regime", std::to_string(regime + 1)}});
  if (controlled && problem.ellipticity > 0 && a < problem.ellipticity)
    throw ConfigError("ellipticity bound a >= lambda fails",
                      {{"s", std::to_string(s)}, {"x", std::to_string(x)}, {"regime", std::to_string(regime + 1)}});
}

void validate_problem(const PDEProblem& problem) {
  problem.grid.validate();
  if (problem.grid.n_x < 5) throw ConfigError("solvers need n_x >= 5");
  if (problem.regimes < 1) throw ConfigError("regime count must be positive");
  if (!problem.terminal && !problem.terminal_values) throw ConfigError("terminal data missing");
  if (problem.terminal_values &&
      (problem.terminal_values->rows() != problem.grid.n_x || problem.terminal_values->cols() != problem.regimes))
    throw ConfigError("terminal level has the wrong shape");
}

}  // namespace

PDEProblem anchored_problem(const Model& model, double anchor, const SpatialGrid& grid) {
  PDEProblem p;
  p.grid = grid;
  p.regimes = model.regimes;
  p.coupling = model.generator;
  const TerminalCost h = model.terminal;
  p.terminal = [h, anchor](double x, int i) { return h(anchor, x, i); };
  HamiltonianBlock hb;
  hb.controls = model.dynamics.controls;
  hb.drift = model.dynamics.drift;
  hb.diffusion = model.dynamics.diffusion;
  const RunningCost g = model.running;
  if (g)
    hb.running = [g, anchor](double s, double x, int i, double y, double z, double c, const Control& u) {
      return g(anchor, s, x, i, y, z, c, u);
    };
  if (model.minimizer) {
    const Minimizer psi = model.minimizer;
    hb.minimizer = [psi, anchor](double s, double x, int i, double y, double c, double pv, double pp) {
      return psi(anchor, s, x, i, y, c, pv, pp);
    };
  }
  hb.clamp_events = model.clamp_events;
  p.hamiltonian = std::move(hb);
  p.ellipticity = model.ellipticity;
  return p;
}

std::shared_ptr<const GeneratorNodes> generator_nodes(const GeneratorFunction& q, const SpatialGrid& grid,
                                                      int regimes) {
  auto nodes = std::make_shared<GeneratorNodes>();
  nodes->reserve(static_cast<size_t>(grid.n_x));
  for (int k = 0; k < grid.n_x; ++k) {
    Eigen::MatrixXd qk = q ? q(grid.x(k)) : Eigen::MatrixXd::Zero(regimes, regimes);
    if (qk.rows() != regimes || qk.cols() != regimes) throw ConfigError("generator has the wrong size");
    if (!qk.allFinite()) throw NumericError("generator not finite", {{"x", std::to_string(grid.x(k))}});
    nodes->push_back(std::move(qk));
  }
  return nodes;
}

// ------------------------------------------------------------ BackwardStepper

BackwardStepper::BackwardStepper(PDEProblem problem, std::shared_ptr<const GeneratorNodes> q_nodes)
    : problem_(std::move(problem)), q_(std::move(q_nodes)) {
  validate_problem(problem_);
  if (!q_) q_ = generator_nodes(problem_.coupling, problem_.grid, problem_.regimes);
  if (static_cast<int>(q_->size()) != problem_.grid.n_x) throw ConfigError("generator nodes do not match the grid");
  for (const auto& qk : *q_) coupling_bound_ = std::max(coupling_bound_, qk.diagonal().cwiseAbs().maxCoeff());
}

Eigen::MatrixXd BackwardStepper::terminal_level() const {
  if (problem_.terminal_values) return *problem_.terminal_values;
  Eigen::MatrixXd v(problem_.grid.n_x, problem_.regimes);
  for (int k = 0; k < problem_.grid.n_x; ++k)
    for (int i = 0; i < problem_.regimes; ++i) v(k, i) = problem_.terminal(problem_.grid.x(k), i);
  if (!v.allFinite()) throw NumericError("terminal data not finite");
  return v;
}

void BackwardStepper::check_step(double dt) const {
  if (dt * coupling_bound_ >= 1.0)
    throw ConfigError("time step violates the explicit coupling bound dt * max|q_ii| < 1",
                      {{"dt", std::to_string(dt)}, {"max_q", std::to_string(coupling_bound_)}});
}

ControlLevel BackwardStepper::minimize(const Eigen::MatrixXd& level, double s, std::vector<Warning>* warnings) const {
  if (!problem_.hamiltonian) throw ConfigError("Hamiltonian block required");
  const HamiltonianBlock& hb = *problem_.hamiltonian;
  const SpatialGrid& grid = problem_.grid;
  const int n = grid.n_x, m = problem_.regimes, d = hb.controls.dimension();
  const double dx = grid.dx();
  ControlLevel out(n, m * d);
  const long clamps_before = hb.clamp_events ? hb.clamp_events->load() : 0;
  long truncated = 0;
  Control clamp_used;
  std::vector<Control> candidates;
  if (!hb.minimizer) candidates = hb.controls.search_grid(hb.search_points);
  for (int i = 0; i < m; ++i) {
    const auto col = level.col(i);
    for (int k = 0; k < n; ++k) {
      const double x = grid.x(k);
      const double y = level(k, i);
      const double c = coupling_term(*q_, level, k, i);
      const double p = first_difference(col, k, dx);
      const double pp = second_difference(col, k, dx);
      Control best;
      if (hb.minimizer) {
        best = hb.controls.clamp(hb.minimizer(s, x, i, y, c, p, pp));
      } else {
        double best_h = std::numeric_limits<double>::infinity();
        for (const Control& u : candidates) {
          const double sig = hb.diffusion(s, x, i, u);
          double h = p * hb.drift(s, x, i, u) + 0.5 * sig * sig * pp + c;
          if (hb.running) h += hb.running(s, x, i, y, p * sig, c, u);
          if (h < best_h) {
            best_h = h;
            best = u;
          }
        }
        if (!std::isfinite(best_h)) throw NumericError("Hamiltonian not finite over the control grid",
                                                       {{"s", std::to_string(s)}, {"x", std::to_string(x)}});
        if (hb.controls.on_truncation_edge(best)) {
          ++truncated;
          clamp_used = best;
        }
      }
      out.row(k).segment(i * d, d) = best.transpose();
    }
  }
  if (warnings) {
    if (truncated > 0) {
      std::string clamp;
      for (Eigen::Index a = 0; a < clamp_used.size(); ++a) clamp += (a ? "," : "") + std::to_string(clamp_used[a]);
      add_warning(*warnings, "hamiltonian-truncation",
                  "minimum at the search clamp of an unbounded control axis; clamp used (" + clamp + ")", truncated);
    }
    const long fired = hb.clamp_events ? hb.clamp_events->load() - clamps_before : 0;
    if (fired > 0)
      add_warning(*warnings, "psi-clamp", "derivative inputs of psi clamped away from zero", fired);
  }
  return out;
}

void BackwardStepper::step_controlled(const Eigen::MatrixXd& v_next, double s_next, double s_prev,
                                      const ControlLevel& u, Eigen::MatrixXd& v_prev) const {
  if (!problem_.hamiltonian) throw ConfigError("Hamiltonian block required");
  const HamiltonianBlock& hb = *problem_.hamiltonian;
  const SpatialGrid& grid = problem_.grid;
  const int d = hb.controls.dimension();
  auto control_at = [&](int k, int i) -> Control { return u.row(k).segment(i * d, d).transpose(); };
  auto coef = [&](double s, int k, int i) {
    const double x = grid.x(k);
    const Control c = control_at(k, i);
    const double sig = hb.diffusion(s, x, i, c);
    const double a = 0.5 * sig * sig;
    check_diffusion(a, problem_, true, s, x, i);
    return std::pair<double, double>{a, hb.drift(s, x, i, c)};
  };
  auto src = [&](double s, int k, int i, double y, double p, double c) {
    if (!hb.running) return 0.0;
    const double x = grid.x(k);
    const Control ctl = control_at(k, i);
    return hb.running(s, x, i, y, p * hb.diffusion(s, x, i, ctl), c, ctl);
  };
  cn_step(problem_, *q_, true, v_next, s_next, s_prev, coef, src, v_prev);
}

void BackwardStepper::step_linear(const Eigen::MatrixXd& v_next, double s_next, double s_prev,
                                  Eigen::MatrixXd& v_prev) const {
  const SpatialGrid& grid = problem_.grid;
  auto coef = [&](double s, int k, int i) {
    const double x = grid.x(k);
    const double a = problem_.diffusion ? problem_.diffusion(s, x, i) : 0.0;
    check_diffusion(a, problem_, false, s, x, i);
    return std::pair<double, double>{a, problem_.drift ? problem_.drift(s, x, i) : 0.0};
  };
  auto src = [&](double s, int k, int i, double y, double p, double c) {
    return problem_.source ? problem_.source(s, grid.x(k), i, y, p, c) : 0.0;
  };
  const bool explicit_terms = static_cast<bool>(problem_.source) || coupling_bound_ > 0;
  cn_step(problem_, *q_, explicit_terms, v_next, s_next, s_prev, coef, src, v_prev);
}

// ---------------------------------------------------------------- solvers

ValueField solve_linear_parabolic(const PDEProblem& problem, const TimeGrid& times) {
  if (problem.hamiltonian) throw ConfigError("linear solve expects no Hamiltonian block");
  BackwardStepper stepper(problem);
  stepper.check_step(times.max_step());
  ValueField field(times, problem.grid, problem.regimes);
  const int last = times.size() - 1;
  field.level(last) = stepper.terminal_level();
  for (int k = last; k > 0; --k) stepper.step_linear(field.level(k), times[k], times[k - 1], field.level(k - 1));
  if (!field.all_finite()) throw NumericError("linear solve produced non-finite values");
  return field;
}

HjbSolution solve_hjb(const PDEProblem& problem, const TimeGrid& times) {
  if (!problem.hamiltonian) throw ConfigError("HJB solve needs a Hamiltonian block");
  BackwardStepper stepper(problem);
  stepper.check_step(times.max_step());
  HjbSolution out{ValueField(times, problem.grid, problem.regimes),
                  FeedbackStrategy(times, problem.grid, problem.regimes, problem.hamiltonian->controls), {}};
  const int last = times.size() - 1;
  out.value.level(last) = stepper.terminal_level();
  for (int k = last; k > 0; --k) {
    out.strategy.level(k) = stepper.minimize(out.value.level(k), times[k], &out.warnings);
    stepper.step_controlled(out.value.level(k), times[k], times[k - 1], out.strategy.level(k), out.value.level(k - 1));
  }
  out.strategy.level(0) = stepper.minimize(out.value.level(0), times[0], &out.warnings);
  if (!out.value.all_finite()) throw NumericError("HJB solve produced non-finite values");
  return out;
}

ValueField solve_closed_loop(const BackwardStepper& stepper, const FeedbackStrategy& strategy, const TimeGrid& times,
                             const Eigen::MatrixXd& terminal) {
  const PDEProblem& problem = stepper.problem();
  if (!problem.hamiltonian) throw ConfigError("closed-loop solve needs the controlled coefficients");
  if (strategy.regimes() != problem.regimes || strategy.dimension() != problem.hamiltonian->controls.dimension())
    throw ConfigError("strategy shape does not match the problem");
  stepper.check_step(times.max_step());
  ValueField field(times, problem.grid, problem.regimes);
  const int last = times.size() - 1;
  field.level(last) = terminal;
  const bool same_space = strategy.grid().same_nodes(problem.grid);
  const int d = strategy.dimension();
  for (int k = last; k > 0; --k) {
    const int sk = same_space ? strategy.times().find(times[k]) : -1;
    if (sk >= 0) {
      stepper.step_controlled(field.level(k), times[k], times[k - 1], strategy.level(sk), field.level(k - 1));
    } else {
      ControlLevel u(problem.grid.n_x, problem.regimes * d);
      for (int x = 0; x < problem.grid.n_x; ++x)
        for (int i = 0; i < problem.regimes; ++i)
          u.row(x).segment(i * d, d) = strategy(times[k], problem.grid.x(x), i).transpose();
      stepper.step_controlled(field.level(k), times[k], times[k - 1], u, field.level(k - 1));
    }
  }
  if (!field.all_finite()) throw NumericError("closed-loop solve produced non-finite values");
  return field;
}

ValueField solve_closed_loop(const PDEProblem& problem, const FeedbackStrategy& strategy, const TimeGrid& times) {
  BackwardStepper stepper(problem);
  return solve_closed_loop(stepper, strategy, times, stepper.terminal_level());
}

double apply_generator(const ValueField& field, int s_idx, int x_idx, int regime, const Control& u,
                       const ControlledDynamics& dynamics, const GeneratorFunction& q) {
  const SpatialGrid& grid = field.grid();
  if (x_idx <= 0 || x_idx >= grid.n_x - 1) throw DomainError("generator needs an interior node");
  const double s = field.times()[s_idx], x = grid.x(x_idx);
  const double sig = dynamics.diffusion(s, x, regime, u);
  const double b = dynamics.drift(s, x, regime, u);
  const Eigen::MatrixXd& v = field.level(s_idx);
  const double dx = grid.dx();
  const double d2 = (v(x_idx + 1, regime) - 2 * v(x_idx, regime) + v(x_idx - 1, regime)) / (dx * dx);
  const double d1 = (v(x_idx + 1, regime) - v(x_idx - 1, regime)) / (2 * dx);
  double coupling = 0.0;
  if (q) coupling = q(x).row(regime).dot(v.row(x_idx));
  return 0.5 * sig * sig * d2 + b * d1 + coupling;
}

ValueField kernel_oracle(const PDEProblem& problem, const TimeGrid& times) {
  if (problem.hamiltonian || problem.source || !problem.diffusion || !problem.terminal)
    throw ConfigError("kernel oracle supports only constant-coefficient heat problems with terminal functions");
  const SpatialGrid& grid = problem.grid;
  const int m = problem.regimes;
  std::vector<double> a(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) {
    a[static_cast<size_t>(i)] = problem.diffusion(times.front(), grid.x_min, i);
    for (int k = 0; k < times.size(); k += std::max(1, times.size() / 8))
      for (int x = 0; x < grid.n_x; ++x) {
        const double s = times[k], xv = grid.x(x);
        if (problem.diffusion(s, xv, i) != a[static_cast<size_t>(i)] || (problem.drift && problem.drift(s, xv, i) != 0.0))
          throw ConfigError("kernel oracle needs constant diffusion and zero drift");
      }
  }
  if (problem.coupling) {
    for (int x = 0; x < grid.n_x; ++x)
      if (problem.coupling(grid.x(x)).cwiseAbs().maxCoeff() != 0.0)
        throw ConfigError("kernel oracle needs zero coupling");
  }
  ValueField field(times, grid, m);
  const double T = times.back();
  for (int k = 0; k < times.size(); ++k) {
    for (int i = 0; i < m; ++i) {
      const double var = 2.0 * a[static_cast<size_t>(i)] * (T - times[k]);
      for (int x = 0; x < grid.n_x; ++x) {
        const double xv = grid.x(x);
        if (var <= 0.0) {
          field.level(k)(x, i) = problem.terminal(xv, i);
          continue;
        }
        const double sd = std::sqrt(var);
        const auto integrand = [&](double z) {
          return problem.terminal(xv + sd * z, i) * std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
        };
        field.level(k)(x, i) = adaptive_simpson<double>(integrand, -12.0, 12.0, 1e-12, 48, 16);
      }
    }
  }
  return field;
}

}  // namespace rsctl

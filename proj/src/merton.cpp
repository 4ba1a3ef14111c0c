#include "rsctl/merton.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "rsctl/errors.hpp"
#include "rsctl/numerics.hpp"
#include "rsctl/sde_engine.hpp"

namespace rsctl {

void MertonSpec::validate() const {
  const int m = regimes();
  if (m < 1 || static_cast<int>(volatility.size()) != m) throw ConfigError("drift and volatility need one entry per regime");
  for (int i = 0; i < m; ++i)
    if (!(volatility[static_cast<size_t>(i)] > 0))
      throw ConfigError("volatility must be positive", {{"regime", std::to_string(i + 1)}});
  if (!(gamma > 0 && gamma < 1)) throw ConfigError("gamma must lie in (0, 1)");
  if (!(horizon > 0)) throw ConfigError("horizon must be positive");
  if (!consumption_weight || !bequest_weight) throw ConfigError("consumption and bequest weights required");
  if (generator.rows() != m || generator.cols() != m) throw ConfigError("generator must be m by m");
  for (int i = 0; i < m; ++i) {
    if (std::abs(generator.row(i).sum()) > 1e-12 * std::max(1.0, generator.row(i).cwiseAbs().sum()))
      throw ConfigError("generator rows must sum to zero", {{"row", std::to_string(i + 1)}});
    for (int j = 0; j < m; ++j)
      if (i != j && generator(i, j) < 0) throw ConfigError("generator off-diagonals must be nonnegative");
  }
  for (int a = 0; a <= 8; ++a)
    for (int b = a; b <= 8; ++b) {
      const double tau = horizon * a / 8.0, s = horizon * b / 8.0;
      const double g = consumption_weight(tau, s);
      if (!(g >= 0) || !std::isfinite(g) || !(bequest_weight(tau) > 0))
        throw ConfigError("need g >= 0 and h > 0 for 0 <= tau <= s <= T",
                          {{"tau", std::to_string(tau)}, {"s", std::to_string(s)}});
    }
}

double MertonSpec::growth(int i) const {
  const double b = drift[static_cast<size_t>(i)], sig = volatility[static_cast<size_t>(i)];
  return gamma * b * b / (2.0 * (1.0 - gamma) * sig * sig);
}

namespace {

MertonSpec base_market() {
  MertonSpec spec;
  spec.drift = {0.05, 0.02};
  spec.volatility = {0.25, 0.3};
  spec.gamma = 0.5;
  spec.generator.resize(2, 2);
  spec.generator << -0.5, 0.5, 0.3, -0.3;
  spec.horizon = 1.0;
  return spec;
}

void require_grid(const MertonSpec& spec, const TimeGrid& times) {
  spec.validate();
  if (times.size() < 2) throw ConfigError("time grid needs at least two nodes");
  if (std::abs(times.back() - spec.horizon) > 1e-12 * spec.horizon)
    throw ConfigError("time grid must end at the horizon");
}

void check_positive(const Eigen::VectorXd& phi, double s) {
  for (Eigen::Index i = 0; i < phi.size(); ++i)
    if (!(phi[i] > 0) || !std::isfinite(phi[i]))
      throw NumericError("phi left the positive range", {{"s", std::to_string(s)}, {"regime", std::to_string(i + 1)}});
}

/// RK4 backward from phi(T) for d phi/ds = rhs(s, phi).
template <class Rhs>
Eigen::MatrixXd integrate_backward(const TimeGrid& times, int first, const Eigen::VectorXd& terminal, Rhs&& rhs) {
  const int last = times.size() - 1;
  Eigen::MatrixXd out(last - first + 1, terminal.size());
  Eigen::VectorXd y = terminal;
  out.row(last - first) = y.transpose();
  for (int k = last; k > first; --k) {
    y = rk4_step(rhs, times[k], y, times[k - 1] - times[k]);
    check_positive(y, times[k - 1]);
    out.row(k - 1 - first) = y.transpose();
  }
  return out;
}

/// Right-hand side of the standard (single-anchor) phi system with weights g(s), h.
struct StandardRhs {
  const MertonSpec& spec;
  std::function<double(double)> weight;
  Eigen::VectorXd operator()(double s, const Eigen::VectorXd& phi) const {
    const double gm = spec.gamma, w = weight(s);
    Eigen::VectorXd out = spec.generator * phi;
    for (Eigen::Index i = 0; i < phi.size(); ++i) {
      if (!(phi[i] > 0)) throw NumericError("phi left the positive range", {{"s", std::to_string(s)}});
      out[i] += spec.growth(static_cast<int>(i)) * phi[i] +
                (1 - gm) * std::pow(w, 1 / (1 - gm)) * std::pow(phi[i], gm / (gm - 1));
    }
    return -out;
  }
};

}  // namespace

MertonSpec MertonSpec::hyperbolic(double kappa) {
  MertonSpec spec = base_market();
  spec.consumption_weight = [kappa](double tau, double s) { return 1.0 / (1.0 + kappa * (s - tau)); };
  spec.bequest_weight = [](double) { return 1.0; };
  return spec;
}

MertonSpec MertonSpec::anchor_free(double kappa) {
  MertonSpec spec = base_market();
  spec.consumption_weight = [kappa](double, double s) { return 1.0 / (1.0 + kappa * s); };
  spec.bequest_weight = [](double) { return 1.0; };
  return spec;
}

Eigen::MatrixXd solve_time_consistent(const MertonSpec& spec, const TimeGrid& times) {
  require_grid(spec, times);
  const auto g = spec.consumption_weight;
  StandardRhs rhs{spec, [g](double s) { return g(s, s); }};
  return integrate_backward(times, 0, Eigen::VectorXd::Constant(spec.regimes(), spec.bequest_weight(spec.horizon)),
                            rhs);
}

Eigen::MatrixXd solve_precommitted(const MertonSpec& spec, double tau, const TimeGrid& times) {
  require_grid(spec, times);
  if (!(tau >= 0 && tau < spec.horizon)) throw DomainError("anchor must lie in [0, T)", {{"tau", std::to_string(tau)}});
  const auto g = spec.consumption_weight;
  StandardRhs rhs{spec, [g, tau](double s) { return g(tau, s); }};
  return integrate_backward(times, 0, Eigen::VectorXd::Constant(spec.regimes(), spec.bequest_weight(tau)), rhs);
}

double EquilibriumPhi::diagonal_at(double s, int regime) const {
  const int n = times.size();
  if (s <= times.front()) return diagonal(0, regime);
  if (s >= times.back()) return diagonal(n - 1, regime);
  const auto it = std::upper_bound(times.nodes.begin(), times.nodes.end(), s);
  const int k = static_cast<int>(it - times.nodes.begin());
  const double w = (s - times[k - 1]) / (times[k] - times[k - 1]);
  return (1 - w) * diagonal(k - 1, regime) + w * diagonal(k, regime);
}

EquilibriumPhi solve_equilibrium_ode(const MertonSpec& spec, const TimeGrid& times, double tol, int max_iter) {
  require_grid(spec, times);
  const int n = times.size(), last = n - 1, m = spec.regimes();
  const double gm = spec.gamma;
  const auto g = spec.consumption_weight;

  // Diagonal guess d(s, i) = h(s).
  Eigen::MatrixXd d(n, m);
  for (int k = 0; k < n; ++k) d.row(k).setConstant(spec.bequest_weight(times[k]));

  EquilibriumPhi out;
  out.times = times;
  out.rows.resize(static_cast<size_t>(n));
  double previous_change = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd d_mid(n, m);  // d at the midpoint of step k -> k-1, cubic through 4 nodes
  for (int iter = 1; iter <= max_iter; ++iter) {
    for (int k = 1; k < n; ++k) {
      const double mid = 0.5 * (times[k] + times[k - 1]);
      const int lo = std::clamp(k - 2, 0, std::max(0, n - 4));
      if (n < 4) {
        d_mid.row(k) = 0.5 * (d.row(k) + d.row(k - 1));
        continue;
      }
      for (int i = 0; i < m; ++i) {
        double xs[4], ys[4];
        for (int a = 0; a < 4; ++a) {
          xs[a] = times[lo + a];
          ys[a] = d(lo + a, i);
        }
        d_mid(k, i) = lagrange_cubic(xs, ys, mid);
      }
    }
    // Diagonal quantity read at s: node values at nodes, cubic midpoints in between.
    for (int r = 0; r < n; ++r) {
      const double tau = times[r];
      int step = last;
      auto diag_at = [&](double s, int i) {
        if (s == times[step]) return d(step, i);
        if (s == times[step - 1]) return d(step - 1, i);
        return d_mid(step, i);
      };
      auto rhs = [&](double s, const Eigen::VectorXd& phi) {
        Eigen::VectorXd res = spec.generator * phi;
        const double gss = g(s, s), gts = g(tau, s);
        for (int i = 0; i < m; ++i) {
          const double ratio = gss / diag_at(s, i);
          res[i] += phi[i] * (spec.growth(i) - gm * std::pow(ratio, 1 / (1 - gm))) + gts * std::pow(ratio, gm / (1 - gm));
        }
        return Eigen::VectorXd(-res);
      };
      Eigen::MatrixXd row(last - r + 1, m);
      Eigen::VectorXd y = Eigen::VectorXd::Constant(m, spec.bequest_weight(tau));
      row.row(last - r) = y.transpose();
      for (step = last; step > r; --step) {
        y = rk4_step(rhs, times[step], y, times[step - 1] - times[step]);
        check_positive(y, times[step - 1]);
        row.row(step - 1 - r) = y.transpose();
      }
      out.rows[static_cast<size_t>(r)] = std::move(row);
    }
    Eigen::MatrixXd fresh(n, m);
    for (int k = 0; k < n; ++k) fresh.row(k) = out.rows[static_cast<size_t>(k)].row(0);
    const double change = (fresh - d).cwiseAbs().maxCoeff();
    out.history.push_back(change);
    if (change < tol) return out;
    if (change > previous_change) d += 0.5 * (fresh - d);
    else d = fresh;
    previous_change = change;
  }
  throw NonConvergenceError("equilibrium phi iteration did not converge", out.history,
                            {{"max_iter", std::to_string(max_iter)}, {"tol", std::to_string(tol)}});
}

namespace {

void require_wealth(double x) {
  if (!(x > 0)) throw DomainError("wealth must be positive", {{"x", std::to_string(x)}});
}

double invested_fraction(const MertonSpec& spec, int i) {
  const double sig = spec.volatility[static_cast<size_t>(i)];
  return spec.drift[static_cast<size_t>(i)] / ((1 - spec.gamma) * sig * sig);
}

double consumed_fraction(const MertonSpec& spec, double weight, double phi) {
  if (!(phi > 0)) throw DomainError("phi must be positive");
  return std::pow(weight / phi, 1 / (1 - spec.gamma));
}

}  // namespace

MertonControls equilibrium_strategy(const MertonSpec& spec, double phi_diagonal, double s, double x, int i) {
  require_wealth(x);
  return {invested_fraction(spec, i) * x, consumed_fraction(spec, spec.consumption_weight(s, s), phi_diagonal) * x};
}

MertonControls time_consistent_strategy(const MertonSpec& spec, double phi, double s, double x, int i) {
  require_wealth(x);
  return {invested_fraction(spec, i) * x, consumed_fraction(spec, spec.consumption_weight(s, s), phi) * x};
}

MertonControls precommitted_strategy(const MertonSpec& spec, double tau, double phi, double s, double x, int i) {
  require_wealth(x);
  return {invested_fraction(spec, i) * x, consumed_fraction(spec, spec.consumption_weight(tau, s), phi) * x};
}

Model merton_model(const MertonSpec& spec, double psi_clamp) {
  spec.validate();
  Model model;
  const int m = spec.regimes();
  model.regimes = m;
  model.horizon = spec.horizon;
  const std::vector<double> b = spec.drift, sig = spec.volatility;
  const double gm = spec.gamma;
  model.dynamics.drift = [b](double, double, int i, const Control& u) { return b[static_cast<size_t>(i)] * u[0] - u[1]; };
  model.dynamics.diffusion = [sig](double, double, int i, const Control& u) { return sig[static_cast<size_t>(i)] * u[0]; };
  Control lo(2), hi(2);
  const double inf = std::numeric_limits<double>::infinity();
  lo << -inf, 0.0;
  hi << inf, inf;
  model.dynamics.controls = ControlSet::box(lo, hi);
  model.dynamics.anchor_control = Control::Zero(2);
  model.dynamics.lipschitz = 1.0;
  const Eigen::MatrixXd q = spec.generator;
  model.generator = [q](double) { return q; };
  const auto g = spec.consumption_weight;
  const auto h = spec.bequest_weight;
  model.running = [g, gm](double tau, double s, double, int, double, double, double, const Control& u) {
    return -g(tau, s) * std::pow(std::max(u[1], 0.0), gm);
  };
  model.terminal = [h, gm](double tau, double x, int) { return -h(tau) * std::pow(std::max(x, 0.0), gm); };
  auto clamps = std::make_shared<std::atomic<long>>(0);
  model.clamp_events = clamps;
  model.minimizer = [b, sig, g, gm, psi_clamp, clamps](double tau, double s, double, int i, double, double, double p,
                                                       double pp) {
    const double bi = b[static_cast<size_t>(i)], si = sig[static_cast<size_t>(i)];
    if (pp < psi_clamp || -p < psi_clamp) clamps->fetch_add(1, std::memory_order_relaxed);
    const double curvature = std::max(pp, psi_clamp);
    const double slope = std::max(-p, psi_clamp);
    Control u(2);
    u[0] = -bi * p / (si * si * curvature);
    u[1] = std::pow(gm * g(tau, s) / slope, 1 / (1 - gm));
    return u;
  };
  model.switching = mechanism_for_constant_generator(q);
  return model;
}

SpatialGrid merton_grid(const MertonSpec& spec, double x_min, double x_max, int n_x, int buffer) {
  if (!(x_min > 0)) throw ConfigError("Merton grid must stay at positive wealth");
  SpatialGrid grid(x_min, x_max, n_x, buffer);
  grid.left = BoundaryCondition::robin(spec.gamma, -x_min, 0.0);
  grid.right = BoundaryCondition::robin(spec.gamma, -x_max, 0.0);
  return grid;
}

ProportionalStrategy equilibrium_fractions(const MertonSpec& spec, const EquilibriumPhi& phi) {
  auto shared = std::make_shared<const EquilibriumPhi>(phi);
  ProportionalStrategy out;
  out.invested = [spec](double, int i) { return invested_fraction(spec, i); };
  out.consumed = [spec, shared](double s, int i) {
    return consumed_fraction(spec, spec.consumption_weight(s, s), shared->diagonal_at(s, i));
  };
  return out;
}

ProportionalStrategy time_consistent_fractions(const MertonSpec& spec, const Eigen::MatrixXd& phi,
                                               const TimeGrid& times) {
  auto table = std::make_shared<const Eigen::MatrixXd>(phi);
  ProportionalStrategy out;
  out.invested = [spec](double, int i) { return invested_fraction(spec, i); };
  out.consumed = [spec, table, times](double s, int i) {
    double value;
    if (s <= times.front()) value = (*table)(0, i);
    else if (s >= times.back()) value = (*table)(times.size() - 1, i);
    else {
      const auto it = std::upper_bound(times.nodes.begin(), times.nodes.end(), s);
      const int k = static_cast<int>(it - times.nodes.begin());
      const double w = (s - times[k - 1]) / (times[k] - times[k - 1]);
      value = (1 - w) * (*table)(k - 1, i) + w * (*table)(k, i);
    }
    return consumed_fraction(spec, spec.consumption_weight(s, s), value);
  };
  return out;
}

MonteCarloEstimate monte_carlo_payoff(const MertonSpec& spec, const ProportionalStrategy& strategy, double t,
                                      double x, int regime, long n_paths, std::uint64_t seed, double h,
                                      int workers) {
  spec.validate();
  require_wealth(x);
  if (n_paths < 2) throw ConfigError("Monte Carlo needs at least two paths");
  if (!(t >= 0 && t <= spec.horizon)) throw DomainError("start time outside [0, T]");
  const SwitchingMechanism mech = mechanism_for_constant_generator(spec.generator);
  const Model model = merton_model(spec);
  const ProportionalStrategy strat = strategy;
  const Policy policy = [strat](double s, double xv, int i) {
    Control u(2);
    u[0] = strat.invested(s, i) * xv;
    u[1] = strat.consumed(s, i) * xv;
    return u;
  };
  const double gm = spec.gamma;
  const size_t w = static_cast<size_t>(std::max(1, workers));
  std::vector<double> sums(w, 0.0), squares(w, 0.0);
  parallel_for(n_paths, workers, [&](long begin, long end, int k) {
    double sum = 0.0, sq = 0.0;
    for (long p = begin; p < end; ++p) {
      const Path path = simulate_path(model.dynamics, mech.geometry, mech.levy, {t, x, regime}, spec.horizon, policy,
                                      h, seed, static_cast<std::uint64_t>(p));
      double payoff = 0.0;
      auto utility_rate = [&](size_t n, int i) {
        const double c = strat.consumed(path.t[n], i) * path.x[n];
        return spec.consumption_weight(t, path.t[n]) * std::pow(c, gm);
      };
      for (size_t n = 0; n + 1 < path.t.size(); ++n) {
        if (!(path.x[n + 1] > 0))
          throw ResolutionError("wealth reached zero; use a smaller simulation step",
                                {{"h", std::to_string(h)}, {"time", std::to_string(path.t[n + 1])}});
        const int i = path.alpha[n];
        payoff += 0.5 * (path.t[n + 1] - path.t[n]) * (utility_rate(n, i) + utility_rate(n + 1, i));
      }
      payoff += spec.bequest_weight(t) * std::pow(path.x.back(), gm);
      sum += payoff;
      sq += payoff * payoff;
    }
    sums[static_cast<size_t>(k)] = sum;
    squares[static_cast<size_t>(k)] = sq;
  });
  double sum = 0.0, sq = 0.0;
  for (size_t k = 0; k < w; ++k) {
    sum += sums[k];
    sq += squares[k];
  }
  const double n = static_cast<double>(n_paths);
  const double mean = sum / n;
  const double var = std::max(0.0, (sq - n * mean * mean) / (n - 1));
  return {mean, std::sqrt(var / n), n_paths};
}

}  // namespace rsctl

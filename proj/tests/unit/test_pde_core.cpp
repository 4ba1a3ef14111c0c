#include <doctest.h>

#include <Eigen/Core>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>

#include "rsctl/merton.hpp"
#include "rsctl/pde_core.hpp"

using namespace rsctl;

namespace {

PDEProblem heat(double a, double x_min, double x_max, int n_x, std::function<double(double, int)> terminal,
                int regimes = 1) {
  PDEProblem p;
  p.grid = SpatialGrid(x_min, x_max, n_x, 0);
  p.regimes = regimes;
  p.diffusion = [a](double, double, int) { return a; };
  p.drift = [](double, double, int) { return 0.0; };
  p.terminal = std::move(terminal);
  return p;
}

/// dX = u ds + 0.5 dW with u in [-1, 1]; cost u^2/2 + x^2/2.
PDEProblem tracking(std::function<double(double, int)> terminal) {
  PDEProblem p;
  p.grid = SpatialGrid(-2.0, 2.0, 81, 8);
  p.regimes = 2;
  Eigen::MatrixXd q(2, 2);
  q << -0.4, 0.4, 0.2, -0.2;
  p.coupling = [q](double) { return q; };
  p.terminal = std::move(terminal);
  HamiltonianBlock h;
  h.controls = ControlSet::interval(-1.0, 1.0);
  h.drift = [](double, double, int i, const Control& u) { return u[0] + 0.1 * i; };
  h.diffusion = [](double, double, int, const Control&) { return 0.5; };
  h.running = [](double, double x, int, double, double, double, const Control& u) {
    return 0.5 * u[0] * u[0] + 0.5 * x * x;
  };
  p.hamiltonian = h;
  return p;
}

double interior_sup(const ValueField& a, const std::function<double(int, int, int)>& exact) {
  double err = 0.0;
  const SpatialGrid& g = a.grid();
  for (int k = 0; k < a.times().size(); ++k)
    for (int x = g.interior_begin(); x < g.interior_end(); ++x)
      for (int i = 0; i < a.regimes(); ++i) err = std::max(err, std::abs(a(k, x, i) - exact(k, x, i)));
  return err;
}

/// Manufactured solution e^{-s}(1 + x^2) of V_s + 0.2 V_xx + 0.3 V_x + g = 0 with Dirichlet edges.
double manufactured_error(int n_x, int n_t, ValueField* out = nullptr) {
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
  if (out) *out = v;
  return interior_sup(v, [&](int k, int x, int) { return exact(times[k], p.grid.x(x)); });
}

}  // namespace

TEST_SUITE("pde_core") {
  TEST_CASE("constant terminal data is preserved") {
    const PDEProblem p = heat(0.01, -1, 1, 21, [](double, int i) { return 3.0 + i; }, 2);
    const ValueField v = solve_linear_parabolic(p, TimeGrid::uniform(0, 1, 20));
    for (int k = 0; k < v.times().size(); ++k) {
      CHECK((v.level(k).col(0).array() - 3.0).abs().maxCoeff() < 1e-13);
      CHECK((v.level(k).col(1).array() - 4.0).abs().maxCoeff() < 1e-13);
    }
  }

  TEST_CASE("heat equation agrees with the Gaussian-convolution oracle") {
    const auto bump = [](double x, int) { return std::abs(x) < 1 ? std::exp(1.0 - 1.0 / (1.0 - x * x)) : 0.0; };
    const PDEProblem p = heat(0.1, -4, 4, 401, bump);
    const ValueField v = solve_linear_parabolic(p, TimeGrid::uniform(0, 1, 400));
    const ValueField oracle = kernel_oracle(p, TimeGrid({0.0, 0.5, 1.0}));
    double err = 0.0;
    for (int k : {0, 1, 2})
      for (int x = 1; x < 400; ++x) err = std::max(err, std::abs(v(200 * k, x, 0) - oracle(k, x, 0)));
    CHECK(err < 1e-3);
  }

  TEST_CASE("kernel oracle reproduces the closed-form Gaussian and is symmetric") {
    const PDEProblem p = heat(0.5, -5, 5, 101, [](double x, int) { return std::exp(-0.5 * x * x); });
    const TimeGrid times = TimeGrid::uniform(0, 1, 4);
    const ValueField oracle = kernel_oracle(p, times);
    double err = 0.0, asym = 0.0;
    for (int k = 0; k < times.size(); ++k) {
      const double v = 1.0 - times[k];
      for (int x = 0; x < 101; ++x) {
        const double xv = p.grid.x(x);
        err = std::max(err, std::abs(oracle(k, x, 0) - std::exp(-0.5 * xv * xv / (1 + v)) / std::sqrt(1 + v)));
        asym = std::max(asym, std::abs(oracle(k, x, 0) - oracle(k, 100 - x, 0)));
      }
    }
    CHECK(err < 1e-6);
    CHECK(asym < 1e-12);
    for (int x = 0; x < 101; ++x) CHECK(oracle(4, x, 0) == p.terminal(p.grid.x(x), 0));
  }

  TEST_CASE("kernel oracle rejects non-constant coefficients") {
    PDEProblem p = heat(0.5, -1, 1, 11, [](double, int) { return 1.0; });
    p.diffusion = [](double, double x, int) { return 0.5 + 0.1 * x; };
    CHECK_THROWS_AS(kernel_oracle(p, TimeGrid::uniform(0, 1, 2)), ConfigError);
  }

  TEST_CASE("negligible diffusion with constant coupling follows the matrix exponential") {
    Eigen::MatrixXd q(2, 2);
    q << -0.5, 0.5, 0.3, -0.3;
    PDEProblem p = heat(1e-6, -1, 1, 11, [](double, int i) { return i == 0 ? 1.0 : 2.5; }, 2);
    p.coupling = [q](double) { return q; };
    const TimeGrid times = TimeGrid::uniform(0, 1, 1000);
    const ValueField v = solve_linear_parabolic(p, times);
    const Eigen::Vector2d h(1.0, 2.5);
    double err = 0.0;
    for (int k = 0; k < times.size(); k += 50) {
      const Eigen::Vector2d expected = (q * (1.0 - times[k])).exp() * h;
      for (int x = 0; x < 11; ++x)
        for (int i = 0; i < 2; ++i) err = std::max(err, std::abs(v(k, x, i) - expected[i]));
    }
    CHECK(err < 1e-6);
  }

  TEST_CASE("explicit coupling step bound is enforced") {
    Eigen::MatrixXd q(2, 2);
    q << -2.0, 2.0, 1.0, -1.0;
    PDEProblem p = heat(0.1, -1, 1, 11, [](double, int) { return 1.0; }, 2);
    p.coupling = [q](double) { return q; };
    CHECK_THROWS_AS(solve_linear_parabolic(p, TimeGrid::uniform(0, 1, 2)), ConfigError);
    CHECK_NOTHROW(solve_linear_parabolic(p, TimeGrid::uniform(0, 1, 4)));
  }

  TEST_CASE("manufactured solution converges at second order in space") {
    const double coarse = manufactured_error(21, 20);
    const double fine = manufactured_error(41, 40);
    const double ratio = coarse / fine;
    CHECK(ratio >= 3.0);
    CHECK(ratio <= 5.0);
  }

  TEST_CASE("generator of the solved field reproduces the negative source") {
    const auto residual = [](int n_x, int n_t) {
      ValueField v;
      manufactured_error(n_x, n_t, &v);
      ControlledDynamics d;
      d.drift = [](double, double, int, const Control&) { return 0.3; };
      d.diffusion = [](double, double, int, const Control&) { return std::sqrt(0.4); };
      const TimeGrid& t = v.times();
      double worst = 0.0;
      for (int k = 0; k < t.steps(); ++k)
        for (int x = 1; x + 1 < n_x; ++x) {
          const double s = t[k], xv = v.grid().x(x);
          const double source = std::exp(-s) * (1 + xv * xv) - 0.4 * std::exp(-s) - 0.6 * xv * std::exp(-s);
          const double time_diff = (v(k + 1, x, 0) - v(k, x, 0)) / (t[k + 1] - t[k]);
          const double r = time_diff + apply_generator(v, k, x, 0, scalar_control(0.0), d, {}) + source;
          worst = std::max(worst, std::abs(r));
        }
      return worst;
    };
    const double coarse = residual(21, 20), fine = residual(41, 40);
    CHECK(coarse < 0.05);
    CHECK(fine < 0.6 * coarse);
  }

  TEST_CASE("apply_generator examples") {
    const SpatialGrid grid(-1, 1, 11);
    ValueField linear(TimeGrid::uniform(0, 1, 1), grid, 2), square(TimeGrid::uniform(0, 1, 1), grid, 1),
        constants(TimeGrid::uniform(0, 1, 1), grid, 2);
    for (int x = 0; x < 11; ++x) {
      linear.level(0)(x, 0) = linear.level(0)(x, 1) = grid.x(x);
      square.level(0)(x, 0) = grid.x(x) * grid.x(x);
      constants.level(0)(x, 0) = 1.5;
      constants.level(0)(x, 1) = -0.5;
    }
    Eigen::MatrixXd q(2, 2);
    q << -0.3, 0.3, 0.7, -0.7;
    const GeneratorFunction gen = [q](double) { return q; };
    ControlledDynamics d;
    d.drift = [](double, double, int, const Control&) { return 2.0; };
    d.diffusion = [](double, double, int, const Control&) { return 0.8; };
    for (int x = 1; x < 10; ++x) CHECK(apply_generator(linear, 0, x, 1, scalar_control(0), d, gen) == doctest::Approx(2.0));
    d.drift = [](double, double, int, const Control&) { return 0.0; };
    d.diffusion = [](double, double, int, const Control&) { return 1.0; };
    for (int x = 1; x < 10; ++x)
      CHECK(apply_generator(square, 0, x, 0, scalar_control(0), d, {}) == doctest::Approx(1.0).epsilon(1e-12));
    d.diffusion = [](double, double, int, const Control&) { return 0.0; };
    CHECK(apply_generator(constants, 0, 4, 0, scalar_control(0), d, gen) == doctest::Approx(-0.3 * 1.5 + 0.3 * -0.5));
    CHECK(apply_generator(constants, 0, 4, 1, scalar_control(0), d, gen) == doctest::Approx(0.7 * 1.5 - 0.7 * -0.5));
    CHECK_THROWS_AS(apply_generator(square, 0, 0, 0, scalar_control(0), d, {}), DomainError);
    CHECK_THROWS_AS(apply_generator(square, 0, 10, 0, scalar_control(0), d, {}), DomainError);
  }

  TEST_CASE("singleton control set reduces HJB to the linear solve") {
    PDEProblem p = tracking([](double x, int) { return x * x; });
    p.hamiltonian->controls = ControlSet::finite({scalar_control(0.3)});
    const TimeGrid times = TimeGrid::uniform(0, 1, 40);
    const HjbSolution hjb = solve_hjb(p, times);
    PDEProblem lin = p;
    lin.hamiltonian.reset();
    lin.diffusion = [](double, double, int) { return 0.125; };
    lin.drift = [](double, double, int i) { return 0.3 + 0.1 * i; };
    lin.source = [](double, double x, int, double, double, double) { return 0.5 * 0.09 + 0.5 * x * x; };
    const ValueField v = solve_linear_parabolic(lin, times);
    double diff = 0.0;
    for (int k = 0; k < times.size(); ++k) diff = std::max(diff, (v.level(k) - hjb.value.level(k)).cwiseAbs().maxCoeff());
    CHECK(diff < 1e-12);
    for (int k = 1; k < times.size(); ++k) CHECK(hjb.strategy.at(k, 40, 0)[0] == 0.3);
  }

  TEST_CASE("HJB value lies below every fixed-control value and respects terminal ordering") {
    const TimeGrid times = TimeGrid::uniform(0, 1, 40);
    const HjbSolution low = solve_hjb(tracking([](double x, int) { return x * x; }), times);
    const HjbSolution high = solve_hjb(tracking([](double x, int i) { return x * x + 0.1 * (1 + std::sin(x)) + 0.05 * i; }), times);
    for (int k = 0; k < times.size(); ++k) CHECK((low.value.level(k).array() <= high.value.level(k).array() + 1e-12).all());
    for (double u : {-1.0, -0.25, 0.0, 0.5, 1.0}) {
      PDEProblem p = tracking([](double x, int) { return x * x; });
      p.hamiltonian->controls = ControlSet::finite({scalar_control(u)});
      const HjbSolution fixed = solve_hjb(p, times);
      double excess = 0.0;
      for (int k = 0; k < times.size(); ++k)
        for (int x = p.grid.interior_begin(); x < p.grid.interior_end(); ++x)
          for (int i = 0; i < 2; ++i) excess = std::max(excess, low.value(k, x, i) - fixed.value(k, x, i));
      CHECK(excess < 1e-4);
    }
  }

  TEST_CASE("grid search breaks ties toward the smallest control") {
    PDEProblem p = tracking([](double, int) { return 0.0; });
    p.hamiltonian->running = [](double, double, int, double, double, double, const Control&) { return 0.0; };
    p.hamiltonian->drift = [](double, double, int, const Control&) { return 0.0; };
    const HjbSolution sol = solve_hjb(p, TimeGrid::uniform(0, 1, 4));
    CHECK(sol.strategy.at(2, 10, 0)[0] == -1.0);
  }

  TEST_CASE("Merton HJB matches the anchored power-ansatz solution") {
    const MertonSpec spec = MertonSpec::hyperbolic();
    const Model model = merton_model(spec);
    const SpatialGrid grid = merton_grid(spec, 0.25, 2.25, 201, 20);
    const TimeGrid times = TimeGrid::uniform(0, 1, 320);
    const HjbSolution sol = solve_hjb(anchored_problem(model, 0.0, grid), times);
    const Eigen::MatrixXd phi = solve_precommitted(spec, 0.0, times);
    double err = 0.0;
    for (int k = 0; k < times.size(); ++k)
      for (int x = grid.interior_begin(); x < grid.interior_end(); ++x)
        for (int i = 0; i < 2; ++i) {
          const double exact = -phi(k, i) * std::pow(grid.x(x), spec.gamma);
          err = std::max(err, std::abs(sol.value(k, x, i) - exact) / std::abs(exact));
        }
    CHECK(err < 5e-3);
  }
}

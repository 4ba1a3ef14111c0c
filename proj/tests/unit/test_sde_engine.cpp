#include <doctest.h>

#include <Eigen/Core>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>

#include "rsctl/errors.hpp"
#include "rsctl/presets.hpp"
#include "rsctl/sde_engine.hpp"

using namespace rsctl;

namespace {

ControlledDynamics constant_dynamics(double drift, double sigma) {
  ControlledDynamics d;
  d.drift = [drift](double, double, int, const Control&) { return drift; };
  d.diffusion = [sigma](double, double, int, const Control&) { return sigma; };
  d.controls = ControlSet::interval(-1.0, 1.0);
  d.anchor_control = scalar_control(0.0);
  return d;
}

/// Mean-reverting dynamics with a control-driven drift.
ControlledDynamics reverting(double sigma) {
  ControlledDynamics d;
  d.drift = [](double, double x, int i, const Control& u) { return u[0] - 0.5 * x + (i == 0 ? 0.1 : -0.1); };
  d.diffusion = [sigma](double, double, int i, const Control&) { return sigma + 0.1 * i; };
  d.controls = ControlSet::interval(-1.0, 1.0);
  d.anchor_control = scalar_control(0.0);
  return d;
}

}  // namespace

TEST_SUITE("sde_engine") {
  TEST_CASE("frozen dynamics without switching keep state and regime constant") {
    const SwitchingMechanism empty = switching_preset("empty");
    const Path p = simulate_path(constant_dynamics(0, 0), empty.geometry, empty.levy, {0.0, 0.7, 1}, 1.0,
                                 constant_policy(scalar_control(0.0)), 0.01, 5);
    for (size_t k = 0; k < p.t.size(); ++k) {
      CHECK(p.x[k] == 0.7);
      CHECK(p.alpha[k] == 1);
    }
    for (const auto& j : p.jumps) CHECK(j.from == j.to);
  }

  TEST_CASE("unit drift integrates exactly at the grid nodes") {
    const SwitchingMechanism empty = switching_preset("empty");
    const Path p = simulate_path(constant_dynamics(1, 0), empty.geometry, empty.levy, {0.25, 2.0, 0}, 1.0,
                                 constant_policy(scalar_control(0.0)), 0.01, 9);
    CHECK(p.t.front() == 0.25);
    CHECK(p.t.back() == doctest::Approx(1.0).epsilon(1e-15));
    for (size_t k = 0; k < p.t.size(); ++k) CHECK(p.x[k] == doctest::Approx(2.0 + p.t[k] - 0.25).epsilon(1e-12));
  }

  TEST_CASE("Brownian increments have variance equal to the elapsed time") {
    const SwitchingMechanism empty = switching_preset("empty");
    const ControlledDynamics d = constant_dynamics(0, 1);
    const long n = 100000;
    double sum = 0, sq = 0;
    for (long k = 0; k < n; ++k) {
      const Path p = simulate_path(d, empty.geometry, empty.levy, {0.0, 0.0, 0}, 1.0, constant_policy(scalar_control(0)),
                                   0.05, 2024, static_cast<std::uint64_t>(k));
      sum += p.x.back();
      sq += p.x.back() * p.x.back();
    }
    const double mean = sum / n, var = (sq - n * mean * mean) / (n - 1);
    const double se = std::sqrt(2.0 / (n - 1));
    CHECK(std::abs(var - 1.0) < 3 * se);
  }

  TEST_CASE("identical seeds give bit-identical paths; path index separates streams") {
    const SwitchingMechanism tanh = switching_preset("tanh");
    const ControlledDynamics d = reverting(0.3);
    const Policy pol = constant_policy(scalar_control(0.2));
    const Path a = simulate_path(d, tanh.geometry, tanh.levy, {0, 0.1, 0}, 1.0, pol, 1e-2, 77, 3);
    const Path b = simulate_path(d, tanh.geometry, tanh.levy, {0, 0.1, 0}, 1.0, pol, 1e-2, 77, 3);
    const Path c = simulate_path(d, tanh.geometry, tanh.levy, {0, 0.1, 0}, 1.0, pol, 1e-2, 77, 4);
    CHECK(a.t == b.t);
    CHECK(a.x == b.x);
    CHECK(a.alpha == b.alpha);
    CHECK(a.x != c.x);
  }

  TEST_CASE("regime changes happen only at recorded jumps, consistent with the mark map") {
    const SwitchingMechanism affine = switching_preset("affine");
    const ControlledDynamics d = reverting(0.4);
    for (std::uint64_t k = 0; k < 50; ++k) {
      const Path p = simulate_path(d, affine.geometry, affine.levy, {0, 0.0, 0}, 3.0,
                                   constant_policy(scalar_control(0.0)), 1e-2, 99, k);
      size_t next_jump = 0;
      for (size_t n = 1; n < p.t.size(); ++n) {
        const bool at_jump = next_jump < p.jumps.size() && p.jumps[next_jump].time == p.t[n];
        if (!at_jump) {
          CHECK(p.alpha[n] == p.alpha[n - 1]);
          continue;
        }
        const JumpRecord& j = p.jumps[next_jump++];
        CHECK(j.from == p.alpha[n - 1]);
        CHECK(j.to == p.alpha[n]);
        CHECK(affine.geometry.mark_to_jump(p.x[n], j.from, j.mark) == j.to);
      }
      CHECK(next_jump == p.jumps.size());
    }
  }

  TEST_CASE("blow-up raises a simulation error and undefined policies a domain error") {
    const SwitchingMechanism empty = switching_preset("empty");
    ControlledDynamics explode = constant_dynamics(0, 0);
    explode.drift = [](double, double x, int, const Control&) { return x * x; };
    CHECK_THROWS_AS(simulate_path(explode, empty.geometry, empty.levy, {0, 1e200, 0}, 1.0,
                                  constant_policy(scalar_control(0)), 0.1, 1),
                    SimulationError);
    const FeedbackStrategy short_strategy = FeedbackStrategy::constant(
        TimeGrid::uniform(0.0, 0.5, 5), SpatialGrid(-1, 1, 5), 2, ControlSet::interval(-1, 1), scalar_control(0.0));
    CHECK_THROWS_AS(simulate_path(constant_dynamics(0, 0), empty.geometry, empty.levy, {0, 0, 0}, 1.0,
                                  feedback(short_strategy), 0.1, 1),
                    DomainError);
    CHECK_THROWS_AS(simulate_path(constant_dynamics(0, 0), empty.geometry, empty.levy, {0, 0, 0}, 1.0,
                                  constant_policy(scalar_control(0)), 0.0, 1),
                    ConfigError);
  }

  TEST_CASE("transition rate estimates match quadrature") {
    const ControlledDynamics d = reverting(0.3);
    const SwitchingMechanism constant = switching_preset("constant");
    const RateEstimate c = estimate_transition_rate(d, constant.geometry, constant.levy, 0.0, 0, 1, 1e-3, 100000, 11);
    CHECK(std::abs(c.rate - 0.2) < 3 * c.standard_error);
    CHECK(c.transitions > 0);
    const SwitchingMechanism tanh = switching_preset("tanh");
    const RateEstimate t = estimate_transition_rate(d, tanh.geometry, tanh.levy, 0.0, 0, 1, 1e-3, 100000, 12);
    CHECK(std::abs(t.rate - 0.1) < 3 * t.standard_error);
    CHECK_FALSE(t.anomaly);
  }

  TEST_CASE("empty geometry gives an exact zero rate") {
    const SwitchingMechanism empty = switching_preset("empty");
    const RateEstimate e = estimate_transition_rate(reverting(0.3), empty.geometry, empty.levy, 0.5, 1, 0, 1e-3, 20000, 3);
    CHECK(e.rate == 0.0);
    CHECK(e.standard_error == 0.0);
    CHECK(e.transitions == 0);
    CHECK_FALSE(e.anomaly);
    CHECK_THROWS_AS(estimate_transition_rate(reverting(0.3), empty.geometry, empty.levy, 0.5, 1, 1, 1e-3, 10, 3),
                    ConfigError);
  }

  TEST_CASE("ensembles are identical for any worker count") {
    const SwitchingMechanism tanh = switching_preset("tanh");
    const RateEstimate one = estimate_transition_rate(reverting(0.3), tanh.geometry, tanh.levy, 1.0, 0, 1, 1e-2, 5000, 8, 1);
    const RateEstimate four = estimate_transition_rate(reverting(0.3), tanh.geometry, tanh.levy, 1.0, 0, 1, 1e-2, 5000, 8, 4);
    CHECK(one.rate == four.rate);
    CHECK(one.transitions == four.transitions);
  }

  TEST_CASE("terminal regime law matches the matrix exponential for a constant generator") {
    Eigen::MatrixXd q(2, 2);
    q << -0.5, 0.5, 0.3, -0.3;
    const SwitchingMechanism mech = mechanism_for_constant_generator(q);
    const Eigen::MatrixXd law = (q * 1.0).exp();
    const long n = 40000;
    long in_second = 0;
    for (long k = 0; k < n; ++k) {
      const Path p = simulate_path(constant_dynamics(0, 0), mech.geometry, mech.levy, {0, 0, 0}, 1.0,
                                   constant_policy(scalar_control(0)), 0.25, 31, static_cast<std::uint64_t>(k));
      in_second += p.alpha.back() == 1;
    }
    const double p_hat = static_cast<double>(in_second) / n;
    const double se = std::sqrt(law(0, 1) * law(0, 0) / n);
    CHECK(std::abs(p_hat - law(0, 1)) < 3 * se);
  }

  TEST_CASE("coupled pairs: identical starts and state-free thresholds never split") {
    const SwitchingMechanism tanh = switching_preset("tanh");
    const Policy pol = constant_policy(scalar_control(0.0));
    const CouplingEstimate same = coupled_pair_divergence(reverting(0.3), tanh.geometry, tanh.levy, pol, 0, 1, 0.2, 0.2, 0,
                                                          1e-2, 2000, 4);
    CHECK(same.prob_regime_split == 0.0);
    CHECK(same.mean_sq_gap_on_agreement == 0.0);
    const SwitchingMechanism constant = switching_preset("constant");
    const CouplingEstimate flat = coupled_pair_divergence(reverting(0.3), constant.geometry, constant.levy, pol, 0, 1,
                                                          -0.5, 0.5, 0, 1e-2, 2000, 4);
    CHECK(flat.prob_regime_split == 0.0);
    CHECK(flat.mean_sq_gap_on_agreement > 0.0);
  }

  TEST_CASE("coupled pair divergence shrinks with the initial gap") {
    const SwitchingMechanism affine = switching_preset("affine");
    const Policy pol = constant_policy(scalar_control(0.0));
    CouplingEstimate previous{1.0, 1e9};
    for (double gap : {0.4, 0.2, 0.1, 0.05}) {
      const CouplingEstimate e = coupled_pair_divergence(reverting(0.3), affine.geometry, affine.levy, pol, 0, 1,
                                                         -gap / 2, gap / 2, 0, 1e-2, 20000, 6);
      CHECK(e.prob_regime_split <= previous.prob_regime_split);
      CHECK(e.mean_sq_gap_on_agreement <= previous.mean_sq_gap_on_agreement);
      previous = e;
    }
  }

  TEST_CASE("fourth moments are stable under step halving and increments follow the square-root modulus") {
    const SwitchingMechanism tanh = switching_preset("tanh");
    const ControlledDynamics d = reverting(0.3);
    const Policy pol = constant_policy(scalar_control(0.5));
    const long n = 4000;
    double moment[2] = {0, 0};
    const double window[3] = {0.04, 0.02, 0.01};
    double modulus[3] = {0, 0, 0};
    for (int level = 0; level < 2; ++level) {
      const double h = level == 0 ? 2e-3 : 1e-3;
      for (long k = 0; k < n; ++k) {
        const Path p = simulate_path(d, tanh.geometry, tanh.levy, {0, 0.5, 0}, 1.0, pol, h, 17, static_cast<std::uint64_t>(k));
        double sup = 0;
        for (double x : p.x) sup = std::max(sup, std::abs(x));
        moment[level] += std::pow(sup, 4) / n;
        if (level == 1) {
          size_t start = 0;
          while (p.t[start] < 0.5 - 1e-12) ++start;
          for (int w = 0; w < 3; ++w) {
            double m = 0;
            for (size_t r = start; r < p.t.size() && p.t[r] <= 0.5 + window[w] + 1e-12; ++r)
              m = std::max(m, std::abs(p.x[r] - p.x[start]));
            modulus[w] += std::pow(m, 4) / n;
          }
        }
      }
    }
    CHECK(std::isfinite(moment[0]));
    CHECK(std::abs(moment[1] / moment[0] - 1.0) < 0.1);
    const double c0 = modulus[0] / (window[0] * window[0]), c2 = modulus[2] / (window[2] * window[2]);
    CHECK(std::max(c0, c2) / std::min(c0, c2) < 2.0);
  }
}

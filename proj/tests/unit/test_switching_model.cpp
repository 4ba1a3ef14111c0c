#include <doctest.h>

#include <cmath>

#include "rsctl/errors.hpp"
#include "rsctl/presets.hpp"
#include "rsctl/switching_model.hpp"

using namespace rsctl;

namespace {

ScalarFunction c(double v) {
  return [v](double) { return v; };
}

/// Two regimes with constant thresholds: Delta_12 = [b11, b12), Delta_21 = [b12, b21).
RegimeGeometry two_constant(double b11, double b12, double b21, double b22) {
  return RegimeGeometry(2, 1.0, {{c(b11), c(b12)}, {c(b21), c(b22)}}, -5.0, 5.0);
}

/// Four regimes: beta_13 = beta_14 = 0.4, Delta_23 = [0.5, 0.6).
RegimeGeometry four_regimes() {
  return RegimeGeometry(4, 1.0,
                        {{c(0.0), c(0.2), c(0.4), c(0.4)},
                         {c(0.5), c(0.5), c(0.6), c(0.6)},
                         {c(0.7), c(0.7), c(0.7), c(0.8)},
                         {c(0.8), c(0.9), c(0.9), c(0.9)}},
                        -5.0, 5.0);
}

}  // namespace

TEST_SUITE("switching_model") {
  TEST_CASE("diagonal intervals are empty for every regime and state") {
    const RegimeGeometry g = four_regimes();
    for (int i = 0; i < 4; ++i)
      for (double x : {-3.0, 0.0, 2.5}) CHECK(g.interval(i, i, x).empty());
    const SwitchingMechanism tanh = switching_preset("tanh");
    for (double x = -10; x <= 10; x += 0.5) {
      CHECK(tanh.geometry.interval(0, 0, x).empty());
      CHECK(tanh.geometry.interval(1, 1, x).empty());
    }
  }

  TEST_CASE("constant thresholds give the direct endpoint interval") {
    const RegimeGeometry g = two_constant(0.0, 0.4, 0.8, 0.8);
    const HalfOpenInterval d = g.interval(0, 1, 1.7);
    CHECK(d.lower == 0.0);
    CHECK(d.upper == 0.4);
    CHECK(d.contains(0.0));
    CHECK_FALSE(d.contains(0.4));
  }

  TEST_CASE("coinciding thresholds give an empty interval") {
    CHECK(four_regimes().interval(0, 3, 0.0).empty());
    CHECK(four_regimes().interval(0, 2, 0.0).length() == doctest::Approx(0.2));
  }

  TEST_CASE("mark_to_jump follows the interval indicator") {
    const RegimeGeometry g = two_constant(0.0, 0.4, 0.8, 0.8);
    CHECK(g.mark_to_jump(0.0, 0, 0.2) == 1);
    CHECK(g.mark_to_jump(0.0, 0, -0.9) == 0);
    CHECK(g.mark_to_jump(0.0, 0, 0.4) == 0);  // right endpoint excluded
    CHECK(four_regimes().mark_to_jump(0.0, 1, 0.55) == 2);
    CHECK_THROWS_AS(g.mark_to_jump(0.0, 0, 1.5), DomainError);
  }

  TEST_CASE("chain violation aborts construction and names the offending entry") {
    // beta_12 = 0.3 exceeds beta_21 = 0.1: the row-2 chain starts above its first threshold.
    try {
      two_constant(0.0, 0.3, 0.1, 0.1);
      FAIL("expected a geometry error");
    } catch (const GeometryError& e) {
      std::string keys;
      for (const auto& [k, v] : e.context()) keys += k + ";";
      CHECK(keys == "i;j;x;");
    }
    // Thresholds outside [-beta0, beta0].
    CHECK_THROWS_AS(two_constant(0.0, 0.4, 1.2, 1.2), GeometryError);
    // Non-empty diagonal interval (beta_21 != beta_22).
    CHECK_THROWS_AS(two_constant(0.0, 0.4, 0.6, 0.7), GeometryError);
  }

  TEST_CASE("literal crossing example is rejected; its chain-respecting counterpart gives the same generator") {
    // Delta_21 = [-0.6, -0.2) would need beta_20 = beta_12 = 0.4 <= beta_21 = -0.2.
    CHECK_THROWS_AS(two_constant(0.0, 0.4, -0.2, -0.2), GeometryError);
    // Same masses with Delta_21 = [0.4, 0.8): analytic integral 0.5 * 0.4 = 0.2.
    const RegimeGeometry g = two_constant(0.0, 0.4, 0.8, 0.8);
    const Eigen::MatrixXd q = rate_matrix(g, LevyMeasure::uniform(1.0), 0.3);
    Eigen::MatrixXd expected(2, 2);
    expected << -0.2, 0.2, 0.2, -0.2;
    CHECK((q - expected).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("quadrature matches the analytic mass for a non-constant density") {
    const LevyMeasure levy(1.0, [](double th) { return 0.5 * (1.0 + th); }, 1.0);
    // int_0^0.4 (1 + t)/2 dt = 0.24; int_0.4^0.8 (1 + t)/2 dt = 0.32.
    const Eigen::MatrixXd q = rate_matrix(two_constant(0.0, 0.4, 0.8, 0.8), levy, 0.0);
    CHECK(q(0, 1) == doctest::Approx(0.24).epsilon(1e-10));
    CHECK(q(1, 0) == doctest::Approx(0.32).epsilon(1e-10));
    CHECK(q(0, 0) == -q(0, 1));
  }

  TEST_CASE("empty geometry has the zero generator") {
    const SwitchingMechanism empty = switching_preset("empty");
    for (double x : {-2.0, 0.0, 3.0}) CHECK(rate_matrix(empty.geometry, empty.levy, x).isZero(0.0));
  }

  TEST_CASE("tanh preset at x = 0 has q_12 = 0.1") {
    const SwitchingMechanism tanh = switching_preset("tanh");
    const Eigen::MatrixXd q = rate_matrix(tanh.geometry, tanh.levy, 0.0);
    CHECK(q(0, 1) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(q(1, 0) == doctest::Approx(0.5 * (0.5 - 0.2)).epsilon(1e-12));
  }

  TEST_CASE("generator rows sum to zero with nonnegative off-diagonals on every preset") {
    for (const auto& name : switching_preset_names()) {
      const SwitchingMechanism mech = switching_preset(name);
      const GeneratorFunction q = mech.generator();
      for (int k = 0; k <= 200; ++k) {
        const double x = -10.0 + 0.1 * k;
        const Eigen::MatrixXd m = q(x);
        for (int i = 0; i < 2; ++i) {
          const double scale = std::max(1.0, m.row(i).cwiseAbs().maxCoeff());
          CHECK(std::abs(m.row(i).sum()) <= 1e-12 * scale);
          for (int j = 0; j < 2; ++j)
            if (i != j) CHECK(m(i, j) >= 0.0);
        }
      }
    }
  }

  TEST_CASE("intervals of one row are pairwise disjoint") {
    const SwitchingMechanism affine = switching_preset("affine");
    const RegimeGeometry g = four_regimes();
    for (double x : {-4.0, -1.0, 0.0, 1.0, 4.0}) {
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
          for (int k = j + 1; k < 4; ++k) {
            const HalfOpenInterval a = g.interval(i, j, x), b = g.interval(i, k, x);
            CHECK((a.empty() || b.empty() || a.upper <= b.lower || b.upper <= a.lower));
          }
      const HalfOpenInterval a = affine.geometry.interval(1, 0, x), b = affine.geometry.interval(1, 1, x);
      CHECK((a.empty() || b.empty() || a.upper <= b.lower));
    }
  }

  TEST_CASE("measure gap vanishes for constant thresholds and at zero radius") {
    const SwitchingMechanism constant = switching_preset("constant");
    for (double delta : {0.0, 0.1, 1.0}) {
      const MeasureGap gap = interval_measure_gap(constant.geometry, constant.levy, 0, 1, 0.3, delta);
      CHECK(gap.gap_out == 0.0);
      CHECK(gap.gap_in == 0.0);
    }
    const SwitchingMechanism tanh = switching_preset("tanh");
    const MeasureGap zero = interval_measure_gap(tanh.geometry, tanh.levy, 0, 1, 0.3, 0.0);
    CHECK(zero.gap_out == 0.0);
    CHECK(zero.gap_in == 0.0);
  }

  TEST_CASE("measure gap obeys the Lipschitz endpoint bound and is monotone in the radius") {
    // beta_12 = 0.2 + 0.1 tanh x has Lipschitz constant L = 0.1; density c = 1/2, so gap <= 4 c L delta.
    const SwitchingMechanism tanh = switching_preset("tanh");
    for (double x : {-1.0, 0.0, 0.7}) {
      double previous = 0.0;
      for (double delta : {0.0125, 0.025, 0.05, 0.1, 0.2}) {
        const MeasureGap gap = interval_measure_gap(tanh.geometry, tanh.levy, 0, 1, x, delta);
        const double total = gap.gap_out + gap.gap_in;
        CHECK(total <= 4 * 0.5 * 0.1 * delta + 1e-12);
        CHECK(total >= previous - 1e-15);
        previous = total;
      }
    }
  }

  TEST_CASE("mark measure validation") {
    CHECK_THROWS_AS(LevyMeasure(1.0, [](double) { return 0.25; }), ConfigError);  // mass 0.5
    CHECK_THROWS_AS(LevyMeasure(1.0, [](double th) { return th; }), ConfigError);  // negative
    const LevyMeasure uniform = LevyMeasure::uniform(2.0);
    CHECK(uniform.density(0.3) == doctest::Approx(0.25));
    CHECK(uniform.measure({-1.0, 5.0}) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(uniform.total_mass() == 1.0);
  }

  TEST_CASE("mark sampling reproduces the density moments") {
    const LevyMeasure skewed(1.0, [](double th) { return 0.5 * (1.0 + th); });
    Engine engine(42);
    const int n = 200000;
    double sum = 0.0;
    for (int k = 0; k < n; ++k) {
      const double th = skewed.sample(engine);
      REQUIRE(std::abs(th) <= 1.0);
      sum += th;
    }
    // Mean 1/3, variance 1/3 - 1/9 = 2/9.
    CHECK(std::abs(sum / n - 1.0 / 3.0) < 3.0 * std::sqrt(2.0 / 9.0 / n) + 1e-3);
  }

  TEST_CASE("mechanism for a constant generator reproduces it") {
    Eigen::MatrixXd q(3, 3);
    q << -0.3, 0.1, 0.2, 0.05, -0.15, 0.1, 0.2, 0.2, -0.4;
    const SwitchingMechanism mech = mechanism_for_constant_generator(q);
    CHECK((rate_matrix(mech.geometry, mech.levy, 0.7) - q).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::MatrixXd too_fast = q * 4.0;
    CHECK_THROWS(mechanism_for_constant_generator(too_fast));
  }
}

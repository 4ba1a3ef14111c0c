#include "rsctl/presets.hpp"

#include <algorithm>
#include <cmath>

#include "rsctl/errors.hpp"

namespace rsctl {
namespace {

ScalarFunction constant_fn(double c) {
  return [c](double) { return c; };
}

SwitchingMechanism two_regime(ScalarFunction beta12, double beta21, double x_min, double x_max) {
  std::vector<std::vector<ScalarFunction>> rows = {{constant_fn(0.0), std::move(beta12)},
                                                   {constant_fn(beta21), constant_fn(beta21)}};
  return {RegimeGeometry(2, 1.0, std::move(rows), x_min, x_max), LevyMeasure::uniform(1.0)};
}

}  // namespace

const std::vector<std::string>& switching_preset_names() {
  static const std::vector<std::string> names = {"tanh", "affine", "constant", "empty"};
  return names;
}

SwitchingMechanism switching_preset(const std::string& name, double x_min, double x_max) {
  if (name == "tanh") return two_regime([](double x) { return 0.2 + 0.1 * std::tanh(x); }, 0.5, x_min, x_max);
  if (name == "affine")
    return two_regime([](double x) { return std::clamp(0.2 + 0.1 * x, 0.05, 0.4); }, 0.6, x_min, x_max);
  if (name == "constant") return two_regime(constant_fn(0.4), 0.8, x_min, x_max);
  if (name == "empty") return two_regime(constant_fn(0.0), 0.0, x_min, x_max);
  throw ConfigError("unknown switching preset", {{"name", name}});
}

Model quadratic_model(const SwitchingMechanism& switching, double kappa, double horizon) {
  Model model;
  model.regimes = switching.geometry.regimes();
  model.horizon = horizon;
  const int m = model.regimes;
  std::vector<double> drift(static_cast<size_t>(m)), sigma(static_cast<size_t>(m)), target(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) {
    drift[static_cast<size_t>(i)] = 0.1 * (i % 2 == 0 ? 1.0 : -1.0);
    sigma[static_cast<size_t>(i)] = 0.3 + 0.1 * i;
    target[static_cast<size_t>(i)] = i % 2 == 0 ? 0.5 : -0.5;
  }
  model.dynamics.drift = [drift](double, double, int i, const Control& u) { return u[0] + drift[static_cast<size_t>(i)]; };
  model.dynamics.diffusion = [sigma](double, double, int i, const Control&) { return sigma[static_cast<size_t>(i)]; };
  model.dynamics.controls = ControlSet::interval(-1.0, 1.0);
  model.dynamics.anchor_control = scalar_control(0.0);
  model.dynamics.lipschitz = 1.0;
  model.generator = switching.generator();
  model.switching = switching;
  const double T = horizon;
  auto weight = [kappa](double tau, double s) { return 1.0 / (1.0 + kappa * (s - tau)); };
  model.running = [weight, target](double tau, double s, double x, int i, double, double, double, const Control& u) {
    const double dx = x - target[static_cast<size_t>(i)];
    return weight(tau, s) * 0.5 * (u[0] * u[0] + dx * dx);
  };
  model.terminal = [weight, T](double tau, double x, int) { return weight(tau, T) * 0.5 * x * x; };
  model.ellipticity = 0.5 * 0.3 * 0.3;
  return model;
}

}  // namespace rsctl

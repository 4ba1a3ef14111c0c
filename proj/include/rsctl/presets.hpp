#pragma once

// Named switching geometries (two regimes, uniform marks on [-1, 1]) and a bounded-control
// model used where no analytic minimizer exists.

#include <string>
#include <vector>

#include "rsctl/model.hpp"
#include "rsctl/switching_model.hpp"

namespace rsctl {

/// "tanh":     beta_12 = 0.2 + 0.1 tanh(x), beta_21 = 0.5 (q_12 = 0.1 + 0.05 tanh x).
/// "affine":   beta_12 = clamp(0.2 + 0.1 x, 0.05, 0.4), beta_21 = 0.6.
/// "constant": beta_12 = 0.4, beta_21 = 0.8 (Q = [[-0.2, 0.2], [0.2, -0.2]]).
/// "empty":    every threshold 0, so Q = 0.
SwitchingMechanism switching_preset(const std::string& name, double x_min = -10.0, double x_max = 10.0);
const std::vector<std::string>& switching_preset_names();

/// dX = (u + drift_i) ds + sigma_i dW with u in [-1, 1];
/// running cost w(tau, s) (u^2/2 + (x - target_i)^2 / 2), terminal w(tau, T) x^2 / 2,
/// w(tau, s) = 1 / (1 + kappa (s - tau)). kappa = 0 gives anchor-free data.
Model quadratic_model(const SwitchingMechanism& switching, double kappa = 1.0, double horizon = 1.0);

}  // namespace rsctl

#pragma once

// Controlled regime-switching model with anchor-dependent (time-inconsistent) costs.
// All solvers minimize; payoff problems are negated by their adapters.

#include <atomic>
#include <functional>
#include <memory>
#include <optional>

#include "rsctl/control.hpp"
#include "rsctl/switching_model.hpp"

namespace rsctl {

/// Running cost g(tau, s, x, i, y, z, coupling, u): y is the value, z = V_x * sigma and
/// coupling = [Q(x) V]_i.
using RunningCost = std::function<double(double tau, double s, double x, int regime, double y, double z,
                                         double coupling, const Control& u)>;

/// Terminal cost h(tau, x, i).
using TerminalCost = std::function<double(double tau, double x, int regime)>;

/// Pointwise Hamiltonian minimizer psi(tau; s, x, i, y, coupling, V_x, V_xx).
using Minimizer = std::function<Control(double tau, double s, double x, int regime, double y, double coupling,
                                        double p, double pp)>;

struct Model {
  int regimes = 1;
  double horizon = 1.0;
  ControlledDynamics dynamics;
  GeneratorFunction generator;  ///< Q(x); empty means no switching
  RunningCost running;
  TerminalCost terminal;
  Minimizer minimizer;  ///< optional analytic psi
  double ellipticity = 0.0;  ///< lower bound required of sigma^2 / 2 (0 disables the check)
  std::optional<SwitchingMechanism> switching;  ///< mark geometry for simulation
  std::shared_ptr<std::atomic<long>> clamp_events;  ///< incremented by psi when inputs are clamped

  Eigen::MatrixXd generator_at(double x) const;
  void validate() const;
};

/// H(tau; s, x, i, v, p, P, u) = p b + sigma^2 P / 2 + [Qv]_i + g(..., y, p sigma, [Qv]_i, u).
double hamiltonian(const Model& model, double tau, double s, double x, int regime, double y, double coupling,
                   double p, double pp, const Control& u);

}  // namespace rsctl

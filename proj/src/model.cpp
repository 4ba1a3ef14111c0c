#include "rsctl/model.hpp"

#include <cmath>
#include <string>

#include "rsctl/errors.hpp"

namespace rsctl {

Eigen::MatrixXd Model::generator_at(double x) const {
  if (!generator) return Eigen::MatrixXd::Zero(regimes, regimes);
  return generator(x);
}

void Model::validate() const {
  if (regimes < 1) throw ConfigError("regime count must be positive");
  if (!(horizon > 0)) throw ConfigError("horizon must be positive");
  if (!running || !terminal) throw ConfigError("model needs running and terminal costs");
  if (!dynamics.drift || !dynamics.diffusion) throw ConfigError("model needs drift and diffusion");
  if (switching && switching->geometry.regimes() != regimes)
    throw ConfigError("switching geometry and model disagree on the regime count");
}

double hamiltonian(const Model& model, double tau, double s, double x, int regime, double y, double coupling,
                   double p, double pp, const Control& u) {
  const double sig = model.dynamics.diffusion(s, x, regime, u);
  return p * model.dynamics.drift(s, x, regime, u) + 0.5 * sig * sig * pp + coupling +
         model.running(tau, s, x, regime, y, p * sig, coupling, u);
}

}  // namespace rsctl

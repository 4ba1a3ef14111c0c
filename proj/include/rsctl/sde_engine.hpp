#pragma once

// Monte Carlo simulation of the controlled state / regime pair.

#include <cstdint>
#include <functional>
#include <vector>

#include "rsctl/control.hpp"
#include "rsctl/grid.hpp"
#include "rsctl/switching_model.hpp"

namespace rsctl {

/// Control as a function of (s, x, regime); open-loop traces ignore the state.
using Policy = std::function<Control(double s, double x, int regime)>;

Policy open_loop(std::function<Control(double s)> trace);
Policy feedback(const FeedbackStrategy& strategy);
Policy constant_policy(const Control& u);

struct InitialState {
  double t = 0.0;
  double x = 0.0;
  int regime = 0;
};

struct JumpRecord {
  double time = 0.0;
  double mark = 0.0;
  int from = 0;
  int to = 0;
};

/// Sampled trajectory. alpha[k] is the regime just after t[k] (right-continuous).
/// Every Poisson arrival is recorded, including marks that leave the regime unchanged.
struct Path {
  std::vector<double> t;
  std::vector<double> x;
  std::vector<int> alpha;
  std::vector<JumpRecord> jumps;
  std::uint64_t stream = 0;
};

/// Euler-Maruyama on the step-h grid over [init.t, horizon], with exact unit-rate Poisson
/// arrival times merged in as extra nodes. The regime update uses the post-diffusion,
/// pre-jump state.
Path simulate_path(const ControlledDynamics& dynamics, const RegimeGeometry& geometry, const LevyMeasure& levy,
                   const InitialState& init, double horizon, const Policy& policy, double h, std::uint64_t seed,
                   std::uint64_t path_index = 0);

struct RateEstimate {
  double rate = 0.0;
  double standard_error = 0.0;
  long transitions = 0;
  bool anomaly = false;  ///< zero transitions although q * ds * n > 25
};

/// Frequency of alpha(ds) = target over paths started at (x, row), divided by ds.
RateEstimate estimate_transition_rate(const ControlledDynamics& dynamics, const RegimeGeometry& geometry,
                                      const LevyMeasure& levy, double x, int row, int target, double ds,
                                      long n_paths, std::uint64_t seed, int workers = 1);

struct CouplingEstimate {
  double prob_regime_split = 0.0;
  double mean_sq_gap_on_agreement = 0.0;
};

/// Two paths from xi1 and xi2 on common Brownian increments and marks.
CouplingEstimate coupled_pair_divergence(const ControlledDynamics& dynamics, const RegimeGeometry& geometry,
                                         const LevyMeasure& levy, const Policy& policy, double t0, double horizon,
                                         double xi1, double xi2, int regime, double h, long n_paths,
                                         std::uint64_t seed, int workers = 1);

/// Run body(path_index) for path indices [0, n) split across `workers` threads.
void parallel_for(long n, int workers, const std::function<void(long begin, long end, int worker)>& body);

}  // namespace rsctl

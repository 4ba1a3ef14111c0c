#include "rsctl/sde_engine.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <thread>

#include "rsctl/errors.hpp"
#include "rsctl/random.hpp"

namespace rsctl {
namespace {

constexpr std::uint64_t kJumpChannel = 0;
constexpr std::uint64_t kBrownianChannel = 1;

Control anchor_control(const ControlledDynamics& dynamics) {
  if (dynamics.anchor_control.size()) return dynamics.anchor_control;
  return dynamics.controls.clamp(Control::Zero(dynamics.controls.dimension()));
}

}  // namespace

Policy open_loop(std::function<Control(double s)> trace) {
  return [trace = std::move(trace)](double s, double, int) { return trace(s); };
}

Policy feedback(const FeedbackStrategy& strategy) {
  auto shared = std::make_shared<const FeedbackStrategy>(strategy);
  return [shared](double s, double x, int i) { return (*shared)(s, x, i); };
}

Policy constant_policy(const Control& u) {
  return [u](double, double, int) { return u; };
}

void parallel_for(long n, int workers, const std::function<void(long, long, int)>& body) {
  if (n <= 0) return;
  const int w = static_cast<int>(std::clamp<long>(workers, 1, n));
  if (w == 1) {
    body(0, n, 0);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<size_t>(w));
  for (int k = 0; k < w; ++k) {
    const long begin = n * k / w, end = n * (k + 1) / w;
    pool.emplace_back([&, begin, end, k] {
      try {
        body(begin, end, k);
      } catch (...) {
        errors[static_cast<size_t>(k)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

Path simulate_path(const ControlledDynamics& dynamics, const RegimeGeometry& geometry, const LevyMeasure& levy,
                   const InitialState& init, double horizon, const Policy& policy, double h, std::uint64_t seed,
                   std::uint64_t path_index) {
  if (!(h > 0)) throw ConfigError("simulation step must be positive");
  if (!(horizon >= init.t)) throw ConfigError("horizon precedes the initial time");
  if (init.regime < 0 || init.regime >= geometry.regimes()) throw ConfigError("initial regime out of range");
  if (!policy) throw DomainError("policy missing");

  Engine jumps = make_engine(seed, path_index, kJumpChannel);
  Engine brownian = make_engine(seed, path_index, kBrownianChannel);
  std::exponential_distribution<double> arrival(levy.total_mass());
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<double> jump_times, marks;
  for (double s = init.t + arrival(jumps); s < horizon; s += arrival(jumps)) {
    jump_times.push_back(s);
    marks.push_back(levy.sample(jumps));
  }

  Path path;
  path.stream = stream_id(seed, path_index, kBrownianChannel);
  const auto grid_steps = static_cast<long>(std::ceil((horizon - init.t) / h - 1e-9));
  path.t.reserve(static_cast<size_t>(grid_steps) + jump_times.size() + 1);
  path.x.reserve(path.t.capacity());
  path.alpha.reserve(path.t.capacity());
  path.t.push_back(init.t);
  path.x.push_back(init.x);
  path.alpha.push_back(init.regime);

  double s = init.t, x = init.x;
  int alpha = init.regime;
  long grid_k = 1;
  size_t next_jump = 0;
  long step = 0;
  while (s < horizon) {
    const double grid_next = std::min(horizon, init.t + static_cast<double>(grid_k) * h);
    const bool jump_first = next_jump < jump_times.size() && jump_times[next_jump] <= grid_next;
    const double s_next = jump_first ? jump_times[next_jump] : grid_next;
    const double dt = s_next - s;
    if (dt > 0) {
      const Control u = policy(s, x, alpha);
      const double b = dynamics.drift(s, x, alpha, u);
      const double sig = dynamics.diffusion(s, x, alpha, u);
      x += b * dt + sig * std::sqrt(dt) * normal(brownian);
    }
    ++step;
    if (!std::isfinite(x))
      throw SimulationError("state became non-finite", {{"step", std::to_string(step)}, {"time", std::to_string(s_next)}});
    if (jump_first) {
      const int to = geometry.mark_to_jump(x, alpha, marks[next_jump]);
      path.jumps.push_back({s_next, marks[next_jump], alpha, to});
      alpha = to;
      ++next_jump;
    }
    if (s_next >= grid_next) ++grid_k;
    s = s_next;
    path.t.push_back(s);
    path.x.push_back(x);
    path.alpha.push_back(alpha);
  }
  return path;
}

RateEstimate estimate_transition_rate(const ControlledDynamics& dynamics, const RegimeGeometry& geometry,
                                      const LevyMeasure& levy, double x, int row, int target, double ds,
                                      long n_paths, std::uint64_t seed, int workers) {
  if (row == target) throw ConfigError("transition rate needs distinct regimes");
  if (row < 0 || target < 0 || row >= geometry.regimes() || target >= geometry.regimes())
    throw ConfigError("regime out of range");
  if (!(ds > 0) || n_paths < 1) throw ConfigError("rate estimate needs ds > 0 and at least one path");
  const Policy policy = constant_policy(anchor_control(dynamics));
  std::vector<long> hits(static_cast<size_t>(std::max(1, workers)), 0);
  parallel_for(n_paths, workers, [&](long begin, long end, int w) {
    long count = 0;
    for (long p = begin; p < end; ++p) {
      const Path path = simulate_path(dynamics, geometry, levy, {0.0, x, row}, ds, policy, ds, seed,
                                      static_cast<std::uint64_t>(p));
      if (path.alpha.back() == target) ++count;
    }
    hits[static_cast<size_t>(w)] = count;
  });
  long total = 0;
  for (long c : hits) total += c;
  const double n = static_cast<double>(n_paths);
  const double p_hat = total / n;
  RateEstimate est;
  est.transitions = total;
  est.rate = p_hat / ds;
  est.standard_error = std::sqrt(p_hat * (1.0 - p_hat) / n) / ds;
  const double q = levy.measure(geometry.interval(row, target, x));
  est.anomaly = total == 0 && q * ds * n > 25.0;
  return est;
}

CouplingEstimate coupled_pair_divergence(const ControlledDynamics& dynamics, const RegimeGeometry& geometry,
                                         const LevyMeasure& levy, const Policy& policy, double t0, double horizon,
                                         double xi1, double xi2, int regime, double h, long n_paths,
                                         std::uint64_t seed, int workers) {
  if (n_paths < 1) throw ConfigError("coupling estimate needs at least one path");
  const size_t w = static_cast<size_t>(std::max(1, workers));
  std::vector<long> splits(w, 0);
  std::vector<double> gaps(w, 0.0);
  parallel_for(n_paths, workers, [&](long begin, long end, int k) {
    long split = 0;
    double gap = 0.0;
    for (long p = begin; p < end; ++p) {
      const auto idx = static_cast<std::uint64_t>(p);
      const Path a = simulate_path(dynamics, geometry, levy, {t0, xi1, regime}, horizon, policy, h, seed, idx);
      const Path b = simulate_path(dynamics, geometry, levy, {t0, xi2, regime}, horizon, policy, h, seed, idx);
      bool agree = a.alpha == b.alpha;
      if (!agree) {
        ++split;
        continue;
      }
      double sup = 0.0;
      for (size_t n = 0; n < a.x.size(); ++n) sup = std::max(sup, std::abs(a.x[n] - b.x[n]));
      gap += sup * sup;
    }
    splits[static_cast<size_t>(k)] = split;
    gaps[static_cast<size_t>(k)] = gap;
  });
  CouplingEstimate out;
  long split = 0;
  double gap = 0.0;
  for (size_t k = 0; k < w; ++k) {
    split += splits[k];
    gap += gaps[k];
  }
  out.prob_regime_split = static_cast<double>(split) / n_paths;
  const long agreed = n_paths - split;
  out.mean_sq_gap_on_agreement = agreed > 0 ? gap / static_cast<double>(agreed) : 0.0;
  return out;
}

}  // namespace rsctl

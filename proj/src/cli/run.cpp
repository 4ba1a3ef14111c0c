#include "rsctl/cli/run.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "rsctl/cost_evaluator.hpp"
#include "rsctl/equilibrium_solver.hpp"
#include "rsctl/field_io.hpp"
#include "rsctl/merton.hpp"
#include "rsctl/partition_game.hpp"
#include "rsctl/sde_engine.hpp"

namespace rsctl::cli {

using Json = nlohmann::ordered_json;

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names = {"simulate",    "rates",  "partition-solve",
                                                 "equilibrium", "merton", "verify"};
  return names;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return 2;
    case ErrorKind::NonConvergence: return 4;
    default: return 3;
  }
}

std::string error_json(const Error& error) {
  Json context = Json::array();
  for (const auto& [key, value] : error.context()) context.push_back({{"key", key}, {"value", value}});
  Json body = {{"kind", to_string(error.kind())},
               {"message", error.what()},
               {"exit_code", exit_code(error.kind())},
               {"context", context}};
  if (const auto* nc = dynamic_cast<const NonConvergenceError*>(&error)) body["history"] = nc->history;
  return Json{{"error", body}}.dump();
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1)
    throw NumericError("SHA-256 digest failed");
  std::ostringstream hex;
  for (unsigned int k = 0; k < length; ++k) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[k]);
  return hex.str();
}

namespace {

/// Collects artifacts of one run and writes the manifest last.
class Artifacts {
 public:
  explicit Artifacts(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

  void write(const std::string& name, const std::string& bytes) {
    std::ofstream f(dir_ / name, std::ios::binary);
    f << bytes;
    if (!f) throw NumericError("cannot write artifact", {{"file", (dir_ / name).string()}});
    manifest_.push_back({{"file", name}, {"bytes", bytes.size()}, {"sha256", sha256_hex(bytes)}});
  }

  void write_json(const std::string& name, const Json& j) { write(name, j.dump(2) + "\n"); }

  size_t finish(const std::string& subcommand, const RunConfig& config) {
    const size_t n = manifest_.size();
    Json m = {{"subcommand", subcommand}, {"seed", config.seed}, {"artifacts", manifest_}};
    const std::string text = m.dump(2) + "\n";
    std::ofstream f(dir_ / "manifest.json", std::ios::binary);
    f << text;
    return n;
  }

 private:
  std::filesystem::path dir_;
  Json manifest_ = Json::array();
};

bool wants(const RunConfig& c, const char* format) {
  return std::find(c.output.formats.begin(), c.output.formats.end(), format) != c.output.formats.end();
}

void write_value(Artifacts& art, const RunConfig& c, const std::string& stem, const ValueField& field) {
  if (wants(c, "csv")) {
    std::ostringstream s;
    write_field_csv(s, field);
    art.write(stem + ".csv", s.str());
  }
  if (wants(c, "binary")) {
    std::ostringstream s(std::ios::binary);
    write_field_binary(s, field);
    art.write(stem + ".bin", s.str());
  }
}

void write_strategy(Artifacts& art, const std::string& name, const FeedbackStrategy& strategy) {
  std::ostringstream s;
  write_strategy_csv(s, strategy);
  art.write(name, s.str());
}

Json warnings_json(const std::vector<Warning>& warnings) {
  Json out = Json::array();
  for (const auto& w : warnings) out.push_back({{"code", w.code}, {"message", w.message}, {"count", w.count}});
  return out;
}

Control config_control(const std::vector<double>& values, const ControlSet& set, const char* key) {
  if (static_cast<int>(values.size()) != set.dimension())
    throw ConfigError(std::string(key) + " must have one entry per control component",
                      {{"expected", std::to_string(set.dimension())}});
  Control u(set.dimension());
  for (int k = 0; k < set.dimension(); ++k) u[k] = values[static_cast<size_t>(k)];
  if (!set.contains(u)) throw ConfigError(std::string(key) + " lies outside the admissible control set");
  return u;
}

/// Shared plan for --dry-run and the execution log.
struct Plan {
  std::vector<std::string> steps;
  std::vector<std::string> artifacts;
};

void check_spike_resolution(const RunConfig& c, const TimeGrid& times) {
  const double dt = times.max_step();
  for (double fraction : c.solver.epsilon) {
    const double eps = fraction * c.grid.horizon;
    const int t_idx = static_cast<int>(std::lround((c.solver.spike_time - times.front()) / dt));
    const int e_idx = static_cast<int>(std::lround((c.solver.spike_time + eps - times.front()) / dt));
    if (e_idx - t_idx < 2)
      throw ResolutionError("spike length below two time steps", {{"epsilon", format_number(eps)},
                                                                   {"time_step", format_number(dt)}});
    if (e_idx > times.steps()) throw DomainError("spike interval extends past the horizon", {{"epsilon", format_number(eps)}});
  }
}

Plan make_plan(const std::string& sub, const RunConfig& c, const RunOptions& o, const BuiltModel& built) {
  Plan p;
  auto fields = [&](const std::string& stem) {
    if (wants(c, "csv")) p.artifacts.push_back(stem + ".csv");
    if (wants(c, "binary")) p.artifacts.push_back(stem + ".bin");
  };
  if (sub == "simulate") {
    p.steps = {"simulate " + std::to_string(c.simulate.paths) + " paths with step " + format_number(c.simulate.step)};
    p.artifacts = {"paths.csv", "jumps.json", "simulation.json"};
  } else if (sub == "rates") {
    p.steps = {"quadrature generator at " + std::to_string(c.simulate.rate_points.size()) + " states",
               "empirical rates from " + std::to_string(c.simulate.rate_paths) + " paths per transition"};
    p.artifacts = {"rates.json"};
  } else if (sub == "partition-solve") {
    p.steps = {"run player cycles on the configured partition"};
    fields("value");
    p.artifacts.push_back("strategy.csv");
    p.artifacts.push_back("partition.json");
    if (!c.solver.partition.refine.empty()) {
      p.steps.push_back("convergence table over " + std::to_string(c.solver.partition.refine.size()) + " partitions");
      p.artifacts.push_back("convergence.json");
    }
  } else if (sub == "equilibrium") {
    p.steps = {"slab fixed point with tolerance " + format_number(c.solver.tol), "equation residual"};
    fields("value");
    p.artifacts.push_back("strategy.csv");
    p.artifacts.push_back("residual_log.jsonl");
    p.artifacts.push_back("equilibrium.json");
  } else if (sub == "merton") {
    if (!built.merton) throw ConfigError("the merton subcommand needs model.preset = merton");
    if (o.variant != "tc" && o.variant != "pre" && o.variant != "eq")
      throw ConfigError("--variant must be tc, pre or eq", {{"variant", o.variant}});
    p.steps = {"coefficient equations for variant " + o.variant,
               "Monte Carlo payoff with " + std::to_string(c.simulate.paths) + " paths"};
    p.artifacts = {"phi.csv", "strategy.csv", "comparison.json"};
  } else if (sub == "verify") {
    check_spike_resolution(c, built.grids.time);
    p.steps = {"equilibrium fixed point", "spike test at t = " + format_number(c.solver.spike_time) + " over " +
                                              std::to_string(c.solver.epsilon.size()) + " spike lengths"};
    for (size_t k = 0; k < c.solver.epsilon.size(); ++k) p.artifacts.push_back("gain_" + std::to_string(k + 1) + ".csv");
    p.artifacts.push_back("spike.json");
  } else {
    throw ConfigError("unknown subcommand", {{"subcommand", sub}});
  }
  p.artifacts.push_back("manifest.json");
  return p;
}

// ---------------------------------------------------------------------------------------------
// Subcommands. Each returns the summary metrics.

Json run_simulate(const RunConfig& c, const BuiltModel& b, Artifacts& art) {
  const Model& model = b.model;
  if (!model.switching) throw ConfigError("model has no switching mechanism to simulate");
  const Control u = c.simulate.control.empty() ? model.dynamics.anchor_control
                                               : config_control(c.simulate.control, model.dynamics.controls,
                                                                "simulate.control");
  const Policy policy = constant_policy(u);
  const long n = c.simulate.paths;
  const InitialState init{c.simulate.t0, c.simulate.x0, c.simulate.regime - 1};
  std::vector<double> terminal(static_cast<size_t>(n));
  std::vector<int> final_regime(static_cast<size_t>(n));
  std::vector<long> effective(static_cast<size_t>(n));
  const long saved = std::min<long>(n, c.simulate.save_paths);
  std::vector<Path> kept(static_cast<size_t>(saved));
  parallel_for(n, c.workers, [&](long begin, long end, int) {
    for (long k = begin; k < end; ++k) {
      Path path = simulate_path(model.dynamics, model.switching->geometry, model.switching->levy, init,
                                model.horizon, policy, c.simulate.step, c.seed, static_cast<std::uint64_t>(k));
      terminal[static_cast<size_t>(k)] = path.x.back();
      final_regime[static_cast<size_t>(k)] = path.alpha.back();
      long moves = 0;
      for (const auto& j : path.jumps) moves += j.from != j.to;
      effective[static_cast<size_t>(k)] = moves;
      if (k < saved) kept[static_cast<size_t>(k)] = std::move(path);
    }
  });

  std::ostringstream csv;
  csv << "path,t,X,alpha\n";
  Json jumps = Json::array();
  for (long k = 0; k < saved; ++k) {
    const Path& p = kept[static_cast<size_t>(k)];
    for (size_t r = 0; r < p.t.size(); ++r)
      csv << k << ',' << format_number(p.t[r]) << ',' << format_number(p.x[r]) << ',' << p.alpha[r] + 1 << '\n';
    for (const auto& j : p.jumps)
      jumps.push_back({{"path", k}, {"time", j.time}, {"mark", j.mark}, {"from", j.from + 1}, {"to", j.to + 1}});
  }
  art.write("paths.csv", csv.str());
  art.write_json("jumps.json", jumps);

  double mean = 0.0, sq = 0.0, moves = 0.0;
  std::vector<double> occupancy(static_cast<size_t>(model.regimes), 0.0);
  for (long k = 0; k < n; ++k) {
    mean += terminal[static_cast<size_t>(k)];
    moves += static_cast<double>(effective[static_cast<size_t>(k)]);
    occupancy[static_cast<size_t>(final_regime[static_cast<size_t>(k)])] += 1.0 / static_cast<double>(n);
  }
  mean /= static_cast<double>(n);
  for (double x : terminal) sq += (x - mean) * (x - mean);
  const double se = n > 1 ? std::sqrt(sq / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
  Json summary = {{"paths", n},
                  {"mean_terminal_state", mean},
                  {"standard_error", se},
                  {"mean_regime_changes", moves / static_cast<double>(n)},
                  {"terminal_regime_share", occupancy}};
  art.write_json("simulation.json", summary);
  return summary;
}

Json run_rates(const RunConfig& c, const BuiltModel& b, Artifacts& art) {
  const Model& model = b.model;
  if (!model.switching) throw ConfigError("model has no switching mechanism");
  const SwitchingMechanism& sw = *model.switching;
  const int m = model.regimes;
  Json points = Json::array();
  double worst_z = 0.0;
  std::uint64_t stream = 0;
  for (double x : c.simulate.rate_points) {
    const Eigen::MatrixXd q = rate_matrix(sw.geometry, sw.levy, x);
    Json generator = Json::array(), transitions = Json::array();
    for (int i = 0; i < m; ++i) {
      Json row = Json::array();
      for (int j = 0; j < m; ++j) row.push_back(q(i, j));
      generator.push_back(row);
    }
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        if (i == j) continue;
        const RateEstimate est = estimate_transition_rate(model.dynamics, sw.geometry, sw.levy, x, i, j,
                                                          c.simulate.rate_dt, c.simulate.rate_paths,
                                                          c.seed + 7919 * ++stream, c.workers);
        const double z = est.standard_error > 0 ? (est.rate - q(i, j)) / est.standard_error : 0.0;
        worst_z = std::max(worst_z, std::abs(z));
        transitions.push_back({{"x", x},
                               {"i", i + 1},
                               {"j", j + 1},
                               {"q_theory", q(i, j)},
                               {"q_empirical", est.rate},
                               {"se", est.standard_error},
                               {"transitions", est.transitions},
                               {"z_score", z},
                               {"anomaly", est.anomaly}});
      }
    points.push_back({{"x", x}, {"generator", generator}, {"transitions", transitions}});
  }
  art.write_json("rates.json", {{"time_step", c.simulate.rate_dt}, {"paths", c.simulate.rate_paths}, {"points", points}});
  return {{"states", c.simulate.rate_points.size()}, {"max_abs_z", worst_z}};
}

Partition config_partition(const RunConfig& c, int count) {
  if (count == 0 && !c.solver.partition.knots.empty()) return Partition(c.solver.partition.knots);
  return Partition::uniform(c.grid.horizon, count > 0 ? count : c.solver.partition.count);
}

Json run_partition(const RunConfig& c, const BuiltModel& b, Artifacts& art) {
  const PiSolution sol = run_cycles(b.model, config_partition(c, 0), b.grids);
  write_value(art, c, "value", sol.value);
  write_strategy(art, "strategy.csv", sol.strategy);
  Json summary = {{"blocks", sol.partition.count()},
                  {"mesh", sol.partition.mesh()},
                  {"knots", sol.partition.knots()},
                  {"warnings", warnings_json(sol.warnings)}};
  art.write_json("partition.json", summary);
  if (!c.solver.partition.refine.empty()) {
    std::vector<Partition> parts;
    for (int n : c.solver.partition.refine) parts.push_back(Partition::uniform(c.grid.horizon, n));
    const auto table = refine_and_compare(b.model, parts, b.grids);
    Json rows = Json::array();
    for (const auto& r : table) {
      Json row = {{"count", r.count}, {"mesh", r.mesh}};
      row["sup_diff_V"] = r.sup_diff_value ? Json(*r.sup_diff_value) : Json(nullptr);
      row["sup_diff_Psi"] = r.sup_diff_strategy ? Json(*r.sup_diff_strategy) : Json(nullptr);
      rows.push_back(row);
    }
    art.write_json("convergence.json", rows);
  }
  summary.erase("warnings");
  summary["warnings"] = sol.warnings.size();
  return summary;
}

EquilibriumOptions solver_options(const RunConfig& c) {
  EquilibriumOptions o;
  o.tol = c.solver.tol;
  o.max_sweeps = c.solver.max_sweeps;
  o.slab_width = c.solver.slab_width;
  o.workers = c.workers;
  return o;
}

Json run_equilibrium(const RunConfig& c, const BuiltModel& b, Artifacts& art) {
  const EquilibriumSolution sol = solve_equilibrium(b.model, b.grids, solver_options(c));
  std::ostringstream log;
  double final_residual = 0.0;
  for (size_t k = 0; k < sol.log.size(); ++k) {
    const SweepRecord& r = sol.log[k];
    log << Json{{"slab", r.slab}, {"sweep", r.sweep}, {"diag_change", r.diag_change}, {"residual", r.residual}}.dump()
        << '\n';
    if (k + 1 == sol.log.size() || sol.log[k + 1].slab != r.slab) final_residual = std::max(final_residual, r.residual);
  }
  write_value(art, c, "value", sol.value);
  write_strategy(art, "strategy.csv", sol.strategy);
  art.write("residual_log.jsonl", log.str());
  const double equation = residual(b.model, sol);
  Json summary = {{"sweeps", sol.log.size()},
                  {"final_residual", final_residual},
                  {"tolerance", c.solver.tol},
                  {"equation_residual", equation},
                  {"warnings", warnings_json(sol.warnings)}};
  art.write_json("equilibrium.json", summary);
  summary["warnings"] = sol.warnings.size();
  return summary;
}

double interpolate_column(const Eigen::MatrixXd& table, const TimeGrid& times, double s, int i) {
  if (s <= times.front()) return table(0, i);
  if (s >= times.back()) return table(times.size() - 1, i);
  const auto it = std::upper_bound(times.nodes.begin(), times.nodes.end(), s);
  const int k = static_cast<int>(it - times.nodes.begin());
  const double w = (s - times[k - 1]) / (times[k] - times[k - 1]);
  return (1 - w) * table(k - 1, i) + w * table(k, i);
}

Json run_merton(const RunConfig& c, const BuiltModel& b, const RunOptions& o, Artifacts& art) {
  const MertonSpec& spec = *b.merton;
  const TimeGrid& times = b.grids.time;
  const int m = spec.regimes(), n = times.size();
  std::ostringstream phi_csv, strat_csv;
  phi_csv << "tau,s,i,phi\n";
  strat_csv << "s,i,invested_fraction,consumed_fraction\n";
  ProportionalStrategy strategy;
  double t = c.simulate.t0;
  double predicted_phi = 0.0;
  const int regime = c.simulate.regime - 1;

  if (o.variant == "eq") {
    const EquilibriumPhi phi = solve_equilibrium_ode(spec, times);
    for (int r = 0; r < n; ++r)
      for (int s = r; s < n; ++s)
        for (int i = 0; i < m; ++i)
          phi_csv << format_number(times[r]) << ',' << format_number(times[s]) << ',' << i + 1 << ','
                  << format_number(phi.at(r, s, i)) << '\n';
    strategy = equilibrium_fractions(spec, phi);
    predicted_phi = phi.diagonal_at(t, regime);
  } else if (o.variant == "tc") {
    const Eigen::MatrixXd phi = solve_time_consistent(spec, times);
    for (int s = 0; s < n; ++s)
      for (int i = 0; i < m; ++i)
        phi_csv << format_number(times[s]) << ',' << format_number(times[s]) << ',' << i + 1 << ','
                << format_number(phi(s, i)) << '\n';
    strategy = time_consistent_fractions(spec, phi, times);
    predicted_phi = interpolate_column(phi, times, t, regime);
  } else {
    const double tau = c.solver.anchor;
    const auto phi = std::make_shared<const Eigen::MatrixXd>(solve_precommitted(spec, tau, times));
    for (int s = 0; s < n; ++s) {
      if (times[s] < tau - 1e-12) continue;
      for (int i = 0; i < m; ++i)
        phi_csv << format_number(tau) << ',' << format_number(times[s]) << ',' << i + 1 << ','
                << format_number((*phi)(s, i)) << '\n';
    }
    strategy.invested = [spec, tau, phi, times](double s, int i) {
      return precommitted_strategy(spec, tau, interpolate_column(*phi, times, s, i), s, 1.0, i).investment;
    };
    strategy.consumed = [spec, tau, phi, times](double s, int i) {
      return precommitted_strategy(spec, tau, interpolate_column(*phi, times, s, i), s, 1.0, i).consumption;
    };
    t = std::max(t, tau);
    predicted_phi = interpolate_column(*phi, times, t, regime);
  }
  for (int s = 0; s < n; ++s)
    for (int i = 0; i < m; ++i)
      strat_csv << format_number(times[s]) << ',' << i + 1 << ',' << format_number(strategy.invested(times[s], i))
                << ',' << format_number(strategy.consumed(times[s], i)) << '\n';
  art.write("phi.csv", phi_csv.str());
  art.write("strategy.csv", strat_csv.str());

  const MonteCarloEstimate mc = monte_carlo_payoff(spec, strategy, t, c.simulate.x0, regime, c.simulate.paths, c.seed,
                                                   c.simulate.step, c.workers);
  const double predicted = predicted_phi * std::pow(c.simulate.x0, spec.gamma);
  const double z = mc.standard_error > 0 ? (mc.estimate - predicted) / mc.standard_error : 0.0;
  Json summary = {{"variant", o.variant},
                  {"t", t},
                  {"x", c.simulate.x0},
                  {"regime", c.simulate.regime},
                  {"predicted", predicted},
                  {"monte_carlo", mc.estimate},
                  {"standard_error", mc.standard_error},
                  {"paths", mc.paths},
                  {"z_score", z}};
  art.write_json("comparison.json", summary);
  return summary;
}

Perturbation config_perturbation(const RunConfig& c, const Model& model, const EquilibriumSolution& sol,
                                 Control& applied) {
  if (c.solver.perturbation == "anchor_optimal") return Perturbation::anchor_optimal();
  if (c.solver.perturbation == "equilibrium") return Perturbation::follow(sol.strategy);
  applied = c.solver.control.empty()
                ? sol.strategy(c.solver.spike_time, c.solver.probe_x, c.solver.probe_regime - 1)
                : config_control(c.solver.control, model.dynamics.controls, "solver.control");
  return Perturbation::constant(applied);
}

Json run_verify(const RunConfig& c, const BuiltModel& b, Artifacts& art) {
  check_spike_resolution(c, b.grids.time);
  const EquilibriumSolution sol = solve_equilibrium(b.model, b.grids, solver_options(c));
  Control applied;
  const Perturbation perturbation = config_perturbation(c, b.model, sol, applied);
  const SpikeStudy study = spike_study(b.model, sol, c.solver.spike_time, perturbation, c.solver.epsilon);
  Json rungs = Json::array();
  const SpatialGrid& grid = b.grids.space;
  for (size_t k = 0; k < study.results.size(); ++k) {
    const SpikeResult& r = study.results[k];
    std::ostringstream csv;
    csv << "x,i,gain\n";
    for (int x = 0; x < grid.n_x; ++x)
      for (int i = 0; i < r.gain.cols(); ++i)
        csv << format_number(grid.x(x)) << ',' << i + 1 << ',' << format_number(r.gain(x, i)) << '\n';
    art.write("gain_" + std::to_string(k + 1) + ".csv", csv.str());
    rungs.push_back({{"epsilon", r.epsilon}, {"min_gain", r.min_gain}, {"constant", study.constants[k]}});
  }
  Json control = Json::array();
  for (Eigen::Index k = 0; k < applied.size(); ++k) control.push_back(applied[k]);
  Json summary = {{"t", c.solver.spike_time},
                  {"perturbation", c.solver.perturbation},
                  {"control", control},
                  {"rungs", rungs},
                  {"intercept_estimate", study.fit.intercept},
                  {"slope", study.fit.slope},
                  {"constants_stable", study.constants_stable}};
  art.write_json("spike.json", summary);
  return {{"intercept_estimate", study.fit.intercept}, {"constants_stable", study.constants_stable}};
}

}  // namespace

int run(const std::string& subcommand, const RunConfig& config, const RunOptions& options, std::ostream& out,
        std::ostream& err) {
  try {
    if (std::find(subcommands().begin(), subcommands().end(), subcommand) == subcommands().end())
      throw ConfigError("unknown subcommand", {{"subcommand", subcommand}});
    const BuiltModel built = build_model(config);
    const Plan plan = make_plan(subcommand, config, options, built);
    if (options.dry_run) {
      out << Json{{"status", "dry-run"},
                  {"subcommand", subcommand},
                  {"output", config.output.directory},
                  {"regimes", built.model.regimes},
                  {"n_x", built.grids.space.n_x},
                  {"n_t", built.grids.time.steps()},
                  {"steps", plan.steps},
                  {"artifacts", plan.artifacts}}
                 .dump()
          << '\n';
      return 0;
    }
    Artifacts art(config.output.directory);
    Json metrics;
    if (subcommand == "simulate") metrics = run_simulate(config, built, art);
    else if (subcommand == "rates") metrics = run_rates(config, built, art);
    else if (subcommand == "partition-solve") metrics = run_partition(config, built, art);
    else if (subcommand == "equilibrium") metrics = run_equilibrium(config, built, art);
    else if (subcommand == "merton") metrics = run_merton(config, built, options, art);
    else metrics = run_verify(config, built, art);
    const size_t count = art.finish(subcommand, config);
    Json summary = {{"status", "ok"}, {"subcommand", subcommand}, {"output", config.output.directory},
                    {"artifacts", count + 1}};
    for (auto& [key, value] : metrics.items()) summary[key] = value;
    out << summary.dump() << '\n';
    return 0;
  } catch (const Error& e) {
    err << error_json(e) << '\n';
    out << Json{{"status", "error"}, {"subcommand", subcommand}, {"kind", to_string(e.kind())},
                {"exit_code", exit_code(e.kind())}}
               .dump()
        << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << Json{{"error", {{"kind", "internal"}, {"message", e.what()}, {"exit_code", 3}}}}.dump() << '\n';
    out << Json{{"status", "error"}, {"subcommand", subcommand}, {"kind", "internal"}, {"exit_code", 3}}.dump() << '\n';
    return 3;
  }
}

}  // namespace rsctl::cli

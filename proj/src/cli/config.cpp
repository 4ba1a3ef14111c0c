#include "rsctl/cli/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "rsctl/cli/expression.hpp"
#include "rsctl/errors.hpp"
#include "rsctl/field_io.hpp"
#include "rsctl/presets.hpp"

namespace rsctl::cli {

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::string nearest_key(const std::string& key, const std::vector<std::string>& candidates) {
  std::string best;
  std::size_t best_d = std::string::npos;
  for (const auto& c : candidates) {
    const std::size_t d = edit_distance(key, c);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

namespace {

// ---------------------------------------------------------------------------------------------
// Reading

class Reader {
 public:
  std::vector<std::string> errors;

  /// Reports unknown keys under `node` and returns false when `node` is not a map.
  bool section(const YAML::Node& node, const std::string& path, const std::vector<std::string>& allowed) {
    if (!node || node.IsNull()) return false;
    if (!node.IsMap()) {
      errors.push_back(label(path) + "expected a mapping");
      return false;
    }
    for (const auto& kv : node) {
      const std::string key = kv.first.as<std::string>();
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
        errors.push_back(join(path, key) + ": unknown key '" + key + "'; did you mean '" +
                         nearest_key(key, allowed) + "'?");
    }
    return true;
  }

  template <class T>
  void get(const YAML::Node& map, const std::string& path, const char* key, T& out) {
    const YAML::Node node = map[key];
    if (!node) return;
    try {
      out = node.as<T>();
    } catch (const YAML::Exception&) {
      errors.push_back(join(path, key) + ": " + expected<T>());
    }
  }

 private:
  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }
  static std::string label(const std::string& path) { return path.empty() ? "" : path + ": "; }

  template <class T>
  static std::string expected() {
    if constexpr (std::is_same_v<T, std::string>) return "expected a string";
    else if constexpr (std::is_same_v<T, bool>) return "expected a boolean";
    else if constexpr (std::is_integral_v<T>) return "expected an integer";
    else if constexpr (std::is_floating_point_v<T>) return "expected a number";
    else return "expected a list of the declared element type";
  }
};

void read_merton(Reader& r, const YAML::Node& n, MertonBlock& m) {
  const std::string p = "model.merton";
  if (!r.section(n, p, {"b", "sigma", "gamma", "g", "h", "generator", "psi_clamp"})) return;
  r.get(n, p, "b", m.b);
  r.get(n, p, "sigma", m.sigma);
  r.get(n, p, "gamma", m.gamma);
  r.get(n, p, "g", m.g);
  r.get(n, p, "h", m.h);
  r.get(n, p, "generator", m.generator);
  r.get(n, p, "psi_clamp", m.psi_clamp);
}

void read_switching(Reader& r, const YAML::Node& n, SwitchingBlock& s) {
  const std::string p = "model.switching";
  if (!r.section(n, p, {"preset", "beta0", "thresholds", "density", "rate_bound"})) return;
  r.get(n, p, "preset", s.preset);
  r.get(n, p, "beta0", s.beta0);
  r.get(n, p, "thresholds", s.thresholds);
  r.get(n, p, "density", s.density);
  r.get(n, p, "rate_bound", s.rate_bound);
}

void read_custom(Reader& r, const YAML::Node& n, CustomBlock& c) {
  const std::string p = "model.custom";
  if (!r.section(n, p, {"control_lower", "control_upper", "b", "sigma", "g", "h", "lipschitz", "ellipticity"}))
    return;
  r.get(n, p, "control_lower", c.control_lower);
  r.get(n, p, "control_upper", c.control_upper);
  r.get(n, p, "b", c.b);
  r.get(n, p, "sigma", c.sigma);
  r.get(n, p, "g", c.g);
  r.get(n, p, "h", c.h);
  r.get(n, p, "lipschitz", c.lipschitz);
  r.get(n, p, "ellipticity", c.ellipticity);
}

void read_model(Reader& r, const YAML::Node& n, ModelBlock& m) {
  const std::string p = "model";
  if (!r.section(n, p, {"preset", "kappa", "merton", "switching", "custom"})) return;
  r.get(n, p, "preset", m.preset);
  r.get(n, p, "kappa", m.kappa);
  read_merton(r, n["merton"], m.merton);
  read_switching(r, n["switching"], m.switching);
  read_custom(r, n["custom"], m.custom);
}

void read_grid(Reader& r, const YAML::Node& n, GridBlock& g) {
  const std::string p = "grid";
  if (!r.section(n, p, {"x_min", "x_max", "n_x", "n_t", "horizon", "buffer", "boundary"})) return;
  r.get(n, p, "x_min", g.x_min);
  r.get(n, p, "x_max", g.x_max);
  r.get(n, p, "n_x", g.n_x);
  r.get(n, p, "n_t", g.n_t);
  r.get(n, p, "horizon", g.horizon);
  r.get(n, p, "buffer", g.buffer);
  r.get(n, p, "boundary", g.boundary);
}

void read_solver(Reader& r, const YAML::Node& n, SolverBlock& s) {
  const std::string p = "solver";
  if (!r.section(n, p,
                 {"tol", "max_sweeps", "slab_width", "partition", "epsilon", "spike_time", "perturbation", "control",
                  "probe_x", "probe_regime", "anchor"}))
    return;
  r.get(n, p, "tol", s.tol);
  r.get(n, p, "max_sweeps", s.max_sweeps);
  r.get(n, p, "slab_width", s.slab_width);
  r.get(n, p, "epsilon", s.epsilon);
  r.get(n, p, "spike_time", s.spike_time);
  r.get(n, p, "perturbation", s.perturbation);
  r.get(n, p, "control", s.control);
  r.get(n, p, "probe_x", s.probe_x);
  r.get(n, p, "probe_regime", s.probe_regime);
  r.get(n, p, "anchor", s.anchor);
  const YAML::Node part = n["partition"];
  if (r.section(part, "solver.partition", {"count", "knots", "refine"})) {
    r.get(part, "solver.partition", "count", s.partition.count);
    r.get(part, "solver.partition", "knots", s.partition.knots);
    r.get(part, "solver.partition", "refine", s.partition.refine);
  }
}

void read_simulate(Reader& r, const YAML::Node& n, SimulateBlock& s) {
  const std::string p = "simulate";
  if (!r.section(n, p,
                 {"paths", "step", "x0", "regime", "t0", "control", "save_paths", "rate_points", "rate_dt",
                  "rate_paths"}))
    return;
  r.get(n, p, "paths", s.paths);
  r.get(n, p, "step", s.step);
  r.get(n, p, "x0", s.x0);
  r.get(n, p, "regime", s.regime);
  r.get(n, p, "t0", s.t0);
  r.get(n, p, "control", s.control);
  r.get(n, p, "save_paths", s.save_paths);
  r.get(n, p, "rate_points", s.rate_points);
  r.get(n, p, "rate_dt", s.rate_dt);
  r.get(n, p, "rate_paths", s.rate_paths);
}

void read_output(Reader& r, const YAML::Node& n, OutputBlock& o) {
  if (!r.section(n, "output", {"directory", "formats"})) return;
  r.get(n, "output", "directory", o.directory);
  r.get(n, "output", "formats", o.formats);
}

// ---------------------------------------------------------------------------------------------
// Semantic checks

int regime_count(const RunConfig& c) {
  if (c.model.preset == "merton") return static_cast<int>(c.model.merton.b.size());
  if (c.model.switching.preset == "custom") return static_cast<int>(c.model.switching.thresholds.size());
  return 2;
}

/// Evaluate at every corner; report parse errors, evaluation errors and non-finite values.
void check_expression(std::vector<std::string>& errors, const std::string& path, const std::string& text,
                      const std::vector<Bindings>& corners, bool positive = false) {
  Expression e;
  try {
    e = Expression::parse(text);
  } catch (const Error& err) {
    errors.push_back(path + ": " + err.what());
    return;
  }
  for (const Bindings& b : corners) {
    try {
      const double v = e.eval(b);
      if (!std::isfinite(v)) {
        errors.push_back(path + ": '" + text + "' is not finite at a domain corner");
        return;
      }
      if (positive && !(v > 0)) {
        errors.push_back(path + ": '" + text + "' must be positive on the domain");
        return;
      }
    } catch (const Error& err) {
      errors.push_back(path + ": " + err.what());
      return;
    }
  }
}

std::vector<Bindings> corners(const RunConfig& c, bool with_tau, bool with_s, bool with_x, bool with_u) {
  const double T = c.grid.horizon;
  std::vector<double> taus = with_tau ? std::vector<double>{0.0, T} : std::vector<double>{0.0};
  std::vector<double> ss = with_s ? std::vector<double>{0.0, T} : std::vector<double>{0.0};
  std::vector<double> xs = with_x ? std::vector<double>{c.grid.x_min, c.grid.x_max} : std::vector<double>{0.0};
  std::vector<double> us = with_u ? std::vector<double>{c.model.custom.control_lower, c.model.custom.control_upper}
                                  : std::vector<double>{0.0};
  std::vector<Bindings> out;
  for (double tau : taus)
    for (double s : ss) {
      if (with_tau && with_s && tau > s) continue;
      for (double x : xs)
        for (double u : us) {
          Bindings b;
          if (with_tau) b.set(Variable::Tau, tau);
          if (with_s) b.set(Variable::S, s).set(Variable::T, s);
          if (with_x) b.set(Variable::X, x);
          if (with_u) b.set(Variable::U, u);
          out.push_back(b);
        }
    }
  return out;
}

bool one_of(const std::string& v, std::initializer_list<const char*> options) {
  for (const char* o : options)
    if (v == o) return true;
  return false;
}

void check_merton(const RunConfig& c, std::vector<std::string>& e) {
  const MertonBlock& m = c.model.merton;
  const size_t n = m.b.size();
  if (n == 0) e.push_back("model.merton.b: at least one regime is required");
  if (m.sigma.size() != n) e.push_back("model.merton.sigma: length must match model.merton.b");
  for (double s : m.sigma)
    if (!(s > 0)) e.push_back("model.merton.sigma: volatilities must be positive");
  if (!(m.gamma > 0 && m.gamma < 1)) e.push_back("model.merton.gamma: must lie in (0, 1)");
  if (!(m.psi_clamp > 0)) e.push_back("model.merton.psi_clamp: must be positive");
  if (m.generator.size() != n) e.push_back("model.merton.generator: must be an m by m matrix");
  for (const auto& row : m.generator)
    if (row.size() != n) e.push_back("model.merton.generator: must be an m by m matrix");
  check_expression(e, "model.merton.g", m.g, corners(c, true, true, false, false), true);
  check_expression(e, "model.merton.h", m.h, corners(c, true, false, false, false), true);
  if (!(c.grid.x_min > 0)) e.push_back("grid.x_min: the merton preset needs a positive wealth domain");
}

void check_switching(const RunConfig& c, std::vector<std::string>& e) {
  const SwitchingBlock& s = c.model.switching;
  if (!one_of(s.preset, {"tanh", "affine", "constant", "empty", "custom"})) {
    e.push_back("model.switching.preset: unknown preset '" + s.preset + "'; did you mean '" +
                nearest_key(s.preset, {"tanh", "affine", "constant", "empty", "custom"}) + "'?");
    return;
  }
  if (s.preset != "custom") return;
  const size_t m = s.thresholds.size();
  if (m == 0) e.push_back("model.switching.thresholds: required for the custom preset");
  if (!(s.beta0 > 0)) e.push_back("model.switching.beta0: must be positive");
  const auto xs = corners(c, false, false, true, false);
  for (size_t i = 0; i < m; ++i) {
    if (s.thresholds[i].size() != m) e.push_back("model.switching.thresholds: must be an m by m table");
    for (size_t k = 0; k < s.thresholds[i].size(); ++k)
      check_expression(e, "model.switching.thresholds[" + std::to_string(i) + "][" + std::to_string(k) + "]",
                       s.thresholds[i][k], xs);
  }
  std::vector<Bindings> marks;
  for (double th : {-s.beta0, 0.0, s.beta0}) marks.push_back(Bindings().set(Variable::X, th));
  check_expression(e, "model.switching.density", s.density, marks);
}

void check_custom(const RunConfig& c, std::vector<std::string>& e) {
  const CustomBlock& cu = c.model.custom;
  const size_t m = static_cast<size_t>(regime_count(c));
  if (!(cu.control_lower < cu.control_upper)) e.push_back("model.custom: control_lower must be below control_upper");
  auto list = [&](const char* key, const std::vector<std::string>& exprs, const std::vector<Bindings>& pts, bool pos) {
    if (exprs.size() != m) {
      e.push_back(std::string("model.custom.") + key + ": needs one expression per regime (" + std::to_string(m) + ")");
      return;
    }
    for (size_t i = 0; i < m; ++i)
      check_expression(e, std::string("model.custom.") + key + "[" + std::to_string(i) + "]", exprs[i], pts, pos);
  };
  list("b", cu.b, corners(c, false, true, true, true), false);
  list("sigma", cu.sigma, corners(c, false, true, true, true), false);
  list("g", cu.g, corners(c, true, true, true, true), false);
  list("h", cu.h, corners(c, true, false, true, false), false);
}

}  // namespace

std::vector<std::string> validate(const RunConfig& c) {
  std::vector<std::string> e;
  if (c.workers < 1) e.push_back("workers: must be at least 1");

  const GridBlock& g = c.grid;
  if (!(g.x_min < g.x_max)) e.push_back("grid: x_min must be below x_max");
  if (g.n_x < 5) e.push_back("grid.n_x: at least 5 nodes are required");
  if (g.n_t < 2) e.push_back("grid.n_t: at least 2 time steps are required");
  if (!(g.horizon > 0)) e.push_back("grid.horizon: must be positive");
  if (g.buffer < 0 || 2 * g.buffer + 3 > g.n_x) e.push_back("grid.buffer: leaves no interior nodes");
  if (!one_of(g.boundary, {"auto", "extrapolate", "homogeneous"}))
    e.push_back("grid.boundary: expected auto, extrapolate or homogeneous");
  if (g.boundary == "homogeneous" && c.model.preset != "merton")
    e.push_back("grid.boundary: homogeneous edges apply to the merton preset only");

  const ModelBlock& mb = c.model;
  if (!one_of(mb.preset, {"merton", "quadratic", "custom"}))
    e.push_back("model.preset: unknown preset '" + mb.preset + "'; did you mean '" +
                nearest_key(mb.preset, {"merton", "quadratic", "custom"}) + "'?");
  if (!(mb.kappa >= 0)) e.push_back("model.kappa: must be nonnegative");
  if (mb.preset == "merton") check_merton(c, e);
  if (mb.preset != "merton") check_switching(c, e);
  if (mb.preset == "custom") check_custom(c, e);

  const SolverBlock& s = c.solver;
  if (!(s.tol > 0)) e.push_back("solver.tol: must be positive");
  if (s.max_sweeps < 1) e.push_back("solver.max_sweeps: must be at least 1");
  if (!(s.slab_width >= 0 && s.slab_width <= g.horizon)) e.push_back("solver.slab_width: must lie in [0, horizon]");
  if (s.partition.count < 1) e.push_back("solver.partition.count: must be at least 1");
  if (!s.partition.knots.empty()) {
    const auto& k = s.partition.knots;
    bool ok = k.size() >= 2 && k.front() == 0.0 && std::abs(k.back() - g.horizon) <= 1e-12 * g.horizon;
    for (size_t i = 1; i < k.size(); ++i) ok = ok && k[i] > k[i - 1];
    if (!ok) e.push_back("solver.partition.knots: must increase strictly from 0 to the horizon");
  }
  for (int n : s.partition.refine)
    if (n < 1) e.push_back("solver.partition.refine: block counts must be positive");
  if (s.epsilon.empty()) e.push_back("solver.epsilon: at least one spike length is required");
  for (double eps : s.epsilon)
    if (!(eps > 0 && eps <= 1)) e.push_back("solver.epsilon: fractions must lie in (0, 1]");
  if (!(s.spike_time >= 0 && s.spike_time < g.horizon)) e.push_back("solver.spike_time: must lie in [0, horizon)");
  if (!one_of(s.perturbation, {"constant", "anchor_optimal", "equilibrium"}))
    e.push_back("solver.perturbation: expected constant, anchor_optimal or equilibrium");
  if (!(s.anchor >= 0 && s.anchor < g.horizon)) e.push_back("solver.anchor: must lie in [0, horizon)");

  const int m = regime_count(c);
  if (s.probe_regime < 1 || s.probe_regime > m) e.push_back("solver.probe_regime: must lie in 1..m");
  const SimulateBlock& sim = c.simulate;
  if (sim.paths < 1) e.push_back("simulate.paths: must be positive");
  if (!(sim.step > 0)) e.push_back("simulate.step: must be positive");
  if (sim.regime < 1 || sim.regime > m) e.push_back("simulate.regime: must lie in 1..m");
  if (!(sim.t0 >= 0 && sim.t0 < g.horizon)) e.push_back("simulate.t0: must lie in [0, horizon)");
  if (sim.save_paths < 0) e.push_back("simulate.save_paths: must be nonnegative");
  if (!(sim.rate_dt > 0)) e.push_back("simulate.rate_dt: must be positive");
  if (sim.rate_paths < 1) e.push_back("simulate.rate_paths: must be positive");

  if (c.output.directory.empty()) e.push_back("output.directory: must not be empty");
  for (const auto& f : c.output.formats)
    if (!one_of(f, {"csv", "binary"})) e.push_back("output.formats: unknown format '" + f + "'");

  if (!e.empty()) return e;

  // Stability of the explicit coupling: dt * max |q_ii| < 1 on the grid.
  try {
    const BuiltModel built = build_model(c);
    const double dt = built.grids.time.max_step();
    double rate = 0.0;
    const Eigen::VectorXd xs = built.grids.space.nodes();
    for (Eigen::Index k = 0; k < xs.size(); ++k)
      if (built.model.generator) rate = std::max(rate, built.model.generator(xs[k]).diagonal().cwiseAbs().maxCoeff());
    if (dt * rate >= 1.0)
      e.push_back("grid.n_t: time step " + format_number(dt) + " times the largest exit rate " + format_number(rate) +
                  " must stay below 1");
  } catch (const Error& err) {
    e.push_back(std::string("model: ") + err.what());
  }
  return e;
}

RunConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& ex) {
    throw ConfigError(std::string("malformed configuration: ") + ex.what());
  }
  RunConfig c;
  Reader r;
  if (root && !root.IsNull()) {
    if (r.section(root, "", {"seed", "workers", "model", "grid", "solver", "simulate", "output"})) {
      r.get(root, "", "seed", c.seed);
      r.get(root, "", "workers", c.workers);
      read_model(r, root["model"], c.model);
      read_grid(r, root["grid"], c.grid);
      read_solver(r, root["solver"], c.solver);
      read_simulate(r, root["simulate"], c.simulate);
      read_output(r, root["output"], c.output);
    }
  }
  std::vector<std::string> errors = std::move(r.errors);
  if (errors.empty()) errors = validate(c);
  if (!errors.empty()) {
    std::string message = errors.size() == 1 ? "invalid configuration: " : "invalid configuration:";
    Error::Context context;
    for (const auto& v : errors) {
      message += errors.size() == 1 ? v : "\n  - " + v;
      context.emplace_back("violation", v);
    }
    throw ConfigError(message, std::move(context));
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read configuration file", {{"path", path}});
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

namespace {

struct Num {
  double v;
};
YAML::Emitter& operator<<(YAML::Emitter& out, Num n) { return out << format_number(n.v); }

void emit_numbers(YAML::Emitter& out, const std::vector<double>& v) {
  out << YAML::Flow << YAML::BeginSeq;
  for (double x : v) out << Num{x};
  out << YAML::EndSeq;
}

template <class T>
void emit_list(YAML::Emitter& out, const std::vector<T>& v) {
  out << YAML::Flow << YAML::BeginSeq;
  for (const auto& x : v) out << x;
  out << YAML::EndSeq;
}

}  // namespace

std::string emit_config(const RunConfig& c) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "seed" << YAML::Value << c.seed;
  out << YAML::Key << "workers" << YAML::Value << c.workers;

  out << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "preset" << YAML::Value << c.model.preset;
  out << YAML::Key << "kappa" << YAML::Value << Num{c.model.kappa};
  const MertonBlock& m = c.model.merton;
  out << YAML::Key << "merton" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "b" << YAML::Value;
  emit_numbers(out, m.b);
  out << YAML::Key << "sigma" << YAML::Value;
  emit_numbers(out, m.sigma);
  out << YAML::Key << "gamma" << YAML::Value << Num{m.gamma};
  out << YAML::Key << "g" << YAML::Value << YAML::DoubleQuoted << m.g;
  out << YAML::Key << "h" << YAML::Value << YAML::DoubleQuoted << m.h;
  out << YAML::Key << "generator" << YAML::Value << YAML::BeginSeq;
  for (const auto& row : m.generator) emit_numbers(out, row);
  out << YAML::EndSeq;
  out << YAML::Key << "psi_clamp" << YAML::Value << Num{m.psi_clamp};
  out << YAML::EndMap;
  const SwitchingBlock& s = c.model.switching;
  out << YAML::Key << "switching" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "preset" << YAML::Value << s.preset;
  out << YAML::Key << "beta0" << YAML::Value << Num{s.beta0};
  out << YAML::Key << "thresholds" << YAML::Value << YAML::BeginSeq;
  for (const auto& row : s.thresholds) {
    out << YAML::Flow << YAML::BeginSeq;
    for (const auto& x : row) out << YAML::DoubleQuoted << x;
    out << YAML::EndSeq;
  }
  out << YAML::EndSeq;
  out << YAML::Key << "density" << YAML::Value << YAML::DoubleQuoted << s.density;
  out << YAML::Key << "rate_bound" << YAML::Value << Num{s.rate_bound};
  out << YAML::EndMap;
  const CustomBlock& cu = c.model.custom;
  out << YAML::Key << "custom" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "control_lower" << YAML::Value << Num{cu.control_lower};
  out << YAML::Key << "control_upper" << YAML::Value << Num{cu.control_upper};
  for (const auto& [key, list] : {std::pair{"b", &cu.b}, {"sigma", &cu.sigma}, {"g", &cu.g}, {"h", &cu.h}}) {
    out << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (const auto& x : *list) out << YAML::DoubleQuoted << x;
    out << YAML::EndSeq;
  }
  out << YAML::Key << "lipschitz" << YAML::Value << Num{cu.lipschitz};
  out << YAML::Key << "ellipticity" << YAML::Value << Num{cu.ellipticity};
  out << YAML::EndMap;
  out << YAML::EndMap;

  const GridBlock& g = c.grid;
  out << YAML::Key << "grid" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "x_min" << YAML::Value << Num{g.x_min};
  out << YAML::Key << "x_max" << YAML::Value << Num{g.x_max};
  out << YAML::Key << "n_x" << YAML::Value << g.n_x;
  out << YAML::Key << "n_t" << YAML::Value << g.n_t;
  out << YAML::Key << "horizon" << YAML::Value << Num{g.horizon};
  out << YAML::Key << "buffer" << YAML::Value << g.buffer;
  out << YAML::Key << "boundary" << YAML::Value << g.boundary;
  out << YAML::EndMap;

  const SolverBlock& sv = c.solver;
  out << YAML::Key << "solver" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "tol" << YAML::Value << Num{sv.tol};
  out << YAML::Key << "max_sweeps" << YAML::Value << sv.max_sweeps;
  out << YAML::Key << "slab_width" << YAML::Value << Num{sv.slab_width};
  out << YAML::Key << "partition" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "count" << YAML::Value << sv.partition.count;
  out << YAML::Key << "knots" << YAML::Value;
  emit_numbers(out, sv.partition.knots);
  out << YAML::Key << "refine" << YAML::Value;
  emit_list(out, sv.partition.refine);
  out << YAML::EndMap;
  out << YAML::Key << "epsilon" << YAML::Value;
  emit_numbers(out, sv.epsilon);
  out << YAML::Key << "spike_time" << YAML::Value << Num{sv.spike_time};
  out << YAML::Key << "perturbation" << YAML::Value << sv.perturbation;
  out << YAML::Key << "control" << YAML::Value;
  emit_numbers(out, sv.control);
  out << YAML::Key << "probe_x" << YAML::Value << Num{sv.probe_x};
  out << YAML::Key << "probe_regime" << YAML::Value << sv.probe_regime;
  out << YAML::Key << "anchor" << YAML::Value << Num{sv.anchor};
  out << YAML::EndMap;

  const SimulateBlock& sim = c.simulate;
  out << YAML::Key << "simulate" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "paths" << YAML::Value << sim.paths;
  out << YAML::Key << "step" << YAML::Value << Num{sim.step};
  out << YAML::Key << "x0" << YAML::Value << Num{sim.x0};
  out << YAML::Key << "regime" << YAML::Value << sim.regime;
  out << YAML::Key << "t0" << YAML::Value << Num{sim.t0};
  out << YAML::Key << "control" << YAML::Value;
  emit_numbers(out, sim.control);
  out << YAML::Key << "save_paths" << YAML::Value << sim.save_paths;
  out << YAML::Key << "rate_points" << YAML::Value;
  emit_numbers(out, sim.rate_points);
  out << YAML::Key << "rate_dt" << YAML::Value << Num{sim.rate_dt};
  out << YAML::Key << "rate_paths" << YAML::Value << sim.rate_paths;
  out << YAML::EndMap;

  out << YAML::Key << "output" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "directory" << YAML::Value << YAML::DoubleQuoted << c.output.directory;
  out << YAML::Key << "formats" << YAML::Value;
  emit_list(out, c.output.formats);
  out << YAML::EndMap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

void apply_environment(RunConfig& config) {
  if (const char* dir = std::getenv("RSCTL_OUTPUT_DIR"); dir && *dir) config.output.directory = dir;
  if (const char* w = std::getenv("RSCTL_WORKERS"); w && *w) {
    char* end = nullptr;
    const long n = std::strtol(w, &end, 10);
    if (*end != '\0' || n < 1 || n > 1024) throw ConfigError("RSCTL_WORKERS must be a positive integer", {{"value", w}});
    config.workers = static_cast<int>(n);
  }
}

// ---------------------------------------------------------------------------------------------
// Building

namespace {

ScalarFunction x_function(const std::string& text) {
  const Expression e = Expression::parse(text);
  return [e](double x) { return e.eval(Bindings().set(Variable::X, x)); };
}

Model custom_model(const RunConfig& c, const SwitchingMechanism& switching) {
  const CustomBlock& cu = c.model.custom;
  const int m = switching.geometry.regimes();
  auto compile = [](const std::vector<std::string>& texts) {
    std::vector<Expression> out;
    for (const auto& t : texts) out.push_back(Expression::parse(t));
    return out;
  };
  const auto b = compile(cu.b), sigma = compile(cu.sigma), g = compile(cu.g), h = compile(cu.h);
  Model model;
  model.regimes = m;
  model.horizon = c.grid.horizon;
  model.dynamics.drift = [b](double s, double x, int i, const Control& u) {
    return b[static_cast<size_t>(i)].eval(
        Bindings().set(Variable::S, s).set(Variable::T, s).set(Variable::X, x).set(Variable::U, u[0]));
  };
  model.dynamics.diffusion = [sigma](double s, double x, int i, const Control& u) {
    return sigma[static_cast<size_t>(i)].eval(
        Bindings().set(Variable::S, s).set(Variable::T, s).set(Variable::X, x).set(Variable::U, u[0]));
  };
  model.dynamics.controls = ControlSet::interval(cu.control_lower, cu.control_upper);
  model.dynamics.anchor_control = scalar_control(std::clamp(0.0, cu.control_lower, cu.control_upper));
  model.dynamics.lipschitz = cu.lipschitz;
  model.running = [g](double tau, double s, double x, int i, double, double, double, const Control& u) {
    return g[static_cast<size_t>(i)].eval(Bindings()
                                              .set(Variable::Tau, tau)
                                              .set(Variable::S, s)
                                              .set(Variable::T, s)
                                              .set(Variable::X, x)
                                              .set(Variable::U, u[0]));
  };
  model.terminal = [h](double tau, double x, int i) {
    return h[static_cast<size_t>(i)].eval(Bindings().set(Variable::Tau, tau).set(Variable::X, x));
  };
  model.generator = switching.generator();
  model.switching = switching;
  model.ellipticity = cu.ellipticity;
  return model;
}

}  // namespace

SwitchingMechanism build_switching(const RunConfig& c) {
  if (c.model.preset == "merton") {
    const auto& rows = c.model.merton.generator;
    Eigen::MatrixXd q(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
    for (size_t i = 0; i < rows.size(); ++i)
      for (size_t j = 0; j < rows.size(); ++j) q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return mechanism_for_constant_generator(q);
  }
  const SwitchingBlock& s = c.model.switching;
  if (s.preset != "custom") return switching_preset(s.preset, c.grid.x_min, c.grid.x_max);
  std::vector<std::vector<ScalarFunction>> rows;
  for (const auto& row : s.thresholds) {
    rows.emplace_back();
    for (const auto& t : row) rows.back().push_back(x_function(t));
  }
  const int m = static_cast<int>(rows.size());
  RegimeGeometry geometry(m, s.beta0, std::move(rows), c.grid.x_min, c.grid.x_max);
  return {std::move(geometry), LevyMeasure(s.beta0, x_function(s.density), s.rate_bound)};
}

BuiltModel build_model(const RunConfig& c) {
  BuiltModel out;
  const GridBlock& g = c.grid;
  out.grids.time = TimeGrid::uniform(0.0, g.horizon, g.n_t);
  if (c.model.preset == "merton") {
    const MertonBlock& mb = c.model.merton;
    MertonSpec spec;
    spec.drift = mb.b;
    spec.volatility = mb.sigma;
    spec.gamma = mb.gamma;
    const Expression ge = Expression::parse(mb.g), he = Expression::parse(mb.h);
    spec.consumption_weight = [ge](double tau, double s) {
      return ge.eval(Bindings().set(Variable::Tau, tau).set(Variable::S, s).set(Variable::T, s));
    };
    spec.bequest_weight = [he](double tau) { return he.eval(Bindings().set(Variable::Tau, tau)); };
    const Eigen::Index m = static_cast<Eigen::Index>(mb.generator.size());
    spec.generator.resize(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < m; ++j) spec.generator(i, j) = mb.generator[static_cast<size_t>(i)][static_cast<size_t>(j)];
    spec.horizon = g.horizon;
    spec.validate();
    out.model = merton_model(spec, mb.psi_clamp);
    out.grids.space = merton_grid(spec, g.x_min, g.x_max, g.n_x, g.buffer);
    if (g.boundary == "extrapolate") {
      out.grids.space.left = BoundaryCondition::extrapolate();
      out.grids.space.right = BoundaryCondition::extrapolate();
    }
    out.merton = std::move(spec);
    return out;
  }
  const SwitchingMechanism switching = build_switching(c);
  out.model = c.model.preset == "quadratic" ? quadratic_model(switching, c.model.kappa, g.horizon)
                                            : custom_model(c, switching);
  out.grids.space = SpatialGrid(g.x_min, g.x_max, g.n_x, g.buffer);
  return out;
}

}  // namespace rsctl::cli

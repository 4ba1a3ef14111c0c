#pragma once

// Run configuration: YAML text with sections seed, workers, model, grid, solver, simulate,
// output. Every field has a default, so a minimal file only names what it changes.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rsctl/merton.hpp"
#include "rsctl/model.hpp"
#include "rsctl/partition_game.hpp"

namespace rsctl::cli {

struct MertonBlock {
  std::vector<double> b{0.05, 0.02};
  std::vector<double> sigma{0.25, 0.3};
  double gamma = 0.5;
  std::string g = "1/(1 + (s - tau))";  ///< consumption weight, variables tau and s
  std::string h = "1";                  ///< bequest weight, variable tau
  std::vector<std::vector<double>> generator{{-0.5, 0.5}, {0.3, -0.3}};
  double psi_clamp = 1e-8;
  bool operator==(const MertonBlock&) const = default;
};

struct SwitchingBlock {
  std::string preset = "tanh";  ///< tanh | affine | constant | empty | custom
  double beta0 = 1.0;
  /// custom only: row i lists beta_{i1}..beta_{im} as expressions in x
  std::vector<std::vector<std::string>> thresholds;
  std::string density = "0.5";  ///< custom only: mark density on [-beta0, beta0]
  double rate_bound = 1.0;
  bool operator==(const SwitchingBlock&) const = default;
};

struct CustomBlock {
  double control_lower = -1.0;
  double control_upper = 1.0;
  std::vector<std::string> b;      ///< per regime, variables s, x, u
  std::vector<std::string> sigma;  ///< per regime, variables s, x, u
  std::vector<std::string> g;      ///< per regime, variables tau, s, x, u
  std::vector<std::string> h;      ///< per regime, variables tau, x
  double lipschitz = 10.0;
  double ellipticity = 0.0;
  bool operator==(const CustomBlock&) const = default;
};

struct ModelBlock {
  std::string preset = "merton";  ///< merton | quadratic | custom
  double kappa = 1.0;             ///< anchor weight of the quadratic preset
  MertonBlock merton;
  SwitchingBlock switching;
  CustomBlock custom;
  bool operator==(const ModelBlock&) const = default;
};

struct GridBlock {
  double x_min = 0.25;
  double x_max = 2.25;
  int n_x = 201;
  int n_t = 320;
  double horizon = 1.0;
  int buffer = 20;
  std::string boundary = "auto";  ///< auto | extrapolate | homogeneous
  bool operator==(const GridBlock&) const = default;
};

struct PartitionBlock {
  int count = 8;
  std::vector<double> knots;  ///< overrides count when non-empty
  std::vector<int> refine;    ///< block counts for a convergence table
  bool operator==(const PartitionBlock&) const = default;
};

struct SolverBlock {
  double tol = 1e-8;
  int max_sweeps = 60;
  double slab_width = 0.0;  ///< 0 means horizon / 8
  PartitionBlock partition;
  std::vector<double> epsilon{0.1, 0.05, 0.025};  ///< spike lengths as fractions of the horizon
  double spike_time = 0.5;
  std::string perturbation = "constant";  ///< constant | anchor_optimal | equilibrium
  std::vector<double> control;  ///< constant perturbation; empty means the equilibrium control at probe
  double probe_x = 0.75;
  int probe_regime = 1;
  double anchor = 0.0;  ///< anchor of the pre-committed Merton variant
  bool operator==(const SolverBlock&) const = default;
};

struct SimulateBlock {
  long paths = 1000;
  double step = 1e-3;
  double x0 = 1.0;
  int regime = 1;
  double t0 = 0.0;
  std::vector<double> control;  ///< constant control; empty means the model's anchor control
  int save_paths = 10;
  std::vector<double> rate_points{-1.0, 0.0, 1.0};
  double rate_dt = 1e-3;
  long rate_paths = 100000;
  bool operator==(const SimulateBlock&) const = default;
};

struct OutputBlock {
  std::string directory = "rsctl-out";
  std::vector<std::string> formats{"csv", "binary"};
  bool operator==(const OutputBlock&) const = default;
};

struct RunConfig {
  std::uint64_t seed = 1;
  int workers = 1;
  ModelBlock model;
  GridBlock grid;
  SolverBlock solver;
  SimulateBlock simulate;
  OutputBlock output;
  bool operator==(const RunConfig&) const = default;
};

/// Parse and validate; throws ConfigError listing every violation with its key path.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
/// Full YAML rendering (every field); parse_config(emit_config(c)) == c.
std::string emit_config(const RunConfig& config);

/// RSCTL_OUTPUT_DIR and RSCTL_WORKERS override the file values.
void apply_environment(RunConfig& config);

/// Check semantic constraints (expressions, grid stability, ranges); returns every violation.
std::vector<std::string> validate(const RunConfig& config);

std::size_t edit_distance(const std::string& a, const std::string& b);
/// Closest candidate by edit distance (first one on ties).
std::string nearest_key(const std::string& key, const std::vector<std::string>& candidates);

/// Model, grids and (for the Merton preset) the market description built from a config.
struct BuiltModel {
  Model model;
  SolverGrids grids;
  std::optional<MertonSpec> merton;
};

BuiltModel build_model(const RunConfig& config);
SwitchingMechanism build_switching(const RunConfig& config);

}  // namespace rsctl::cli

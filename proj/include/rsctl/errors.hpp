#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rsctl {

/// Error categories; the CLI maps them to exit codes.
enum class ErrorKind {
  Config,          ///< invalid configuration or unsatisfied precondition
  Domain,          ///< query outside the declared domain
  Numeric,         ///< quadrature, linear solve or positivity failure
  Geometry,        ///< threshold chain ordering violated
  Simulation,      ///< non-finite state during path simulation
  Resolution,      ///< requested scale below grid resolution
  NonConvergence,  ///< fixed point did not reach tolerance
};

const char* to_string(ErrorKind kind);

/// Base error: a category, a message and optional key/value context.
class Error : public std::runtime_error {
 public:
  using Context = std::vector<std::pair<std::string, std::string>>;

  Error(ErrorKind kind, const std::string& message, Context context = {})
      : std::runtime_error(message), kind_(kind), context_(std::move(context)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const Context& context() const noexcept { return context_; }
  void add_context(std::string key, std::string value) {
    context_.emplace_back(std::move(key), std::move(value));
  }

 private:
  ErrorKind kind_;
  Context context_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& m, Context c = {}) : Error(ErrorKind::Config, m, std::move(c)) {}
};
struct DomainError : Error {
  explicit DomainError(const std::string& m, Context c = {}) : Error(ErrorKind::Domain, m, std::move(c)) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& m, Context c = {}) : Error(ErrorKind::Numeric, m, std::move(c)) {}
};
struct GeometryError : Error {
  explicit GeometryError(const std::string& m, Context c = {}) : Error(ErrorKind::Geometry, m, std::move(c)) {}
};
struct SimulationError : Error {
  explicit SimulationError(const std::string& m, Context c = {}) : Error(ErrorKind::Simulation, m, std::move(c)) {}
};
struct ResolutionError : Error {
  explicit ResolutionError(const std::string& m, Context c = {}) : Error(ErrorKind::Resolution, m, std::move(c)) {}
};

/// Fixed-point failure; carries the sup-norm change recorded at each sweep.
struct NonConvergenceError : Error {
  NonConvergenceError(const std::string& m, std::vector<double> history, Context c = {})
      : Error(ErrorKind::NonConvergence, m, std::move(c)), history(std::move(history)) {}
  std::vector<double> history;
};

/// Non-fatal condition recorded by a solver (clamp firing, truncated search).
struct Warning {
  std::string code;
  std::string message;
  long count = 1;
};

/// Merge a warning into a list, accumulating counts for repeated codes.
void add_warning(std::vector<Warning>& list, const std::string& code, const std::string& message, long count = 1);

}  // namespace rsctl

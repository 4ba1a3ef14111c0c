#pragma once

// Subcommand dispatch: every run writes its artifacts plus manifest.json (SHA-256 per file)
// into the configured output directory and prints a one-line JSON summary.

#include <iosfwd>
#include <string>
#include <vector>

#include "rsctl/cli/config.hpp"
#include "rsctl/errors.hpp"

namespace rsctl::cli {

struct RunOptions {
  bool dry_run = false;
  std::string variant = "eq";  ///< merton subcommand: tc | pre | eq
};

const std::vector<std::string>& subcommands();

/// Returns the process exit status: 0 success, 2 configuration, 3 numeric/domain, 4 non-convergence.
int run(const std::string& subcommand, const RunConfig& config, const RunOptions& options, std::ostream& out,
        std::ostream& err);

int exit_code(ErrorKind kind);
/// {"error": {"kind", "message", "exit_code", "context", ["history"]}} on one line.
std::string error_json(const Error& error);

/// Hex SHA-256 of a byte string.
std::string sha256_hex(const std::string& bytes);

}  // namespace rsctl::cli

// Command-line entry point: rsctl <subcommand> --config FILE [options].

#include <CLI11.hpp>

#include <iostream>

#include "rsctl/cli/config.hpp"
#include "rsctl/cli/run.hpp"

int main(int argc, char** argv) {
  using namespace rsctl::cli;
  CLI::App app{"Regime-switching stochastic control solvers"};
  app.require_subcommand(1);

  std::string config_path, output_dir, variant = "eq";
  bool dry_run = false;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;

  for (const auto& name : subcommands()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("-c,--config", config_path, "YAML configuration file")->required()->check(CLI::ExistingFile);
    sub->add_flag("--dry-run", dry_run, "validate the configuration and print the plan");
    sub->add_option("-o,--output", output_dir, "output directory (overrides config and environment)");
    sub->add_option("--seed", seed, "random seed override");
    sub->add_option("--workers", workers, "worker threads override");
    if (name == "merton")
      sub->add_option("--variant", variant, "tc, pre or eq")->check(CLI::IsMember({"tc", "pre", "eq"}));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  const std::string subcommand = app.get_subcommands().front()->get_name();

  RunConfig config;
  try {
    config = load_config(config_path);
    apply_environment(config);
    if (!output_dir.empty()) config.output.directory = output_dir;
    if (seed) config.seed = *seed;
    if (workers) {
      if (*workers < 1) throw rsctl::ConfigError("--workers must be positive");
      config.workers = *workers;
    }
  } catch (const rsctl::Error& e) {
    std::cerr << error_json(e) << '\n';
    std::cout << R"({"status":"error","subcommand":")" << subcommand << R"(","kind":"config","exit_code":2})" << '\n';
    return exit_code(e.kind());
  }
  RunOptions options;
  options.dry_run = dry_run;
  options.variant = variant;
  return run(subcommand, config, options, std::cout, std::cerr);
}

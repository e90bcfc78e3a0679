#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "demi/cli.hpp"

int main(int argc, char** argv) {
  using namespace demi::cli;
  CLI::App app{"Principal demi-eigenvalues of degenerate fully nonlinear elliptic operators"};
  app.set_version_flag("--version", std::string(version));
  app.require_subcommand(1);

  std::string config;
  RunOptions opts;
  std::uint64_t seed = 0;
  const char* names[] = {"solve", "eigen", "bounds", "verify", "oracle1d", "convergence"};
  const char* help[] = {"Dirichlet solve G_h[u] + lambda |u|^alpha u = f",
                        "Discrete principal demi-eigenvalue by bisection",
                        "Lower and upper eigenvalue certificates",
                        "Discrete maximum, comparison and boundary principle checks",
                        "One-dimensional shooting and Rayleigh oracles",
                        "Grid-refinement study with observed orders"};
  for (int i = 0; i < 6; ++i) {
    CLI::App* sub = app.add_subcommand(names[i], help[i]);
    sub->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", opts.out_dir, "Output directory")->capture_default_str();
    sub->add_option("--threads", opts.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--seed", seed, "Seed overriding the config seed");
    sub->add_flag("--quiet", opts.quiet, "Only report errors");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return validation_error;
  }

  CLI::App* sub = app.get_subcommands().front();
  if (sub->count("--seed")) opts.seed = seed;
  return run(command_from_string(sub->get_name()), config, opts, std::cerr);
}

#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "demi/bounds.hpp"
#include "demi/dirichlet_solver.hpp"
#include "demi/discretization.hpp"
#include "demi/domain_grid.hpp"
#include "demi/eigen.hpp"
#include "demi/operator_core.hpp"

namespace demi::cli {

using json = nlohmann::json;

inline constexpr const char* version = "1.0.0";

enum class Command { solve, eigen, bounds, verify, oracle1d, convergence };

std::string to_string(Command c);
Command command_from_string(const std::string& s);

enum ExitCode : int { ok = 0, validation_error = 2, not_converged = 3, check_failed = 4, internal_error = 1 };

struct SolveBlock {
  double lambda = 0.0;
  Field f = Field::constant(-1.0);
  Field g = Field::constant(0.0);
  std::string method = "pseudo_time";  // or "induction"
  std::optional<Field> exact;          // reference solution for error reports
};

struct EigenBlock {
  EigenOptions options;
  std::string which = "bar";  // bar, underline or both
};

struct BoundsBlock {
  std::vector<std::string> witnesses{"strip", "ball"};  // strip, ball, eigenfunction, rayleigh
  RayleighOptions rayleigh;
  bool check_sandwich = true;
};

struct VerifyBlock {
  std::vector<std::string> principles{"max_principle", "sharpness", "comparison", "eigenfunction", "barriers",
                                      "induction"};
  int trials = 20;
  int comparison_trials = 50;
  double tau_offset = 0.5;
  double kappa = 0.0;
  std::vector<std::string> barriers{"log_collar", "hopf_exp", "distance_power"};
  double barrier_factor = 1.5;
  double holder_gamma = 0.9;
  double holder_bound = 0.0;  // 0: only require the moduli to stay finite across levels
  std::vector<double> h_levels;  // eigenfunction levels; empty uses grid.h
  double collar = 0.0;
  int induction_max_outer = 200;
};

struct Oracle1dBlock {
  double lambda_min = 0.0;
  double lambda_max = 100.0;
  double tol = 1e-10;
  bool rayleigh = true;
  RayleighOptions rayleigh_options;
  int scan_points = 0;
  double scan_lo = 0.0;
  double scan_hi = 0.0;
};

struct ConvergenceBlock {
  std::string quantity = "eigen";  // eigen or solve
  std::optional<double> reference;
  bool shooting_reference = false;
  double fallback_order = 2.0;
};

/// Parsed experiment configuration. `resolved` is the configuration with
/// every default filled in, as embedded in result documents.
struct ExperimentConfig {
  json resolved;
  std::string base_dir;
  Domain domain = Domain::interval(-1.0, 1.0);
  double h = 0.0;
  std::vector<double> h_list;
  GridOptions grid;
  OperatorSpec op;
  DiscretizationOptions disc;
  SolveOptions solver;
  SolveBlock solve;
  EigenBlock eigen;
  BoundsBlock bounds;
  VerifyBlock verify;
  Oracle1dBlock oracle1d;
  ConvergenceBlock convergence;
  std::uint64_t seed = 1;
};

/// Throws ConfigError naming the offending field.
ExperimentConfig parse_config(const json& j, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);

struct RunOptions {
  std::string out_dir = "out";
  int threads = 1;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  bool write_files = true;
};

/// In-memory outcome of a command: the result document, the timing sidecar
/// and CSV artifacts keyed by file name.
struct RunOutput {
  int exit_code = ok;
  json result;
  json timing;
  std::map<std::string, std::string> csv;
};

/// Runs a parsed command. Module errors propagate.
RunOutput execute(Command command, const ExperimentConfig& config, const RunOptions& options);

/// Loads, runs and writes outputs; maps errors to exit codes with a message
/// on `err`.
int run(Command command, const std::string& config_path, const RunOptions& options, std::ostream& err);

/// Exit code for a module exception.
int exit_code_for(const std::exception& e);

/// Result document as written: sorted keys, two-space indent.
std::string dump(const json& j);

}  // namespace demi::cli

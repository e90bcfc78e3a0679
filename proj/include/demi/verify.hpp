#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "demi/dirichlet_solver.hpp"
#include "demi/discretization.hpp"
#include "demi/domain_grid.hpp"

namespace demi {

/// Outcome of one discrete principle check. A check whose premises fail is
/// never reported as passed, although the conclusion is still measured.
struct PrincipleReport {
  std::string name;
  bool passed = false;
  bool hypotheses_met = true;
  std::vector<std::string> failed_premises;
  double worst_violation = 0.0;
  double tolerance = 0.0;
  Index witness_index = -1;
  Point witness = Point::Zero();
  std::map<std::string, double> params;

  /// Sets `passed` from the premises and the violation.
  void finalize() { passed = hypotheses_met && failed_premises.empty() && worst_violation <= tolerance; }
  void premise(bool ok, const std::string& what);
};

/// Residual slack used by sub/supersolution tests: 1e-6 times the scale of
/// the terms involved.
constexpr double residual_slack_rel = 1e-6;

/// Boundary ratio checks require min ratio >= ratio_floor * max ratio over
/// the collar. Functions vanishing faster than linearly fail at resolution.
constexpr double ratio_floor = 0.25;

/// Discrete comparison with β(s) = kappa |s|^alpha s: sub satisfies
/// G_h - β >= g, super satisfies G_h - β <= f, super > 0, f <= g (f < g when
/// β is not increasing) and sub <= super on the boundary.
PrincipleReport check_comparison(const DiscreteOperator& op, const GridFunction& sub, const GridFunction& super,
                                 const GridFunction& f, const GridFunction& g, double kappa = 0.0);

/// u a subsolution of G_h + τ|u|^α u >= 0 with u <= 0 on the boundary and
/// τ < lambda_bar_h. Passes when max interior u <= tol.
PrincipleReport check_max_principle(const DiscreteOperator& op, double tau, const GridFunction& u,
                                    double lambda_bar_h);

/// u >= 0 a supersolution of G_h + λ|u|^α u <= 0. Passes when u vanishes or
/// is positive on every interior node with d >= collar.
PrincipleReport check_strong_min(const DiscreteOperator& op, const GridFunction& u, double lambda = 0.0,
                                 double collar = 0.0);

/// C_lo = min over collar nodes of u/d. collar <= 0 selects the grid default.
PrincipleReport hopf_ratio(const GridFunction& u, double collar = 0.0);

/// C3 = max over collar nodes of u/d for a subsolution of G_h >= -m
/// (no zero-order term) vanishing on the boundary.
PrincipleReport boundary_upper(const DiscreteOperator& op, const GridFunction& u, double m, double collar = 0.0);

/// Combines single-level boundary_upper reports ordered from coarse to fine:
/// C3 must not grow by 10% or more per refinement.
PrincipleReport boundary_upper_refinement(const std::vector<PrincipleReport>& levels);

/// Largest γ with v >= γ (d + C1 d²/2) on the collar for a positive
/// supersolution of G_h + λ|v|^α v <= 0.
PrincipleReport boundary_lower_quadratic(const DiscreteOperator& op, const GridFunction& v, double lambda = 0.0,
                                         double collar = 0.0);

enum class Barrier { log_collar, hopf_exp, distance_power };

std::string to_string(Barrier b);
Barrier barrier_from_string(const std::string& s);

/// Parameter names by barrier:
///   log_collar      C2, delta, gamma
///   hopf_exp        k, R, cx, cy, m
///   distance_power  k, gamma
using BarrierParams = std::map<std::string, double>;

/// Smallest admissible value of the guarded parameter (C2 or k).
double barrier_threshold(Barrier kind, const DiscreteOperator& op, const BarrierParams& params = {});

/// Complete parameter set with the guarded parameter at factor * threshold.
BarrierParams default_barrier_params(Barrier kind, const DiscreteOperator& op, double factor = 1.5);

/// Evaluates the closed-form barrier with exact derivatives on the nodes of
/// its region and checks the differential inequality there. Throws
/// ParameterTooSmall when the parameter inequality fails.
PrincipleReport verify_barrier(Barrier kind, const BarrierParams& params, const DiscreteOperator& op);

struct ModulusOptions {
  std::size_t max_pairs = 1000000;
  std::uint64_t seed = 7;
};

/// max |u(x)-u(y)| / |x-y|^gamma over active node pairs, 0 < gamma < 1.
double holder_modulus(const GridFunction& u, double gamma, const ModulusOptions& opts = {});

/// Same with gamma = 1 over interior nodes with d >= interior_margin.
double lipschitz_modulus(const GridFunction& u, double interior_margin, const ModulusOptions& opts = {});

struct SuiteReport {
  std::string name;
  bool passed = false;
  int trials = 0;
  int failures = 0;
  double worst_violation = 0.0;
  std::vector<PrincipleReport> reports;
};

/// Sum of three Gaussian bumps with random centres, widths and amplitudes in
/// [0, amplitude]; nonnegative on every node.
GridFunction random_bumps(const GridPtr& grid, std::mt19937_64& rng, double amplitude = 1.0);

/// Randomized subsolutions u = -v with v solving the flipped problem
/// G~_h[v] + τ|v|^α v = -f, f >= 0 random bumps (trial 0 uses f = 0).
/// Construction needs τ below the demi-eigenvalue of negative solutions.
SuiteReport max_principle_suite(const DiscreteOperator& op, double lambda_bar_h, double tau, int trials,
                                std::uint64_t seed, const SolveOptions& opts = {});

/// Pairs f1 <= 0 and f2 = f1 - bumps - 0.05; solutions of
/// G_h - κ|u|^α u = f1 (sub) and = f2 (super) must be ordered.
SuiteReport comparison_suite(const DiscreteOperator& op, int trials, std::uint64_t seed, double kappa = 0.0,
                             const SolveOptions& opts = {});

}  // namespace demi

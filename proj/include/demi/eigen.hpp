#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "demi/bounds.hpp"
#include "demi/dirichlet_solver.hpp"
#include "demi/discretization.hpp"

namespace demi {

struct EigenOptions {
  double lambda_lo = std::numeric_limits<double>::quiet_NaN();  // NaN: seed from certificates
  double lambda_hi = std::numeric_limits<double>::quiet_NaN();
  double lambda_tol = 0.0;  // 0 selects 1e-4 * initial bracket width
  int max_bisections = 200;
  bool eigenfunction = true;
  int polish_iterations = 50;  // inverse power steps applied to the eigenfunction
  SolveOptions solve;
};

struct BisectionTrial {
  double lambda = 0.0;
  bool below = false;  // induction stayed bounded
  SolveStatus status = SolveStatus::not_converged;
  int outer_iterations = 0;
  double growth_ratio = 0.0;
};

struct EigenResult {
  double lambda_lo = 0.0;
  double lambda_hi = 0.0;
  double lambda_tol = 0.0;
  GridFunction eigenfunction;
  double eigen_residual = 0.0;  // sup |G_h[w] + λ_mid |w|^α w|
  double probe_lambda = 0.0;
  double lambda_power = std::numeric_limits<double>::quiet_NaN();  // from the polish steps
  int polish_iterations = 0;
  Certificate lower_certificate;
  Certificate upper_certificate;
  std::vector<BisectionTrial> trials;

  double lambda_mid() const { return 0.5 * (lambda_lo + lambda_hi); }
};

/// One bisection probe: monotone induction with f = -1 at λ. An unresolved
/// run is repeated with Aitken acceleration and a budget grown by
/// probe_budget_growth, at most probe_budget_retries times; only then does
/// the last growth ratio decide.
constexpr int probe_budget_growth = 4;
constexpr int probe_budget_retries = 2;

BisectionTrial probe_lambda(const DiscreteOperator& op, double lambda, const SolveOptions& opts,
                            LinearWorkspace* workspace = nullptr);

EigenResult lambda_bar(const DiscreteOperator& op, const EigenOptions& opts = {});

struct EigenfunctionResult {
  GridFunction w;
  double residual = 0.0;  // sup |G_h[w] + λ_mid |w|^α w|
  double lambda_power = std::numeric_limits<double>::quiet_NaN();
  int polish_iterations = 0;
};

/// Solves with f = -1 at the probe, normalizes w = u / sup|u| and polishes
/// w by up to `polish` inverse power steps G_h[u] = -|w|^α w, which also
/// yield the estimate lambda_power = (sup u)^-(1+α).
EigenfunctionResult eigenfunction_at(const DiscreteOperator& op, double lambda_probe, double lambda_mid,
                                     const SolveOptions& opts = {}, LinearWorkspace* workspace = nullptr,
                                     int polish = 50);

/// lambda_bar of the flipped operator.
EigenResult lambda_underline(const DiscreteOperator& op, const EigenOptions& opts = {});

struct ScalingReport {
  double t = 1.0;
  double lambda_base = 0.0;
  double lambda_scaled = 0.0;
  double ratio = 0.0;     // lambda_scaled / lambda_base
  double expected = 0.0;  // t^-(2+alpha)
  double rel_error = 0.0;
};

/// λ̄ on Ω with mesh h and on tΩ with mesh t h. Requires b = c = 0 and an
/// x-independent principal part.
ScalingReport scaling_check(const OperatorSpec& spec, const Domain& domain, double h, double t,
                            const EigenOptions& opts = {}, const DiscretizationOptions& disc = {},
                            const GridOptions& grid_opts = {});

struct RichardsonReport {
  std::vector<double> h;
  std::vector<double> values;
  double order = 0.0;  // observed order from the last three levels
  double extrapolate = 0.0;
  bool order_estimated = true;  // false when the fallback order was used
};

/// Extrapolates values at h_0 > h_1 > ... (at least two levels). With three
/// or more levels the order is estimated from the last three; otherwise, or
/// when the estimate is not usable, `fallback_order` is used.
RichardsonReport richardson(const std::vector<double>& h, const std::vector<double>& values, double fallback_order);

}  // namespace demi

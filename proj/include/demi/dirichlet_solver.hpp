#pragma once

#include <memory>
#include <string>
#include <vector>

#include "demi/discretization.hpp"
#include "demi/domain_grid.hpp"

namespace demi {

/// semi_implicit: frozen-coefficient linear solve per step with adaptive
///   pseudo-time step (dt = inf is a Picard/Howard step).
/// explicit_euler: u += dt * residual with dt from cfl_dt.
enum class StepScheme { semi_implicit, explicit_euler };

struct SolveOptions {
  int max_steps = 100000;
  double tol_residual = 1e-8;  // relative to max(1, sup|f|)
  double blowup_cap = 0.0;     // 0 selects 1e6 (1 + sup|f|)^(1/(1+alpha))
  StepScheme scheme = StepScheme::semi_implicit;
  bool newton = true;  // damped Newton steps when alpha != 0 (semi_implicit only)
  int verbosity = 0;

  // Outer induction.
  int max_outer = 200;
  double tol_outer = 1e-8;     // relative to max(1, sup|u|)
  bool classify_early = true;  // stop once the growth ratio has settled
  bool accelerate = false;     // Aitken extrapolation of the geometric tail
};

enum class SolveStatus { converged, blew_up, projected_bounded, projected_blow_up, not_converged };

std::string to_string(SolveStatus s);

struct SolveReport {
  SolveStatus status = SolveStatus::not_converged;
  bool converged = false;
  bool blew_up = false;
  int steps = 0;           // inner steps, summed over outer iterations
  int outer_iterations = 0;
  double residual = 0.0;   // fresh sup-norm residual of the returned iterate
  double growth_ratio = 0.0;
  bool monotone = true;    // iterates nondecreasing (induction only)
  double monotone_violation = 0.0;
  int factorizations = 0;
  std::vector<double> residual_history;
  std::vector<double> dt_history;
  std::vector<double> sup_history;
  std::vector<double> increment_history;
  double wall_time = 0.0;  // seconds
  std::string message;
};

struct SolveResult {
  GridFunction u;
  SolveReport report;

  /// The iterate when converged; throws BlowUp or NotConverged otherwise.
  const GridFunction& value() const;
};

/// Sparse factorization state shared by consecutive solves on one operator.
/// The symbolic analysis is done once; a numeric factorization is reused
/// while the assembled matrix is unchanged.
class LinearWorkspace {
 public:
  explicit LinearWorkspace(const DiscreteOperator& op);
  ~LinearWorkspace();
  LinearWorkspace(const LinearWorkspace&) = delete;
  LinearWorkspace& operator=(const LinearWorkspace&) = delete;

  /// Solves (I/dt - L_II) v = u/dt + L_IB u_B - f for the frozen operator L
  /// and writes v into the interior of `out`. False if singular.
  bool solve(const FrozenCoefficients& fc, const GridFunction& u, const GridFunction& f, double dt,
             GridFunction& out);
  /// Solves J delta = -res with J the residual Jacobian at u (fc = freeze(u, λ)).
  bool newton(const FrozenCoefficients& fc, const GridFunction& u, const GridFunction& res, GridFunction& delta);
  int factorizations() const;
  const DiscreteOperator& op() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

double default_blowup_cap(const GridFunction& f, double alpha);

/// Solves G_h[u] + λ|u|^α u = f with u = g on the boundary. Requires
/// c + λ <= 0 on the grid for the monotone theory to apply.
SolveResult pseudo_time_solve(const DiscreteOperator& op, double lambda, const GridFunction& f, double g,
                              const GridFunction& u0, const SolveOptions& opts = {},
                              LinearWorkspace* workspace = nullptr);

/// Same with boundary values taken from g on non-interior nodes.
SolveResult pseudo_time_solve(const DiscreteOperator& op, double lambda, const GridFunction& f,
                              const GridFunction& g, const GridFunction& u0, const SolveOptions& opts = {},
                              LinearWorkspace* workspace = nullptr);

/// Monotone induction from u_1 = 0 with the shift S = max(0, sup c, -λ):
/// u_{n+1} solves G_h[u] - S|u|^α u = f - (λ + S)|u_n|^α u_n, u = 0 on the
/// boundary. Requires f <= 0.
SolveResult monotone_induction(const DiscreteOperator& op, double lambda, const GridFunction& f,
                               const SolveOptions& opts = {}, LinearWorkspace* workspace = nullptr);

}  // namespace demi

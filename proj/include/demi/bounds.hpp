#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "demi/discretization.hpp"
#include "demi/domain_grid.hpp"

namespace demi {

struct Certificate {
  enum class Kind { lower, upper };
  Kind kind = Kind::lower;
  double value = 0.0;
  std::string witness;
  std::map<std::string, double> params;
  Index worst_index = -1;
  Point worst_node = Point::Zero();
  double margin = 0.0;  // spread of the pointwise ratio over the nodes used
};

/// min over interior nodes of -G_h[phi] / phi^(1+alpha). A positive value v
/// certifies that every λ < v admits phi as a discrete supersolution.
Certificate certify_lower(const DiscreteOperator& op, const GridFunction& phi, const std::string& witness = "user");

enum class WitnessKind { quadratic, power };

/// Reading of the implicit exponent relation q = 2.3^q R|b1|/a + 2:
/// times means 2 * 3^q, decimal means 2.3^q.
enum class ExponentReading { times, decimal };

/// Strip test function in the coordinate y = x1 - center, |y| <= R.
struct StripWitness {
  WitnessKind kind = WitnessKind::quadratic;
  double R = 1.0;
  double center = 0.0;
  double b1 = 0.0;
  double q = 2.0;

  double operator()(const Point& x) const;
  std::string describe() const;
};

StripWitness strip_witness(double R, double b1, double a, double alpha, WitnessKind kind,
                           ExponentReading reading = ExponentReading::times, double center = 0.0);

/// Smallest root in (2, 50] of q = k base^q + 2; throws ExponentUnresolved.
double strip_exponent(double k, double base);

/// Best of the strip witnesses (both kinds, both readings) and the constant
/// witness on the slab containing the domain.
Certificate best_strip_certificate(const DiscreteOperator& op);

/// max over interior nodes of the inscribed ball of
/// (-F(x,∇σ,D²σ) - b·∇σ|∇σ|^α) / σ^(1+α) + sup|c| with σ = (|x|^q - R^q)² / 2q
/// and q = (α+2)/(α+1), using exact derivatives of σ.
Certificate upper_bound_ball(const DiscreteOperator& op);

struct RayleighOptions {
  int nodes = 400;
  int restarts = 5;
  int max_iterations = 20000;
  double tol = 1e-12;
  std::uint64_t seed = 1;
};

struct RayleighResult {
  double value = 0.0;
  bool stale = false;  // descent stalled before reaching the tolerance
  int iterations = 0;
};

/// Minimum of the 1D quotient
///   ∫ |u'|^(α+2) e^B / ∫ (α+1)/a |u|^(α+2) e^B,  B(x) = ∫_{-R}^x (α+1) b / a,
/// over grid functions on [center-R, center+R] vanishing at the ends.
RayleighResult rayleigh_1d(const Field& a, const Field& b, double alpha, double R, double center = 0.0,
                           const RayleighOptions& opts = {});

/// u(x_hi) for the 1D ODE G[u] + λ|u|^α u = 0 started at x_lo with u = 0,
/// u' = 1. The spec must be one-dimensional (only b[0] is read).
double shooting_1d(const OperatorSpec& spec, double x_lo, double x_hi, double lambda, double rtol = 1e-10);

/// First sign change of λ -> shooting_1d on [lambda_min, lambda_max].
double shooting_eigenvalue(const OperatorSpec& spec, double x_lo, double x_hi, double lambda_min = 0.0,
                           double lambda_max = 100.0, double tol = 1e-10);

}  // namespace demi

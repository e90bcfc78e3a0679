#pragma once

// Independent reference values for the tests. Nothing here calls into the
// library, so agreement is a genuine cross-check.

#include <array>
#include <cmath>

#include <boost/math/constants/constants.hpp>
#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint.hpp>

namespace oracle {

inline constexpr double pi = boost::math::constants::pi<double>();

// π_p = 2π / (p sin(π/p)).
inline double pi_p(double p) { return 2.0 * pi / (p * std::sin(pi / p)); }

// Principal eigenvalue of a |u'|^α u'' + λ |u|^α u = 0 on an interval of
// length L: a (π_p / L)^(α+2) with p = α + 2.
inline double closed_form_1d(double a, double alpha, double length) {
  return a * std::pow(pi_p(alpha + 2.0) / length, alpha + 2.0);
}

// j_{0,1}^2 / R^2: first Dirichlet eigenvalue of the Laplacian on a disk.
inline double disk_laplace(double radius) {
  const double j = boost::math::cyl_bessel_j_zero(0.0, 1);
  return j * j / (radius * radius);
}

// u(L) for a |u'|^α u'' + b |u'|^α u' + λ |u|^α u = 0, u(0) = 0, u'(0) = 1,
// integrated in (u, v = |u'|^α u') with Dormand-Prince. `a_concave` and
// `a_convex` are the coefficients used where u'' < 0 and u'' > 0, which
// covers Pucci principal parts in one dimension.
inline double shoot(double lambda, double alpha, double length, double a_concave, double a_convex = -1.0,
                    double b = 0.0) {
  if (a_convex <= 0.0) a_convex = a_concave;
  using State = std::array<double, 2>;
  auto rhs = [&](const State& s, State& ds, double) {
    const double u = s[0];
    const double v = s[1];
    const double up = (v >= 0 ? 1.0 : -1.0) * std::pow(std::abs(v), 1.0 / (1.0 + alpha));
    const double source = b * v + lambda * (u >= 0 ? 1.0 : -1.0) * std::pow(std::abs(u), 1.0 + alpha);
    // a |u'|^α u'' = -source; the sign of u'' is the sign of -source.
    const double a = source > 0 ? a_concave : a_convex;
    ds[0] = up;
    ds[1] = -(1.0 + alpha) * source / a;
  };
  State s{0.0, 1.0};
  namespace ode = boost::numeric::odeint;
  ode::integrate_adaptive(ode::make_controlled(1e-12, 1e-12, ode::runge_kutta_dopri5<State>()), rhs, s, 0.0,
                          length, length / 1000.0);
  return s[0];
}

// First root of λ -> shoot(λ) found by scanning [lo, hi] and refining with
// TOMS 748.
inline double shooting_eigenvalue(double alpha, double length, double a_concave, double a_convex = -1.0,
                                  double b = 0.0, double lo = 0.01, double hi = 100.0) {
  auto miss = [&](double lam) { return shoot(lam, alpha, length, a_concave, a_convex, b); };
  const int n = 400;
  double prev = lo;
  double fprev = miss(lo);
  for (int i = 1; i <= n; ++i) {
    const double x = lo + (hi - lo) * i / n;
    const double fx = miss(x);
    if ((fprev > 0) != (fx > 0)) {
      boost::uintmax_t iters = 200;
      auto r = boost::math::tools::toms748_solve(miss, prev, x, fprev, fx,
                                                 boost::math::tools::eps_tolerance<double>(50), iters);
      return 0.5 * (r.first + r.second);
    }
    prev = x;
    fprev = fx;
  }
  return NAN;
}

}  // namespace oracle

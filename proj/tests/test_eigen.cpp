#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "demi/eigen.hpp"
#include "demi/errors.hpp"
#include "oracles.hpp"

using namespace demi;

namespace {

OperatorSpec spec_of(Principal p, double a, double A, double alpha = 0.0) {
  OperatorSpec s;
  s.principal = p;
  s.a = a;
  s.A = A;
  s.alpha = alpha;
  return s;
}

EigenResult eigen_1d(const OperatorSpec& spec, double h, const EigenOptions& opts = {}) {
  const DiscreteOperator op(build_grid(Domain::interval(-1, 1), h), spec);
  return lambda_bar(op, opts);
}

void check_bracket_validity(const EigenResult& r) {
  for (const BisectionTrial& t : r.trials) {
    if (t.below)
      CHECK(t.lambda <= r.lambda_lo);
    else
      CHECK(t.lambda >= r.lambda_hi);
  }
}

}  // namespace

TEST_CASE("1D Laplacian eigenvalue against shooting") {
  const double oracle_value = oracle::shooting_eigenvalue(0.0, 2.0, 1.0);
  const EigenResult r = eigen_1d(OperatorSpec{}, 0.01);
  CHECK(r.lambda_lo < r.lambda_hi);
  CHECK(r.lambda_hi - r.lambda_lo <= r.lambda_tol);
  CHECK(r.lambda_mid() == doctest::Approx(oracle_value).epsilon(0.001));
  CHECK(r.lower_certificate.value <= r.lambda_lo);
  CHECK(r.upper_certificate.value >= r.lambda_hi);
  check_bracket_validity(r);
  CHECK(r.probe_lambda <= r.lambda_lo);
  CHECK(r.lambda_power == doctest::Approx(r.lambda_mid()).epsilon(1e-3));
}

TEST_CASE("eigenfunction of the 1D Laplacian") {
  const EigenResult r = eigen_1d(OperatorSpec{}, 0.01);
  const GridFunction& w = r.eigenfunction;
  const Grid& g = w.grid();
  CHECK(sup_norm(w) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(inf_interior(w) > 0.0);
  for (Index k : g.boundary()) CHECK(w[k] == 0.0);
  double err = 0.0;
  for (Index k = 0; k < g.size(); ++k) err = std::max(err, std::abs(w[k] - std::cos(oracle::pi * g.point(k).x() / 2)));
  CHECK(err < 1e-3);
  CHECK(r.eigen_residual < 1e-3);
}

TEST_CASE("degenerate 1D eigenvalue against the closed form") {
  OperatorSpec spec;
  spec.alpha = 1.0;
  const double closed = oracle::closed_form_1d(1.0, 1.0, 2.0);
  CHECK(oracle::shooting_eigenvalue(1.0, 2.0, 1.0) == doctest::Approx(closed).epsilon(1e-8));
  const EigenResult r = eigen_1d(spec, 0.01);
  CHECK(r.lambda_mid() == doctest::Approx(closed).epsilon(0.015));
  check_bracket_validity(r);
  CHECK(inf_interior(r.eigenfunction) > 0.0);
}

TEST_CASE("singular 1D eigenvalue against the closed form") {
  OperatorSpec spec;
  spec.alpha = -0.5;
  const EigenResult r = eigen_1d(spec, 0.01);
  CHECK(r.lambda_mid() == doctest::Approx(oracle::closed_form_1d(1.0, -0.5, 2.0)).epsilon(0.015));
}

TEST_CASE("eigenvalue with drift against shooting") {
  OperatorSpec spec;
  spec.b = {Field::constant(0.8)};
  const EigenResult r = eigen_1d(spec, 0.01);
  // u'' + b u' + λu = 0 has eigenvalue π²/4 + b²/4.
  CHECK(oracle::shooting_eigenvalue(0.0, 2.0, 1.0, 1.0, 0.8) ==
        doctest::Approx(oracle::pi * oracle::pi / 4 + 0.16).epsilon(1e-8));
  CHECK(r.lambda_mid() == doctest::Approx(oracle::pi * oracle::pi / 4 + 0.16).epsilon(0.01));
}

TEST_CASE("disk eigenvalue") {
  const DiscreteOperator op(build_grid(Domain::disk(Point::Zero(), 1.0), 1.0 / 16), OperatorSpec{});
  const EigenResult r = lambda_bar(op);
  CHECK(r.lambda_mid() == doctest::Approx(oracle::disk_laplace(1.0)).epsilon(0.03));
  CHECK(inf_interior(r.eigenfunction) > 0.0);
}

TEST_CASE("demi-eigenvalues of Pucci operators") {
  const double lam_plus = oracle::shooting_eigenvalue(0.0, 2.0, 1.0, 2.0);
  const double lam_minus = oracle::shooting_eigenvalue(0.0, 2.0, 2.0, 1.0);
  const OperatorSpec plus = spec_of(Principal::pucci_plus, 1, 2);
  const DiscreteOperator op(build_grid(Domain::interval(-1, 1), 0.01), plus);
  const EigenResult bar = lambda_bar(op);
  const EigenResult under = lambda_underline(op);
  CHECK(bar.lambda_mid() == doctest::Approx(lam_plus).epsilon(0.005));
  CHECK(under.lambda_mid() == doctest::Approx(lam_minus).epsilon(0.005));
  const EigenResult minus_bar = eigen_1d(spec_of(Principal::pucci_minus, 1, 2), 0.01);
  CHECK(std::abs(under.lambda_mid() - minus_bar.lambda_mid()) <= under.lambda_tol + minus_bar.lambda_tol);
  CHECK(under.lambda_lo > bar.lambda_hi);

  // Isotropic operators are their own flip.
  const DiscreteOperator iso(build_grid(Domain::interval(-1, 1), 0.02), OperatorSpec{});
  const EigenResult a = lambda_bar(iso);
  const EigenResult b = lambda_underline(iso);
  CHECK(a.lambda_lo == b.lambda_lo);
  CHECK(a.lambda_hi == b.lambda_hi);

  // Flipping twice restores the original value.
  const DiscreteOperator twice(op.grid_ptr(), flip_operator(flip_operator(plus)));
  const EigenResult c = lambda_bar(twice);
  CHECK(std::abs(c.lambda_mid() - bar.lambda_mid()) <= bar.lambda_tol);
}

TEST_CASE("constant shift covariance") {
  OperatorSpec spec = spec_of(Principal::pucci_plus, 1, 2, 1.0);
  spec.b = {Field::constant(0.4)};
  const EigenResult base = eigen_1d(spec, 0.02);
  for (double s : {-1.0, 1.0}) {
    OperatorSpec shifted = spec;
    shifted.c = Field::constant(s);
    const EigenResult r = eigen_1d(shifted, 0.02);
    CHECK(std::abs(r.lambda_mid() - (base.lambda_mid() - s)) <= 2 * std::max(r.lambda_tol, base.lambda_tol));
  }
}

TEST_CASE("scaling law") {
  for (double alpha : {0.0, 1.0}) {
    OperatorSpec spec;
    spec.alpha = alpha;
    const ScalingReport one = scaling_check(spec, Domain::interval(-1, 1), 0.02, 1.0);
    CHECK(one.ratio == doctest::Approx(1.0).epsilon(1e-12));
    const ScalingReport two = scaling_check(spec, Domain::interval(-1, 1), 0.02, 2.0);
    CHECK(two.expected == doctest::Approx(std::pow(2.0, -(2 + alpha))));
    CHECK(two.rel_error < 1e-3);
  }
  OperatorSpec drift;
  drift.b = {Field::constant(1.0)};
  CHECK_THROWS_AS(scaling_check(drift, Domain::interval(-1, 1), 0.02, 2.0), InvalidArgument);
}

TEST_CASE("gradient floor sensitivity for a singular operator") {
  OperatorSpec spec;
  spec.alpha = -0.5;
  std::vector<double> values;
  for (double eps : {1e-6, 1e-8, 1e-10}) {
    DiscretizationOptions disc;
    disc.eps = eps;
    const DiscreteOperator op(build_grid(Domain::interval(-1, 1), 0.02), spec, disc);
    const EigenResult r = lambda_bar(op);
    values.push_back(r.lambda_mid());
  }
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  CHECK(*hi - *lo < 1e-3 * *hi);
}

TEST_CASE("user bracket that misses the eigenvalue is rejected") {
  EigenOptions opts;
  opts.lambda_lo = 3.0;
  opts.lambda_hi = 4.0;
  CHECK_THROWS_AS(eigen_1d(OperatorSpec{}, 0.02, opts), BracketInvalid);
  opts.lambda_lo = 1.0;
  opts.lambda_hi = 2.0;
  CHECK_THROWS_AS(eigen_1d(OperatorSpec{}, 0.02, opts), BracketInvalid);
  opts.lambda_lo = 2.0;
  opts.lambda_hi = 3.0;
  opts.lambda_tol = 1e-3;
  const EigenResult r = eigen_1d(OperatorSpec{}, 0.02, opts);
  CHECK(r.lambda_hi - r.lambda_lo <= 1e-3);
}

TEST_CASE("default tolerance follows the initial bracket") {
  const EigenResult r = eigen_1d(OperatorSpec{}, 0.02);
  CHECK(r.lambda_tol == doctest::Approx(1e-4 * (r.upper_certificate.value - r.lower_certificate.value)));
}

TEST_CASE("eigenfunction probe") {
  const DiscreteOperator op(build_grid(Domain::interval(-1, 1), 0.02), OperatorSpec{});
  const EigenfunctionResult e = eigenfunction_at(op, 2.4, 2.4674, {}, nullptr, 0);
  CHECK(sup_norm(e.w) == doctest::Approx(1.0));
  CHECK(inf_interior(e.w) > 0.0);
  CHECK(e.polish_iterations == 0);
  const EigenfunctionResult p = eigenfunction_at(op, 2.4, 2.4674, {}, nullptr, 50);
  CHECK(p.residual < e.residual);
  CHECK(p.lambda_power == doctest::Approx(2.4674).epsilon(1e-3));
}

TEST_CASE("richardson extrapolation") {
  const std::vector<double> h{0.1, 0.05, 0.025};
  std::vector<double> v;
  for (double x : h) v.push_back(2.0 + 3.0 * x * x);
  const RichardsonReport r = richardson(h, v, 2.0);
  CHECK(r.order == doctest::Approx(2.0));
  CHECK(r.extrapolate == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(r.order_estimated);
  const RichardsonReport two = richardson({0.1, 0.05}, {2.03, 2.0075}, 2.0);
  CHECK_FALSE(two.order_estimated);
  CHECK(two.extrapolate == doctest::Approx(2.0));
}

#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "demi/discretization.hpp"
#include "demi/errors.hpp"
#include "oracles.hpp"

using namespace demi;

namespace {

OperatorSpec make_spec(Principal p, double a, double A, double alpha = 0.0) {
  OperatorSpec s;
  s.principal = p;
  s.a = a;
  s.A = A;
  s.alpha = alpha;
  return s;
}

// Interior node closest to a point.
Index node_near(const Grid& g, const Point& x) {
  Index best = -1;
  double dist = INFINITY;
  for (Index k : g.interior())
    if ((g.point(k) - x).norm() < dist) {
      dist = (g.point(k) - x).norm();
      best = k;
    }
  return best;
}

double max_interior_abs(const GridFunction& r) {
  double m = 0.0;
  for (Index k : r.grid().interior()) m = std::max(m, std::abs(r[k]));
  return m;
}

}  // namespace

TEST_CASE("second differences") {
  const auto g1 = build_grid(Domain::interval(-1, 1), 0.1);
  const DiscreteOperator op1(g1, OperatorSpec{});
  const auto sq = GridFunction::from(g1, [](const Point& x) { return x.x() * x.x(); });
  const auto aff = GridFunction::from(g1, [](const Point& x) { return 3 * x.x() - 1; });
  for (Index k : g1->interior()) {
    CHECK(second_diff(sq, k, 0, op1) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(std::abs(second_diff(aff, k, 0, op1)) < 1e-11);
  }

  const auto g2 = build_grid(Domain::rectangle(-1, 1, -1, 1), 0.125);
  const DiscreteOperator op2(g2, OperatorSpec{});
  const auto xy = GridFunction::from(g2, [](const Point& x) { return x.x() * x.y(); });
  REQUIRE(op2.stencil().directions[2].di == 1);
  REQUIRE(op2.stencil().directions[2].dj == 1);
  for (Index k : g2->interior()) {
    CHECK(second_diff(xy, k, 2, op2) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(second_diff(xy, k, 3, op2) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(std::abs(second_diff(xy, k, 0, op2)) < 1e-12);
  }
}

TEST_CASE("stencil frames") {
  const Stencil s1 = Stencil::make(1, 2, 0.1);
  CHECK(s1.directions.size() == 1);
  const Stencil s2 = Stencil::make(2, 2, 0.1);
  CHECK(s2.directions.size() == 4);
  CHECK(s2.frames == 2);
  CHECK(s2.directions[2].length == doctest::Approx(0.1 * std::sqrt(2.0)));
  // Directions within a frame are orthogonal.
  for (int f = 0; f < 2; ++f) {
    const auto& d0 = s2.directions[2 * f];
    const auto& d1 = s2.directions[2 * f + 1];
    CHECK(d0.frame == f);
    CHECK(d0.di * d1.di + d0.dj * d1.dj == 0);
  }
  CHECK_THROWS_AS(Stencil::make(2, 3, 0.1), InvalidArgument);
}

TEST_CASE("discrete principal part") {
  const auto g = build_grid(Domain::rectangle(-1, 1, -1, 1), 0.125);
  const auto saddle = GridFunction::from(g, [](const Point& x) { return x.x() * x.x() - x.y() * x.y(); });
  const auto bowl = GridFunction::from(g, [](const Point& x) { return x.x() * x.x() + x.y() * x.y(); });
  DiscretizationOptions axis;
  axis.frames = 1;
  const DiscreteOperator plus_axis(g, make_spec(Principal::pucci_plus, 1, 2), axis);
  const DiscreteOperator plus_wide(g, make_spec(Principal::pucci_plus, 1, 2));
  const DiscreteOperator minus_wide(g, make_spec(Principal::pucci_minus, 1, 2));
  const DiscreteOperator lap(g, make_spec(Principal::isotropic, 1, 1));
  for (Index k : g->interior()) {
    CHECK(discrete_principal(saddle, k, plus_axis) == doctest::Approx(2.0));
    CHECK(discrete_principal(saddle, k, plus_wide) == doctest::Approx(2.0));
    CHECK(discrete_principal(saddle, k, minus_wide) == doctest::Approx(-2.0));
    CHECK(discrete_principal(bowl, k, lap) == doctest::Approx(4.0));
  }
}

TEST_CASE("wide-stencil Pucci converges on a smooth convex radial function") {
  // u = r^4 has a positive semidefinite Hessian with eigenvalues 12 r^2 and
  // 4 r^2, so pucci_plus(a, A) of it is A * 16 r^2.
  const OperatorSpec spec = make_spec(Principal::pucci_plus, 1, 2);
  std::vector<double> errors;
  for (double h : {1.0 / 8, 1.0 / 16, 1.0 / 32}) {
    const auto g = build_grid(Domain::disk(Point::Zero(), 1.0), h);
    const DiscreteOperator op(g, spec);
    const auto u = GridFunction::from(g, [](const Point& x) { return std::pow(x.squaredNorm(), 2); });
    double err = 0.0;
    for (Index k : g->interior()) {
      if (g->dist()[k] < 0.25) continue;
      err = std::max(err, std::abs(discrete_principal(u, k, op) - 32.0 * g->point(k).squaredNorm()));
    }
    errors.push_back(err);
  }
  CHECK(errors[1] < 0.6 * errors[0]);
  CHECK(errors[2] < 0.6 * errors[1]);
  CHECK(errors[2] < 0.05);
}

TEST_CASE("discrete gradient") {
  const auto g = build_grid(Domain::rectangle(-1, 1, -1, 1), 0.125);
  OperatorSpec spec;
  spec.b = {Field::constant(1.0), Field::constant(0.0)};
  const DiscreteOperator op(g, spec);
  const auto aff = GridFunction::from(g, [](const Point& x) { return 2 * x.x() - 0.5 * x.y() + 1; });
  for (Index k : g->interior())
    for (GradientKind kind : {GradientKind::centered, GradientKind::upwind, GradientKind::one_sided_mean}) {
      const Vec<double> p = discrete_gradient(aff, k, kind, op);
      if (kind == GradientKind::one_sided_mean) {
        CHECK(p[0] == doctest::Approx(2.0));
        CHECK(p[1] == doctest::Approx(0.5));
      } else {
        CHECK(p[0] == doctest::Approx(2.0));
        CHECK(p[1] == doctest::Approx(-0.5));
      }
    }
  const auto g1 = build_grid(Domain::interval(-1, 1), 0.1);
  const DiscreteOperator op1(g1, OperatorSpec{});
  const auto sq = GridFunction::from(g1, [](const Point& x) { return x.x() * x.x(); });
  const Index mid = node_near(*g1, Point::Zero());
  CHECK(std::abs(discrete_gradient(sq, mid, GradientKind::centered, op1)[0]) < 1e-14);
  // The magnitude used by the |∇u|^α factor does not vanish at a symmetric extremum.
  CHECK(discrete_gradient(sq, mid, GradientKind::one_sided_mean, op1)[0] == doctest::Approx(0.1));
}

TEST_CASE("assemble_G examples") {
  const auto g = build_grid(Domain::interval(-1, 1), 0.05);
  const DiscreteOperator op(g, OperatorSpec{});
  const GridFunction zero(g);
  CHECK(max_interior_abs(assemble_G(zero, op, 0.0, zero)) == 0.0);

  const auto para = GridFunction::from(g, [](const Point& x) { return 0.5 * (1 - x.x() * x.x()); });
  const GridFunction minus_one(g, -1.0);
  CHECK(max_interior_abs(assemble_G(para, op, 0.0, minus_one)) < 1e-12);

  std::vector<double> res;
  for (double h : {0.1, 0.05, 0.025}) {
    const auto gh = build_grid(Domain::interval(-1, 1), h);
    const DiscreteOperator oph(gh, OperatorSpec{});
    const auto w = GridFunction::from(gh, [](const Point& x) { return std::cos(oracle::pi * x.x() / 2); });
    res.push_back(max_interior_abs(assemble_G(w, oph, oracle::pi * oracle::pi / 4, GridFunction(gh))));
  }
  CHECK(res[0] / res[1] == doctest::Approx(4.0).epsilon(0.05));
  CHECK(res[1] / res[2] == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("assemble_G with drift and degenerate weight") {
  // u = (1 - x^2)/2 with α = 1 and b = 0: G = |u'| u'' = -|x|; the scheme
  // measures |u'| by the mean of one-sided slopes, exact for this quadratic
  // except at the crest.
  const auto g = build_grid(Domain::interval(-1, 1), 0.05);
  OperatorSpec spec;
  spec.alpha = 1.0;
  const DiscreteOperator op(g, spec);
  const auto para = GridFunction::from(g, [](const Point& x) { return 0.5 * (1 - x.x() * x.x()); });
  const GridFunction zero(g);
  const GridFunction r = assemble_G(para, op, 0.0, zero);
  for (Index k : g->interior()) {
    const double x = g->point(k).x();
    if (std::abs(x) > 0.01) CHECK(r[k] == doctest::Approx(-std::abs(x)).epsilon(1e-10));
  }
}

TEST_CASE("consistency orders") {
  // Isotropic: O(h^2). Wide-stencil Pucci on a function whose Hessian
  // eigenvectors are not lattice aligned: the error does not grow as h -> 0.
  auto error_at = [](double h, Principal p) {
    const auto g = build_grid(Domain::rectangle(-1, 1, -1, 1), h);
    const DiscreteOperator op(g, make_spec(p, 1, 2));
    const auto u = GridFunction::from(g, [](const Point& x) { return std::exp(0.5 * x.x() + 0.25 * x.y()); });
    double err = 0.0;
    for (Index k : g->interior()) {
      const Point& x = g->point(k);
      if (g->dist()[k] < 0.25) continue;
      const double e = std::exp(0.5 * x.x() + 0.25 * x.y());
      SymMat<double> H(2, 2);
      H << 0.25 * e, 0.125 * e, 0.125 * e, 0.0625 * e;
      err = std::max(err, std::abs(discrete_principal(u, k, op) - principal_part(op.spec(), x, H)));
    }
    return err;
  };
  const double i1 = error_at(0.125, Principal::isotropic);
  const double i2 = error_at(0.0625, Principal::isotropic);
  const double i3 = error_at(0.03125, Principal::isotropic);
  CHECK(std::log2(i1 / i2) == doctest::Approx(2.0).epsilon(0.1));
  CHECK(std::log2(i2 / i3) == doctest::Approx(2.0).epsilon(0.1));
  // The Hessian here is rank one and positive semidefinite, so the 2-frame
  // Pucci maximum is consistent as well.
  const double p1 = error_at(0.125, Principal::pucci_plus);
  const double p3 = error_at(0.03125, Principal::pucci_plus);
  CHECK(p3 < p1);
}

TEST_CASE("monotonicity of the residual") {
  std::mt19937_64 rng(99);
  for (Principal pr : {Principal::pucci_plus, Principal::pucci_minus, Principal::isotropic}) {
    OperatorSpec spec = make_spec(pr, 0.5, 2.0);
    spec.b = {Field::constant(0.7), Field::constant(-0.4)};
    spec.c = Field::constant(-1.0);
    const auto g = build_grid(Domain::disk(Point::Zero(), 1.0), 1.0 / 12);
    const DiscreteOperator op(g, spec);
    std::normal_distribution<double> noise(0.0, 1.0);
    GridFunction u(g);
    for (Index k : g->interior()) u[k] = noise(rng);
    std::uniform_int_distribution<std::size_t> pick(0, g->interior().size() - 1);
    const double delta = 1e-6;
    for (int t = 0; t < 200; ++t) {
      const Index k = g->interior()[pick(rng)];
      const double base = op.apply(u.values(), k);
      // Neighbours in every stencil direction, including boundary nodes.
      for (int di = -1; di <= 1; ++di)
        for (int dj = -1; dj <= 1; ++dj) {
          const Index n = g->index(g->ix(k) + di, g->iy(k) + dj);
          if (n < 0 || !g->is_active(n)) continue;
          GridFunction v = u;
          v[n] += delta;
          const double moved = op.apply(v.values(), k);
          if (n == k)
            CHECK(moved <= base + 1e-12);
          else
            CHECK(moved >= base - 1e-12);
        }
    }
  }
}

TEST_CASE("frozen operator is monotone for every alpha") {
  for (double alpha : {-0.5, 1.0, 2.0})
    for (Principal pr : {Principal::pucci_plus, Principal::pucci_minus, Principal::isotropic}) {
      OperatorSpec spec = make_spec(pr, 1.0, 3.0, alpha);
      spec.b = {Field::constant(-0.5), Field::constant(1.0)};
      const auto g = build_grid(Domain::rectangle(0, 1, 0, 1), 1.0 / 16);
      const DiscreteOperator op(g, spec);
      const auto u = GridFunction::from(g, [](const Point& x) { return std::sin(3 * x.x()) * x.y() * (1 - x.y()); });
      const FrozenCoefficients fc = op.freeze(u, -0.5);
      std::vector<std::pair<Index, double>> row;
      for (std::size_t s = 0; s < g->interior().size(); ++s) {
        row.clear();
        op.linear_row(fc, static_cast<Index>(s), row);
        std::map<Index, double> merged;
        for (auto [n, c] : row) merged[n] += c;
        const Index k = g->interior()[s];
        double sum = 0.0;
        for (auto [n, c] : merged) {
          if (n == k)
            CHECK(c <= 1e-12);
          else
            CHECK(c >= -1e-12);
          sum += c;
        }
        // Constants are annihilated up to the zero-order term.
        CHECK(sum == doctest::Approx(fc.zero_order[static_cast<Index>(s)]).epsilon(1e-9).scale(1.0));
      }
    }
}

TEST_CASE("frozen operator reproduces the residual at the iterate") {
  OperatorSpec spec = make_spec(Principal::pucci_plus, 1.0, 2.0, 1.0);
  spec.b = {Field::constant(0.3), Field::constant(0.2)};
  const auto g = build_grid(Domain::disk(Point::Zero(), 1.0), 1.0 / 10);
  const DiscreteOperator op(g, spec);
  const auto u = GridFunction::from(g, [](const Point& x) { return 1 - x.squaredNorm() + 0.3 * x.x() * x.y(); });
  const double lambda = 0.7;
  const FrozenCoefficients fc = op.freeze(u, lambda);
  const GridFunction r = op.residual(u, lambda, GridFunction(g));
  std::vector<std::pair<Index, double>> row;
  for (std::size_t s = 0; s < g->interior().size(); ++s) {
    row.clear();
    op.linear_row(fc, static_cast<Index>(s), row);
    double value = 0.0;
    for (auto [n, c] : row) value += c * u[n];
    CHECK(value == doctest::Approx(r[g->interior()[s]]).epsilon(1e-10).scale(1.0));
  }
}

TEST_CASE("Jacobian rows match finite differences") {
  for (double alpha : {0.0, 1.0, -0.5}) {
    OperatorSpec spec = make_spec(Principal::isotropic, 1.0, 1.0, alpha);
    spec.b = {Field::constant(0.4)};
    spec.c = Field::constant(-0.5);
    const auto g = build_grid(Domain::interval(-1, 1), 0.1);
    const DiscreteOperator op(g, spec);
    const auto u = GridFunction::from(g, [](const Point& x) { return std::cos(1.3 * x.x()) + 0.2 * x.x(); });
    const double lambda = 0.3;
    const FrozenCoefficients fc = op.freeze(u, lambda);
    std::vector<std::pair<Index, double>> row;
    const double step = 1e-7;
    for (std::size_t s = 0; s < g->interior().size(); ++s) {
      const Index k = g->interior()[s];
      row.clear();
      op.jacobian_row(fc, u.values(), static_cast<Index>(s), row);
      std::map<Index, double> merged;
      for (auto [n, c] : row) merged[n] += c;
      for (auto [n, c] : merged) {
        GridFunction up = u;
        GridFunction dn = u;
        up[n] += step;
        dn[n] -= step;
        const double fd = (op.residual(up, lambda, GridFunction(g))[k] - op.residual(dn, lambda, GridFunction(g))[k]) /
                          (2 * step);
        CHECK(c == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
      }
    }
  }
}

TEST_CASE("discrete degenerate ellipticity") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> coef(0.0, 1.0);
  const auto g = build_grid(Domain::rectangle(-1, 1, -1, 1), 0.125);
  const auto u = GridFunction::from(g, [](const Point& x) { return std::sin(2 * x.x()) * std::cos(x.y()); });
  for (Principal pr : {Principal::pucci_plus, Principal::pucci_minus, Principal::isotropic}) {
    const DiscreteOperator op(g, make_spec(pr, 0.5, 2.5));
    for (int t = 0; t < 20; ++t) {
      // Positive semidefinite quadratic: every directional second difference is >= 0.
      const double p = coef(rng), q = coef(rng), r = coef(rng);
      const auto v = GridFunction::from(g, [&](const Point& x) {
        const double s = p * x.x() + q * x.y();
        return s * s + r * x.y() * x.y();
      });
      GridFunction w = u;
      w.values() += v.values();
      for (Index k : g->interior()) CHECK(discrete_principal(w, k, op) >= discrete_principal(u, k, op) - 1e-10);
    }
  }
}

TEST_CASE("cfl step") {
  for (double h : {0.1, 0.05}) {
    const auto g = build_grid(Domain::rectangle(0, 1, 0, 1), h);
    const DiscreteOperator op(g, OperatorSpec{});
    const auto u = GridFunction::from(g, [](const Point& x) { return x.x() * (1 - x.x()); });
    CHECK(cfl_dt(u, op) == doctest::Approx(0.9 * h * h / 4));
  }
  const auto g = build_grid(Domain::interval(-1, 1), 0.05);
  OperatorSpec deg;
  deg.alpha = 1.0;
  deg.c = Field::constant(-1.0);
  const DiscreteOperator op(g, deg);
  const double dt0 = cfl_dt(GridFunction(g), op, 0.0);
  CHECK(std::isfinite(dt0));
  CHECK(dt0 > 1.0);
  const auto coarse = build_grid(Domain::interval(-1, 1), 0.1);
  const DiscreteOperator opc(coarse, OperatorSpec{});
  const DiscreteOperator opf(g, OperatorSpec{});
  CHECK(cfl_dt(GridFunction(coarse), opc) == doctest::Approx(4 * cfl_dt(GridFunction(g), opf)));
}

#include <doctest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "demi/domain_grid.hpp"
#include "demi/errors.hpp"

using namespace demi;

namespace {

int count_interior_on_row(const Grid& g, int j) {
  int n = 0;
  for (int i = 0; i < g.nx(); ++i)
    if (g.is_interior(g.index(i, j))) ++n;
  return n;
}

// Distance to the boundary by brute force over a dense boundary sampling.
double brute_distance(const Domain& d, const Point& x) {
  double best = INFINITY;
  const int n = 20000;
  if (d.kind() == "disk") {
    const auto& s = std::get<Disk>(d.shape());
    for (int i = 0; i < n; ++i) {
      const double t = 2.0 * M_PI * i / n;
      best = std::min(best, (x - s.center - s.radius * Point(std::cos(t), std::sin(t))).norm());
    }
    return best;
  }
  const auto& r = std::get<Rectangle>(d.shape());
  for (int i = 0; i <= n; ++i) {
    const double sx = r.x_lo + (r.x_hi - r.x_lo) * i / n;
    const double sy = r.y_lo + (r.y_hi - r.y_lo) * i / n;
    best = std::min({best, (x - Point(sx, r.y_lo)).norm(), (x - Point(sx, r.y_hi)).norm(),
                     (x - Point(r.x_lo, sy)).norm(), (x - Point(r.x_hi, sy)).norm()});
  }
  return best;
}

}  // namespace

TEST_CASE("interval lattice and classification") {
  GridOptions loose;
  loose.min_interior_per_axis = 1;
  const Grid g(Domain::interval(-1, 1), 0.5, loose);
  REQUIRE(g.size() == 5);
  for (Index k = 0; k < 5; ++k) CHECK(g.point(k).x() == doctest::Approx(-1.0 + 0.5 * k));
  CHECK(g.interior().size() == 3);
  CHECK(g.is_interior(1));
  CHECK(g.is_interior(2));
  CHECK(g.is_interior(3));
  CHECK(g.kind(0) == NodeKind::boundary);
  CHECK(g.kind(4) == NodeKind::boundary);
}

TEST_CASE("disk mask") {
  const Grid g(Domain::disk(Point::Zero(), 1.0), 0.1);
  for (Index k = 0; k < g.size(); ++k) {
    const double r = g.point(k).norm();
    CHECK(g.is_interior(k) == (r < 0.95));
    if (g.kind(k) == NodeKind::boundary) CHECK(std::abs(r - 1.0) <= 0.05 + 1e-12);
  }
}

TEST_CASE("rectangle interior count") {
  const Grid g(Domain::rectangle(0, 1, 0, 2), 0.1);
  CHECK(g.interior().size() == 9 * 19);
  CHECK(count_interior_on_row(g, 5) == 9);
}

TEST_CASE("coarse meshes are rejected") {
  CHECK_THROWS_AS(Grid(Domain::interval(-1, 1), 0.5), MeshTooCoarse);
  CHECK_THROWS_AS(Grid(Domain::disk(Point::Zero(), 1.0), 0.3), MeshTooCoarse);
  CHECK_THROWS_AS(Grid(Domain::interval(-1, 1), -0.1), InvalidArgument);
  CHECK_THROWS_AS(Domain::interval(1, -1), InvalidArgument);
  CHECK_THROWS_AS(Domain::disk(Point::Zero(), 0.0), InvalidArgument);
}

TEST_CASE("interior neighbours are never exterior") {
  for (const Domain& d : {Domain::disk(Point(0.2, -0.1), 0.8), Domain::rectangle(-1, 1, 0, 1)}) {
    const Grid g(d, 1.0 / 16);
    for (Index k : g.interior())
      for (auto [di, dj] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
        const Index n = g.index(g.ix(k) + di, g.iy(k) + dj);
        REQUIRE(n >= 0);
        CHECK(g.is_active(n));
      }
  }
}

TEST_CASE("distance field values") {
  GridOptions loose;
  loose.min_interior_per_axis = 1;
  const Domain iv = Domain::interval(-1, 1);
  CHECK(iv.distance(Point(0, 0)) == 1.0);
  CHECK(Domain::disk(Point::Zero(), 1).distance(Point(0.5, 0)) == 0.5);
  CHECK(Domain::rectangle(0, 1, 0, 1).distance(Point(0.3, 0.9)) == doctest::Approx(0.1).epsilon(1e-15));

  const auto g = build_grid(iv, 0.1);
  const GridFunction d = distance_field(g);
  for (Index k = 0; k < g->size(); ++k) {
    CHECK(d[k] >= 0.0);
    if (g->kind(k) == NodeKind::boundary) CHECK(d[k] == 0.0);
  }
}

TEST_CASE("distance field matches brute force and is 1-Lipschitz") {
  for (const Domain& dom : {Domain::disk(Point::Zero(), 1.0), Domain::rectangle(0, 2, 0, 1)}) {
    const auto g = build_grid(dom, 1.0 / 16);
    const GridFunction d = distance_field(g);
    for (Index k : g->interior()) CHECK(d[k] == doctest::Approx(brute_distance(dom, g->point(k))).epsilon(1e-6));
    for (Index k = 0; k < g->size(); ++k) {
      if (!g->is_active(k)) continue;
      for (auto [di, dj] : {std::pair{1, 0}, {0, 1}, {1, 1}}) {
        const Index n = g->index(g->ix(k) + di, g->iy(k) + dj);
        if (n < 0 || !g->is_active(n)) continue;
        CHECK(std::abs(d[k] - d[n]) <= (g->point(k) - g->point(n)).norm() + 0.5 * g->h() + 1e-12);
      }
    }
  }
}

TEST_CASE("distance jet of the disk") {
  const Domain dom = Domain::disk(Point::Zero(), 1.0);
  const DistanceJet jet = dom.distance_jet(Point(0.6, 0.0));
  CHECK(jet.value == doctest::Approx(0.4));
  CHECK(jet.gradient.x() == doctest::Approx(-1.0));
  // Curvature of the level circle of radius 0.6 in the tangential direction.
  CHECK(jet.hessian(1, 1) == doctest::Approx(-1.0 / 0.6));
  CHECK(jet.hessian(0, 0) == doctest::Approx(0.0));
  CHECK(dom.semiconcavity_constant() == 2.0);
  CHECK(Domain::rectangle(0, 1, 0, 1).semiconcavity_constant() == 0.0);
}

TEST_CASE("norms") {
  const auto g = build_grid(Domain::interval(-1, 1), 0.1);
  CHECK(sup_norm(GridFunction(g)) == 0.0);
  const auto para = GridFunction::from(g, [](const Point& x) { return 0.5 * (1 - x.x() * x.x()); });
  CHECK(sup_norm(para) == doctest::Approx(0.5));
  const auto lin = GridFunction::from(g, [](const Point& x) { return x.x(); });
  CHECK(inf_interior(lin) == doctest::Approx(-1.0 + 0.1));
}

TEST_CASE("refinement nests interior nodes") {
  for (const Domain& dom : {Domain::disk(Point::Zero(), 1.0), Domain::rectangle(0, 1, 0, 1)}) {
    const auto coarse = build_grid(dom, 1.0 / 16);
    const auto fine = build_grid(dom, 1.0 / 32);
    std::set<std::pair<long, long>> fine_interior;
    for (Index k : fine->interior())
      fine_interior.insert({std::lround(fine->point(k).x() * 64), std::lround(fine->point(k).y() * 64)});
    for (Index k : coarse->interior())
      CHECK(fine_interior.count({std::lround(coarse->point(k).x() * 64), std::lround(coarse->point(k).y() * 64)}) ==
            1);
  }
}

TEST_CASE("csv export") {
  GridOptions loose;
  loose.min_interior_per_axis = 1;
  const auto g = build_grid(Domain::interval(0, 1), 0.5, loose);
  const auto u = GridFunction::from(g, [](const Point& x) { return 2 * x.x(); });
  std::ostringstream os;
  write_csv(u, os);
  CHECK(os.str().rfind("x,value\n", 0) == 0);
  int lines = 0;
  for (char c : os.str()) lines += c == '\n';
  CHECK(lines == 4);
}

TEST_CASE("dilation") {
  const Domain d = Domain::disk(Point(1, 0), 0.5).scaled(2.0);
  CHECK(d.inradius() == 1.0);
  CHECK(d.incenter().x() == 2.0);
  CHECK(Domain::interval(-1, 1).scaled(3.0).diameter() == 6.0);
}

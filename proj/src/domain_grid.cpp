#include "demi/domain_grid.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "demi/errors.hpp"

namespace demi {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

bool finite_all(std::initializer_list<double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double v) { return std::isfinite(v); });
}

int lattice_cells(double extent, double h, const char* axis) {
  const double ratio = extent / h;
  const long n = std::lround(ratio);
  if (std::abs(ratio - static_cast<double>(n)) > 1e-9 * std::max(1.0, ratio))
    throw InvalidArgument(std::string("extent along ") + axis + " is not a multiple of h");
  return static_cast<int>(n);
}

}  // namespace

Domain Domain::interval(double x_lo, double x_hi) {
  if (!finite_all({x_lo, x_hi}) || !(x_hi > x_lo))
    throw InvalidArgument("interval requires finite x_lo < x_hi");
  return Domain(Interval{x_lo, x_hi});
}

Domain Domain::rectangle(double x_lo, double x_hi, double y_lo, double y_hi) {
  if (!finite_all({x_lo, x_hi, y_lo, y_hi}) || !(x_hi > x_lo) || !(y_hi > y_lo))
    throw InvalidArgument("rectangle requires finite x_lo < x_hi and y_lo < y_hi");
  return Domain(Rectangle{x_lo, x_hi, y_lo, y_hi});
}

Domain Domain::disk(const Point& center, double radius) {
  if (!center.allFinite() || !std::isfinite(radius) || !(radius > 0.0))
    throw InvalidArgument("disk requires a finite center and radius > 0");
  return Domain(Disk{center, radius});
}

std::string Domain::kind() const {
  return std::visit(overloaded{[](const Interval&) { return std::string("interval"); },
                               [](const Rectangle&) { return std::string("rectangle"); },
                               [](const Disk&) { return std::string("disk"); }},
                    shape_);
}

int Domain::dim() const { return std::holds_alternative<Interval>(shape_) ? 1 : 2; }

double Domain::diameter() const {
  return std::visit(overloaded{[](const Interval& s) { return s.x_hi - s.x_lo; },
                               [](const Rectangle& s) { return std::hypot(s.x_hi - s.x_lo, s.y_hi - s.y_lo); },
                               [](const Disk& s) { return 2.0 * s.radius; }},
                    shape_);
}

double Domain::inradius() const {
  return std::visit(
      overloaded{[](const Interval& s) { return 0.5 * (s.x_hi - s.x_lo); },
                 [](const Rectangle& s) { return 0.5 * std::min(s.x_hi - s.x_lo, s.y_hi - s.y_lo); },
                 [](const Disk& s) { return s.radius; }},
      shape_);
}

Point Domain::incenter() const {
  return std::visit(
      overloaded{[](const Interval& s) { return Point(0.5 * (s.x_lo + s.x_hi), 0.0); },
                 [](const Rectangle& s) { return Point(0.5 * (s.x_lo + s.x_hi), 0.5 * (s.y_lo + s.y_hi)); },
                 [](const Disk& s) { return s.center; }},
      shape_);
}

double Domain::shortest_extent() const {
  return std::visit(
      overloaded{[](const Interval& s) { return s.x_hi - s.x_lo; },
                 [](const Rectangle& s) { return std::min(s.x_hi - s.x_lo, s.y_hi - s.y_lo); },
                 [](const Disk& s) { return 2.0 * s.radius; }},
      shape_);
}

bool Domain::contains(const Point& x) const {
  return std::visit(
      overloaded{[&](const Interval& s) { return x[0] > s.x_lo && x[0] < s.x_hi; },
                 [&](const Rectangle& s) {
                   return x[0] > s.x_lo && x[0] < s.x_hi && x[1] > s.y_lo && x[1] < s.y_hi;
                 },
                 [&](const Disk& s) { return (x - s.center).norm() < s.radius; }},
      shape_);
}

double Domain::distance(const Point& x) const { return distance_jet(x).value; }

DistanceJet Domain::distance_jet(const Point& x) const {
  DistanceJet jet;
  std::visit(overloaded{[&](const Interval& s) {
                          const double left = x[0] - s.x_lo;
                          const double right = s.x_hi - x[0];
                          jet.value = std::min(left, right);
                          jet.gradient = Eigen::Vector2d(left <= right ? 1.0 : -1.0, 0.0);
                          jet.smooth = std::abs(left - right) > 1e-12 * (s.x_hi - s.x_lo);
                        },
                        [&](const Rectangle& s) {
                          const std::array<double, 4> faces{x[0] - s.x_lo, s.x_hi - x[0], x[1] - s.y_lo,
                                                            s.y_hi - x[1]};
                          const std::array<Eigen::Vector2d, 4> normals{
                              Eigen::Vector2d(1, 0), Eigen::Vector2d(-1, 0), Eigen::Vector2d(0, 1),
                              Eigen::Vector2d(0, -1)};
                          const auto it = std::min_element(faces.begin(), faces.end());
                          const auto nearest = static_cast<std::size_t>(it - faces.begin());
                          jet.value = *it;
                          jet.gradient = normals[nearest];
                          const double tol = 1e-12 * std::max(s.x_hi - s.x_lo, s.y_hi - s.y_lo);
                          for (std::size_t f = 0; f < faces.size(); ++f)
                            if (f != nearest && std::abs(faces[f] - *it) <= tol) jet.smooth = false;
                        },
                        [&](const Disk& s) {
                          const Eigen::Vector2d r = x - s.center;
                          const double rho = r.norm();
                          jet.value = s.radius - rho;
                          if (rho <= 1e-14 * s.radius) {
                            jet.smooth = false;
                            return;
                          }
                          const Eigen::Vector2d n = r / rho;
                          jet.gradient = -n;
                          jet.hessian = -(Eigen::Matrix2d::Identity() - n * n.transpose()) / rho;
                        }},
             shape_);
  return jet;
}

double Domain::semiconcavity_constant() const {
  if (const auto* d = std::get_if<Disk>(&shape_)) return 2.0 / d->radius;
  return 0.0;
}

double Domain::slab_center() const { return incenter()[0]; }

double Domain::slab_half_width() const {
  return std::visit(overloaded{[](const Interval& s) { return 0.5 * (s.x_hi - s.x_lo); },
                               [](const Rectangle& s) { return 0.5 * (s.x_hi - s.x_lo); },
                               [](const Disk& s) { return s.radius; }},
                    shape_);
}

Domain Domain::scaled(double t) const {
  if (!(t > 0.0) || !std::isfinite(t)) throw InvalidArgument("dilation factor must be positive");
  return std::visit(overloaded{[&](const Interval& s) { return interval(t * s.x_lo, t * s.x_hi); },
                               [&](const Rectangle& s) {
                                 return rectangle(t * s.x_lo, t * s.x_hi, t * s.y_lo, t * s.y_hi);
                               },
                               [&](const Disk& s) { return disk(t * s.center, t * s.radius); }},
                    shape_);
}

Grid::Grid(const Domain& domain, double h, const GridOptions& options) : domain_(domain), h_(h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw InvalidArgument("mesh width h must be positive");

  Point origin = Point::Zero();
  int interior_along_axis = 0;

  std::visit(overloaded{[&](const Interval& s) {
                          const int n = lattice_cells(s.x_hi - s.x_lo, h, "x");
                          nx_ = n + 1;
                          ny_ = 1;
                          origin = Point(s.x_lo, 0.0);
                          interior_along_axis = n - 1;
                        },
                        [&](const Rectangle& s) {
                          const int n = lattice_cells(s.x_hi - s.x_lo, h, "x");
                          const int m = lattice_cells(s.y_hi - s.y_lo, h, "y");
                          nx_ = n + 1;
                          ny_ = m + 1;
                          origin = Point(s.x_lo, s.y_lo);
                          interior_along_axis = std::min(n, m) - 1;
                        },
                        [&](const Disk& s) {
                          const int m = static_cast<int>(std::floor((s.radius + 0.5 * h) / h)) + 1;
                          nx_ = ny_ = 2 * m + 1;
                          origin = s.center - Point(m * h, m * h);
                          int count = 0;
                          for (int i = -m; i <= m; ++i)
                            if (std::abs(i * h) < s.radius - 0.5 * h) ++count;
                          interior_along_axis = count;
                        }},
             domain.shape());

  if (interior_along_axis < options.min_interior_per_axis)
    throw MeshTooCoarse("mesh too coarse: " + std::to_string(interior_along_axis) +
                        " interior nodes along an axis, need " +
                        std::to_string(options.min_interior_per_axis));

  const auto n = static_cast<std::size_t>(size());
  points_.resize(n);
  kinds_.assign(n, NodeKind::exterior);
  slots_.assign(n, -1);
  dist_ = Eigen::VectorXd::Zero(static_cast<Index>(n));

  for (int j = 0; j < ny_; ++j) {
    for (int i = 0; i < nx_; ++i) {
      const Index k = index(i, j);
      const auto ks = static_cast<std::size_t>(k);
      points_[ks] = origin + Point(i * h, domain.dim() == 2 ? j * h : 0.0);
      const Point& x = points_[ks];
      std::visit(overloaded{[&](const Interval&) {
                              kinds_[ks] = (i == 0 || i == nx_ - 1) ? NodeKind::boundary : NodeKind::interior;
                            },
                            [&](const Rectangle&) {
                              const bool edge = i == 0 || i == nx_ - 1 || j == 0 || j == ny_ - 1;
                              kinds_[ks] = edge ? NodeKind::boundary : NodeKind::interior;
                            },
                            [&](const Disk& s) {
                              const double rho = (x - s.center).norm();
                              if (rho < s.radius - 0.5 * h)
                                kinds_[ks] = NodeKind::interior;
                              else if (rho <= s.radius + 0.5 * h)
                                kinds_[ks] = NodeKind::boundary;
                            }},
                 domain.shape());
      if (kinds_[ks] == NodeKind::interior) {
        slots_[ks] = static_cast<Index>(interior_.size());
        interior_.push_back(k);
        dist_[k] = std::max(0.0, domain.distance(x));
      } else if (kinds_[ks] == NodeKind::boundary) {
        boundary_.push_back(k);
      }
    }
  }
}

Index Grid::index(int i, int j) const {
  if (i < 0 || i >= nx_ || j < 0 || j >= ny_) return -1;
  return static_cast<Index>(j) * nx_ + i;
}

double Grid::default_collar() const { return std::min(0.25 * domain_.inradius(), 10.0 * h_); }

GridPtr build_grid(const Domain& domain, double h, const GridOptions& options) {
  return std::make_shared<const Grid>(domain, h, options);
}

GridFunction::GridFunction(GridPtr grid, double fill)
    : grid_(std::move(grid)), values_(Eigen::VectorXd::Constant(grid_->size(), fill)) {}

GridFunction::GridFunction(GridPtr grid, Eigen::VectorXd values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.size() != grid_->size()) throw InvalidArgument("grid function size does not match grid");
}

void GridFunction::set_boundary(double g) {
  for (Index k : grid_->boundary()) values_[k] = g;
}

GridFunction distance_field(const GridPtr& grid) { return GridFunction(grid, grid->dist()); }

double sup_norm(const GridFunction& u) {
  const Grid& g = u.grid();
  double s = 0.0;
  for (Index k = 0; k < g.size(); ++k)
    if (g.is_active(k)) s = std::max(s, std::abs(u[k]));
  return s;
}

double inf_interior(const GridFunction& u) {
  double s = std::numeric_limits<double>::infinity();
  for (Index k : u.grid().interior()) s = std::min(s, u[k]);
  return s;
}

double sup_interior(const GridFunction& u) {
  double s = -std::numeric_limits<double>::infinity();
  for (Index k : u.grid().interior()) s = std::max(s, u[k]);
  return s;
}

void write_csv(const GridFunction& u, std::ostream& os, const std::string& value_name) {
  const Grid& g = u.grid();
  const bool two_d = g.dim() == 2;
  os << (two_d ? "x,y," : "x,") << value_name << '\n';
  const auto old_precision = os.precision(17);
  for (Index k = 0; k < g.size(); ++k) {
    if (!g.is_active(k)) continue;
    const Point& x = g.point(k);
    os << x[0] << ',';
    if (two_d) os << x[1] << ',';
    os << u[k] << '\n';
  }
  os.precision(old_precision);
}

}  // namespace demi

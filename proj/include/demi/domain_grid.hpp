#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

namespace demi {

using Index = std::ptrdiff_t;

/// Spatial point. One-dimensional domains use the first coordinate only and
/// keep the second one at zero.
using Point = Eigen::Vector2d;

struct Interval {
  double x_lo = -1.0;
  double x_hi = 1.0;
};

struct Rectangle {
  double x_lo = 0.0;
  double x_hi = 1.0;
  double y_lo = 0.0;
  double y_hi = 1.0;
};

struct Disk {
  Point center = Point::Zero();
  double radius = 1.0;
};

/// Value, gradient and Hessian of the distance to the boundary at a point.
/// `smooth` is false on the ridge set, where d is not twice differentiable.
struct DistanceJet {
  double value = 0.0;
  Eigen::Vector2d gradient = Eigen::Vector2d::Zero();
  Eigen::Matrix2d hessian = Eigen::Matrix2d::Zero();
  bool smooth = true;
};

class Domain {
 public:
  using Shape = std::variant<Interval, Rectangle, Disk>;

  static Domain interval(double x_lo, double x_hi);
  static Domain rectangle(double x_lo, double x_hi, double y_lo, double y_hi);
  static Domain disk(const Point& center, double radius);

  const Shape& shape() const { return shape_; }
  std::string kind() const;
  int dim() const;

  double diameter() const;
  /// Radius of the largest inscribed ball and its center.
  double inradius() const;
  Point incenter() const;
  /// Shortest extent over the coordinate axes.
  double shortest_extent() const;

  bool contains(const Point& x) const;
  /// Exact distance to the boundary for points inside the closure.
  double distance(const Point& x) const;
  DistanceJet distance_jet(const Point& x) const;

  /// Upper bound C1 with D^2 d <= C1 I on the boundary collar. For the disk
  /// this is 2/radius, valid where d <= radius/2; flat faces give 0.
  double semiconcavity_constant() const;

  /// Slab containing the domain along the first axis: |x1 - center| <= half_width.
  double slab_center() const;
  double slab_half_width() const;

  /// Dilation x -> t x about the origin.
  Domain scaled(double t) const;

 private:
  explicit Domain(Shape s) : shape_(std::move(s)) {}
  Shape shape_;
};

enum class NodeKind : std::uint8_t { interior, boundary, exterior };

struct GridOptions {
  int min_interior_per_axis = 8;
};

/// Uniform lattice over a domain with node classification and the exact
/// distance field. Immutable after construction.
class Grid {
 public:
  Grid(const Domain& domain, double h, const GridOptions& options = {});

  const Domain& domain() const { return domain_; }
  double h() const { return h_; }
  int dim() const { return domain_.dim(); }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  Index size() const { return static_cast<Index>(nx_) * ny_; }

  Index index(int i, int j) const;  // -1 when outside the lattice
  int ix(Index k) const { return static_cast<int>(k % nx_); }
  int iy(Index k) const { return static_cast<int>(k / nx_); }
  const Point& point(Index k) const { return points_[static_cast<std::size_t>(k)]; }
  NodeKind kind(Index k) const { return kinds_[static_cast<std::size_t>(k)]; }
  bool is_interior(Index k) const { return kind(k) == NodeKind::interior; }
  bool is_active(Index k) const { return kind(k) != NodeKind::exterior; }

  const std::vector<Index>& interior() const { return interior_; }
  const std::vector<Index>& boundary() const { return boundary_; }
  /// Position of a node in interior(), or -1.
  Index slot(Index k) const { return slots_[static_cast<std::size_t>(k)]; }

  const Eigen::VectorXd& dist() const { return dist_; }

  /// Boundary collar width used by the boundary-ratio checks.
  double default_collar() const;

 private:
  Domain domain_;
  double h_;
  int nx_ = 0;
  int ny_ = 1;
  std::vector<Point> points_;
  std::vector<NodeKind> kinds_;
  std::vector<Index> interior_;
  std::vector<Index> boundary_;
  std::vector<Index> slots_;
  Eigen::VectorXd dist_;
};

using GridPtr = std::shared_ptr<const Grid>;

GridPtr build_grid(const Domain& domain, double h, const GridOptions& options = {});

/// Real values on every lattice node. Exterior entries are carried along but
/// never read by the discrete operators.
class GridFunction {
 public:
  GridFunction() = default;
  explicit GridFunction(GridPtr grid, double fill = 0.0);
  GridFunction(GridPtr grid, Eigen::VectorXd values);

  template <typename F>
  static GridFunction from(GridPtr grid, F&& f) {
    GridFunction out(grid);
    for (Index k = 0; k < grid->size(); ++k)
      if (grid->is_active(k)) out.values_[k] = f(grid->point(k));
    return out;
  }

  const Grid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  Eigen::VectorXd& values() { return values_; }
  const Eigen::VectorXd& values() const { return values_; }
  double operator[](Index k) const { return values_[k]; }
  double& operator[](Index k) { return values_[k]; }

  void set_boundary(double g);

 private:
  GridPtr grid_;
  Eigen::VectorXd values_;
};

GridFunction distance_field(const GridPtr& grid);

double sup_norm(const GridFunction& u);
double inf_interior(const GridFunction& u);
double sup_interior(const GridFunction& u);

/// Columns x[,y],value with a header row; one active node per line.
void write_csv(const GridFunction& u, std::ostream& os, const std::string& value_name = "value");

}  // namespace demi

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "demi/domain_grid.hpp"
#include "demi/operator_core.hpp"

namespace demi {

/// How |∇u| is measured for the |∇u|^α factor.
///  one_sided_mean: per axis (|D⁺u| + |D⁻u|) / 2, nonzero at symmetric extrema.
///  centered:       per axis (u(x+h) - u(x-h)) / 2h.
enum class GradientMode { one_sided_mean, centered };

/// Differences returned by discrete_gradient.
enum class GradientKind { centered, upwind, one_sided_mean };

struct DiscretizationOptions {
  int frames = 2;    // 2D only: 1 = axis frame, 2 = axis + diagonal frame
  double eps = 0.0;  // gradient floor; 0 selects default_eps(domain)
  GradientMode gradient = GradientMode::one_sided_mean;
};

/// Lattice directions grouped into orthogonal frames.
struct Stencil {
  struct Direction {
    int di = 0;
    int dj = 0;
    double length = 0.0;  // lattice spacing along the direction
    int frame = 0;
  };
  std::vector<Direction> directions;
  int frames = 1;

  static Stencil make(int dim, int frames, double h);
};

/// One half of a second-difference stencil. The far value is
/// weights[0] u[nodes[0]] + weights[1] u[nodes[1]]; nodes[1] = -1 when unused.
struct Arm {
  double length = 0.0;
  std::array<Index, 2> nodes{-1, -1};
  std::array<double, 2> weights{0.0, 0.0};
};

inline constexpr int max_directions = 4;

/// Coefficients frozen at an iterate: the linear operator
///   L u = W (sum_d coef_d δ_d u + b · D_upwind u) + Z u
/// agrees with the nonlinear residual at that iterate.
struct FrozenCoefficients {
  Eigen::VectorXd weight;       // W = |∇u|_eps^α, per interior slot
  Eigen::VectorXd zero_order;   // Z = (c + λ) |u|^α, per interior slot
  std::vector<std::array<double, max_directions>> dir_coef;  // 0 outside the active frame

  bool operator==(const FrozenCoefficients& o) const {
    return weight == o.weight && zero_order == o.zero_order && dir_coef == o.dir_coef;
  }
};

/// Wide-stencil monotone discretization of G on a fixed grid. Coefficient
/// fields are sampled once at construction.
class DiscreteOperator {
 public:
  DiscreteOperator(GridPtr grid, OperatorSpec spec, DiscretizationOptions options = {});

  const Grid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  const OperatorSpec& spec() const { return spec_; }
  const Stencil& stencil() const { return stencil_; }
  const DiscretizationOptions& options() const { return options_; }
  double eps() const { return eps_; }
  const CoefficientBounds& bounds() const { return bounds_; }

  const Arm& arm(Index slot, int dir, int side) const {
    return arms_[static_cast<std::size_t>((slot * ndir_ + dir) * 2 + side)];
  }
  double arm_value(const Arm& arm, const Eigen::VectorXd& u) const;

  double second_diff(const Eigen::VectorXd& u, Index node, int dir) const;
  double principal(const Eigen::VectorXd& u, Index node) const;
  Vec<double> gradient(const Eigen::VectorXd& u, Index node, GradientKind kind) const;
  /// |∇u|_eps^α at a node, with |∇u| measured per options().gradient.
  double gradient_weight(const Eigen::VectorXd& u, Index node) const;
  /// G_h[u] at an interior node.
  double apply(const Eigen::VectorXd& u, Index node) const;

  double drift(Index slot, int axis) const { return b_[static_cast<std::size_t>(slot)][axis]; }
  double zero_order_coef(Index slot) const { return c_[static_cast<std::size_t>(slot)]; }

  /// Residual G_h[u] + λ|u|^α u - f on interior nodes, 0 elsewhere.
  GridFunction residual(const GridFunction& u, double lambda, const GridFunction& f) const;

  double cfl_dt(const GridFunction& u, double lambda, double safety = 0.9) const;

  FrozenCoefficients freeze(const GridFunction& u, double lambda) const;

  /// Row of the frozen linear operator at an interior slot as (node, coeff)
  /// pairs over lattice nodes, possibly repeated.
  void linear_row(const FrozenCoefficients& fc, Index slot, std::vector<std::pair<Index, double>>& out) const;

  /// Row of the Jacobian of the residual at u, where fc = freeze(u, λ).
  /// Policy choices (Pucci frame and signs, upwind side) are held fixed.
  void jacobian_row(const FrozenCoefficients& fc, const Eigen::VectorXd& u, Index slot,
                    std::vector<std::pair<Index, double>>& out) const;

  /// Every lattice node a row can reference, whatever the frozen policy.
  void row_pattern(Index slot, std::vector<Index>& out) const;

 private:
  double frame_sum(const Eigen::VectorXd& u, Index slot, int frame, bool plus) const;

  GridPtr grid_;
  OperatorSpec spec_;
  DiscretizationOptions options_;
  Stencil stencil_;
  double eps_ = 0.0;
  int ndir_ = 1;
  CoefficientBounds bounds_;
  std::vector<Arm> arms_;
  std::vector<double> a_iso_;
  std::vector<Eigen::Vector2d> b_;
  std::vector<double> c_;
};

double second_diff(const GridFunction& u, Index node, int dir, const DiscreteOperator& op);
double discrete_principal(const GridFunction& u, Index node, const DiscreteOperator& op);
Vec<double> discrete_gradient(const GridFunction& u, Index node, GradientKind kind, const DiscreteOperator& op);
GridFunction assemble_G(const GridFunction& u, const DiscreteOperator& op, double lambda, const GridFunction& f);
double cfl_dt(const GridFunction& u, const DiscreteOperator& op, double lambda = 0.0);

}  // namespace demi

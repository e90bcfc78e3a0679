#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "demi/domain_grid.hpp"

namespace demi {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1, 0, 2, 1>;

/// Symmetric 1x1 or 2x2 matrix (Hessians, Pucci arguments).
template <typename Scalar>
using SymMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, 0, 2, 2>;

enum class PucciSign { plus, minus };

enum class Principal { pucci_plus, pucci_minus, isotropic };

std::string to_string(Principal p);
Principal principal_from_string(const std::string& s);

/// sign(u) |u|^{1+alpha}, i.e. |u|^alpha u extended by 0 at u = 0.
template <typename Scalar>
Scalar signed_power(Scalar u, Scalar alpha) {
  using std::abs;
  using std::pow;
  if (u == Scalar(0)) return Scalar(0);
  const Scalar m = pow(abs(u), Scalar(1) + alpha);
  return u > Scalar(0) ? m : -m;
}

/// Eigenvalues of a symmetric 1x1 or 2x2 matrix, ascending.
template <typename Derived>
Vec<typename Derived::Scalar> symmetric_eigenvalues(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  Vec<Scalar> ev(m.rows());
  if (m.rows() == 1) {
    ev[0] = m(0, 0);
    return ev;
  }
  const Scalar mean = (m(0, 0) + m(1, 1)) / Scalar(2);
  const Scalar half_diff = (m(0, 0) - m(1, 1)) / Scalar(2);
  using std::hypot;
  const Scalar rad = hypot(half_diff, m(0, 1));
  ev[0] = mean - rad;
  ev[1] = mean + rad;
  return ev;
}

/// Spectral split M = M⁺ - M⁻ with both parts positive semidefinite and
/// M⁺ M⁻ = 0.
template <typename Derived>
std::pair<SymMat<typename Derived::Scalar>, SymMat<typename Derived::Scalar>> split_signed(
    const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  const Index n = m.rows();
  SymMat<Scalar> plus = SymMat<Scalar>::Zero(n, n);
  SymMat<Scalar> minus = SymMat<Scalar>::Zero(n, n);
  if (n == 1) {
    if (m(0, 0) > Scalar(0))
      plus(0, 0) = m(0, 0);
    else
      minus(0, 0) = -m(0, 0);
    return {plus, minus};
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<Scalar, 2, 2>> es;
  es.computeDirect(Eigen::Matrix<Scalar, 2, 2>(m));
  for (int i = 0; i < 2; ++i) {
    const Scalar lam = es.eigenvalues()[i];
    const Eigen::Matrix<Scalar, 2, 1> v = es.eigenvectors().col(i);
    if (lam > Scalar(0))
      plus += lam * v * v.transpose();
    else
      minus -= lam * v * v.transpose();
  }
  return {plus, minus};
}

/// Pucci extremal operator: plus gives A tr M⁺ - a tr M⁻, minus gives
/// a tr M⁺ - A tr M⁻.
template <typename Derived>
typename Derived::Scalar pucci(const Eigen::MatrixBase<Derived>& m, typename Derived::Scalar a,
                               typename Derived::Scalar A, PucciSign sign) {
  using Scalar = typename Derived::Scalar;
  const Vec<Scalar> ev = symmetric_eigenvalues(m);
  Scalar tr_plus(0), tr_minus(0);
  for (Index i = 0; i < ev.size(); ++i) {
    if (ev[i] > Scalar(0))
      tr_plus += ev[i];
    else
      tr_minus -= ev[i];
  }
  return sign == PucciSign::plus ? A * tr_plus - a * tr_minus : a * tr_plus - A * tr_minus;
}

/// Scalar coefficient field on the domain: closed-form built-ins or a
/// per-node table.
class Field {
 public:
  struct Constant {
    double value = 0.0;
  };
  struct Linear {
    double value = 0.0;
    Eigen::Vector2d gradient = Eigen::Vector2d::Zero();
  };
  struct Quadratic {
    double value = 0.0;
    Eigen::Vector2d gradient = Eigen::Vector2d::Zero();
    Eigen::Matrix2d hessian = Eigen::Matrix2d::Zero();
  };
  /// value + slope * |x - center|^power
  struct Radial {
    Eigen::Vector2d center = Eigen::Vector2d::Zero();
    double value = 0.0;
    double slope = 0.0;
    double power = 1.0;
  };
  struct Table {
    std::shared_ptr<const std::map<std::pair<std::int64_t, std::int64_t>, double>> values;
    double quantum = 1e-6;
    std::string source;
  };
  using Kind = std::variant<Constant, Linear, Quadratic, Radial, Table>;

  Field() : kind_(Constant{0.0}) {}
  static Field constant(double v) { return Field(Constant{v}); }
  static Field linear(double value, const Eigen::Vector2d& gradient) { return Field(Linear{value, gradient}); }
  static Field quadratic(double value, const Eigen::Vector2d& gradient, const Eigen::Matrix2d& hessian) {
    return Field(Quadratic{value, gradient, hessian});
  }
  static Field radial(const Eigen::Vector2d& center, double value, double slope, double power) {
    return Field(Radial{center, value, slope, power});
  }
  /// Table keyed by node coordinates; lookups round to `quantum`.
  static Field table(const std::vector<Point>& points, const std::vector<double>& values,
                     std::string source = {}, double quantum = 1e-6);

  double operator()(const Point& x) const;
  bool is_constant() const { return std::holds_alternative<Constant>(kind_); }
  double constant_value() const;
  const Kind& kind() const { return kind_; }

 private:
  explicit Field(Kind k) : kind_(std::move(k)) {}
  Kind kind_;
};

struct OperatorSpec {
  double alpha = 0.0;
  Principal principal = Principal::isotropic;
  double a = 1.0;  // Pucci ellipticity pair
  double A = 1.0;
  Field a_field = Field::constant(1.0);  // isotropic coefficient a(x)
  std::vector<Field> b;                  // drift components; empty means b = 0
  Field c = Field::constant(0.0);

  Eigen::Vector2d drift(const Point& x) const {
    Eigen::Vector2d v = Eigen::Vector2d::Zero();
    for (std::size_t i = 0; i < b.size() && i < 2; ++i) v[static_cast<Index>(i)] = b[i](x);
    return v;
  }
};

/// Sup/inf of the coefficient fields over the active nodes of a grid.
struct CoefficientBounds {
  double b_sup = 0.0;
  double c_sup = 0.0;  // sup |c|
  double c_max = 0.0;  // sup c
  double c_min = 0.0;  // inf c
  double a_min = 1.0;  // ellipticity bounds of the principal part
  double a_max = 1.0;
};

CoefficientBounds coefficient_bounds(const OperatorSpec& spec, const Grid& grid);

/// Checks coefficient data against the supported family. Throws
/// InvalidArgument; returns advisory warnings.
std::vector<std::string> validate(const OperatorSpec& spec, const Grid& grid);

inline double default_eps(const Domain& domain) { return 1e-8 / domain.diameter(); }

template <typename Scalar>
Scalar floored_norm(const Vec<Scalar>& p, Scalar eps) {
  using std::max;
  return max(Scalar(p.norm()), eps);
}

template <typename Scalar>
Scalar principal_part(const OperatorSpec& spec, const Point& x, const SymMat<Scalar>& X) {
  switch (spec.principal) {
    case Principal::pucci_plus:
      return pucci(X, Scalar(spec.a), Scalar(spec.A), PucciSign::plus);
    case Principal::pucci_minus:
      return pucci(X, Scalar(spec.a), Scalar(spec.A), PucciSign::minus);
    case Principal::isotropic:
      break;
  }
  return Scalar(spec.a_field(x)) * X.trace();
}

/// F(x,p,X) = |p|_eps^alpha * principal(X) with |p|_eps = max(|p|, eps).
template <typename Scalar>
Scalar eval_F(const OperatorSpec& spec, const Point& x, const Vec<Scalar>& p, const SymMat<Scalar>& X,
              Scalar eps) {
  using std::pow;
  return pow(floored_norm(p, eps), Scalar(spec.alpha)) * principal_part(spec, x, X);
}

/// G(x,u,p,X) = F + b(x).p |p|_eps^alpha + c(x) |u|^alpha u.
template <typename Scalar>
Scalar eval_G(const OperatorSpec& spec, const Point& x, Scalar u, const Vec<Scalar>& p, const SymMat<Scalar>& X,
              Scalar eps) {
  using std::pow;
  const Scalar weight = pow(floored_norm(p, eps), Scalar(spec.alpha));
  const Eigen::Vector2d b = spec.drift(x);
  Scalar drift(0);
  for (Index i = 0; i < p.size(); ++i) drift += Scalar(b[i]) * p[i];
  return weight * (principal_part(spec, x, X) + drift) +
         Scalar(spec.c(x)) * signed_power(u, Scalar(spec.alpha));
}

/// Spec of -F(x,p,-X) + lower-order terms: Pucci plus and minus trade
/// places, isotropic parts are unchanged.
OperatorSpec flip_operator(const OperatorSpec& spec);

/// Samples (x,p,M) on the grid's active nodes and checks the Pucci sandwich
/// around F. Throws HypothesisViolated carrying the witness sample.
bool sandwich_check(const OperatorSpec& spec, const Grid& grid, int samples, std::uint64_t seed,
                    double eps = 1e-8);

}  // namespace demi

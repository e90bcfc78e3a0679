#include "demi/operator_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "demi/errors.hpp"

namespace demi {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::pair<std::int64_t, std::int64_t> table_key(const Point& x, double quantum) {
  return {std::llround(x[0] / quantum), std::llround(x[1] / quantum)};
}

}  // namespace

std::string to_string(Principal p) {
  switch (p) {
    case Principal::pucci_plus:
      return "pucci_plus";
    case Principal::pucci_minus:
      return "pucci_minus";
    case Principal::isotropic:
      return "isotropic";
  }
  return "isotropic";
}

Principal principal_from_string(const std::string& s) {
  if (s == "pucci_plus") return Principal::pucci_plus;
  if (s == "pucci_minus") return Principal::pucci_minus;
  if (s == "isotropic") return Principal::isotropic;
  throw InvalidArgument("unknown principal part '" + s + "'");
}

Field Field::table(const std::vector<Point>& points, const std::vector<double>& values, std::string source,
                   double quantum) {
  if (points.size() != values.size()) throw InvalidArgument("table field: points and values differ in length");
  auto map = std::make_shared<std::map<std::pair<std::int64_t, std::int64_t>, double>>();
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!std::isfinite(values[i])) throw InvalidArgument("table field: non-finite value");
    (*map)[table_key(points[i], quantum)] = values[i];
  }
  return Field(Table{std::move(map), quantum, std::move(source)});
}

double Field::operator()(const Point& x) const {
  return std::visit(
      overloaded{
          [](const Constant& f) { return f.value; },
          [&](const Linear& f) { return f.value + f.gradient.dot(x); },
          [&](const Quadratic& f) { return f.value + f.gradient.dot(x) + 0.5 * x.dot(f.hessian * x); },
          [&](const Radial& f) { return f.value + f.slope * std::pow((x - f.center).norm(), f.power); },
          [&](const Table& f) {
            const auto it = f.values->find(table_key(x, f.quantum));
            if (it == f.values->end()) {
              std::ostringstream os;
              os << "table field" << (f.source.empty() ? "" : " '" + f.source + "'") << " has no entry at ("
                 << x[0] << ", " << x[1] << ")";
              throw InvalidArgument(os.str());
            }
            return it->second;
          },
      },
      kind_);
}

double Field::constant_value() const {
  if (const auto* c = std::get_if<Constant>(&kind_)) return c->value;
  throw InvalidArgument("field is not constant");
}

CoefficientBounds coefficient_bounds(const OperatorSpec& spec, const Grid& grid) {
  CoefficientBounds cb;
  cb.c_max = -std::numeric_limits<double>::infinity();
  cb.c_min = std::numeric_limits<double>::infinity();
  double af_min = std::numeric_limits<double>::infinity();
  double af_max = -std::numeric_limits<double>::infinity();
  for (Index k = 0; k < grid.size(); ++k) {
    if (!grid.is_active(k)) continue;
    const Point& x = grid.point(k);
    cb.b_sup = std::max(cb.b_sup, spec.drift(x).head(grid.dim()).norm());
    const double c = spec.c(x);
    cb.c_max = std::max(cb.c_max, c);
    cb.c_min = std::min(cb.c_min, c);
    cb.c_sup = std::max(cb.c_sup, std::abs(c));
    if (spec.principal == Principal::isotropic) {
      const double a = spec.a_field(x);
      af_min = std::min(af_min, a);
      af_max = std::max(af_max, a);
    }
  }
  if (spec.principal == Principal::isotropic) {
    cb.a_min = af_min;
    cb.a_max = af_max;
  } else {
    cb.a_min = spec.a;
    cb.a_max = spec.A;
  }
  return cb;
}

std::vector<std::string> validate(const OperatorSpec& spec, const Grid& grid) {
  std::vector<std::string> warnings;
  if (!(spec.alpha > -1.0) || !(spec.alpha <= 4.0))
    throw InvalidArgument("alpha must lie in (-1, 4], got " + std::to_string(spec.alpha));
  if (spec.principal != Principal::isotropic && !(spec.a > 0.0 && spec.a <= spec.A && std::isfinite(spec.A)))
    throw InvalidArgument("Pucci pair must satisfy 0 < a <= A");
  if (spec.b.size() > static_cast<std::size_t>(grid.dim()))
    throw InvalidArgument("drift has more components than the domain dimension");
  const CoefficientBounds cb = coefficient_bounds(spec, grid);
  if (!std::isfinite(cb.b_sup) || !std::isfinite(cb.c_sup)) throw InvalidArgument("coefficients are not finite on the grid");
  if (spec.principal == Principal::isotropic && !(cb.a_min > 0.0 && std::isfinite(cb.a_max)))
    throw InvalidArgument("isotropic coefficient a(x) must be positive and finite on the grid");
  if (spec.alpha < 0.0) {
    const bool constant_b = std::all_of(spec.b.begin(), spec.b.end(), [](const Field& f) { return f.is_constant(); });
    if (!constant_b) warnings.push_back("alpha < 0 with non-constant drift: b should be Holder of exponent 1+alpha");
  }
  return warnings;
}

OperatorSpec flip_operator(const OperatorSpec& spec) {
  OperatorSpec out = spec;
  if (spec.principal == Principal::pucci_plus)
    out.principal = Principal::pucci_minus;
  else if (spec.principal == Principal::pucci_minus)
    out.principal = Principal::pucci_plus;
  return out;
}

bool sandwich_check(const OperatorSpec& spec, const Grid& grid, int samples, std::uint64_t seed, double eps) {
  if (samples <= 0) throw InvalidArgument("sandwich_check needs a positive sample budget");
  const CoefficientBounds cb = coefficient_bounds(spec, grid);
  const double a = cb.a_min;
  const double A = cb.a_max;
  const int n = grid.dim();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Index> active;
  for (Index k = 0; k < grid.size(); ++k)
    if (grid.is_active(k)) active.push_back(k);
  std::uniform_int_distribution<std::size_t> pick(0, active.size() - 1);

  for (int s = 0; s < samples; ++s) {
    const Point& x = grid.point(active[pick(rng)]);
    Vec<double> p(n);
    SymMat<double> M(n, n);
    for (int i = 0; i < n; ++i) p[i] = gauss(rng);
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) M(i, j) = M(j, i) = gauss(rng);
    const double w = std::pow(floored_norm(p, eps), spec.alpha);
    const double value = eval_F(spec, x, p, M, eps);
    const double lo = w * pucci(M, a, A, PucciSign::minus);
    const double hi = w * pucci(M, a, A, PucciSign::plus);
    const double tol = 1e-12 * std::max({1.0, std::abs(lo), std::abs(hi)});
    if (value < lo - tol || value > hi + tol) {
      std::ostringstream os;
      os.precision(17);
      os << "Pucci sandwich violated at x=(" << x[0] << ", " << x[1] << "), p=" << p.transpose()
         << ", M=" << M.reshaped().transpose() << ": " << lo << " <= " << value << " <= " << hi << " fails";
      throw HypothesisViolated(os.str());
    }
  }
  return true;
}

}  // namespace demi

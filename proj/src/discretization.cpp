#include "demi/discretization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "demi/errors.hpp"

namespace demi {

namespace {

// Floor for |u| in |u|^α when α < 0, relative to the iterate's size.
double power_floor(double sup_u) { return 1e-12 * std::max(1.0, sup_u); }

double abs_power(double u, double alpha, double floor) {
  if (alpha == 0.0) return 1.0;
  const double m = std::abs(u);
  if (alpha < 0.0) return std::pow(std::max(m, floor), alpha);
  return std::pow(m, alpha);
}

}  // namespace

Stencil Stencil::make(int dim, int frames, double h) {
  if (frames != 1 && frames != 2) throw InvalidArgument("stencil frames must be 1 or 2");
  Stencil s;
  if (dim == 1) {
    s.directions.push_back({1, 0, h, 0});
    s.frames = 1;
    return s;
  }
  s.directions.push_back({1, 0, h, 0});
  s.directions.push_back({0, 1, h, 0});
  s.frames = frames;
  if (frames == 2) {
    s.directions.push_back({1, 1, h * std::sqrt(2.0), 1});
    s.directions.push_back({1, -1, h * std::sqrt(2.0), 1});
  }
  return s;
}

DiscreteOperator::DiscreteOperator(GridPtr grid, OperatorSpec spec, DiscretizationOptions options)
    : grid_(std::move(grid)), spec_(std::move(spec)), options_(options) {
  const Grid& g = *grid_;
  stencil_ = Stencil::make(g.dim(), options_.frames, g.h());
  ndir_ = static_cast<int>(stencil_.directions.size());
  eps_ = options_.eps > 0.0 ? options_.eps : default_eps(g.domain());
  bounds_ = coefficient_bounds(spec_, g);

  const auto& interior = g.interior();
  const auto n = interior.size();
  arms_.resize(n * static_cast<std::size_t>(ndir_) * 2);
  a_iso_.resize(n);
  b_.resize(n);
  c_.resize(n);

  const Disk* disk = std::get_if<Disk>(&g.domain().shape());
  for (std::size_t s = 0; s < n; ++s) {
    const Index k = interior[s];
    const Point& x = g.point(k);
    a_iso_[s] = spec_.principal == Principal::isotropic ? spec_.a_field(x) : 0.0;
    b_[s] = spec_.drift(x);
    if (g.dim() == 1) b_[s][1] = 0.0;
    c_[s] = spec_.c(x);
    for (int d = 0; d < ndir_; ++d) {
      const auto& dir = stencil_.directions[static_cast<std::size_t>(d)];
      for (int side = 0; side < 2; ++side) {
        const int sg = side == 0 ? 1 : -1;
        Arm& arm = arms_[(s * static_cast<std::size_t>(ndir_) + static_cast<std::size_t>(d)) * 2 +
                         static_cast<std::size_t>(side)];
        const Index nb = g.index(g.ix(k) + sg * dir.di, g.iy(k) + sg * dir.dj);
        if (nb >= 0 && g.is_active(nb)) {
          arm.length = dir.length;
          arm.nodes = {nb, -1};
          arm.weights = {1.0, 0.0};
          continue;
        }
        if (!disk) throw std::logic_error("stencil arm leaves a polygonal domain");
        // Shorten the arm to the circle and interpolate the two nearest
        // boundary nodes at the crossing point.
        const Eigen::Vector2d v = Eigen::Vector2d(sg * dir.di, sg * dir.dj) * g.h();
        const Eigen::Vector2d y = x - disk->center;
        const double vv = v.squaredNorm();
        const double yv = y.dot(v);
        const double t = (-yv + std::sqrt(yv * yv - vv * (y.squaredNorm() - disk->radius * disk->radius))) / vv;
        const Point p = x + t * v;
        Index best0 = -1, best1 = -1;
        double d0 = std::numeric_limits<double>::infinity(), d1 = d0;
        for (Index bk : g.boundary()) {
          const double dist = (g.point(bk) - p).norm();
          if (dist < d0) {
            best1 = best0;
            d1 = d0;
            best0 = bk;
            d0 = dist;
          } else if (dist < d1) {
            best1 = bk;
            d1 = dist;
          }
        }
        arm.length = t * std::sqrt(vv);
        if (d0 == 0.0 || best1 < 0) {
          arm.nodes = {best0, -1};
          arm.weights = {1.0, 0.0};
        } else {
          arm.nodes = {best0, best1};
          arm.weights = {d1 / (d0 + d1), d0 / (d0 + d1)};
        }
      }
    }
  }
}

double DiscreteOperator::arm_value(const Arm& arm, const Eigen::VectorXd& u) const {
  double v = arm.weights[0] * u[arm.nodes[0]];
  if (arm.nodes[1] >= 0) v += arm.weights[1] * u[arm.nodes[1]];
  return v;
}

double DiscreteOperator::second_diff(const Eigen::VectorXd& u, Index node, int dir) const {
  const Index s = grid_->slot(node);
  if (s < 0) throw InvalidArgument("second_diff requires an interior node");
  const Arm& p = arm(s, dir, 0);
  const Arm& m = arm(s, dir, 1);
  const double u0 = u[node];
  return 2.0 / (p.length + m.length) * ((arm_value(p, u) - u0) / p.length - (u0 - arm_value(m, u)) / m.length);
}

double DiscreteOperator::frame_sum(const Eigen::VectorXd& u, Index slot, int frame, bool plus) const {
  const Index node = grid_->interior()[static_cast<std::size_t>(slot)];
  const double hi = plus ? spec_.A : spec_.a;
  const double lo = plus ? spec_.a : spec_.A;
  double sum = 0.0;
  for (int d = 0; d < ndir_; ++d) {
    if (stencil_.directions[static_cast<std::size_t>(d)].frame != frame) continue;
    const double delta = second_diff(u, node, d);
    sum += delta > 0.0 ? hi * delta : lo * delta;
  }
  return sum;
}

double DiscreteOperator::principal(const Eigen::VectorXd& u, Index node) const {
  const Index s = grid_->slot(node);
  if (s < 0) throw InvalidArgument("discrete_principal requires an interior node");
  switch (spec_.principal) {
    case Principal::isotropic: {
      double sum = 0.0;
      for (int d = 0; d < ndir_; ++d)
        if (stencil_.directions[static_cast<std::size_t>(d)].frame == 0) sum += second_diff(u, node, d);
      return a_iso_[static_cast<std::size_t>(s)] * sum;
    }
    case Principal::pucci_plus: {
      double best = -std::numeric_limits<double>::infinity();
      for (int f = 0; f < stencil_.frames; ++f) best = std::max(best, frame_sum(u, s, f, true));
      return best;
    }
    case Principal::pucci_minus: {
      double best = std::numeric_limits<double>::infinity();
      for (int f = 0; f < stencil_.frames; ++f) best = std::min(best, frame_sum(u, s, f, false));
      return best;
    }
  }
  return 0.0;
}

Vec<double> DiscreteOperator::gradient(const Eigen::VectorXd& u, Index node, GradientKind kind) const {
  const Grid& g = *grid_;
  const Index s = g.slot(node);
  if (s < 0) throw InvalidArgument("discrete_gradient requires an interior node");
  const int dim = g.dim();
  const double h = g.h();
  Vec<double> p(dim);
  const double u0 = u[node];
  for (int i = 0; i < dim; ++i) {
    const Index fwd = g.index(g.ix(node) + (i == 0), g.iy(node) + (i == 1));
    const Index bwd = g.index(g.ix(node) - (i == 0), g.iy(node) - (i == 1));
    const double dp = (u[fwd] - u0) / h;
    const double dm = (u0 - u[bwd]) / h;
    switch (kind) {
      case GradientKind::centered:
        p[i] = 0.5 * (dp + dm);
        break;
      case GradientKind::upwind: {
        const double b = b_[static_cast<std::size_t>(s)][i];
        p[i] = b > 0.0 ? dp : (b < 0.0 ? dm : 0.5 * (dp + dm));
        break;
      }
      case GradientKind::one_sided_mean:
        p[i] = 0.5 * (std::abs(dp) + std::abs(dm));
        break;
    }
  }
  return p;
}

double DiscreteOperator::gradient_weight(const Eigen::VectorXd& u, Index node) const {
  if (spec_.alpha == 0.0) return 1.0;
  const GradientKind kind =
      options_.gradient == GradientMode::centered ? GradientKind::centered : GradientKind::one_sided_mean;
  return std::pow(floored_norm(gradient(u, node, kind), eps_), spec_.alpha);
}

double DiscreteOperator::apply(const Eigen::VectorXd& u, Index node) const {
  const Index s = grid_->slot(node);
  const double w = gradient_weight(u, node);
  double drift = 0.0;
  const Vec<double> p = gradient(u, node, GradientKind::upwind);
  for (Index i = 0; i < p.size(); ++i) drift += b_[static_cast<std::size_t>(s)][i] * p[i];
  return w * (principal(u, node) + drift) + c_[static_cast<std::size_t>(s)] * signed_power(u[node], spec_.alpha);
}

GridFunction DiscreteOperator::residual(const GridFunction& u, double lambda, const GridFunction& f) const {
  GridFunction r(grid_, 0.0);
  for (Index k : grid_->interior())
    r[k] = apply(u.values(), k) + lambda * signed_power(u[k], spec_.alpha) - f[k];
  return r;
}

double DiscreteOperator::cfl_dt(const GridFunction& u, double lambda, double safety) const {
  const Grid& g = *grid_;
  const double floor = power_floor(sup_norm(u));
  const double h = g.h();
  double worst = 0.0;
  double worst_w = 0.0;
  for (std::size_t s = 0; s < g.interior().size(); ++s) {
    const Index k = g.interior()[s];
    const double w = gradient_weight(u.values(), k);
    worst_w = std::max(worst_w, w);
    double diag = 0.0;
    for (int f = 0; f < stencil_.frames; ++f) {
      double sum = 0.0;
      for (int d = 0; d < ndir_; ++d) {
        if (stencil_.directions[static_cast<std::size_t>(d)].frame != f) continue;
        const double lp = arm(static_cast<Index>(s), d, 0).length;
        const double lm = arm(static_cast<Index>(s), d, 1).length;
        sum += 2.0 / (lp * lm);
      }
      diag = std::max(diag, sum);
      if (spec_.principal == Principal::isotropic) break;
    }
    const double top = spec_.principal == Principal::isotropic ? a_iso_[s] : spec_.A;
    const double rate = w * (top * diag + (std::abs(b_[s][0]) + std::abs(b_[s][1])) / h) +
                        std::abs(c_[s] + lambda) * (spec_.alpha + 1.0) * abs_power(u[k], spec_.alpha, floor);
    worst = std::max(worst, rate);
  }
  const double dt = worst > 0.0 ? safety / worst : std::numeric_limits<double>::infinity();
  if (!(dt > 1e-200)) {
    std::ostringstream os;
    os << "explicit step underflows: dt = " << dt << ", max |grad u|^alpha = " << worst_w;
    throw DegenerateStep(os.str());
  }
  return dt;
}

FrozenCoefficients DiscreteOperator::freeze(const GridFunction& u, double lambda) const {
  const Grid& g = *grid_;
  const auto n = g.interior().size();
  FrozenCoefficients fc;
  fc.weight.resize(static_cast<Index>(n));
  fc.zero_order.resize(static_cast<Index>(n));
  fc.dir_coef.assign(n, {});
  const double floor = power_floor(sup_norm(u));
  const Eigen::VectorXd& v = u.values();
  for (std::size_t s = 0; s < n; ++s) {
    const Index k = g.interior()[s];
    const auto si = static_cast<Index>(s);
    fc.weight[si] = gradient_weight(v, k);
    fc.zero_order[si] = (c_[s] + lambda) * abs_power(v[k], spec_.alpha, floor);
    auto& coef = fc.dir_coef[s];
    coef.fill(0.0);
    if (spec_.principal == Principal::isotropic) {
      for (int d = 0; d < ndir_; ++d)
        if (stencil_.directions[static_cast<std::size_t>(d)].frame == 0) coef[static_cast<std::size_t>(d)] = a_iso_[s];
      continue;
    }
    const bool plus = spec_.principal == Principal::pucci_plus;
    int best = 0;
    double best_val = frame_sum(v, si, 0, plus);
    for (int f = 1; f < stencil_.frames; ++f) {
      const double val = frame_sum(v, si, f, plus);
      if (plus ? val > best_val : val < best_val) {
        best = f;
        best_val = val;
      }
    }
    const double hi = plus ? spec_.A : spec_.a;
    const double lo = plus ? spec_.a : spec_.A;
    for (int d = 0; d < ndir_; ++d) {
      if (stencil_.directions[static_cast<std::size_t>(d)].frame != best) continue;
      coef[static_cast<std::size_t>(d)] = second_diff(v, k, d) > 0.0 ? hi : lo;
    }
  }
  return fc;
}

void DiscreteOperator::linear_row(const FrozenCoefficients& fc, Index slot,
                                  std::vector<std::pair<Index, double>>& out) const {
  out.clear();
  const Grid& g = *grid_;
  const Index k = g.interior()[static_cast<std::size_t>(slot)];
  const double w = fc.weight[slot];
  double center = fc.zero_order[slot];
  const auto& coef = fc.dir_coef[static_cast<std::size_t>(slot)];
  for (int d = 0; d < ndir_; ++d) {
    const double cd = coef[static_cast<std::size_t>(d)];
    if (cd == 0.0) continue;
    const Arm& p = arm(slot, d, 0);
    const Arm& m = arm(slot, d, 1);
    const double scale = w * cd * 2.0 / (p.length + m.length);
    for (const Arm* a : {&p, &m}) {
      const double c = scale / a->length;
      center -= c;
      for (int j = 0; j < 2; ++j)
        if (a->nodes[static_cast<std::size_t>(j)] >= 0)
          out.emplace_back(a->nodes[static_cast<std::size_t>(j)], c * a->weights[static_cast<std::size_t>(j)]);
    }
  }
  const double h = g.h();
  for (int i = 0; i < g.dim(); ++i) {
    const double b = b_[static_cast<std::size_t>(slot)][i];
    if (b > 0.0) {
      out.emplace_back(g.index(g.ix(k) + (i == 0), g.iy(k) + (i == 1)), w * b / h);
      center -= w * b / h;
    } else if (b < 0.0) {
      out.emplace_back(g.index(g.ix(k) - (i == 0), g.iy(k) - (i == 1)), -w * b / h);
      center += w * b / h;
    }
  }
  out.emplace_back(k, center);
}

void DiscreteOperator::jacobian_row(const FrozenCoefficients& fc, const Eigen::VectorXd& u, Index slot,
                                    std::vector<std::pair<Index, double>>& out) const {
  linear_row(fc, slot, out);
  const Grid& g = *grid_;
  const Index k = g.interior()[static_cast<std::size_t>(slot)];
  // d/du of Z u with Z = (c + λ)|u|^α is (1 + α) Z.
  out.emplace_back(k, spec_.alpha * fc.zero_order[slot]);
  if (spec_.alpha == 0.0) return;
  const GradientKind kind =
      options_.gradient == GradientMode::centered ? GradientKind::centered : GradientKind::one_sided_mean;
  const Vec<double> p = gradient(u, k, kind);
  const double norm = p.norm();
  if (!(norm > eps_)) return;
  // Chain rule through W = |p|^α: dW = α |p|^(α-2) p · dp, times the
  // bracket it multiplies.
  double drift = 0.0;
  const Vec<double> pu = gradient(u, k, GradientKind::upwind);
  for (Index i = 0; i < pu.size(); ++i) drift += b_[static_cast<std::size_t>(slot)][i] * pu[i];
  const double scale = spec_.alpha * std::pow(norm, spec_.alpha - 2.0) * (principal(u, k) + drift);
  const double h = g.h();
  const double u0 = u[k];
  for (int i = 0; i < g.dim(); ++i) {
    const Index fwd = g.index(g.ix(k) + (i == 0), g.iy(k) + (i == 1));
    const Index bwd = g.index(g.ix(k) - (i == 0), g.iy(k) - (i == 1));
    const double c = scale * p[i] / h;
    if (kind == GradientKind::centered) {
      out.emplace_back(fwd, 0.5 * c);
      out.emplace_back(bwd, -0.5 * c);
    } else {
      const double sp = u[fwd] > u0 ? 0.5 : (u[fwd] < u0 ? -0.5 : 0.0);
      const double sm = u0 > u[bwd] ? 0.5 : (u0 < u[bwd] ? -0.5 : 0.0);
      out.emplace_back(fwd, c * sp);
      out.emplace_back(bwd, -c * sm);
      out.emplace_back(k, c * (sm - sp));
    }
  }
}

void DiscreteOperator::row_pattern(Index slot, std::vector<Index>& out) const {
  out.clear();
  const Grid& g = *grid_;
  const Index k = g.interior()[static_cast<std::size_t>(slot)];
  out.push_back(k);
  for (int i = 0; i < g.dim(); ++i)
    for (int sgn : {-1, 1}) {
      const Index nb = g.index(g.ix(k) + sgn * (i == 0), g.iy(k) + sgn * (i == 1));
      if (nb >= 0) out.push_back(nb);
    }
  for (int d = 0; d < ndir_; ++d)
    for (int side = 0; side < 2; ++side)
      for (Index nb : arm(slot, d, side).nodes)
        if (nb >= 0) out.push_back(nb);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
}

double second_diff(const GridFunction& u, Index node, int dir, const DiscreteOperator& op) {
  return op.second_diff(u.values(), node, dir);
}

double discrete_principal(const GridFunction& u, Index node, const DiscreteOperator& op) {
  return op.principal(u.values(), node);
}

Vec<double> discrete_gradient(const GridFunction& u, Index node, GradientKind kind, const DiscreteOperator& op) {
  return op.gradient(u.values(), node, kind);
}

GridFunction assemble_G(const GridFunction& u, const DiscreteOperator& op, double lambda, const GridFunction& f) {
  return op.residual(u, lambda, f);
}

double cfl_dt(const GridFunction& u, const DiscreteOperator& op, double lambda) {
  return op.cfl_dt(u, lambda);
}

}  // namespace demi

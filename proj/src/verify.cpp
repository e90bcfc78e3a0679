#include "demi/verify.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "demi/errors.hpp"

namespace demi {

void PrincipleReport::premise(bool ok, const std::string& what) {
  if (ok) return;
  hypotheses_met = false;
  failed_premises.push_back(what);
}

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

double resolve_collar(const Grid& g, double collar) { return collar > 0.0 ? collar : g.default_collar(); }

void set_witness(PrincipleReport& rep, const Grid& g, Index k) {
  rep.witness_index = k;
  if (k >= 0) rep.witness = g.point(k);
}

/// G_h[u] + λ|u|^α u at interior nodes (zero elsewhere) and the scale of
/// its terms.
struct Residual {
  Eigen::VectorXd r;
  double scale = 1.0;
};

Residual interior_residual(const DiscreteOperator& op, const GridFunction& u, double lambda) {
  const Grid& g = op.grid();
  Residual out;
  out.r = Eigen::VectorXd::Zero(g.size());
  for (Index k : g.interior()) {
    const double gu = op.apply(u.values(), k);
    const double zu = lambda * signed_power(u[k], op.spec().alpha);
    out.r[k] = gu + zu;
    out.scale = std::max({out.scale, std::abs(gu), std::abs(zu)});
  }
  return out;
}

/// Largest amount by which `sign * r` exceeds the slack, over interior nodes.
double residual_excess(const Grid& g, const Eigen::VectorXd& r, double sign, double slack, Index* where) {
  double worst = 0.0;
  for (Index k : g.interior()) {
    const double e = sign * r[k] - slack;
    if (e > worst) {
      worst = e;
      if (where) *where = k;
    }
  }
  return worst;
}

bool is_finite_on_active(const GridFunction& u) {
  const Grid& g = u.grid();
  for (Index k = 0; k < g.size(); ++k)
    if (g.is_active(k) && !std::isfinite(u[k])) return false;
  return true;
}

struct RatioStats {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  Index lo_at = -1;
  Index hi_at = -1;
  int nodes = 0;
};

template <typename Denominator>
RatioStats collar_ratios(const GridFunction& u, double collar, Denominator&& den) {
  const Grid& g = u.grid();
  RatioStats s;
  for (Index k : g.interior()) {
    const double d = g.dist()[k];
    if (!(d > 0.0) || d > collar) continue;
    const double q = u[k] / den(d);
    ++s.nodes;
    if (q < s.lo) {
      s.lo = q;
      s.lo_at = k;
    }
    if (q > s.hi) {
      s.hi = q;
      s.hi_at = k;
    }
  }
  return s;
}

void ratio_floor_verdict(PrincipleReport& rep, const RatioStats& s) {
  rep.tolerance = 0.0;
  if (s.nodes == 0 || !(s.hi > 0.0)) {
    rep.worst_violation = ratio_floor;
    return;
  }
  rep.worst_violation = std::max(0.0, ratio_floor - s.lo / s.hi);
  if (!(s.lo > 0.0)) rep.worst_violation = std::max(rep.worst_violation, ratio_floor);
}

}  // namespace

PrincipleReport check_comparison(const DiscreteOperator& op, const GridFunction& sub, const GridFunction& super,
                                 const GridFunction& f, const GridFunction& g, double kappa) {
  const Grid& grid = op.grid();
  PrincipleReport rep;
  rep.name = "comparison";
  rep.params["kappa"] = kappa;
  rep.premise(kappa >= 0.0, "beta nondecreasing (kappa >= 0)");

  Residual rs = interior_residual(op, sub, -kappa);
  Residual rp = interior_residual(op, super, -kappa);
  double scale = std::max(rs.scale, rp.scale);
  bool strict = true;
  bool ordered = true;
  for (Index k : grid.interior()) {
    scale = std::max({scale, std::abs(f[k]), std::abs(g[k])});
    rs.r[k] -= g[k];
    rp.r[k] -= f[k];
    if (!(f[k] < g[k])) strict = false;
    if (!(f[k] <= g[k])) ordered = false;
  }
  const double slack = residual_slack_rel * scale;
  rep.params["residual_slack"] = slack;

  const double sub_excess = residual_excess(grid, rs.r, -1.0, slack, nullptr);
  const double super_excess = residual_excess(grid, rp.r, 1.0, slack, nullptr);
  rep.params["sub_residual_excess"] = sub_excess;
  rep.params["super_residual_excess"] = super_excess;
  rep.premise(sub_excess == 0.0, "sub is a subsolution against g");
  rep.premise(super_excess == 0.0, "super is a supersolution against f");

  const bool increasing = kappa > 0.0 || op.bounds().c_max < 0.0;
  if (increasing)
    rep.premise(ordered, "f <= g");
  else
    rep.premise(strict, "f < g (beta only nondecreasing)");

  double min_super = std::numeric_limits<double>::infinity();
  for (Index k : grid.interior()) min_super = std::min(min_super, super[k]);
  rep.premise(min_super > 0.0, "super > 0 in the interior");

  double boundary_gap = 0.0;
  for (Index k : grid.boundary()) boundary_gap = std::max(boundary_gap, sub[k] - super[k]);
  rep.premise(boundary_gap <= 0.0, "sub <= super on the boundary");

  rep.tolerance = 10.0 * slack;
  rep.worst_violation = 0.0;
  for (Index k : grid.interior()) {
    const double v = sub[k] - super[k];
    if (v > rep.worst_violation) {
      rep.worst_violation = v;
      set_witness(rep, grid, k);
    }
  }
  rep.finalize();
  return rep;
}

PrincipleReport check_max_principle(const DiscreteOperator& op, double tau, const GridFunction& u,
                                    double lambda_bar_h) {
  const Grid& grid = op.grid();
  PrincipleReport rep;
  rep.name = "max_principle";
  rep.params["tau"] = tau;
  rep.params["lambda_bar_h"] = lambda_bar_h;
  rep.premise(tau < lambda_bar_h, "tau < lambda_bar_h");

  const Residual r = interior_residual(op, u, tau);
  const double slack = residual_slack_rel * r.scale;
  rep.params["residual_slack"] = slack;
  const double excess = residual_excess(grid, r.r, -1.0, slack, nullptr);
  rep.params["sub_residual_excess"] = excess;
  rep.premise(excess == 0.0, "u is a subsolution of G_h + tau |u|^alpha u >= 0");

  double boundary_max = -std::numeric_limits<double>::infinity();
  for (Index k : grid.boundary()) boundary_max = std::max(boundary_max, u[k]);
  rep.premise(boundary_max <= slack, "u <= 0 on the boundary");

  rep.tolerance = residual_slack_rel * std::max(1.0, sup_norm(u));
  rep.worst_violation = 0.0;
  for (Index k : grid.interior()) {
    if (u[k] > rep.worst_violation) {
      rep.worst_violation = u[k];
      set_witness(rep, grid, k);
    }
  }
  rep.finalize();
  return rep;
}

PrincipleReport check_strong_min(const DiscreteOperator& op, const GridFunction& u, double lambda, double collar) {
  const Grid& grid = op.grid();
  PrincipleReport rep;
  rep.name = "strong_min";
  rep.params["lambda"] = lambda;
  rep.params["collar"] = collar;

  const Residual r = interior_residual(op, u, lambda);
  const double slack = residual_slack_rel * r.scale;
  rep.params["residual_slack"] = slack;
  const double excess = residual_excess(grid, r.r, 1.0, slack, nullptr);
  rep.params["super_residual_excess"] = excess;
  rep.premise(excess == 0.0, "u is a supersolution");

  const double sup = sup_norm(u);
  double min_active = std::numeric_limits<double>::infinity();
  for (Index k = 0; k < grid.size(); ++k)
    if (grid.is_active(k)) min_active = std::min(min_active, u[k]);
  rep.premise(min_active >= -residual_slack_rel * std::max(1.0, sup), "u >= 0");

  const double zero_tol = residual_slack_rel;
  double inf_u = std::numeric_limits<double>::infinity();
  Index at = -1;
  for (Index k : grid.interior()) {
    if (grid.dist()[k] < collar) continue;
    if (u[k] < inf_u) {
      inf_u = u[k];
      at = k;
    }
  }
  const bool zero_branch = sup <= zero_tol;
  const bool positive_branch = inf_u > 0.0;
  rep.params["sup"] = sup;
  rep.params["inf_interior"] = inf_u;
  rep.params["branch"] = zero_branch ? 0.0 : (positive_branch ? 1.0 : -1.0);
  rep.tolerance = 0.0;
  rep.worst_violation = zero_branch || positive_branch ? 0.0 : sup;
  set_witness(rep, grid, at);
  rep.finalize();
  return rep;
}

PrincipleReport hopf_ratio(const GridFunction& u, double collar) {
  const Grid& grid = u.grid();
  collar = resolve_collar(grid, collar);
  PrincipleReport rep;
  rep.name = "hopf_ratio";
  rep.params["collar"] = collar;

  double min_u = std::numeric_limits<double>::infinity();
  for (Index k = 0; k < grid.size(); ++k)
    if (grid.is_active(k)) min_u = std::min(min_u, u[k]);
  rep.premise(min_u >= 0.0, "u >= 0");

  const RatioStats s = collar_ratios(u, collar, [](double d) { return d; });
  rep.premise(s.nodes > 0, "collar contains interior nodes");
  rep.params["C_lo"] = s.nodes ? s.lo : nan;
  rep.params["C_hi"] = s.nodes ? s.hi : nan;
  rep.params["collar_nodes"] = s.nodes;
  ratio_floor_verdict(rep, s);
  set_witness(rep, grid, s.lo_at);
  rep.finalize();
  return rep;
}

PrincipleReport boundary_upper(const DiscreteOperator& op, const GridFunction& u, double m, double collar) {
  const Grid& grid = op.grid();
  collar = resolve_collar(grid, collar);
  PrincipleReport rep;
  rep.name = "boundary_upper";
  rep.params["m"] = m;
  rep.params["collar"] = collar;
  rep.premise(m >= 0.0, "m >= 0");

  // The estimate concerns F + b·∇u|∇u|^α, so the zero-order term is removed.
  Residual r = interior_residual(op, u, 0.0);
  const double alpha = op.spec().alpha;
  for (Index k : grid.interior()) {
    const double cu = op.zero_order_coef(grid.slot(k)) * signed_power(u[k], alpha);
    r.r[k] -= cu;
    r.r[k] += m;
  }
  const double slack = residual_slack_rel * std::max(r.scale, m);
  rep.params["residual_slack"] = slack;
  const double excess = residual_excess(grid, r.r, -1.0, slack, nullptr);
  rep.params["sub_residual_excess"] = excess;
  rep.premise(excess == 0.0, "u is a subsolution with right-hand side >= -m");

  double bmax = 0.0;
  for (Index k : grid.boundary()) bmax = std::max(bmax, std::abs(u[k]));
  rep.premise(bmax <= slack, "u = 0 on the boundary");
  rep.premise(is_finite_on_active(u), "u finite");

  const RatioStats s = collar_ratios(u, collar, [](double d) { return d; });
  rep.premise(s.nodes > 0, "collar contains interior nodes");
  const double c3 = s.nodes ? std::max(0.0, s.hi) : nan;
  rep.params["C3"] = c3;
  rep.params["h"] = grid.h();
  rep.tolerance = 0.0;
  rep.worst_violation = std::isfinite(c3) ? 0.0 : std::numeric_limits<double>::infinity();
  set_witness(rep, grid, s.hi_at);
  rep.finalize();
  return rep;
}

PrincipleReport boundary_upper_refinement(const std::vector<PrincipleReport>& levels) {
  PrincipleReport rep;
  rep.name = "boundary_upper_refinement";
  rep.premise(levels.size() >= 2, "at least two levels");
  double worst_growth = 0.0;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const PrincipleReport& l = levels[i];
    rep.params["C3_" + std::to_string(i)] = l.params.count("C3") ? l.params.at("C3") : nan;
    if (!l.passed) rep.premise(false, "level " + std::to_string(i) + " passes boundary_upper");
    if (i == 0) continue;
    const double prev = levels[i - 1].params.count("C3") ? levels[i - 1].params.at("C3") : nan;
    const double cur = l.params.count("C3") ? l.params.at("C3") : nan;
    const double growth = prev > 0.0 ? cur / prev - 1.0 : std::numeric_limits<double>::infinity();
    if (!(growth <= worst_growth)) {
      worst_growth = std::isnan(growth) ? std::numeric_limits<double>::infinity() : growth;
      rep.witness = l.witness;
      rep.witness_index = l.witness_index;
    }
  }
  rep.params["worst_growth"] = worst_growth;
  rep.tolerance = 0.1;
  rep.worst_violation = worst_growth;
  rep.passed = rep.hypotheses_met && worst_growth < rep.tolerance;
  return rep;
}

PrincipleReport boundary_lower_quadratic(const DiscreteOperator& op, const GridFunction& v, double lambda,
                                         double collar) {
  const Grid& grid = op.grid();
  collar = resolve_collar(grid, collar);
  const double c1 = grid.domain().semiconcavity_constant();
  PrincipleReport rep;
  rep.name = "boundary_lower_quadratic";
  rep.params["collar"] = collar;
  rep.params["C"] = c1;
  rep.params["lambda"] = lambda;

  const Residual r = interior_residual(op, v, lambda);
  const double slack = residual_slack_rel * r.scale;
  rep.params["residual_slack"] = slack;
  const double excess = residual_excess(grid, r.r, 1.0, slack, nullptr);
  rep.params["super_residual_excess"] = excess;
  rep.premise(excess == 0.0, "v is a supersolution");
  double min_v = std::numeric_limits<double>::infinity();
  for (Index k : grid.interior()) min_v = std::min(min_v, v[k]);
  rep.premise(min_v > 0.0, "v > 0 in the interior");

  const RatioStats s = collar_ratios(v, collar, [c1](double d) { return d + 0.5 * c1 * d * d; });
  rep.premise(s.nodes > 0, "collar contains interior nodes");
  rep.params["gamma"] = s.nodes ? s.lo : nan;
  rep.params["gamma_hi"] = s.nodes ? s.hi : nan;
  ratio_floor_verdict(rep, s);
  set_witness(rep, grid, s.lo_at);
  rep.finalize();
  return rep;
}

std::string to_string(Barrier b) {
  switch (b) {
    case Barrier::log_collar:
      return "log_collar";
    case Barrier::hopf_exp:
      return "hopf_exp";
    case Barrier::distance_power:
      return "distance_power";
  }
  return "?";
}

Barrier barrier_from_string(const std::string& s) {
  if (s == "log_collar") return Barrier::log_collar;
  if (s == "hopf_exp") return Barrier::hopf_exp;
  if (s == "distance_power") return Barrier::distance_power;
  throw InvalidArgument("unknown barrier '" + s + "'");
}

namespace {

double param(const BarrierParams& p, const std::string& key, double fallback) {
  const auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}

double require(const BarrierParams& p, const std::string& key) {
  const auto it = p.find(key);
  if (it == p.end()) throw InvalidArgument("barrier parameter '" + key + "' is missing");
  return it->second;
}

struct Structure {
  double a, A, b, c, c_max, c1;
  int n;
};

Structure structure(const DiscreteOperator& op) {
  const CoefficientBounds& cb = op.bounds();
  return {cb.a_min, cb.a_max, cb.b_sup, cb.c_sup, cb.c_max, op.grid().domain().semiconcavity_constant(),
          op.grid().dim()};
}

/// Collar where the distance is C² and D²d is bounded by C1.
double smooth_collar(const Domain& d) {
  if (std::holds_alternative<Disk>(d.shape())) return 0.5 * std::get<Disk>(d.shape()).radius;
  return d.inradius();
}

double log_collar_delta_bound(const Structure& s) {
  const double K = s.c1 * (s.A + s.a) * s.n + s.b;
  return K > 0.0 ? s.a / (4.0 * K) : std::numeric_limits<double>::infinity();
}

/// Positive root of k^(α+2) = B k^(α+1) + c, i.e. k = B + c k^-(α+1).
double hopf_k_threshold(double B, double c, double alpha) {
  if (c == 0.0) return B;
  double lo = std::max(B, 0.0), hi = std::max(1.0, B) + std::pow(c, 1.0 / (alpha + 2.0)) + 1.0;
  auto gap = [&](double k) { return std::pow(k, alpha + 2.0) - B * std::pow(k, alpha + 1.0) - c; };
  while (gap(hi) <= 0.0) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (gap(mid) > 0.0 ? hi : lo) = mid;
  }
  return hi;
}

Vec<double> to_vec(const Eigen::Vector2d& v, int dim) {
  Vec<double> p(dim);
  for (int i = 0; i < dim; ++i) p[i] = v[i];
  return p;
}

SymMat<double> to_mat(const Eigen::Matrix2d& m, int dim) {
  SymMat<double> X(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) X(i, j) = m(i, j);
  return X;
}

double drift_term(const OperatorSpec& spec, const Point& x, const Vec<double>& p, double alpha) {
  const Eigen::Vector2d b = spec.drift(x);
  double bp = 0.0;
  for (Index i = 0; i < p.size(); ++i) bp += b[i] * p[i];
  return bp * std::pow(p.norm(), alpha);
}

}  // namespace

double barrier_threshold(Barrier kind, const DiscreteOperator& op, const BarrierParams& params) {
  const Structure s = structure(op);
  const double alpha = op.spec().alpha;
  switch (kind) {
    case Barrier::log_collar:
      return 4.0 * (s.c1 * (s.A + s.a) * s.n + s.b) / s.a;
    case Barrier::hopf_exp: {
      const double R = param(params, "R", 0.5 * op.grid().domain().inradius());
      const double B = 2.0 * (s.n - 1) * s.A / (R * s.a) + s.b;
      return hopf_k_threshold(B, s.c, alpha);
    }
    case Barrier::distance_power: {
      const double gamma = param(params, "gamma", 0.5);
      const double C = (s.A + s.a) * s.c1 * s.n + s.b;
      const double D = op.grid().domain().inradius();
      return C * std::pow(D, 1.0 - gamma) * (1.0 + std::pow(D, gamma)) / (s.a * gamma);
    }
  }
  return 0.0;
}

BarrierParams default_barrier_params(Barrier kind, const DiscreteOperator& op, double factor) {
  const Domain& dom = op.grid().domain();
  BarrierParams p;
  switch (kind) {
    case Barrier::log_collar: {
      const Structure s = structure(op);
      p["C2"] = factor * barrier_threshold(kind, op);
      if (!(p["C2"] > 0.0)) p["C2"] = 1.0;
      p["delta"] = std::min(0.9 * log_collar_delta_bound(s), 0.9 * smooth_collar(dom));
      p["gamma"] = 1.0;
      break;
    }
    case Barrier::hopf_exp: {
      const Point c = dom.incenter();
      p["R"] = 0.5 * dom.inradius();
      p["cx"] = c[0];
      p["cy"] = c[1];
      p["m"] = 1.0;
      p["k"] = factor * barrier_threshold(kind, op, p);
      if (!(p["k"] > 0.0)) p["k"] = 1.0;
      break;
    }
    case Barrier::distance_power:
      p["gamma"] = 0.5;
      p["k"] = factor * barrier_threshold(kind, op, p);
      if (!(p["k"] > 0.0)) p["k"] = 1.0;
      break;
  }
  return p;
}

PrincipleReport verify_barrier(Barrier kind, const BarrierParams& params, const DiscreteOperator& op) {
  const Grid& grid = op.grid();
  const Domain& dom = grid.domain();
  const OperatorSpec& spec = op.spec();
  const Structure s = structure(op);
  const double alpha = spec.alpha;
  const int n = grid.dim();
  const double eps = op.eps();

  PrincipleReport rep;
  rep.name = "barrier_" + to_string(kind);
  rep.params = params;
  rep.params["threshold"] = barrier_threshold(kind, op, params);
  rep.tolerance = 0.0;
  int nodes = 0;
  auto record = [&](double violation, Index k) {
    ++nodes;
    if (violation > rep.worst_violation) {
      rep.worst_violation = violation;
      set_witness(rep, grid, k);
    }
  };

  switch (kind) {
    case Barrier::log_collar: {
      const double C2 = require(params, "C2");
      const double delta = require(params, "delta");
      const double gamma = param(params, "gamma", 1.0);
      const double c2_min = rep.params["threshold"];
      if (!(C2 > c2_min)) {
        std::ostringstream os;
        os << "log_collar needs C2 > 4 (C1 (A+a) N + |b|) / a = " << c2_min << ", got " << C2;
        throw ParameterTooSmall("C2", os.str());
      }
      const double delta_max = std::min(log_collar_delta_bound(s), smooth_collar(dom));
      if (!(delta > 0.0 && delta < delta_max)) {
        std::ostringstream os;
        os << "log_collar needs 0 < delta < " << delta_max << ", got " << delta;
        throw ParameterTooSmall("delta", os.str());
      }
      if (!(gamma > 0.0)) throw ParameterTooSmall("gamma", "log_collar needs gamma > 0");
      const double bound =
          -0.5 * s.a * std::pow(gamma, alpha + 1.0) * std::pow(C2 / (1.0 + C2 * delta), alpha + 2.0);
      rep.params["bound"] = bound;
      double worst_value = -std::numeric_limits<double>::infinity();
      for (Index k : grid.interior()) {
        const Point& x = grid.point(k);
        const DistanceJet j = dom.distance_jet(x);
        if (!j.smooth || !(j.value > 0.0) || j.value >= delta) continue;
        const double q = C2 / (1.0 + C2 * j.value);
        const Vec<double> p = to_vec(gamma * q * j.gradient, n);
        const SymMat<double> X =
            to_mat(gamma * q * j.hessian - gamma * q * q * j.gradient * j.gradient.transpose(), n);
        const double value = eval_F(spec, x, p, X, eps) + drift_term(spec, x, p, alpha);
        worst_value = std::max(worst_value, value);
        record(std::max(0.0, value - bound), k);
      }
      rep.params["max_value"] = worst_value;
      break;
    }
    case Barrier::hopf_exp: {
      const double k_par = require(params, "k");
      const double R = require(params, "R");
      const double m = param(params, "m", 1.0);
      const Point center(param(params, "cx", 0.0), param(params, "cy", 0.0));
      const double k_min = rep.params["threshold"];
      if (!(k_par > k_min)) {
        std::ostringstream os;
        os << "hopf_exp needs k^(alpha+2) > (2(N-1)A/(R a) + |b|) k^(alpha+1) + |c|, i.e. k > " << k_min
           << ", got " << k_par;
        throw ParameterTooSmall("k", os.str());
      }
      if (!(R > 0.0) || !(m > 0.0)) throw InvalidArgument("hopf_exp needs R > 0 and m > 0");
      rep.premise(dom.contains(center) && dom.distance(center) >= 1.5 * R, "ball of radius 3R/2 inside the domain");
      double min_value = std::numeric_limits<double>::infinity();
      for (Index k : grid.interior()) {
        const Point& x = grid.point(k);
        const Eigen::Vector2d y = x - center;
        const double rho = y.head(n).norm();
        if (rho < 0.5 * R || rho > 1.5 * R) continue;
        const Eigen::Vector2d e = y / rho;
        const double ek = std::exp(-k_par * rho);
        const double v = m * (ek - std::exp(-k_par * R));
        const double d1 = -m * k_par * ek;
        const double d2 = m * k_par * k_par * ek;
        const Vec<double> p = to_vec(d1 * e, n);
        Eigen::Matrix2d H = d2 * e * e.transpose();
        if (n == 2) H += d1 / rho * (Eigen::Matrix2d::Identity() - e * e.transpose());
        const SymMat<double> X = to_mat(H, n);
        const double lower = std::pow(floored_norm(p, eps), alpha) * pucci(X, s.a, s.A, PucciSign::minus);
        const double value = lower + drift_term(spec, x, p, alpha) - s.c * signed_power(v, alpha);
        min_value = std::min(min_value, value);
        record(value > 0.0 ? 0.0 : std::max(-value, std::numeric_limits<double>::denorm_min()), k);
      }
      rep.params["min_value"] = min_value;
      break;
    }
    case Barrier::distance_power: {
      const double k_par = require(params, "k");
      const double gamma = param(params, "gamma", 0.5);
      if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidArgument("distance_power needs 0 < gamma < 1");
      const double k_min = rep.params["threshold"];
      if (!(k_par > k_min)) {
        std::ostringstream os;
        os << "distance_power needs a k gamma d^gamma > C d (1 + d^gamma) on the domain, i.e. k > " << k_min
           << ", got " << k_par;
        throw ParameterTooSmall("k", os.str());
      }
      rep.premise(s.c_max <= 0.0, "c <= 0");
      std::vector<std::pair<Index, double>> values;
      double max_value = -std::numeric_limits<double>::infinity();
      for (Index k : grid.interior()) {
        const Point& x = grid.point(k);
        const DistanceJet j = dom.distance_jet(x);
        if (!j.smooth || !(j.value > 0.0)) continue;
        const double d = j.value;
        const double dg = std::pow(d, gamma);
        const double u = 1.0 - std::pow(1.0 + dg, -k_par);
        const double front = k_par * gamma * std::pow(d, gamma - 2.0) / std::pow(1.0 + dg, k_par + 2.0);
        const Vec<double> p = to_vec(k_par * gamma * std::pow(d, gamma - 1.0) / std::pow(1.0 + dg, k_par + 1.0) *
                                         j.gradient,
                                     n);
        const Eigen::Matrix2d H =
            front * ((gamma - 1.0 - (k_par * gamma + 1.0) * dg) * j.gradient * j.gradient.transpose() +
                     d * (1.0 + dg) * j.hessian);
        const double value = eval_G(spec, x, u, p, to_mat(H, n), eps);
        max_value = std::max(max_value, value);
        values.emplace_back(k, value);
      }
      // Rescaling u2 = M^(1/(1+α)) u turns G <= -ε into G <= -1 with M = 1/ε.
      const double scale_M = max_value < 0.0 ? -1.0 / max_value : nan;
      rep.params["max_value"] = max_value;
      rep.params["M"] = scale_M;
      for (const auto& [k, value] : values) {
        const double scaled = std::isfinite(scale_M) ? scale_M * value : value;
        record(std::max(0.0, scaled + 1.0 - 1e-12), k);
      }
      if (!std::isfinite(scale_M) && rep.worst_violation == 0.0) rep.worst_violation = 1.0;
      break;
    }
  }
  rep.params["region_nodes"] = nodes;
  rep.premise(nodes > 0, "region contains grid nodes");
  rep.finalize();
  return rep;
}

namespace {

struct PairSampler {
  const Grid& grid;
  const std::vector<Index>& nodes;
  std::size_t max_pairs;
  std::uint64_t seed;

  template <typename Visit>
  void run(Visit&& visit) const {
    const std::size_t n = nodes.size();
    if (n < 2) return;
    const std::size_t all = n * (n - 1) / 2;
    if (all <= max_pairs) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) visit(nodes[i], nodes[j]);
      return;
    }
    // Half the budget on lattice neighbourhoods (where steep moduli live),
    // the rest on uniformly drawn pairs.
    std::vector<Index> slot(static_cast<std::size_t>(grid.size()), -1);
    for (std::size_t i = 0; i < n; ++i) slot[static_cast<std::size_t>(nodes[i])] = static_cast<Index>(i);
    const std::size_t local_budget = max_pairs / 2;
    int r = 1;
    const int dim = grid.dim();
    while (true) {
      const std::size_t next = r + 1;
      const std::size_t per_node = dim == 1 ? next : (2 * next + 1) * (2 * next + 1) / 2;
      if (per_node * n > local_budget || static_cast<int>(next) > std::max(grid.nx(), grid.ny())) break;
      ++r;
    }
    std::size_t used = 0;
    for (Index a : nodes) {
      const int ia = grid.ix(a), ja = grid.iy(a);
      for (int dj = dim == 1 ? 0 : -r; dj <= (dim == 1 ? 0 : r); ++dj)
        for (int di = -r; di <= r; ++di) {
          if (dj < 0 || (dj == 0 && di <= 0)) continue;
          const Index b = grid.index(ia + di, ja + dj);
          if (b < 0 || slot[static_cast<std::size_t>(b)] < 0) continue;
          visit(a, b);
          ++used;
        }
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (; used < max_pairs; ++used) {
      const std::size_t i = pick(rng), j = pick(rng);
      if (i != j) visit(nodes[i], nodes[j]);
    }
  }
};

double modulus(const GridFunction& u, const std::vector<Index>& nodes, double gamma, const ModulusOptions& opts) {
  const Grid& g = u.grid();
  double best = 0.0;
  PairSampler{g, nodes, opts.max_pairs, opts.seed}.run([&](Index a, Index b) {
    const double dist = (g.point(a) - g.point(b)).norm();
    if (dist == 0.0) return;
    best = std::max(best, std::abs(u[a] - u[b]) / std::pow(dist, gamma));
  });
  return best;
}

}  // namespace

double holder_modulus(const GridFunction& u, double gamma, const ModulusOptions& opts) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidArgument("holder_modulus needs 0 < gamma < 1");
  const Grid& g = u.grid();
  std::vector<Index> nodes;
  for (Index k = 0; k < g.size(); ++k)
    if (g.is_active(k)) nodes.push_back(k);
  return modulus(u, nodes, gamma, opts);
}

double lipschitz_modulus(const GridFunction& u, double interior_margin, const ModulusOptions& opts) {
  if (!(interior_margin > 0.0)) throw InvalidArgument("lipschitz_modulus needs interior_margin > 0");
  const Grid& g = u.grid();
  std::vector<Index> nodes;
  for (Index k : g.interior())
    if (g.dist()[k] >= interior_margin) nodes.push_back(k);
  return modulus(u, nodes, 1.0, opts);
}

GridFunction random_bumps(const GridPtr& grid, std::mt19937_64& rng, double amplitude) {
  const Grid& g = *grid;
  Point lo = Point::Constant(std::numeric_limits<double>::infinity());
  Point hi = -lo;
  for (Index k = 0; k < g.size(); ++k) {
    if (!g.is_active(k)) continue;
    lo = lo.cwiseMin(g.point(k));
    hi = hi.cwiseMax(g.point(k));
  }
  const double diam = g.domain().diameter();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  struct Bump {
    Point c;
    double width, height;
  };
  std::vector<Bump> bumps(3);
  for (Bump& b : bumps) {
    b.c = Point(lo[0] + unit(rng) * (hi[0] - lo[0]), lo[1] + unit(rng) * (hi[1] - lo[1]));
    b.width = (0.05 + 0.25 * unit(rng)) * diam;
    b.height = amplitude * unit(rng);
  }
  return GridFunction::from(grid, [&](const Point& x) {
    double v = 0.0;
    for (const Bump& b : bumps) v += b.height * std::exp(-(x - b.c).squaredNorm() / (2.0 * b.width * b.width));
    return v;
  });
}

namespace {

SolveOptions tight(const SolveOptions& opts) {
  SolveOptions o = opts;
  o.classify_early = false;
  o.accelerate = true;
  o.max_outer = std::max(o.max_outer, 2000);
  return o;
}

void tally(SuiteReport& suite, PrincipleReport rep) {
  ++suite.trials;
  if (!rep.passed) ++suite.failures;
  suite.worst_violation = std::max(suite.worst_violation, rep.worst_violation);
  suite.reports.push_back(std::move(rep));
}

}  // namespace

SuiteReport max_principle_suite(const DiscreteOperator& op, double lambda_bar_h, double tau, int trials,
                                std::uint64_t seed, const SolveOptions& opts) {
  SuiteReport suite;
  suite.name = "max_principle_suite";
  const DiscreteOperator flipped(op.grid_ptr(), flip_operator(op.spec()), op.options());
  const SolveOptions o = tight(opts);
  LinearWorkspace ws(flipped);
  std::mt19937_64 rng(seed);
  for (int t = 0; t < trials; ++t) {
    GridFunction f = t == 0 ? GridFunction(op.grid_ptr(), 0.0) : random_bumps(op.grid_ptr(), rng, 2.0);
    f.set_boundary(0.0);
    const GridFunction minus_f(op.grid_ptr(), Eigen::VectorXd(-f.values()));
    const SolveResult v = monotone_induction(flipped, tau, minus_f, o, &ws);
    const GridFunction u(op.grid_ptr(), Eigen::VectorXd(-v.u.values()));
    PrincipleReport rep = check_max_principle(op, tau, u, lambda_bar_h);
    rep.params["trial"] = t;
    rep.premise(v.report.status == SolveStatus::converged, "subsolution construction converged");
    rep.finalize();
    tally(suite, std::move(rep));
  }
  suite.passed = suite.trials > 0 && suite.failures == 0;
  return suite;
}

SuiteReport comparison_suite(const DiscreteOperator& op, int trials, std::uint64_t seed, double kappa,
                             const SolveOptions& opts) {
  SuiteReport suite;
  suite.name = "comparison_suite";
  SolveOptions o = opts;
  o.max_steps = std::max(o.max_steps, 20000);
  LinearWorkspace ws(op);
  std::mt19937_64 rng(seed);
  const GridFunction zero(op.grid_ptr(), 0.0);
  for (int t = 0; t < trials; ++t) {
    GridFunction f1 = random_bumps(op.grid_ptr(), rng, 2.0);
    GridFunction f2 = random_bumps(op.grid_ptr(), rng, 1.0);
    for (Index k = 0; k < f1.values().size(); ++k) {
      f1[k] = -f1[k] - 0.05;
      f2[k] = f1[k] - f2[k] - 0.05;
    }
    const SolveResult sub = pseudo_time_solve(op, -kappa, f1, 0.0, zero, o, &ws);
    const SolveResult super = pseudo_time_solve(op, -kappa, f2, 0.0, sub.u, o, &ws);
    PrincipleReport rep = check_comparison(op, sub.u, super.u, f2, f1, kappa);
    rep.params["trial"] = t;
    rep.premise(sub.report.converged && super.report.converged, "solves converged");
    rep.finalize();
    tally(suite, std::move(rep));
  }
  suite.passed = suite.trials > 0 && suite.failures == 0;
  return suite;
}

}  // namespace demi

#include "demi/eigen.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "demi/errors.hpp"

namespace demi {

BisectionTrial probe_lambda(const DiscreteOperator& op, double lambda, const SolveOptions& opts,
                            LinearWorkspace* workspace) {
  const GridFunction f(op.grid_ptr(), -1.0);
  SolveOptions o = opts;
  SolveResult res = monotone_induction(op, lambda, f, o, workspace);
  int outer = res.report.outer_iterations;
  for (int retry = 0; retry < probe_budget_retries && res.report.status == SolveStatus::not_converged; ++retry) {
    o.max_outer *= probe_budget_growth;
    o.accelerate = true;
    res = monotone_induction(op, lambda, f, o, workspace);
    outer += res.report.outer_iterations;
  }
  BisectionTrial t;
  t.lambda = lambda;
  t.status = res.report.status;
  t.outer_iterations = outer;
  t.growth_ratio = res.report.growth_ratio;
  switch (res.report.status) {
    case SolveStatus::converged:
    case SolveStatus::projected_bounded:
      t.below = true;
      break;
    case SolveStatus::blew_up:
    case SolveStatus::projected_blow_up:
      t.below = false;
      break;
    case SolveStatus::not_converged:
      t.below = res.report.growth_ratio > 0.0 && res.report.growth_ratio < 1.0;
      break;
  }
  return t;
}

EigenfunctionResult eigenfunction_at(const DiscreteOperator& op, double lambda_probe, double lambda_mid,
                                     const SolveOptions& opts, LinearWorkspace* workspace, int polish) {
  SolveOptions o = opts;
  o.accelerate = true;
  o.classify_early = false;
  const GridFunction f(op.grid_ptr(), -1.0);
  const SolveResult res = monotone_induction(op, lambda_probe, f, o, workspace);
  const double sup = sup_norm(res.u);
  if (!(sup > 0.0) || !std::isfinite(sup)) throw NotConverged("eigenfunction solve produced no positive iterate");
  EigenfunctionResult out;
  out.w = GridFunction(op.grid_ptr(), Eigen::VectorXd(res.u.values() / sup));

  // Inverse power iteration G_h[u] = -|w|^α w, w <- u / sup u removes the
  // O(λ̄ - λ_probe) defect of the normalized induction solution.
  const double alpha = op.spec().alpha;
  SolveOptions po = opts;
  po.verbosity = 0;
  for (int it = 0; it < polish; ++it) {
    GridFunction rhs(op.grid_ptr(), 0.0);
    for (Index k : op.grid().interior()) rhs[k] = -signed_power(out.w[k], alpha);
    const SolveResult step = pseudo_time_solve(op, 0.0, rhs, 0.0, out.w, po, workspace);
    const double s = sup_norm(step.u);
    if (!step.report.converged || !(s > 0.0) || !std::isfinite(s)) break;
    GridFunction next(op.grid_ptr(), Eigen::VectorXd(step.u.values() / s));
    double change = 0.0;
    for (Index k : op.grid().interior()) change = std::max(change, std::abs(next[k] - out.w[k]));
    out.w = std::move(next);
    out.lambda_power = std::pow(s, -(1.0 + alpha));
    out.polish_iterations = it + 1;
    if (change < 1e-11) break;
  }
  const GridFunction zero(op.grid_ptr(), 0.0);
  const GridFunction r = op.residual(out.w, lambda_mid, zero);
  for (Index k : op.grid().interior()) out.residual = std::max(out.residual, std::abs(r[k]));
  return out;
}

EigenResult lambda_bar(const DiscreteOperator& op, const EigenOptions& opts) {
  EigenResult out;
  double lo, hi;
  if (std::isnan(opts.lambda_lo)) {
    out.lower_certificate = best_strip_certificate(op);
    lo = out.lower_certificate.value - 1e-9 * (1.0 + std::abs(out.lower_certificate.value));
  } else {
    lo = opts.lambda_lo;
    out.lower_certificate.witness = "user";
    out.lower_certificate.value = lo;
  }
  if (std::isnan(opts.lambda_hi)) {
    out.upper_certificate = upper_bound_ball(op);
    hi = out.upper_certificate.value + 1e-9 * (1.0 + std::abs(out.upper_certificate.value));
  } else {
    hi = opts.lambda_hi;
    out.upper_certificate.kind = Certificate::Kind::upper;
    out.upper_certificate.witness = "user";
    out.upper_certificate.value = hi;
  }
  if (!(lo < hi)) {
    std::ostringstream os;
    os << "bracket seeds are not ordered: lo = " << lo << ", hi = " << hi;
    throw BracketInvalid(os.str());
  }
  const double tol = opts.lambda_tol > 0.0 ? opts.lambda_tol : 1e-4 * (hi - lo);
  out.lambda_tol = tol;

  SolveOptions so = opts.solve;
  LinearWorkspace ws(op);
  const BisectionTrial t_lo = probe_lambda(op, lo, so, &ws);
  const BisectionTrial t_hi = probe_lambda(op, hi, so, &ws);
  out.trials = {t_lo, t_hi};
  if (!t_lo.below || t_hi.below) {
    std::ostringstream os;
    os << "bracket [" << lo << ", " << hi << "] is inconsistent with the discrete eigenvalue: lo probe "
       << to_string(t_lo.status) << " (ratio " << t_lo.growth_ratio << "), hi probe " << to_string(t_hi.status)
       << " (ratio " << t_hi.growth_ratio << ")";
    throw BracketInvalid(os.str());
  }
  for (int i = 0; i < opts.max_bisections && hi - lo > tol; ++i) {
    const double mid = 0.5 * (lo + hi);
    const BisectionTrial t = probe_lambda(op, mid, so, &ws);
    out.trials.push_back(t);
    (t.below ? lo : hi) = mid;
  }
  out.lambda_lo = lo;
  out.lambda_hi = hi;
  out.probe_lambda = lo;
  if (opts.eigenfunction) {
    EigenfunctionResult ef = eigenfunction_at(op, lo, out.lambda_mid(), so, &ws, opts.polish_iterations);
    out.eigenfunction = std::move(ef.w);
    out.eigen_residual = ef.residual;
    out.lambda_power = ef.lambda_power;
    out.polish_iterations = ef.polish_iterations;
  }
  return out;
}

EigenResult lambda_underline(const DiscreteOperator& op, const EigenOptions& opts) {
  const DiscreteOperator flipped(op.grid_ptr(), flip_operator(op.spec()), op.options());
  return lambda_bar(flipped, opts);
}

ScalingReport scaling_check(const OperatorSpec& spec, const Domain& domain, double h, double t,
                            const EigenOptions& opts, const DiscretizationOptions& disc, const GridOptions& grid_opts) {
  auto is_zero = [](const Field& f) { return f.is_constant() && f.constant_value() == 0.0; };
  if (!is_zero(spec.c) || !std::all_of(spec.b.begin(), spec.b.end(), is_zero))
    throw InvalidArgument("scaling_check requires b = c = 0");
  if (spec.principal == Principal::isotropic && !spec.a_field.is_constant())
    throw InvalidArgument("scaling_check requires an x-independent principal part");
  if (!(t > 0.0)) throw InvalidArgument("scaling factor must be positive");

  ScalingReport rep;
  rep.t = t;
  const DiscreteOperator base(build_grid(domain, h, grid_opts), spec, disc);
  DiscretizationOptions disc_t = disc;
  if (disc_t.eps > 0.0) disc_t.eps /= t;
  const DiscreteOperator scaled(build_grid(domain.scaled(t), h * t, grid_opts), spec, disc_t);
  EigenOptions o = opts;
  o.eigenfunction = false;
  const EigenResult eb = lambda_bar(base, o);
  if (o.lambda_tol > 0.0) o.lambda_tol *= std::pow(t, -(2.0 + spec.alpha));
  const EigenResult es = lambda_bar(scaled, o);
  rep.lambda_base = eb.lambda_mid();
  rep.lambda_scaled = es.lambda_mid();
  rep.ratio = rep.lambda_scaled / rep.lambda_base;
  rep.expected = std::pow(t, -(2.0 + spec.alpha));
  rep.rel_error = std::abs(rep.ratio / rep.expected - 1.0);
  return rep;
}

RichardsonReport richardson(const std::vector<double>& h, const std::vector<double>& values, double fallback_order) {
  if (h.size() != values.size() || h.size() < 2) throw InvalidArgument("richardson needs at least two levels");
  RichardsonReport rep;
  rep.h = h;
  rep.values = values;
  const std::size_t n = h.size();
  double p = fallback_order;
  rep.order_estimated = false;
  if (n >= 3) {
    const double d1 = values[n - 2] - values[n - 3];
    const double d2 = values[n - 1] - values[n - 2];
    if (d1 * d2 > 0.0) {
      const double est = std::log(d1 / d2) / std::log(h[n - 2] / h[n - 1]);
      if (std::isfinite(est) && est >= 0.5 && est <= 4.0) {
        p = est;
        rep.order_estimated = true;
      }
    }
  }
  rep.order = p;
  const double r = std::pow(h[n - 2] / h[n - 1], p);
  rep.extrapolate = values[n - 1] + (values[n - 1] - values[n - 2]) / (r - 1.0);
  return rep;
}

}  // namespace demi

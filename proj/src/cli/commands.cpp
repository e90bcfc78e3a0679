#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

#include <Eigen/Core>

#include "demi/cli.hpp"
#include "demi/errors.hpp"
#include "demi/verify.hpp"

namespace demi::cli {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

json point_json(const Point& x, int dim) { return dim == 1 ? json::array({x[0]}) : json::array({x[0], x[1]}); }

json params_json(const std::map<std::string, double>& m) {
  json j = json::object();
  for (const auto& [k, v] : m) j[k] = v;
  return j;
}

json report_json(const SolveReport& r) {
  return {{"status", to_string(r.status)},
          {"converged", r.converged},
          {"blew_up", r.blew_up},
          {"steps", r.steps},
          {"outer_iterations", r.outer_iterations},
          {"residual", r.residual},
          {"growth_ratio", r.growth_ratio},
          {"monotone", r.monotone},
          {"monotone_violation", r.monotone_violation},
          {"factorizations", r.factorizations},
          {"message", r.message}};
}

json certificate_json(const Certificate& c, int dim) {
  json j = {{"kind", c.kind == Certificate::Kind::lower ? "lower" : "upper"},
            {"value", c.value},
            {"witness", c.witness},
            {"params", params_json(c.params)},
            {"margin", c.margin},
            {"worst_index", c.worst_index}};
  j["worst_node"] = c.worst_index >= 0 ? point_json(c.worst_node, dim) : json(nullptr);
  return j;
}

json eigen_json(const EigenResult& e, int dim) {
  json trials = json::array();
  for (const auto& t : e.trials)
    trials.push_back({{"lambda", t.lambda},
                      {"below", t.below},
                      {"status", to_string(t.status)},
                      {"outer_iterations", t.outer_iterations},
                      {"growth_ratio", t.growth_ratio}});
  return {{"lambda_lo", e.lambda_lo},
          {"lambda_hi", e.lambda_hi},
          {"lambda_mid", e.lambda_mid()},
          {"lambda_tol", e.lambda_tol},
          {"probe_lambda", e.probe_lambda},
          {"lambda_power", e.lambda_power},
          {"polish_iterations", e.polish_iterations},
          {"eigen_residual", e.eigen_residual},
          {"lower_certificate", certificate_json(e.lower_certificate, dim)},
          {"upper_certificate", certificate_json(e.upper_certificate, dim)},
          {"bisections", static_cast<int>(e.trials.size())},
          {"trials", trials}};
}

json principle_json(const PrincipleReport& r, int dim) {
  json j = {{"name", r.name},
            {"passed", r.passed},
            {"hypotheses_met", r.hypotheses_met},
            {"failed_premises", r.failed_premises},
            {"worst_violation", r.worst_violation},
            {"tolerance", r.tolerance},
            {"witness_index", r.witness_index},
            {"params", params_json(r.params)}};
  j["witness"] = r.witness_index >= 0 ? point_json(r.witness, dim) : json(nullptr);
  return j;
}

json suite_json(const SuiteReport& s, int dim) {
  json reports = json::array();
  for (const auto& r : s.reports) reports.push_back(principle_json(r, dim));
  return {{"name", s.name},
          {"passed", s.passed},
          {"trials", s.trials},
          {"failures", s.failures},
          {"worst_violation", s.worst_violation},
          {"reports", reports}};
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

std::string grid_csv(const GridFunction& u, const std::string& name) {
  std::ostringstream os;
  os.precision(17);
  write_csv(u, os, name);
  return os.str();
}

std::string history_csv(const SolveReport& r) {
  std::ostringstream os;
  os << "step,residual,dt\n";
  for (std::size_t i = 0; i < r.residual_history.size(); ++i) {
    const double dt = i == 0 || i - 1 >= r.dt_history.size() ? 0.0 : r.dt_history[i - 1];
    os << i << ',' << fmt(r.residual_history[i]) << ',' << fmt(dt) << '\n';
  }
  return os.str();
}

std::string bisection_csv(const EigenResult& e) {
  std::ostringstream os;
  os << "trial,lambda,below,status,outer_iterations,growth_ratio\n";
  for (std::size_t i = 0; i < e.trials.size(); ++i) {
    const auto& t = e.trials[i];
    os << i << ',' << fmt(t.lambda) << ',' << (t.below ? 1 : 0) << ',' << to_string(t.status) << ','
       << t.outer_iterations << ',' << fmt(t.growth_ratio) << '\n';
  }
  return os.str();
}

/// Grid and operator for one mesh size, with advisory warnings.
struct Setup {
  GridPtr grid;
  std::unique_ptr<DiscreteOperator> op;
  std::vector<std::string> warnings;
};

Setup make_setup(const ExperimentConfig& cfg, double h) {
  Setup s;
  s.grid = build_grid(cfg.domain, h, cfg.grid);
  s.warnings = validate(cfg.op, *s.grid);
  s.op = std::make_unique<DiscreteOperator>(s.grid, cfg.op, cfg.disc);
  return s;
}

GridFunction sample(const Field& f, const GridPtr& grid) {
  return GridFunction::from(grid, [&](const Point& x) { return f(x); });
}

double interior_error(const GridFunction& u, const GridFunction& exact) {
  double e = 0.0;
  for (Index k : u.grid().interior()) e = std::max(e, std::abs(u[k] - exact[k]));
  return e;
}

EigenOptions eigen_options(const ExperimentConfig& cfg) {
  EigenOptions o = cfg.eigen.options;
  o.solve = cfg.solver;
  return o;
}

bool is_1d_constant_ode(const OperatorSpec& s) {
  auto zero = [](const Field& f) { return f.is_constant() && f.constant_value() == 0.0; };
  return zero(s.c) && std::all_of(s.b.begin(), s.b.end(), zero) &&
         (s.principal != Principal::isotropic || s.a_field.is_constant());
}

/// a (π_p / L)^p with p = α + 2 for constant-coefficient 1D problems; the
/// concave eigenfunction selects the Pucci coefficient.
double closed_form_1d(const OperatorSpec& s, double length) {
  const double p = s.alpha + 2.0;
  const double pi_p = 2.0 * std::numbers::pi / (p * std::sin(std::numbers::pi / p));
  double a = s.a_field.is_constant() ? s.a_field.constant_value() : 1.0;
  if (s.principal == Principal::pucci_plus) a = s.a;
  if (s.principal == Principal::pucci_minus) a = s.A;
  return a * std::pow(pi_p / length, p);
}

std::pair<double, double> interval_ends(const Domain& d) {
  const auto* iv = std::get_if<Interval>(&d.shape());
  if (!iv) throw ConfigError("domain.kind: oracle1d needs an interval domain");
  return {iv->x_lo, iv->x_hi};
}

void put_warnings(json& result, const std::vector<std::string>& w) {
  json arr = json::array();
  for (const auto& s : w) arr.push_back(s);
  result["warnings"] = arr;
}

// --- commands ---------------------------------------------------------------

void cmd_solve(const ExperimentConfig& cfg, RunOutput& out) {
  const Setup s = make_setup(cfg, cfg.h);
  const DiscreteOperator& op = *s.op;
  const int dim = s.grid->dim();
  const GridFunction f = sample(cfg.solve.f, s.grid);
  const GridFunction g = sample(cfg.solve.g, s.grid);
  SolveResult res;
  if (cfg.solve.method == "induction") {
    if (!(cfg.solve.g.is_constant() && cfg.solve.g.constant_value() == 0.0))
      throw ConfigError("solve.g: induction requires zero boundary data");
    res = monotone_induction(op, cfg.solve.lambda, f, cfg.solver);
  } else {
    GridFunction u0(s.grid, 0.0);
    res = pseudo_time_solve(op, cfg.solve.lambda, f, g, u0, cfg.solver);
  }
  json r = {{"method", cfg.solve.method},
            {"lambda", cfg.solve.lambda},
            {"h", s.grid->h()},
            {"interior_nodes", static_cast<long long>(s.grid->interior().size())},
            {"report", report_json(res.report)},
            {"sup", sup_norm(res.u)},
            {"inf_interior", inf_interior(res.u)},
            {"sup_interior", sup_interior(res.u)}};
  if (cfg.solve.exact) {
    r["error_sup"] = interior_error(res.u, sample(*cfg.solve.exact, s.grid));
  } else {
    r["error_sup"] = nullptr;
  }
  (void)dim;
  out.result["result"] = r;
  put_warnings(out.result, s.warnings);
  out.csv["solution.csv"] = grid_csv(res.u, "u");
  out.csv["history.csv"] = history_csv(res.report);
  out.timing["solve_s"] = res.report.wall_time;
  if (!res.report.converged) {
    out.exit_code = not_converged;
    out.result["error"] = "solver did not converge: " + res.report.message;
  }
}

void cmd_eigen(const ExperimentConfig& cfg, RunOutput& out) {
  const Setup s = make_setup(cfg, cfg.h);
  const int dim = s.grid->dim();
  const EigenOptions o = eigen_options(cfg);
  json r = {{"h", s.grid->h()}, {"interior_nodes", static_cast<long long>(s.grid->interior().size())}};
  const auto t0 = Clock::now();
  std::optional<EigenResult> bar, under;
  if (cfg.eigen.which != "underline") {
    bar = lambda_bar(*s.op, o);
    r["lambda_bar"] = eigen_json(*bar, dim);
    if (o.eigenfunction) out.csv["eigenfunction.csv"] = grid_csv(bar->eigenfunction, "w");
    out.csv["bisection.csv"] = bisection_csv(*bar);
  }
  if (cfg.eigen.which != "bar") {
    under = lambda_underline(*s.op, o);
    r["lambda_underline"] = eigen_json(*under, dim);
    if (o.eigenfunction) {
      GridFunction neg = under->eigenfunction;
      neg.values() = -neg.values();
      out.csv["eigenfunction_underline.csv"] = grid_csv(neg, "w");
    }
    out.csv["bisection_underline.csv"] = bisection_csv(*under);
  }
  if (bar && under) {
    const double tol = std::max(bar->lambda_tol, under->lambda_tol);
    const double gap = bar->lambda_mid() - under->lambda_mid();
    r["gap"] = gap;
    r["values_differ"] = std::abs(gap) > 2.0 * tol;
  }
  out.timing["eigen_s"] = seconds_since(t0);
  out.result["result"] = r;
  put_warnings(out.result, s.warnings);
}

void cmd_bounds(const ExperimentConfig& cfg, RunOutput& out) {
  const Setup s = make_setup(cfg, cfg.h);
  const DiscreteOperator& op = *s.op;
  const int dim = s.grid->dim();
  const auto& w = cfg.bounds.witnesses;
  auto wants = [&](const char* k) { return std::find(w.begin(), w.end(), k) != w.end(); };
  json r = {{"h", s.grid->h()}};
  json certs = json::object();
  std::optional<Certificate> lower, upper;
  auto keep_lower = [&](const Certificate& c) {
    if (!lower || c.value > lower->value) lower = c;
  };
  if (wants("strip")) {
    const Certificate c = best_strip_certificate(op);
    certs["strip"] = certificate_json(c, dim);
    keep_lower(c);
  }
  if (wants("ball")) {
    upper = upper_bound_ball(op);
    certs["ball"] = certificate_json(*upper, dim);
  }
  std::optional<EigenResult> eig;
  if (wants("eigenfunction") || cfg.bounds.check_sandwich) {
    EigenOptions o = eigen_options(cfg);
    o.eigenfunction = wants("eigenfunction");
    eig = lambda_bar(op, o);
    r["lambda_bar"] = eigen_json(*eig, dim);
  }
  if (wants("eigenfunction")) {
    const Certificate c = certify_lower(op, eig->eigenfunction, "eigenfunction");
    certs["eigenfunction"] = certificate_json(c, dim);
    keep_lower(c);
  }
  if (wants("rayleigh")) {
    if (dim != 1 || op.spec().principal != Principal::isotropic) {
      r["rayleigh_1d"] = nullptr;
      r["rayleigh_note"] = "rayleigh_1d needs a one-dimensional isotropic operator";
    } else {
      const auto [lo, hi] = interval_ends(cfg.domain);
      const Field b = op.spec().b.empty() ? Field::constant(0.0) : op.spec().b[0];
      const RayleighResult rr =
          rayleigh_1d(op.spec().a_field, b, op.spec().alpha, 0.5 * (hi - lo), 0.5 * (hi + lo), cfg.bounds.rayleigh);
      r["rayleigh_1d"] = {{"value", rr.value}, {"stale", rr.stale}, {"iterations", rr.iterations}};
    }
  }
  r["certificates"] = certs;
  r["lower"] = lower ? json(lower->value) : json(nullptr);
  r["upper"] = upper ? json(upper->value) : json(nullptr);
  bool holds = true;
  if (cfg.bounds.check_sandwich && eig) {
    const bool lower_ok = !lower || lower->value <= eig->lambda_hi;
    const bool upper_ok = !upper || upper->value >= eig->lambda_lo;
    holds = lower_ok && upper_ok;
    r["sandwich"] = {{"lower_ok", lower_ok}, {"upper_ok", upper_ok}, {"holds", holds}};
  }
  out.result["result"] = r;
  put_warnings(out.result, s.warnings);
  if (!holds) {
    out.exit_code = check_failed;
    out.result["error"] = "certificates do not bracket the discrete eigenvalue";
  }
}

void cmd_oracle1d(const ExperimentConfig& cfg, RunOutput& out) {
  if (cfg.domain.dim() != 1) throw ConfigError("domain.kind: oracle1d needs an interval domain");
  const auto [lo, hi] = interval_ends(cfg.domain);
  const OperatorSpec& spec = cfg.op;
  const Oracle1dBlock& o = cfg.oracle1d;
  json r = json::object();
  const double lam = shooting_eigenvalue(spec, lo, hi, o.lambda_min, o.lambda_max, o.tol);
  r["shooting"] = lam;
  if (o.rayleigh && spec.principal == Principal::isotropic) {
    const Field b = spec.b.empty() ? Field::constant(0.0) : spec.b[0];
    const RayleighResult rr = rayleigh_1d(spec.a_field, b, spec.alpha, 0.5 * (hi - lo), 0.5 * (hi + lo),
                                          o.rayleigh_options);
    r["rayleigh_1d"] = {{"value", rr.value},
                        {"stale", rr.stale},
                        {"iterations", rr.iterations},
                        {"rel_diff_to_shooting", std::abs(rr.value / lam - 1.0)}};
  } else {
    r["rayleigh_1d"] = nullptr;
  }
  r["closed_form"] = is_1d_constant_ode(spec) ? json(closed_form_1d(spec, hi - lo)) : json(nullptr);
  if (o.scan_points > 0) {
    std::ostringstream os;
    os << "lambda,u_end\n";
    for (int i = 0; i < o.scan_points; ++i) {
      const double l =
          o.scan_points == 1 ? o.scan_lo : o.scan_lo + (o.scan_hi - o.scan_lo) * i / (o.scan_points - 1.0);
      os << fmt(l) << ',' << fmt(shooting_1d(spec, lo, hi, l)) << '\n';
    }
    out.csv["scan.csv"] = os.str();
  }
  out.result["result"] = r;
  put_warnings(out.result, {});
}

void cmd_convergence(const ExperimentConfig& cfg, RunOutput& out) {
  std::vector<double> hs = cfg.h_list;
  if (hs.size() < 3) throw ConfigError("grid.h_list: convergence needs at least 3 levels");
  std::sort(hs.begin(), hs.end(), std::greater<>());
  if (std::adjacent_find(hs.begin(), hs.end()) != hs.end()) throw ConfigError("grid.h_list: levels must differ");
  const ConvergenceBlock& c = cfg.convergence;
  std::optional<double> reference = c.reference;
  if (c.quantity == "eigen" && c.shooting_reference) {
    const auto [lo, hi] = interval_ends(cfg.domain);
    reference = shooting_eigenvalue(cfg.op, lo, hi, cfg.oracle1d.lambda_min, cfg.oracle1d.lambda_max,
                                    cfg.oracle1d.tol);
  }
  if (c.quantity == "solve" && !cfg.solve.exact) throw ConfigError("solve.exact: required for solve convergence");

  json levels = json::array();
  std::vector<double> values, errors;
  std::vector<std::string> warnings;
  for (double h : hs) {
    const Setup s = make_setup(cfg, h);
    warnings.insert(warnings.end(), s.warnings.begin(), s.warnings.end());
    json lvl = {{"h", s.grid->h()}, {"interior_nodes", static_cast<long long>(s.grid->interior().size())}};
    if (c.quantity == "eigen") {
      EigenOptions o = eigen_options(cfg);
      o.eigenfunction = false;
      const EigenResult e = lambda_bar(*s.op, o);
      values.push_back(e.lambda_mid());
      lvl["lambda_lo"] = e.lambda_lo;
      lvl["lambda_hi"] = e.lambda_hi;
      lvl["value"] = e.lambda_mid();
      if (reference) errors.push_back(std::abs(e.lambda_mid() - *reference));
    } else {
      const GridFunction f = sample(cfg.solve.f, s.grid);
      const GridFunction g = sample(cfg.solve.g, s.grid);
      const GridFunction exact = sample(*cfg.solve.exact, s.grid);
      const SolveResult res = pseudo_time_solve(*s.op, cfg.solve.lambda, f, g, GridFunction(s.grid, 0.0), cfg.solver);
      res.value();
      const double e = interior_error(res.u, exact);
      values.push_back(e);
      errors.push_back(e);
      lvl["value"] = e;
      lvl["report"] = report_json(res.report);
    }
    lvl["error"] = errors.size() == values.size() ? json(errors.back()) : json(nullptr);
    levels.push_back(lvl);
  }
  // Observed order between consecutive levels from the errors when an
  // oracle exists, otherwise from successive differences.
  std::ostringstream csv;
  csv << "h,value,error,order\n";
  for (std::size_t i = 0; i < hs.size(); ++i) {
    double order = std::numeric_limits<double>::quiet_NaN();
    if (i >= 1 && !errors.empty() && errors[i] > 0.0 && errors[i - 1] > 0.0) {
      order = std::log(errors[i - 1] / errors[i]) / std::log(hs[i - 1] / hs[i]);
    } else if (errors.empty() && i >= 2) {
      const double d1 = values[i - 1] - values[i - 2];
      const double d2 = values[i] - values[i - 1];
      if (d1 * d2 > 0.0) order = std::log(d1 / d2) / std::log(hs[i - 1] / hs[i]);
    }
    levels[i]["order"] = std::isfinite(order) ? json(order) : json(nullptr);
    csv << fmt(hs[i]) << ',' << fmt(values[i]) << ',' << (errors.empty() ? std::string() : fmt(errors[i])) << ','
        << (std::isfinite(order) ? fmt(order) : std::string()) << '\n';
  }
  json r = {{"quantity", c.quantity}, {"levels", levels}};
  r["reference"] = reference ? json(*reference) : json(nullptr);
  if (c.quantity == "eigen") {
    const RichardsonReport rr = richardson(hs, values, c.fallback_order);
    r["richardson"] = {{"order", rr.order}, {"order_estimated", rr.order_estimated}, {"extrapolate", rr.extrapolate}};
    r["richardson"]["error"] = reference ? json(std::abs(rr.extrapolate - *reference)) : json(nullptr);
  }
  out.csv["convergence.csv"] = csv.str();
  out.result["result"] = r;
  std::sort(warnings.begin(), warnings.end());
  warnings.erase(std::unique(warnings.begin(), warnings.end()), warnings.end());
  put_warnings(out.result, warnings);
}

// --- verify -----------------------------------------------------------------

struct Check {
  std::string name;
  bool passed = false;
  bool expected_failure = false;
  json detail;
};

/// -(F + b·∇w|∇w|^α) bound m for which w is a subsolution of G_h - c w >= -m.
double subsolution_level(const DiscreteOperator& op, const GridFunction& w) {
  double m = 0.0;
  const double alpha = op.spec().alpha;
  for (Index k : op.grid().interior()) {
    const double cu = op.zero_order_coef(op.grid().slot(k)) * signed_power(w[k], alpha);
    m = std::max(m, -(op.apply(w.values(), k) - cu));
  }
  return m * (1.0 + 1e-9) + 1e-12;
}

Check verify_eigenfunction(const ExperimentConfig& cfg, const Setup& base, const EigenResult& base_eig,
                           RunOutput& out) {
  const VerifyBlock& v = cfg.verify;
  std::vector<double> levels = v.h_levels.empty() ? std::vector<double>{cfg.h} : v.h_levels;
  std::sort(levels.begin(), levels.end(), std::greater<>());
  Check chk;
  chk.name = "eigenfunction";
  chk.passed = true;
  json per_level = json::array();
  std::vector<PrincipleReport> uppers;
  std::vector<double> holder;
  for (double h : levels) {
    const bool reuse = h == base.grid->h();
    std::optional<Setup> own;
    if (!reuse) own = make_setup(cfg, h);
    const Setup& s = reuse ? base : *own;
    const DiscreteOperator& op = *s.op;
    const int dim = s.grid->dim();
    EigenResult eig;
    if (reuse) {
      eig = base_eig;
    } else {
      EigenOptions o = eigen_options(cfg);
      o.eigenfunction = true;
      eig = lambda_bar(op, o);
    }
    const GridFunction& w = eig.eigenfunction;
    double bmax = 0.0;
    for (Index k : s.grid->boundary()) bmax = std::max(bmax, std::abs(w[k]));
    const double min_w = inf_interior(w);
    const double sup = sup_norm(w);
    const PrincipleReport smin = check_strong_min(op, w, eig.probe_lambda, v.collar);
    const PrincipleReport hopf = hopf_ratio(w, v.collar);
    const PrincipleReport upper = boundary_upper(op, w, subsolution_level(op, w), v.collar);
    const PrincipleReport lower = boundary_lower_quadratic(op, w, eig.probe_lambda, v.collar);
    ModulusOptions mo;
    mo.seed = cfg.seed;
    const double hm = holder_modulus(w, v.holder_gamma, mo);
    uppers.push_back(upper);
    holder.push_back(hm);
    const bool hopf_ok = hopf.passed && hopf.params.at("C_lo") > 0.0;
    const bool lower_ok = lower.passed && lower.params.at("gamma") > 0.0;
    const bool ok = min_w > 0.0 && std::abs(sup - 1.0) <= 1e-12 && bmax == 0.0 && smin.passed && hopf_ok &&
                    upper.passed && lower_ok && std::isfinite(hm);
    chk.passed = chk.passed && ok;
    per_level.push_back({{"h", h},
                         {"lambda_mid", eig.lambda_mid()},
                         {"passed", ok},
                         {"min_interior", min_w},
                         {"sup_norm", sup},
                         {"boundary_max", bmax},
                         {"strong_min", principle_json(smin, dim)},
                         {"hopf", principle_json(hopf, dim)},
                         {"boundary_upper", principle_json(upper, dim)},
                         {"boundary_lower", principle_json(lower, dim)},
                         {"holder_modulus", hm}});
    if (reuse) out.csv["eigenfunction.csv"] = grid_csv(w, "w");
  }
  chk.detail["levels"] = per_level;
  chk.detail["holder_gamma"] = v.holder_gamma;
  if (uppers.size() >= 2) {
    const PrincipleReport ref = boundary_upper_refinement(uppers);
    chk.detail["boundary_upper_refinement"] = principle_json(ref, base.grid->dim());
    chk.passed = chk.passed && ref.passed;
    // Hölder moduli must stay bounded: no level may exceed the coarsest by
    // more than the refinement tolerance, and none may exceed holder_bound.
    double worst = 0.0;
    for (double x : holder) worst = std::max(worst, x / holder.front() - 1.0);
    chk.detail["holder_growth"] = worst;
    const bool bounded = worst < 0.1 && (v.holder_bound == 0.0 || *std::max_element(holder.begin(), holder.end()) <=
                                                                      v.holder_bound);
    chk.detail["holder_bounded"] = bounded;
    chk.passed = chk.passed && bounded;
  } else {
    chk.detail["boundary_upper_refinement"] = nullptr;
    const bool bounded = v.holder_bound == 0.0 || holder.front() <= v.holder_bound;
    chk.detail["holder_bounded"] = bounded;
    chk.passed = chk.passed && bounded;
  }
  return chk;
}

Check verify_barriers(const ExperimentConfig& cfg, const DiscreteOperator& op) {
  Check chk;
  chk.name = "barriers";
  chk.passed = true;
  const int dim = op.grid().dim();
  for (const auto& name : cfg.verify.barriers) {
    const Barrier kind = barrier_from_string(name);
    const BarrierParams params = default_barrier_params(kind, op, cfg.verify.barrier_factor);
    const PrincipleReport rep = verify_barrier(kind, params, op);
    const std::string guarded = kind == Barrier::log_collar ? "C2" : "k";
    BarrierParams halved = params;
    halved[guarded] *= 0.5;
    bool guard = false;
    std::string guard_message;
    try {
      verify_barrier(kind, halved, op);
    } catch (const ParameterTooSmall& e) {
      guard = true;
      guard_message = e.what();
    }
    const bool ok = rep.passed && guard;
    chk.passed = chk.passed && ok;
    chk.detail[name] = {{"params", params_json(params)},
                        {"threshold", barrier_threshold(kind, op, params)},
                        {"report", principle_json(rep, dim)},
                        {"halved_parameter", guarded},
                        {"guard_triggered", guard},
                        {"guard_message", guard_message},
                        {"passed", ok}};
  }
  return chk;
}

Check verify_induction(const ExperimentConfig& cfg, const DiscreteOperator& op, double lambda_bar_h) {
  Check chk;
  chk.name = "induction";
  const GridFunction f(op.grid_ptr(), -1.0);
  SolveOptions below = cfg.solver;
  below.classify_early = false;
  below.accelerate = false;
  below.max_outer = std::max(below.max_outer, 5000);
  const SolveResult rb = monotone_induction(op, 0.5 * lambda_bar_h, f, below);
  SolveOptions above = cfg.solver;
  above.classify_early = true;
  above.max_outer = cfg.verify.induction_max_outer;
  const SolveResult ra = monotone_induction(op, 1.5 * lambda_bar_h, f, above);
  const bool below_ok = rb.report.converged && rb.report.monotone;
  const bool above_ok = ra.report.blew_up && ra.report.outer_iterations <= cfg.verify.induction_max_outer;
  chk.passed = below_ok && above_ok;
  chk.detail = {{"below", {{"lambda", 0.5 * lambda_bar_h}, {"report", report_json(rb.report)}, {"passed", below_ok}}},
                {"above", {{"lambda", 1.5 * lambda_bar_h}, {"report", report_json(ra.report)}, {"passed", above_ok}}}};
  return chk;
}

void cmd_verify(const ExperimentConfig& cfg, RunOutput& out) {
  const Setup s = make_setup(cfg, cfg.h);
  const DiscreteOperator& op = *s.op;
  const int dim = s.grid->dim();
  const VerifyBlock& v = cfg.verify;
  const auto& P = v.principles;
  auto wants = [&](const char* k) { return std::find(P.begin(), P.end(), k) != P.end(); };

  EigenOptions eo = eigen_options(cfg);
  eo.eigenfunction = true;
  auto t0 = Clock::now();
  const EigenResult eig = lambda_bar(op, eo);
  out.timing["eigen_s"] = seconds_since(t0);
  const double lam = eig.lambda_mid();

  std::vector<Check> checks;
  if (wants("max_principle")) {
    t0 = Clock::now();
    const SuiteReport suite = max_principle_suite(op, lam, lam - v.tau_offset, v.trials, cfg.seed, cfg.solver);
    checks.push_back({"max_principle", suite.passed, false, suite_json(suite, dim)});
    out.timing["max_principle_s"] = seconds_since(t0);
  }
  if (wants("sharpness")) {
    // Above the eigenvalue the eigenfunction itself is a positive
    // subsolution; the check must fail on exactly the τ premise.
    const double tau = lam + v.tau_offset;
    const PrincipleReport rep = check_max_principle(op, tau, eig.eigenfunction, lam);
    const bool informative = !rep.passed && rep.failed_premises == std::vector<std::string>{"tau < lambda_bar_h"} &&
                             rep.worst_violation > 0.5;
    Check c{"sharpness", informative, true, principle_json(rep, dim)};
    c.detail["informative"] = informative;
    checks.push_back(c);
  }
  if (wants("comparison")) {
    t0 = Clock::now();
    const SuiteReport suite = comparison_suite(op, v.comparison_trials, cfg.seed + 1, v.kappa, cfg.solver);
    checks.push_back({"comparison", suite.passed, false, suite_json(suite, dim)});
    out.timing["comparison_s"] = seconds_since(t0);
  }
  if (wants("eigenfunction")) {
    t0 = Clock::now();
    checks.push_back(verify_eigenfunction(cfg, s, eig, out));
    out.timing["eigenfunction_s"] = seconds_since(t0);
  }
  if (wants("barriers")) {
    t0 = Clock::now();
    checks.push_back(verify_barriers(cfg, op));
    out.timing["barriers_s"] = seconds_since(t0);
  }
  if (wants("induction")) {
    t0 = Clock::now();
    checks.push_back(verify_induction(cfg, op, lam));
    out.timing["induction_s"] = seconds_since(t0);
  }

  json list = json::array();
  bool all = true;
  for (const auto& c : checks) {
    all = all && c.passed;
    list.push_back({{"name", c.name}, {"passed", c.passed}, {"expected_failure", c.expected_failure},
                    {"detail", c.detail}});
  }
  out.result["result"] = {{"h", s.grid->h()}, {"lambda_bar", eigen_json(eig, dim)}, {"checks", list},
                          {"passed", all}};
  put_warnings(out.result, s.warnings);
  if (!all) {
    out.exit_code = check_failed;
    std::string failed;
    for (const auto& c : checks)
      if (!c.passed) failed += (failed.empty() ? "" : ", ") + c.name;
    out.result["error"] = "principle checks failed: " + failed;
  }
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << text;
}

}  // namespace

std::string dump(const json& j) { return j.dump(2) + "\n"; }

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const InvalidArgument*>(&e) ||
      dynamic_cast<const MeshTooCoarse*>(&e) || dynamic_cast<const HypothesisViolated*>(&e) ||
      dynamic_cast<const NonpositiveWitness*>(&e) || dynamic_cast<const ExponentUnresolved*>(&e) ||
      dynamic_cast<const ParameterTooSmall*>(&e))
    return validation_error;
  if (dynamic_cast<const NotConverged*>(&e) || dynamic_cast<const BlowUp*>(&e) ||
      dynamic_cast<const BracketInvalid*>(&e) || dynamic_cast<const StepFailure*>(&e) ||
      dynamic_cast<const DegenerateStep*>(&e))
    return not_converged;
  return internal_error;
}

RunOutput execute(Command command, const ExperimentConfig& config, const RunOptions& options) {
  ExperimentConfig cfg = config;
  if (options.seed) {
    cfg.seed = *options.seed;
    cfg.resolved["seed"] = cfg.seed;
  }
  Eigen::setNbThreads(std::max(1, options.threads));
  RunOutput out;
  out.result = {{"command", to_string(command)}, {"version", version}, {"config", cfg.resolved}};
  out.timing = json::object();
  const auto t0 = Clock::now();
  switch (command) {
    case Command::solve:
      cmd_solve(cfg, out);
      break;
    case Command::eigen:
      cmd_eigen(cfg, out);
      break;
    case Command::bounds:
      cmd_bounds(cfg, out);
      break;
    case Command::verify:
      cmd_verify(cfg, out);
      break;
    case Command::oracle1d:
      cmd_oracle1d(cfg, out);
      break;
    case Command::convergence:
      cmd_convergence(cfg, out);
      break;
  }
  out.timing["command"] = to_string(command);
  out.timing["threads"] = options.threads;
  out.timing["wall_time_s"] = seconds_since(t0);
  out.result["exit_code"] = out.exit_code;
  return out;
}

int run(Command command, const std::string& config_path, const RunOptions& options, std::ostream& err) {
  namespace fs = std::filesystem;
  RunOutput out;
  try {
    const ExperimentConfig cfg = load_config(config_path);
    out = execute(command, cfg, options);
  } catch (const std::exception& e) {
    const int code = exit_code_for(e);
    err << "demi " << to_string(command) << ": " << e.what() << "\n";
    if (code == validation_error) return code;
    out.exit_code = code;
    out.result = {{"command", to_string(command)}, {"version", version}, {"error", e.what()}, {"exit_code", code}};
    out.timing = json::object();
  }
  if (options.write_files) {
    try {
      fs::create_directories(options.out_dir);
      write_text(fs::path(options.out_dir) / "result.json", dump(out.result));
      write_text(fs::path(options.out_dir) / "timing.json", dump(out.timing));
      for (const auto& [name, text] : out.csv) write_text(fs::path(options.out_dir) / name, text);
    } catch (const std::exception& e) {
      err << "demi " << to_string(command) << ": " << e.what() << "\n";
      return internal_error;
    }
  }
  if (out.exit_code != ok && out.result.contains("error"))
    err << "demi " << to_string(command) << ": " << out.result["error"].get<std::string>() << "\n";
  if (!options.quiet && out.exit_code == ok)
    err << "demi " << to_string(command) << ": wrote " << (fs::path(options.out_dir) / "result.json").string() << "\n";
  return out.exit_code;
}

}  // namespace demi::cli

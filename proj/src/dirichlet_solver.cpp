#include "demi/dirichlet_solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <vector>

#include <Eigen/OrderingMethods>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "demi/errors.hpp"

namespace demi {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

double interior_sup(const GridFunction& u) {
  double m = 0.0;
  for (Index k : u.grid().interior()) m = std::max(m, std::abs(u[k]));
  return m;
}

// Inverse of z = |u|^alpha u.
double signed_root(double z, double alpha) {
  return std::copysign(std::pow(std::abs(z), 1.0 / (1.0 + alpha)), z);
}

double residual_norm(const DiscreteOperator& op, const GridFunction& u, double lambda, const GridFunction& f) {
  return interior_sup(op.residual(u, lambda, f));
}

// Certificates against λ̄_h from a positive grid function v (zero on the
// boundary): G_h[v] + λ|v|^α v >= 0 everywhere proves λ >= λ̄_h by the
// discrete maximum principle; G_h[v] + λ|v|^α v <= f <= 0 proves λ <= λ̄_h
// by the definition of λ̄_h.
enum class Verdict { none, above, below };

Verdict certify(const DiscreteOperator& op, const GridFunction& v, double lambda, const GridFunction& f) {
  const double alpha = op.spec().alpha;
  bool sub = true, super = true;
  for (Index k : op.grid().interior()) {
    if (!(v[k] > 0.0)) return Verdict::none;
    const double g = op.apply(v.values(), k) + lambda * signed_power(v[k], alpha);
    sub = sub && g >= 0.0;
    super = super && g <= f[k];
    if (!sub && !super) return Verdict::none;
  }
  return sub ? Verdict::above : (super ? Verdict::below : Verdict::none);
}

void finish(SolveReport& rep, std::chrono::steady_clock::time_point t0) {
  rep.converged = rep.status == SolveStatus::converged || rep.status == SolveStatus::projected_bounded;
  rep.blew_up = rep.status == SolveStatus::blew_up || rep.status == SolveStatus::projected_blow_up;
  rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

// The sparsity pattern covers every frame so one symbolic analysis serves
// every policy.
struct LinearWorkspace::Impl {
  explicit Impl(const DiscreteOperator& op) : op_(op) {
    const Grid& g = op.grid();
    const auto n = static_cast<Index>(g.interior().size());
    std::vector<Eigen::Triplet<double>> trip;
    std::vector<Index> pattern;
    for (Index s = 0; s < n; ++s) {
      op.row_pattern(s, pattern);
      for (Index node : pattern)
        if (g.slot(node) >= 0) trip.emplace_back(static_cast<int>(s), static_cast<int>(g.slot(node)), 0.0);
    }
    M_.resize(n, n);
    M_.setFromTriplets(trip.begin(), trip.end());
    M_.makeCompressed();
    rows_.resize(static_cast<std::size_t>(n));
    for (Index col = 0; col < n; ++col)
      for (Index p = M_.outerIndexPtr()[col]; p < M_.outerIndexPtr()[col + 1]; ++p)
        rows_[static_cast<std::size_t>(M_.innerIndexPtr()[p])].emplace_back(g.interior()[static_cast<std::size_t>(col)],
                                                                              p);
    for (auto& r : rows_) std::sort(r.begin(), r.end());
    lu_.analyzePattern(M_);
    values_.assign(static_cast<std::size_t>(M_.nonZeros()), 0.0);
  }

  bool solve(const FrozenCoefficients& fc, const GridFunction& u, const GridFunction& f, double dt,
             GridFunction& out) {
    const Grid& g = op_.grid();
    const auto n = static_cast<Index>(g.interior().size());
    std::fill(values_.begin(), values_.end(), 0.0);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    for (Index s = 0; s < n; ++s) {
      const Index k = g.interior()[static_cast<std::size_t>(s)];
      const auto& row = rows_[static_cast<std::size_t>(s)];
      op_.linear_row(fc, s, scratch_);
      for (const auto& [node, coef] : scratch_) {
        if (g.slot(node) >= 0) {
          const auto it = std::lower_bound(row.begin(), row.end(), std::make_pair(node, Index{-1}));
          values_[static_cast<std::size_t>(it->second)] -= coef;
        } else {
          rhs[s] += coef * u[node];
        }
      }
      rhs[s] -= f[k];
      if (std::isfinite(dt)) {
        const auto it = std::lower_bound(row.begin(), row.end(), std::make_pair(k, Index{-1}));
        values_[static_cast<std::size_t>(it->second)] += 1.0 / dt;
        rhs[s] += u[k] / dt;
      }
    }
    if (!factored_ || values_ != factored_values_) {
      std::copy(values_.begin(), values_.end(), M_.valuePtr());
      lu_.factorize(M_);
      ++factorizations;
      factored_ = lu_.info() == Eigen::Success;
      factored_values_ = values_;
      if (!factored_) return false;
    }
    const Eigen::VectorXd v = lu_.solve(rhs);
    if (!v.allFinite()) return false;
    out = u;
    for (Index s = 0; s < n; ++s) out[g.interior()[static_cast<std::size_t>(s)]] = v[s];
    return true;
  }

  // Solves J delta = -res on the interior for the residual Jacobian at u.
  bool newton(const FrozenCoefficients& fc, const GridFunction& u, const GridFunction& res, GridFunction& delta) {
    const Grid& g = op_.grid();
    const auto n = static_cast<Index>(g.interior().size());
    std::vector<double> vals(values_.size(), 0.0);
    Eigen::VectorXd rhs(n);
    for (Index s = 0; s < n; ++s) {
      const auto& row = rows_[static_cast<std::size_t>(s)];
      op_.jacobian_row(fc, u.values(), s, scratch_);
      for (const auto& [node, coef] : scratch_) {
        if (g.slot(node) < 0) continue;
        const auto it = std::lower_bound(row.begin(), row.end(), std::make_pair(node, Index{-1}));
        vals[static_cast<std::size_t>(it->second)] += coef;
      }
      rhs[s] = -res[g.interior()[static_cast<std::size_t>(s)]];
    }
    if (!newton_analyzed_) {
      newton_lu_.analyzePattern(M_);
      newton_analyzed_ = true;
    }
    Eigen::SparseMatrix<double> J = M_;
    std::copy(vals.begin(), vals.end(), J.valuePtr());
    newton_lu_.factorize(J);
    ++factorizations;
    if (newton_lu_.info() != Eigen::Success) return false;
    const Eigen::VectorXd v = newton_lu_.solve(rhs);
    if (!v.allFinite()) return false;
    delta = GridFunction(u.grid_ptr(), 0.0);
    for (Index s = 0; s < n; ++s) delta[g.interior()[static_cast<std::size_t>(s)]] = v[s];
    return true;
  }

  int factorizations = 0;

  const DiscreteOperator& op_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> newton_lu_;
  bool newton_analyzed_ = false;
  Eigen::SparseMatrix<double> M_;
  std::vector<std::vector<std::pair<Index, Index>>> rows_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
  std::vector<double> values_;
  std::vector<double> factored_values_;
  bool factored_ = false;
  std::vector<std::pair<Index, double>> scratch_;
};

LinearWorkspace::LinearWorkspace(const DiscreteOperator& op) : impl_(std::make_unique<Impl>(op)) {}
LinearWorkspace::~LinearWorkspace() = default;

bool LinearWorkspace::solve(const FrozenCoefficients& fc, const GridFunction& u, const GridFunction& f, double dt,
                            GridFunction& out) {
  return impl_->solve(fc, u, f, dt, out);
}

bool LinearWorkspace::newton(const FrozenCoefficients& fc, const GridFunction& u, const GridFunction& res,
                             GridFunction& delta) {
  return impl_->newton(fc, u, res, delta);
}

int LinearWorkspace::factorizations() const { return impl_->factorizations; }
const DiscreteOperator& LinearWorkspace::op() const { return impl_->op_; }

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged:
      return "converged";
    case SolveStatus::blew_up:
      return "blew_up";
    case SolveStatus::projected_bounded:
      return "projected_bounded";
    case SolveStatus::projected_blow_up:
      return "projected_blow_up";
    case SolveStatus::not_converged:
      return "not_converged";
  }
  return "not_converged";
}

const GridFunction& SolveResult::value() const {
  if (report.converged) return u;
  if (report.blew_up) throw BlowUp("solution exceeded the blow-up cap: " + report.message);
  throw NotConverged("solver did not converge: " + report.message);
}

double default_blowup_cap(const GridFunction& f, double alpha) {
  return 1e6 * std::pow(1.0 + interior_sup(f), 1.0 / (1.0 + alpha));
}

SolveResult pseudo_time_solve(const DiscreteOperator& op, double lambda, const GridFunction& f, double g,
                              const GridFunction& u0, const SolveOptions& opts, LinearWorkspace* workspace) {
  return pseudo_time_solve(op, lambda, f, GridFunction(op.grid_ptr(), g), u0, opts, workspace);
}

SolveResult pseudo_time_solve(const DiscreteOperator& op, double lambda, const GridFunction& f,
                              const GridFunction& g, const GridFunction& u0, const SolveOptions& opts,
                              LinearWorkspace* workspace) {
  const auto t0 = std::chrono::steady_clock::now();
  const Grid& grid = op.grid();
  const double alpha = op.spec().alpha;
  SolveResult out{u0, {}};
  SolveReport& rep = out.report;
  GridFunction& u = out.u;
  for (Index k = 0; k < grid.size(); ++k)
    if (!grid.is_interior(k)) u[k] = g[k];

  const double tol = opts.tol_residual * std::max(1.0, interior_sup(f));
  const double cap = opts.blowup_cap > 0.0 ? opts.blowup_cap : default_blowup_cap(f, alpha);
  double r = residual_norm(op, u, lambda, f);
  rep.residual_history.push_back(r);

  if (opts.scheme == StepScheme::explicit_euler) {
    while (r > tol && rep.steps < opts.max_steps) {
      if (interior_sup(u) > cap) break;
      const double dt = op.cfl_dt(u, lambda);
      const GridFunction res = op.residual(u, lambda, f);
      for (Index k : grid.interior()) u[k] += dt * res[k];
      ++rep.steps;
      r = residual_norm(op, u, lambda, f);
      rep.dt_history.push_back(dt);
      rep.residual_history.push_back(r);
    }
  } else {
    std::unique_ptr<LinearWorkspace> own;
    if (!workspace || &workspace->op() != &op) {
      own = std::make_unique<LinearWorkspace>(op);
      workspace = own.get();
    }
    LinearWorkspace& sys = *workspace;
    const int factorizations0 = sys.factorizations();
    const double theta = alpha > 0.0 ? 1.0 / (1.0 + alpha) : 1.0;
    double dt = inf;
    GridFunction v(u.grid_ptr());
    GridFunction cand(u.grid_ptr());
    if (alpha != 0.0 && sup_norm(g) == 0.0 && interior_sup(u) == 0.0 && interior_sup(f) > 0.0) {
      // From rest the gradient floor makes the frozen weight vanish. Solve
      // the unweighted problem and fit its scale by homogeneity instead.
      FrozenCoefficients fc = op.freeze(u, lambda);
      fc.weight.setOnes();
      fc.zero_order.setZero();
      if (sys.solve(fc, u, f, inf, v)) {
        const GridFunction zero(u.grid_ptr(), 0.0);
        const GridFunction av = op.residual(v, lambda, zero);
        double num = 0.0, den = 0.0;
        for (Index k : grid.interior()) {
          num += av[k] * f[k];
          den += av[k] * av[k];
        }
        const double s = den > 0.0 && num > 0.0 ? std::pow(num / den, 1.0 / (1.0 + alpha)) : 0.0;
        if (std::isfinite(s) && s > 0.0) {
          for (Index k : grid.interior()) cand[k] = s * v[k];
          for (Index k = 0; k < grid.size(); ++k)
            if (!grid.is_interior(k)) cand[k] = g[k];
          const double rc = residual_norm(op, cand, lambda, f);
          if (rc < r) {
            std::swap(u, cand);
            r = rc;
            rep.residual_history.push_back(r);
          }
        }
      }
    }
    int newton_skip = 0;
    while (r > tol && rep.steps < opts.max_steps) {
      if (interior_sup(u) > cap) break;
      const FrozenCoefficients fc = op.freeze(u, lambda);
      if (opts.newton && alpha != 0.0 && newton_skip-- <= 0) {
        // Damped Newton on the full residual; the frozen step below is the
        // fallback when no damping factor reduces the residual.
        bool accepted = false;
        if (sys.newton(fc, u, op.residual(u, lambda, f), v)) {
          for (double t = 1.0; t >= 1.0 / 16.0 && !accepted; t *= 0.5) {
            cand = u;
            for (Index k : grid.interior()) cand[k] += t * v[k];
            const double rc = residual_norm(op, cand, lambda, f);
            if (rc < (1.0 - 1e-4 * t) * r) {
              std::swap(u, cand);
              r = rc;
              accepted = true;
            }
          }
        }
        ++rep.steps;
        if (accepted) {
          rep.dt_history.push_back(inf);
          rep.residual_history.push_back(r);
          if (opts.verbosity > 1) std::fprintf(stderr, "  step %d newton r=%g\n", rep.steps, r);
          continue;
        }
        newton_skip = 2;
      }
      const bool ok = sys.solve(fc, u, f, dt, v);
      ++rep.steps;
      double rc = inf;
      double step_size = 0.0;
      if (ok) {
        cand = u;
        for (Index k : grid.interior()) {
          cand[k] = u[k] + theta * (v[k] - u[k]);
          step_size = std::max(step_size, std::abs(v[k] - u[k]));
        }
        rc = residual_norm(op, cand, lambda, f);
      }
      const double dt_floor = op.cfl_dt(u, lambda);
      if (ok && std::isfinite(rc) && (rc <= r || dt <= dt_floor)) {
        std::swap(u, cand);
        r = rc;
        rep.dt_history.push_back(dt);
        rep.residual_history.push_back(r);
        if (std::isfinite(dt)) {
          dt *= 2.0;
          if (dt > 1e12 * dt_floor) dt = inf;
        }
      } else {
        if (!std::isfinite(dt))
          dt = ok && step_size > 0.0 ? step_size / r : 1e3 * dt_floor;
        else
          dt /= 4.0;
        dt = std::max(dt, dt_floor);
      }
      if (opts.verbosity > 1) std::fprintf(stderr, "  step %d dt=%g r=%g\n", rep.steps, dt, r);
    }
    rep.factorizations = sys.factorizations() - factorizations0;
  }

  rep.residual = residual_norm(op, u, lambda, f);
  if (rep.residual <= tol) {
    rep.status = SolveStatus::converged;
  } else if (interior_sup(u) > cap || !u.values().allFinite()) {
    rep.status = SolveStatus::blew_up;
    rep.message = "sup-norm exceeded cap " + std::to_string(cap);
  } else {
    rep.status = SolveStatus::not_converged;
    std::ostringstream os;
    os << "residual " << rep.residual << " above tolerance " << tol << " after " << rep.steps << " steps";
    rep.message = os.str();
  }
  rep.sup_history.push_back(interior_sup(u));
  finish(rep, t0);
  return out;
}

SolveResult monotone_induction(const DiscreteOperator& op, double lambda, const GridFunction& f,
                               const SolveOptions& opts, LinearWorkspace* workspace) {
  const auto t0 = std::chrono::steady_clock::now();
  const Grid& grid = op.grid();
  const double alpha = op.spec().alpha;
  for (Index k : grid.interior())
    if (f[k] > 0.0) throw InvalidArgument("monotone_induction requires f <= 0");

  const double shift = std::max({0.0, op.bounds().c_max, -lambda});
  const double cap = opts.blowup_cap > 0.0 ? opts.blowup_cap : default_blowup_cap(f, alpha);

  std::unique_ptr<LinearWorkspace> own;
  if ((!workspace || &workspace->op() != &op) && opts.scheme == StepScheme::semi_implicit) {
    own = std::make_unique<LinearWorkspace>(op);
    workspace = own.get();
  }
  SolveResult out{GridFunction(op.grid_ptr(), 0.0), {}};
  SolveReport& rep = out.report;
  GridFunction& u = out.u;
  GridFunction fn(op.grid_ptr(), 0.0);

  double prev_delta = -1.0;
  double rho_prev = std::numeric_limits<double>::quiet_NaN();
  int settled = 0;
  bool extrapolated = false;
  bool decided = false;

  for (int n = 1; n <= opts.max_outer && !decided; ++n) {
    for (Index k : grid.interior()) fn[k] = f[k] - (lambda + shift) * signed_power(u[k], alpha);
    SolveOptions inner = opts;
    inner.blowup_cap = std::numeric_limits<double>::max();
    SolveResult step = pseudo_time_solve(op, -shift, fn, 0.0, u, inner, workspace);
    rep.steps += step.report.steps;
    rep.factorizations += step.report.factorizations;
    rep.outer_iterations = n;
    rep.residual_history.push_back(step.report.residual);
    if (step.report.status != SolveStatus::converged) {
      rep.status = SolveStatus::not_converged;
      rep.message = "inner solve failed at outer iteration " + std::to_string(n) + ": " + step.report.message;
      u = step.u;
      break;
    }

    double delta = 0.0;
    double delta_z = 0.0;
    double drop = 0.0;
    const double sup = interior_sup(step.u);
    for (Index k : grid.interior()) {
      const double d = step.u[k] - u[k];
      delta = std::max(delta, std::abs(d));
      delta_z = std::max(delta_z, std::abs(signed_power(step.u[k], alpha) - signed_power(u[k], alpha)));
      drop = std::max(drop, -d);
    }
    if (!extrapolated && drop > 1e-12 * std::max(sup, 1e-300) && drop > 1e-14) {
      rep.monotone = false;
      rep.monotone_violation = std::max(rep.monotone_violation, drop);
    }
    GridFunction prev = std::move(u);
    u = std::move(step.u);
    rep.sup_history.push_back(sup);
    rep.increment_history.push_back(delta);
    if (opts.verbosity > 0)
      std::fprintf(stderr, "outer %d sup=%.6e delta=%.3e steps=%d\n", n, sup, delta, step.report.steps);

    if (sup > cap) {
      rep.status = SolveStatus::blew_up;
      rep.message = "sup-norm " + std::to_string(sup) + " exceeded cap " + std::to_string(cap);
      break;
    }
    if (delta <= opts.tol_outer * std::max(1.0, sup)) {
      rep.status = SolveStatus::converged;
      break;
    }
    // The recursion is asymptotically affine in z = |u|^alpha u, so increments
    // of z contract or grow geometrically from the first iterations on.
    if (prev_delta > 0.0) {
      const double rho = delta_z / prev_delta;
      rep.growth_ratio = rho;
      if (std::isfinite(rho_prev) && std::abs(rho - rho_prev) <= 0.05 * std::abs(rho - 1.0))
        ++settled;
      else
        settled = 0;
      rho_prev = rho;
      if (settled >= 3) {
        if (opts.accelerate && rho < 1.0) {
          const double factor = rho / (1.0 - rho);
          for (Index k : grid.interior()) {
            const double z = signed_power(u[k], alpha);
            u[k] = signed_root(z + factor * (z - signed_power(prev[k], alpha)), alpha);
          }
          extrapolated = true;
          settled = 0;
          rho_prev = std::numeric_limits<double>::quiet_NaN();
          prev_delta = -1.0;
          continue;
        }
      }
    }
    prev_delta = delta_z;

    if (opts.classify_early && n % 4 == 0) {
      // Candidates: the iterate and its z-increment profile for the upper
      // side, z-extrapolations z_n + F (z_n - z_{n-1}) for the lower side.
      GridFunction cand(u.grid_ptr(), 0.0);
      Verdict v = certify(op, u, lambda, f);
      if (v == Verdict::none) {
        for (Index k : grid.interior())
          cand[k] = signed_root(signed_power(u[k], alpha) - signed_power(prev[k], alpha), alpha);
        if (certify(op, cand, lambda, f) == Verdict::above) v = Verdict::above;
      }
      const double r = rep.growth_ratio;
      std::vector<double> factors;
      if (r > 0.0 && r < 1.0) factors.push_back(r / (1.0 - r));
      for (double F = 1.0; F <= 1e6; F *= 10.0) factors.push_back(F);
      for (std::size_t i = 0; v == Verdict::none && i < factors.size(); ++i) {
        for (Index k : grid.interior()) {
          const double z = signed_power(u[k], alpha);
          cand[k] = signed_root(z + factors[i] * (z - signed_power(prev[k], alpha)), alpha);
        }
        if (certify(op, cand, lambda, f) == Verdict::below) v = Verdict::below;
      }
      if (v != Verdict::none) {
        rep.status = v == Verdict::above ? SolveStatus::projected_blow_up : SolveStatus::projected_bounded;
        rep.message = v == Verdict::above ? "certified: positive subsolution at lambda"
                                          : "certified: positive supersolution at lambda";
        decided = true;
      }
    }
  }
  if (rep.outer_iterations >= opts.max_outer && rep.status == SolveStatus::not_converged && rep.message.empty())
    rep.message = "no decision after " + std::to_string(opts.max_outer) + " outer iterations";

  rep.residual = residual_norm(op, u, lambda, f);
  finish(rep, t0);
  return out;
}

}  // namespace demi

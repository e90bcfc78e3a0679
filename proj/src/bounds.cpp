#include "demi/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <vector>

#include "demi/errors.hpp"

namespace demi {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

Certificate certify_lower(const DiscreteOperator& op, const GridFunction& phi, const std::string& witness) {
  const Grid& g = op.grid();
  const double alpha = op.spec().alpha;
  Certificate cert;
  cert.kind = Certificate::Kind::lower;
  cert.witness = witness;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (Index k : g.interior()) {
    if (!(phi[k] > 0.0)) {
      std::ostringstream os;
      os << "witness '" << witness << "' is not positive at interior node (" << g.point(k)[0] << ", "
         << g.point(k)[1] << "): " << phi[k];
      throw NonpositiveWitness(os.str());
    }
    const double ratio = -op.apply(phi.values(), k) / std::pow(phi[k], 1.0 + alpha);
    if (ratio < lo) {
      lo = ratio;
      cert.worst_index = k;
    }
    hi = std::max(hi, ratio);
  }
  cert.value = lo;
  cert.margin = hi - lo;
  if (cert.worst_index >= 0) cert.worst_node = g.point(cert.worst_index);
  return cert;
}

double StripWitness::operator()(const Point& x) const {
  const double y = x[0] - center;
  if (kind == WitnessKind::quadratic) {
    const double s = b1 > 0.0 ? 1.0 : (b1 < 0.0 ? -1.0 : 0.0);
    return 7.0 * R * R - y * y - 3.0 * s * R * y;
  }
  const double yy = b1 < 0.0 ? -y : y;
  return std::pow(3.0 * R, q) - std::pow(yy + 2.0 * R, q);
}

std::string StripWitness::describe() const {
  if (kind == WitnessKind::quadratic) return "strip_quadratic(R=" + fmt(R) + ", b1=" + fmt(b1) + ")";
  return "strip_power(R=" + fmt(R) + ", b1=" + fmt(b1) + ", q=" + fmt(q) + ")";
}

double strip_exponent(double k, double base) {
  if (k < 0.0 || base <= 1.0) throw InvalidArgument("strip_exponent needs k >= 0 and base > 1");
  if (k == 0.0) return 2.0;
  auto phi = [&](double q) { return k * std::pow(base, q) + 2.0 - q; };
  const double lb = std::log(base);
  const double q_star = -std::log(k * lb) / lb;  // minimiser of phi
  const double q_hi = std::min(q_star, 50.0);
  if (!(q_hi > 2.0) || phi(q_hi) > 0.0)
    throw ExponentUnresolved("no exponent q in (2, 50] solves q = " + fmt(k) + " * " + fmt(base) + "^q + 2");
  double lo = 2.0, hi = q_hi;
  for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (phi(mid) > 0.0 ? lo : hi) = mid;
  }
  return hi;
}

StripWitness strip_witness(double R, double b1, double a, double alpha, WitnessKind kind, ExponentReading reading,
                           double center) {
  if (!(R > 0.0) || !(a > 0.0) || !(alpha > -1.0)) throw InvalidArgument("strip_witness needs R > 0, a > 0, alpha > -1");
  StripWitness w;
  w.kind = kind;
  w.R = R;
  w.center = center;
  w.b1 = b1;
  if (kind == WitnessKind::power && b1 != 0.0) {
    const double k = reading == ExponentReading::times ? 2.0 * R * std::abs(b1) / a : R * std::abs(b1) / a;
    w.q = strip_exponent(k, reading == ExponentReading::times ? 3.0 : 2.3);
  }
  return w;
}

Certificate best_strip_certificate(const DiscreteOperator& op) {
  const Grid& g = op.grid();
  const Domain& dom = g.domain();
  const double R = dom.slab_half_width();
  const double center = dom.slab_center();
  double b_sum = 0.0, b_abs = 0.0;
  for (Index k : g.interior()) {
    const double b = op.drift(g.slot(k), 0);
    b_sum += b;
    b_abs = std::max(b_abs, std::abs(b));
  }
  const double b1 = b_sum < 0.0 ? -b_abs : b_abs;
  const double a = op.bounds().a_min;

  const GridPtr& gp = op.grid_ptr();
  Certificate best = certify_lower(op, GridFunction(gp, 1.0), "constant");
  auto consider = [&](const StripWitness& w, const std::string& extra) {
    Certificate c = certify_lower(op, GridFunction::from(gp, [&](const Point& x) { return w(x); }), w.describe() + extra);
    c.params = {{"R", w.R}, {"center", w.center}, {"b1", w.b1}, {"q", w.q}};
    if (c.value > best.value) best = c;
  };
  consider(strip_witness(R, b1, a, op.spec().alpha, WitnessKind::quadratic, ExponentReading::times, center), "");
  for (ExponentReading reading : {ExponentReading::times, ExponentReading::decimal}) {
    try {
      consider(strip_witness(R, b1, a, op.spec().alpha, WitnessKind::power, reading, center),
               reading == ExponentReading::times ? " [2*3^q]" : " [2.3^q]");
    } catch (const ExponentUnresolved&) {
    }
  }
  return best;
}

Certificate upper_bound_ball(const DiscreteOperator& op) {
  const Grid& g = op.grid();
  const OperatorSpec& spec = op.spec();
  const double alpha = spec.alpha;
  const int dim = g.dim();
  const Point x0 = g.domain().incenter();
  const double R = g.domain().inradius();
  const double q = (alpha + 2.0) / (alpha + 1.0);
  const double Rq = std::pow(R, q);

  Certificate cert;
  cert.kind = Certificate::Kind::upper;
  cert.witness = "ball_sigma(R=" + fmt(R) + ", q=" + fmt(q) + ")";
  cert.params = {{"R", R}, {"q", q}, {"x0", x0[0]}, {"y0", x0[1]}};
  double best = -std::numeric_limits<double>::infinity();
  double worst = std::numeric_limits<double>::infinity();
  for (Index k : g.interior()) {
    const Point& x = g.point(k);
    Eigen::Vector2d y = x - x0;
    if (dim == 1) y[1] = 0.0;
    const double r = y.norm();
    if (r >= R) continue;
    const double sigma = std::pow(std::pow(r, q) - Rq, 2) / (2.0 * q);
    double ratio;
    if (r <= 1e-14 * R) {
      // Limit of |∇σ|^α D²σ at the centre: -R^{q(1+α)} diag(q-1, 1).
      SymMat<double> M = SymMat<double>::Zero(dim, dim);
      const double s = std::pow(R, q * (1.0 + alpha));
      M(0, 0) = -s * (q - 1.0);
      if (dim == 2) M(1, 1) = -s;
      ratio = -principal_part(spec, x, M) / std::pow(sigma, 1.0 + alpha);
    } else {
      const double gp = std::pow(r, 2.0 * q - 1.0) - std::pow(r, q - 1.0) * Rq;
      const double gpp = (2.0 * q - 1.0) * std::pow(r, 2.0 * q - 2.0) - (q - 1.0) * std::pow(r, q - 2.0) * Rq;
      const Eigen::Vector2d n = y / r;
      Vec<double> p(dim);
      SymMat<double> H(dim, dim);
      if (dim == 1) {
        p[0] = gp * n[0];
        H(0, 0) = gpp;
      } else {
        p = gp * n;
        H = gpp * n * n.transpose() + (gp / r) * (Eigen::Matrix2d::Identity() - n * n.transpose());
      }
      const double w = std::pow(floored_norm(p, op.eps()), alpha);
      const Eigen::Vector2d b = spec.drift(x);
      double drift = 0.0;
      for (int i = 0; i < dim; ++i) drift += b[i] * p[i];
      ratio = (-eval_F(spec, x, p, H, op.eps()) - drift * w) / std::pow(sigma, 1.0 + alpha);
    }
    if (ratio > best) {
      best = ratio;
      cert.worst_index = k;
    }
    worst = std::min(worst, ratio);
  }
  if (cert.worst_index < 0) throw MeshTooCoarse("no interior node inside the inscribed ball");
  cert.worst_node = g.point(cert.worst_index);
  cert.value = best + op.bounds().c_sup;
  cert.margin = best - worst;
  return cert;
}

RayleighResult rayleigh_1d(const Field& a, const Field& b, double alpha, double R, double center,
                           const RayleighOptions& opts) {
  if (!(alpha > -1.0) || !(R > 0.0) || opts.nodes < 4) throw InvalidArgument("rayleigh_1d: bad arguments");
  const int n = opts.nodes;
  const double h = 2.0 * R / n;
  const double p = alpha + 2.0;
  auto xs = [&](double i) { return Point(center - R + i * h, 0.0); };

  // B on the half-step lattice by the trapezoid rule.
  std::vector<double> Bh(static_cast<std::size_t>(2 * n + 1), 0.0);
  auto integrand = [&](double i) { return (alpha + 1.0) * b(xs(i)) / a(xs(i)); };
  for (int j = 1; j <= 2 * n; ++j)
    Bh[static_cast<std::size_t>(j)] =
        Bh[static_cast<std::size_t>(j - 1)] + 0.25 * h * (integrand(0.5 * (j - 1)) + integrand(0.5 * j));
  std::vector<double> e_mid(static_cast<std::size_t>(n)), w_node(static_cast<std::size_t>(n + 1));
  for (int i = 0; i < n; ++i) e_mid[static_cast<std::size_t>(i)] = std::exp(Bh[static_cast<std::size_t>(2 * i + 1)]);
  for (int i = 0; i <= n; ++i)
    w_node[static_cast<std::size_t>(i)] =
        (alpha + 1.0) / a(xs(i)) * std::exp(Bh[static_cast<std::size_t>(2 * i)]) * h;

  const double hp = std::pow(h, 1.0 - p);
  auto spow = [&](double v) { return v == 0.0 ? 0.0 : std::copysign(std::pow(std::abs(v), p - 1.0), v); };
  auto numer = [&](const Eigen::VectorXd& u) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += std::pow(std::abs(u[i + 1] - u[i]), p) * e_mid[static_cast<std::size_t>(i)];
    return s * hp;
  };
  auto denom = [&](const Eigen::VectorXd& u) {
    double s = 0.0;
    for (int i = 1; i < n; ++i) s += w_node[static_cast<std::size_t>(i)] * std::pow(std::abs(u[i]), p);
    return s;
  };
  // Tridiagonal Sobolev preconditioner (-Δ_h) with Dirichlet ends.
  auto precondition = [&](const Eigen::VectorXd& gvec) {
    const int m = n - 1;
    std::vector<double> c(static_cast<std::size_t>(m)), d(static_cast<std::size_t>(m));
    const double diag = 2.0 / h, off = -1.0 / h;
    for (int i = 0; i < m; ++i) {
      const double denom_i = diag - (i > 0 ? off * c[static_cast<std::size_t>(i - 1)] : 0.0);
      c[static_cast<std::size_t>(i)] = off / denom_i;
      d[static_cast<std::size_t>(i)] =
          (gvec[i + 1] - (i > 0 ? off * d[static_cast<std::size_t>(i - 1)] : 0.0)) / denom_i;
    }
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n + 1);
    for (int i = m - 1; i >= 0; --i)
      out[i + 1] = d[static_cast<std::size_t>(i)] - (i < m - 1 ? c[static_cast<std::size_t>(i)] * out[i + 2] : 0.0);
    return out;
  };

  RayleighResult best;
  best.value = std::numeric_limits<double>::infinity();
  for (int rs = 0; rs < opts.restarts; ++rs) {
    std::mt19937_64 rng(opts.seed + static_cast<std::uint64_t>(rs));
    std::uniform_real_distribution<double> unif(0.1, 1.0);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(n + 1);
    for (int i = 1; i < n; ++i) {
      const double t = -1.0 + 2.0 * i / n;
      u[i] = unif(rng) * (1.0 - t * t);
    }
    u /= std::pow(denom(u), 1.0 / p);
    double Q = numer(u);
    double step = 1.0;
    bool stale = true;
    int it = 0;
    for (; it < opts.max_iterations; ++it) {
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(n + 1);
      for (int i = 0; i < n; ++i) {
        const double flux = p * hp * e_mid[static_cast<std::size_t>(i)] * spow(u[i + 1] - u[i]);
        grad[i] -= flux;
        grad[i + 1] += flux;
      }
      for (int i = 1; i < n; ++i) grad[i] -= Q * p * w_node[static_cast<std::size_t>(i)] * spow(u[i]);
      grad[0] = grad[n] = 0.0;
      const Eigen::VectorXd dir = precondition(grad);
      const double slope = grad.dot(dir);
      if (!(slope > 0.0)) {
        stale = false;
        break;
      }
      bool accepted = false;
      double Qn = Q;
      Eigen::VectorXd un;
      for (int half = 0; half < 60; ++half) {
        un = (u - step * dir).cwiseAbs();
        const double D = denom(un);
        Qn = numer(un) / D;
        if (Qn <= Q - 1e-4 * step * slope) {
          un /= std::pow(D, 1.0 / p);
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) break;
      const double decrease = Q - Qn;
      u = un;
      Q = Qn;
      step = std::min(2.0 * step, 1e6);
      if (decrease <= opts.tol * Q) {
        stale = false;
        break;
      }
    }
    if (Q < best.value) {
      best.value = Q;
      best.stale = stale;
      best.iterations = it;
    }
  }
  return best;
}

double shooting_1d(const OperatorSpec& spec, double x_lo, double x_hi, double lambda, double rtol) {
  const double alpha = spec.alpha;
  auto coef = [&](const Point& x, double Q) {
    switch (spec.principal) {
      case Principal::pucci_plus:
        return Q >= 0.0 ? spec.A : spec.a;
      case Principal::pucci_minus:
        return Q >= 0.0 ? spec.a : spec.A;
      case Principal::isotropic:
        break;
    }
    return spec.a_field(x);
  };
  auto rhs = [&](double x, const Eigen::Vector2d& s) {
    const Point pt(x, 0.0);
    const double b = spec.b.empty() ? 0.0 : spec.b[0](pt);
    const double v = s[1];
    const double Q = -(b * v + (lambda + spec.c(pt)) * signed_power(s[0], alpha));
    const double du = v == 0.0 ? 0.0 : std::copysign(std::pow(std::abs(v), 1.0 / (1.0 + alpha)), v);
    return Eigen::Vector2d(du, (alpha + 1.0) * Q / coef(pt, Q));
  };

  // Dormand-Prince 5(4) with embedded error control.
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;

  const double L = x_hi - x_lo;
  double x = x_lo;
  Eigen::Vector2d s(0.0, 1.0);
  double dx = 1e-3 * L;
  const double atol = 1e-12;
  while (x < x_hi) {
    dx = std::min(dx, x_hi - x);
    if (dx < 1e-14 * L) throw StepFailure("shooting step size underflow near x = " + fmt(x));
    const Eigen::Vector2d k1 = rhs(x, s);
    const Eigen::Vector2d k2 = rhs(x + c2 * dx, s + dx * a21 * k1);
    const Eigen::Vector2d k3 = rhs(x + c3 * dx, s + dx * (a31 * k1 + a32 * k2));
    const Eigen::Vector2d k4 = rhs(x + c4 * dx, s + dx * (a41 * k1 + a42 * k2 + a43 * k3));
    const Eigen::Vector2d k5 = rhs(x + c5 * dx, s + dx * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Eigen::Vector2d k6 = rhs(x + dx, s + dx * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const Eigen::Vector2d next = s + dx * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const Eigen::Vector2d k7 = rhs(x + dx, next);
    const Eigen::Vector2d err = dx * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    double errn = 0.0;
    for (int i = 0; i < 2; ++i)
      errn = std::max(errn, std::abs(err[i]) / (atol + rtol * std::max(std::abs(s[i]), std::abs(next[i]))));
    if (!std::isfinite(errn)) {
      dx *= 0.25;
      continue;
    }
    if (errn <= 1.0) {
      x += dx;
      s = next;
    }
    const double factor = errn == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(errn, -0.2), 0.2, 5.0);
    dx *= factor;
  }
  return s[0];
}

double shooting_eigenvalue(const OperatorSpec& spec, double x_lo, double x_hi, double lambda_min, double lambda_max,
                           double tol) {
  const int scan = 400;
  double lo = lambda_min;
  if (shooting_1d(spec, x_lo, x_hi, lo) <= 0.0) throw InvalidArgument("shooting_eigenvalue: no positive start at lambda_min");
  const double step = (lambda_max - lambda_min) / scan;
  for (int i = 1; i <= scan; ++i) {
    const double hi = lambda_min + i * step;
    const double f_hi = shooting_1d(spec, x_lo, x_hi, hi);
    if (f_hi <= 0.0) {
      double top = hi;
      while (top - lo > tol * std::max(1.0, std::abs(top))) {
        const double mid = 0.5 * (lo + top);
        (shooting_1d(spec, x_lo, x_hi, mid) > 0.0 ? lo : top) = mid;
      }
      return 0.5 * (lo + top);
    }
    lo = hi;
  }
  throw NotConverged("shooting_eigenvalue: no sign change in [" + fmt(lambda_min) + ", " + fmt(lambda_max) + "]");
}

}  // namespace demi

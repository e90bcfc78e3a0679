#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "demi/cli.hpp"
#include "demi/errors.hpp"

namespace demi::cli {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number, got " + std::string(v.type_name()));
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail(path, "must be finite");
  return x;
}

// Reads one JSON object. Every key read is copied to `resolved` with its
// default filled in; finish() rejects keys nobody asked for.
class Reader {
 public:
  Reader(const json* j, std::string path) : path_(std::move(path)) {
    if (j && !j->is_null()) {
      if (!j->is_object()) fail(path_, "expected an object");
      j_ = j;
    }
    resolved = json::object();
  }

  const json* raw(const std::string& key) {
    seen_.insert(key);
    if (!j_) return nullptr;
    const auto it = j_->find(key);
    if (it == j_->end() || it->is_null()) return nullptr;
    return &*it;
  }
  bool has(const std::string& key) const { return j_ && j_->contains(key) && !j_->at(key).is_null(); }
  std::string at(const std::string& key) const { return join(path_, key); }

  double number(const std::string& key, double def) {
    const json* v = raw(key);
    const double x = v ? as_number(*v, at(key)) : def;
    resolved[key] = x;
    return x;
  }
  std::optional<double> optional_number(const std::string& key) {
    const json* v = raw(key);
    if (!v) {
      resolved[key] = nullptr;
      return std::nullopt;
    }
    const double x = as_number(*v, at(key));
    resolved[key] = x;
    return x;
  }
  double positive(const std::string& key, double def) {
    const double x = number(key, def);
    if (!(x > 0.0)) fail(at(key), "must be positive, got " + std::to_string(x));
    return x;
  }
  long long integer(const std::string& key, long long def, long long min_value) {
    const json* v = raw(key);
    long long x = def;
    if (v) {
      if (!v->is_number_integer()) fail(at(key), "expected an integer");
      x = v->get<long long>();
    }
    if (x < min_value) fail(at(key), "must be at least " + std::to_string(min_value) + ", got " + std::to_string(x));
    resolved[key] = x;
    return x;
  }
  bool boolean(const std::string& key, bool def) {
    const json* v = raw(key);
    bool x = def;
    if (v) {
      if (!v->is_boolean()) fail(at(key), "expected true or false");
      x = v->get<bool>();
    }
    resolved[key] = x;
    return x;
  }
  std::string choice(const std::string& key, const std::string& def, const std::vector<std::string>& allowed) {
    const json* v = raw(key);
    std::string x = def;
    if (v) {
      if (!v->is_string()) fail(at(key), "expected a string");
      x = v->get<std::string>();
    }
    check_choice(x, at(key), allowed);
    resolved[key] = x;
    return x;
  }
  std::vector<std::string> choices(const std::string& key, const std::vector<std::string>& def,
                                   const std::vector<std::string>& allowed) {
    const json* v = raw(key);
    std::vector<std::string> out = def;
    if (v) {
      if (!v->is_array()) fail(at(key), "expected an array of strings");
      out.clear();
      for (std::size_t i = 0; i < v->size(); ++i) {
        const std::string p = at(key) + "[" + std::to_string(i) + "]";
        if (!(*v)[i].is_string()) fail(p, "expected a string");
        out.push_back((*v)[i].get<std::string>());
        check_choice(out.back(), p, allowed);
      }
    }
    resolved[key] = out;
    return out;
  }
  std::vector<double> numbers(const std::string& key) {
    const json* v = raw(key);
    std::vector<double> out;
    if (v) {
      if (!v->is_array()) fail(at(key), "expected an array of numbers");
      for (std::size_t i = 0; i < v->size(); ++i)
        out.push_back(as_number((*v)[i], at(key) + "[" + std::to_string(i) + "]"));
    }
    resolved[key] = out;
    return out;
  }

  void finish() const {
    if (!j_) return;
    for (const auto& [key, value] : j_->items())
      if (!seen_.count(key)) fail(at(key), "unknown key");
  }

  json resolved;

 private:
  static void check_choice(const std::string& x, const std::string& path, const std::vector<std::string>& allowed) {
    if (std::find(allowed.begin(), allowed.end(), x) != allowed.end()) return;
    std::string list;
    for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
    fail(path, "unknown value '" + x + "' (expected one of " + list + ")");
  }

  const json* j_ = nullptr;
  std::string path_;
  std::set<std::string> seen_;
};

Eigen::Vector2d vec2(const json* v, const std::string& path, const Eigen::Vector2d& def) {
  if (!v) return def;
  if (!v->is_array() || v->empty() || v->size() > 2) fail(path, "expected an array of one or two numbers");
  Eigen::Vector2d out = Eigen::Vector2d::Zero();
  for (std::size_t i = 0; i < v->size(); ++i)
    out[static_cast<Index>(i)] = as_number((*v)[i], path + "[" + std::to_string(i) + "]");
  return out;
}

json to_json(const Eigen::Vector2d& v) { return json::array({v[0], v[1]}); }

Field read_table(const std::string& file, const std::string& base_dir, double quantum, const std::string& path) {
  namespace fs = std::filesystem;
  const fs::path p = fs::path(file).is_absolute() ? fs::path(file) : fs::path(base_dir) / file;
  std::ifstream in(p);
  if (!in) fail(path, "cannot open table file '" + p.string() + "'");
  std::string line;
  if (!std::getline(in, line)) fail(path, "table file is empty");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() != 2 && header.size() != 3) fail(path, "table header must be x,value or x,y,value");
  std::vector<Point> pts;
  std::vector<double> vals;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        fail(path, "line " + std::to_string(lineno) + " of table file: '" + cell + "' is not a number");
      }
    }
    if (row.size() != header.size()) fail(path, "line " + std::to_string(lineno) + " of table file has wrong arity");
    pts.emplace_back(row[0], header.size() == 3 ? row[1] : 0.0);
    vals.push_back(row.back());
  }
  if (pts.empty()) fail(path, "table file has no rows");
  return Field::table(pts, vals, file, quantum);
}

Field parse_field(const json* v, const std::string& path, const std::string& base_dir, const Field& def,
                  json& resolved) {
  if (!v) {
    resolved = nullptr;
    if (const auto* c = std::get_if<Field::Constant>(&def.kind())) resolved = c->value;
    return def;
  }
  if (v->is_number()) {
    const double x = as_number(*v, path);
    resolved = x;
    return Field::constant(x);
  }
  Reader r(v, path);
  const std::string kind = r.choice("kind", "constant", {"constant", "linear", "quadratic", "radial", "table"});
  Field out;
  if (kind == "constant") {
    out = Field::constant(r.number("value", 0.0));
  } else if (kind == "linear") {
    const double value = r.number("value", 0.0);
    const Eigen::Vector2d g = vec2(r.raw("gradient"), r.at("gradient"), Eigen::Vector2d::Zero());
    r.resolved["gradient"] = to_json(g);
    out = Field::linear(value, g);
  } else if (kind == "quadratic") {
    const double value = r.number("value", 0.0);
    const Eigen::Vector2d g = vec2(r.raw("gradient"), r.at("gradient"), Eigen::Vector2d::Zero());
    r.resolved["gradient"] = to_json(g);
    Eigen::Matrix2d H = Eigen::Matrix2d::Zero();
    if (const json* hv = r.raw("hessian")) {
      if (!hv->is_array() || hv->empty() || hv->size() > 2) fail(r.at("hessian"), "expected a 1x1 or 2x2 array");
      for (std::size_t i = 0; i < hv->size(); ++i) {
        const std::string pi = r.at("hessian") + "[" + std::to_string(i) + "]";
        const json& row = (*hv)[i];
        if (!row.is_array() || row.size() != hv->size()) fail(pi, "hessian rows must match its size");
        for (std::size_t j = 0; j < row.size(); ++j)
          H(static_cast<Index>(i), static_cast<Index>(j)) = as_number(row[j], pi + "[" + std::to_string(j) + "]");
      }
      if (std::abs(H(0, 1) - H(1, 0)) > 1e-14 * (1.0 + H.norm())) fail(r.at("hessian"), "must be symmetric");
    }
    r.resolved["hessian"] = json::array({json::array({H(0, 0), H(0, 1)}), json::array({H(1, 0), H(1, 1)})});
    out = Field::quadratic(value, g, H);
  } else if (kind == "radial") {
    const Eigen::Vector2d c = vec2(r.raw("center"), r.at("center"), Eigen::Vector2d::Zero());
    r.resolved["center"] = to_json(c);
    const double value = r.number("value", 0.0);
    const double slope = r.number("slope", 0.0);
    const double power = r.positive("power", 1.0);
    out = Field::radial(c, value, slope, power);
  } else {
    const json* fv = r.raw("file");
    if (!fv || !fv->is_string()) fail(r.at("file"), "table fields need a file name");
    r.resolved["file"] = *fv;
    const double quantum = r.positive("quantum", 1e-6);
    out = read_table(fv->get<std::string>(), base_dir, quantum, path);
  }
  r.finish();
  resolved = r.resolved;
  return out;
}

Domain parse_domain(const json* v, json& resolved) {
  if (!v) fail("domain", "missing");
  Reader r(v, "domain");
  const std::string kind = r.choice("kind", "interval", {"interval", "rectangle", "disk"});
  std::optional<Domain> d;
  if (kind == "interval") {
    const double lo = r.number("x_lo", -1.0);
    const double hi = r.number("x_hi", 1.0);
    if (!(lo < hi)) fail("domain.x_hi", "must exceed x_lo");
    d = Domain::interval(lo, hi);
  } else if (kind == "rectangle") {
    const double xl = r.number("x_lo", 0.0), xh = r.number("x_hi", 1.0);
    const double yl = r.number("y_lo", 0.0), yh = r.number("y_hi", 1.0);
    if (!(xl < xh)) fail("domain.x_hi", "must exceed x_lo");
    if (!(yl < yh)) fail("domain.y_hi", "must exceed y_lo");
    d = Domain::rectangle(xl, xh, yl, yh);
  } else {
    const Eigen::Vector2d c = vec2(r.raw("center"), "domain.center", Eigen::Vector2d::Zero());
    r.resolved["center"] = to_json(c);
    d = Domain::disk(c, r.positive("radius", 1.0));
  }
  r.finish();
  resolved = r.resolved;
  return *d;
}

void parse_rayleigh(Reader& r, RayleighOptions& o) {
  o.nodes = static_cast<int>(r.integer("rayleigh_nodes", o.nodes, 8));
  o.restarts = static_cast<int>(r.integer("rayleigh_restarts", o.restarts, 1));
  o.max_iterations = static_cast<int>(r.integer("rayleigh_max_iterations", o.max_iterations, 1));
  o.tol = r.positive("rayleigh_tol", o.tol);
}

}  // namespace

std::string to_string(Command c) {
  switch (c) {
    case Command::solve:
      return "solve";
    case Command::eigen:
      return "eigen";
    case Command::bounds:
      return "bounds";
    case Command::verify:
      return "verify";
    case Command::oracle1d:
      return "oracle1d";
    case Command::convergence:
      return "convergence";
  }
  return "solve";
}

Command command_from_string(const std::string& s) {
  for (Command c : {Command::solve, Command::eigen, Command::bounds, Command::verify, Command::oracle1d,
                    Command::convergence})
    if (to_string(c) == s) return c;
  throw ConfigError("unknown command '" + s + "'");
}

ExperimentConfig parse_config(const json& j, const std::string& base_dir) {
  ExperimentConfig cfg;
  cfg.base_dir = base_dir;
  Reader top(&j, "");
  json& res = cfg.resolved;
  res = json::object();

  cfg.domain = parse_domain(top.raw("domain"), res["domain"]);
  const int dim = cfg.domain.dim();

  {
    Reader r(top.raw("grid"), "grid");
    const std::optional<double> h = r.optional_number("h");
    if (h && !(*h > 0.0)) fail("grid.h", "must be positive, got " + std::to_string(*h));
    cfg.h = h.value_or(0.0);
    cfg.h_list = r.numbers("h_list");
    for (std::size_t i = 0; i < cfg.h_list.size(); ++i)
      if (!(cfg.h_list[i] > 0.0)) fail("grid.h_list[" + std::to_string(i) + "]", "must be positive");
    cfg.grid.min_interior_per_axis = static_cast<int>(r.integer("min_interior_per_axis", 8, 1));
    if (!h && cfg.h_list.empty()) fail("grid.h", "missing (give h or h_list)");
    if (!h) cfg.h = cfg.h_list.back();
    r.finish();
    res["grid"] = r.resolved;
  }

  {
    Reader r(top.raw("operator"), "operator");
    OperatorSpec& op = cfg.op;
    op.alpha = r.number("alpha", 0.0);
    if (!(op.alpha > -1.0)) fail("operator.alpha", "must exceed -1");
    const std::string principal = r.choice("principal", "isotropic", {"isotropic", "pucci_plus", "pucci_minus"});
    op.principal = principal_from_string(principal);
    op.a = r.positive("a", 1.0);
    op.A = r.positive("A", std::max(1.0, op.a));
    if (op.A < op.a) fail("operator.A", "must be at least a");
    json tmp;
    op.a_field = parse_field(r.raw("a_field"), r.at("a_field"), base_dir, Field::constant(1.0), tmp);
    r.resolved["a_field"] = tmp;
    op.b.clear();
    json bres = json::array();
    if (const json* bv = r.raw("b")) {
      if (bv->is_array()) {
        if (bv->size() > static_cast<std::size_t>(dim))
          fail("operator.b", "has " + std::to_string(bv->size()) + " components in dimension " + std::to_string(dim));
        for (std::size_t i = 0; i < bv->size(); ++i) {
          op.b.push_back(parse_field(&(*bv)[i], "operator.b[" + std::to_string(i) + "]", base_dir, Field{}, tmp));
          bres.push_back(tmp);
        }
      } else {
        if (dim != 1) fail("operator.b", "must be an array of components in 2D");
        op.b.push_back(parse_field(bv, "operator.b", base_dir, Field{}, tmp));
        bres.push_back(tmp);
      }
    }
    r.resolved["b"] = bres;
    op.c = parse_field(r.raw("c"), r.at("c"), base_dir, Field::constant(0.0), tmp);
    r.resolved["c"] = tmp;
    r.finish();
    res["operator"] = r.resolved;
  }

  {
    Reader r(top.raw("discretization"), "discretization");
    cfg.disc.frames = static_cast<int>(r.integer("frames", 2, 1));
    if (cfg.disc.frames > 2) fail("discretization.frames", "must be 1 or 2");
    cfg.disc.eps = r.number("eps", 0.0);
    if (cfg.disc.eps < 0.0) fail("discretization.eps", "must be nonnegative (0 selects the default)");
    cfg.disc.gradient = r.choice("gradient", "one_sided_mean", {"one_sided_mean", "centered"}) == "centered"
                            ? GradientMode::centered
                            : GradientMode::one_sided_mean;
    r.finish();
    res["discretization"] = r.resolved;
  }

  {
    Reader r(top.raw("solver"), "solver");
    SolveOptions& o = cfg.solver;
    o.max_steps = static_cast<int>(r.integer("max_steps", o.max_steps, 1));
    o.tol_residual = r.positive("tol_residual", o.tol_residual);
    o.blowup_cap = r.number("blowup_cap", 0.0);
    if (o.blowup_cap < 0.0) fail("solver.blowup_cap", "must be nonnegative (0 selects the default)");
    o.scheme = r.choice("scheme", "semi_implicit", {"semi_implicit", "explicit_euler"}) == "explicit_euler"
                   ? StepScheme::explicit_euler
                   : StepScheme::semi_implicit;
    o.newton = r.boolean("newton", o.newton);
    o.max_outer = static_cast<int>(r.integer("max_outer", o.max_outer, 1));
    o.tol_outer = r.positive("tol_outer", o.tol_outer);
    o.classify_early = r.boolean("classify_early", o.classify_early);
    o.accelerate = r.boolean("accelerate", o.accelerate);
    r.finish();
    res["solver"] = r.resolved;
  }

  {
    Reader r(top.raw("solve"), "solve");
    SolveBlock& s = cfg.solve;
    s.lambda = r.number("lambda", 0.0);
    json tmp;
    s.f = parse_field(r.raw("f"), r.at("f"), base_dir, Field::constant(-1.0), tmp);
    r.resolved["f"] = tmp;
    s.g = parse_field(r.raw("g"), r.at("g"), base_dir, Field::constant(0.0), tmp);
    r.resolved["g"] = tmp;
    s.method = r.choice("method", "pseudo_time", {"pseudo_time", "induction"});
    if (const json* ev = r.raw("exact")) {
      s.exact = parse_field(ev, r.at("exact"), base_dir, Field{}, tmp);
      r.resolved["exact"] = tmp;
    } else {
      r.resolved["exact"] = nullptr;
    }
    r.finish();
    res["solve"] = r.resolved;
  }

  {
    Reader r(top.raw("eigen"), "eigen");
    EigenOptions& o = cfg.eigen.options;
    const auto lo = r.optional_number("lambda_lo");
    const auto hi = r.optional_number("lambda_hi");
    o.lambda_lo = lo.value_or(std::numeric_limits<double>::quiet_NaN());
    o.lambda_hi = hi.value_or(std::numeric_limits<double>::quiet_NaN());
    if (lo && hi && !(*lo < *hi)) fail("eigen.lambda_hi", "must exceed lambda_lo");
    o.lambda_tol = r.number("lambda_tol", 0.0);
    if (o.lambda_tol < 0.0) fail("eigen.lambda_tol", "must be nonnegative (0 selects the default)");
    o.max_bisections = static_cast<int>(r.integer("max_bisections", o.max_bisections, 1));
    o.eigenfunction = r.boolean("eigenfunction", true);
    o.polish_iterations = static_cast<int>(r.integer("polish_iterations", o.polish_iterations, 0));
    cfg.eigen.which = r.choice("which", "bar", {"bar", "underline", "both"});
    r.finish();
    res["eigen"] = r.resolved;
  }

  {
    Reader r(top.raw("bounds"), "bounds");
    cfg.bounds.witnesses =
        r.choices("witnesses", cfg.bounds.witnesses, {"strip", "ball", "eigenfunction", "rayleigh"});
    parse_rayleigh(r, cfg.bounds.rayleigh);
    cfg.bounds.rayleigh.seed = static_cast<std::uint64_t>(r.integer("rayleigh_seed", 1, 0));
    cfg.bounds.check_sandwich = r.boolean("check_sandwich", true);
    r.finish();
    res["bounds"] = r.resolved;
  }

  {
    Reader r(top.raw("verify"), "verify");
    VerifyBlock& v = cfg.verify;
    v.principles = r.choices("principles", v.principles,
                             {"max_principle", "sharpness", "comparison", "eigenfunction", "barriers", "induction"});
    v.trials = static_cast<int>(r.integer("trials", v.trials, 1));
    v.comparison_trials = static_cast<int>(r.integer("comparison_trials", v.comparison_trials, 1));
    v.tau_offset = r.positive("tau_offset", v.tau_offset);
    v.kappa = r.number("kappa", v.kappa);
    if (v.kappa < 0.0) fail("verify.kappa", "must be nonnegative");
    v.barriers = r.choices("barriers", v.barriers, {"log_collar", "hopf_exp", "distance_power"});
    v.barrier_factor = r.number("barrier_factor", v.barrier_factor);
    if (!(v.barrier_factor > 1.0)) fail("verify.barrier_factor", "must exceed 1");
    v.holder_gamma = r.number("holder_gamma", v.holder_gamma);
    if (!(v.holder_gamma > 0.0 && v.holder_gamma < 1.0)) fail("verify.holder_gamma", "must lie in (0, 1)");
    v.holder_bound = r.number("holder_bound", 0.0);
    if (v.holder_bound < 0.0) fail("verify.holder_bound", "must be nonnegative");
    v.h_levels = r.numbers("h_levels");
    for (std::size_t i = 0; i < v.h_levels.size(); ++i)
      if (!(v.h_levels[i] > 0.0)) fail("verify.h_levels[" + std::to_string(i) + "]", "must be positive");
    v.collar = r.number("collar", 0.0);
    if (v.collar < 0.0) fail("verify.collar", "must be nonnegative (0 selects the grid default)");
    v.induction_max_outer = static_cast<int>(r.integer("induction_max_outer", v.induction_max_outer, 1));
    r.finish();
    res["verify"] = r.resolved;
  }

  {
    Reader r(top.raw("oracle1d"), "oracle1d");
    Oracle1dBlock& o = cfg.oracle1d;
    o.lambda_min = r.number("lambda_min", o.lambda_min);
    o.lambda_max = r.number("lambda_max", o.lambda_max);
    if (!(o.lambda_min < o.lambda_max)) fail("oracle1d.lambda_max", "must exceed lambda_min");
    o.tol = r.positive("tol", o.tol);
    o.rayleigh = r.boolean("rayleigh", o.rayleigh);
    parse_rayleigh(r, o.rayleigh_options);
    o.rayleigh_options.seed = static_cast<std::uint64_t>(r.integer("rayleigh_seed", 1, 0));
    o.scan_points = static_cast<int>(r.integer("scan_points", 0, 0));
    o.scan_lo = r.number("scan_lo", o.lambda_min);
    o.scan_hi = r.number("scan_hi", o.lambda_max);
    if (o.scan_points > 0 && !(o.scan_lo < o.scan_hi)) fail("oracle1d.scan_hi", "must exceed scan_lo");
    r.finish();
    res["oracle1d"] = r.resolved;
  }

  {
    Reader r(top.raw("convergence"), "convergence");
    ConvergenceBlock& c = cfg.convergence;
    c.quantity = r.choice("quantity", "eigen", {"eigen", "solve"});
    if (const json* ref = r.raw("reference"); ref && ref->is_string()) {
      if (ref->get<std::string>() != "shooting") fail("convergence.reference", "expected a number or \"shooting\"");
      c.shooting_reference = true;
      r.resolved["reference"] = "shooting";
    } else {
      c.reference = r.optional_number("reference");
    }
    c.fallback_order = r.positive("fallback_order", c.fallback_order);
    r.finish();
    res["convergence"] = r.resolved;
  }

  cfg.seed = static_cast<std::uint64_t>(top.integer("seed", 1, 0));
  res["seed"] = cfg.seed;
  top.finish();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  const auto dir = std::filesystem::path(path).parent_path();
  return parse_config(j, dir.empty() ? "." : dir.string());
}

}  // namespace demi::cli

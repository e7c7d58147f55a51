#include "malbr/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <future>
#include <ostream>
#include <random>
#include <sstream>

#include "malbr/errors.hpp"

namespace malbr {

std::string RunConfig::scheme_label() const {
  if (scheme == "ws") return "ws" + std::to_string(stencil_interior_points);
  return scheme;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (tok.empty()) continue;
    out.push_back(std::stoi(tok));
  }
  if (out.empty()) throw ConfigError("empty integer list");
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw ConfigError("expected a boolean, got: " + v);
}

}  // namespace

void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
  try {
    if (key == "case") cfg.case_name = value;
    else if (key == "scheme") cfg.scheme = value;
    else if (key == "stencil.interior_points") cfg.stencil_interior_points = std::stoi(value);
    else if (key == "stencil.boundary_points") cfg.stencil_boundary_points = std::stoi(value);
    else if (key == "stencil.layer") cfg.stencil_layer = std::stoi(value);
    else if (key == "sizes") cfg.sizes = parse_int_list(value);
    else if (key == "newton.delta") cfg.newton.damping_base = std::stod(value);
    else if (key == "newton.tol") cfg.newton.residual_tolerance = std::stod(value);
    else if (key == "newton.max_iterations") cfg.newton.max_outer_iterations = std::stoi(value);
    else if (key == "output.dir") cfg.output_dir = value;
    else if (key == "output.timing") cfg.timing = parse_bool(value);
    else if (key == "jobs") cfg.jobs = std::stoi(value);
    else throw ConfigError("unknown config key: " + key);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError("bad value for " + key + ": " + value);
  }
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  RunConfig cfg;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value, got: " + line);
    apply_config_entry(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

DiscreteProblem make_problem(const TestCase& tc, int n) {
  DiscreteProblem p{Grid::discretize(ConvexDomain::box({0, 0}, {1, 1}), n), {}, {}, tc};
  const double h = p.grid.scale_h();
  const double h4 = h * h * h * h;
  p.rho.resize(p.grid.size());
  for (std::int32_t i = 0; i < p.grid.size(); ++i)
    p.rho[i] = h4 * tc.rhs(h * to_real(p.grid.point(i)));
  p.sigma = [h, exact = tc.exact](const Eigen::Vector2d& q) { return exact(h * q); };
  return p;
}

SchemeKind make_scheme(const RunConfig& cfg, const Grid& g) {
  if (cfg.scheme == "fd") return SchemeKind::fd();
  if (cfg.scheme == "ws")
    return SchemeKind::ws(Stencil::with_point_count(cfg.stencil_interior_points));
  if (cfg.scheme == "lbr" || cfg.scheme == "lbr-ext") {
    StencilFamilyConfig fc;
    fc.interior = Stencil::with_point_count(cfg.stencil_interior_points);
    fc.boundary = Stencil::with_point_count(cfg.stencil_boundary_points);
    fc.boundary_layer_width = cfg.stencil_layer;
    auto fam = std::make_shared<StencilFamily>(build_stencil_family(g, fc));
    return cfg.scheme == "lbr" ? SchemeKind::lbr_adaptive(std::move(fam))
                               : SchemeKind::lbr_extensive(std::move(fam));
  }
  throw ConfigError("unknown scheme: " + cfg.scheme);
}

namespace {

SweepRow run_one(const RunConfig& cfg, const TestCase& tc, int n) {
  SweepRow row;
  row.case_name = cfg.case_name;
  row.scheme = cfg.scheme_label();
  row.n = n;
  try {
    const DiscreteProblem p = make_problem(tc, n);
    const SchemeKind scheme = make_scheme(cfg, p.grid);
    auto [u, rep] = damped_newton(p.grid, scheme, p.rho, p.sigma, cfg.newton);
    const double h = p.grid.scale_h();
    double linf = 0, l2 = 0, l1 = 0;
    for (std::int32_t i = 0; i < p.grid.size(); ++i) {
      const double d = u.values[i] - tc.exact(h * to_real(p.grid.point(i)));
      linf = std::max(linf, std::abs(d));
      l2 += d * d;
      l1 += std::abs(d);
    }
    row.error_linf = linf;
    row.error_l2 = std::sqrt(h * h * l2);
    row.error_l1 = h * h * l1;
    row.newton_iters = rep.iterations;
    row.wall_seconds = rep.wall_seconds;
    switch (rep.status) {
      case NewtonStatus::Converged: row.status = "ok"; break;
      case NewtonStatus::MaxIterations: row.status = "max_iterations"; break;
      case NewtonStatus::Stalled: row.status = "stalled"; break;
      case NewtonStatus::LinearSolveFailed: row.status = "linear_solve_failed"; break;
    }
  } catch (const Error&) {
    row.status = "error";
  }
  return row;
}

}  // namespace

std::vector<SweepRow> run_convergence(const RunConfig& cfg) {
  const TestCase tc = make_case(cfg.case_name);
  std::vector<SweepRow> rows(cfg.sizes.size());
  if (cfg.jobs <= 1) {
    for (std::size_t k = 0; k < cfg.sizes.size(); ++k) rows[k] = run_one(cfg, tc, cfg.sizes[k]);
    return rows;
  }
  std::vector<std::future<SweepRow>> futs;
  futs.reserve(cfg.sizes.size());
  for (std::size_t k = 0; k < cfg.sizes.size(); ++k)
    futs.push_back(std::async(std::launch::async, [&, k] { return run_one(cfg, tc, cfg.sizes[k]); }));
  for (std::size_t k = 0; k < cfg.sizes.size(); ++k) rows[k] = futs[k].get();
  return rows;
}

std::string format_double(double v) {
  std::array<char, 64> buf;
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows, bool timing) {
  os << "case,scheme,n,error_linf,error_l2,error_l1,newton_iters,wall_seconds,status\n";
  for (const auto& r : rows) {
    os << r.case_name << ',' << r.scheme << ',' << r.n << ',' << format_double(r.error_linf)
       << ',' << format_double(r.error_l2) << ',' << format_double(r.error_l1) << ','
       << r.newton_iters << ',' << (timing ? format_double(r.wall_seconds) : "0") << ','
       << r.status << '\n';
  }
}

double fd_algebraic(const SymMatrix2& m) {
  const double d10 = m.m11, d01 = m.m22;
  const double d11 = m.quad(lvec(1, 1)), d1m1 = m.quad(lvec(1, -1));
  const double cross = d11 - d1m1;
  return d10 * d01 - cross * cross / 16.0;
}

double ws_algebraic(const Stencil& v, const SymMatrix2& m) {
  double best = std::numeric_limits<double>::infinity();
  bool any = false;
  for (const auto& f : v) {
    const LatticeVector g = perp(f);
    if (!v.contains(g) || !lex_less(f, g)) continue;
    any = true;
    const double df = std::max(0.0, m.quad(f)), dg = std::max(0.0, m.quad(g));
    best = std::min(best, (df / double(sq_norm(f))) * (dg / double(sq_norm(g))));
  }
  if (!any) throw InvalidStencil("stencil contains no orthogonal pair");
  return best;
}

double lbr_algebraic(const Stencil& v, const SymMatrix2& m) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& sb : enumerate_superbases(v)) {
    best = std::min(best, h_func(std::max(0.0, m.quad(sb[0])), std::max(0.0, m.quad(sb[1])),
                                 std::max(0.0, m.quad(sb[2]))));
  }
  return best;
}

ConsistencyMap consistency_map(const std::string& scheme, const Stencil& stencil,
                               const std::vector<double>& kappas,
                               const std::vector<double>& thetas) {
  ConsistencyMap map;
  map.kappas = kappas;
  map.thetas = thetas;
  map.error.resize(Eigen::Index(kappas.size()), Eigen::Index(thetas.size()));
  for (std::size_t i = 0; i < kappas.size(); ++i)
    for (std::size_t j = 0; j < thetas.size(); ++j) {
      const SymMatrix2 m = SymMatrix2::from_kappa_theta(kappas[i], thetas[j]);
      double value;
      if (scheme == "fd") value = fd_algebraic(m);
      else if (scheme == "ws") value = ws_algebraic(stencil, m);
      else if (scheme == "lbr") value = lbr_algebraic(stencil, m);
      else throw ConfigError("unknown scheme for the consistency map: " + scheme);
      map.error(Eigen::Index(i), Eigen::Index(j)) = (value - m.det()) / value;
    }
  return map;
}

void write_map_csv(std::ostream& os, const ConsistencyMap& map) {
  for (const double t : map.thetas) os << ',' << format_double(t);
  os << '\n';
  for (std::size_t i = 0; i < map.kappas.size(); ++i) {
    os << format_double(map.kappas[i]);
    for (std::size_t j = 0; j < map.thetas.size(); ++j)
      os << ',' << format_double(map.error(Eigen::Index(i), Eigen::Index(j)));
    os << '\n';
  }
}

void write_manifest(std::ostream& os, const RunConfig& cfg, const std::string& command) {
  os << "tool = malbr 0.1.0\n";
  os << "eigen = " << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.'
     << EIGEN_MINOR_VERSION << '\n';
  os << "compiler = " << __VERSION__ << '\n';
  os << "command = " << command << '\n';
  os << "case = " << cfg.case_name << '\n';
  os << "scheme = " << cfg.scheme << '\n';
  os << "stencil.interior_points = " << cfg.stencil_interior_points << '\n';
  os << "stencil.boundary_points = " << cfg.stencil_boundary_points << '\n';
  os << "stencil.layer = " << cfg.stencil_layer << '\n';
  os << "sizes = ";
  for (std::size_t k = 0; k < cfg.sizes.size(); ++k)
    os << (k ? "," : "") << cfg.sizes[k];
  os << '\n';
  os << "newton.delta = " << format_double(cfg.newton.damping_base) << '\n';
  os << "newton.tol = " << format_double(cfg.newton.residual_tolerance) << '\n';
  os << "newton.max_iterations = " << cfg.newton.max_outer_iterations << '\n';
  os << "output.dir = " << cfg.output_dir << '\n';
  os << "output.timing = " << (cfg.timing ? "on" : "off") << '\n';
  os << "jobs = " << cfg.jobs << '\n';
}

namespace {

SymMatrix2 random_spd(std::mt19937& rng, double max_cond) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double kappa = std::exp(0.5 * std::log(max_cond) * uni(rng));  // cond = kappa^2
  const double theta = M_PI * uni(rng);
  const double scale = std::exp(std::log(10.0) * (2.0 * uni(rng) - 1.0));
  SymMatrix2 m = SymMatrix2::from_kappa_theta(kappa, theta);
  m.m11 *= scale;
  m.m12 *= scale;
  m.m22 *= scale;
  return m;
}

bool check(std::ostream& os, const char* name, bool ok) {
  os << (ok ? "PASS " : "FAIL ") << name << '\n';
  return ok;
}

}  // namespace

int selftest(std::ostream& os) {
  int failures = 0;
  std::mt19937 rng(20240811);

  {  // acute decomposition round trip, bounded brute force
    bool ok = true;
    for (std::int64_t a = -8; a <= 8 && ok; ++a)
      for (std::int64_t b = -8; b <= 8 && ok; ++b) {
        const LatticeVector e = lvec(a, b);
        if (a == 0 || b == 0 || gcd_vec(e) != 1) continue;
        const auto [f, g] = decompose(e);
        ok = (f + g == e) && det(f, g) == 1 && dot(f, g) >= 0;
      }
    if (!check(os, "acute decomposition round trip", ok)) ++failures;
  }
  {  // Selling reduction: obtuse output, norm bound, decreasing energy
    bool ok = true;
    for (int t = 0; t < 200 && ok; ++t) {
      const SymMatrix2 m = random_spd(rng, 1e4);
      const auto res = selling_reduce(m);
      ok = res.superbase.is_obtuse(m);
      const double bound = 2.0 * m.condition() * (1 + 1e-12);
      for (int i = 0; i < 3; ++i) ok = ok && double(sq_norm(res.superbase[i])) <= bound;
      for (std::size_t k = 0; k + 1 < res.energy_trace.size(); ++k)
        ok = ok && res.energy_trace[k + 1] < res.energy_trace[k];
    }
    if (!check(os, "Selling reduction", ok)) ++failures;
  }
  {  // polygon area oracle against h
    std::uniform_real_distribution<double> uni(0.0, 10.0);
    bool ok = true;
    for (int t = 0; t < 200 && ok; ++t) {
      const SymMatrix2 m = random_spd(rng, 1e2);
      const Superbase sb = selling_reduce(m).superbase;
      const std::array<double, 3> d = {uni(rng), uni(rng), uni(rng)};
      const double area = polygon_area_oracle(d, sb);
      ok = std::abs(area - 4.0 * h_func(d[0], d[1], d[2])) <= 1e-9;
    }
    if (!check(os, "polygon area oracle matches h", ok)) ++failures;
  }
  {  // hierarchical evaluation equals the extensive sweep on convex data
    const Grid g = Grid::discretize(ConvexDomain::box({0, 0}, {1, 1}), 8);
    const auto fam = std::make_shared<StencilFamily>(
        build_stencil_family(g, StencilFamilyConfig{}));
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    bool ok = true;
    for (int t = 0; t < 5 && ok; ++t) {
      const double a = uni(rng), b = uni(rng), q = 0.5 + 0.4 * uni(rng);
      Field u;
      u.trace = [=](const Eigen::Vector2d& p) {
        return q * p.squaredNorm() + std::abs(a * p[0] + b * p[1]);
      };
      u.values.resize(g.size());
      for (std::int32_t i = 0; i < g.size(); ++i) u.values[i] = u.trace(to_real(g.point(i)));
      for (std::int32_t i = 0; i < g.size() && ok; ++i) {
        const LatticeVector x = g.point(i);
        std::vector<LatticeVector> ext(fam->at(i).begin(), fam->at(i).end());
        for (const auto& e : v_omega_set(g, x)) ext.push_back(e);
        const double brute = eval_lbr_extensive(g, u, x, Stencil::from_vectors(ext)).value;
        const double adaptive = eval_lbr_adaptive(g, u, x, *fam).value;
        ok = adaptive == brute;
      }
    }
    if (!check(os, "hierarchical evaluation equals extensive sweep", ok)) ++failures;
  }
  {  // FD consistency map vanishes
    std::vector<double> kappas, thetas;
    for (int i = 0; i < 10; ++i) {
      kappas.push_back(1.0 + 11.0 * i / 9.0);
      thetas.push_back(M_PI * i / 9.0);
    }
    const auto map = consistency_map("fd", Stencil::with_point_count(8), kappas, thetas);
    if (!check(os, "FD consistency map vanishes", map.error.cwiseAbs().maxCoeff() <= 1e-13))
      ++failures;
  }
  {  // quadratic recovery at a small resolution
    RunConfig cfg;
    cfg.sizes = {16};
    cfg.newton.residual_tolerance = 1e-13;
    const auto rows = run_convergence(cfg);
    if (!check(os, "quadratic recovery (n=16)",
               rows[0].status == "ok" && rows[0].error_linf <= 1e-8))
      ++failures;
  }
  return failures;
}

}  // namespace malbr

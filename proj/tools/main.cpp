#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "malbr/errors.hpp"
#include "malbr/harness.hpp"

namespace {

namespace fs = std::filesystem;
using namespace malbr;

struct CommonArgs {
  std::string config_path;
  RunConfig cfg;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "flat key = value config file");
  cmd->add_option("--case", args.cfg.case_name, "quadratic | smoothed_cone | flat | singular");
  cmd->add_option("--scheme", args.cfg.scheme, "fd | ws | lbr | lbr-ext");
  cmd->add_option("--stencil-points", args.cfg.stencil_interior_points,
                  "interior stencil cardinality (8, 16, 24, 48)");
  cmd->add_option("--boundary-points", args.cfg.stencil_boundary_points,
                  "boundary-layer stencil cardinality");
  cmd->add_option("--layer", args.cfg.stencil_layer, "boundary layer width in pixels");
  cmd->add_option("--newton-delta", args.cfg.newton.damping_base, "damping base in (0,1)");
  cmd->add_option("--newton-tol", args.cfg.newton.residual_tolerance,
                  "residual tolerance, lattice units");
  cmd->add_option("--output-dir", args.cfg.output_dir, "directory for CSV and manifest");
  cmd->add_option("--jobs", args.cfg.jobs, "parallel sweep jobs");
}

RunConfig resolve(const CommonArgs& args, const CLI::App* cmd) {
  if (args.config_path.empty()) return args.cfg;
  // Config file first, explicit flags override it.
  RunConfig cfg = parse_config_file(args.config_path);
  const RunConfig& fl = args.cfg;
  if (cmd->count("--case")) cfg.case_name = fl.case_name;
  if (cmd->count("--scheme")) cfg.scheme = fl.scheme;
  if (cmd->count("--stencil-points")) cfg.stencil_interior_points = fl.stencil_interior_points;
  if (cmd->count("--boundary-points")) cfg.stencil_boundary_points = fl.stencil_boundary_points;
  if (cmd->count("--layer")) cfg.stencil_layer = fl.stencil_layer;
  if (cmd->count("--newton-delta")) cfg.newton.damping_base = fl.newton.damping_base;
  if (cmd->count("--newton-tol")) cfg.newton.residual_tolerance = fl.newton.residual_tolerance;
  if (cmd->count("--output-dir")) cfg.output_dir = fl.output_dir;
  if (cmd->count("--jobs")) cfg.jobs = fl.jobs;
  return cfg;
}

std::string join_argv(int argc, char** argv) {
  std::ostringstream os;
  for (int i = 0; i < argc; ++i) os << (i ? " " : "") << argv[i];
  return os.str();
}

void emit_manifest(const RunConfig& cfg, const std::string& command) {
  fs::create_directories(cfg.output_dir);
  std::ofstream mf(fs::path(cfg.output_dir) / "manifest.txt");
  write_manifest(mf, cfg, command);
}

int do_solve(const RunConfig& cfg, int n, const std::string& command) {
  const DiscreteProblem p = make_problem(make_case(cfg.case_name), n);
  const SchemeKind scheme = make_scheme(cfg, p.grid);
  auto [u, rep] = damped_newton(p.grid, scheme, p.rho, p.sigma, cfg.newton);

  emit_manifest(cfg, command);
  std::ofstream out(fs::path(cfg.output_dir) / "solution.csv");
  out << "x1,x2,u\n";
  const double h = p.grid.scale_h();
  for (std::int32_t i = 0; i < p.grid.size(); ++i) {
    const Eigen::Vector2d x = h * to_real(p.grid.point(i));
    out << format_double(x[0]) << ',' << format_double(x[1]) << ','
        << format_double(u.values[i]) << '\n';
  }
  std::ofstream repf(fs::path(cfg.output_dir) / "report.csv");
  repf << "iteration,residual,scaled_residual,damping_exponent\n";
  for (std::size_t k = 0; k < rep.residual_history.size(); ++k) {
    repf << k << ',' << format_double(rep.residual_history[k]) << ','
         << format_double(rep.scaled_residual_history[k]) << ','
         << (k < rep.damping_history.size() ? std::to_string(rep.damping_history[k]) : "")
         << '\n';
  }
  std::cout << "status: " << (rep.converged ? "ok" : "not converged") << ", iterations "
            << rep.iterations << ", final residual "
            << format_double(rep.residual_history.empty() ? 0.0 : rep.residual_history.back())
            << "\n";
  return rep.converged ? 0 : 3;
}

int do_sweep(const RunConfig& cfg, const std::string& command) {
  const auto rows = run_convergence(cfg);
  emit_manifest(cfg, command);
  std::ofstream out(fs::path(cfg.output_dir) / "sweep.csv");
  write_sweep_csv(out, rows, cfg.timing);
  std::ostringstream echo;
  write_sweep_csv(echo, rows, cfg.timing);
  std::cout << echo.str();
  return 0;
}

int do_map(const RunConfig& cfg, double kappa_max, int kappa_count, int theta_count,
           const std::string& command) {
  std::vector<double> kappas(static_cast<std::size_t>(kappa_count), 0.0);
  std::vector<double> thetas(static_cast<std::size_t>(theta_count), 0.0);
  for (int i = 0; i < kappa_count; ++i)
    kappas[std::size_t(i)] = 1.0 + (kappa_max - 1.0) * i / std::max(1, kappa_count - 1);
  for (int j = 0; j < theta_count; ++j)
    thetas[std::size_t(j)] = M_PI * j / std::max(1, theta_count - 1);
  const std::string scheme = cfg.scheme == "lbr-ext" ? "lbr" : cfg.scheme;
  const auto map = consistency_map(
      scheme, Stencil::with_point_count(cfg.stencil_interior_points), kappas, thetas);
  emit_manifest(cfg, command);
  std::ofstream out(fs::path(cfg.output_dir) / "consistency_map.csv");
  write_map_csv(out, map);
  std::cout << "consistency map: " << kappa_count << " x " << theta_count << ", max entry "
            << format_double(map.error.maxCoeff()) << "\n";
  return 0;
}

int cli_main(int argc, char** argv) {
  CLI::App app{"Monge-Ampere Dirichlet solver on 2D lattices (MA-LBR, wide-stencil and "
               "finite-difference schemes)"};
  app.require_subcommand(1);

  CommonArgs solve_args, sweep_args, map_args;
  int solve_n = 65;
  double kappa_max = 12;
  int kappa_count = 50, theta_count = 50;

  CLI::App* solve = app.add_subcommand("solve", "solve one case at one resolution");
  add_common(solve, solve_args);
  solve->add_option("--n", solve_n, "grid resolution");

  CLI::App* sweep = app.add_subcommand("sweep", "convergence sweep over grid sizes");
  add_common(sweep, sweep_args);
  std::string sizes_str;
  sweep->add_option("--sizes", sizes_str, "comma separated grid sizes");

  CLI::App* cmap = app.add_subcommand("consistency-map",
                                      "relative consistency error on quadratics");
  add_common(cmap, map_args);
  cmap->add_option("--kappa-max", kappa_max, "largest kappa (condition number kappa^2)");
  cmap->add_option("--kappa-count", kappa_count, "kappa samples");
  cmap->add_option("--theta-count", theta_count, "theta samples");

  CLI::App* st = app.add_subcommand("selftest", "run the built-in invariant suite");
  (void)st;

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 2;
  }

  const std::string command = join_argv(argc, argv);
  try {
    if (solve->parsed()) return do_solve(resolve(solve_args, solve), solve_n, command);
    if (sweep->parsed()) {
      RunConfig cfg = resolve(sweep_args, sweep);
      if (sweep->count("--sizes")) {
        cfg.sizes.clear();
        std::stringstream ss(sizes_str);
        std::string tok;
        while (std::getline(ss, tok, ',')) cfg.sizes.push_back(std::stoi(tok));
      }
      return do_sweep(cfg, command);
    }
    if (cmap->parsed())
      return do_map(resolve(map_args, cmap), kappa_max, kappa_count, theta_count, command);
    if (st->parsed()) return selftest(std::cout) == 0 ? 0 : 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const UnknownCase& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) { return cli_main(argc, argv); }

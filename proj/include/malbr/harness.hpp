#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <string>
#include <vector>

#include "malbr/cases.hpp"
#include "malbr/solver.hpp"

namespace malbr {

struct RunConfig {
  std::string case_name = "quadratic";
  std::string scheme = "lbr";  // fd | ws | lbr | lbr-ext
  int stencil_interior_points = 8;
  int stencil_boundary_points = 48;
  int stencil_layer = 4;
  std::vector<int> sizes = {17, 33, 65};
  NewtonOptions newton;
  std::string output_dir = ".";
  bool timing = true;
  int jobs = 1;

  std::string scheme_label() const;
};

// Flat key = value text; '#' starts a comment.
RunConfig parse_config_file(const std::string& path);
void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value);

// Lattice-scaled problem data for one case at one resolution.
struct DiscreteProblem {
  Grid grid;
  Eigen::VectorXd rho;   // h^4 * rho_phys(h x)
  BoundaryTrace sigma;   // U(h p) on the lattice boundary
  TestCase tc;
};
DiscreteProblem make_problem(const TestCase& tc, int n);
SchemeKind make_scheme(const RunConfig& cfg, const Grid& g);

struct SweepRow {
  std::string case_name, scheme, status;
  int n = 0;
  double error_linf = 0, error_l2 = 0, error_l1 = 0;
  int newton_iters = 0;
  double wall_seconds = 0;
};

// One solve per configured size; solver failures become status rows.
std::vector<SweepRow> run_convergence(const RunConfig& cfg);
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows, bool timing);

struct ConsistencyMap {
  std::vector<double> kappas, thetas;
  Eigen::MatrixXd error;  // kappas down the rows, thetas across the columns
};

// Relative consistency error (D(u_M) - det M)/D(u_M) on quadratics, with the
// differences taken algebraically (no grid involved).
ConsistencyMap consistency_map(const std::string& scheme, const Stencil& stencil,
                               const std::vector<double>& kappas,
                               const std::vector<double>& thetas);
void write_map_csv(std::ostream& os, const ConsistencyMap& map);

// Operator values on the quadratic u_M, via Delta_e u_M = <e, M e>.
double lbr_algebraic(const Stencil& v, const SymMatrix2& m);
double ws_algebraic(const Stencil& v, const SymMatrix2& m);
double fd_algebraic(const SymMatrix2& m);

// Shortest round-trip decimal representation.
std::string format_double(double v);

void write_manifest(std::ostream& os, const RunConfig& cfg, const std::string& command);

// Compact invariant suite; prints one line per check, returns failure count.
int selftest(std::ostream& os);

}  // namespace malbr

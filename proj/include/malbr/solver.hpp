#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <optional>
#include <utility>
#include <vector>

#include "malbr/grid.hpp"
#include "malbr/schemes.hpp"

namespace malbr {

// Exact lower convex envelope of a finite set of lifted samples (p_k, w_k),
// evaluated pointwise: sup { a.x + b : a.p_k + b <= w_k for all k }.
class LowerEnvelope {
 public:
  LowerEnvelope(std::vector<Eigen::Vector2d> points, std::vector<double> values);
  double operator()(const Eigen::Vector2d& x) const;

 private:
  std::vector<Eigen::Vector2d> pts_;
  std::vector<double> vals_;
  std::vector<int> order_;  // fixed shuffled constraint order
  double slope_bound_ = 0, offset_bound_ = 0;
};

// Strictly convex start built from the boundary data alone: subtract
// eps|x|^2 from the trace, extend by the maximal convex interpolant of the
// boundary samples, and add eps|x|^2 back.
Field convex_init(const Grid& g, const BoundaryTrace& sigma);

// Direct sparse solve of J v = r (relative residual <= 1e-12, with one step
// of iterative refinement before giving up).
Eigen::VectorXd sparse_solve(const Eigen::SparseMatrix<double>& j, const Eigen::VectorXd& r);

struct NewtonOptions {
  double damping_base = 0.7;
  int max_outer_iterations = 200;
  int max_damping_exponent = 40;
  double residual_tolerance = 1e-10;  // on ||D u - rho||_inf, lattice units
  // Positivity gate on D(u + t v); defaults to "on" for every scheme but FD.
  std::optional<bool> require_positivity;
  // Accept the best residual over all gated exponents instead of the first
  // local minimum.
  bool global_min_damping = false;
};

enum class NewtonStatus { Converged, MaxIterations, Stalled, LinearSolveFailed };

struct NewtonReport {
  NewtonStatus status = NewtonStatus::MaxIterations;
  bool converged = false;
  int iterations = 0;
  std::vector<double> residual_history;         // lattice units, one per outer iterate
  std::vector<double> scaled_residual_history;  // divided by h^4
  std::vector<int> damping_history;             // accepted exponent k per step
  int non_monotone_steps = 0;
  double wall_seconds = 0;
};

// Damped Newton iteration u <- u + delta^k v on the discrete system
// D u = rho, v solving J v = -(D u - rho); k is the smallest gated exponent
// whose residual is a local minimum in k.
std::pair<Field, NewtonReport> damped_newton(const Grid& g, const SchemeKind& scheme,
                                             const Eigen::VectorXd& rho,
                                             const BoundaryTrace& sigma,
                                             const NewtonOptions& opts = {},
                                             const Field* initial = nullptr);

}  // namespace malbr

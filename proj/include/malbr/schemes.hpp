#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <array>
#include <memory>
#include <vector>

#include "malbr/grid.hpp"
#include "malbr/lattice.hpp"

namespace malbr {

// h(a,b,c) = bc when a >= b+c (and likewise permuting), else
// (ab+bc+ca)/2 - (a^2+b^2+c^2)/4. Defined on nonnegative triples,
// continuous and nondecreasing in each variable.
double h_func(double a, double b, double c);
std::array<double, 3> h_gradient(double a, double b, double c);

enum class SchemeType { FD, WS, LBRExtensive, LBRAdaptive };

struct SchemeKind {
  SchemeType type = SchemeType::FD;
  Stencil stencil;                              // WS
  std::shared_ptr<const StencilFamily> family;  // LBR variants
  double epsilon = 0;  // optional proper operator D u - epsilon u

  static SchemeKind fd() { return {SchemeType::FD, {}, nullptr, 0}; }
  static SchemeKind ws(Stencil v) { return {SchemeType::WS, std::move(v), nullptr, 0}; }
  static SchemeKind lbr_extensive(std::shared_ptr<const StencilFamily> f) {
    return {SchemeType::LBRExtensive, {}, std::move(f), 0};
  }
  static SchemeKind lbr_adaptive(std::shared_ptr<const StencilFamily> f) {
    return {SchemeType::LBRAdaptive, {}, std::move(f), 0};
  }
};

struct DerivRow {
  std::vector<std::pair<std::int32_t, double>> entries;  // may repeat indices
  double boundary_slot = 0;  // sensitivity to a uniform shift of the boundary data
};

struct ActiveInfo {
  enum class Kind { None, Pair, Superbase } kind = Kind::None;
  std::array<LatticeVector, 3> dirs = {LatticeVector::Zero(), LatticeVector::Zero(),
                                       LatticeVector::Zero()};
};

struct SchemeEval {
  double value = 0;
  ActiveInfo active;
  DerivRow derivative;
};

struct TraversalStats {
  int visited = 0;                      // refinement tests performed
  std::vector<LatticeVector> refined;   // directions accepted beyond V(x)
};

// Pointwise operator evaluations (reference path).
SchemeEval eval_fd(const Grid& g, const Field& u, const LatticeVector& x);
SchemeEval eval_ws(const Grid& g, const Field& u, const LatticeVector& x, const Stencil& v);
SchemeEval eval_lbr_extensive(const Grid& g, const Field& u, const LatticeVector& x,
                              const Stencil& v);
SchemeEval eval_lbr_adaptive(const Grid& g, const Field& u, const LatticeVector& x,
                             const StencilFamily& fam, TraversalStats* stats = nullptr);

namespace detail {
// Direction and minimizer bookkeeping shared by one stencil.
struct SchemeTables {
  std::vector<LatticeVector> reps;                     // lex-positive, sorted
  std::vector<std::array<int, 2>> pairs;               // WS orthogonal pairs
  std::vector<std::array<int, 3>> classes;             // LBR superbase rep indices
  std::vector<std::array<LatticeVector, 3>> class_dirs;  // (e,f,g) with e = f (+) g
};
}  // namespace detail

// Precomputed per-point difference geometry for one scheme on one grid; the
// boundary intersections and trace values are cached here once.
class SchemeContext {
 public:
  SchemeContext(const Grid& g, SchemeKind scheme, BoundaryTrace trace);

  const Grid& grid() const { return *grid_; }
  const SchemeKind& scheme() const { return scheme_; }

  // Raw operator value D u(x_i) (without the epsilon perturbation).
  double value_at(const Eigen::VectorXd& u, std::int32_t i) const;
  SchemeEval eval_at(const Eigen::VectorXd& u, std::int32_t i,
                     TraversalStats* stats = nullptr) const;
  Eigen::VectorXd values(const Eigen::VectorXd& u) const;

  // residual[i] = D u(x_i) - epsilon u_i - rho[i]; jacobian holds its u-derivative.
  void assemble(const Eigen::VectorXd& u, const Eigen::VectorXd& rho,
                Eigen::VectorXd& residual, Eigen::SparseMatrix<double>& jacobian) const;
  Eigen::VectorXd residual(const Eigen::VectorXd& u, const Eigen::VectorXd& rho) const;

 private:
  const detail::SchemeTables& tables_for(std::int32_t i) const;
  SchemeEval eval_point(const Eigen::VectorXd& u, std::int32_t i, bool derivative,
                        TraversalStats* stats) const;

  const Grid* grid_;
  SchemeKind scheme_;
  BoundaryTrace trace_;
  std::vector<detail::SchemeTables> tables_;  // one per distinct stencil (FD/WS: single)
  std::vector<std::vector<DiffGeom>> pdata_;  // per point, aligned with reps
};

}  // namespace malbr

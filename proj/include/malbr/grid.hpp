#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <variant>
#include <vector>

#include "malbr/lattice.hpp"

namespace malbr {

// Open bounded convex domain, in lattice coordinates.
class ConvexDomain {
 public:
  struct Box {
    Eigen::Vector2d lo, hi;
  };
  struct Disk {
    Eigen::Vector2d center;
    double radius;
  };
  struct Halfplane {
    Eigen::Vector2d n;
    double c;  // interior: <n,p> < c
  };
  struct Polygon {
    std::vector<Halfplane> sides;
  };

  static ConvexDomain box(const Eigen::Vector2d& lo, const Eigen::Vector2d& hi);
  static ConvexDomain disk(const Eigen::Vector2d& center, double radius);
  static ConvexDomain polygon(std::vector<Halfplane> sides);

  // Strict interior membership.
  bool contains(const Eigen::Vector2d& p) const;
  // Smallest t > 0 with x + t*dir on the boundary; requires contains(x).
  double ray_exit(const Eigen::Vector2d& x, const Eigen::Vector2d& dir) const;

  ConvexDomain scaled(double s) const;
  // Axis-aligned bounding box.
  void bounds(Eigen::Vector2d& lo, Eigen::Vector2d& hi) const;
  double diameter() const;

  bool is_box() const { return std::holds_alternative<Box>(shape_); }
  const std::variant<Box, Disk, Polygon>& shape() const { return shape_; }

 private:
  std::variant<Box, Disk, Polygon> shape_;
};

inline Eigen::Vector2d to_real(const LatticeVector& p) {
  return {double(p[0]), double(p[1])};
}

// Discretized domain X = Omega cap Z^2 (lattice coordinates), with the
// physical grid scale h attached.
class Grid {
 public:
  // Rescales the physical domain by n (h = 1/n) and collects the strictly
  // interior lattice points, row-major. Requires n >= 4.
  static Grid discretize(const ConvexDomain& physical, int n);

  std::int32_t size() const { return std::int32_t(points_.size()); }
  const LatticeVector& point(std::int32_t i) const { return points_[std::size_t(i)]; }
  const std::vector<LatticeVector>& points() const { return points_; }

  // Dense index of a lattice point, or -1 when not in X.
  std::int32_t index_of(const LatticeVector& p) const;
  bool contains_lattice(const LatticeVector& p) const { return index_of(p) >= 0; }

  const ConvexDomain& domain() const { return domain_; }
  double scale_h() const { return scale_h_; }
  double lattice_diameter() const { return domain_.diameter(); }

 private:
  ConvexDomain domain_ = ConvexDomain::box({0, 0}, {1, 1});
  double scale_h_ = 1;
  std::vector<LatticeVector> points_;
  std::int64_t lo0_ = 0, lo1_ = 0, n0_ = 0, n1_ = 0;
  std::vector<std::int32_t> table_;
};

using BoundaryTrace = std::function<double(const Eigen::Vector2d&)>;

// Unknown values on X together with the Dirichlet data on the boundary.
struct Field {
  Eigen::VectorXd values;
  BoundaryTrace trace;
};

struct BoundaryFraction {
  double hp = 1, hm = 1;
  bool plus_interior = true, minus_interior = true;
};

// Step fractions h+ and h- placing x + h+ e and x - h- e in X or on the
// boundary; when the endpoint is not in X the value comes from the trace.
BoundaryFraction boundary_fraction(const Grid& g, const LatticeVector& x,
                                   const LatticeVector& e);

// Precomputed geometry of one directional second difference at one point.
struct DiffGeom {
  double hp = 1, hm = 1;
  std::int32_t ip = -1, im = -1;  // interior endpoint indices, or -1
  double bp = 0, bm = 0;          // boundary values when the endpoint is -1
  double wp = 1, wc = -2, wm = 1; // derivative weights wrt (u+, u(x), u-)

  double apply(const Eigen::VectorXd& u, double ux) const {
    const double up = ip >= 0 ? u[ip] : bp;
    const double um = im >= 0 ? u[im] : bm;
    return wp * up + wc * ux + wm * um;
  }
};

DiffGeom make_diff_geom(const Grid& g, const BoundaryTrace& trace, const LatticeVector& x,
                        const LatticeVector& e);

// Boundary-aware second difference Delta_e u(x).
double second_difference(const Grid& g, const Field& u, const LatticeVector& x,
                         const LatticeVector& e);

// Whether e = f (+) g with all six points x+-e, x+-f, x+-g in Omega.
bool v_omega_contains(const Grid& g, const LatticeVector& x, const LatticeVector& e);

// Explicit enumeration of the above set (test and oracle use).
std::vector<LatticeVector> v_omega_set(const Grid& g, const LatticeVector& x);

struct StencilFamilyConfig {
  Stencil interior = v8_stencil();
  Stencil boundary = Stencil::with_point_count(48);
  int boundary_layer_width = 4;
};

// Per-point stencils V(x): the boundary stencil on a layer of the given
// width along the domain boundary, the interior stencil elsewhere, augmented
// where required so that every family property holds at every point.
class StencilFamily {
 public:
  struct Repair {
    std::int32_t point;
    std::vector<LatticeVector> added;
  };

  const Stencil& at(std::int32_t i) const { return stencils_[std::size_t(ids_[std::size_t(i)])]; }
  int stencil_id(std::int32_t i) const { return ids_[std::size_t(i)]; }
  const std::vector<Stencil>& distinct() const { return stencils_; }
  bool member(std::int32_t i, const LatticeVector& e) const { return at(i).contains(e); }
  const std::vector<Repair>& repairs() const { return repairs_; }

 private:
  friend StencilFamily build_stencil_family(const Grid& g, const StencilFamilyConfig& cfg);
  std::vector<int> ids_;
  std::vector<Stencil> stencils_;
  std::vector<Repair> repairs_;
};

StencilFamily build_stencil_family(const Grid& g, const StencilFamilyConfig& cfg);

// Structural checks of one per-point direction set (validator used by tests
// and by the self test).
bool hierarchy_ok(const std::vector<LatticeVector>& set);
std::vector<LatticeVector> reachability_violations(const Grid& g, const LatticeVector& x,
                                                   const Stencil& set);

}  // namespace malbr

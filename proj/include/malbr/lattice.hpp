#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "malbr/errors.hpp"

// Exact integer arithmetic on Z^2: acute-basis decomposition e = f (+) g and
// the associated tree of coprime vectors, Selling reduction of symmetric
// positive definite forms, stencil generation, and a polygon-area oracle.
namespace malbr {

using LatticeVector = Eigen::Matrix<std::int64_t, 2, 1>;

inline LatticeVector lvec(std::int64_t a, std::int64_t b) { return LatticeVector(a, b); }

// e^perp := (-b, a)
inline LatticeVector perp(const LatticeVector& e) { return lvec(-e[1], e[0]); }

inline std::int64_t sq_norm(const LatticeVector& e) { return e[0] * e[0] + e[1] * e[1]; }

inline std::int64_t det(const LatticeVector& f, const LatticeVector& g) {
  return f[0] * g[1] - f[1] * g[0];
}

inline std::int64_t dot(const LatticeVector& f, const LatticeVector& g) {
  return f[0] * g[0] + f[1] * g[1];
}

inline bool lex_less(const LatticeVector& a, const LatticeVector& b) {
  return a[0] != b[0] ? a[0] < b[0] : a[1] < b[1];
}

// Canonical representative of {e, -e}: the lexicographically positive one.
inline LatticeVector sign_rep(const LatticeVector& e) {
  if (e[0] > 0 || (e[0] == 0 && e[1] > 0)) return e;
  return -e;
}

std::int64_t gcd_vec(const LatticeVector& e);

// Unique direct acute basis (f,g) with f+g = e, det(f,g) = 1, <f,g> >= 0.
// Defined for coprime e with both coordinates nonzero; f and g lie in the
// same closed quadrant as e.
std::pair<LatticeVector, LatticeVector> decompose(const LatticeVector& e);

// The two tree successors (f+e, e+g) of e, where (f,g) = decompose(e).
std::pair<LatticeVector, LatticeVector> children(const LatticeVector& e);

// The unique tree predecessor of e, or nullopt when |e|^2 <= 2.
std::optional<LatticeVector> parent(const LatticeVector& e);

// Symmetric 2x2 matrix, stored by its three independent entries.
struct SymMatrix2 {
  double m11 = 0, m12 = 0, m22 = 0;

  static SymMatrix2 identity() { return {1, 0, 1}; }
  static SymMatrix2 diag(double a, double b) { return {a, 0, b}; }
  // M(kappa, theta) = kappa^-1 e_theta e_theta^T + kappa e_theta^perp e_theta^perp^T;
  // condition number kappa^2, first eigenvector at angle theta.
  static SymMatrix2 from_kappa_theta(double kappa, double theta);

  double det() const { return m11 * m22 - m12 * m12; }
  double trace() const { return m11 + m22; }
  bool is_spd() const { return m11 > 0 && det() > 0; }

  // <a, M b>
  template <class VA, class VB>
  double scal(const VA& a, const VB& b) const {
    const double a0 = static_cast<double>(a[0]), a1 = static_cast<double>(a[1]);
    const double b0 = static_cast<double>(b[0]), b1 = static_cast<double>(b[1]);
    return a0 * (m11 * b0 + m12 * b1) + a1 * (m12 * b0 + m22 * b1);
  }
  // ||e||_M^2 = <e, M e>
  template <class V>
  double quad(const V& e) const { return scal(e, e); }

  // Eigenvalues (ascending) from the closed form.
  std::array<double, 2> eigenvalues() const;
  // ||M|| ||M^-1|| for SPD M.
  double condition() const;

  Eigen::Matrix2d mat() const {
    Eigen::Matrix2d m;
    m << m11, m12, m12, m22;
    return m;
  }
};

// Triplet (e0,e1,e2) with e0+e1+e2 = 0 and |det(e1,e2)| = 1.
struct Superbase {
  std::array<LatticeVector, 3> e;

  static Superbase canonical() { return {{lvec(-1, -1), lvec(1, 0), lvec(0, 1)}}; }

  const LatticeVector& operator[](int i) const { return e[std::size_t(i)]; }
  bool valid() const;
  bool is_obtuse(const SymMatrix2& m) const;
  // sum_i <e_i, M e_i>
  double energy(const SymMatrix2& m) const;
  // Equal up to permutation and global sign flip.
  bool equivalent(const Superbase& other) const;
};

struct SellingResult {
  Superbase superbase;
  int iterations = 0;
  std::vector<double> energy_trace;  // one entry per visited superbase, strictly decreasing
};

// Selling reduction: iterate (e_i - e_j, e_j, -e_i) on the pair with positive
// M-scalar product (greatest product first, ties by smallest (i,j)) until the
// superbase is M-obtuse.
SellingResult selling_reduce(const SymMatrix2& m,
                             const Superbase& init = Superbase::canonical());

// Finite origin-symmetric set of coprime directions, in lexicographic order.
class Stencil {
 public:
  Stencil() = default;

  // Normalizes inputs (divide by gcd), symmetrizes, deduplicates, sorts.
  static Stencil from_vectors(const std::vector<LatticeVector>& vs);
  // All coprime e with ||e|| <= radius. Requires radius >= 1.
  static Stencil ball(double radius);
  // Named stencils of cardinality 8, 16, 24 or 48.
  static Stencil with_point_count(int count);

  std::size_t size() const { return vecs_.size(); }
  bool empty() const { return vecs_.empty(); }
  const std::vector<LatticeVector>& vectors() const { return vecs_; }
  auto begin() const { return vecs_.begin(); }
  auto end() const { return vecs_.end(); }
  bool contains(const LatticeVector& e) const;

  // Every element with |e|^2 > 2 has its tree predecessor in the stencil.
  bool parent_closed() const;
  bool contains_v8() const;

  bool operator==(const Stencil& other) const { return vecs_ == other.vecs_; }

 private:
  std::vector<LatticeVector> vecs_;
};

// The eight point stencil {(+-1,0),(0,+-1),(+-1,+-1)}.
const Stencil& v8_stencil();

// One superbase class per decomposable e in V whose components f,g are also
// in V, represented as (e,-f,-g) with e = f (+) g; classes with +-e are listed
// separately, in lexicographic order of e.
std::vector<Superbase> enumerate_superbases(const Stencil& v);

// Area of H(delta) = { l : |<l,e_i>| <= delta_i, i=0,1,2 } for the given
// superbase, by convex polygon clipping. Anti-regression oracle: equals
// 4*h(delta) for any superbase.
double polygon_area_oracle(const std::array<double, 3>& delta, const Superbase& sb);

}  // namespace malbr

#include "malbr/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "malbr/errors.hpp"

namespace malbr {

ConvexDomain ConvexDomain::box(const Eigen::Vector2d& lo, const Eigen::Vector2d& hi) {
  if (!(lo[0] < hi[0] && lo[1] < hi[1])) throw DomainTooSmall("degenerate box domain");
  ConvexDomain d;
  d.shape_ = Box{lo, hi};
  return d;
}

ConvexDomain ConvexDomain::disk(const Eigen::Vector2d& center, double radius) {
  if (!(radius > 0)) throw DomainTooSmall("degenerate disk domain");
  ConvexDomain d;
  d.shape_ = Disk{center, radius};
  return d;
}

ConvexDomain ConvexDomain::polygon(std::vector<Halfplane> sides) {
  if (sides.size() < 3) throw DomainTooSmall("polygon domain needs at least three sides");
  ConvexDomain d;
  d.shape_ = Polygon{std::move(sides)};
  Eigen::Vector2d lo, hi;
  d.bounds(lo, hi);  // throws when unbounded
  return d;
}

bool ConvexDomain::contains(const Eigen::Vector2d& p) const {
  if (const auto* b = std::get_if<Box>(&shape_)) {
    return p[0] > b->lo[0] && p[0] < b->hi[0] && p[1] > b->lo[1] && p[1] < b->hi[1];
  }
  if (const auto* d = std::get_if<Disk>(&shape_)) {
    return (p - d->center).squaredNorm() < d->radius * d->radius;
  }
  const auto& poly = std::get<Polygon>(shape_);
  for (const auto& s : poly.sides) {
    if (!(s.n.dot(p) < s.c)) return false;
  }
  return true;
}

double ConvexDomain::ray_exit(const Eigen::Vector2d& x, const Eigen::Vector2d& dir) const {
  if (const auto* b = std::get_if<Box>(&shape_)) {
    double t = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 2; ++i) {
      if (dir[i] > 0) t = std::min(t, (b->hi[i] - x[i]) / dir[i]);
      if (dir[i] < 0) t = std::min(t, (b->lo[i] - x[i]) / dir[i]);
    }
    return t;
  }
  if (const auto* d = std::get_if<Disk>(&shape_)) {
    const Eigen::Vector2d w = x - d->center;
    const double a = dir.squaredNorm();
    const double b = dir.dot(w);
    const double c = w.squaredNorm() - d->radius * d->radius;  // < 0 inside
    const double disc = std::sqrt(std::max(b * b - a * c, 0.0));
    return b <= 0 ? (disc - b) / a : -c / (b + disc);
  }
  const auto& poly = std::get<Polygon>(shape_);
  double t = std::numeric_limits<double>::infinity();
  for (const auto& s : poly.sides) {
    const double nd = s.n.dot(dir);
    if (nd > 0) t = std::min(t, (s.c - s.n.dot(x)) / nd);
  }
  return t;
}

ConvexDomain ConvexDomain::scaled(double s) const {
  ConvexDomain d = *this;
  if (auto* b = std::get_if<Box>(&d.shape_)) {
    b->lo *= s;
    b->hi *= s;
  } else if (auto* dk = std::get_if<Disk>(&d.shape_)) {
    dk->center *= s;
    dk->radius *= s;
  } else {
    for (auto& hp : std::get<Polygon>(d.shape_).sides) hp.c *= s;
  }
  return d;
}

void ConvexDomain::bounds(Eigen::Vector2d& lo, Eigen::Vector2d& hi) const {
  if (const auto* b = std::get_if<Box>(&shape_)) {
    lo = b->lo;
    hi = b->hi;
    return;
  }
  if (const auto* d = std::get_if<Disk>(&shape_)) {
    lo = d->center.array() - d->radius;
    hi = d->center.array() + d->radius;
    return;
  }
  // Polygon: bounding box of the vertices (pairwise side intersections that
  // satisfy every other constraint).
  const auto& sides = std::get<Polygon>(shape_).sides;
  bool any = false;
  lo = {0, 0};
  hi = {0, 0};
  for (std::size_t i = 0; i < sides.size(); ++i)
    for (std::size_t j = i + 1; j < sides.size(); ++j) {
      const double dd = sides[i].n[0] * sides[j].n[1] - sides[i].n[1] * sides[j].n[0];
      if (std::abs(dd) < 1e-14) continue;
      Eigen::Vector2d p;
      p[0] = (sides[i].c * sides[j].n[1] - sides[j].c * sides[i].n[1]) / dd;
      p[1] = (sides[i].n[0] * sides[j].c - sides[j].n[0] * sides[i].c) / dd;
      bool ok = true;
      for (std::size_t k = 0; k < sides.size() && ok; ++k) {
        if (k == i || k == j) continue;
        ok = sides[k].n.dot(p) <= sides[k].c + 1e-9 * (1 + std::abs(sides[k].c));
      }
      if (!ok) continue;
      if (!any) {
        lo = hi = p;
        any = true;
      } else {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
      }
    }
  if (!any) throw DomainTooSmall("polygon domain is empty or unbounded");
}

double ConvexDomain::diameter() const {
  Eigen::Vector2d lo, hi;
  bounds(lo, hi);
  return (hi - lo).norm();
}

Grid Grid::discretize(const ConvexDomain& physical, int n) {
  if (n < 4) throw PreconditionViolation("grid resolution must be at least 4");
  Grid g;
  g.domain_ = physical.scaled(double(n));
  g.scale_h_ = 1.0 / double(n);

  Eigen::Vector2d lo, hi;
  g.domain_.bounds(lo, hi);
  g.lo0_ = std::int64_t(std::floor(lo[0])) - 1;
  g.lo1_ = std::int64_t(std::floor(lo[1])) - 1;
  g.n0_ = std::int64_t(std::ceil(hi[0])) + 2 - g.lo0_;
  g.n1_ = std::int64_t(std::ceil(hi[1])) + 2 - g.lo1_;
  g.table_.assign(std::size_t(g.n0_ * g.n1_), -1);

  for (std::int64_t a = g.lo0_; a < g.lo0_ + g.n0_; ++a)
    for (std::int64_t b = g.lo1_; b < g.lo1_ + g.n1_; ++b) {
      const LatticeVector p = lvec(a, b);
      if (!g.domain_.contains(to_real(p))) continue;
      g.table_[std::size_t((a - g.lo0_) * g.n1_ + (b - g.lo1_))] =
          std::int32_t(g.points_.size());
      g.points_.push_back(p);
    }
  if (g.points_.empty()) throw DomainTooSmall("discretization contains no lattice point");
  return g;
}

std::int32_t Grid::index_of(const LatticeVector& p) const {
  const std::int64_t a = p[0] - lo0_, b = p[1] - lo1_;
  if (a < 0 || b < 0 || a >= n0_ || b >= n1_) return -1;
  return table_[std::size_t(a * n1_ + b)];
}

BoundaryFraction boundary_fraction(const Grid& g, const LatticeVector& x,
                                   const LatticeVector& e) {
  BoundaryFraction bf;
  const Eigen::Vector2d xr = to_real(x), er = to_real(e);
  if (!g.contains_lattice(x + e)) {
    bf.plus_interior = false;
    bf.hp = std::min(g.domain().ray_exit(xr, er), 1.0);
  }
  if (!g.contains_lattice(x - e)) {
    bf.minus_interior = false;
    bf.hm = std::min(g.domain().ray_exit(xr, -er), 1.0);
  }
  return bf;
}

DiffGeom make_diff_geom(const Grid& g, const BoundaryTrace& trace, const LatticeVector& x,
                        const LatticeVector& e) {
  DiffGeom d;
  d.ip = g.index_of(x + e);
  d.im = g.index_of(x - e);
  if (d.ip >= 0 && d.im >= 0) return d;  // plain centered difference
  const Eigen::Vector2d xr = to_real(x), er = to_real(e);
  if (d.ip < 0) {
    d.hp = std::min(g.domain().ray_exit(xr, er), 1.0);
    d.bp = trace(xr + d.hp * er);
  }
  if (d.im < 0) {
    d.hm = std::min(g.domain().ray_exit(xr, -er), 1.0);
    d.bm = trace(xr - d.hm * er);
  }
  d.wp = 2.0 / ((d.hp + d.hm) * d.hp);
  d.wm = 2.0 / ((d.hp + d.hm) * d.hm);
  d.wc = -(d.wp + d.wm);
  return d;
}

double second_difference(const Grid& g, const Field& u, const LatticeVector& x,
                         const LatticeVector& e) {
  const std::int32_t i = g.index_of(x);
  const DiffGeom d = make_diff_geom(g, u.trace, x, e);
  return d.apply(u.values, u.values[i]);
}

bool v_omega_contains(const Grid& g, const LatticeVector& x, const LatticeVector& e) {
  if (e[0] == 0 || e[1] == 0) return false;
  if (gcd_vec(e) != 1) return false;
  if (!g.contains_lattice(x + e) || !g.contains_lattice(x - e)) return false;
  auto [f, gg] = decompose(e);
  return g.contains_lattice(x + f) && g.contains_lattice(x - f) &&
         g.contains_lattice(x + gg) && g.contains_lattice(x - gg);
}

std::vector<LatticeVector> v_omega_set(const Grid& g, const LatticeVector& x) {
  std::vector<LatticeVector> out;
  const auto d = std::int64_t(std::ceil(g.lattice_diameter())) + 1;
  for (std::int64_t a = -d; a <= d; ++a)
    for (std::int64_t b = -d; b <= d; ++b) {
      const LatticeVector e = lvec(a, b);
      if (a == 0 || b == 0) continue;
      if (gcd_vec(e) != 1) continue;
      if (v_omega_contains(g, x, e)) out.push_back(e);
    }
  std::sort(out.begin(), out.end(), lex_less);
  return out;
}

bool hierarchy_ok(const std::vector<LatticeVector>& set) {
  std::vector<LatticeVector> sorted = set;
  std::sort(sorted.begin(), sorted.end(), lex_less);
  auto find = [&](const LatticeVector& e) {
    const auto it = std::lower_bound(sorted.begin(), sorted.end(), e, lex_less);
    return it != sorted.end() && *it == e ? int(it - sorted.begin()) : -1;
  };
  // Union by tree-predecessor links.
  std::vector<int> root(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) root[i] = int(i);
  std::function<int(int)> rep = [&](int i) {
    while (root[std::size_t(i)] != i) i = root[std::size_t(i)] = root[std::size_t(root[std::size_t(i)])];
    return i;
  };
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sq_norm(sorted[i]) <= 2) continue;
    const int j = find(*parent(sorted[i]));
    if (j >= 0) root[std::size_t(rep(int(i)))] = rep(j);
  }
  const auto& v8 = v8_stencil();
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    bool linked = false;
    for (std::size_t j = 0; j < sorted.size() && !linked; ++j)
      linked = rep(int(i)) == rep(int(j)) && v8.contains(sorted[j]);
    if (!linked) return false;
  }
  return true;
}

std::vector<LatticeVector> reachability_violations(const Grid& g, const LatticeVector& x,
                                                   const Stencil& set) {
  std::vector<LatticeVector> out;
  const auto d = std::int64_t(std::ceil(g.lattice_diameter())) + 1;
  for (std::int64_t a = -d; a <= d; ++a)
    for (std::int64_t b = -d; b <= d; ++b) {
      const LatticeVector e = lvec(a, b);
      if ((a == 0 && b == 0) || gcd_vec(e) != 1) continue;
      if (!g.contains_lattice(x + e) || !g.contains_lattice(x - e)) continue;
      if (e[0] == 0 || e[1] == 0) continue;  // axis directions sit in V8
      if (v_omega_contains(g, x, e)) continue;
      if (!set.contains(e)) out.push_back(e);
    }
  return out;
}

namespace {

// Ancestor closure of a direction: the chain of tree predecessors.
void add_with_ancestors(std::vector<LatticeVector>& vs, LatticeVector e) {
  while (true) {
    vs.push_back(e);
    const auto p = parent(e);
    if (!p) break;
    e = *p;
  }
}

}  // namespace

StencilFamily build_stencil_family(const Grid& g, const StencilFamilyConfig& cfg) {
  if (!cfg.interior.contains_v8() || !cfg.boundary.contains_v8())
    throw InvalidStencilConfig("stencils must contain the eight point stencil");
  if (!cfg.interior.parent_closed() || !cfg.boundary.parent_closed())
    throw InvalidStencilConfig("stencils must be closed under tree predecessors");

  StencilFamily fam;
  fam.stencils_ = {cfg.interior, cfg.boundary};
  fam.ids_.resize(std::size_t(g.size()), 0);

  static const std::array<LatticeVector, 4> axes = {lvec(1, 0), lvec(-1, 0), lvec(0, 1),
                                                    lvec(0, -1)};
  for (std::int32_t i = 0; i < g.size(); ++i) {
    const Eigen::Vector2d xr = to_real(g.point(i));
    double dist = std::numeric_limits<double>::infinity();
    for (const auto& a : axes) dist = std::min(dist, g.domain().ray_exit(xr, to_real(a)));
    fam.ids_[std::size_t(i)] = std::floor(dist) <= double(cfg.boundary_layer_width) ? 1 : 0;
  }

  // (Reachability) repairs. Vacuous on a box, and at any point whose four
  // axis neighbours are interior.
  if (!g.domain().is_box()) {
    for (std::int32_t i = 0; i < g.size(); ++i) {
      const LatticeVector x = g.point(i);
      bool axes_inside = true;
      for (const auto& a : axes) axes_inside = axes_inside && g.contains_lattice(x + a);
      if (axes_inside) continue;
      const Stencil& cur = fam.at(i);
      const auto missing = reachability_violations(g, x, cur);
      if (missing.empty()) continue;
      std::vector<LatticeVector> vs(cur.begin(), cur.end());
      for (const auto& e : missing) add_with_ancestors(vs, e);
      Stencil repaired = Stencil::from_vectors(vs);
      int id = -1;
      for (std::size_t k = 0; k < fam.stencils_.size(); ++k)
        if (fam.stencils_[k] == repaired) id = int(k);
      if (id < 0) {
        id = int(fam.stencils_.size());
        fam.stencils_.push_back(std::move(repaired));
      }
      fam.ids_[std::size_t(i)] = id;
      fam.repairs_.push_back({i, missing});
    }
  }
  return fam;
}

}  // namespace malbr

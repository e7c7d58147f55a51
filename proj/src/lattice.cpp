#include "malbr/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace malbr {

namespace {

constexpr std::int64_t kCoordLimit = std::int64_t(1) << 31;

void check_magnitude(const LatticeVector& e) {
  if (std::abs(e[0]) >= kCoordLimit || std::abs(e[1]) >= kCoordLimit)
    throw LatticeOverflow("lattice vector coordinates exceed the exact arithmetic range");
}

// pi/2 rotation and its inverse.
LatticeVector rot90(const LatticeVector& e) { return lvec(-e[1], e[0]); }
LatticeVector rot270(const LatticeVector& e) { return lvec(e[1], -e[0]); }

// Extended gcd: returns (g, s, t) with a*s + b*t = g, for a,b >= 0.
std::array<std::int64_t, 3> ext_gcd(std::int64_t a, std::int64_t b) {
  std::int64_t s0 = 1, t0 = 0, s1 = 0, t1 = 1;
  while (b != 0) {
    const std::int64_t q = a / b;
    std::int64_t r = a - q * b;
    a = b;
    b = r;
    std::int64_t s2 = s0 - q * s1, t2 = t0 - q * t1;
    s0 = s1;
    t0 = t1;
    s1 = s2;
    t1 = t2;
  }
  return {a, s0, t0};
}

// Decomposition of e with both coordinates positive: the Bezout construction
// with 0 <= u < a, so that g = (u,v), f = e - g.
std::pair<LatticeVector, LatticeVector> decompose_positive(const LatticeVector& e) {
  const std::int64_t a = e[0], b = e[1];
  auto [g, s, t] = ext_gcd(a, b);
  (void)g;
  // a*s + b*t = 1  ->  a*v - b*u = 1 with v = s, u = -t.
  std::int64_t v = s, u = -t;
  std::int64_t k = u >= 0 ? u / a : -((-u + a - 1) / a);
  u -= k * a;
  v -= k * b;
  const LatticeVector gv = lvec(u, v);
  const LatticeVector fv = e - gv;
  return {fv, gv};
}

}  // namespace

std::int64_t gcd_vec(const LatticeVector& e) {
  if (e[0] == 0 && e[1] == 0) throw InvalidVector("gcd of the zero vector");
  return std::gcd(std::abs(e[0]), std::abs(e[1]));
}

std::pair<LatticeVector, LatticeVector> decompose(const LatticeVector& e) {
  check_magnitude(e);
  if (e[0] == 0 || e[1] == 0)
    throw NoDecomposition("vector on a coordinate axis admits no acute decomposition");
  if (gcd_vec(e) != 1)
    throw NoDecomposition("vector with non-coprime coordinates admits no acute decomposition");
  // Rotate into the positive quadrant, decompose, rotate back.
  LatticeVector w = e;
  int k = 0;
  while (!(w[0] > 0 && w[1] > 0)) {
    w = rot90(w);
    ++k;
  }
  auto [f, g] = decompose_positive(w);
  for (; k > 0; --k) {
    f = rot270(f);
    g = rot270(g);
  }
  return {f, g};
}

std::pair<LatticeVector, LatticeVector> children(const LatticeVector& e) {
  auto [f, g] = decompose(e);
  check_magnitude(e + e);
  return {f + e, e + g};
}

std::optional<LatticeVector> parent(const LatticeVector& e) {
  if (gcd_vec(e) != 1) throw InvalidVector("parent requires coprime coordinates");
  if (sq_norm(e) <= 2) return std::nullopt;
  auto [f, g] = decompose(e);
  // Exactly one of f -> e, g -> e is a tree edge: the component of larger norm.
  return sq_norm(f) > sq_norm(g) ? f : g;
}

SymMatrix2 SymMatrix2::from_kappa_theta(double kappa, double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  const double lo = 1.0 / kappa, hi = kappa;
  SymMatrix2 m;
  m.m11 = lo * c * c + hi * s * s;
  m.m22 = lo * s * s + hi * c * c;
  m.m12 = (lo - hi) * c * s;
  return m;
}

std::array<double, 2> SymMatrix2::eigenvalues() const {
  const double mid = 0.5 * (m11 + m22);
  const double s = std::hypot(0.5 * (m11 - m22), m12);
  return {mid - s, mid + s};
}

double SymMatrix2::condition() const {
  const auto ev = eigenvalues();
  if (ev[0] <= 0) return std::numeric_limits<double>::infinity();
  return ev[1] / ev[0];
}

bool Superbase::valid() const {
  if ((e[0] + e[1] + e[2]) != LatticeVector::Zero()) return false;
  return std::abs(det(e[1], e[2])) == 1;
}

bool Superbase::is_obtuse(const SymMatrix2& m) const {
  return m.scal(e[0], e[1]) <= 0 && m.scal(e[0], e[2]) <= 0 && m.scal(e[1], e[2]) <= 0;
}

double Superbase::energy(const SymMatrix2& m) const {
  return m.quad(e[0]) + m.quad(e[1]) + m.quad(e[2]);
}

bool Superbase::equivalent(const Superbase& other) const {
  auto key = [](std::array<LatticeVector, 3> v) {
    std::sort(v.begin(), v.end(), lex_less);
    return v;
  };
  const auto a = key(e);
  if (a == key(other.e)) return true;
  return a == key({-other.e[0], -other.e[1], -other.e[2]});
}

SellingResult selling_reduce(const SymMatrix2& m, const Superbase& init) {
  if (!m.is_spd()) throw NotPositiveDefinite("Selling reduction requires an SPD matrix");
  if (!init.valid()) throw InvalidVector("Selling reduction requires a valid initial superbase");

  const double cond = m.condition();
  const int cap = 64 * (1 + int(std::log2(std::max(cond, 1.0))));

  SellingResult res;
  res.superbase = init;
  res.energy_trace.push_back(res.superbase.energy(m));
  auto& e = res.superbase.e;
  while (true) {
    // Pair with the largest positive scalar product; ties keep the smallest (i,j).
    int bi = -1, bj = -1;
    double best = 0;
    for (int i = 0; i < 3; ++i)
      for (int j = i + 1; j < 3; ++j) {
        const double s = m.scal(e[std::size_t(i)], e[std::size_t(j)]);
        if (s > best) {
          best = s;
          bi = i;
          bj = j;
        }
      }
    if (bi < 0) break;  // M-obtuse
    if (res.iterations >= cap)
      throw ReductionDiverged("Selling reduction exceeded its iteration cap");
    const LatticeVector ei = e[std::size_t(bi)], ej = e[std::size_t(bj)];
    check_magnitude(ei - ej);
    e = {ei - ej, ej, -ei};
    ++res.iterations;
    res.energy_trace.push_back(res.superbase.energy(m));
  }
  return res;
}

Stencil Stencil::from_vectors(const std::vector<LatticeVector>& vs) {
  Stencil st;
  st.vecs_.reserve(2 * vs.size());
  for (const auto& v : vs) {
    if (v[0] == 0 && v[1] == 0) throw InvalidVector("stencil may not contain the zero vector");
    const LatticeVector n = v / gcd_vec(v);
    st.vecs_.push_back(n);
    st.vecs_.push_back(-n);
  }
  std::sort(st.vecs_.begin(), st.vecs_.end(), lex_less);
  st.vecs_.erase(std::unique(st.vecs_.begin(), st.vecs_.end()), st.vecs_.end());
  return st;
}

Stencil Stencil::ball(double radius) {
  if (radius < 1) throw EmptyStencil("stencil ball of radius < 1 contains no lattice direction");
  const auto r = std::int64_t(std::floor(radius));
  const double r2 = radius * radius;
  std::vector<LatticeVector> vs;
  for (std::int64_t a = -r; a <= r; ++a)
    for (std::int64_t b = -r; b <= r; ++b) {
      if (a == 0 && b == 0) continue;
      const LatticeVector e = lvec(a, b);
      if (double(sq_norm(e)) > r2) continue;
      if (gcd_vec(e) != 1) continue;
      vs.push_back(e);
    }
  return from_vectors(vs);
}

Stencil Stencil::with_point_count(int count) {
  double radius = 0;
  switch (count) {
    case 8: radius = 1.5; break;
    case 16: radius = 2.3; break;
    case 24: radius = 3.2; break;
    case 48: radius = 5.0; break;
    default: throw ConfigError("supported stencil point counts are 8, 16, 24, 48");
  }
  Stencil st = ball(radius);
  if (int(st.size()) != count) throw Error("stencil cardinality mismatch");
  return st;
}

bool Stencil::contains(const LatticeVector& e) const {
  const auto it = std::lower_bound(vecs_.begin(), vecs_.end(), e, lex_less);
  return it != vecs_.end() && *it == e;
}

bool Stencil::parent_closed() const {
  for (const auto& e : vecs_) {
    if (sq_norm(e) <= 2) continue;
    if (!contains(*parent(e))) return false;
  }
  return true;
}

bool Stencil::contains_v8() const {
  for (const auto& e : v8_stencil()) {
    if (!contains(e)) return false;
  }
  return true;
}

const Stencil& v8_stencil() {
  static const Stencil v8 = Stencil::ball(1.5);
  return v8;
}

std::vector<Superbase> enumerate_superbases(const Stencil& v) {
  std::vector<Superbase> out;
  for (const auto& e : v) {
    if (e[0] == 0 || e[1] == 0) continue;
    auto [f, g] = decompose(e);
    if (v.contains(f) && v.contains(g)) out.push_back(Superbase{{e, -f, -g}});
  }
  return out;
}

namespace {

using LPoint = std::array<long double, 2>;

// Clip a convex polygon against the halfplane <l, n> <= c.
std::vector<LPoint> clip(const std::vector<LPoint>& poly, long double n0, long double n1,
                         long double c) {
  std::vector<LPoint> out;
  const std::size_t m = poly.size();
  for (std::size_t i = 0; i < m; ++i) {
    const LPoint& p = poly[i];
    const LPoint& q = poly[(i + 1) % m];
    const long double dp = n0 * p[0] + n1 * p[1] - c;
    const long double dq = n0 * q[0] + n1 * q[1] - c;
    if (dp <= 0) out.push_back(p);
    if ((dp < 0 && dq > 0) || (dp > 0 && dq < 0)) {
      const long double t = dp / (dp - dq);
      out.push_back({p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])});
    }
  }
  return out;
}

}  // namespace

double polygon_area_oracle(const std::array<double, 3>& delta, const Superbase& sb) {
  long double reach = 1;
  for (int i = 0; i < 3; ++i) {
    reach += std::abs(delta[std::size_t(i)]);
    reach += std::max(std::abs(sb[i][0]), std::abs(sb[i][1]));
  }
  const long double big = reach * reach;
  std::vector<LPoint> poly = {{-big, -big}, {big, -big}, {big, big}, {-big, big}};
  for (int i = 0; i < 3 && !poly.empty(); ++i) {
    const long double a = sb[i][0], b = sb[i][1];
    const long double d = delta[std::size_t(i)];
    poly = clip(poly, a, b, d);
    if (!poly.empty()) poly = clip(poly, -a, -b, d);
  }
  if (poly.size() < 3) return 0;
  long double area2 = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const LPoint& p = poly[i];
    const LPoint& q = poly[(i + 1) % poly.size()];
    area2 += p[0] * q[1] - p[1] * q[0];
  }
  return double(std::abs(area2) / 2);
}

}  // namespace malbr

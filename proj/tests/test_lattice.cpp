#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "malbr/errors.hpp"
#include "malbr/lattice.hpp"
#include "malbr/schemes.hpp"
#include "testutil.hpp"

using namespace malbr;

namespace {

std::array<LatticeVector, 3> class_key(const Superbase& sb) {
  std::array<LatticeVector, 3> k = sb.e;
  std::sort(k.begin(), k.end(), lex_less);
  return k;
}

}  // namespace

TEST_CASE("gcd of lattice vectors") {
  CHECK(gcd_vec(lvec(7, 5)) == 1);
  CHECK(gcd_vec(lvec(4, 6)) == 2);
  CHECK(gcd_vec(lvec(0, 3)) == 3);
  CHECK(gcd_vec(lvec(-4, 6)) == 2);
  CHECK_THROWS_AS(gcd_vec(lvec(0, 0)), InvalidVector);
}

TEST_CASE("acute decomposition: reference values") {
  CHECK(decompose(lvec(7, 5)) == std::pair(lvec(3, 2), lvec(4, 3)));
  CHECK(decompose(lvec(1, 1)) == std::pair(lvec(1, 0), lvec(0, 1)));
  CHECK(decompose(lvec(3, 2)) == std::pair(lvec(2, 1), lvec(1, 1)));
  CHECK_THROWS_AS(decompose(lvec(1, 0)), NoDecomposition);
  CHECK_THROWS_AS(decompose(lvec(0, -1)), NoDecomposition);
  CHECK_THROWS_AS(decompose(lvec(2, 4)), NoDecomposition);
  CHECK_THROWS_AS(decompose(lvec(std::int64_t(1) << 32, 1)), LatticeOverflow);
}

TEST_CASE("acute decomposition: round trip, quadrant, uniqueness") {
  for (std::int64_t a = -12; a <= 12; ++a)
    for (std::int64_t b = -12; b <= 12; ++b) {
      const LatticeVector e = lvec(a, b);
      if (a == 0 || b == 0 || gcd_vec(e) != 1) continue;
      const auto [f, g] = decompose(e);
      CHECK(f + g == e);
      CHECK(det(f, g) == 1);
      CHECK(dot(f, g) >= 0);
      // same closed quadrant as e
      CHECK(f[0] * a >= 0);
      CHECK(f[1] * b >= 0);
      CHECK(g[0] * a >= 0);
      CHECK(g[1] * b >= 0);
      // unique among all integer pairs with the three properties
      int count = 0;
      for (std::int64_t u = -40; u <= 40; ++u)
        for (std::int64_t v = -40; v <= 40; ++v) {
          const LatticeVector gg = lvec(u, v);
          const LatticeVector ff = e - gg;
          if (det(ff, gg) == 1 && dot(ff, gg) >= 0) ++count;
        }
      CHECK(count == 1);
    }
}

TEST_CASE("tree successors") {
  CHECK(children(lvec(1, 1)) == std::pair(lvec(2, 1), lvec(1, 2)));
  CHECK(children(lvec(3, 2)) == std::pair(lvec(5, 3), lvec(4, 3)));
  CHECK_THROWS_AS(children(lvec(0, 1)), NoDecomposition);
}

TEST_CASE("tree predecessors") {
  CHECK(parent(lvec(7, 5)) == lvec(4, 3));
  CHECK(!parent(lvec(1, 1)).has_value());
  CHECK(!parent(lvec(1, 0)).has_value());
  CHECK(parent(lvec(2, 1)) == lvec(1, 1));
  CHECK_THROWS_AS(parent(lvec(2, 4)), InvalidVector);
}

TEST_CASE("tree structure and parents-in-triangle, bounded sweep") {
  for (std::int64_t a = -50; a <= 50; ++a)
    for (std::int64_t b = -50; b <= 50; ++b) {
      const LatticeVector e = lvec(a, b);
      if (a == 0 || b == 0 || gcd_vec(e) != 1) continue;
      const auto [f, g] = decompose(e);
      CHECK(f + g == e);
      CHECK(det(f, g) == 1);
      CHECK(dot(f, g) >= 0);
      if (sq_norm(e) > 2) {
        const auto p = parent(e);
        REQUIRE(p.has_value());
        CHECK((*p == f || *p == g));
        const auto [c1, c2] = children(*p);
        CHECK((c1 == e || c2 == e));
      }
      if (a > 0 && b > 0) {
        CHECK(testutil::in_triangle(f, lvec(1, 0), lvec(0, 1), e));
        CHECK(testutil::in_triangle(g, lvec(1, 0), lvec(0, 1), e));
      }
    }
}

TEST_CASE("matrix parametrization by condition number and angle") {
  const SymMatrix2 m = SymMatrix2::from_kappa_theta(10.0, M_PI / 3.0);
  CHECK(m.det() == doctest::Approx(1.0).epsilon(1e-14));
  const auto ev = m.eigenvalues();
  CHECK(ev[0] == doctest::Approx(0.1).epsilon(1e-13));
  CHECK(ev[1] == doctest::Approx(10.0).epsilon(1e-13));
  CHECK(m.is_spd());
  CHECK(m.condition() == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(!SymMatrix2{1.0, 2.0, 1.0}.is_spd());
}

TEST_CASE("Selling reduction: diagonal matrices need no iteration") {
  const auto r1 = selling_reduce(SymMatrix2::identity());
  CHECK(r1.iterations == 0);
  CHECK(r1.superbase.equivalent(Superbase::canonical()));
  const auto r2 = selling_reduce(SymMatrix2::diag(1, 100));
  CHECK(r2.iterations == 0);
  CHECK(r2.superbase.e == Superbase::canonical().e);
}

TEST_CASE("Selling reduction: reference anisotropic matrix") {
  const SymMatrix2 m = SymMatrix2::from_kappa_theta(10.0, M_PI / 3.0);
  const auto res = selling_reduce(m);
  const Superbase expected{{lvec(2, 3), lvec(-1, -1), lvec(-1, -2)}};
  REQUIRE(expected.valid());
  CHECK(res.superbase.equivalent(expected));
  CHECK(res.superbase.is_obtuse(m));
}

TEST_CASE("Selling reduction: errors") {
  CHECK_THROWS_AS(selling_reduce(SymMatrix2{1.0, 2.0, 1.0}), NotPositiveDefinite);
  CHECK_THROWS_AS(selling_reduce(SymMatrix2{-1.0, 0.0, -2.0}), NotPositiveDefinite);
  const Superbase bad{{lvec(1, 0), lvec(0, 1), lvec(1, 1)}};
  CHECK_THROWS_AS(selling_reduce(SymMatrix2::identity(), bad), InvalidVector);
}

TEST_CASE("Selling reduction: obtuseness, norm bound, decreasing energy") {
  std::mt19937 rng(101);
  for (int t = 0; t < 1000; ++t) {
    const SymMatrix2 m = testutil::random_spd(rng, 1e4);
    const auto res = selling_reduce(m);
    CHECK(res.superbase.valid());
    CHECK(res.superbase.is_obtuse(m));
    const double bound = 2.0 * m.condition() * (1 + 1e-12);
    for (int i = 0; i < 3; ++i) CHECK(double(sq_norm(res.superbase[i])) <= bound);
    REQUIRE(res.energy_trace.size() == std::size_t(res.iterations) + 1);
    for (std::size_t k = 0; k + 1 < res.energy_trace.size(); ++k)
      CHECK(res.energy_trace[k + 1] < res.energy_trace[k]);
  }
}

TEST_CASE("stencil balls") {
  const Stencil v8 = Stencil::ball(1.5);
  CHECK(v8.size() == 8);
  for (std::int64_t a : {-1, 0, 1})
    for (std::int64_t b : {-1, 0, 1})
      if (a != 0 || b != 0) CHECK(v8.contains(lvec(a, b)));

  const Stencil v16 = Stencil::ball(2.3);
  CHECK(v16.size() == 16);
  CHECK(v16.contains(lvec(2, 1)));
  CHECK(v16.contains(lvec(-1, 2)));
  CHECK(!v16.contains(lvec(2, 2)));

  CHECK(Stencil::with_point_count(8).size() == 8);
  CHECK(Stencil::with_point_count(16).size() == 16);
  CHECK(Stencil::with_point_count(24).size() == 24);
  CHECK(Stencil::with_point_count(48).size() == 48);
  CHECK(Stencil::with_point_count(48).parent_closed());

  CHECK_THROWS_AS(Stencil::ball(0.5), EmptyStencil);
  CHECK_THROWS_AS(Stencil::from_vectors({lvec(0, 0)}), InvalidVector);
}

TEST_CASE("stencil normalization keeps coprime symmetric sorted vectors") {
  const Stencil st = Stencil::from_vectors({lvec(2, 4), lvec(3, 0), lvec(1, 1)});
  CHECK(st.size() == 6);  // (1,2), (1,0), (1,1) and their opposites
  CHECK(st.contains(lvec(1, 2)));
  CHECK(st.contains(lvec(-1, -2)));
  CHECK(st.contains(lvec(1, 0)));
  CHECK(std::is_sorted(st.begin(), st.end(), lex_less));
}

TEST_CASE("superbase enumeration on reference stencils") {
  const auto v8 = enumerate_superbases(Stencil::ball(1.5));
  CHECK(v8.size() == 4);
  for (const auto& sb : v8) CHECK(sb.valid());
  // the two classes named explicitly, up to permutation and sign
  const Superbase a{{lvec(1, 1), lvec(-1, 0), lvec(0, -1)}};
  const Superbase b{{lvec(-1, 1), lvec(1, 0), lvec(0, -1)}};
  int na = 0, nb = 0;
  for (const auto& sb : v8) {
    if (sb.equivalent(a)) ++na;
    if (sb.equivalent(b)) ++nb;
  }
  CHECK(na == 2);
  CHECK(nb == 2);

  CHECK(enumerate_superbases(Stencil::ball(2.3)).size() == 12);
  CHECK(enumerate_superbases(Stencil::from_vectors({lvec(1, 0)})).empty());
}

TEST_CASE("superbase enumeration agrees with brute force triples") {
  for (const double radius : {1.5, 2.3, 3.2, 4.2, 5.0, 6.0}) {
    const Stencil v = Stencil::ball(radius);
    using Key = std::array<LatticeVector, 3>;
    const auto less = [](const Key& x, const Key& y) {
      return std::lexicographical_compare(x.begin(), x.end(), y.begin(), y.end(), lex_less);
    };
    std::set<Key, decltype(less)> brute(less), enumerated(less);
    for (const auto& e1 : v)
      for (const auto& e2 : v) {
        const LatticeVector e0 = -(e1 + e2);
        if (!v.contains(e0)) continue;
        if (std::abs(det(e1, e2)) != 1) continue;
        brute.insert(class_key(Superbase{{e0, e1, e2}}));
      }
    for (const auto& sb : enumerate_superbases(v)) {
      CHECK(sb.valid());
      enumerated.insert(class_key(sb));
    }
    CHECK(brute == enumerated);
  }
}

TEST_CASE("polygon area oracle: reference values") {
  const Superbase sb = Superbase::canonical();
  CHECK(polygon_area_oracle({2, 1, 1}, sb) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(polygon_area_oracle({0, 0, 0}, sb) == 0.0);
  CHECK(polygon_area_oracle({5, 1, 2}, sb) == doctest::Approx(8.0).epsilon(1e-12));
}

TEST_CASE("polygon area oracle equals 4h on random data") {
  std::mt19937 rng(202);
  std::uniform_real_distribution<double> uni(0.0, 10.0);
  std::uniform_int_distribution<int> signd(0, 1);
  std::uniform_int_distribution<int> perm(0, 2);
  for (int t = 0; t < 1000; ++t) {
    const SymMatrix2 m = testutil::random_spd(rng, 25.0);
    Superbase sb = selling_reduce(m).superbase;  // random superbase with |e_i| <= 10
    for (int i = 0; i < 3; ++i) REQUIRE(sq_norm(sb[i]) <= 100);
    if (signd(rng)) sb = Superbase{{-sb[0], -sb[1], -sb[2]}};
    const int r = perm(rng);
    std::rotate(sb.e.begin(), sb.e.begin() + r, sb.e.end());
    const std::array<double, 3> d = {uni(rng), uni(rng), uni(rng)};
    const double area = polygon_area_oracle(d, sb);
    CHECK(std::abs(area / 4.0 - h_func(d[0], d[1], d[2])) <= 1e-9);
  }
}

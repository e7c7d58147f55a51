#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "malbr/cases.hpp"
#include "malbr/errors.hpp"
#include "malbr/harness.hpp"
#include "malbr/solver.hpp"
#include "testutil.hpp"

using namespace malbr;

namespace {

const ConvexDomain unit_box = ConvexDomain::box({0, 0}, {1, 1});

// Brute-force envelope: minimum over all sample triangles containing x of the
// interpolating plane value.
double brute_envelope(const std::vector<Eigen::Vector2d>& pts, const std::vector<double>& w,
                      const Eigen::Vector2d& x) {
  double best = std::numeric_limits<double>::infinity();
  const std::size_t m = pts.size();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j)
      for (std::size_t k = j + 1; k < m; ++k) {
        const Eigen::Vector2d a = pts[i], b = pts[j], c = pts[k];
        const double den = (b - a)[0] * (c - a)[1] - (b - a)[1] * (c - a)[0];
        if (std::abs(den) < 1e-12) continue;
        const double l2 = ((x - a)[0] * (c - a)[1] - (x - a)[1] * (c - a)[0]) / den;
        const double l3 = ((b - a)[0] * (x - a)[1] - (b - a)[1] * (x - a)[0]) / den;
        const double l1 = 1 - l2 - l3;
        if (l1 < -1e-12 || l2 < -1e-12 || l3 < -1e-12) continue;
        best = std::min(best, l1 * w[i] + l2 * w[j] + l3 * w[k]);
      }
  return best;
}

}  // namespace

TEST_CASE("lower envelope matches the brute-force triangle minimum") {
  std::mt19937 rng(83);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    // samples on a circle (convex position), arbitrary heights
    const int m = 8 + int(rng() % 8);
    std::vector<Eigen::Vector2d> pts;
    std::vector<double> w;
    for (int k = 0; k < m; ++k) {
      const double a = 2 * M_PI * (k + 0.1 * uni(rng)) / m;
      pts.emplace_back(5 * std::cos(a), 5 * std::sin(a));
      w.push_back(uni(rng));
    }
    const LowerEnvelope env(pts, w);
    for (int q = 0; q < 10; ++q) {
      const Eigen::Vector2d x(2.0 * uni(rng), 2.0 * uni(rng));
      const double expect = brute_envelope(pts, w, x);
      CHECK(env(x) == doctest::Approx(expect).epsilon(1e-9).scale(1.0));
    }
  }
}

TEST_CASE("convex initialization from quadratic boundary data") {
  const Grid g = Grid::discretize(unit_box, 8);
  const SymMatrix2 m = SymMatrix2::from_kappa_theta(4.0, 1.1);
  const BoundaryTrace sigma = [m](const Eigen::Vector2d& p) { return 0.5 * m.quad(p); };
  const Field f = convex_init(g, sigma);
  REQUIRE(f.values.size() == g.size());
  CHECK(f.values.cwiseAbs().maxCoeff() < 1e6);
  for (std::int32_t i = 0; i < g.size(); ++i)
    for (const auto& e : v8_stencil()) CHECK(second_difference(g, f, g.point(i), e) > 0);
}

TEST_CASE("convex initialization from flat boundary data") {
  const Grid g = Grid::discretize(unit_box, 8);
  const BoundaryTrace sigma = [](const Eigen::Vector2d&) { return 0.0; };
  const Field f = convex_init(g, sigma);
  for (std::int32_t i = 0; i < g.size(); ++i) {
    CHECK(f.values[i] < 0);  // strictly below the boundary plane
    for (const auto& e : v8_stencil()) CHECK(second_difference(g, f, g.point(i), e) > 0);
  }
}

TEST_CASE("convex initialization satisfies the operator positivity test") {
  const Grid g = Grid::discretize(unit_box, 10);
  const auto fam =
      std::make_shared<StencilFamily>(build_stencil_family(g, StencilFamilyConfig{}));
  const TestCase tc = make_case("smoothed_cone");
  const double h = g.scale_h();
  const BoundaryTrace sigma = [&, h](const Eigen::Vector2d& p) { return tc.exact(h * p); };
  const Field f = convex_init(g, sigma);
  for (std::int32_t i = 0; i < g.size(); ++i)
    CHECK(eval_lbr_adaptive(g, f, g.point(i), *fam).value > 0);
}

TEST_CASE("concave boundary data fails loudly") {
  const Grid g = Grid::discretize(unit_box, 8);
  const BoundaryTrace sigma = [](const Eigen::Vector2d& p) {
    return -(p[0] - 4.0) * (p[0] - 4.0);  // concave dip along the bottom edge
  };
  CHECK_THROWS_AS(convex_init(g, sigma), InitializationFailed);
}

TEST_CASE("sparse solve") {
  SUBCASE("identity") {
    Eigen::SparseMatrix<double> id(5, 5);
    id.setIdentity();
    Eigen::VectorXd r(5);
    r << 1, -2, 3, 0.5, 4;
    CHECK((sparse_solve(id, r) - r).norm() == 0.0);
  }
  SUBCASE("zero row fails") {
    Eigen::SparseMatrix<double> j(3, 3);
    std::vector<Eigen::Triplet<double>> tr = {{0, 0, 1.0}, {1, 1, 2.0}};
    j.setFromTriplets(tr.begin(), tr.end());
    Eigen::VectorXd r = Eigen::VectorXd::Ones(3);
    CHECK_THROWS_AS(sparse_solve(j, r), LinearSolveFailed);
  }
  SUBCASE("assembled FD system is solvable at a quadratic point") {
    const Grid g = Grid::discretize(unit_box, 8);
    const SymMatrix2 m = SymMatrix2::from_kappa_theta(2.0, 0.7);
    const Field u = testutil::quadratic_field(g, m, {4, 4});
    const SchemeContext ctx(g, SchemeKind::fd(), u.trace);
    Eigen::VectorXd rho = Eigen::VectorXd::Constant(g.size(), m.det());
    Eigen::VectorXd r;
    Eigen::SparseMatrix<double> jac;
    ctx.assemble(u.values, rho, r, jac);
    const Eigen::VectorXd v = sparse_solve(jac, -r);
    CHECK(v.allFinite());
  }
}

TEST_CASE("damped Newton on the quadratic case") {
  const TestCase tc = make_case("quadratic");
  const DiscreteProblem p = make_problem(tc, 16);
  RunConfig cfg;
  const SchemeKind scheme = make_scheme(cfg, p.grid);
  NewtonOptions opts;
  opts.residual_tolerance = 1e-13;
  auto [u, rep] = damped_newton(p.grid, scheme, p.rho, p.sigma, opts);
  CHECK(rep.converged);
  CHECK(rep.status == NewtonStatus::Converged);
  double err = 0, scale = 0;
  const double h = p.grid.scale_h();
  for (std::int32_t i = 0; i < p.grid.size(); ++i) {
    const double exact = tc.exact(h * to_real(p.grid.point(i)));
    err = std::max(err, std::abs(u.values[i] - exact));
    scale = std::max(scale, std::abs(exact));
  }
  CHECK(err <= 1e-8 * scale);
  // accepted iterates keep the operator positive
  const SchemeContext ctx(p.grid, scheme, p.sigma);
  for (std::int32_t i = 0; i < p.grid.size(); ++i) CHECK(ctx.value_at(u.values, i) > 0);
}

TEST_CASE("quadratic one-shot: exact start needs no iteration") {
  const TestCase tc = make_case("quadratic");
  const DiscreteProblem p = make_problem(tc, 12);
  RunConfig cfg;
  const SchemeKind scheme = make_scheme(cfg, p.grid);
  Field exact;
  exact.trace = p.sigma;
  exact.values.resize(p.grid.size());
  const double h = p.grid.scale_h();
  for (std::int32_t i = 0; i < p.grid.size(); ++i)
    exact.values[i] = tc.exact(h * to_real(p.grid.point(i)));
  auto [u, rep] = damped_newton(p.grid, scheme, p.rho, p.sigma, {}, &exact);
  CHECK(rep.converged);
  CHECK(rep.iterations == 0);
}

TEST_CASE("damped Newton rejects nonpositive data before iterating") {
  const TestCase tc = make_case("quadratic");
  const DiscreteProblem p = make_problem(tc, 8);
  RunConfig cfg;
  const SchemeKind scheme = make_scheme(cfg, p.grid);
  Eigen::VectorXd bad = p.rho;
  bad[bad.size() / 2] = 0.0;
  CHECK_THROWS_AS(damped_newton(p.grid, scheme, bad, p.sigma), PreconditionViolation);
  NewtonOptions silly;
  silly.damping_base = 1.5;
  CHECK_THROWS_AS(damped_newton(p.grid, scheme, p.rho, p.sigma, silly),
                  PreconditionViolation);
}

TEST_CASE("finite differences on the quadratic case terminate") {
  // At moderate resolutions the FD iteration may drift to a spurious solution;
  // it must still terminate in an orderly way.
  const TestCase tc = make_case("quadratic");
  const DiscreteProblem p = make_problem(tc, 16);
  RunConfig cfg;
  cfg.scheme = "fd";
  cfg.newton.max_outer_iterations = 60;
  const SchemeKind scheme = make_scheme(cfg, p.grid);
  CHECK_NOTHROW(damped_newton(p.grid, scheme, p.rho, p.sigma, cfg.newton));
}

TEST_CASE("accepted Newton steps mostly decrease the residual") {
  int decreases = 0, steps = 0;
  for (const char* name : {"quadratic", "smoothed_cone", "flat", "singular"}) {
    const TestCase tc = make_case(name);
    for (const int n : {17, 33, 65}) {
      const DiscreteProblem p = make_problem(tc, n);
      RunConfig cfg;
      const SchemeKind scheme = make_scheme(cfg, p.grid);
      auto [u, rep] = damped_newton(p.grid, scheme, p.rho, p.sigma);
      CHECK(rep.converged);
      const auto& hist = rep.residual_history;
      for (std::size_t k = 0; k + 1 < hist.size(); ++k) {
        ++steps;
        if (hist[k + 1] < hist[k]) ++decreases;
      }
      CHECK(rep.non_monotone_steps == int(hist.size()) - 1 - [&] {
        int d = 0;
        for (std::size_t k = 0; k + 1 < hist.size(); ++k)
          if (hist[k + 1] < hist[k]) ++d;
        return d;
      }());
    }
  }
  REQUIRE(steps > 0);
  CHECK(double(decreases) / double(steps) >= 0.95);
}

TEST_CASE("global-minimum damping rule also converges") {
  const TestCase tc = make_case("smoothed_cone");
  const DiscreteProblem p = make_problem(tc, 17);
  RunConfig cfg;
  const SchemeKind scheme = make_scheme(cfg, p.grid);
  NewtonOptions opts;
  opts.global_min_damping = true;
  auto [u, rep] = damped_newton(p.grid, scheme, p.rho, p.sigma, opts);
  CHECK(rep.converged);
}

TEST_CASE("reports carry consistent histories") {
  const TestCase tc = make_case("smoothed_cone");
  const DiscreteProblem p = make_problem(tc, 17);
  RunConfig cfg;
  const SchemeKind scheme = make_scheme(cfg, p.grid);
  auto [u, rep] = damped_newton(p.grid, scheme, p.rho, p.sigma);
  CHECK(rep.converged);
  CHECK(rep.residual_history.size() == std::size_t(rep.iterations) + 1);
  CHECK(rep.damping_history.size() == std::size_t(rep.iterations));
  CHECK(rep.scaled_residual_history.size() == rep.residual_history.size());
  const double h4 = std::pow(p.grid.scale_h(), 4);
  for (std::size_t k = 0; k < rep.residual_history.size(); ++k)
    CHECK(rep.scaled_residual_history[k] ==
          doctest::Approx(rep.residual_history[k] / h4).epsilon(1e-12));
  CHECK(rep.wall_seconds > 0);
}

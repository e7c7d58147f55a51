#include "malbr/cases.hpp"

#include <cmath>

#include "malbr/errors.hpp"
#include "malbr/lattice.hpp"

namespace malbr {

TestCase make_case(const std::string& name) {
  TestCase tc;
  tc.name = name;
  if (name == "quadratic") {
    const SymMatrix2 m = SymMatrix2::from_kappa_theta(10.0, M_PI / 3.0);
    tc.exact = [m](const Eigen::Vector2d& x) { return 0.5 * m.quad(x); };
    tc.rhs = [d = m.det()](const Eigen::Vector2d&) { return d; };
    return tc;
  }
  if (name == "smoothed_cone") {
    const double delta2 = 0.1 * 0.1;
    const Eigen::Vector2d x0(0.5, 0.5);
    tc.exact = [=](const Eigen::Vector2d& x) {
      return std::sqrt(delta2 + (x - x0).squaredNorm());
    };
    tc.rhs = [=](const Eigen::Vector2d& x) {
      const double s2 = delta2 + (x - x0).squaredNorm();
      return delta2 / (s2 * s2);
    };
    return tc;
  }
  if (name == "flat") {
    const double r0 = 0.2, eps = 1e-6;
    const Eigen::Vector2d x0(0.5, 0.5);
    tc.exact = [=](const Eigen::Vector2d& x) {
      const double r = (x - x0).norm();
      const double d = std::max(r - r0, 0.0);
      return d * d + 0.5 * eps * r * r;
    };
    tc.rhs = [=](const Eigen::Vector2d& x) {
      const double r = (x - x0).norm();
      if (r <= r0) return eps * eps;
      // radial profile g(r) = (r-r0)^2 + eps r^2/2: det = g''(r) g'(r)/r
      return (2.0 + eps) * (2.0 * (r - r0) + eps * r) / r;
    };
    return tc;
  }
  if (name == "singular") {
    tc.exact = [](const Eigen::Vector2d& x) { return -std::sqrt(2.0 - x.squaredNorm()); };
    tc.rhs = [](const Eigen::Vector2d& x) {
      const double q = 2.0 - x.squaredNorm();
      return 2.0 / (q * q);
    };
    return tc;
  }
  throw UnknownCase("unknown test case: " + name);
}

}  // namespace malbr

#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>

namespace malbr {

// Synthetic Dirichlet problems on the unit square: a known convex U is
// recovered from rho = det(D^2 U) and its boundary values.
struct TestCase {
  std::string name;
  std::function<double(const Eigen::Vector2d&)> exact;  // U, physical coordinates
  std::function<double(const Eigen::Vector2d&)> rhs;    // det of the Hessian of U
};

// name in {quadratic, smoothed_cone, flat, singular}
TestCase make_case(const std::string& name);

}  // namespace malbr

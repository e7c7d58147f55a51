#include "malbr/solver.hpp"

#include <Eigen/SparseLU>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "malbr/errors.hpp"

namespace malbr {

namespace {

// ---------------------------------------------------------------------------
// Small dense LP, Seidel's incremental algorithm (d <= 3).
// maximize c.y subject to a_i.y <= b_i and |y_j| <= bound_j.
// ---------------------------------------------------------------------------

struct LpRow {
  std::array<double, 3> a;
  double b;
};

void normalize_row(LpRow& r, const std::vector<int>& vars) {
  double m = 0;
  for (int v : vars) m = std::max(m, std::abs(r.a[std::size_t(v)]));
  if (m > 1) {
    for (int v : vars) r.a[std::size_t(v)] /= m;
    r.b /= m;
  }
}

bool lp_max(const std::vector<int>& vars, std::vector<LpRow> rows,
            const std::array<double, 3>& c, const std::array<double, 3>& bounds,
            std::array<double, 3>& y) {
  const double feas_eps = 1e-9;
  if (vars.size() == 1) {
    const int v = vars[0];
    double lo = -bounds[std::size_t(v)], hi = bounds[std::size_t(v)];
    for (const auto& r : rows) {
      const double a = r.a[std::size_t(v)];
      if (std::abs(a) < 1e-13) {
        if (r.b < -feas_eps) return false;
        continue;
      }
      if (a > 0)
        hi = std::min(hi, r.b / a);
      else
        lo = std::max(lo, r.b / a);
    }
    if (lo > hi + feas_eps) return false;
    y[std::size_t(v)] = c[std::size_t(v)] >= 0 ? hi : lo;
    return true;
  }

  for (int v : vars) {
    const double cv = c[std::size_t(v)];
    y[std::size_t(v)] = cv > 0 ? bounds[std::size_t(v)] : (cv < 0 ? -bounds[std::size_t(v)] : 0);
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double dot = -rows[i].b;
    for (int v : vars) dot += rows[i].a[std::size_t(v)] * y[std::size_t(v)];
    if (dot <= feas_eps * (1 + std::abs(rows[i].b))) continue;

    // The optimum saturates row i: eliminate its largest-coefficient variable.
    int je = vars[0];
    for (int v : vars)
      if (std::abs(rows[i].a[std::size_t(v)]) > std::abs(rows[i].a[std::size_t(je)])) je = v;
    const double ae = rows[i].a[std::size_t(je)];
    if (std::abs(ae) < 1e-13) return false;

    std::vector<int> sub_vars;
    for (int v : vars)
      if (v != je) sub_vars.push_back(v);

    std::vector<LpRow> sub;
    sub.reserve(i + 2);
    auto reduce_into = [&](const LpRow& r) {
      LpRow q{{0, 0, 0}, 0};
      const double f = r.a[std::size_t(je)] / ae;
      for (int v : sub_vars)
        q.a[std::size_t(v)] = r.a[std::size_t(v)] - f * rows[i].a[std::size_t(v)];
      q.b = r.b - f * rows[i].b;
      normalize_row(q, sub_vars);
      sub.push_back(q);
    };
    for (std::size_t m = 0; m < i; ++m) reduce_into(rows[m]);
    {  // |y_je| <= bound expressed in the remaining variables
      LpRow up{{0, 0, 0}, 0};
      up.a[std::size_t(je)] = 1;
      up.b = bounds[std::size_t(je)];
      reduce_into(up);
      LpRow dn{{0, 0, 0}, 0};
      dn.a[std::size_t(je)] = -1;
      dn.b = bounds[std::size_t(je)];
      reduce_into(dn);
    }
    std::array<double, 3> sub_c = c;
    {
      const double f = c[std::size_t(je)] / ae;
      for (int v : sub_vars)
        sub_c[std::size_t(v)] = c[std::size_t(v)] - f * rows[i].a[std::size_t(v)];
    }
    if (!lp_max(sub_vars, std::move(sub), sub_c, bounds, y)) return false;
    double num = rows[i].b;
    for (int v : sub_vars) num -= rows[i].a[std::size_t(v)] * y[std::size_t(v)];
    y[std::size_t(je)] = num / ae;
  }
  return true;
}

}  // namespace

LowerEnvelope::LowerEnvelope(std::vector<Eigen::Vector2d> points, std::vector<double> values)
    : pts_(std::move(points)), vals_(std::move(values)) {
  if (pts_.size() != vals_.size() || pts_.size() < 3)
    throw PreconditionViolation("lower envelope needs at least three samples");
  order_.resize(pts_.size());
  std::iota(order_.begin(), order_.end(), 0);
  std::mt19937 rng(0x5eed);
  std::shuffle(order_.begin(), order_.end(), rng);

  double wmax = -std::numeric_limits<double>::infinity();
  double wmin = std::numeric_limits<double>::infinity();
  double pmax = 1;
  for (std::size_t k = 0; k < pts_.size(); ++k) {
    wmax = std::max(wmax, vals_[k]);
    wmin = std::min(wmin, vals_[k]);
    pmax = std::max({pmax, std::abs(pts_[k][0]), std::abs(pts_[k][1])});
  }
  slope_bound_ = 1e9 * (1 + wmax - wmin);
  offset_bound_ = 1 + std::abs(wmax) + std::abs(wmin) + slope_bound_ * (1 + pmax);
}

double LowerEnvelope::operator()(const Eigen::Vector2d& x) const {
  std::vector<LpRow> rows;
  rows.reserve(pts_.size());
  const std::vector<int> vars = {0, 1, 2};
  for (const int k : order_) {
    LpRow r{{pts_[std::size_t(k)][0], pts_[std::size_t(k)][1], 1.0}, vals_[std::size_t(k)]};
    normalize_row(r, vars);
    rows.push_back(r);
  }
  const std::array<double, 3> c = {x[0], x[1], 1.0};
  const std::array<double, 3> bounds = {slope_bound_, slope_bound_, offset_bound_};
  std::array<double, 3> y{};
  if (!lp_max(vars, std::move(rows), c, bounds, y))
    throw Error("lower envelope evaluation failed");
  return y[0] * x[0] + y[1] * x[1] + y[2];
}

namespace {

// ---------------------------------------------------------------------------
// Boundary sampling
// ---------------------------------------------------------------------------

struct BoundarySegment {
  bool straight = true;
  std::vector<double> params;        // increasing along the segment
  std::vector<Eigen::Vector2d> pts;  // matching points
};

void sample_edge(const Eigen::Vector2d& a, const Eigen::Vector2d& b, int uniform_count,
                 std::vector<BoundarySegment>& out) {
  BoundarySegment seg;
  std::vector<double> ts = {0.0, 1.0};
  const Eigen::Vector2d d = b - a;
  for (int axis = 0; axis < 2; ++axis) {
    if (std::abs(d[axis]) < 1e-14) continue;
    const double lo = std::min(a[axis], b[axis]), hi = std::max(a[axis], b[axis]);
    for (double i = std::ceil(lo); i <= std::floor(hi); ++i) {
      const double t = (i - a[axis]) / d[axis];
      if (t > 1e-12 && t < 1 - 1e-12) ts.push_back(t);
    }
  }
  for (int k = 1; k < uniform_count; ++k) ts.push_back(double(k) / uniform_count);
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end(),
                       [](double u, double v) { return std::abs(u - v) < 1e-12; }),
           ts.end());
  for (const double t : ts) {
    seg.params.push_back(t * d.norm());
    seg.pts.push_back(a + t * d);
  }
  out.push_back(std::move(seg));
}

std::vector<BoundarySegment> boundary_partition(const Grid& g, int min_samples) {
  std::vector<BoundarySegment> segs;
  const auto& dom = g.domain();
  if (const auto* bx = std::get_if<ConvexDomain::Box>(&dom.shape())) {
    const Eigen::Vector2d c0 = bx->lo, c2 = bx->hi;
    const Eigen::Vector2d c1(c2[0], c0[1]), c3(c0[0], c2[1]);
    const std::array<std::pair<Eigen::Vector2d, Eigen::Vector2d>, 4> edges = {
        {{c0, c1}, {c1, c2}, {c2, c3}, {c3, c0}}};
    double perim = 0;
    for (const auto& e : edges) perim += (e.second - e.first).norm();
    for (const auto& e : edges) {
      const double len = (e.second - e.first).norm();
      const int cnt = std::max(2, int(std::ceil(len / perim * min_samples)));
      sample_edge(e.first, e.second, cnt, segs);
    }
    return segs;
  }
  if (const auto* dk = std::get_if<ConvexDomain::Disk>(&dom.shape())) {
    BoundarySegment seg;
    seg.straight = false;
    std::vector<double> angles;
    for (int axis = 0; axis < 2; ++axis) {
      const double c = dk->center[axis];
      for (double i = std::ceil(c - dk->radius); i <= std::floor(c + dk->radius); ++i) {
        const double dd = i - c;
        const double s2 = dk->radius * dk->radius - dd * dd;
        if (s2 <= 0) continue;
        const double s = std::sqrt(s2);
        if (axis == 0) {
          angles.push_back(std::atan2(s, dd));
          angles.push_back(std::atan2(-s, dd));
        } else {
          angles.push_back(std::atan2(dd, s));
          angles.push_back(std::atan2(dd, -s));
        }
      }
    }
    for (int k = 0; k < min_samples; ++k)
      angles.push_back(-M_PI + 2 * M_PI * double(k) / min_samples);
    std::sort(angles.begin(), angles.end());
    angles.erase(std::unique(angles.begin(), angles.end(),
                             [](double u, double v) { return std::abs(u - v) < 1e-12; }),
                 angles.end());
    for (const double t : angles) {
      seg.params.push_back(t);
      seg.pts.push_back(dk->center + dk->radius * Eigen::Vector2d(std::cos(t), std::sin(t)));
    }
    segs.push_back(std::move(seg));
    return segs;
  }
  // Polygon: order the vertices around the centroid, then sample each edge.
  const auto& poly = std::get<ConvexDomain::Polygon>(dom.shape());
  std::vector<Eigen::Vector2d> verts;
  const auto& sides = poly.sides;
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
      if (ok) verts.push_back(p);
    }
  if (verts.size() < 3) throw DomainTooSmall("polygon domain has no vertices");
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (const auto& v : verts) centroid += v;
  centroid /= double(verts.size());
  std::sort(verts.begin(), verts.end(), [&](const auto& u, const auto& v) {
    return std::atan2(u[1] - centroid[1], u[0] - centroid[0]) <
           std::atan2(v[1] - centroid[1], v[0] - centroid[0]);
  });
  verts.erase(std::unique(verts.begin(), verts.end(),
                          [](const auto& u, const auto& v) { return (u - v).norm() < 1e-9; }),
              verts.end());
  double perim = 0;
  for (std::size_t i = 0; i < verts.size(); ++i)
    perim += (verts[(i + 1) % verts.size()] - verts[i]).norm();
  for (std::size_t i = 0; i < verts.size(); ++i) {
    const Eigen::Vector2d a = verts[i], b = verts[(i + 1) % verts.size()];
    const int cnt = std::max(2, int(std::ceil((b - a).norm() / perim * min_samples)));
    sample_edge(a, b, cnt, segs);
  }
  return segs;
}

bool segment_convex(const BoundarySegment& seg, const std::vector<double>& w) {
  double scale = 1;
  for (const double v : w) scale = std::max(scale, std::abs(v));
  const double tol = 1e-12 * scale;
  double prev_slope = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < seg.params.size(); ++k) {
    const double dt = seg.params[k + 1] - seg.params[k];
    if (dt < 1e-12) continue;
    const double s = (w[k + 1] - w[k]) / dt;
    if (s < prev_slope - tol) return false;
    prev_slope = s;
  }
  return true;
}

}  // namespace

Field convex_init(const Grid& g, const BoundaryTrace& sigma) {
  const int n = std::max(4, int(std::lround(1.0 / g.scale_h())));
  const auto segs = boundary_partition(g, 8 * n);

  std::vector<Eigen::Vector2d> pts;
  std::vector<double> sig;
  double smin = std::numeric_limits<double>::infinity(), smax = -smin;
  for (const auto& seg : segs)
    for (const auto& p : seg.pts) {
      pts.push_back(p);
      sig.push_back(sigma(p));
      smin = std::min(smin, sig.back());
      smax = std::max(smax, sig.back());
    }
  const double range = smax - smin;

  // Largest eps keeping sigma - eps|x|^2 convex along every straight segment.
  double eps = 0;
  if (range == 0) {
    eps = 1.0 / std::max(1.0, g.lattice_diameter() * g.lattice_diameter());
  } else {
    for (int k = 0; k <= 20; ++k) {
      const double cand = range * std::ldexp(1.0, -k);
      bool ok = true;
      for (const auto& seg : segs) {
        if (!seg.straight || !ok) continue;
        std::vector<double> w(seg.pts.size());
        for (std::size_t m = 0; m < seg.pts.size(); ++m)
          w[m] = sigma(seg.pts[m]) - cand * seg.pts[m].squaredNorm();
        ok = segment_convex(seg, w);
      }
      if (ok) {
        eps = cand;
        break;
      }
    }
    if (eps == 0)
      throw InitializationFailed(
          "boundary data is not convex along a straight boundary segment");
  }

  std::vector<double> w(pts.size());
  for (std::size_t k = 0; k < pts.size(); ++k) w[k] = sig[k] - eps * pts[k].squaredNorm();
  const LowerEnvelope env(pts, w);

  Field f;
  f.trace = sigma;
  f.values.resize(g.size());
  for (std::int32_t i = 0; i < g.size(); ++i) {
    const Eigen::Vector2d x = to_real(g.point(i));
    f.values[i] = env(x) + eps * x.squaredNorm();
  }
  return f;
}

Eigen::VectorXd sparse_solve(const Eigen::SparseMatrix<double>& j, const Eigen::VectorXd& r) {
  if (j.rows() != j.cols() || j.rows() != r.size())
    throw PreconditionViolation("sparse_solve requires a square system");
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(j);
  if (lu.info() != Eigen::Success) throw LinearSolveFailed("sparse LU factorization failed");
  Eigen::VectorXd v = lu.solve(r);
  const double rnorm = r.lpNorm<Eigen::Infinity>();
  auto rel_residual = [&](const Eigen::VectorXd& x) {
    const double e = (j * x - r).lpNorm<Eigen::Infinity>();
    return rnorm > 0 ? e / rnorm : e;
  };
  double rel = rel_residual(v);
  if (!(rel <= 1e-12)) {
    v += lu.solve(r - j * v);  // one step of iterative refinement
    rel = rel_residual(v);
  }
  if (!(rel <= 1e-12)) throw LinearSolveFailed("sparse solve did not reach 1e-12 accuracy");
  return v;
}

std::pair<Field, NewtonReport> damped_newton(const Grid& g, const SchemeKind& scheme,
                                             const Eigen::VectorXd& rho,
                                             const BoundaryTrace& sigma,
                                             const NewtonOptions& opts, const Field* initial) {
  if (!(opts.damping_base > 0 && opts.damping_base < 1))
    throw PreconditionViolation("damping base must lie in (0,1)");
  if (!(opts.residual_tolerance > 0)) throw PreconditionViolation("tolerance must be positive");
  if (rho.size() != g.size()) throw PreconditionViolation("rho has the wrong size");
  if (rho.minCoeff() <= 0)
    throw PreconditionViolation("the right hand side must be positive on X");

  const auto t0 = std::chrono::steady_clock::now();
  Field u = initial ? *initial : convex_init(g, sigma);
  if (u.values.size() != g.size()) throw PreconditionViolation("initial field has wrong size");

  const SchemeContext ctx(g, scheme, sigma);
  const bool gate = opts.require_positivity.value_or(scheme.type != SchemeType::FD);
  const double h4 = std::pow(g.scale_h(), 4);

  NewtonReport rep;
  auto finish = [&](NewtonStatus st) {
    rep.status = st;
    rep.converged = st == NewtonStatus::Converged;
    rep.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return std::make_pair(u, rep);
  };

  // Residual norm and positivity of D for a trial iterate, in one sweep.
  auto probe = [&](const Eigen::VectorXd& trial, double& norm) {
    bool positive = true;
    double nrm = 0;
    for (std::int32_t i = 0; i < g.size(); ++i) {
      const double val = ctx.value_at(trial, i);
      positive = positive && val > 0;
      const double res = val - scheme.epsilon * trial[i] - rho[i];
      nrm = std::max(nrm, std::abs(res));
    }
    norm = nrm;
    return positive;
  };

  Eigen::VectorXd r;
  Eigen::SparseMatrix<double> jac;
  for (int m = 0; m < opts.max_outer_iterations; ++m) {
    ctx.assemble(u.values, rho, r, jac);
    const double rn = r.lpNorm<Eigen::Infinity>();
    rep.residual_history.push_back(rn);
    rep.scaled_residual_history.push_back(rn / h4);
    rep.iterations = m;
    if (rn <= opts.residual_tolerance) return finish(NewtonStatus::Converged);

    Eigen::VectorXd v;
    try {
      v = sparse_solve(jac, -r);
    } catch (const LinearSolveFailed&) {
      return finish(NewtonStatus::LinearSolveFailed);
    }

    // Scan damping exponents: positivity gate first, then the first gated k
    // whose residual is a local minimum in k.
    const int kmax = opts.max_damping_exponent;
    std::vector<double> res(std::size_t(kmax) + 1,
                            std::numeric_limits<double>::quiet_NaN());
    std::vector<char> ok(std::size_t(kmax) + 1, 0);
    auto eval_k = [&](int k) {
      if (!std::isnan(res[std::size_t(k)])) return;
      const Eigen::VectorXd trial = u.values + std::pow(opts.damping_base, k) * v;
      double nrm;
      const bool pos = probe(trial, nrm);
      res[std::size_t(k)] = nrm;
      ok[std::size_t(k)] = char(!gate || pos);
    };

    int accepted = -1, first_gated = -1;
    double best_res = std::numeric_limits<double>::infinity();
    int best_k = -1;
    for (int k = 0; k <= kmax; ++k) {
      eval_k(k);
      if (!ok[std::size_t(k)]) continue;
      if (first_gated < 0) first_gated = k;
      if (res[std::size_t(k)] < best_res) {
        best_res = res[std::size_t(k)];
        best_k = k;
      }
      if (opts.global_min_damping) continue;
      const double next = k < kmax ? (eval_k(k + 1), res[std::size_t(k + 1)])
                                   : std::numeric_limits<double>::infinity();
      const bool left_ok = k == first_gated || res[std::size_t(k)] <= res[std::size_t(k - 1)];
      if (res[std::size_t(k)] <= next && left_ok) {
        accepted = k;
        break;
      }
    }
    if (accepted < 0) accepted = best_k;  // fall back to the best gated residual
    if (accepted < 0) return finish(NewtonStatus::Stalled);

    u.values += std::pow(opts.damping_base, accepted) * v;
    rep.damping_history.push_back(accepted);
    if (res[std::size_t(accepted)] >= rn) ++rep.non_monotone_steps;
  }
  rep.iterations = opts.max_outer_iterations;
  return finish(NewtonStatus::MaxIterations);
}

}  // namespace malbr

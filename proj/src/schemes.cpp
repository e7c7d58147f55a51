#include "malbr/schemes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "malbr/errors.hpp"

namespace malbr {

double h_func(double a, double b, double c) {
  if (a < 0 || b < 0 || c < 0) throw DomainError("h is defined on nonnegative triples");
  if (a >= b + c) return b * c;
  if (b >= a + c) return a * c;
  if (c >= a + b) return a * b;
  // Inside the triangle-inequality cone: (ab+bc+ca)/2 - (a^2+b^2+c^2)/4,
  // rewritten against the largest argument so the subtraction stays small.
  if (a >= b && a >= c) {
    const double t = a - b - c;
    return b * c - 0.25 * t * t;
  }
  if (b >= c) {
    const double t = b - a - c;
    return a * c - 0.25 * t * t;
  }
  const double t = c - a - b;
  return a * b - 0.25 * t * t;
}

std::array<double, 3> h_gradient(double a, double b, double c) {
  if (a < 0 || b < 0 || c < 0) throw DomainError("h is defined on nonnegative triples");
  if (a >= b + c) return {0, c, b};
  if (b >= a + c) return {c, 0, a};
  if (c >= a + b) return {b, a, 0};
  return {0.5 * (b + c - a), 0.5 * (a + c - b), 0.5 * (a + b - c)};
}

namespace {

using detail::SchemeTables;

std::uint64_t pack_dir(const LatticeVector& rep) {
  return (std::uint64_t(std::uint32_t(std::int32_t(rep[0]))) << 32) |
         std::uint64_t(std::uint32_t(std::int32_t(rep[1])));
}

int rep_index(const std::vector<LatticeVector>& reps, const LatticeVector& rep) {
  const auto it = std::lower_bound(reps.begin(), reps.end(), rep, lex_less);
  if (it == reps.end() || !(*it == rep)) return -1;
  return int(it - reps.begin());
}

std::vector<LatticeVector> make_reps(const Stencil& v) {
  std::vector<LatticeVector> reps;
  for (const auto& e : v) {
    const LatticeVector r = sign_rep(e);
    if (r == e) reps.push_back(r);
  }
  std::sort(reps.begin(), reps.end(), lex_less);
  return reps;
}

SchemeTables fd_tables() {
  SchemeTables t;
  t.reps = {lvec(0, 1), lvec(1, -1), lvec(1, 0), lvec(1, 1)};
  return t;
}

SchemeTables ws_tables(const Stencil& v) {
  SchemeTables t;
  t.reps = make_reps(v);
  for (std::size_t i = 0; i < t.reps.size(); ++i) {
    const LatticeVector q = sign_rep(perp(t.reps[i]));
    if (!lex_less(t.reps[i], q)) continue;
    const int j = rep_index(t.reps, q);
    if (j >= 0) t.pairs.push_back({int(i), j});
  }
  if (t.pairs.empty()) throw InvalidStencil("stencil contains no orthogonal pair");
  return t;
}

SchemeTables lbr_tables(const Stencil& v) {
  SchemeTables t;
  t.reps = make_reps(v);
  for (const auto& sb : enumerate_superbases(v)) {
    const LatticeVector e = sb[0], f = -sb[1], g = -sb[2];
    const int ie = rep_index(t.reps, sign_rep(e));
    const int jf = rep_index(t.reps, sign_rep(f));
    const int kg = rep_index(t.reps, sign_rep(g));
    t.classes.push_back({ie, jf, kg});
    t.class_dirs.push_back({e, f, g});
  }
  return t;
}

std::vector<DiffGeom> point_diffs(const Grid& g, const BoundaryTrace& trace,
                                  const LatticeVector& x,
                                  const std::vector<LatticeVector>& reps) {
  std::vector<DiffGeom> out;
  out.reserve(reps.size());
  for (const auto& r : reps) out.push_back(make_diff_geom(g, trace, x, r));
  return out;
}

void add_dir_derivative(DerivRow& row, const DiffGeom& d, std::int32_t center, double w) {
  if (w == 0) return;
  if (d.ip >= 0)
    row.entries.emplace_back(d.ip, w * d.wp);
  else
    row.boundary_slot += w * d.wp;
  if (d.im >= 0)
    row.entries.emplace_back(d.im, w * d.wm);
  else
    row.boundary_slot += w * d.wm;
  row.entries.emplace_back(center, w * d.wc);
}

SchemeEval fd_core(const std::vector<DiffGeom>& diffs, const Eigen::VectorXd& u,
                   std::int32_t center, bool derivative) {
  const double ux = u[center];
  // reps order: (0,1), (1,-1), (1,0), (1,1)
  const double d01 = diffs[0].apply(u, ux);
  const double d1m1 = diffs[1].apply(u, ux);
  const double d10 = diffs[2].apply(u, ux);
  const double d11 = diffs[3].apply(u, ux);
  SchemeEval ev;
  const double cross = d11 - d1m1;
  ev.value = d10 * d01 - cross * cross / 16.0;
  if (derivative) {
    add_dir_derivative(ev.derivative, diffs[2], center, d01);
    add_dir_derivative(ev.derivative, diffs[0], center, d10);
    add_dir_derivative(ev.derivative, diffs[3], center, -cross / 8.0);
    add_dir_derivative(ev.derivative, diffs[1], center, cross / 8.0);
  }
  return ev;
}

SchemeEval ws_core(const SchemeTables& t, const std::vector<DiffGeom>& diffs,
                   const Eigen::VectorXd& u, std::int32_t center, bool derivative) {
  const double ux = u[center];
  std::vector<double> d(t.reps.size());
  for (std::size_t k = 0; k < t.reps.size(); ++k) d[k] = diffs[k].apply(u, ux);

  SchemeEval ev;
  ev.value = std::numeric_limits<double>::infinity();
  int best = -1;
  for (std::size_t p = 0; p < t.pairs.size(); ++p) {
    const auto [i, j] = t.pairs[p];
    const double nf2 = double(sq_norm(t.reps[std::size_t(i)]));
    const double ng2 = double(sq_norm(t.reps[std::size_t(j)]));
    const double val = (std::max(0.0, d[std::size_t(i)]) / nf2) *
                       (std::max(0.0, d[std::size_t(j)]) / ng2);
    if (val < ev.value) {
      ev.value = val;
      best = int(p);
    }
  }
  const auto [i, j] = t.pairs[std::size_t(best)];
  ev.active.kind = ActiveInfo::Kind::Pair;
  ev.active.dirs = {t.reps[std::size_t(i)], t.reps[std::size_t(j)], lvec(0, 0)};
  if (derivative) {
    const double nf2 = double(sq_norm(t.reps[std::size_t(i)]));
    const double ng2 = double(sq_norm(t.reps[std::size_t(j)]));
    const double di = d[std::size_t(i)], dj = d[std::size_t(j)];
    const double wi = di > 0 ? std::max(0.0, dj) / (nf2 * ng2) : 0.0;
    const double wj = dj > 0 ? std::max(0.0, di) / (nf2 * ng2) : 0.0;
    add_dir_derivative(ev.derivative, diffs[std::size_t(i)], center, wi);
    add_dir_derivative(ev.derivative, diffs[std::size_t(j)], center, wj);
  }
  return ev;
}

void lbr_derivative(SchemeEval& ev, const std::array<double, 3>& deltas,
                    const std::array<const DiffGeom*, 3>& geoms, std::int32_t center) {
  const auto grad = h_gradient(std::max(0.0, deltas[0]), std::max(0.0, deltas[1]),
                               std::max(0.0, deltas[2]));
  for (int k = 0; k < 3; ++k) {
    const double w = deltas[std::size_t(k)] > 0 ? grad[std::size_t(k)] : 0.0;
    add_dir_derivative(ev.derivative, *geoms[std::size_t(k)], center, w);
  }
}

SchemeEval lbr_extensive_core(const SchemeTables& t, const std::vector<DiffGeom>& diffs,
                              const Eigen::VectorXd& u, std::int32_t center,
                              bool derivative) {
  const double ux = u[center];
  std::vector<double> d(t.reps.size());
  for (std::size_t k = 0; k < t.reps.size(); ++k) d[k] = diffs[k].apply(u, ux);

  SchemeEval ev;
  ev.value = std::numeric_limits<double>::infinity();
  int best = -1;
  for (std::size_t c = 0; c < t.classes.size(); ++c) {
    const auto& cl = t.classes[c];
    const double val = h_func(std::max(0.0, d[std::size_t(cl[0])]),
                              std::max(0.0, d[std::size_t(cl[1])]),
                              std::max(0.0, d[std::size_t(cl[2])]));
    if (val < ev.value) {
      ev.value = val;
      best = int(c);
    }
  }
  if (best < 0) return ev;  // stencil without any superbase class
  const auto& cl = t.classes[std::size_t(best)];
  ev.active.kind = ActiveInfo::Kind::Superbase;
  ev.active.dirs = t.class_dirs[std::size_t(best)];
  if (derivative) {
    lbr_derivative(ev,
                   {d[std::size_t(cl[0])], d[std::size_t(cl[1])], d[std::size_t(cl[2])]},
                   {&diffs[std::size_t(cl[0])], &diffs[std::size_t(cl[1])],
                    &diffs[std::size_t(cl[2])]},
                   center);
  }
  return ev;
}

// Depth-first pruned minimization over the tree of coprime directions.
class AdaptiveEval {
 public:
  AdaptiveEval(const Grid& g, const SchemeTables& t, const std::vector<DiffGeom>& diffs,
               const Stencil& vx, const Eigen::VectorXd& u, std::int32_t center)
      : grid_(g), tables_(t), diffs_(diffs), vx_(vx), u_(u), center_(center),
        x_(g.point(center)), ux_(u[center]) {
    memo_.reserve(64);
  }

  SchemeEval run(bool derivative, TraversalStats* stats) {
    SchemeEval ev;
    ev.value = std::numeric_limits<double>::infinity();
    std::array<LatticeVector, 3> act = {LatticeVector::Zero(), LatticeVector::Zero(),
                                        LatticeVector::Zero()};
    bool have_act = false;

    LatticeVector f = lvec(1, 0);
    std::vector<LatticeVector> g_list = {lvec(-1, 0), lvec(0, 1)};  // back is the head
    long iterations = 0;
    while (!g_list.empty()) {
      if (++iterations > 10'000'000) throw Error("adaptive traversal failed to terminate");
      const LatticeVector g = g_list.back();
      const LatticeVector e = f + g;
      bool member = vx_.contains(e);
      bool take = member;
      if (!take && in_v_omega(e, f, g)) {
        if (stats) ++stats->visited;
        take = delta(e) < delta(f) + delta(g);
      }
      if (take) {
        g_list.push_back(e);
        const double val = h_func(std::max(0.0, delta(e)), std::max(0.0, delta(f)),
                                  std::max(0.0, delta(g)));
        if (val < ev.value) {
          ev.value = val;
          act = {e, f, g};
          have_act = true;
        }
        if (!member && stats) stats->refined.push_back(e);
      } else {
        g_list.pop_back();
        f = g;
      }
    }
    if (have_act) {
      ev.active.kind = ActiveInfo::Kind::Superbase;
      ev.active.dirs = act;
      if (derivative) {
        const std::array<DiffGeom, 3> geoms = {geom(act[0]), geom(act[1]), geom(act[2])};
        lbr_derivative(ev, {delta(act[0]), delta(act[1]), delta(act[2])},
                       {&geoms[0], &geoms[1], &geoms[2]}, center_);
      }
    }
    return ev;
  }

 private:
  bool in_v_omega(const LatticeVector& e, const LatticeVector& f,
                  const LatticeVector& g) const {
    return grid_.contains_lattice(x_ + e) && grid_.contains_lattice(x_ - e) &&
           grid_.contains_lattice(x_ + f) && grid_.contains_lattice(x_ - f) &&
           grid_.contains_lattice(x_ + g) && grid_.contains_lattice(x_ - g);
  }

  DiffGeom geom(const LatticeVector& dir) const {
    const LatticeVector rep = sign_rep(dir);
    const int k = rep_index(tables_.reps, rep);
    if (k >= 0) return diffs_[std::size_t(k)];
    DiffGeom d;
    d.ip = grid_.index_of(x_ + rep);
    d.im = grid_.index_of(x_ - rep);
    return d;
  }

  double delta(const LatticeVector& dir) {
    const LatticeVector rep = sign_rep(dir);
    const std::uint64_t key = pack_dir(rep);
    const auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    const double val = geom(rep).apply(u_, ux_);
    memo_.emplace(key, val);
    return val;
  }

  const Grid& grid_;
  const SchemeTables& tables_;
  const std::vector<DiffGeom>& diffs_;
  const Stencil& vx_;
  const Eigen::VectorXd& u_;
  std::int32_t center_;
  LatticeVector x_;
  double ux_;
  std::unordered_map<std::uint64_t, double> memo_;
};

}  // namespace

SchemeContext::SchemeContext(const Grid& g, SchemeKind scheme, BoundaryTrace trace)
    : grid_(&g), scheme_(std::move(scheme)), trace_(std::move(trace)) {
  switch (scheme_.type) {
    case SchemeType::FD:
      tables_.push_back(fd_tables());
      break;
    case SchemeType::WS:
      tables_.push_back(ws_tables(scheme_.stencil));
      break;
    case SchemeType::LBRExtensive:
    case SchemeType::LBRAdaptive:
      if (!scheme_.family) throw InvalidStencil("LBR scheme requires a stencil family");
      for (const auto& st : scheme_.family->distinct()) tables_.push_back(lbr_tables(st));
      break;
  }
  pdata_.resize(std::size_t(g.size()));
  for (std::int32_t i = 0; i < g.size(); ++i) {
    const auto& t = tables_for(i);
    pdata_[std::size_t(i)] = point_diffs(g, trace_, g.point(i), t.reps);
  }
}

const detail::SchemeTables& SchemeContext::tables_for(std::int32_t i) const {
  if (scheme_.type == SchemeType::FD || scheme_.type == SchemeType::WS) return tables_[0];
  return tables_[std::size_t(scheme_.family->stencil_id(i))];
}

SchemeEval SchemeContext::eval_point(const Eigen::VectorXd& u, std::int32_t i,
                                     bool derivative, TraversalStats* stats) const {
  const auto& t = tables_for(i);
  const auto& diffs = pdata_[std::size_t(i)];
  switch (scheme_.type) {
    case SchemeType::FD:
      return fd_core(diffs, u, i, derivative);
    case SchemeType::WS:
      return ws_core(t, diffs, u, i, derivative);
    case SchemeType::LBRExtensive:
      return lbr_extensive_core(t, diffs, u, i, derivative);
    case SchemeType::LBRAdaptive: {
      AdaptiveEval ae(*grid_, t, diffs, scheme_.family->at(i), u, i);
      return ae.run(derivative, stats);
    }
  }
  throw Error("unreachable");
}

double SchemeContext::value_at(const Eigen::VectorXd& u, std::int32_t i) const {
  return eval_point(u, i, false, nullptr).value;
}

SchemeEval SchemeContext::eval_at(const Eigen::VectorXd& u, std::int32_t i,
                                  TraversalStats* stats) const {
  return eval_point(u, i, true, stats);
}

Eigen::VectorXd SchemeContext::values(const Eigen::VectorXd& u) const {
  Eigen::VectorXd out(grid_->size());
  for (std::int32_t i = 0; i < grid_->size(); ++i) out[i] = value_at(u, i);
  return out;
}

Eigen::VectorXd SchemeContext::residual(const Eigen::VectorXd& u,
                                        const Eigen::VectorXd& rho) const {
  Eigen::VectorXd r = values(u) - rho;
  if (scheme_.epsilon != 0) r -= scheme_.epsilon * u;
  return r;
}

void SchemeContext::assemble(const Eigen::VectorXd& u, const Eigen::VectorXd& rho,
                             Eigen::VectorXd& residual,
                             Eigen::SparseMatrix<double>& jacobian) const {
  const std::int32_t n = grid_->size();
  residual.resize(n);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(std::size_t(n) * 10);
  for (std::int32_t i = 0; i < n; ++i) {
    const SchemeEval ev = eval_point(u, i, true, nullptr);
    residual[i] = ev.value - rho[i];
    for (const auto& [j, w] : ev.derivative.entries) trips.emplace_back(i, j, w);
    if (scheme_.epsilon != 0) {
      residual[i] -= scheme_.epsilon * u[i];
      trips.emplace_back(i, i, -scheme_.epsilon);
    }
  }
  jacobian.resize(n, n);
  jacobian.setFromTriplets(trips.begin(), trips.end());
}

SchemeEval eval_fd(const Grid& g, const Field& u, const LatticeVector& x) {
  const std::int32_t i = g.index_of(x);
  static const SchemeTables t = fd_tables();
  const auto diffs = point_diffs(g, u.trace, x, t.reps);
  return fd_core(diffs, u.values, i, true);
}

SchemeEval eval_ws(const Grid& g, const Field& u, const LatticeVector& x, const Stencil& v) {
  const std::int32_t i = g.index_of(x);
  const SchemeTables t = ws_tables(v);
  const auto diffs = point_diffs(g, u.trace, x, t.reps);
  return ws_core(t, diffs, u.values, i, true);
}

SchemeEval eval_lbr_extensive(const Grid& g, const Field& u, const LatticeVector& x,
                              const Stencil& v) {
  const std::int32_t i = g.index_of(x);
  const SchemeTables t = lbr_tables(v);
  const auto diffs = point_diffs(g, u.trace, x, t.reps);
  return lbr_extensive_core(t, diffs, u.values, i, true);
}

SchemeEval eval_lbr_adaptive(const Grid& g, const Field& u, const LatticeVector& x,
                             const StencilFamily& fam, TraversalStats* stats) {
  const std::int32_t i = g.index_of(x);
  const SchemeTables t = lbr_tables(fam.at(i));
  const auto diffs = point_diffs(g, u.trace, x, t.reps);
  AdaptiveEval ae(g, t, diffs, fam.at(i), u.values, i);
  return ae.run(true, stats);
}

}  // namespace malbr

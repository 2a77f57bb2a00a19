#include "isddp/subsolve.hpp"

#include "lifting.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace isddp {

namespace {

const Vec kNoX = Vec(0);

struct Built {
  lp::Problem lp;
  int s = -1;
  std::vector<int> ineq_rows, ineq_owner, eq_rows;
};

// Rows: cost pieces <= s, inequality pieces <= (Cx)_i, Ay = b - Bx.
Built build(const AffineParamInstance& inst, const Vec& x) {
  Built B;
  const int n = inst.dim_y();
  for (int k = 0; k < n; ++k) B.lp.add_var(0.0, inst.Y.lower[k], inst.Y.upper[k]);
  Box none(Vec(0), Vec(0));
  B.s = B.lp.add_var(1.0, detail::epigraph_floor(inst.cost, inst.Y, none), lp::kInf);
  auto row_of = [&](const AffinePiece& a) {
    std::vector<std::pair<int, double>> row;
    for (int k = 0; k < n; ++k)
      if (a.slope_y[k] != 0.0) row.emplace_back(k, a.slope_y[k]);
    return row;
  };
  for (const auto& a : inst.cost.pieces()) {
    auto row = row_of(a);
    row.emplace_back(B.s, -1.0);
    B.lp.add_row(row, lp::Sense::kLe, -a.offset);
  }
  Vec cx = inst.C * x;
  for (std::size_t i = 0; i < inst.ineq.size(); ++i)
    for (const auto& a : inst.ineq[i].pieces()) {
      B.ineq_rows.push_back(B.lp.add_row(row_of(a), lp::Sense::kLe, cx[static_cast<Eigen::Index>(i)] - a.offset));
      B.ineq_owner.push_back(static_cast<int>(i));
    }
  Vec rhs = inst.b - inst.B * x;
  for (Eigen::Index i = 0; i < inst.A.rows(); ++i) {
    std::vector<std::pair<int, double>> row;
    for (int k = 0; k < n; ++k)
      if (inst.A(i, k) != 0.0) row.emplace_back(k, inst.A(i, k));
    B.eq_rows.push_back(B.lp.add_row(row, lp::Sense::kEq, rhs[i]));
  }
  return B;
}

Vec far_point(const AffineParamInstance& inst, const Vec& dir) {
  Built B = build(inst, inst.xbar);
  for (int k = 0; k < inst.dim_y(); ++k) B.lp.set_cost(k, -dir[k]);
  B.lp.set_cost(B.s, 0.0);
  lp::Solution s = detail::solve_checked(B.lp, {}, "far point");
  return s.x.head(inst.dim_y()).cwiseMax(inst.Y.lower).cwiseMin(inst.Y.upper);
}

}  // namespace

void validate(const AffineParamInstance& inst) {
  const int ny = inst.dim_y(), nx = inst.dim_x();
  auto bad = [](const char* w) { throw SubsolveError(SubsolveErrorKind::kInvalid, w); };
  if (inst.cost.dim_y() != ny || inst.cost.dim_x() != 0) bad("cost dimension mismatch");
  for (const auto& g : inst.ineq)
    if (g.dim_y() != ny || g.dim_x() != 0) bad("inequality dimension mismatch");
  if (inst.C.rows() != static_cast<Eigen::Index>(inst.ineq.size()) ||
      (inst.C.rows() > 0 && inst.C.cols() != nx))
    bad("C dimension mismatch");
  if (inst.A.cols() != ny || inst.B.cols() != nx || inst.A.rows() != inst.B.rows() ||
      inst.b.size() != inst.A.rows())
    bad("constraint dimension mismatch");
}

double primal_objective(const AffineParamInstance& inst, const Vec& y) {
  return inst.cost.value(y, kNoX);
}

double value_at(const AffineParamInstance& inst, const Vec& x) {
  Built B = build(inst, x);
  lp::Solution s = lp::solve(B.lp);
  if (s.status == lp::Status::kInfeasible) return lp::kInf;
  if (s.status != lp::Status::kOptimal)
    throw SubsolveError(SubsolveErrorKind::kMaxPivots, "value function LP failed");
  return s.objective;
}

double dual_function(const AffineParamInstance& inst, const Vec& lambda, const Vec& mu) {
  const int n = inst.dim_y();
  if ((mu.array() < 0.0).any())
    throw SubsolveError(SubsolveErrorKind::kInvalid, "inequality multipliers must be nonnegative");
  lp::Problem P;
  Vec lin = Vec::Zero(n);
  double c = 0.0;
  if (inst.A.rows() > 0) {
    lin += inst.A.transpose() * lambda;
    c += lambda.dot(inst.B * inst.xbar - inst.b);
  }
  if (inst.C.rows() > 0) c -= mu.dot(inst.C * inst.xbar);
  for (int k = 0; k < n; ++k) P.add_var(lin[k], inst.Y.lower[k], inst.Y.upper[k]);
  Box none(Vec(0), Vec(0));
  auto epigraph = [&](const PolyhedralFunction& f, double weight) {
    int e = P.add_var(weight, detail::epigraph_floor(f, inst.Y, none), lp::kInf);
    for (const auto& a : f.pieces()) {
      std::vector<std::pair<int, double>> row;
      for (int k = 0; k < n; ++k)
        if (a.slope_y[k] != 0.0) row.emplace_back(k, a.slope_y[k]);
      row.emplace_back(e, -1.0);
      P.add_row(row, lp::Sense::kLe, -a.offset);
    }
  };
  epigraph(inst.cost, 1.0);
  for (std::size_t i = 0; i < inst.ineq.size(); ++i)
    if (mu[static_cast<Eigen::Index>(i)] > 0.0) epigraph(inst.ineq[i], mu[static_cast<Eigen::Index>(i)]);
  P.offset = c;
  return detail::solve_checked(P, {}, "dual function").objective;
}

AffineCertificate solve_exact(const AffineParamInstance& inst) {
  validate(inst);
  Built B = build(inst, inst.xbar);
  lp::Solution s = detail::solve_checked(B.lp, {}, "subproblem");
  AffineCertificate c;
  c.y_hat = s.x.head(inst.dim_y()).cwiseMax(inst.Y.lower).cwiseMin(inst.Y.upper);
  c.lambda_hat.resize(static_cast<Eigen::Index>(B.eq_rows.size()));
  for (std::size_t i = 0; i < B.eq_rows.size(); ++i)
    c.lambda_hat[static_cast<Eigen::Index>(i)] = -s.row_duals[B.eq_rows[i]];
  c.mu_hat = Vec::Zero(static_cast<Eigen::Index>(inst.ineq.size()));
  for (std::size_t r = 0; r < B.ineq_rows.size(); ++r)
    c.mu_hat[B.ineq_owner[r]] += std::max(0.0, -s.row_duals[B.ineq_rows[r]]);
  c.primal_value = primal_objective(inst, c.y_hat);
  c.dual_value = dual_function(inst, c.lambda_hat, c.mu_hat);
  c.eps_primal = c.eps_dual = std::max(0.0, c.primal_value - c.dual_value);
  return c;
}

AffineCertificate certify(const AffineParamInstance& inst, const Vec& y_hat, const Vec& lambda_hat,
                          const Vec& mu_hat) {
  AffineCertificate exact = solve_exact(inst);
  AffineCertificate c;
  c.y_hat = y_hat;
  c.lambda_hat = lambda_hat;
  c.mu_hat = mu_hat;
  c.primal_value = primal_objective(inst, y_hat);
  c.dual_value = dual_function(inst, lambda_hat, mu_hat);
  c.eps_primal = std::max(0.0, c.primal_value - exact.dual_value);
  c.eps_dual = std::max(0.0, exact.primal_value - c.dual_value);
  return c;
}

AffineCertificate solve_inexact(const AffineParamInstance& inst, double target_eps_primal,
                                double target_eps_dual, std::uint64_t seed) {
  if (!(target_eps_primal >= 0.0) || !(target_eps_dual >= 0.0))
    throw SubsolveError(SubsolveErrorKind::kInvalid, "negative error target");
  AffineCertificate c = solve_exact(inst);
  const double gap0 = c.eps_primal, fstar = c.primal_value, theta_star = c.dual_value;
  std::mt19937_64 rng(seed);

  if (target_eps_primal > gap0) {
    const double target = target_eps_primal - gap0;
    const Vec ystar = c.y_hat;
    std::vector<Vec> dirs;
    Vec g = inst.cost.pieces()[inst.cost.active_piece(ystar, kNoX)].slope_y;
    std::normal_distribution<double> nd;
    Vec r(inst.dim_y());
    for (Eigen::Index i = 0; i < r.size(); ++i) r[i] = nd(rng);
    if (r.norm() > 0) r /= r.norm();
    dirs.push_back(g.norm() > 0 ? Vec(g + 0.5 * g.norm() * r) : r);
    for (const auto& p : inst.cost.pieces()) dirs.push_back(p.slope_y);
    double best_rise = 0.0;
    for (const Vec& d : dirs) {
      if (d.norm() == 0.0) continue;
      Vec far = far_point(inst, d);
      double rise = primal_objective(inst, far) - fstar;
      if (rise >= target) {
        Vec step = far - ystar;
        auto gf = [&](double a) { return primal_objective(inst, ystar + a * step) - fstar - target; };
        c.y_hat = ystar + detail::safe_root(gf, -target, rise - target) * step;
        break;
      }
      if (rise > best_rise) {
        best_rise = rise;
        c.y_hat = far;
      }
    }
    c.primal_value = primal_objective(inst, c.y_hat);
  }

  if (target_eps_dual > gap0) {
    const double target = target_eps_dual - gap0;
    const int ne = static_cast<int>(c.lambda_hat.size()), ni = static_cast<int>(c.mu_hat.size());
    Vec star(ne + ni);
    star << c.lambda_hat, c.mu_hat;
    double M = 10.0 * (1.0 + (star.size() ? star.cwiseAbs().maxCoeff() : 0.0));
    std::vector<Vec> cands;
    if (star.norm() > 0) cands.push_back(Vec::Zero(ne + ni));
    for (int i = 0; i < ne + ni; ++i) {
      Vec v = star;
      v[i] += M;
      cands.push_back(v);
      if (i < ne) {
        v[i] -= 2 * M;
        cands.push_back(v);
      }
    }
    std::shuffle(cands.begin(), cands.end(), rng);
    auto theta = [&](const Vec& v) {
      return dual_function(inst, v.head(ne), v.tail(ni).cwiseMax(0.0));
    };
    Vec best = star;
    double best_drop = 0.0;
    for (const Vec& cand : cands) {
      double d = theta_star - theta(cand);
      Vec step = cand - star;
      if (d >= target) {
        auto gf = [&](double a) { return theta_star - target - theta(star + a * step); };
        best = star + detail::safe_root(gf, -target, d - target) * step;
        break;
      }
      if (d > best_drop) {
        best_drop = d;
        best = cand;
      }
    }
    c.lambda_hat = best.head(ne);
    c.mu_hat = best.tail(ni).cwiseMax(0.0);
    c.dual_value = dual_function(inst, c.lambda_hat, c.mu_hat);
  }
  c.eps_primal = std::max(0.0, c.primal_value - theta_star);
  c.eps_dual = std::max(0.0, fstar - c.dual_value);
  return c;
}

}  // namespace isddp

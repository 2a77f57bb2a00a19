#include "isddp/subsolve.hpp"

#include "lifting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace isddp {

namespace {

bool constrained(const SubproblemInstance& inst) { return inst.A.rows() > 0; }

void check_class(const SubproblemInstance& inst) {
  validate(inst);
  if (!inst.ineq.empty() || inst.value_model)
    throw SubsolveError(SubsolveErrorKind::kInvalid,
                        "saddle form handles cost, box and equality rows only");
}

// min or max of <g, y> over Y with Ay = rhs; returns the optimal y and, for
// the min, the multiplier of Ay + B xbar = b in the Lagrangian sign convention.
double linear_over_set(const SubproblemInstance& inst, const Vec& g, bool maximize, Vec* y,
                       Vec* lambda) {
  const int n = inst.dim_y();
  if (!constrained(inst)) {
    Vec best(n);
    double v = 0.0;
    for (int k = 0; k < n; ++k) {
      bool low = maximize ? g[k] < 0 : g[k] >= 0;
      best[k] = low ? inst.Y.lower[k] : inst.Y.upper[k];
      v += g[k] * best[k];
    }
    if (y) *y = best;
    return v;
  }
  lp::Problem P;
  const double sgn = maximize ? -1.0 : 1.0;
  for (int k = 0; k < n; ++k) P.add_var(sgn * g[k], inst.Y.lower[k], inst.Y.upper[k]);
  Vec rhs = inst.b - inst.B * inst.xbar;
  for (Eigen::Index i = 0; i < inst.A.rows(); ++i) {
    std::vector<std::pair<int, double>> row;
    for (int k = 0; k < n; ++k)
      if (inst.A(i, k) != 0.0) row.emplace_back(k, inst.A(i, k));
    P.add_row(row, lp::Sense::kEq, rhs[i]);
  }
  lp::Solution s = detail::solve_checked(P, {}, "saddle inner problem");
  if (y) *y = s.x.cwiseMax(inst.Y.lower).cwiseMin(inst.Y.upper);
  if (lambda) *lambda = -s.row_duals;
  return sgn * s.objective;
}

Vec normalized_weights(Vec w) {
  w = w.cwiseMax(0.0);
  double s = w.sum();
  if (s <= 0.0) return Vec::Constant(w.size(), 1.0 / static_cast<double>(w.size()));
  return w / s;
}

}  // namespace

double fenchel_theta(const SubproblemInstance& inst, const FenchelData& fen, const Vec& w,
                     Vec* y_min, Vec* lambda_opt) {
  Vec g = fen.a2 + fen.A0 * w;
  double c = inst.xbar.dot(fen.a1 + fen.B0 * w) - fen.phi0.dot(w);
  return c + linear_over_set(inst, g, false, y_min, lambda_opt);
}

double fenchel_h(const SubproblemInstance& inst, const FenchelData& fen, const Vec& w,
                 const Vec& lambda) {
  Vec g = fen.a2 + fen.A0 * w;
  double c = inst.xbar.dot(fen.a1 + fen.B0 * w) - fen.phi0.dot(w);
  if (constrained(inst)) {
    g += inst.A.transpose() * lambda;
    c += lambda.dot(inst.B * inst.xbar - inst.b);
  }
  return c + detail::box_min(g, inst.Y);
}

double interior_margin(const SubproblemInstance& inst) {
  const int n = inst.dim_y();
  lp::Problem P;
  for (int k = 0; k < n; ++k) P.add_var(0.0, inst.Y.lower[k], inst.Y.upper[k]);
  int t = P.add_var(-1.0, -1.0, 1.0);
  for (int k = 0; k < n; ++k) {
    if (inst.Y.lower[k] == inst.Y.upper[k]) continue;
    P.add_row({{k, 1.0}, {t, -1.0}}, lp::Sense::kGe, inst.Y.lower[k]);
    P.add_row({{k, 1.0}, {t, 1.0}}, lp::Sense::kLe, inst.Y.upper[k]);
  }
  Vec rhs = inst.b - inst.B * inst.xbar;
  for (Eigen::Index i = 0; i < inst.A.rows(); ++i) {
    std::vector<std::pair<int, double>> row;
    for (int k = 0; k < n; ++k)
      if (inst.A(i, k) != 0.0) row.emplace_back(k, inst.A(i, k));
    P.add_row(row, lp::Sense::kEq, rhs[i]);
  }
  lp::Solution s = lp::solve(P);
  if (s.status != lp::Status::kOptimal) return -lp::kInf;
  return s.x[t];
}

FenchelCertificate certify_fenchel(const SubproblemInstance& inst, const Vec& w_hat,
                                   const Vec& y_hat, const std::optional<Vec>& lambda_hat) {
  check_class(inst);
  FenchelData fen = fenchel_view(inst.cost);
  Certificate exact = solve_exact(inst);
  FenchelCertificate c;
  c.w_hat = w_hat;
  c.y_hat = y_hat;
  c.lambda_hat = lambda_hat;
  c.theta = fenchel_theta(inst, fen, w_hat);
  c.eps = std::max(0.0, exact.primal_value - c.theta);
  c.tau = std::max(0.0, fen.lagrangian(y_hat, inst.xbar, w_hat) - c.theta);
  if (lambda_hat) c.delta = std::max(0.0, c.theta - fenchel_h(inst, fen, w_hat, *lambda_hat));
  return c;
}

FenchelCertificate solve_fenchel_saddle(const SubproblemInstance& inst,
                                        const FenchelTargets& targets, InexactMode mode,
                                        std::uint64_t seed) {
  check_class(inst);
  if (!(targets.eps >= 0 && targets.tau >= 0 && targets.delta >= 0))
    throw SubsolveError(SubsolveErrorKind::kInvalid, "negative error target");
  const bool cons = constrained(inst);
  if (cons && interior_margin(inst) < 1e-7)
    throw SubsolveError(SubsolveErrorKind::kNoInteriorPoint,
                        "no point of ri(Y) satisfies the equality constraints");
  const FenchelData fen = fenchel_view(inst.cost);
  const int np = static_cast<int>(inst.cost.size());

  detail::Lifted L = detail::lift(inst, detail::LiftSpec{Box::point(inst.xbar), true, false, Vec(), Vec(), 0.0});
  lp::Options o;
  double ub = lp::kInf, theta_best = -lp::kInf;
  Vec w_best;
  auto weights_of = [&](const Vec& duals) {
    Vec w(np);
    for (int i = 0; i < np; ++i) w[i] = -duals[L.cost_rows[static_cast<std::size_t>(i)]];
    return normalized_weights(w);
  };
  if (mode == InexactMode::kTruncated && targets.eps > 0) {
    o.algorithm = lp::Algorithm::kPrimal;
    o.on_iterate = [&](const lp::Iterate& it) {
      Vec y = it.x->segment(L.y0, L.ny).cwiseMax(inst.Y.lower).cwiseMin(inst.Y.upper);
      if (infeasibility(inst, y) <= 1e-9) ub = std::min(ub, inst.cost.value(y, inst.xbar));
      Vec w = weights_of(*it.row_duals);
      double th = fenchel_theta(inst, fen, w);
      if (th > theta_best) {
        theta_best = th;
        w_best = w;
      }
      return ub - theta_best > targets.eps;
    };
  }
  lp::Solution sol = detail::solve_checked(L.lp, o, "saddle problem");
  if (sol.status == lp::Status::kOptimal) {
    Vec ystar = L.y(sol).cwiseMax(inst.Y.lower).cwiseMin(inst.Y.upper);
    ub = std::min(ub, inst.cost.value(ystar, inst.xbar));
    Vec w = weights_of(sol.row_duals);
    double th = fenchel_theta(inst, fen, w);
    if (th > theta_best) {
      theta_best = th;
      w_best = w;
    }
  }

  FenchelCertificate c;
  c.w_hat = w_best;
  Vec y_w, lam_w;
  c.theta = fenchel_theta(inst, fen, c.w_hat, &y_w, &lam_w);
  std::mt19937_64 rng(seed);

  if (mode == InexactMode::kInjected && targets.eps > 0) {
    const double gap0 = std::max(0.0, ub - c.theta);
    const double drop = targets.eps - gap0;
    if (drop > 0) {
      std::vector<int> order(static_cast<std::size_t>(np));
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      int worst = order[0];
      double worst_theta = lp::kInf;
      for (int i : order) {
        double th = fenchel_theta(inst, fen, Vec::Unit(np, i));
        if (th < worst_theta) {
          worst_theta = th;
          worst = i;
        }
      }
      Vec step = Vec::Unit(np, worst) - c.w_hat;
      const double top = c.theta;
      if (top - worst_theta >= drop) {
        auto g = [&](double a) { return top - drop - fenchel_theta(inst, fen, c.w_hat + a * step); };
        c.w_hat = c.w_hat + detail::safe_root(g, -drop, top - drop - worst_theta) * step;
      } else {
        c.w_hat = Vec::Unit(np, worst);
      }
      c.theta = fenchel_theta(inst, fen, c.w_hat, &y_w, &lam_w);
    }
  }

  c.y_hat = y_w;
  if (mode == InexactMode::kInjected && targets.tau > 0) {
    Vec g = fen.a2 + fen.A0 * c.w_hat;
    Vec far;
    linear_over_set(inst, g, true, &far, nullptr);
    auto tau_at = [&](const Vec& y) { return fen.lagrangian(y, inst.xbar, c.w_hat) - c.theta; };
    double rise = tau_at(far);
    Vec step = far - y_w;
    if (rise > targets.tau) {
      auto gf = [&](double a) { return tau_at(y_w + a * step) - targets.tau; };
      c.y_hat = y_w + detail::safe_root(gf, tau_at(y_w) - targets.tau, rise - targets.tau) * step;
    } else {
      c.y_hat = far;
    }
  }

  if (cons) {
    Vec lam = lam_w;
    if (mode == InexactMode::kInjected && targets.delta > 0) {
      const int m = static_cast<int>(inst.A.rows());
      const double top = fenchel_h(inst, fen, c.w_hat, lam_w);
      const double M = 10.0 * (1.0 + lam_w.cwiseAbs().maxCoeff());
      std::vector<Vec> cands;
      if (lam_w.norm() > 0) cands.push_back(Vec::Zero(m));
      for (int i = 0; i < m; ++i)
        for (double s : {1.0, -1.0}) {
          Vec v = lam_w;
          v[i] += s * M;
          cands.push_back(v);
        }
      std::shuffle(cands.begin(), cands.end(), rng);
      double best_drop = 0.0;
      for (const Vec& cand : cands) {
        double d = top - fenchel_h(inst, fen, c.w_hat, cand);
        Vec step = cand - lam_w;
        if (d >= targets.delta) {
          auto gf = [&](double a) {
            return top - targets.delta - fenchel_h(inst, fen, c.w_hat, lam_w + a * step);
          };
          lam = lam_w + detail::safe_root(gf, -targets.delta, d - targets.delta) * step;
          break;
        }
        if (d > best_drop) {
          best_drop = d;
          lam = cand;
        }
      }
    }
    c.lambda_hat = lam;
    c.delta = std::max(0.0, c.theta - fenchel_h(inst, fen, c.w_hat, lam));
  }
  c.eps = std::max(0.0, ub - c.theta);
  c.tau = std::max(0.0, fen.lagrangian(c.y_hat, inst.xbar, c.w_hat) - c.theta);
  return c;
}

}  // namespace isddp

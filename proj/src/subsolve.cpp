#include "isddp/subsolve.hpp"

#include "lifting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace isddp {

using detail::Lifted;
using detail::LiftSpec;

namespace {

[[noreturn]] void invalid(const std::string& what) {
  throw SubsolveError(SubsolveErrorKind::kInvalid, what);
}

const Vec kNoX = Vec(0);

Vec clip(const Vec& y, const Box& box) { return y.cwiseMax(box.lower).cwiseMin(box.upper); }

// Maximizer of <dir, y> over the feasible set at z = xbar.
Vec far_point(const SubproblemInstance& inst, const Vec& dir) {
  LiftSpec spec{Box::point(inst.xbar), false, false, -dir, Vec(), 0.0};
  Lifted L = detail::lift(inst, spec);
  return clip(L.y(detail::solve_checked(L.lp, {}, "far point")), inst.Y);
}

Vec active_gradient(const SubproblemInstance& inst, const Vec& y) {
  Vec g = inst.cost.pieces()[inst.cost.active_piece(y, inst.xbar)].slope_y;
  if (inst.value_model) g += inst.value_model->pieces()[inst.value_model->active_piece(y, kNoX)].slope_y;
  return g;
}

// Moves from y* toward a far feasible point until the objective has risen by
// target, or as far as any candidate ray allows.
Vec degrade_primal(const SubproblemInstance& inst, const Vec& ystar, double fstar, double target,
                   std::mt19937_64& rng) {
  const int n = inst.dim_y();
  Vec g = active_gradient(inst, ystar);
  std::normal_distribution<double> nd;
  Vec r(n);
  for (int i = 0; i < n; ++i) r[i] = nd(rng);
  if (r.norm() > 0) r /= r.norm();
  std::vector<Vec> dirs;
  dirs.push_back(g.norm() > 0 ? Vec(g + 0.5 * g.norm() * r) : r);
  dirs.push_back(g);
  Vec vgrad = Vec::Zero(n);
  if (inst.value_model)
    vgrad = inst.value_model->pieces()[inst.value_model->active_piece(ystar, kNoX)].slope_y;
  for (const auto& p : inst.cost.pieces()) dirs.push_back(p.slope_y + vgrad);
  Vec best = ystar;
  double best_rise = 0.0;
  for (const Vec& d : dirs) {
    if (d.norm() == 0.0) continue;
    Vec far = far_point(inst, d);
    double rise = primal_objective(inst, far) - fstar;
    if (rise >= target) {
      Vec step = far - ystar;
      auto gfun = [&](double a) { return primal_objective(inst, ystar + a * step) - fstar - target; };
      double a = detail::safe_root(gfun, -target, rise - target);
      return ystar + a * step;
    }
    if (rise > best_rise) {
      best_rise = rise;
      best = far;
    }
  }
  return best;
}

// Convex combination of lambda* and a deliberately poor multiplier, chosen so
// theta drops by target (or by as much as the candidates allow).
Vec degrade_dual(const SubproblemInstance& inst, const Vec& lstar, double theta_star, double target,
                 std::mt19937_64& rng) {
  const int n = inst.dim_x();
  double M = 10.0 * (1.0 + (n ? lstar.cwiseAbs().maxCoeff() : 0.0));
  std::vector<Vec> cands;
  if (n && lstar.norm() > 0) cands.push_back(Vec::Zero(n));
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (int sgn : {1, -1})
    for (int i : order) {
      double sign = (rng() & 1u) ? 1.0 : -1.0;
      Vec c = lstar;
      c[i] += sgn * sign * M;
      cands.push_back(c);
    }
  Vec best = lstar;
  double best_drop = 0.0;
  for (const Vec& c : cands) {
    double drop = theta_star - dual_function(inst, c);
    if (drop >= target) {
      Vec step = c - lstar;
      auto gfun = [&](double a) { return theta_star - target - dual_function(inst, lstar + a * step); };
      double a = detail::safe_root(gfun, -target, drop - target);
      return lstar + a * step;
    }
    if (drop > best_drop) {
      best_drop = drop;
      best = c;
    }
  }
  return best;
}

Certificate truncated(const SubproblemInstance& inst, double target, const SolveOptions& opt) {
  Lifted L = detail::lift(inst, LiftSpec{Box::point(inst.xbar), true, true, Vec(), Vec(), 0.0});
  Certificate best;
  double fbest = lp::kInf, tbest = -lp::kInf;
  lp::Options o;
  o.algorithm = lp::Algorithm::kPrimal;
  o.trace = opt.trace;
  o.on_iterate = [&](const lp::Iterate& it) {
    Vec y = clip(it.x->segment(L.y0, L.ny), inst.Y);
    if (infeasibility(inst, y) <= 1e-9) {
      double f = primal_objective(inst, y);
      if (f < fbest) {
        fbest = f;
        best.y_hat = y;
      }
    }
    Vec lam = it.reduced_costs->segment(L.z0, L.nx);
    double th = dual_function(inst, lam);
    if (th > tbest) {
      tbest = th;
      best.lambda_hat = lam;
    }
    return fbest - tbest > target;
  };
  detail::solve_checked(L.lp, o, "subproblem");
  if (!(fbest - tbest <= target)) return solve_exact(inst, opt);
  best.primal_value = fbest;
  best.dual_value = tbest;
  best.eps_primal = best.eps_dual = std::max(0.0, fbest - tbest);
  return best;
}

}  // namespace

void validate(const SubproblemInstance& inst) {
  const int ny = inst.dim_y(), nx = inst.dim_x();
  if (inst.Y.upper.size() != ny) invalid("Y bounds differ in length");
  if (inst.x_domain.dim() != nx || inst.x_domain.upper.size() != nx)
    invalid("x_domain dimension differs from xbar");
  for (int i = 0; i < ny; ++i)
    if (inst.Y.lower[i] > inst.Y.upper[i]) invalid("Y is empty");
  if (inst.cost.dim_y() != ny || inst.cost.dim_x() != nx) invalid("cost dimension mismatch");
  if (inst.A.cols() != ny || inst.B.cols() != nx || inst.A.rows() != inst.B.rows() ||
      inst.b.size() != inst.A.rows())
    invalid("constraint dimension mismatch");
  for (const auto& g : inst.ineq)
    if (g.dim_y() != ny || g.dim_x() != nx) invalid("inequality dimension mismatch");
  if (inst.value_model && (inst.value_model->dim_y() != ny || inst.value_model->dim_x() != 0))
    invalid("value model dimension mismatch");
}

SubproblemInstance stage_instance(const MultistageProblem& p, int t, std::size_t realization,
                                  const Vec& xbar, std::optional<PolyhedralFunction> value_model) {
  const Realization& r = p.stage(t).realizations.at(realization);
  SubproblemInstance s{r.cost, r.A, r.B, r.b, r.ineq, p.stage(t).state_set, p.incoming_box(t), xbar,
                       std::move(value_model)};
  return s;
}

double primal_objective(const SubproblemInstance& inst, const Vec& y) {
  double v = inst.cost.value(y, inst.xbar);
  if (inst.value_model) v += inst.value_model->value(y, kNoX);
  return v;
}

double infeasibility(const SubproblemInstance& inst, const Vec& y) {
  double worst = 0.0;
  if (inst.A.rows() > 0) worst = (inst.A * y + inst.B * inst.xbar - inst.b).cwiseAbs().maxCoeff();
  for (const auto& g : inst.ineq) worst = std::max(worst, g.value(y, inst.xbar));
  for (int i = 0; i < inst.dim_y(); ++i)
    worst = std::max({worst, inst.Y.lower[i] - y[i], y[i] - inst.Y.upper[i]});
  return worst;
}

double dual_function(const SubproblemInstance& inst, const Vec& lambda) {
  LiftSpec spec{inst.x_domain, true, true, Vec(), -lambda, lambda.dot(inst.xbar)};
  Lifted L = detail::lift(inst, spec);
  return detail::solve_checked(L.lp, {}, "dual function").objective;
}

Certificate solve_exact(const SubproblemInstance& inst, const SolveOptions& opt) {
  validate(inst);
  Lifted L = detail::lift(inst, LiftSpec{Box::point(inst.xbar), true, true, Vec(), Vec(), 0.0});
  lp::Options o;
  o.trace = opt.trace;
  lp::Solution sol = detail::solve_checked(L.lp, o, "subproblem");
  Certificate c;
  c.y_hat = clip(L.y(sol), inst.Y);
  c.lambda_hat = L.z_reduced_costs(sol);
  c.primal_value = primal_objective(inst, c.y_hat);
  c.dual_value = dual_function(inst, c.lambda_hat);
  c.eps_primal = c.eps_dual = std::max(0.0, c.primal_value - c.dual_value);
  return c;
}

Certificate certify(const SubproblemInstance& inst, const Vec& y_hat, const Vec& lambda_hat) {
  Certificate exact = solve_exact(inst);
  Certificate c;
  c.y_hat = y_hat;
  c.lambda_hat = lambda_hat;
  c.primal_value = primal_objective(inst, y_hat);
  c.dual_value = dual_function(inst, lambda_hat);
  c.eps_primal = std::max(0.0, c.primal_value - exact.dual_value);
  c.eps_dual = std::max(0.0, exact.primal_value - c.dual_value);
  return c;
}

Certificate solve_inexact(const SubproblemInstance& inst, double target_eps_primal,
                          double target_eps_dual, InexactMode mode, std::uint64_t seed,
                          const SolveOptions& opt) {
  if (!(target_eps_primal >= 0.0) || !(target_eps_dual >= 0.0)) invalid("negative error target");
  validate(inst);
  if (target_eps_primal == 0.0 && target_eps_dual == 0.0) return solve_exact(inst, opt);
  if (mode == InexactMode::kTruncated)
    return truncated(inst, std::min(target_eps_primal, target_eps_dual), opt);

  Certificate c = solve_exact(inst, opt);
  const double gap0 = c.eps_primal;
  const double fstar = c.primal_value, theta_star = c.dual_value;
  std::mt19937_64 rng(seed);
  if (target_eps_primal > gap0) {
    c.y_hat = degrade_primal(inst, c.y_hat, fstar, target_eps_primal - gap0, rng);
    c.primal_value = primal_objective(inst, c.y_hat);
  }
  if (target_eps_dual > gap0 && inst.dim_x() > 0) {
    c.lambda_hat = degrade_dual(inst, c.lambda_hat, theta_star, target_eps_dual - gap0, rng);
    c.dual_value = dual_function(inst, c.lambda_hat);
  }
  c.eps_primal = std::max(0.0, c.primal_value - theta_star);
  c.eps_dual = std::max(0.0, fstar - c.dual_value);
  return c;
}

}  // namespace isddp

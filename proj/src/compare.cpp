#include "isddp/compare.hpp"

#include "isddp/driver.hpp"
#include "isddp/lp.hpp"
#include "lifting.hpp"

#include <cmath>
#include <exception>
#include <random>

namespace isddp::compare {

namespace {

Vec gy_mu(const SmoothInstance& inst, const Vec& mu) {
  return inst.num_ineq() > 0 ? Vec(inst.Gy.transpose() * mu) : Vec(Vec::Zero(inst.dim()));
}

Vec grad_y_lagrangian(const SmoothInstance& inst, const Vec& xbar, const Vec& y, const Vec& mu) {
  return inst.q * (y - xbar) + inst.c + gy_mu(inst, mu);
}

Vec slope_x(const SmoothInstance& inst, const Vec& xbar, const Vec& y, const Vec& mu) {
  Vec s = inst.q * (xbar - y) + inst.d;
  if (inst.num_ineq() > 0) s += inst.Gx.transpose() * mu;
  return s;
}

}  // namespace

void validate(const SmoothInstance& inst) {
  const int m = inst.dim(), p = inst.num_ineq();
  auto bad = [](const char* w) { throw std::invalid_argument(w); };
  if (!(inst.q > 0.0)) bad("q must be positive");
  if (inst.c.size() != m || inst.d.size() != m) bad("linear terms differ in length from Y");
  if (p > 0 && (inst.Gy.rows() != p || inst.Gy.cols() != m || inst.Gx.rows() != p || inst.Gx.cols() != m))
    bad("constraint matrices have the wrong shape");
  if (!(inst.constraint_modulus > 0.0)) bad("constraint modulus must be positive");
  validate(inst.Y, "Y");
}

double objective(const SmoothInstance& inst, const Vec& y, const Vec& x) {
  return 0.5 * inst.q * (y - x).squaredNorm() + inst.c.dot(y) + inst.d.dot(x);
}

Vec constraints(const SmoothInstance& inst, const Vec& y, const Vec& x) {
  if (inst.num_ineq() == 0) return Vec(0);
  return inst.Gy * y + inst.Gx * x + inst.h;
}

double dual_function(const SmoothInstance& inst, const Vec& xbar, const Vec& mu, Vec* y_min) {
  Vec lin = inst.c + gy_mu(inst, mu);
  Vec y = (xbar - lin / inst.q).cwiseMax(inst.Y.lower).cwiseMin(inst.Y.upper);
  if (y_min) *y_min = y;
  double v = objective(inst, y, xbar);
  if (inst.num_ineq() > 0) v += mu.dot(constraints(inst, y, xbar));
  return v;
}

SmoothSolution solve_exact(const SmoothInstance& inst, const Vec& xbar) {
  validate(inst);
  const int m = inst.dim(), p = inst.num_ineq();
  const double tol = 1e-10;
  // state per coordinate: 0 free, 1 at lower, 2 at upper
  std::vector<int> state(static_cast<std::size_t>(m), 0);
  long combos = 1;
  for (int i = 0; i < m; ++i) combos *= 3;
  for (long code = 0; code < combos; ++code) {
    long rest = code;
    bool skip = false;
    for (int i = 0; i < m; ++i) {
      state[static_cast<std::size_t>(i)] = static_cast<int>(rest % 3);
      rest /= 3;
      if (state[static_cast<std::size_t>(i)] == 2 && inst.Y.lower[i] == inst.Y.upper[i]) skip = true;
    }
    if (skip) continue;
    for (long mask = 0; mask < (1L << p); ++mask) {
      std::vector<int> F, S;
      Vec y = Vec::Zero(m);
      for (int i = 0; i < m; ++i) {
        int s = state[static_cast<std::size_t>(i)];
        if (s == 0) F.push_back(i);
        y[i] = s == 1 ? inst.Y.lower[i] : (s == 2 ? inst.Y.upper[i] : 0.0);
      }
      for (int k = 0; k < p; ++k)
        if (mask & (1L << k)) S.push_back(k);
      const int nf = static_cast<int>(F.size()), ns = static_cast<int>(S.size());
      Vec mu = Vec::Zero(p);
      if (nf + ns > 0) {
        Mat K = Mat::Zero(nf + ns, nf + ns);
        Vec r = Vec::Zero(nf + ns);
        for (int a = 0; a < nf; ++a) {
          K(a, a) = inst.q;
          r[a] = inst.q * xbar[F[static_cast<std::size_t>(a)]] - inst.c[F[static_cast<std::size_t>(a)]];
        }
        for (int b = 0; b < ns; ++b) {
          const int k = S[static_cast<std::size_t>(b)];
          double rhs = -inst.h[k] - inst.Gx.row(k).dot(xbar);
          for (int i = 0; i < m; ++i)
            if (state[static_cast<std::size_t>(i)] != 0) rhs -= inst.Gy(k, i) * y[i];
          for (int a = 0; a < nf; ++a) {
            double g = inst.Gy(k, F[static_cast<std::size_t>(a)]);
            K(a, nf + b) = g;
            K(nf + b, a) = g;
          }
          r[nf + b] = rhs;
        }
        Eigen::FullPivLU<Mat> lu(K);
        if (lu.rank() < nf + ns) continue;
        Vec sol = lu.solve(r);
        for (int a = 0; a < nf; ++a) y[F[static_cast<std::size_t>(a)]] = sol[a];
        for (int b = 0; b < ns; ++b) mu[S[static_cast<std::size_t>(b)]] = sol[nf + b];
      }
      if ((mu.array() < -tol).any()) continue;
      mu = mu.cwiseMax(0.0);
      if (!inst.Y.contains(y, tol)) continue;
      if (p > 0 && (constraints(inst, y, xbar).array() > tol).any()) continue;
      Vec grad = grad_y_lagrangian(inst, xbar, y, mu);
      bool kkt = true;
      for (int i = 0; i < m && kkt; ++i) {
        int s = state[static_cast<std::size_t>(i)];
        if (s == 1 && grad[i] < -tol) kkt = false;
        if (s == 2 && grad[i] > tol) kkt = false;
      }
      if (!kkt) continue;
      y = y.cwiseMax(inst.Y.lower).cwiseMin(inst.Y.upper);
      return SmoothSolution{y, mu, objective(inst, y, xbar)};
    }
  }
  throw std::runtime_error("smooth instance has no feasible point");
}

SlaterPoint slater_point(const SmoothInstance& inst, const Vec& xbar) {
  const int m = inst.dim(), p = inst.num_ineq();
  lp::Problem P;
  for (int i = 0; i < m; ++i) P.add_var(0.0, inst.Y.lower[i], inst.Y.upper[i]);
  int t = P.add_var(-1.0, -lp::kInf, 1.0);
  for (int i = 0; i < m; ++i) {
    if (inst.Y.lower[i] == inst.Y.upper[i]) continue;
    P.add_row({{i, 1.0}, {t, -1.0}}, lp::Sense::kGe, inst.Y.lower[i]);
    P.add_row({{i, 1.0}, {t, 1.0}}, lp::Sense::kLe, inst.Y.upper[i]);
  }
  for (int k = 0; k < p; ++k) {
    std::vector<std::pair<int, double>> row;
    for (int i = 0; i < m; ++i)
      if (inst.Gy(k, i) != 0.0) row.emplace_back(i, inst.Gy(k, i));
    row.emplace_back(t, 1.0);
    P.add_row(row, lp::Sense::kLe, -inst.h[k] - inst.Gx.row(k).dot(xbar));
  }
  lp::Solution s = lp::solve(P);
  if (s.status != lp::Status::kOptimal) throw std::runtime_error("interior point LP failed");
  SlaterPoint sp;
  sp.y = s.x.head(m).cwiseMax(inst.Y.lower).cwiseMin(inst.Y.upper);
  sp.slack = p > 0 ? -constraints(inst, sp.y, xbar).maxCoeff() : lp::kInf;
  return sp;
}

SmoothCertificate inexact_certificate(const SmoothInstance& inst, const Vec& xbar, double eps,
                                      std::uint64_t seed) {
  if (!(eps >= 0.0)) throw std::invalid_argument("eps must be nonnegative");
  SmoothSolution ex = solve_exact(inst, xbar);
  const int m = inst.dim(), p = inst.num_ineq();
  std::mt19937_64 rng(seed);
  SmoothCertificate c{ex.y, ex.mu, 0.0, 0.0};
  if (eps > 0.0) {
    // A random feasible point: uniform in Y, pulled toward the interior point
    // until the inequalities hold.
    std::uniform_real_distribution<double> U(0.0, 1.0);
    Vec r(m);
    for (int i = 0; i < m; ++i) r[i] = inst.Y.lower[i] + U(rng) * (inst.Y.upper[i] - inst.Y.lower[i]);
    Vec far = r;
    if (p > 0) {
      Vec ys = slater_point(inst, xbar).y;
      Vec gs = constraints(inst, ys, xbar), gr = constraints(inst, r, xbar);
      double a = 1.0;
      for (int k = 0; k < p; ++k)
        if (gr[k] > 0.0) a = std::min(a, -gs[k] / (gr[k] - gs[k]));
      far = ys + std::max(0.0, a) * (r - ys);
    }
    Vec step = far - ex.y;
    // f along the ray is alpha a^2 + beta a above the optimum.
    double alpha = 0.5 * inst.q * step.squaredNorm();
    double beta = std::max(0.0, grad_y_lagrangian(inst, xbar, ex.y, Vec::Zero(p)).dot(step));
    double rise = alpha + beta;
    if (rise > eps && alpha > 0.0) {
      double a = (-beta + std::sqrt(beta * beta + 4.0 * alpha * eps)) / (2.0 * alpha);
      c.y_hat = ex.y + a * step;
      while (objective(inst, c.y_hat, xbar) - ex.value > eps) {
        a *= 1.0 - 1e-12;
        c.y_hat = ex.y + a * step;
      }
    } else if (rise > eps) {
      c.y_hat = ex.y + (eps / beta) * step;
    } else {
      c.y_hat = far;
    }
    c.y_hat = c.y_hat.cwiseMax(inst.Y.lower).cwiseMin(inst.Y.upper);

    if (p > 0) {
      const double M = 10.0 * (1.0 + ex.mu.cwiseAbs().maxCoeff());
      Vec cand = ex.mu;
      std::uniform_int_distribution<int> pick(0, p);
      int i = pick(rng);
      if (i == p && ex.mu.norm() > 0)
        cand = Vec::Zero(p);
      else
        cand[std::min(i, p - 1)] += M;
      Vec dir = cand - ex.mu;
      auto psi = [&](double a) { return ex.value - dual_function(inst, xbar, ex.mu + a * dir) - eps; };
      double top = psi(1.0);
      double a = top > 0.0 ? detail::safe_root(psi, psi(0.0), top, 1e-13) : 1.0;
      c.mu_hat = (ex.mu + a * dir).cwiseMax(0.0);
    }
  }
  c.eps_primal = std::max(0.0, objective(inst, c.y_hat, xbar) - ex.value);
  c.eps_dual = std::max(0.0, ex.value - dual_function(inst, xbar, c.mu_hat));
  return c;
}

double eta(const SmoothInstance& inst, const Vec& xbar, const Vec& y_hat, const Vec& mu_hat) {
  Vec g = grad_y_lagrangian(inst, xbar, y_hat, mu_hat);
  double v = 0.0;
  for (int i = 0; i < inst.dim(); ++i)
    v += std::max(g[i] * (y_hat[i] - inst.Y.lower[i]), g[i] * (y_hat[i] - inst.Y.upper[i]));
  return v;
}

Cut cut_differentiable(const SmoothCertificate& cert, const SmoothInstance& inst, const Vec& xbar,
                       double eps) {
  double lag = objective(inst, cert.y_hat, xbar);
  if (inst.num_ineq() > 0) lag += cert.mu_hat.dot(constraints(inst, cert.y_hat, xbar));
  double e = eta(inst, xbar, cert.y_hat, cert.mu_hat);
  Vec slope = slope_x(inst, xbar, cert.y_hat, cert.mu_hat);
  return Cut{lag - e - slope.dot(xbar), slope, eps + e, CutOrigin::kDifferentiable, 0};
}

Cut cut_coupling(const SmoothCertificate& cert, const SmoothInstance& inst, const Vec& xbar, double eps) {
  // The envelope gradient at the Lagrangian minimizer for mu_hat is a coupling
  // multiplier whose dual value is theta(mu_hat) >= Q(xbar) - eps.
  Vec y_mu;
  dual_function(inst, xbar, cert.mu_hat, &y_mu);
  Vec slope = slope_x(inst, xbar, y_mu, cert.mu_hat);
  return Cut{objective(inst, cert.y_hat, xbar) - 2.0 * eps - slope.dot(xbar), slope, 2.0 * eps,
             CutOrigin::kGeneral, 0};
}

double multiplier_bound(double f_slater, double lower, double eps, double min_slack) {
  if (!(min_slack > 0.0)) throw std::invalid_argument("interior point has no positive slack");
  if (std::isinf(min_slack)) return 0.0;
  return (f_slater - lower + eps) / min_slack;
}

double assemble_L(double L0, double U, double max_Li) { return L0 + U * max_Li; }

CompareReport compare_bounds(const SmoothInstance& inst, const Vec& xbar, double eps, int trials,
                             std::uint64_t seed) {
  validate(inst);
  if (!(eps >= 0.0) || trials < 0) throw std::invalid_argument("eps and trials must be nonnegative");
  const int p = inst.num_ineq();
  SmoothSolution ex = solve_exact(inst, xbar);
  SlaterPoint sp = slater_point(inst, xbar);
  double U = p > 0 ? multiplier_bound(objective(inst, sp.y, xbar), ex.value, eps, sp.slack) : 0.0;
  CompareReport rep;
  rep.L = assemble_L(inst.q, U, p > 0 ? inst.constraint_modulus : 0.0);
  rep.diameter = inst.Y.diameter();
  rep.rows.resize(static_cast<std::size_t>(trials));
  std::vector<std::exception_ptr> errs(static_cast<std::size_t>(trials));
#pragma omp parallel for schedule(dynamic)
  for (int k = 0; k < trials; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    try {
      SmoothCertificate c = inexact_certificate(inst, xbar, eps, derive_seed(seed, 4, 2, ku));
      Cut c1 = cut_coupling(c, inst, xbar, eps);
      Cut c2 = cut_differentiable(c, inst, xbar, eps);
      TrialRow& row = rep.rows[ku];
      row.trial = k;
      row.eps = eps;
      row.c1_minus_c2 = c1.value(xbar) - c2.value(xbar);
      row.lower_bound = -2.0 * eps;
      row.upper_bound = 2.0 * eps + 2.0 * rep.diameter * std::sqrt(rep.L * eps);
      row.mu_g = p > 0 ? c.mu_hat.dot(constraints(inst, c.y_hat, xbar)) : 0.0;
      row.eta = eta(inst, xbar, c.y_hat, c.mu_hat);
    } catch (...) {
      errs[ku] = std::current_exception();
    }
  }
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
  for (const TrialRow& r : rep.rows) {
    const double tol = 1e-9;
    if (r.c1_minus_c2 < r.lower_bound - tol || r.c1_minus_c2 > r.upper_bound + tol)
      throw BoundViolation(r, "trial " + std::to_string(r.trial) + ": intercept gap " +
                                  std::to_string(r.c1_minus_c2) + " outside [" +
                                  std::to_string(r.lower_bound) + ", " + std::to_string(r.upper_bound) + "]");
    if (r.mu_g < -2.0 * r.eps - tol || r.mu_g > tol)
      throw BoundViolation(r, "trial " + std::to_string(r.trial) + ": <mu, g> = " + std::to_string(r.mu_g));
  }
  return rep;
}

SmoothInstance example_instance() {
  SmoothInstance s;
  s.q = 1.0;
  s.c = Vec::Zero(1);
  s.d = Vec::Zero(1);
  s.Gy = Mat::Constant(1, 1, -1.0);
  s.Gx = Mat::Zero(1, 1);
  s.h = Vec::Zero(1);
  s.Y = Box(Vec::Zero(1), Vec::Ones(1));
  return s;
}

}  // namespace isddp::compare

#pragma once

#include "isddp/cuts.hpp"
#include "isddp/model.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace isddp::compare {

// f(y, x) = q/2 |y - x|^2 + <c, y> + <d, x>
// g_i(y, x) = <Gy_i, y> + <Gx_i, x> + h_i <= 0, y in Y. dim y = dim x.
struct SmoothInstance {
  double q = 1.0;
  Vec c, d;
  Mat Gy, Gx;  // p x m
  Vec h;
  Box Y;
  // Moduli of the constraint gradients; affine g has modulus zero, kept as a
  // tiny positive number so L stays finite.
  double constraint_modulus = 1e-12;

  int dim() const { return Y.dim(); }
  int num_ineq() const { return static_cast<int>(h.size()); }
};

void validate(const SmoothInstance& inst);

double objective(const SmoothInstance& inst, const Vec& y, const Vec& x);
Vec constraints(const SmoothInstance& inst, const Vec& y, const Vec& x);
// min over y in Y of f(y, xbar) + <mu, g(y, xbar)>, with the minimizer.
double dual_function(const SmoothInstance& inst, const Vec& xbar, const Vec& mu, Vec* y_min = nullptr);

struct SmoothSolution {
  Vec y;
  Vec mu;
  double value = 0.0;
};

// Exact KKT point by enumeration of active sets (box bounds and inequalities).
SmoothSolution solve_exact(const SmoothInstance& inst, const Vec& xbar);

// Interior point of Y maximizing the smallest inequality slack, and that slack.
struct SlaterPoint {
  Vec y;
  double slack = 0.0;
};
SlaterPoint slater_point(const SmoothInstance& inst, const Vec& xbar);

struct SmoothCertificate {
  Vec y_hat;
  Vec mu_hat;
  double eps_primal = 0.0;
  double eps_dual = 0.0;
};

// Primal point moved along a feasible ray and multiplier moved along a
// nonnegative ray so that each error equals eps when reachable.
SmoothCertificate inexact_certificate(const SmoothInstance& inst, const Vec& xbar, double eps,
                                      std::uint64_t seed);

// max over y in Y of <grad_y L(y_hat), y_hat - y>
double eta(const SmoothInstance& inst, const Vec& xbar, const Vec& y_hat, const Vec& mu_hat);

// Gradient-based cut with looseness eps + eta.
Cut cut_differentiable(const SmoothCertificate& cert, const SmoothInstance& inst, const Vec& xbar,
                       double eps);
// Coupling-multiplier cut with eps_P = eps_D = eps; slope from the envelope
// gradient at the Lagrangian minimizer for mu_hat.
Cut cut_coupling(const SmoothCertificate& cert, const SmoothInstance& inst, const Vec& xbar, double eps);

// U = (f(y_s) - lower + eps) / min_i(-g_i(y_s)) and L = L0 + U max_i L_i.
double multiplier_bound(double f_slater, double lower, double eps, double min_slack);
double assemble_L(double L0, double U, double max_Li);

struct TrialRow {
  int trial = 0;
  double eps = 0.0;
  double c1_minus_c2 = 0.0;
  double lower_bound = 0.0;
  double upper_bound = 0.0;
  double mu_g = 0.0;
  double eta = 0.0;
};

struct CompareReport {
  double L = 0.0;
  double diameter = 0.0;
  std::vector<TrialRow> rows;
};

class BoundViolation : public std::runtime_error {
 public:
  BoundViolation(const TrialRow& row, const std::string& what) : std::runtime_error(what), row_(row) {}
  const TrialRow& row() const { return row_; }

 private:
  TrialRow row_;
};

// Runs `trials` certificates and checks both bounds on the intercept gap and
// -2 eps <= <mu, g(y)> <= 0, with slack 1e-9. Throws BoundViolation.
CompareReport compare_bounds(const SmoothInstance& inst, const Vec& xbar, double eps, int trials,
                             std::uint64_t seed);

// The one-dimensional instance f = (y - x)^2 / 2, g = -y, Y = [0, 1].
SmoothInstance example_instance();

}  // namespace isddp::compare

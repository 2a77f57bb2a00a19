#pragma once

#include "isddp/lp.hpp"
#include "isddp/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace isddp {

// min f(y,z) + V(y)  s.t.  g_k(y,z) <= 0, Ay + Bz = b, y in Y, z = xbar.
// The Lagrangian relaxes z = xbar with z kept in x_domain.
struct SubproblemInstance {
  PolyhedralFunction cost;               // over (y, z)
  Mat A, B;
  Vec b;
  std::vector<PolyhedralFunction> ineq;  // over (y, z)
  Box Y;
  Box x_domain;
  Vec xbar;
  std::optional<PolyhedralFunction> value_model;  // over y, dim_x = 0

  int dim_y() const { return Y.dim(); }
  int dim_x() const { return static_cast<int>(xbar.size()); }
};

void validate(const SubproblemInstance& inst);

// The stage-t subproblem of a multistage problem at incoming state xbar.
SubproblemInstance stage_instance(const MultistageProblem& p, int t, std::size_t realization,
                                  const Vec& xbar,
                                  std::optional<PolyhedralFunction> value_model = std::nullopt);

struct Certificate {
  Vec y_hat;
  Vec lambda_hat;
  double primal_value = 0.0;  // f(y_hat, xbar) + V(y_hat)
  double dual_value = 0.0;    // theta_xbar(lambda_hat)
  double eps_primal = 0.0;
  double eps_dual = 0.0;
};

enum class InexactMode { kTruncated, kInjected };

enum class SubsolveErrorKind { kInfeasible, kUnbounded, kMaxPivots, kNoInteriorPoint, kInvalid };

class SubsolveError : public std::runtime_error {
 public:
  SubsolveError(SubsolveErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  SubsolveErrorKind kind() const { return kind_; }

 private:
  SubsolveErrorKind kind_;
};

struct SolveOptions {
  std::ostream* trace = nullptr;  // LP pivot log
};

Certificate solve_exact(const SubproblemInstance& inst, const SolveOptions& opt = {});
Certificate solve_inexact(const SubproblemInstance& inst, double target_eps_primal,
                          double target_eps_dual, InexactMode mode, std::uint64_t seed,
                          const SolveOptions& opt = {});

// Certified errors of a given pair, measured against an exact solve.
Certificate certify(const SubproblemInstance& inst, const Vec& y_hat, const Vec& lambda_hat);

// f(y, xbar) + V(y)
double primal_objective(const SubproblemInstance& inst, const Vec& y);
// Largest violation of Ay + B xbar = b, g <= 0 and y in Y.
double infeasibility(const SubproblemInstance& inst, const Vec& y);
// theta_xbar(lambda) = min over y in Y, z in x_domain, g <= 0, Ay + Bz = b of
// f(y,z) + V(y) + <lambda, xbar - z>.
double dual_function(const SubproblemInstance& inst, const Vec& lambda);

// ---- Fenchel saddle form (cost, box and optional equality rows only) ----

struct FenchelTargets {
  double eps = 0.0;
  double tau = 0.0;
  double delta = 0.0;
};

struct FenchelCertificate {
  Vec w_hat;
  Vec y_hat;
  std::optional<Vec> lambda_hat;  // present when equality rows exist
  double eps = 0.0;
  double tau = 0.0;
  double delta = 0.0;
  double theta = 0.0;  // theta_xbar(w_hat)
};

FenchelCertificate solve_fenchel_saddle(const SubproblemInstance& inst,
                                        const FenchelTargets& targets, InexactMode mode,
                                        std::uint64_t seed);

// Certified eps, tau, delta of a given triple.
FenchelCertificate certify_fenchel(const SubproblemInstance& inst, const Vec& w_hat,
                                   const Vec& y_hat, const std::optional<Vec>& lambda_hat);

// theta_xbar(w) = min over y in Y (and Ay + B xbar = b) of the Fenchel Lagrangian.
double fenchel_theta(const SubproblemInstance& inst, const FenchelData& fen, const Vec& w,
                     Vec* y_min = nullptr, Vec* lambda_opt = nullptr);
// h_{xbar,w}(lambda) = min over y in Y of L(y, w) + <lambda, Ay + B xbar - b>.
double fenchel_h(const SubproblemInstance& inst, const FenchelData& fen, const Vec& w,
                 const Vec& lambda);
// Largest t with y in [l + t, u - t] (nondegenerate coordinates) and Ay + B xbar = b.
double interior_margin(const SubproblemInstance& inst);

// ---- Problems with the parameter in the constraints only ----
// min f(y)  s.t.  g_i(y) <= (Cx)_i, Ay + Bx = b, y in Y.

struct AffineParamInstance {
  PolyhedralFunction cost;               // over y, dim_x = 0
  std::vector<PolyhedralFunction> ineq;  // over y, dim_x = 0
  Mat C;                                 // ineq.size() x dim_x
  Mat A, B;
  Vec b;
  Box Y;
  Vec xbar;

  int dim_y() const { return Y.dim(); }
  int dim_x() const { return static_cast<int>(xbar.size()); }
};

void validate(const AffineParamInstance& inst);

struct AffineCertificate {
  Vec y_hat;
  Vec lambda_hat;  // equality rows
  Vec mu_hat;      // one per inequality, >= 0
  double primal_value = 0.0;
  double dual_value = 0.0;
  double eps_primal = 0.0;
  double eps_dual = 0.0;
};

AffineCertificate solve_exact(const AffineParamInstance& inst);
AffineCertificate solve_inexact(const AffineParamInstance& inst, double target_eps_primal,
                                double target_eps_dual, std::uint64_t seed);
AffineCertificate certify(const AffineParamInstance& inst, const Vec& y_hat, const Vec& lambda_hat,
                          const Vec& mu_hat);
double dual_function(const AffineParamInstance& inst, const Vec& lambda, const Vec& mu);
double primal_objective(const AffineParamInstance& inst, const Vec& y);
// Value function at x (fresh LP); +inf when infeasible.
double value_at(const AffineParamInstance& inst, const Vec& x);

}  // namespace isddp

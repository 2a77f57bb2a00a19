#pragma once

#include "isddp/model.hpp"
#include "isddp/subsolve.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace isddp {

// Which construction produced a cut.
enum class CutOrigin {
  kInitial,             // lower bound from the instance
  kAffineConstraints,   // parameter in the constraint right-hand sides
  kGeneral,             // z = x coupling multiplier
  kFenchel,             // saddle form over a box
  kFenchelConstrained,  // saddle form with equality rows
  kDifferentiable,      // gradient-based cut of the smooth class
};

const char* to_string(CutOrigin o);
CutOrigin origin_from_string(const std::string& s);

// x -> intercept + <slope, x>
struct Cut {
  double intercept = 0.0;
  Vec slope;
  double looseness = 0.0;
  CutOrigin provenance = CutOrigin::kInitial;
  int iteration = 0;

  double value(const Vec& x) const { return intercept + slope.dot(x); }
};

enum class CutErrorKind { kDimension, kNegativeMultiplier, kSlaterCheckFailed, kMissingMultiplier, kNotFeasible };

class CutError : public std::runtime_error {
 public:
  CutError(CutErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  CutErrorKind kind() const { return kind_; }

 private:
  CutErrorKind kind_;
};

// Append-only max of cuts; never empty.
class CutPool {
 public:
  CutPool(int dim, Cut initial);
  static CutPool constant(int dim, double c);

  int dim() const { return dim_; }
  const std::vector<Cut>& cuts() const { return cuts_; }
  std::size_t size() const { return cuts_.size(); }

  void append(Cut c);
  double eval(const Vec& x) const;
  // Grid evaluation, OpenMP over points.
  std::vector<double> eval_all(const std::vector<Vec>& grid) const;
  // Sequential reference of eval_all.
  std::vector<double> eval_all_serial(const std::vector<Vec>& grid) const;

  // The pool as a polyhedral function of y (dim_x = 0), for use as a value model.
  PolyhedralFunction as_function() const;

  std::string to_json() const;
  static CutPool from_json(const std::string& text);

 private:
  int dim_;
  std::vector<Cut> cuts_;
};

// Slack of the best strictly interior feasible point at z = xbar: y inside Y by
// t on nondegenerate coordinates, g + t <= 0. Negative infinity if none.
double slater_margin(const SubproblemInstance& inst);

Cut cut_affine_constraints(const AffineCertificate& cert, const Mat& B, const Mat& C, const Vec& xbar);
// Runs the interior-point check first unless check_slater is false.
Cut cut_general(const Certificate& cert, const SubproblemInstance& inst, bool check_slater = true);
// Intercept from dual_value instead of primal_value; looseness eps_dual.
Cut cut_general_sharp(const Certificate& cert, const Vec& xbar);
Cut cut_fenchel_unconstrained(const FenchelCertificate& cert, const FenchelData& fen, const Vec& xbar);
Cut cut_fenchel_constrained(const FenchelCertificate& cert, const FenchelData& fen, const Mat& A,
                            const Mat& B, const Vec& b, const Vec& xbar);

}  // namespace isddp

#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace isddp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class ModelErrorKind { kDimension, kProbability, kUnboundedBox, kSyntax, kOther };

class ModelError : public std::runtime_error {
 public:
  ModelError(ModelErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ModelErrorKind kind() const { return kind_; }

 private:
  ModelErrorKind kind_;
};

// <slope_y, y> + <slope_x, x> + offset
struct AffinePiece {
  Vec slope_y;
  Vec slope_x;
  double offset = 0.0;

  double value(const Vec& y, const Vec& x) const;
  bool operator==(const AffinePiece& o) const;
};

// Pointwise max of affine pieces over (y, x).
class PolyhedralFunction {
 public:
  PolyhedralFunction() = default;
  PolyhedralFunction(int dim_y, int dim_x, std::vector<AffinePiece> pieces);

  static PolyhedralFunction constant(int dim_y, int dim_x, double c);

  int dim_y() const { return dim_y_; }
  int dim_x() const { return dim_x_; }
  const std::vector<AffinePiece>& pieces() const { return pieces_; }
  std::size_t size() const { return pieces_.size(); }

  double value(const Vec& y, const Vec& x) const;
  // Index of a maximizing piece (lowest index on ties).
  std::size_t active_piece(const Vec& y, const Vec& x) const;

  bool operator==(const PolyhedralFunction& o) const = default;

 private:
  int dim_y_ = 0;
  int dim_x_ = 0;
  std::vector<AffinePiece> pieces_;
};

struct Box {
  Vec lower;
  Vec upper;

  Box() = default;
  Box(Vec lo, Vec hi);
  static Box point(const Vec& x) { return Box(x, x); }

  int dim() const { return static_cast<int>(lower.size()); }
  bool contains(const Vec& x, double tol = 1e-9) const;
  double diameter() const;
  bool operator==(const Box& o) const;
};

struct Realization {
  double probability = 1.0;
  Mat A;  // rows x state_dim(t)
  Mat B;  // rows x state_dim(t-1)
  Vec b;
  PolyhedralFunction cost;  // over (x_t, x_{t-1})
  std::vector<PolyhedralFunction> ineq;  // each <= 0

  bool operator==(const Realization& o) const;
};

struct StageModel {
  int state_dim = 0;
  Box state_set;
  std::vector<Realization> realizations;
  double cost_lower_bound = 0.0;

  bool operator==(const StageModel& o) const = default;
};

struct MultistageProblem {
  int horizon = 0;
  Vec x0;
  std::vector<StageModel> stages;  // stages[t-1] is stage t

  const StageModel& stage(int t) const { return stages.at(static_cast<std::size_t>(t - 1)); }
  int state_dim(int t) const;  // t = 0 gives dim(x0)
  // Domain of the incoming state of stage t: {x0} for t = 1, the box of t-1 otherwise.
  Box incoming_box(int t) const;
  // Number of nodes in the scenario tree including the root.
  double node_count() const;

  bool operator==(const MultistageProblem& o) const;
};

// Throws ModelError describing the first violated invariant.
void validate(const PolyhedralFunction& f);
void validate(const Box& box, const std::string& what);
void validate(const MultistageProblem& p);

// Finite-support conjugate data of a polyhedral function with W the unit
// simplex over its pieces.
struct FenchelData {
  Vec a1;    // dim_x, zero
  Vec a2;    // dim_y, zero
  Mat A0;    // dim_y x pieces
  Mat B0;    // dim_x x pieces
  Vec phi0;  // pieces

  // y'a2 + x'a1 + y'A0 w + x'B0 w - phi0'w
  double lagrangian(const Vec& y, const Vec& x, const Vec& w) const;
};

FenchelData fenchel_view(const PolyhedralFunction& f);

}  // namespace isddp

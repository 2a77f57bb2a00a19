#pragma once

#include "isddp/model.hpp"
#include "isddp/subsolve.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace isddp::oracle {

enum class OracleErrorKind { kTooLarge, kInfeasible, kSolver, kInvalid };

class OracleError : public std::runtime_error {
 public:
  OracleError(OracleErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  OracleErrorKind kind() const { return kind_; }

 private:
  OracleErrorKind kind_;
};

struct TreeNode {
  int id = 0;
  int stage = 0;   // root is stage 0 and carries x0
  int parent = -1;
  std::vector<int> children;
  double probability = 1.0;  // unconditional path probability
  int realization = -1;
};

// Nodes in breadth-first order; node 0 is the root.
std::vector<TreeNode> build_tree(const MultistageProblem& p, double max_nodes = 1e5);

struct ExtensiveFormResult {
  double value = 0.0;
  std::vector<TreeNode> tree;
  std::vector<Vec> decisions;  // per node; the root holds x0
};

// One LP over every node decision of the tree.
ExtensiveFormResult extensive_form(const MultistageProblem& p, double max_nodes = 1e5);

// Q_t(x) by the extensive form of the subtree hanging from a stage t-1 node
// with state x. t = T + 1 gives 0.
double true_Q_at(const MultistageProblem& p, int t, const Vec& x, double max_nodes = 1e5);

// Regular grid with `per_dim` points per coordinate (a single point on
// degenerate coordinates), first coordinate fastest.
std::vector<Vec> box_grid(const Box& box, int per_dim);

struct GridValues {
  std::vector<Vec> points;
  std::vector<double> values;  // upper estimates of Q_t at the points
  // values - Q_t <= value_bound at the points; the convex-hull interpolant of
  // the values overestimates Q_t on the whole box by at most interp_bound.
  double value_bound = 0.0;
  double interp_bound = 0.0;
};

// Backward recursion on grids over the stage boxes with exact stage LPs; the
// next-stage function enters through the lower convex hull of its grid values.
GridValues true_Q_grid(const MultistageProblem& p, int t, int per_dim);

struct PointValue {
  double value = 0.0;
  bool feasible = true;
};

// Value of the subproblem at each grid point, with z fixed to the point.
// Independent formulation: z is substituted into the right-hand sides.
std::vector<PointValue> single_value_function_grid(const SubproblemInstance& inst,
                                                   const std::vector<Vec>& grid);
// Sequential reference of the above.
std::vector<PointValue> single_value_function_grid_serial(const SubproblemInstance& inst,
                                                          const std::vector<Vec>& grid);
PointValue single_value(const SubproblemInstance& inst, const Vec& x);

}  // namespace isddp::oracle

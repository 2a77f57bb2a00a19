#pragma once

// LP lifting of polyhedral subproblems, shared by the solvers and the oracle.

#include "isddp/lp.hpp"
#include "isddp/subsolve.hpp"

#include <functional>

namespace isddp::detail {

struct LiftSpec {
  Box z_box;
  bool cost_epigraph = true;
  bool value_epigraph = true;
  Vec y_objective;  // optional extra linear term on y
  Vec z_objective;  // optional extra linear term on z
  double offset = 0.0;
};

struct Lifted {
  lp::Problem lp;
  int ny = 0, nx = 0;
  int y0 = 0, z0 = 0, s = -1, r = -1;
  std::vector<int> cost_rows, value_rows, ineq_rows, ineq_owner, eq_rows;

  Vec y(const lp::Solution& sol) const { return sol.x.segment(y0, ny); }
  Vec z(const lp::Solution& sol) const { return sol.x.segment(z0, nx); }
  Vec z_reduced_costs(const lp::Solution& sol) const { return sol.reduced_costs.segment(z0, nx); }
};

Lifted lift(const SubproblemInstance& inst, const LiftSpec& spec);

// min over the box of <a, v>
double box_min(const Vec& a, const Box& box);
// A lower bound on f over Y x Z, pushed strictly below so it never binds.
double epigraph_floor(const PolyhedralFunction& f, const Box& Y, const Box& Z);

lp::Solution solve_checked(const lp::Problem& p, const lp::Options& opt, const std::string& what);

// g nondecreasing on [0,1] with g(0) <= 0 < g(1): returns a with g(a) <= 0, close to the root.
double safe_root(const std::function<double(double)>& g, double g0, double g1, double tol = 1e-11);

}  // namespace isddp::detail

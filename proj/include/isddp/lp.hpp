#pragma once

#include <Eigen/Dense>

#include <functional>
#include <iosfwd>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace isddp::lp {

using Vec = Eigen::VectorXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Sense { kLe, kGe, kEq };
enum class Status { kOptimal, kInfeasible, kUnbounded, kMaxPivots, kStopped };
enum class Algorithm { kDual, kPrimal };

const char* to_string(Status s);

// min c'x + offset  s.t.  row_i(x) {<=,>=,=} rhs_i,  lower <= x <= upper
class Problem {
 public:
  int add_var(double cost, double lower, double upper);
  int add_row(const std::vector<std::pair<int, double>>& coeffs, Sense sense, double rhs);

  int num_vars() const { return static_cast<int>(cost_.size()); }
  int num_rows() const { return static_cast<int>(sense_.size()); }

  void set_cost(int j, double c) { cost_[static_cast<std::size_t>(j)] = c; }
  void set_bounds(int j, double lo, double hi);
  void set_rhs(int i, double r) { rhs_[static_cast<std::size_t>(i)] = r; }
  double offset = 0.0;

  const std::vector<double>& cost() const { return cost_; }
  const std::vector<double>& lower() const { return lower_; }
  const std::vector<double>& upper() const { return upper_; }
  const std::vector<Sense>& sense() const { return sense_; }
  const std::vector<double>& rhs() const { return rhs_; }
  const std::vector<std::vector<std::pair<int, double>>>& rows() const { return rows_; }

 private:
  std::vector<double> cost_, lower_, upper_, rhs_;
  std::vector<Sense> sense_;
  std::vector<std::vector<std::pair<int, double>>> rows_;
};

// Snapshot handed to the iteration callback of the primal method (phase 2 only).
struct Iterate {
  long pivot = 0;
  const Vec* x = nullptr;              // structural values, primal feasible
  const Vec* row_duals = nullptr;      // basis duals (not necessarily dual feasible)
  const Vec* reduced_costs = nullptr;  // structural reduced costs
  double objective = 0.0;
};

struct Options {
  Algorithm algorithm = Algorithm::kDual;
  long max_pivots = 0;  // 0: automatic
  double feas_tol = 1e-9;
  double opt_tol = 1e-9;
  int refactor_period = 64;
  int bland_after = 50;  // consecutive degenerate pivots before switching to Bland
  std::ostream* trace = nullptr;
  // Return false to stop; the solve then reports kStopped with the last iterate.
  std::function<bool(const Iterate&)> on_iterate;
};

struct Solution {
  Status status = Status::kInfeasible;
  Vec x;              // structural values
  Vec row_duals;      // d objective / d rhs_i
  Vec reduced_costs;  // c_j - a_j' y
  double objective = 0.0;
  long pivots = 0;
};

Solution solve(const Problem& p, const Options& opt = {});

class SolveError : public std::runtime_error {
 public:
  SolveError(Status s, const std::string& what) : std::runtime_error(what), status_(s) {}
  Status status() const { return status_; }

 private:
  Status status_;
};

}  // namespace isddp::lp

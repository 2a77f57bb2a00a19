#pragma once

#include "isddp/cuts.hpp"
#include "isddp/model.hpp"
#include "isddp/subsolve.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace isddp {

// Per-iteration error targets: eps for backward-pass solves, delta for
// forward-pass solves.
struct ErrorSchedule {
  enum class Kind { kConstant, kVanishing, kCustom };
  Kind kind = Kind::kConstant;
  double eps_bar = 0.0;
  double delta_bar = 0.0;
  double decay = 0.0;  // vanishing: eps = delta = decay / k
  std::function<double(int k, int t)> custom_eps;
  std::function<double(int k, int t)> custom_delta;

  static ErrorSchedule exact() { return {}; }
  static ErrorSchedule constant(double eps, double delta);
  static ErrorSchedule vanishing(double decay);

  double eps(int k, int t) const;
  double delta(int k, int t) const;
  // Suprema over k used in the bound formulas; custom schedules return eps_bar / delta_bar.
  double sup_eps() const;
  double sup_delta() const;
  bool is_exact() const { return sup_eps() == 0.0 && sup_delta() == 0.0; }
};

void validate(const ErrorSchedule& s);

struct RunOptions {
  InexactMode mode = InexactMode::kInjected;
  std::uint64_t seed = 1;
  bool sharp_intercepts = false;
  bool parallel = true;         // OpenMP over realizations in the backward pass
  bool simulate_tree = true;    // policy cost over the whole tree when small enough
  double tree_node_limit = 1e4;
  bool full_tree_sim = false;   // per-node gaps against true_value
  bool stop_on_plateau = false;
  int plateau_window = 20;
  double plateau_tol = 1e-6;
  // Q_t(x) for t = 2..T+1; needed for full_tree_sim and pool validity audits.
  std::function<double(int t, const Vec& x)> true_value;
  // Audit points per stage t = 2..T (index t); empty disables the audits.
  std::vector<std::vector<Vec>> audit_points;
  // True Q_t at the audit points, same layout; enables the validity audit.
  std::vector<std::vector<double>> audit_values;
};

struct IterationRecord {
  int k = 0;
  double lower_bound = 0.0;
  std::vector<int> sampled_path;   // realization index per stage, stage 1 first
  std::vector<Vec> forward_states; // x_1 .. x_T
  double upper_path = 0.0;
  std::optional<double> upper_tree;
  double eps = 0.0;    // eps_t^k at t = 2 (the schedule value)
  double delta = 0.0;  // delta_t^k at t = 1
  double wall_ms = 0.0;
  // Max over stage-(t-1) nodes of Q_t(x_n) - Q_t^k(x_n), index t = 2..T.
  std::vector<double> node_gap;
  int monotonicity_violations = 0;
  int validity_violations = 0;
};

class DriverError : public std::runtime_error {
 public:
  DriverError(int k, int t, int realization, const std::string& what);
  int iteration() const { return k_; }
  int stage() const { return t_; }
  int realization() const { return j_; }

 private:
  int k_, t_, j_;
};

struct ForwardResult {
  std::vector<int> path;
  std::vector<Vec> states;
  double path_cost = 0.0;
};

class Solver {
 public:
  Solver(MultistageProblem problem, ErrorSchedule schedule, RunOptions options = {});

  const MultistageProblem& problem() const { return problem_; }
  // Q_t^k for t = 2..T+1; Q_{T+1} is the zero pool.
  const CutPool& pool(int t) const;

  ForwardResult forward_pass(int k, std::uint64_t seed) const;
  // Cuts for t = T..2 at the given forward states, then the stage-1 lower bound.
  double backward_pass(int k, const std::vector<Vec>& states);
  // The same with the realizations solved one after another.
  double backward_pass_serial(int k, const std::vector<Vec>& states);
  // Lower bound from the current pools.
  double lower_bound() const;
  // Expected cost of the current policy over the whole tree and the visited states.
  double simulate_tree(int k, std::vector<std::vector<Vec>>* states_by_stage = nullptr) const;

  IterationRecord iterate(int k);
  std::vector<IterationRecord> run(int iterations);

 private:
  SubproblemInstance instance(int t, std::size_t j, const Vec& xbar) const;
  Cut stage_cut(int k, int t, const Vec& xbar, bool parallel) const;
  double backward(int k, const std::vector<Vec>& states, bool parallel);

  MultistageProblem problem_;
  ErrorSchedule schedule_;
  RunOptions opt_;
  std::vector<CutPool> pools_;  // pools_[t] for t = 0..T+1; 0 and 1 unused
};

// Whether the last `window` values lie within tol of each other.
bool on_plateau(const std::vector<double>& values, int window, double tol);

// Deterministic seed for one solve, independent of execution order.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b, std::uint64_t c);

}  // namespace isddp

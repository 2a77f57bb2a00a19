#include "isddp/driver.hpp"

#include "isddp/oracle.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <random>

namespace isddp {

ErrorSchedule ErrorSchedule::constant(double eps, double delta) {
  ErrorSchedule s;
  s.eps_bar = eps;
  s.delta_bar = delta;
  return s;
}

ErrorSchedule ErrorSchedule::vanishing(double decay) {
  ErrorSchedule s;
  s.kind = Kind::kVanishing;
  s.decay = decay;
  return s;
}

double ErrorSchedule::eps(int k, int t) const {
  switch (kind) {
    case Kind::kConstant: return eps_bar;
    case Kind::kVanishing: return decay / std::max(1, k);
    case Kind::kCustom: return custom_eps ? custom_eps(k, t) : eps_bar;
  }
  return 0.0;
}

double ErrorSchedule::delta(int k, int t) const {
  switch (kind) {
    case Kind::kConstant: return delta_bar;
    case Kind::kVanishing: return decay / std::max(1, k);
    case Kind::kCustom: return custom_delta ? custom_delta(k, t) : delta_bar;
  }
  return 0.0;
}

double ErrorSchedule::sup_eps() const { return kind == Kind::kVanishing ? decay : eps_bar; }
double ErrorSchedule::sup_delta() const { return kind == Kind::kVanishing ? decay : delta_bar; }

void validate(const ErrorSchedule& s) {
  if (!(s.eps_bar >= 0.0) || !(s.delta_bar >= 0.0) || !(s.decay >= 0.0))
    throw std::invalid_argument("error schedule values must be nonnegative");
}

DriverError::DriverError(int k, int t, int realization, const std::string& what)
    : std::runtime_error("iteration " + std::to_string(k) + ", stage " + std::to_string(t) +
                         (realization >= 0 ? ", realization " + std::to_string(realization) : "") +
                         ": " + what),
      k_(k),
      t_(t),
      j_(realization) {}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(mix(base) ^ a) ^ b) ^ c);
}

bool on_plateau(const std::vector<double>& values, int window, double tol) {
  if (window < 1 || values.size() < static_cast<std::size_t>(window)) return false;
  double lo = lp::kInf, hi = -lp::kInf;
  for (auto it = values.end() - window; it != values.end(); ++it) {
    lo = std::min(lo, *it);
    hi = std::max(hi, *it);
  }
  return hi - lo <= tol;
}

Solver::Solver(MultistageProblem problem, ErrorSchedule schedule, RunOptions options)
    : problem_(std::move(problem)), schedule_(std::move(schedule)), opt_(std::move(options)) {
  validate(problem_);
  validate(schedule_);
  const int T = problem_.horizon;
  // Step 0: constant minorants from the tail sums of the stage cost bounds.
  double tail = 0.0;
  std::vector<double> tails(static_cast<std::size_t>(T + 2), 0.0);
  for (int t = T; t >= 1; --t) {
    tail += problem_.stage(t).cost_lower_bound;
    tails[static_cast<std::size_t>(t)] = tail;
  }
  for (int t = 0; t <= T + 1; ++t) {
    int dim = t >= 1 ? problem_.state_dim(t - 1) : 0;
    double c = (t >= 2 && t <= T) ? tails[static_cast<std::size_t>(t)] : 0.0;
    pools_.push_back(CutPool::constant(dim, c));
  }
}

const CutPool& Solver::pool(int t) const {
  if (t < 2 || t > problem_.horizon + 1) throw std::out_of_range("pool index out of range");
  return pools_[static_cast<std::size_t>(t)];
}

SubproblemInstance Solver::instance(int t, std::size_t j, const Vec& xbar) const {
  std::optional<PolyhedralFunction> vm;
  if (t < problem_.horizon) vm = pools_[static_cast<std::size_t>(t + 1)].as_function();
  return stage_instance(problem_, t, j, xbar, std::move(vm));
}

namespace {

int sample(std::mt19937_64& rng, const std::vector<Realization>& reals) {
  double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  double acc = 0.0;
  for (std::size_t j = 0; j < reals.size(); ++j) {
    acc += reals[j].probability;
    if (u < acc) return static_cast<int>(j);
  }
  return static_cast<int>(reals.size()) - 1;
}

}  // namespace

ForwardResult Solver::forward_pass(int k, std::uint64_t seed) const {
  ForwardResult fr;
  std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(k), 0, 0));
  Vec x = problem_.x0;
  for (int t = 1; t <= problem_.horizon; ++t) {
    const auto& reals = problem_.stage(t).realizations;
    int j = sample(rng, reals);
    double d = schedule_.delta(k, t);
    Certificate c;
    try {
      SubproblemInstance inst = instance(t, static_cast<std::size_t>(j), x);
      c = d == 0.0 ? solve_exact(inst)
                   : solve_inexact(inst, d, opt_.mode == InexactMode::kInjected ? 0.0 : d, opt_.mode,
                                   derive_seed(seed, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(t),
                                               1000u + static_cast<std::uint64_t>(j)));
    } catch (const std::exception& e) {
      throw DriverError(k, t, j, e.what());
    }
    fr.path_cost += reals[static_cast<std::size_t>(j)].cost.value(c.y_hat, x);
    fr.path.push_back(j);
    fr.states.push_back(c.y_hat);
    x = c.y_hat;
  }
  return fr;
}

Cut Solver::stage_cut(int k, int t, const Vec& xbar, bool parallel) const {
  const auto& reals = problem_.stage(t).realizations;
  const long n = static_cast<long>(reals.size());
  const double eps = schedule_.eps(k, t);
  std::vector<Certificate> certs(reals.size());
  std::vector<std::exception_ptr> errs(reals.size());
  auto solve_one = [&](long j) {
    const auto ju = static_cast<std::size_t>(j);
    try {
      SubproblemInstance inst = instance(t, ju, xbar);
      certs[ju] = eps == 0.0 ? solve_exact(inst)
                             : solve_inexact(inst, eps, eps, opt_.mode,
                                             derive_seed(opt_.seed, static_cast<std::uint64_t>(k),
                                                         static_cast<std::uint64_t>(t), ju));
    } catch (...) {
      errs[ju] = std::current_exception();
    }
  };
  if (parallel) {
#pragma omp parallel for schedule(dynamic)
    for (long j = 0; j < n; ++j) solve_one(j);
  } else {
    for (long j = 0; j < n; ++j) solve_one(j);
  }
  for (std::size_t j = 0; j < errs.size(); ++j)
    if (errs[j]) {
      try {
        std::rethrow_exception(errs[j]);
      } catch (const std::exception& e) {
        throw DriverError(k, t, static_cast<int>(j), e.what());
      }
    }
  // Fixed summation order over realizations.
  Vec beta = Vec::Zero(xbar.size());
  double theta = 0.0;
  for (std::size_t j = 0; j < reals.size(); ++j) {
    const double p = reals[j].probability;
    const double v = opt_.sharp_intercepts ? certs[j].dual_value : certs[j].primal_value;
    beta += p * certs[j].lambda_hat;
    theta += p * (v - certs[j].lambda_hat.dot(xbar));
  }
  Cut c;
  c.slope = beta;
  c.intercept = opt_.sharp_intercepts ? theta : theta - 2.0 * eps;
  c.looseness = opt_.sharp_intercepts ? eps : 2.0 * eps;
  c.provenance = CutOrigin::kGeneral;
  c.iteration = k;
  return c;
}

double Solver::backward(int k, const std::vector<Vec>& states, bool parallel) {
  if (static_cast<int>(states.size()) != problem_.horizon)
    throw DriverError(k, 0, -1, "forward states do not cover the horizon");
  for (int t = problem_.horizon; t >= 2; --t) {
    Cut c = stage_cut(k, t, states[static_cast<std::size_t>(t - 2)], parallel);
    pools_[static_cast<std::size_t>(t)].append(std::move(c));
  }
  return lower_bound();
}

double Solver::backward_pass(int k, const std::vector<Vec>& states) {
  return backward(k, states, opt_.parallel);
}

double Solver::backward_pass_serial(int k, const std::vector<Vec>& states) {
  return backward(k, states, false);
}

double Solver::lower_bound() const {
  try {
    return solve_exact(instance(1, 0, problem_.x0)).dual_value;
  } catch (const std::exception& e) {
    throw DriverError(0, 1, 0, e.what());
  }
}

double Solver::simulate_tree(int k, std::vector<std::vector<Vec>>* states_by_stage) const {
  std::vector<oracle::TreeNode> nodes = oracle::build_tree(problem_, opt_.tree_node_limit);
  std::vector<Vec> state(nodes.size());
  state[0] = problem_.x0;
  if (states_by_stage) states_by_stage->assign(static_cast<std::size_t>(problem_.horizon + 1), {});
  if (states_by_stage) (*states_by_stage)[0].push_back(problem_.x0);
  double total = 0.0;
  for (std::size_t n = 1; n < nodes.size(); ++n) {
    const auto& nd = nodes[n];
    const Vec& xin = state[static_cast<std::size_t>(nd.parent)];
    const double d = schedule_.delta(k, nd.stage);
    const auto j = static_cast<std::size_t>(nd.realization);
    Certificate c;
    try {
      SubproblemInstance inst = instance(nd.stage, j, xin);
      c = d == 0.0 ? solve_exact(inst)
                   : solve_inexact(inst, d, opt_.mode == InexactMode::kInjected ? 0.0 : d, opt_.mode,
                                   derive_seed(opt_.seed, static_cast<std::uint64_t>(k), 1u << 20,
                                               static_cast<std::uint64_t>(n)));
    } catch (const std::exception& e) {
      throw DriverError(k, nd.stage, nd.realization, e.what());
    }
    state[n] = c.y_hat;
    total += nd.probability * problem_.stage(nd.stage).realizations[j].cost.value(c.y_hat, xin);
    if (states_by_stage) (*states_by_stage)[static_cast<std::size_t>(nd.stage)].push_back(c.y_hat);
  }
  return total;
}

IterationRecord Solver::iterate(int k) {
  auto t0 = std::chrono::steady_clock::now();
  IterationRecord rec;
  rec.k = k;
  rec.eps = schedule_.eps(k, 2);
  rec.delta = schedule_.delta(k, 1);
  ForwardResult fr = forward_pass(k, opt_.seed);
  rec.sampled_path = fr.path;
  rec.forward_states = fr.states;
  rec.upper_path = fr.path_cost;

  std::vector<std::vector<Vec>> tree_states;
  const bool small = problem_.node_count() <= opt_.tree_node_limit;
  if ((opt_.simulate_tree || opt_.full_tree_sim) && small)
    rec.upper_tree = simulate_tree(k, &tree_states);

  const int T = problem_.horizon;
  const bool audit = opt_.audit_points.size() == static_cast<std::size_t>(T + 1);
  std::vector<std::vector<double>> before(static_cast<std::size_t>(T + 1));
  if (audit)
    for (int t = 2; t <= T; ++t)
      before[static_cast<std::size_t>(t)] = pools_[static_cast<std::size_t>(t)].eval_all(opt_.audit_points[static_cast<std::size_t>(t)]);

  rec.lower_bound = backward(k, fr.states, opt_.parallel);

  if (audit) {
    const bool check_valid = opt_.audit_values.size() == static_cast<std::size_t>(T + 1);
    for (int t = 2; t <= T; ++t) {
      const auto tu = static_cast<std::size_t>(t);
      std::vector<double> after = pools_[tu].eval_all(opt_.audit_points[tu]);
      for (std::size_t i = 0; i < after.size(); ++i) {
        if (after[i] < before[tu][i]) ++rec.monotonicity_violations;
        if (check_valid && after[i] > opt_.audit_values[tu][i] + 1e-9) ++rec.validity_violations;
      }
    }
  }

  if (opt_.full_tree_sim && opt_.true_value && !tree_states.empty()) {
    rec.node_gap.assign(static_cast<std::size_t>(T + 1), 0.0);
    for (int t = 2; t <= T; ++t) {
      double worst = -lp::kInf;
      for (const Vec& x : tree_states[static_cast<std::size_t>(t - 1)])
        worst = std::max(worst, opt_.true_value(t, x) - pools_[static_cast<std::size_t>(t)].eval(x));
      rec.node_gap[static_cast<std::size_t>(t)] = worst;
    }
  }
  rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

std::vector<IterationRecord> Solver::run(int iterations) {
  if (iterations < 1) throw std::invalid_argument("iteration count must be at least 1");
  std::vector<IterationRecord> recs;
  std::vector<double> lbs;
  for (int k = 1; k <= iterations; ++k) {
    recs.push_back(iterate(k));
    lbs.push_back(recs.back().lower_bound);
    if (opt_.stop_on_plateau && on_plateau(lbs, opt_.plateau_window, opt_.plateau_tol)) break;
  }
  return recs;
}

}  // namespace isddp

#include <doctest.h>

#include "isddp/driver.hpp"
#include "isddp/oracle.hpp"
#include "support/fixtures.hpp"
#include "support/generators.hpp"

#include <json.hpp>

#include <fstream>

using namespace isddp;
using namespace isddp::testsupport;

namespace {

// 50 audit points per stage with exact values from subtree extensive forms.
void add_audit(RunOptions& o, const MultistageProblem& p) {
  o.audit_points.assign(static_cast<std::size_t>(p.horizon + 1), {});
  o.audit_values.assign(static_cast<std::size_t>(p.horizon + 1), {});
  for (int t = 2; t <= p.horizon; ++t) {
    auto pts = oracle::box_grid(p.incoming_box(t), 50);
    for (const auto& x : pts) o.audit_values[static_cast<std::size_t>(t)].push_back(oracle::true_Q_at(p, t, x));
    o.audit_points[static_cast<std::size_t>(t)] = std::move(pts);
  }
}

bool same_records(const std::vector<IterationRecord>& a, const std::vector<IterationRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].lower_bound != b[i].lower_bound || a[i].upper_path != b[i].upper_path ||
        a[i].upper_tree != b[i].upper_tree || a[i].sampled_path != b[i].sampled_path)
      return false;
    for (std::size_t t = 0; t < a[i].forward_states.size(); ++t)
      if (a[i].forward_states[t] != b[i].forward_states[t]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("schedules") {
  auto c = ErrorSchedule::constant(0.05, 0.02);
  CHECK(c.eps(7, 2) == 0.05);
  CHECK(c.delta(7, 1) == 0.02);
  auto v = ErrorSchedule::vanishing(0.5);
  CHECK(v.eps(1, 2) == 0.5);
  CHECK(v.eps(4, 2) == 0.125);
  CHECK(v.delta(10, 3) == 0.05);
  CHECK(v.sup_eps() == 0.5);
  CHECK(ErrorSchedule::exact().is_exact());
  ErrorSchedule bad = ErrorSchedule::constant(-1.0, 0.0);
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  ErrorSchedule custom;
  custom.kind = ErrorSchedule::Kind::kCustom;
  custom.custom_eps = [](int k, int t) { return 0.1 * t / k; };
  CHECK(custom.eps(2, 3) == doctest::Approx(0.15));
}

TEST_CASE("initial pools from tail sums") {
  auto p = load_fixture("fixture3");
  p.stages[0].cost_lower_bound = 1.0;
  p.stages[1].cost_lower_bound = 2.0;
  p.stages[2].cost_lower_bound = 3.0;
  Solver s(p, ErrorSchedule::exact());
  for (double x : {0.0, 0.7, 2.0}) {
    CHECK(s.pool(2).eval(Vec::Constant(1, x)) == 5.0);
    CHECK(s.pool(3).eval(Vec::Constant(1, x)) == 3.0);
    CHECK(s.pool(4).eval(Vec::Constant(1, x)) == 0.0);
  }
}

TEST_CASE("zero cost bounds give zero initial pools") {
  auto p = load_fixture("fixture3");
  for (auto& st : p.stages) st.cost_lower_bound = 0.0;
  Solver s(p, ErrorSchedule::exact());
  for (int t = 2; t <= 4; ++t) CHECK(s.pool(t).eval(Vec::Ones(1)) == 0.0);
}

TEST_CASE("T = 1: only the zero pool, and the bound is the stage value") {
  auto p = load_fixture("minimal1");
  Solver s(p, ErrorSchedule::exact());
  CHECK(s.pool(2).size() == 1);
  CHECK(s.pool(2).eval(Vec::Ones(1)) == 0.0);
  CHECK_THROWS(s.pool(3));
  auto fr = s.forward_pass(1, 3);
  CHECK(std::abs(fr.path_cost - fixture_optimum("minimal1")) <= 1e-9);
  double lb = s.backward_pass(1, fr.states);
  CHECK(s.pool(2).size() == 1);
  CHECK(std::abs(lb - fixture_optimum("minimal1")) <= 1e-9);
}

TEST_CASE("forward pass is deterministic and stays in the boxes") {
  auto p = load_fixture("fixture3");
  Solver s(p, ErrorSchedule::constant(0.05, 0.05));
  auto a = s.forward_pass(3, 42), b = s.forward_pass(3, 42);
  CHECK(a.path == b.path);
  for (std::size_t t = 0; t < a.states.size(); ++t) {
    CHECK(a.states[t] == b.states[t]);
    CHECK(p.stage(static_cast<int>(t) + 1).state_set.contains(a.states[t]));
  }
  CHECK(a.path_cost == b.path_cost);
  CHECK(a.path[0] == 0);
}

TEST_CASE("forward pass at seed 42 matches the golden record") {
  auto p = load_fixture("fixture3");
  Solver s(p, ErrorSchedule::exact());
  auto fr = s.forward_pass(1, 42);
  // Cross-check the path cost by re-solving each node.
  double cost = 0.0;
  Vec x = p.x0;
  for (int t = 1; t <= p.horizon; ++t) {
    const auto j = static_cast<std::size_t>(fr.path[static_cast<std::size_t>(t - 1)]);
    std::optional<PolyhedralFunction> vm;
    if (t < p.horizon) vm = s.pool(t + 1).as_function();
    auto c = solve_exact(stage_instance(p, t, j, x, vm));
    cost += p.stage(t).realizations[j].cost.value(c.y_hat, x);
    x = c.y_hat;
  }
  CHECK(std::abs(cost - fr.path_cost) <= 1e-12);

  std::ifstream in(std::string(ISDDP_GOLDEN_DIR) + "/forward_seed42.json");
  REQUIRE(in);
  auto g = nlohmann::json::parse(in);
  CHECK(g.at("path").get<std::vector<int>>() == fr.path);
  auto states = g.at("states").get<std::vector<double>>();
  REQUIRE(states.size() == fr.states.size());
  for (std::size_t t = 0; t < states.size(); ++t) CHECK(std::abs(states[t] - fr.states[t][0]) <= 1e-12);
  CHECK(std::abs(g.at("path_cost").get<double>() - fr.path_cost) <= 1e-12);
}

TEST_CASE("sampling frequencies follow the probabilities") {
  auto p = load_fixture("fixture3");
  Solver s(p, ErrorSchedule::exact());
  int first = 0;
  const int n = 400;
  for (int k = 1; k <= n; ++k) first += s.forward_pass(k, 5).path[1] == 0;
  // Stage 2 takes realization 0 with probability 0.4.
  CHECK(std::abs(first / static_cast<double>(n) - 0.4) <= 0.08);
}

TEST_CASE("toy problem: aggregated slope and intercept") {
  auto p = load_fixture("toy2");
  Solver s(p, ErrorSchedule::exact());
  auto fr = s.forward_pass(1, 1);
  const Vec xbar = fr.states[0];
  s.backward_pass(1, fr.states);
  REQUIRE(s.pool(2).size() == 2);
  const Cut& c = s.pool(2).cuts()[1];
  Vec beta = Vec::Zero(1);
  double theta = 0.0;
  for (std::size_t j = 0; j < 2; ++j) {
    auto cert = solve_exact(stage_instance(p, 2, j, xbar, s.pool(3).as_function()));
    beta += p.stage(2).realizations[j].probability * cert.lambda_hat;
    theta += p.stage(2).realizations[j].probability * (cert.primal_value - cert.lambda_hat.dot(xbar));
  }
  CHECK(c.slope == beta);
  CHECK(c.intercept == theta);
  // Exact cut is tight at the anchor and valid on a grid.
  CHECK(std::abs(c.value(xbar) - oracle::true_Q_at(p, 2, xbar)) <= 1e-9);
  for (const auto& x : oracle::box_grid(p.incoming_box(2), 101))
    CHECK(c.value(x) <= oracle::true_Q_at(p, 2, x) + 1e-9);
}

TEST_CASE("injected eps = 0.1 subtracts exactly 0.2 from the aggregate") {
  auto p = load_fixture("toy2");
  RunOptions o;
  o.seed = 8;
  Solver s(p, ErrorSchedule::constant(0.1, 0.0), o);
  auto fr = s.forward_pass(1, o.seed);
  const Vec xbar = fr.states[0];
  s.backward_pass(1, fr.states);
  const Cut& c = s.pool(2).cuts()[1];
  double theta = 0.0;
  for (std::size_t j = 0; j < 2; ++j) {
    auto cert = solve_inexact(stage_instance(p, 2, j, xbar, s.pool(3).as_function()), 0.1, 0.1,
                              InexactMode::kInjected, derive_seed(o.seed, 1, 2, j));
    theta += 0.5 * (cert.primal_value - cert.lambda_hat.dot(xbar));
  }
  CHECK(c.intercept == doctest::Approx(theta - 0.2).epsilon(1e-15));
  CHECK(c.looseness == doctest::Approx(0.2));
  for (const auto& x : oracle::box_grid(p.incoming_box(2), 101))
    CHECK(c.value(x) <= oracle::true_Q_at(p, 2, x) + 1e-9);

  RunOptions sharp = o;
  sharp.sharp_intercepts = true;
  Solver s2(p, ErrorSchedule::constant(0.1, 0.0), sharp);
  s2.backward_pass(1, fr.states);
  CHECK(s2.pool(2).cuts()[1].looseness == doctest::Approx(0.1));
}

TEST_CASE("parallel and serial backward passes are identical") {
  auto p = load_fixture("fixture3");
  for (auto sched : {ErrorSchedule::exact(), ErrorSchedule::constant(0.05, 0.05)}) {
    Solver a(p, sched), b(p, sched);
    for (int k = 1; k <= 15; ++k) {
      auto fr = a.forward_pass(k, 1);
      double la = a.backward_pass(k, fr.states);
      double lb = b.backward_pass_serial(k, fr.states);
      CHECK(la == lb);
    }
    for (int t = 2; t <= 3; ++t) {
      REQUIRE(a.pool(t).size() == b.pool(t).size());
      for (std::size_t i = 0; i < a.pool(t).size(); ++i) {
        CHECK(a.pool(t).cuts()[i].intercept == b.pool(t).cuts()[i].intercept);
        CHECK(a.pool(t).cuts()[i].slope == b.pool(t).cuts()[i].slope);
      }
    }
  }
}

TEST_CASE("exact runs: monotone valid bounds converging to the optimum") {
  auto p = load_fixture("fixture3");
  const double opt = fixture_optimum("fixture3");
  RunOptions o;
  o.seed = 3;
  add_audit(o, p);
  Solver s(p, ErrorSchedule::exact(), o);
  auto recs = s.run(60);
  double prev = -lp::kInf;
  for (const auto& r : recs) {
    CHECK(r.lower_bound >= prev - 1e-9);
    CHECK(r.lower_bound <= opt + 1e-9);
    CHECK(r.monotonicity_violations == 0);
    CHECK(r.validity_violations == 0);
    REQUIRE(r.upper_tree);
    CHECK(*r.upper_tree >= opt - 1e-9);
    prev = r.lower_bound;
  }
  CHECK(opt - recs.back().lower_bound <= 1e-6);
  CHECK(std::abs(*recs.back().upper_tree - opt) <= 1e-6);
}

TEST_CASE("bounded errors keep pools valid") {
  auto p = load_fixture("fixture3");
  const double opt = fixture_optimum("fixture3");
  for (auto mode : {InexactMode::kInjected, InexactMode::kTruncated}) {
    RunOptions o;
    o.mode = mode;
    add_audit(o, p);
    Solver s(p, ErrorSchedule::constant(0.05, 0.05), o);
    for (const auto& r : s.run(40)) {
      CHECK(r.lower_bound <= opt + 1e-9);
      CHECK(r.monotonicity_violations == 0);
      CHECK(r.validity_violations == 0);
    }
  }
}

TEST_CASE("full-tree simulation records node gaps") {
  auto p = load_fixture("fixture3");
  RunOptions o;
  o.full_tree_sim = true;
  o.true_value = [&p](int t, const Vec& x) { return oracle::true_Q_at(p, t, x); };
  Solver s(p, ErrorSchedule::exact(), o);
  auto recs = s.run(40);
  const auto& last = recs.back();
  REQUIRE(last.node_gap.size() == 4);
  for (int t = 2; t <= 3; ++t) {
    CHECK(last.node_gap[static_cast<std::size_t>(t)] >= -1e-9);
    CHECK(last.node_gap[static_cast<std::size_t>(t)] <= 1e-6);
  }
}

TEST_CASE("random problems: lower bounds stay below the extensive form") {
  Rng rng(44);
  for (int trial = 0; trial < 6; ++trial) {
    auto p = random_problem(rng, 3, 2, 1 + trial % 2);
    const double opt = oracle::extensive_form(p).value;
    Solver s(p, ErrorSchedule::constant(0.02, 0.02));
    for (const auto& r : s.run(15)) CHECK(r.lower_bound <= opt + 1e-9);
  }
}

TEST_CASE("determinism of whole runs") {
  auto p = load_fixture("fixture3");
  RunOptions o;
  o.seed = 17;
  Solver a(p, ErrorSchedule::vanishing(0.5), o), b(p, ErrorSchedule::vanishing(0.5), o);
  CHECK(same_records(a.run(20), b.run(20)));
}

TEST_CASE("plateau stop") {
  CHECK(on_plateau({1, 2, 3, 3, 3}, 3, 1e-6));
  CHECK(!on_plateau({1, 2, 3, 3, 3}, 4, 1e-6));
  CHECK(!on_plateau({1.0}, 2, 1e-6));
  auto p = load_fixture("fixture3");
  RunOptions o;
  o.stop_on_plateau = true;
  o.plateau_window = 5;
  Solver s(p, ErrorSchedule::exact(), o);
  auto recs = s.run(500);
  CHECK(recs.size() < 500);
}

TEST_CASE("run needs at least one iteration") {
  Solver s(load_fixture("fixture3"), ErrorSchedule::exact());
  CHECK_THROWS_AS(s.run(0), std::invalid_argument);
}

TEST_CASE("solver errors name the failing stage") {
  auto p = load_fixture("fixture3");
  // Stage 3, realization 1 demands y >= 5 outside the box.
  p.stages[2].realizations[1].ineq.push_back(
      PolyhedralFunction(1, 1, {AffinePiece{-Vec::Ones(1), Vec::Zero(1), 5.0}}));
  Solver s(p, ErrorSchedule::exact());
  try {
    s.backward_pass(1, {Vec::Ones(1), Vec::Ones(1), Vec::Ones(1)});
    FAIL("expected DriverError");
  } catch (const DriverError& e) {
    CHECK(e.stage() == 3);
    CHECK(e.realization() == 1);
    CHECK(std::string(e.what()).find("stage 3") != std::string::npos);
  }
}

TEST_CASE("derived seeds separate their arguments") {
  CHECK(derive_seed(1, 2, 3, 4) == derive_seed(1, 2, 3, 4));
  CHECK(derive_seed(1, 2, 3, 4) != derive_seed(1, 2, 4, 3));
  CHECK(derive_seed(1, 2, 3, 4) != derive_seed(2, 2, 3, 4));
}

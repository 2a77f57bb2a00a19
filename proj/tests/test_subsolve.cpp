#include <doctest.h>

#include "isddp/instance_io.hpp"
#include "isddp/oracle.hpp"
#include "isddp/subsolve.hpp"
#include "support/fixtures.hpp"
#include "support/generators.hpp"

#include <sstream>

using namespace isddp;
using namespace isddp::testsupport;

namespace {

bool same(const Certificate& a, const Certificate& b) {
  return a.y_hat == b.y_hat && a.lambda_hat == b.lambda_hat && a.primal_value == b.primal_value &&
         a.dual_value == b.dual_value && a.eps_primal == b.eps_primal && a.eps_dual == b.eps_dual;
}

SubproblemInstance constant_zero_instance() {
  SubproblemInstance s = ramp_instance(1.0);
  s.cost = PolyhedralFunction::constant(1, 1, 0.0);
  s.ineq.clear();
  return s;
}

// Both certificate errors against the independent per-point oracle.
void check_honest(const SubproblemInstance& inst, const Certificate& c) {
  auto q = oracle::single_value(inst, inst.xbar);
  REQUIRE(q.feasible);
  CHECK(c.primal_value - q.value <= c.eps_primal + 1e-9);
  CHECK(q.value - c.dual_value <= c.eps_dual + 1e-9);
  CHECK(c.dual_value <= c.primal_value + 1e-9);
  CHECK(infeasibility(inst, c.y_hat) <= 1e-9);
}

}  // namespace

TEST_CASE("ramp: exact solution and multiplier") {
  auto c = solve_exact(ramp_instance(1.0));
  CHECK(c.y_hat[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c.lambda_hat[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c.primal_value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c.primal_value - c.dual_value <= 1e-9);
}

TEST_CASE("|y - z| at 0.5: value 0 and zero multiplier") {
  auto c = solve_exact(absdiff_instance(0.5));
  CHECK(std::abs(c.primal_value) <= 1e-12);
  CHECK(std::abs(c.lambda_hat[0]) <= 1e-12);
}

TEST_CASE("constant objective: value 0 and zero multiplier") {
  auto inst = constant_zero_instance();
  auto c = solve_exact(inst);
  CHECK(c.primal_value == 0.0);
  CHECK(std::abs(c.lambda_hat[0]) <= 1e-12);
  CHECK(inst.Y.contains(c.y_hat));
}

TEST_CASE("zero targets degenerate to the exact solve") {
  auto inst = ramp_instance(1.0);
  for (auto mode : {InexactMode::kInjected, InexactMode::kTruncated})
    CHECK(same(solve_inexact(inst, 0.0, 0.0, mode, 5), solve_exact(inst)));
}

TEST_CASE("ramp: injected (0.1, 0.1)") {
  auto c = solve_inexact(ramp_instance(1.0), 0.1, 0.1, InexactMode::kInjected, 9);
  CHECK(c.y_hat[0] == doctest::Approx(1.1).epsilon(1e-9));
  CHECK(c.primal_value == doctest::Approx(1.1).epsilon(1e-9));
  CHECK(c.lambda_hat[0] == doctest::Approx(0.9).epsilon(1e-9));
  CHECK(c.dual_value == doctest::Approx(0.9).epsilon(1e-9));
  CHECK(c.eps_primal == doctest::Approx(0.1).epsilon(1e-6));
  CHECK(c.eps_dual == doctest::Approx(0.1).epsilon(1e-6));
}

TEST_CASE("truncated (0.5, 0.5) on the fixture's stage-2 subproblem") {
  auto p = load_fixture("fixture3");
  for (std::size_t j = 0; j < 2; ++j) {
    auto inst = stage_instance(p, 2, j, Vec::Constant(1, 1.3));
    auto c = solve_inexact(inst, 0.5, 0.5, InexactMode::kTruncated, 1);
    CHECK(c.primal_value - c.dual_value <= 1.0 + 1e-12);
    check_honest(inst, c);
  }
}

TEST_CASE("exact gap on random feasible instances") {
  Rng rng(101);
  for (int i = 0; i < 200; ++i) {
    auto inst = random_instance(rng);
    auto c = solve_exact(inst);
    CHECK(c.primal_value - c.dual_value <= 1e-9);
    CHECK(c.dual_value <= c.primal_value + 1e-9);
    auto q = oracle::single_value(inst, inst.xbar);
    CHECK(std::abs(q.value - c.primal_value) <= 1e-9);
  }
}

TEST_CASE("inexact certificates are honest and within targets") {
  Rng rng(202);
  for (int i = 0; i < 100; ++i) {
    auto inst = random_instance(rng);
    for (double e : {0.01, 0.1, 1.0})
      for (auto mode : {InexactMode::kInjected, InexactMode::kTruncated}) {
        auto c = solve_inexact(inst, e, e, mode, static_cast<std::uint64_t>(i));
        check_honest(inst, c);
        CHECK(c.primal_value - c.dual_value <= 2 * e + 1e-9);
        if (mode == InexactMode::kInjected) {
          CHECK(c.eps_primal <= e + 1e-9);
          CHECK(c.eps_dual <= e + 1e-9);
        }
      }
  }
}

TEST_CASE("injected errors reach the targets when room exists") {
  // On the ramp both errors are reachable for small targets.
  for (double e : {0.01, 0.1, 0.5}) {
    auto c = solve_inexact(ramp_instance(1.0), e, e, InexactMode::kInjected, 3);
    CHECK(std::abs(c.eps_primal - e) <= 1e-6);
    CHECK(std::abs(c.eps_dual - e) <= 1e-6);
  }
}

TEST_CASE("certify measures errors of a given pair") {
  auto c = certify(ramp_instance(1.0), Vec::Constant(1, 1.1), Vec::Constant(1, 0.9));
  CHECK(c.eps_primal == doctest::Approx(0.1));
  CHECK(c.eps_dual == doctest::Approx(0.1));
}

TEST_CASE("determinism of inexact solves") {
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    auto inst = random_instance(rng);
    for (auto mode : {InexactMode::kInjected, InexactMode::kTruncated})
      CHECK(same(solve_inexact(inst, 0.1, 0.1, mode, 77), solve_inexact(inst, 0.1, 0.1, mode, 77)));
  }
}

TEST_CASE("infeasible subproblem is reported") {
  auto inst = ramp_instance(1.0);
  inst.ineq[0] = PolyhedralFunction(1, 1, {AffinePiece{-Vec::Ones(1), Vec::Zero(1), 5.0}});  // y >= 5
  try {
    solve_exact(inst);
    FAIL("expected SubsolveError");
  } catch (const SubsolveError& e) {
    CHECK(e.kind() == SubsolveErrorKind::kInfeasible);
  }
}

TEST_CASE("negative targets are rejected") {
  CHECK_THROWS_AS(solve_inexact(ramp_instance(1.0), -0.1, 0.0, InexactMode::kInjected, 1), SubsolveError);
}

TEST_CASE("pivot trace is written when requested") {
  std::ostringstream os;
  SolveOptions opt;
  opt.trace = &os;
  solve_exact(ramp_instance(1.0), opt);
  CHECK(!os.str().empty());
}

// ---- saddle form ----

TEST_CASE("saddle |y - x| exact: weights balanced and theta 0") {
  auto c = solve_fenchel_saddle(absdiff_instance(0.5), {}, InexactMode::kInjected, 1);
  CHECK(c.w_hat[0] - c.w_hat[1] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::abs(c.theta) <= 1e-12);
  CHECK(c.eps <= 1e-12);
  CHECK(c.tau <= 1e-12);
}

TEST_CASE("saddle |y - x| with w = 0.2 and y = 0.1") {
  Vec w(2);
  w << 0.6, 0.4;
  auto c = certify_fenchel(absdiff_instance(0.5), w, Vec::Constant(1, 0.1), std::nullopt);
  CHECK(c.theta == doctest::Approx(-0.1));
  CHECK(c.eps == doctest::Approx(0.1));
  CHECK(c.tau <= 0.02 + 1e-12);
}

TEST_CASE("saddle |y| with y = z exact") {
  auto c = solve_fenchel_saddle(abs_equality_instance(1.0), {}, InexactMode::kInjected, 1);
  CHECK(c.w_hat[0] == doctest::Approx(1.0).epsilon(1e-12));
  REQUIRE(c.lambda_hat);
  CHECK((*c.lambda_hat)[0] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(c.theta == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("saddle without an interior point") {
  auto inst = abs_equality_instance(0.0);  // y = 0 sits on the boundary of [0, 2]
  try {
    solve_fenchel_saddle(inst, {}, InexactMode::kInjected, 1);
    FAIL("expected SubsolveError");
  } catch (const SubsolveError& e) {
    CHECK(e.kind() == SubsolveErrorKind::kNoInteriorPoint);
  }
}

TEST_CASE("saddle certificates on random instances") {
  Rng rng(303);
  for (int i = 0; i < 60; ++i) {
    bool cons = i % 2 == 1;
    auto inst = random_fenchel_instance(rng, cons);
    for (double e : {0.0, 0.05, 0.5})
      for (auto mode : {InexactMode::kInjected, InexactMode::kTruncated}) {
        auto c = solve_fenchel_saddle(inst, {e, e, e}, mode, static_cast<std::uint64_t>(i));
        CHECK(std::abs(c.w_hat.sum() - 1.0) <= 1e-12);
        CHECK(c.w_hat.minCoeff() >= 0.0);
        CHECK(inst.Y.contains(c.y_hat));
        if (cons) {
          REQUIRE(c.lambda_hat);
          CHECK((inst.A * c.y_hat + inst.B * inst.xbar - inst.b).cwiseAbs().maxCoeff() <= 1e-9);
        }
        // Independent re-certification agrees with the reported errors. A
        // truncated run bounds eps by its best primal iterate, so it may overstate.
        auto r = certify_fenchel(inst, c.w_hat, c.y_hat, c.lambda_hat);
        if (mode == InexactMode::kInjected)
          CHECK(std::abs(r.eps - c.eps) <= 1e-9);
        else
          CHECK(r.eps <= c.eps + 1e-9);
        CHECK(std::abs(r.tau - c.tau) <= 1e-9);
        CHECK(std::abs(r.delta - c.delta) <= 1e-9);
        if (mode == InexactMode::kInjected) {
          CHECK(c.eps <= e + 1e-9);
          CHECK(c.tau <= e + 1e-9);
          CHECK(c.delta <= e + 1e-9);
        }
      }
  }
}

// ---- parameter in the constraints ----

TEST_CASE("affine ramp exact multiplier") {
  auto c = solve_exact(affine_ramp_instance(1.0));
  CHECK(c.y_hat[0] == doctest::Approx(1.0));
  CHECK(c.mu_hat[0] == doctest::Approx(1.0));
  CHECK(c.eps_primal + c.eps_dual <= 1e-9);
}

TEST_CASE("affine instances agree with the general form") {
  Rng rng(404);
  for (int i = 0; i < 100; ++i) {
    auto a = random_affine_instance(rng);
    auto g = to_general(a, unit_domain(a.dim_x()));
    auto ca = solve_exact(a);
    auto q = oracle::single_value(g, a.xbar);
    REQUIRE(q.feasible);
    CHECK(std::abs(ca.primal_value - q.value) <= 1e-9);
    CHECK(std::abs(value_at(a, a.xbar) - q.value) <= 1e-9);
    CHECK(ca.mu_hat.size() == static_cast<Eigen::Index>(a.ineq.size()));
    if (ca.mu_hat.size() > 0) CHECK(ca.mu_hat.minCoeff() >= -1e-9);
    for (double e : {0.01, 0.1, 1.0}) {
      auto c = solve_inexact(a, e, e, static_cast<std::uint64_t>(i));
      CHECK(c.primal_value - q.value <= c.eps_primal + 1e-9);
      CHECK(q.value - c.dual_value <= c.eps_dual + 1e-9);
      CHECK(c.eps_primal <= e + 1e-9);
      CHECK(c.eps_dual <= e + 1e-9);
    }
  }
}

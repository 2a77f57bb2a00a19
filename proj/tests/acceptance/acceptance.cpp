// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include "cli.hpp"
#include "isddp/compare.hpp"
#include "isddp/cuts.hpp"
#include "isddp/driver.hpp"
#include "isddp/oracle.hpp"
#include "isddp/report.hpp"
#include "support/fixtures.hpp"
#include "support/generators.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace isddp;
using namespace isddp::testsupport;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Worst-case statistics of cut checks against a value-function grid.
struct CutStats {
  int cuts = 0;
  long points = 0;
  double worst_excess = -lp::kInf;      // max over grid of C - Q
  double worst_anchor_low = lp::kInf;   // min of Q(xbar) - C(xbar)
  double worst_anchor_high = -lp::kInf; // max of Q(xbar) - C(xbar) - budget
  double worst_loose = -lp::kInf;       // max of looseness - budget

  void add(const Cut& c, const SubproblemInstance& inst, const std::vector<Vec>& grid,
           const std::vector<oracle::PointValue>& q, double budget) {
    ++cuts;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (!q[i].feasible) continue;
      ++points;
      worst_excess = std::max(worst_excess, c.value(grid[i]) - q[i].value);
    }
    auto qa = oracle::single_value(inst, inst.xbar);
    double gap = qa.value - c.value(inst.xbar);
    worst_anchor_low = std::min(worst_anchor_low, gap);
    worst_anchor_high = std::max(worst_anchor_high, gap - budget);
    worst_loose = std::max(worst_loose, c.looseness - budget);
  }
};

enum class Prop { kAffine, kGeneral, kFenchel, kFenchelConstrained };

const char* prop_name(Prop p) {
  switch (p) {
    case Prop::kAffine: return "affine-constraints";
    case Prop::kGeneral: return "general";
    case Prop::kFenchel: return "saddle";
    case Prop::kFenchelConstrained: return "saddle-constrained";
  }
  return "?";
}

// A random instance of the class one construction needs, in general form for
// the oracle, plus the affine-parameter view when relevant.
struct Case {
  SubproblemInstance general;
  AffineParamInstance affine;
};

Case make_case(Prop p, Rng& rng) {
  Case c;
  switch (p) {
    case Prop::kAffine:
      c.affine = random_affine_instance(rng);
      c.general = to_general(c.affine, unit_domain(c.affine.dim_x()));
      break;
    case Prop::kGeneral: c.general = random_instance(rng); break;
    case Prop::kFenchel: c.general = random_fenchel_instance(rng, false); break;
    case Prop::kFenchelConstrained: c.general = random_fenchel_instance(rng, true); break;
  }
  return c;
}

// The cut of construction p with total error budget split evenly over its parts.
Cut make_cut(Prop p, const Case& c, double budget, std::uint64_t seed) {
  const SubproblemInstance& inst = c.general;
  switch (p) {
    case Prop::kAffine: {
      auto cert = budget == 0.0 ? solve_exact(c.affine) : solve_inexact(c.affine, budget / 2, budget / 2, seed);
      return cut_affine_constraints(cert, c.affine.B, c.affine.C, c.affine.xbar);
    }
    case Prop::kGeneral: {
      auto cert = solve_inexact(inst, budget / 2, budget / 2, InexactMode::kInjected, seed);
      return cut_general(cert, inst);
    }
    case Prop::kFenchel: {
      auto cert = solve_fenchel_saddle(inst, {budget / 2, budget / 2, 0.0}, InexactMode::kInjected, seed);
      return cut_fenchel_unconstrained(cert, fenchel_view(inst.cost), inst.xbar);
    }
    case Prop::kFenchelConstrained: {
      auto cert = solve_fenchel_saddle(inst, {budget / 3, budget / 3, budget / 3}, InexactMode::kInjected, seed);
      return cut_fenchel_constrained(cert, fenchel_view(inst.cost), inst.A, inst.B, inst.b, inst.xbar);
    }
  }
  throw std::logic_error("unknown construction");
}

constexpr int kGridPerDim = 100;
constexpr Prop kProps[] = {Prop::kAffine, Prop::kGeneral, Prop::kFenchel, Prop::kFenchelConstrained};

Outcome criterion1() {
  auto t0 = Clock::now();
  Outcome o;
  std::string parts;
  for (Prop p : kProps) {
    Rng rng(1000 + static_cast<int>(p));
    CutStats st;
    for (int i = 0; i < 200; ++i) {
      Case c = make_case(p, rng);
      auto grid = oracle::box_grid(c.general.x_domain, kGridPerDim);
      auto q = oracle::single_value_function_grid(c.general, grid);
      st.add(make_cut(p, c, 0.0, static_cast<std::uint64_t>(i)), c.general, grid, q, 0.0);
    }
    bool ok = st.worst_excess <= 1e-9 && st.worst_anchor_high <= 1e-7 && st.worst_anchor_low >= -1e-9;
    o.pass = o.pass && ok;
    parts += fmt::format(" {}: {} cuts, max C-Q {:.2e}, max anchor gap {:.2e};", prop_name(p), st.cuts,
                         st.worst_excess, st.worst_anchor_high);
  }
  double secs = seconds_since(t0);
  o.pass = o.pass && secs <= 120.0;
  o.detail = fmt::format("{} grid {} per coordinate, {:.1f} s (limit 120 s)", parts, kGridPerDim, secs);
  return o;
}

Outcome criterion2() {
  Outcome o;
  std::string parts;
  for (Prop p : kProps) {
    Rng rng(2000 + static_cast<int>(p));
    CutStats st;
    for (int i = 0; i < 100; ++i) {
      Case c = make_case(p, rng);
      auto grid = oracle::box_grid(c.general.x_domain, kGridPerDim);
      auto q = oracle::single_value_function_grid(c.general, grid);
      for (double b : {0.01, 0.1, 1.0}) st.add(make_cut(p, c, b, static_cast<std::uint64_t>(i)), c.general, grid, q, b);
    }
    bool ok = st.worst_excess <= 1e-9 && st.worst_anchor_high <= 1e-9 && st.worst_anchor_low >= -1e-9 &&
              st.worst_loose <= 1e-9;
    o.pass = o.pass && ok;
    parts += fmt::format(" {}: {} cuts, max C-Q {:.2e}, max gap-budget {:.2e}, min gap {:.2e};", prop_name(p),
                         st.cuts, st.worst_excess, st.worst_anchor_high, st.worst_anchor_low);
  }
  o.detail = parts;
  return o;
}

Outcome criterion3() {
  Outcome o;
  int trials = 0;
  double worst_low = lp::kInf, worst_high = -lp::kInf, worst_mug = -lp::kInf;
  for (double e : {0.0, 0.01, 0.1}) {
    Rng rng(3000);
    // 50 instances with 20 trials each, the first being the one-dimensional example.
    for (int i = 0; i < 50; ++i) {
      Vec xbar = Vec::Constant(1, 0.5);
      auto inst = i == 0 ? compare::example_instance() : random_smooth_instance(rng, &xbar);
      compare::CompareReport rep;
      try {
        rep = compare::compare_bounds(inst, xbar, e, 20, static_cast<std::uint64_t>(i));
      } catch (const compare::BoundViolation& v) {
        o.pass = false;
        o.detail += fmt::format(" violation: {};", v.what());
        continue;
      }
      for (const auto& r : rep.rows) {
        ++trials;
        worst_low = std::min(worst_low, r.c1_minus_c2 - r.lower_bound);
        worst_high = std::max(worst_high, r.c1_minus_c2 - r.upper_bound);
        worst_mug = std::max({worst_mug, r.mu_g - 1e-9, -2 * e - 1e-9 - r.mu_g});
      }
    }
  }
  o.pass = o.pass && trials == 3000 && worst_low >= -1e-9 && worst_high <= 1e-9 && worst_mug <= 0.0;
  o.detail = fmt::format(" {} trials over eps in {{0, 0.01, 0.1}}, min (gap - lower) {:.2e}, max (gap - upper) {:.2e}",
                         trials, worst_low, worst_high) +
             o.detail;
  return o;
}

// Audit points on 50-point grids with exact Q_t from subtree extensive forms.
RunOptions audited(const MultistageProblem& p, RunOptions o) {
  o.audit_points.assign(static_cast<std::size_t>(p.horizon + 1), {});
  o.audit_values.assign(static_cast<std::size_t>(p.horizon + 1), {});
  for (int t = 2; t <= p.horizon; ++t) {
    const auto tu = static_cast<std::size_t>(t);
    o.audit_points[tu] = oracle::box_grid(p.incoming_box(t), 50);
    for (const Vec& x : o.audit_points[tu]) o.audit_values[tu].push_back(oracle::true_Q_at(p, t, x));
  }
  return o;
}

struct AuditTally {
  int runs = 0;
  long checks = 0;
  int mono = 0;
  int valid = 0;

  void add(const std::vector<IterationRecord>& recs, const RunOptions& o) {
    ++runs;
    for (const auto& r : recs) {
      mono += r.monotonicity_violations;
      valid += r.validity_violations;
      for (const auto& pts : o.audit_points) checks += static_cast<long>(pts.size());
    }
  }
};

Outcome criterion4(const MultistageProblem& p, double opt, AuditTally& tally) {
  auto t0 = Clock::now();
  Outcome o;
  double worst_gap = -lp::kInf, worst_drop = 0.0;
  for (std::uint64_t seed : {1, 2, 3, 42, 99}) {
    RunOptions ro;
    ro.seed = seed;
    ro = audited(p, ro);
    Solver s(p, ErrorSchedule::exact(), ro);
    auto recs = s.run(100);
    tally.add(recs, ro);
    worst_gap = std::max(worst_gap, opt - recs.back().lower_bound);
    for (std::size_t k = 1; k < recs.size(); ++k)
      worst_drop = std::max(worst_drop, recs[k - 1].lower_bound - recs[k].lower_bound);
  }
  double secs = seconds_since(t0);
  o.pass = worst_gap <= 1e-6 && worst_drop <= 1e-9 && secs <= 30.0;
  o.detail = fmt::format(" 5 seeds, K=100: max (optimum - lower_bound) {:.2e}, max decrease {:.2e}, {:.1f} s (limit 30 s)",
                         worst_gap, worst_drop, secs);
  return o;
}

Outcome criterion5(const MultistageProblem& p, double opt, AuditTally& tally) {
  Outcome o;
  auto sched = ErrorSchedule::constant(0.05, 0.05);
  RunOptions ro;
  ro.seed = 5;
  ro.full_tree_sim = true;
  ro.true_value = [&p](int t, const Vec& x) { return oracle::true_Q_at(p, t, x); };
  ro = audited(p, ro);
  Solver s(p, sched, ro);
  auto recs = s.run(200);
  tally.add(recs, ro);
  auto b = report::bound_fields(sched, p.horizon);
  std::vector<double> lbs;
  for (const auto& r : recs) lbs.push_back(r.lower_bound);
  bool plateau = on_plateau(lbs, 20, 1e-6);
  double gap = opt - recs.back().lower_bound;
  o.pass = plateau && gap <= b.lower_gap + 1e-6;
  o.detail = fmt::format(" plateau {}, optimum - lower_bound {:.4g} (bound {:.4g})", plateau ? "yes" : "no", gap,
                         b.lower_gap);
  for (int t = 2; t <= p.horizon; ++t) {
    double g = recs.back().node_gap.at(static_cast<std::size_t>(t));
    double bound = b.node_gap[static_cast<std::size_t>(t)];
    o.pass = o.pass && g <= bound + 1e-6;
    o.detail += fmt::format(", node gap t={} {:.4g} (bound {:.4g})", t, g, bound);
  }
  return o;
}

Outcome criterion6(const MultistageProblem& p, double opt, AuditTally& tally) {
  Outcome o;
  RunOptions ro;
  ro.seed = 6;
  ro = audited(p, ro);
  Solver s(p, ErrorSchedule::vanishing(0.5), ro);
  auto recs = s.run(300);
  tally.add(recs, ro);
  double worst_above = -lp::kInf;
  for (const auto& r : recs) worst_above = std::max(worst_above, r.lower_bound - opt);
  double gap = opt - recs.back().lower_bound;
  o.pass = gap <= 1e-3 && worst_above <= 1e-9;
  // Every cut of iteration k gives up 2 eps_k = 1/k, so the last stage-2 cut
  // alone keeps the gap near 2 eps_K; reported for context only.
  o.detail = fmt::format(
      " K=300: optimum - lower_bound {:.3e} (limit 1e-3), max (lower_bound - optimum) {:.2e}, 2 eps_K {:.3e}", gap,
      worst_above, 2.0 * ErrorSchedule::vanishing(0.5).eps(300, 2));
  return o;
}

Outcome criterion7(const AuditTally& tally) {
  Outcome o;
  o.pass = tally.mono == 0 && tally.valid == 0 && tally.runs > 0;
  o.detail = fmt::format(" {} runs, {} point checks, monotonicity violations {}, validity violations {}", tally.runs,
                         tally.checks, tally.mono, tally.valid);
  return o;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome criterion8() {
  Outcome o;
  auto dir = std::filesystem::temp_directory_path();
  std::vector<std::string> configs[] = {
      {"--schedule", "exact", "--seed", "42"},
      {"--schedule", "constant", "--eps", "0.05", "--delta", "0.05", "--seed", "7"},
      {"--schedule", "vanishing", "--decay", "0.5", "--seed", "3", "--mode", "truncated"},
  };
  int same = 0, n = 0;
  for (const auto& cfg : configs) {
    std::string text[2];
    for (int rep = 0; rep < 2; ++rep) {
      auto path = (dir / fmt::format("isddp_accept_{}_{}.csv", n, rep)).string();
      std::vector<std::string> args{"run", "--instance", fixture_path("fixture3"), "--iters", "50",
                                    "--omit-timing", "--out-csv", path};
      args.insert(args.end(), cfg.begin(), cfg.end());
      std::ostringstream out, err;
      if (cli::run(args, out, err) != 0) o.detail += " run failed: " + err.str();
      text[rep] = slurp(path);
      std::remove(path.c_str());
    }
    same += !text[0].empty() && text[0] == text[1];
    ++n;
  }
  o.pass = same == n;
  o.detail = fmt::format(" {}/{} configurations byte-identical", same, n) + o.detail;
  return o;
}

}  // namespace

int main() {
  const auto p = load_fixture("fixture3");
  const double opt = fixture_optimum("fixture3");
  const double ef = oracle::extensive_form(p).value;
  if (std::abs(ef - opt) > 1e-9) {
    std::cout << fmt::format("fixture optimum mismatch: extensive form {:.17g}, pinned {:.17g}\n", ef, opt);
    return 1;
  }
  AuditTally tally;
  struct Row {
    int id;
    const char* name;
    Outcome out;
    double secs;
  };
  std::vector<Row> rows;
  auto timed = [&](int id, const char* name, auto f) {
    auto t0 = Clock::now();
    Outcome out = f();
    rows.push_back({id, name, out, seconds_since(t0)});
    const Row& r = rows.back();
    std::cout << fmt::format("criterion {} [{}] {}:{} ({:.1f} s)\n", r.id, r.out.pass ? "PASS" : "FAIL", r.name,
                             r.out.detail, r.secs)
              << std::flush;
  };
  timed(1, "exact-cut tightness", criterion1);
  timed(2, "inexact-cut budget", criterion2);
  timed(3, "gradient vs multiplier cut comparison", criterion3);
  timed(4, "exact mode convergence", [&] { return criterion4(p, opt, tally); });
  timed(5, "bounded errors", [&] { return criterion5(p, opt, tally); });
  timed(6, "vanishing errors", [&] { return criterion6(p, opt, tally); });
  timed(7, "pool invariants", [&] { return criterion7(tally); });
  timed(8, "determinism", criterion8);
  int failed = 0;
  for (const auto& r : rows) failed += !r.out.pass;
  std::cout << fmt::format("{} of {} criteria passed\n", rows.size() - static_cast<std::size_t>(failed), rows.size());
  return failed == 0 ? 0 : 1;
}

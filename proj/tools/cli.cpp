#include "cli.hpp"

#include "isddp/compare.hpp"
#include "isddp/driver.hpp"
#include "isddp/instance_io.hpp"
#include "isddp/oracle.hpp"
#include "isddp/report.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <fstream>
#include <optional>

namespace isddp::cli {

namespace {

struct RunConfig {
  std::string instance;
  int iters = 0;
  std::string schedule = "exact";
  double eps = 0.0;
  double delta = 0.0;
  double decay = 0.0;
  std::uint64_t seed = 1;
  std::string mode = "injected";
  bool full_tree_sim = false;
  bool sharp_intercepts = false;
  bool omit_timing = false;
  bool stop_on_plateau = false;
  bool oracle = false;
  int grid_validate = 0;
  int plateau_window = 20;
  double plateau_tol = 1e-6;
  std::optional<double> optimum;
  std::string out_csv;
  std::string out_json;
  std::string dump_tableau;
};

// Raised for bad input discovered after parsing (unreadable files, bad instances).
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void add_schedule_flags(CLI::App* app, RunConfig& c) {
  app->add_option("--instance", c.instance, "Instance file (JSON)")->required()->check(CLI::ExistingFile);
  app->add_option("--schedule", c.schedule, "Error schedule")
      ->check(CLI::IsMember({"exact", "constant", "vanishing"}));
  app->add_option("--eps", c.eps, "Backward-pass error bound (constant schedule)")->check(CLI::NonNegativeNumber);
  app->add_option("--delta", c.delta, "Forward-pass error bound (constant schedule)")->check(CLI::NonNegativeNumber);
  app->add_option("--decay", c.decay, "Vanishing schedule: eps_k = delta_k = decay / k")
      ->check(CLI::NonNegativeNumber);
  app->add_option("--seed", c.seed, "Sampling and error-injection seed");
  app->add_option("--mode", c.mode, "How inexact solutions are produced")
      ->check(CLI::IsMember({"truncated", "injected"}));
  app->add_flag("--sharp-intercepts", c.sharp_intercepts, "Cut intercepts from the dual value");
}

ErrorSchedule make_schedule(const RunConfig& c) {
  if (c.schedule == "constant") return ErrorSchedule::constant(c.eps, c.delta);
  if (c.schedule == "vanishing") return ErrorSchedule::vanishing(c.decay);
  return ErrorSchedule::exact();
}

MultistageProblem load(const std::string& path) {
  try {
    return load_instance(path);
  } catch (const ModelError& e) {
    throw InputError(path + ": " + e.what());
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw InputError("cannot open " + path + " for writing");
  return f;
}

RunOptions base_options(const RunConfig& c) {
  RunOptions o;
  o.mode = c.mode == "truncated" ? InexactMode::kTruncated : InexactMode::kInjected;
  o.seed = c.seed;
  o.sharp_intercepts = c.sharp_intercepts;
  o.stop_on_plateau = c.stop_on_plateau;
  o.plateau_window = c.plateau_window;
  o.plateau_tol = c.plateau_tol;
  return o;
}

// Audit points on a per-stage grid with exact values from subtree extensive forms.
void add_audit(RunOptions& o, const MultistageProblem& p, int per_dim) {
  o.audit_points.assign(static_cast<std::size_t>(p.horizon + 1), {});
  o.audit_values.assign(static_cast<std::size_t>(p.horizon + 1), {});
  for (int t = 2; t <= p.horizon; ++t) {
    const auto tu = static_cast<std::size_t>(t);
    o.audit_points[tu] = oracle::box_grid(p.incoming_box(t), per_dim);
    for (const Vec& x : o.audit_points[tu]) o.audit_values[tu].push_back(oracle::true_Q_at(p, t, x));
  }
}

int audit_violations(const std::vector<IterationRecord>& recs) {
  int n = 0;
  for (const auto& r : recs) n += r.monotonicity_violations + r.validity_violations;
  return n;
}

int cmd_run(const RunConfig& c, std::ostream& out, std::ostream& err) {
  MultistageProblem p = load(c.instance);
  ErrorSchedule sched = make_schedule(c);
  RunOptions o = base_options(c);
  o.full_tree_sim = c.full_tree_sim;
  if (c.full_tree_sim) o.true_value = [&p](int t, const Vec& x) { return oracle::true_Q_at(p, t, x); };
  if (c.grid_validate > 0) add_audit(o, p, c.grid_validate);

  Solver solver(p, sched, o);
  spdlog::info("running {} iterations on {} (T = {})", c.iters, c.instance, p.horizon);
  std::vector<IterationRecord> recs = solver.run(c.iters);
  for (const auto& r : recs)
    spdlog::debug("k={} lower={:.12g} upper_path={:.12g}", r.k, r.lower_bound, r.upper_path);

  std::optional<double> optimum = c.optimum;
  if (c.oracle) optimum = oracle::extensive_form(p).value;

  report::CsvOptions csv{c.omit_timing};
  if (c.out_csv.empty()) {
    report::write_csv(out, recs, csv);
  } else {
    auto f = open_out(c.out_csv);
    report::write_csv(f, recs, csv);
  }
  if (!c.out_json.empty()) {
    report::Summary s{p.horizon, &sched, &recs, optimum, c.plateau_window, c.plateau_tol};
    open_out(c.out_json) << report::json_summary(s);
  }
  if (!c.dump_tableau.empty()) {
    auto f = open_out(c.dump_tableau);
    std::optional<PolyhedralFunction> vm;
    if (p.horizon >= 2) vm = solver.pool(2).as_function();
    SolveOptions so;
    so.trace = &f;
    solve_exact(stage_instance(p, 1, 0, p.x0, vm), so);
  }
  if (optimum) {
    double gap = *optimum - recs.back().lower_bound;
    spdlog::info("optimum {:.12g}, final gap {:.3g}", *optimum, gap);
  }
  if (int v = audit_violations(recs); v > 0) {
    err << "pool audit found " << v << " violations\n";
    return kExitFailed;
  }
  return kExitOk;
}

struct OracleConfig {
  std::string extensive_form;
  std::string instance;
  std::vector<int> grid;  // stage t and resolution R
};

int cmd_oracle(const OracleConfig& c, std::ostream& out, std::ostream& err) {
  if (!c.extensive_form.empty()) {
    auto p = load(c.extensive_form);
    out << fmt::format("{:.17g}\n", oracle::extensive_form(p).value);
    return kExitOk;
  }
  auto p = load(c.instance);
  const int t = c.grid[0], R = c.grid[1];
  if (t < 1 || t > p.horizon + 1 || R < 1) {
    err << "--grid needs 1 <= t <= T + 1 and R >= 1\n";
    return kExitUsage;
  }
  auto g = oracle::true_Q_grid(p, t, R);
  const int n = g.points.empty() ? 0 : static_cast<int>(g.points[0].size());
  for (int i = 0; i < n; ++i) out << 'x' << i << ',';
  out << "value\n";
  for (std::size_t i = 0; i < g.points.size(); ++i) {
    for (int d = 0; d < n; ++d) out << fmt::format("{:.17g},", g.points[i][d]);
    out << fmt::format("{:.17g}\n", g.values[i]);
  }
  err << fmt::format("value_bound {:.6g} interp_bound {:.6g}\n", g.value_bound, g.interp_bound);
  return kExitOk;
}

struct CompareConfig {
  std::vector<double> eps{0.0, 0.01, 0.1};
  int trials = 100;
  std::uint64_t seed = 1;
  double xbar = 0.5;
  std::string out_csv;
};

int cmd_compare(const CompareConfig& c, std::ostream& out, std::ostream& err) {
  auto inst = compare::example_instance();
  std::ofstream file;
  if (!c.out_csv.empty()) file = open_out(c.out_csv);
  std::ostream& os = c.out_csv.empty() ? out : file;
  os << "trial,eps,c1_minus_c2,lower_bound,upper_bound\n";
  for (double e : c.eps) {
    try {
      auto rep = compare::compare_bounds(inst, Vec::Constant(1, c.xbar), e, c.trials, c.seed);
      for (const auto& r : rep.rows)
        os << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g}\n", r.trial, r.eps, r.c1_minus_c2, r.lower_bound,
                          r.upper_bound);
    } catch (const compare::BoundViolation& v) {
      err << "bound violation: " << v.what() << '\n';
      return kExitFailed;
    }
  }
  return kExitOk;
}

int cmd_validate(const RunConfig& c, int resolution, std::ostream& out, std::ostream& err) {
  MultistageProblem p = load(c.instance);
  ErrorSchedule sched = make_schedule(c);
  RunOptions o = base_options(c);
  add_audit(o, p, resolution);
  Solver solver(p, sched, o);
  auto recs = solver.run(c.iters);
  int mono = 0, valid = 0;
  for (const auto& r : recs) {
    mono += r.monotonicity_violations;
    valid += r.validity_violations;
  }
  out << fmt::format("iterations {}\nmonotonicity_violations {}\nvalidity_violations {}\n", recs.size(), mono,
                     valid);
  for (int t = 2; t <= p.horizon; ++t) {
    const auto tu = static_cast<std::size_t>(t);
    double worst = -lp::kInf;
    auto vals = solver.pool(t).eval_all(o.audit_points[tu]);
    for (std::size_t i = 0; i < vals.size(); ++i) worst = std::max(worst, vals[i] - o.audit_values[tu][i]);
    out << fmt::format("stage {}: points {}, max pool - Q {:.3g}\n", t, vals.size(), worst);
  }
  if (mono + valid > 0) {
    err << "pool audit failed\n";
    return kExitFailed;
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Inexact stochastic dual dynamic programming", "isddp"};
  app.require_subcommand(1);

  RunConfig rc;
  auto* run_cmd = app.add_subcommand("run", "Run the solver and write per-iteration reports");
  add_schedule_flags(run_cmd, rc);
  run_cmd->add_option("--iters", rc.iters, "Iteration count K")->required()->check(CLI::PositiveNumber);
  run_cmd->add_flag("--full-tree-sim", rc.full_tree_sim, "Per-node gaps against the oracle");
  run_cmd->add_option("--grid-validate", rc.grid_validate, "Audit pools on R points per coordinate")
      ->check(CLI::PositiveNumber);
  run_cmd->add_option("--out-csv", rc.out_csv, "Per-iteration CSV (default: standard output)");
  run_cmd->add_option("--out-json", rc.out_json, "JSON summary");
  run_cmd->add_flag("--omit-timing", rc.omit_timing, "Write 0 for wall_ms");
  run_cmd->add_flag("--stop-on-plateau", rc.stop_on_plateau, "Stop once the lower bound plateaus");
  run_cmd->add_option("--plateau-window", rc.plateau_window)->check(CLI::PositiveNumber);
  run_cmd->add_option("--plateau-tol", rc.plateau_tol)->check(CLI::NonNegativeNumber);
  run_cmd->add_flag("--oracle", rc.oracle, "Compute the extensive-form optimum for the summary");
  run_cmd->add_option("--optimum", rc.optimum, "Known optimum for the summary gap check");
  run_cmd->add_option("--dump-tableau", rc.dump_tableau, "Pivot log of the final stage-1 LP");

  OracleConfig oc;
  auto* oracle_cmd = app.add_subcommand("oracle", "Ground-truth values");
  auto* ef = oracle_cmd->add_option("--extensive-form", oc.extensive_form, "Instance for the extensive form")
                 ->check(CLI::ExistingFile);
  auto* grid = oracle_cmd->add_option("--grid", oc.grid, "Stage t and resolution R")->expected(2);
  auto* inst = oracle_cmd->add_option("--instance", oc.instance, "Instance for --grid")->check(CLI::ExistingFile);
  ef->excludes(grid);
  grid->needs(inst);
  oracle_cmd->require_option(1, 2);

  CompareConfig cc;
  auto* cmp_cmd = app.add_subcommand("compare", "Gradient cut against the coupling-multiplier cut");
  cmp_cmd->add_option("--eps", cc.eps, "Error levels")->check(CLI::NonNegativeNumber);
  cmp_cmd->add_option("--trials", cc.trials)->check(CLI::PositiveNumber);
  cmp_cmd->add_option("--seed", cc.seed);
  cmp_cmd->add_option("--xbar", cc.xbar);
  cmp_cmd->add_option("--out-csv", cc.out_csv);

  RunConfig vc;
  vc.iters = 20;
  int resolution = 50;
  auto* val_cmd = app.add_subcommand("validate", "Audit pools against the grid oracle");
  add_schedule_flags(val_cmd, vc);
  val_cmd->add_option("--iters", vc.iters)->check(CLI::PositiveNumber);
  val_cmd->add_option("--resolution", resolution, "Points per coordinate")->check(CLI::PositiveNumber);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kExitOk;
    }
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }
  if (*oracle_cmd && oc.extensive_form.empty() && oc.grid.empty()) {
    err << "error: oracle needs --extensive-form or --grid\n";
    return kExitUsage;
  }

  try {
    if (*run_cmd) return cmd_run(rc, out, err);
    if (*oracle_cmd) return cmd_oracle(oc, out, err);
    if (*cmp_cmd) return cmd_compare(cc, out, err);
    return cmd_validate(vc, resolution, out, err);
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "solver error: " << e.what() << '\n';
    return kExitSolver;
  }
}

}  // namespace isddp::cli

#include "isddp/report.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <stdexcept>

namespace isddp::report {

using json = nlohmann::ordered_json;

namespace {

std::string num(double v) { return fmt::format("{:.17g}", v); }

const char* kind_name(ErrorSchedule::Kind k) {
  switch (k) {
    case ErrorSchedule::Kind::kConstant: return "constant";
    case ErrorSchedule::Kind::kVanishing: return "vanishing";
    case ErrorSchedule::Kind::kCustom: return "custom";
  }
  return "?";
}

}  // namespace

void write_csv(std::ostream& os, const std::vector<IterationRecord>& records, const CsvOptions& opt) {
  os << kCsvHeader << '\n';
  for (const auto& r : records) {
    os << r.k << ',' << num(r.lower_bound) << ',' << num(r.upper_path) << ','
       << (r.upper_tree ? num(*r.upper_tree) : std::string()) << ',' << num(r.eps) << ',' << num(r.delta)
       << ',' << (opt.omit_timing ? std::string("0") : fmt::format("{:.3f}", r.wall_ms)) << '\n';
  }
  if (!os) throw std::runtime_error("failed to write CSV");
}

BoundFields bound_fields(const ErrorSchedule& schedule, int horizon) {
  const double e = schedule.sup_eps(), d = schedule.sup_delta();
  const double T = horizon;
  BoundFields b;
  b.lower_gap = d * T + 2.0 * e * (T - 1.0);
  b.three_eps_T = 3.0 * std::max(e, d) * T;
  b.node_gap.assign(static_cast<std::size_t>(std::max(horizon + 1, 2)), 0.0);
  for (int t = 2; t <= horizon; ++t)
    b.node_gap[static_cast<std::size_t>(t)] = (d + 2.0 * e) * (horizon - t + 1);
  return b;
}

std::string json_summary(const Summary& s) {
  if (!s.records || s.records->empty() || !s.schedule)
    throw std::invalid_argument("summary needs records and a schedule");
  const auto& recs = *s.records;
  const IterationRecord& last = recs.back();
  BoundFields b = bound_fields(*s.schedule, s.horizon);

  json doc;
  doc["horizon"] = s.horizon;
  doc["iterations"] = recs.size();
  doc["schedule"] = {{"kind", kind_name(s.schedule->kind)},
                     {"eps_bar", s.schedule->sup_eps()},
                     {"delta_bar", s.schedule->sup_delta()},
                     {"decay", s.schedule->decay}};
  doc["final_lower_bound"] = last.lower_bound;
  doc["final_upper_path"] = last.upper_path;
  doc["final_upper_tree"] = last.upper_tree ? json(*last.upper_tree) : json(nullptr);
  json node = json::object();
  for (int t = 2; t <= s.horizon; ++t) node[std::to_string(t)] = b.node_gap[static_cast<std::size_t>(t)];
  doc["bounds"] = {{"lower_gap", b.lower_gap}, {"three_eps_T", b.three_eps_T}, {"node_gap", node}};

  std::vector<double> lbs;
  for (const auto& r : recs) lbs.push_back(r.lower_bound);
  doc["plateau"] = on_plateau(lbs, s.plateau_window, s.plateau_tol);
  if (!last.node_gap.empty()) {
    json gaps = json::object();
    for (int t = 2; t <= s.horizon; ++t) gaps[std::to_string(t)] = last.node_gap[static_cast<std::size_t>(t)];
    doc["final_node_gap"] = gaps;
  }
  int mono = 0, valid = 0;
  for (const auto& r : recs) {
    mono += r.monotonicity_violations;
    valid += r.validity_violations;
  }
  doc["audit"] = {{"monotonicity_violations", mono}, {"validity_violations", valid}};
  if (s.optimum) {
    double gap = *s.optimum - last.lower_bound;
    doc["optimum"] = *s.optimum;
    doc["gap"] = gap;
    doc["gap_within_bound"] = gap <= b.lower_gap + 1e-6;
  }
  return doc.dump(2) + "\n";
}

}  // namespace isddp::report

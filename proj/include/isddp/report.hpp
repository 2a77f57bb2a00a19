#pragma once

#include "isddp/driver.hpp"

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace isddp::report {

inline constexpr const char* kCsvHeader = "k,lower_bound,upper_path,upper_tree,eps_k,delta_k,wall_ms";

struct CsvOptions {
  bool omit_timing = false;  // write 0 for wall_ms so outputs are reproducible
};

void write_csv(std::ostream& os, const std::vector<IterationRecord>& records, const CsvOptions& opt = {});

// Bound formulas evaluated at the schedule suprema.
struct BoundFields {
  double lower_gap = 0.0;             // delta T + 2 eps (T - 1)
  double three_eps_T = 0.0;           // 3 eps T with eps = max(eps, delta)
  std::vector<double> node_gap;       // index t = 2..T: (delta + 2 eps)(T - t + 1)
};

BoundFields bound_fields(const ErrorSchedule& schedule, int horizon);

struct Summary {
  int horizon = 0;
  const ErrorSchedule* schedule = nullptr;
  const std::vector<IterationRecord>* records = nullptr;
  std::optional<double> optimum;  // from the oracle, when supplied
  int plateau_window = 20;
  double plateau_tol = 1e-6;
};

// JSON document with final bounds, the bound formulas and, when an optimum is
// supplied, the gap check optimum - lower_bound <= lower_gap + 1e-6.
std::string json_summary(const Summary& s);

}  // namespace isddp::report

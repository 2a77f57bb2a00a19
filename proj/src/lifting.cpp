#include "lifting.hpp"

#include <cmath>

namespace isddp::detail {

double box_min(const Vec& a, const Box& box) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    s += std::min(a[i] * box.lower[i], a[i] * box.upper[i]);
  return s;
}

double epigraph_floor(const PolyhedralFunction& f, const Box& Y, const Box& Z) {
  double best = -lp::kInf;
  for (const auto& p : f.pieces()) {
    double v = p.offset + box_min(p.slope_y, Y) + (f.dim_x() > 0 ? box_min(p.slope_x, Z) : 0.0);
    best = std::max(best, v);
  }
  return best - 1.0 - std::abs(best);
}

Lifted lift(const SubproblemInstance& inst, const LiftSpec& spec) {
  Lifted L;
  L.ny = inst.dim_y();
  L.nx = inst.dim_x();
  lp::Problem& P = L.lp;
  L.y0 = 0;
  for (int i = 0; i < L.ny; ++i)
    P.add_var(spec.y_objective.size() ? spec.y_objective[i] : 0.0, inst.Y.lower[i], inst.Y.upper[i]);
  L.z0 = L.ny;
  for (int i = 0; i < L.nx; ++i)
    P.add_var(spec.z_objective.size() ? spec.z_objective[i] : 0.0, spec.z_box.lower[i],
              spec.z_box.upper[i]);
  P.offset = spec.offset;

  auto piece_row = [&](const AffinePiece& a, int epi, bool has_x) {
    std::vector<std::pair<int, double>> row;
    for (int i = 0; i < L.ny; ++i)
      if (a.slope_y[i] != 0.0) row.emplace_back(L.y0 + i, a.slope_y[i]);
    if (has_x)
      for (int i = 0; i < L.nx; ++i)
        if (a.slope_x[i] != 0.0) row.emplace_back(L.z0 + i, a.slope_x[i]);
    if (epi >= 0) row.emplace_back(epi, -1.0);
    return P.add_row(row, lp::Sense::kLe, -a.offset);
  };

  if (spec.cost_epigraph) {
    L.s = P.add_var(1.0, epigraph_floor(inst.cost, inst.Y, spec.z_box), lp::kInf);
    for (const auto& a : inst.cost.pieces()) L.cost_rows.push_back(piece_row(a, L.s, true));
  }
  if (spec.value_epigraph && inst.value_model) {
    L.r = P.add_var(1.0, epigraph_floor(*inst.value_model, inst.Y, spec.z_box), lp::kInf);
    for (const auto& a : inst.value_model->pieces()) L.value_rows.push_back(piece_row(a, L.r, false));
  }
  for (std::size_t k = 0; k < inst.ineq.size(); ++k) {
    for (const auto& a : inst.ineq[k].pieces()) {
      L.ineq_rows.push_back(piece_row(a, -1, true));
      L.ineq_owner.push_back(static_cast<int>(k));
    }
  }
  for (Eigen::Index i = 0; i < inst.A.rows(); ++i) {
    std::vector<std::pair<int, double>> row;
    for (int j = 0; j < L.ny; ++j)
      if (inst.A(i, j) != 0.0) row.emplace_back(L.y0 + j, inst.A(i, j));
    for (int j = 0; j < L.nx; ++j)
      if (inst.B(i, j) != 0.0) row.emplace_back(L.z0 + j, inst.B(i, j));
    L.eq_rows.push_back(P.add_row(row, lp::Sense::kEq, inst.b[i]));
  }
  return L;
}

lp::Solution solve_checked(const lp::Problem& p, const lp::Options& opt, const std::string& what) {
  lp::Solution s = lp::solve(p, opt);
  switch (s.status) {
    case lp::Status::kOptimal:
    case lp::Status::kStopped:
      return s;
    case lp::Status::kInfeasible:
      throw SubsolveError(SubsolveErrorKind::kInfeasible, what + ": infeasible");
    case lp::Status::kUnbounded:
      throw SubsolveError(SubsolveErrorKind::kUnbounded, what + ": unbounded");
    case lp::Status::kMaxPivots:
      throw SubsolveError(SubsolveErrorKind::kMaxPivots, what + ": pivot limit reached");
  }
  return s;
}

double safe_root(const std::function<double(double)>& g, double g0, double g1, double tol) {
  double a = 0.0, b = 1.0, ga = g0, gb = g1, ga_true = g0;
  int side = 0;
  for (int it = 0; it < 200; ++it) {
    if (-ga_true <= tol || b - a < 1e-15) break;
    double c = (a * gb - b * ga) / (gb - ga);
    if (!(c > a && c < b) || it % 4 == 3) c = 0.5 * (a + b);
    double gc = g(c);
    if (gc <= 0.0) {
      a = c;
      ga = ga_true = gc;
      if (side == -1) gb *= 0.5;
      side = -1;
    } else {
      b = c;
      gb = gc;
      if (side == 1) ga *= 0.5;
      side = 1;
    }
  }
  return a;
}

}  // namespace isddp::detail

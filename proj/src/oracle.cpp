#include "isddp/oracle.hpp"

#include "isddp/lp.hpp"

#include <cmath>
#include <exception>

namespace isddp::oracle {

namespace {

using Row = std::vector<std::pair<int, double>>;

// Lowest value of the pieces over the boxes, then pushed down so it never binds.
double floor_of(const PolyhedralFunction& f, const Box& Y, const Box& X) {
  double best = -lp::kInf;
  for (const auto& a : f.pieces()) {
    double v = a.offset;
    for (int i = 0; i < f.dim_y(); ++i) v += std::min(a.slope_y[i] * Y.lower[i], a.slope_y[i] * Y.upper[i]);
    for (int i = 0; i < f.dim_x(); ++i) v += std::min(a.slope_x[i] * X.lower[i], a.slope_x[i] * X.upper[i]);
    best = std::max(best, v);
  }
  return best - 1.0 - std::abs(best);
}

// Appends <c, v> over variables first..first+c.size()-1 to row, or moves it to
// the right-hand side when first < 0 (a known point).
void add_terms(Row& row, double& rhs, const Vec& c, int first, const Vec* known) {
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    if (c[i] == 0.0) continue;
    if (first >= 0)
      row.emplace_back(first + static_cast<int>(i), c[i]);
    else
      rhs -= c[i] * (*known)[i];
  }
}

// Rows of one realization linking decision variables at y0 to the incoming
// state, which is either variables at x0 or the known vector xknown.
void add_realization_rows(lp::Problem& P, const Realization& r, int y0, int x0, const Vec* xknown,
                          int epi) {
  for (const auto& a : r.cost.pieces()) {
    Row row;
    double rhs = -a.offset;
    add_terms(row, rhs, a.slope_y, y0, nullptr);
    add_terms(row, rhs, a.slope_x, x0, xknown);
    row.emplace_back(epi, -1.0);
    P.add_row(row, lp::Sense::kLe, rhs);
  }
  for (const auto& g : r.ineq)
    for (const auto& a : g.pieces()) {
      Row row;
      double rhs = -a.offset;
      add_terms(row, rhs, a.slope_y, y0, nullptr);
      add_terms(row, rhs, a.slope_x, x0, xknown);
      P.add_row(row, lp::Sense::kLe, rhs);
    }
  for (Eigen::Index i = 0; i < r.A.rows(); ++i) {
    Row row;
    double rhs = r.b[i];
    add_terms(row, rhs, r.A.row(i).transpose(), y0, nullptr);
    add_terms(row, rhs, r.B.row(i).transpose(), x0, xknown);
    P.add_row(row, lp::Sense::kEq, rhs);
  }
}

double count_nodes(const MultistageProblem& p, int t0) {
  double total = 1.0, layer = 1.0;
  for (int t = t0; t <= p.horizon; ++t) {
    layer *= static_cast<double>(p.stage(t).realizations.size());
    total += layer;
  }
  return total;
}

// Tree of stages t0..T under a root at stage t0 - 1.
std::vector<TreeNode> subtree(const MultistageProblem& p, int t0, double max_nodes) {
  if (count_nodes(p, t0) > max_nodes)
    throw OracleError(OracleErrorKind::kTooLarge, "scenario tree exceeds the node limit");
  std::vector<TreeNode> nodes(1);
  nodes[0].stage = t0 - 1;
  std::size_t begin = 0, end = 1;
  for (int t = t0; t <= p.horizon; ++t) {
    const auto& reals = p.stage(t).realizations;
    for (std::size_t n = begin; n < end; ++n)
      for (std::size_t j = 0; j < reals.size(); ++j) {
        TreeNode c;
        c.id = static_cast<int>(nodes.size());
        c.stage = t;
        c.parent = static_cast<int>(n);
        c.probability = nodes[n].probability * reals[j].probability;
        c.realization = static_cast<int>(j);
        nodes[n].children.push_back(c.id);
        nodes.push_back(c);
      }
    begin = end;
    end = nodes.size();
  }
  return nodes;
}

ExtensiveFormResult solve_subtree(const MultistageProblem& p, int t0, const Vec& xroot,
                                  double max_nodes) {
  ExtensiveFormResult res;
  res.tree = subtree(p, t0, max_nodes);
  const auto& nodes = res.tree;
  lp::Problem P;
  std::vector<int> first(nodes.size(), -1), epi(nodes.size(), -1);
  for (std::size_t n = 1; n < nodes.size(); ++n) {
    const StageModel& st = p.stage(nodes[n].stage);
    first[n] = P.num_vars();
    for (int i = 0; i < st.state_dim; ++i) P.add_var(0.0, st.state_set.lower[i], st.state_set.upper[i]);
  }
  for (std::size_t n = 1; n < nodes.size(); ++n) {
    const int t = nodes[n].stage;
    const Realization& r = p.stage(t).realizations[static_cast<std::size_t>(nodes[n].realization)];
    Box xin = t == t0 ? Box::point(xroot) : p.stage(t - 1).state_set;
    epi[n] = P.add_var(nodes[n].probability, floor_of(r.cost, p.stage(t).state_set, xin), lp::kInf);
    const int par = nodes[n].parent;
    add_realization_rows(P, r, first[n], par == 0 ? -1 : first[static_cast<std::size_t>(par)],
                         par == 0 ? &xroot : nullptr, epi[n]);
  }
  lp::Solution s = lp::solve(P);
  if (s.status == lp::Status::kInfeasible)
    throw OracleError(OracleErrorKind::kInfeasible, "extensive form is infeasible");
  if (s.status != lp::Status::kOptimal)
    throw OracleError(OracleErrorKind::kSolver, std::string("extensive form: ") + lp::to_string(s.status));
  res.value = s.objective;
  res.decisions.resize(nodes.size());
  res.decisions[0] = xroot;
  for (std::size_t n = 1; n < nodes.size(); ++n)
    res.decisions[n] = s.x.segment(first[n], p.stage(nodes[n].stage).state_dim);
  return res;
}

// The next-stage function as the lower convex hull of grid values.
struct Hull {
  const std::vector<Vec>* points = nullptr;
  const std::vector<double>* values = nullptr;
};

struct StageValue {
  double value = 0.0;
  Vec grad;
};

// sum_j p_j min { f_j(y, x) + hull(y) : rows of j, y in the stage box }
StageValue stage_value(const MultistageProblem& p, int t, const Vec& x, const Hull& hull) {
  const StageModel& st = p.stage(t);
  StageValue out{0.0, Vec::Zero(x.size())};
  for (const auto& r : st.realizations) {
    lp::Problem P;
    for (int i = 0; i < st.state_dim; ++i) P.add_var(0.0, st.state_set.lower[i], st.state_set.upper[i]);
    int epi = P.add_var(1.0, floor_of(r.cost, st.state_set, Box::point(x)), lp::kInf);
    const int rows_before = P.num_rows();
    add_realization_rows(P, r, 0, -1, &x, epi);
    const int rows_after = P.num_rows();
    if (hull.points) {
      const auto& pts = *hull.points;
      int w0 = P.num_vars();
      for (std::size_t i = 0; i < pts.size(); ++i) P.add_var((*hull.values)[i], 0.0, 1.0);
      Row sum;
      for (std::size_t i = 0; i < pts.size(); ++i) sum.emplace_back(w0 + static_cast<int>(i), 1.0);
      P.add_row(sum, lp::Sense::kEq, 1.0);
      for (int d = 0; d < st.state_dim; ++d) {
        Row row;
        for (std::size_t i = 0; i < pts.size(); ++i)
          if (pts[i][d] != 0.0) row.emplace_back(w0 + static_cast<int>(i), pts[i][d]);
        row.emplace_back(d, -1.0);
        P.add_row(row, lp::Sense::kEq, 0.0);
      }
    }
    lp::Solution s = lp::solve(P);
    if (s.status == lp::Status::kInfeasible)
      throw OracleError(OracleErrorKind::kInfeasible,
                        "stage " + std::to_string(t) + " has no feasible decision at a grid point");
    if (s.status != lp::Status::kOptimal)
      throw OracleError(OracleErrorKind::kSolver, std::string("stage LP: ") + lp::to_string(s.status));
    out.value += r.probability * s.objective;
    // The x terms were moved to the right-hand sides in row order.
    int row = rows_before;
    Vec g = Vec::Zero(x.size());
    for (const auto& a : r.cost.pieces()) g -= s.row_duals[row++] * a.slope_x;
    for (const auto& gi : r.ineq)
      for (const auto& a : gi.pieces()) g -= s.row_duals[row++] * a.slope_x;
    for (Eigen::Index i = 0; i < r.A.rows(); ++i) g -= s.row_duals[row++] * r.B.row(i).transpose();
    (void)rows_after;
    out.grad += r.probability * g;
  }
  return out;
}

// Cells of a regular grid as simplices of vertex indices (segments in 1-D,
// two triangles per square in 2-D).
std::vector<std::vector<int>> grid_cells(const Box& box, int per_dim) {
  std::vector<int> counts, strides;
  int stride = 1;
  for (int d = 0; d < box.dim(); ++d) {
    int c = box.lower[d] == box.upper[d] ? 1 : per_dim;
    counts.push_back(c);
    strides.push_back(stride);
    stride *= c;
  }
  std::vector<int> live;
  for (int d = 0; d < box.dim(); ++d)
    if (counts[static_cast<std::size_t>(d)] > 1) live.push_back(d);
  std::vector<std::vector<int>> cells;
  if (live.empty()) {
    cells.push_back({0});
  } else if (live.size() == 1) {
    int s = strides[static_cast<std::size_t>(live[0])];
    for (int i = 0; i + 1 < counts[static_cast<std::size_t>(live[0])]; ++i) cells.push_back({i * s, (i + 1) * s});
  } else if (live.size() == 2) {
    int sa = strides[static_cast<std::size_t>(live[0])], sb = strides[static_cast<std::size_t>(live[1])];
    for (int i = 0; i + 1 < counts[static_cast<std::size_t>(live[0])]; ++i)
      for (int j = 0; j + 1 < counts[static_cast<std::size_t>(live[1])]; ++j) {
        int v00 = i * sa + j * sb, v10 = v00 + sa, v01 = v00 + sb, v11 = v00 + sa + sb;
        cells.push_back({v00, v10, v11});
        cells.push_back({v00, v01, v11});
      }
  } else {
    throw OracleError(OracleErrorKind::kTooLarge, "grid recursion supports at most 2 state coordinates");
  }
  return cells;
}

// max over the cell of (linear interpolant - max of the vertex cuts)
double cell_gap(const std::vector<int>& cell, const std::vector<Vec>& pts,
                const std::vector<double>& vals, const std::vector<Vec>& grads) {
  if (cell.size() == 1) return 0.0;
  lp::Problem P;
  for (std::size_t i = 0; i < cell.size(); ++i) P.add_var(0.0, 0.0, 1.0);
  int t = P.add_var(-1.0, -lp::kInf, lp::kInf);
  Row sum;
  for (std::size_t i = 0; i < cell.size(); ++i) sum.emplace_back(static_cast<int>(i), 1.0);
  P.add_row(sum, lp::Sense::kEq, 1.0);
  for (int k : cell) {
    const auto ku = static_cast<std::size_t>(k);
    // t <= sum mu_i (v_i - v_k - g_k (x_i - x_k))
    Row row{{t, 1.0}};
    for (std::size_t i = 0; i < cell.size(); ++i) {
      const auto iu = static_cast<std::size_t>(cell[i]);
      row.emplace_back(static_cast<int>(i), -(vals[iu] - vals[ku] - grads[ku].dot(pts[iu] - pts[ku])));
    }
    P.add_row(row, lp::Sense::kLe, 0.0);
  }
  lp::Solution s = lp::solve(P);
  if (s.status != lp::Status::kOptimal)
    throw OracleError(OracleErrorKind::kSolver, "cell bound LP failed");
  return std::max(0.0, -s.objective);
}

PointValue point_value(const SubproblemInstance& inst, const Vec& x) {
  const int n = inst.dim_y();
  lp::Problem P;
  for (int k = 0; k < n; ++k) P.add_var(0.0, inst.Y.lower[k], inst.Y.upper[k]);
  const Box at = Box::point(x);
  int s = P.add_var(1.0, floor_of(inst.cost, inst.Y, at), lp::kInf);
  for (const auto& a : inst.cost.pieces()) {
    Row row;
    double rhs = -a.offset;
    add_terms(row, rhs, a.slope_y, 0, nullptr);
    add_terms(row, rhs, a.slope_x, -1, &x);
    row.emplace_back(s, -1.0);
    P.add_row(row, lp::Sense::kLe, rhs);
  }
  if (inst.value_model) {
    int r = P.add_var(1.0, floor_of(*inst.value_model, inst.Y, Box(Vec(0), Vec(0))), lp::kInf);
    for (const auto& a : inst.value_model->pieces()) {
      Row row;
      double rhs = -a.offset;
      add_terms(row, rhs, a.slope_y, 0, nullptr);
      row.emplace_back(r, -1.0);
      P.add_row(row, lp::Sense::kLe, rhs);
    }
  }
  for (const auto& g : inst.ineq)
    for (const auto& a : g.pieces()) {
      Row row;
      double rhs = -a.offset;
      add_terms(row, rhs, a.slope_y, 0, nullptr);
      add_terms(row, rhs, a.slope_x, -1, &x);
      P.add_row(row, lp::Sense::kLe, rhs);
    }
  for (Eigen::Index i = 0; i < inst.A.rows(); ++i) {
    Row row;
    double rhs = inst.b[i];
    add_terms(row, rhs, inst.A.row(i).transpose(), 0, nullptr);
    add_terms(row, rhs, inst.B.row(i).transpose(), -1, &x);
    P.add_row(row, lp::Sense::kEq, rhs);
  }
  lp::Options o;
  o.algorithm = lp::Algorithm::kPrimal;
  lp::Solution sol = lp::solve(P, o);
  if (sol.status == lp::Status::kInfeasible) return PointValue{lp::kInf, false};
  if (sol.status != lp::Status::kOptimal)
    throw OracleError(OracleErrorKind::kSolver, std::string("value LP: ") + lp::to_string(sol.status));
  return PointValue{sol.objective, true};
}

}  // namespace

std::vector<TreeNode> build_tree(const MultistageProblem& p, double max_nodes) {
  return subtree(p, 1, max_nodes);
}

ExtensiveFormResult extensive_form(const MultistageProblem& p, double max_nodes) {
  validate(p);
  return solve_subtree(p, 1, p.x0, max_nodes);
}

double true_Q_at(const MultistageProblem& p, int t, const Vec& x, double max_nodes) {
  if (t < 1 || t > p.horizon + 1) throw OracleError(OracleErrorKind::kInvalid, "stage out of range");
  if (t == p.horizon + 1) return 0.0;
  return solve_subtree(p, t, x, max_nodes).value;
}

std::vector<Vec> box_grid(const Box& box, int per_dim) {
  if (per_dim < 1) throw OracleError(OracleErrorKind::kInvalid, "grid needs at least one point per coordinate");
  const int n = box.dim();
  std::vector<int> counts(static_cast<std::size_t>(n));
  double total = 1.0;
  for (int d = 0; d < n; ++d) {
    counts[static_cast<std::size_t>(d)] = box.lower[d] == box.upper[d] ? 1 : per_dim;
    total *= counts[static_cast<std::size_t>(d)];
  }
  if (total > 1e7) throw OracleError(OracleErrorKind::kTooLarge, "grid too large");
  std::vector<Vec> pts;
  pts.reserve(static_cast<std::size_t>(total));
  std::vector<int> idx(static_cast<std::size_t>(n), 0);
  for (long k = 0; k < static_cast<long>(total); ++k) {
    Vec x(n);
    for (int d = 0; d < n; ++d) {
      int c = counts[static_cast<std::size_t>(d)];
      int i = idx[static_cast<std::size_t>(d)];
      x[d] = c == 1 ? box.lower[d]
                    : (i == c - 1 ? box.upper[d]
                                  : box.lower[d] + (box.upper[d] - box.lower[d]) * i / (c - 1));
    }
    pts.push_back(std::move(x));
    for (int d = 0; d < n; ++d) {
      if (++idx[static_cast<std::size_t>(d)] < counts[static_cast<std::size_t>(d)]) break;
      idx[static_cast<std::size_t>(d)] = 0;
    }
  }
  return pts;
}

GridValues true_Q_grid(const MultistageProblem& p, int t, int per_dim) {
  validate(p);
  if (t < 1 || t > p.horizon + 1) throw OracleError(OracleErrorKind::kInvalid, "stage out of range");
  GridValues next;
  next.points = box_grid(p.incoming_box(p.horizon + 1), per_dim);
  next.values.assign(next.points.size(), 0.0);
  for (int s = p.horizon; s >= t; --s) {
    GridValues cur;
    const Box box = p.incoming_box(s);
    cur.points = box_grid(box, per_dim);
    cur.values.resize(cur.points.size());
    std::vector<Vec> grads(cur.points.size());
    Hull hull;
    if (s < p.horizon) hull = Hull{&next.points, &next.values};
    cur.value_bound = s < p.horizon ? next.interp_bound : 0.0;
    const long n = static_cast<long>(cur.points.size());
    std::vector<std::exception_ptr> errs(cur.points.size());
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < n; ++i) {
      const auto iu = static_cast<std::size_t>(i);
      try {
        StageValue v = stage_value(p, s, cur.points[iu], hull);
        cur.values[iu] = v.value;
        grads[iu] = v.grad;
      } catch (...) {
        errs[iu] = std::current_exception();
      }
    }
    for (auto& e : errs)
      if (e) std::rethrow_exception(e);
    double gap = 0.0;
    for (const auto& cell : grid_cells(box, per_dim))
      gap = std::max(gap, cell_gap(cell, cur.points, cur.values, grads));
    cur.interp_bound = cur.value_bound + gap;
    next = std::move(cur);
  }
  return next;
}

PointValue single_value(const SubproblemInstance& inst, const Vec& x) { return point_value(inst, x); }

std::vector<PointValue> single_value_function_grid(const SubproblemInstance& inst,
                                                   const std::vector<Vec>& grid) {
  validate(inst);
  std::vector<PointValue> out(grid.size());
  std::vector<std::exception_ptr> errs(grid.size());
  const long n = static_cast<long>(grid.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    const auto iu = static_cast<std::size_t>(i);
    try {
      out[iu] = point_value(inst, grid[iu]);
    } catch (...) {
      errs[iu] = std::current_exception();
    }
  }
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
  return out;
}

std::vector<PointValue> single_value_function_grid_serial(const SubproblemInstance& inst,
                                                          const std::vector<Vec>& grid) {
  validate(inst);
  std::vector<PointValue> out;
  out.reserve(grid.size());
  for (const Vec& x : grid) out.push_back(point_value(inst, x));
  return out;
}

}  // namespace isddp::oracle

#include "isddp/cuts.hpp"

#include "lifting.hpp"

#include <json.hpp>

#include <cmath>

namespace isddp {

using json = nlohmann::ordered_json;

const char* to_string(CutOrigin o) {
  switch (o) {
    case CutOrigin::kInitial: return "initial";
    case CutOrigin::kAffineConstraints: return "affine_constraints";
    case CutOrigin::kGeneral: return "general";
    case CutOrigin::kFenchel: return "fenchel";
    case CutOrigin::kFenchelConstrained: return "fenchel_constrained";
    case CutOrigin::kDifferentiable: return "differentiable";
  }
  return "?";
}

CutOrigin origin_from_string(const std::string& s) {
  for (auto o : {CutOrigin::kInitial, CutOrigin::kAffineConstraints, CutOrigin::kGeneral,
                 CutOrigin::kFenchel, CutOrigin::kFenchelConstrained, CutOrigin::kDifferentiable})
    if (s == to_string(o)) return o;
  throw CutError(CutErrorKind::kDimension, "unknown cut provenance '" + s + "'");
}

CutPool::CutPool(int dim, Cut initial) : dim_(dim) { append(std::move(initial)); }

CutPool CutPool::constant(int dim, double c) {
  return CutPool(dim, Cut{c, Vec::Zero(dim), 0.0, CutOrigin::kInitial, 0});
}

void CutPool::append(Cut c) {
  if (c.slope.size() != dim_) throw CutError(CutErrorKind::kDimension, "cut dimension mismatch");
  if (!c.slope.allFinite() || !std::isfinite(c.intercept))
    throw CutError(CutErrorKind::kDimension, "cut has non-finite entries");
  cuts_.push_back(std::move(c));
}

double CutPool::eval(const Vec& x) const {
  if (x.size() != dim_) throw CutError(CutErrorKind::kDimension, "evaluation point dimension mismatch");
  double v = cuts_[0].value(x);
  for (std::size_t k = 1; k < cuts_.size(); ++k) v = std::max(v, cuts_[k].value(x));
  return v;
}

std::vector<double> CutPool::eval_all(const std::vector<Vec>& grid) const {
  std::vector<double> out(grid.size());
  const long n = static_cast<long>(grid.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = eval(grid[static_cast<std::size_t>(i)]);
  return out;
}

std::vector<double> CutPool::eval_all_serial(const std::vector<Vec>& grid) const {
  std::vector<double> out;
  out.reserve(grid.size());
  for (const Vec& x : grid) out.push_back(eval(x));
  return out;
}

PolyhedralFunction CutPool::as_function() const {
  std::vector<AffinePiece> pieces;
  pieces.reserve(cuts_.size());
  for (const auto& c : cuts_) pieces.push_back(AffinePiece{c.slope, Vec(0), c.intercept});
  return PolyhedralFunction(dim_, 0, std::move(pieces));
}

std::string CutPool::to_json() const {
  json cuts = json::array();
  for (const auto& c : cuts_) {
    json slope = json::array();
    for (Eigen::Index i = 0; i < c.slope.size(); ++i) slope.push_back(c.slope[i]);
    cuts.push_back({{"intercept", c.intercept},
                    {"slope", slope},
                    {"looseness", c.looseness},
                    {"provenance", to_string(c.provenance)},
                    {"iteration", c.iteration}});
  }
  json doc{{"dim", dim_}, {"cuts", cuts}};
  return doc.dump(2);
}

CutPool CutPool::from_json(const std::string& text) {
  json doc = json::parse(text);
  int dim = doc.at("dim").get<int>();
  const json& cuts = doc.at("cuts");
  if (!cuts.is_array() || cuts.empty()) throw CutError(CutErrorKind::kDimension, "pool has no cuts");
  auto read = [&](const json& j) {
    Cut c;
    c.intercept = j.at("intercept").get<double>();
    const json& s = j.at("slope");
    c.slope.resize(static_cast<Eigen::Index>(s.size()));
    for (std::size_t i = 0; i < s.size(); ++i) c.slope[static_cast<Eigen::Index>(i)] = s[i].get<double>();
    c.looseness = j.at("looseness").get<double>();
    c.provenance = origin_from_string(j.at("provenance").get<std::string>());
    c.iteration = j.at("iteration").get<int>();
    return c;
  };
  CutPool pool(dim, read(cuts[0]));
  for (std::size_t k = 1; k < cuts.size(); ++k) pool.append(read(cuts[k]));
  return pool;
}

double slater_margin(const SubproblemInstance& inst) {
  const int n = inst.dim_y();
  lp::Problem P;
  for (int k = 0; k < n; ++k) P.add_var(0.0, inst.Y.lower[k], inst.Y.upper[k]);
  int t = P.add_var(-1.0, -1.0, 1.0);
  for (int k = 0; k < n; ++k) {
    if (inst.Y.lower[k] == inst.Y.upper[k]) continue;
    P.add_row({{k, 1.0}, {t, -1.0}}, lp::Sense::kGe, inst.Y.lower[k]);
    P.add_row({{k, 1.0}, {t, 1.0}}, lp::Sense::kLe, inst.Y.upper[k]);
  }
  for (const auto& g : inst.ineq)
    for (const auto& a : g.pieces()) {
      std::vector<std::pair<int, double>> row;
      for (int k = 0; k < n; ++k)
        if (a.slope_y[k] != 0.0) row.emplace_back(k, a.slope_y[k]);
      row.emplace_back(t, 1.0);
      P.add_row(row, lp::Sense::kLe, -a.offset - a.slope_x.dot(inst.xbar));
    }
  Vec rhs = inst.b - inst.B * inst.xbar;
  for (Eigen::Index i = 0; i < inst.A.rows(); ++i) {
    std::vector<std::pair<int, double>> row;
    for (int k = 0; k < n; ++k)
      if (inst.A(i, k) != 0.0) row.emplace_back(k, inst.A(i, k));
    P.add_row(row, lp::Sense::kEq, rhs[i]);
  }
  lp::Solution s = lp::solve(P);
  if (s.status != lp::Status::kOptimal) return -lp::kInf;
  return s.x[t];
}

Cut cut_affine_constraints(const AffineCertificate& cert, const Mat& B, const Mat& C, const Vec& xbar) {
  for (Eigen::Index i = 0; i < cert.mu_hat.size(); ++i)
    if (cert.mu_hat[i] < -1e-9)
      throw CutError(CutErrorKind::kNegativeMultiplier, "inequality multiplier is negative");
  Vec slope = Vec::Zero(xbar.size());
  if (B.rows() > 0) slope += B.transpose() * cert.lambda_hat;
  if (C.rows() > 0) slope -= C.transpose() * cert.mu_hat;
  double loose = cert.eps_primal + cert.eps_dual;
  return Cut{cert.primal_value - loose - slope.dot(xbar), slope, loose, CutOrigin::kAffineConstraints, 0};
}

Cut cut_general(const Certificate& cert, const SubproblemInstance& inst, bool check_slater) {
  if (check_slater && slater_margin(inst) < 1e-7)
    throw CutError(CutErrorKind::kSlaterCheckFailed, "no strictly interior feasible point at xbar");
  double loose = cert.eps_primal + cert.eps_dual;
  return Cut{cert.primal_value - loose - cert.lambda_hat.dot(inst.xbar), cert.lambda_hat, loose,
             CutOrigin::kGeneral, 0};
}

Cut cut_general_sharp(const Certificate& cert, const Vec& xbar) {
  return Cut{cert.dual_value - cert.lambda_hat.dot(xbar), cert.lambda_hat, cert.eps_dual,
             CutOrigin::kGeneral, 0};
}

Cut cut_fenchel_unconstrained(const FenchelCertificate& cert, const FenchelData& fen, const Vec&) {
  Vec slope = fen.a1 + fen.B0 * cert.w_hat;
  double icpt = cert.y_hat.dot(fen.a2 + fen.A0 * cert.w_hat) - fen.phi0.dot(cert.w_hat) - cert.tau;
  return Cut{icpt, slope, cert.eps + cert.tau, CutOrigin::kFenchel, 0};
}

Cut cut_fenchel_constrained(const FenchelCertificate& cert, const FenchelData& fen, const Mat& A,
                            const Mat& B, const Vec& b, const Vec& xbar) {
  if (!cert.lambda_hat)
    throw CutError(CutErrorKind::kMissingMultiplier, "certificate has no equality multipliers");
  if ((A * cert.y_hat + B * xbar - b).cwiseAbs().maxCoeff() > 1e-9)
    throw CutError(CutErrorKind::kNotFeasible, "y_hat violates the equality rows");
  const Vec& lam = *cert.lambda_hat;
  Vec slope = fen.a1 + fen.B0 * cert.w_hat + B.transpose() * lam;
  double icpt = cert.y_hat.dot(fen.a2 + fen.A0 * cert.w_hat) - xbar.dot(B.transpose() * lam) -
                fen.phi0.dot(cert.w_hat) - cert.tau - cert.delta;
  return Cut{icpt, slope, cert.eps + cert.tau + cert.delta, CutOrigin::kFenchelConstrained, 0};
}

}  // namespace isddp

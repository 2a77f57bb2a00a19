#include "isddp/model.hpp"

#include <cmath>
#include <sstream>

namespace isddp {

namespace {

bool same(const Mat& a, const Mat& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
}

bool same(const Vec& a, const Vec& b) { return a.size() == b.size() && (a.size() == 0 || a == b); }

}  // namespace

double AffinePiece::value(const Vec& y, const Vec& x) const {
  return slope_y.dot(y) + slope_x.dot(x) + offset;
}

bool AffinePiece::operator==(const AffinePiece& o) const {
  return same(slope_y, o.slope_y) && same(slope_x, o.slope_x) && offset == o.offset;
}

PolyhedralFunction::PolyhedralFunction(int dim_y, int dim_x, std::vector<AffinePiece> pieces)
    : dim_y_(dim_y), dim_x_(dim_x), pieces_(std::move(pieces)) {
  validate(*this);
}

PolyhedralFunction PolyhedralFunction::constant(int dim_y, int dim_x, double c) {
  return PolyhedralFunction(dim_y, dim_x, {AffinePiece{Vec::Zero(dim_y), Vec::Zero(dim_x), c}});
}

double PolyhedralFunction::value(const Vec& y, const Vec& x) const {
  return pieces_[active_piece(y, x)].value(y, x);
}

std::size_t PolyhedralFunction::active_piece(const Vec& y, const Vec& x) const {
  std::size_t best = 0;
  double v = pieces_[0].value(y, x);
  for (std::size_t i = 1; i < pieces_.size(); ++i) {
    double w = pieces_[i].value(y, x);
    if (w > v) {
      v = w;
      best = i;
    }
  }
  return best;
}

Box::Box(Vec lo, Vec hi) : lower(std::move(lo)), upper(std::move(hi)) {}

bool Box::contains(const Vec& x, double tol) const {
  if (x.size() != lower.size()) return false;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (x[i] < lower[i] - tol || x[i] > upper[i] + tol) return false;
  return true;
}

double Box::diameter() const { return (upper - lower).norm(); }

bool Box::operator==(const Box& o) const { return same(lower, o.lower) && same(upper, o.upper); }

bool Realization::operator==(const Realization& o) const {
  return probability == o.probability && same(A, o.A) && same(B, o.B) && same(b, o.b) &&
         cost == o.cost && ineq == o.ineq;
}

int MultistageProblem::state_dim(int t) const {
  if (t == 0) return static_cast<int>(x0.size());
  return stage(t).state_dim;
}

Box MultistageProblem::incoming_box(int t) const {
  if (t == 1) return Box::point(x0);
  return stage(t - 1).state_set;
}

double MultistageProblem::node_count() const {
  double total = 1.0, level = 1.0;
  for (const auto& s : stages) {
    level *= static_cast<double>(s.realizations.size());
    total += level;
  }
  return total;
}

bool MultistageProblem::operator==(const MultistageProblem& o) const {
  return horizon == o.horizon && same(x0, o.x0) && stages == o.stages;
}

void validate(const PolyhedralFunction& f) {
  if (f.pieces().empty()) throw ModelError(ModelErrorKind::kOther, "polyhedral function has no pieces");
  for (const auto& p : f.pieces()) {
    if (p.slope_y.size() != f.dim_y() || p.slope_x.size() != f.dim_x())
      throw ModelError(ModelErrorKind::kDimension, "dimension mismatch in affine piece");
    if (!p.slope_y.allFinite() || !p.slope_x.allFinite() || !std::isfinite(p.offset))
      throw ModelError(ModelErrorKind::kOther, "non-finite coefficient in affine piece");
  }
}

void validate(const Box& box, const std::string& what) {
  if (box.lower.size() != box.upper.size()) throw ModelError(ModelErrorKind::kDimension, what + ": dimension mismatch in box");
  if (!box.lower.allFinite() || !box.upper.allFinite()) throw ModelError(ModelErrorKind::kUnboundedBox, what + ": unbounded box");
  for (Eigen::Index i = 0; i < box.lower.size(); ++i)
    if (box.lower[i] > box.upper[i]) throw ModelError(ModelErrorKind::kOther, what + ": box lower exceeds upper");
}

void validate(const MultistageProblem& p) {
  if (p.horizon < 1) throw ModelError(ModelErrorKind::kOther, "horizon must be at least 1");
  if (static_cast<int>(p.stages.size()) != p.horizon)
    throw ModelError(ModelErrorKind::kDimension, "number of stages differs from horizon");
  if (!p.x0.allFinite()) throw ModelError(ModelErrorKind::kOther, "x0 has non-finite entries");
  for (int t = 1; t <= p.horizon; ++t) {
    const StageModel& s = p.stage(t);
    std::string tag = "stage " + std::to_string(t);
    if (s.state_dim < 0 || s.state_set.dim() != s.state_dim)
      throw ModelError(ModelErrorKind::kDimension, tag + ": state_dim does not match state bounds");
    validate(s.state_set, tag);
    if (!std::isfinite(s.cost_lower_bound)) throw ModelError(ModelErrorKind::kOther, tag + ": cost_lower_bound not finite");
    if (s.realizations.empty()) throw ModelError(ModelErrorKind::kOther, tag + ": no realizations");
    if (t == 1 && s.realizations.size() != 1)
      throw ModelError(ModelErrorKind::kProbability, "stage 1 must have exactly one realization");
    int n = s.state_dim, nprev = p.state_dim(t - 1);
    double total = 0.0;
    for (std::size_t j = 0; j < s.realizations.size(); ++j) {
      const Realization& r = s.realizations[j];
      std::string rtag = tag + " realization " + std::to_string(j);
      if (!(r.probability > 0.0 && r.probability <= 1.0))
        throw ModelError(ModelErrorKind::kProbability, rtag + ": probability outside (0,1]");
      total += r.probability;
      if (r.A.cols() != n || r.B.cols() != nprev || r.A.rows() != r.B.rows() ||
          r.b.size() != r.A.rows())
        throw ModelError(ModelErrorKind::kDimension, rtag + ": dimension mismatch in A, B, b");
      if (!r.A.allFinite() || !r.B.allFinite() || !r.b.allFinite())
        throw ModelError(ModelErrorKind::kOther, rtag + ": non-finite constraint data");
      validate(r.cost);
      if (r.cost.dim_y() != n || r.cost.dim_x() != nprev)
        throw ModelError(ModelErrorKind::kDimension, rtag + ": dimension mismatch in cost");
      for (const auto& g : r.ineq) {
        validate(g);
        if (g.dim_y() != n || g.dim_x() != nprev)
          throw ModelError(ModelErrorKind::kDimension, rtag + ": dimension mismatch in inequality");
      }
    }
    if (std::abs(total - 1.0) > 1e-12) {
      std::ostringstream os;
      os << tag << ": probabilities sum to " << total;
      throw ModelError(ModelErrorKind::kProbability, os.str());
    }
  }
}

double FenchelData::lagrangian(const Vec& y, const Vec& x, const Vec& w) const {
  return y.dot(a2) + x.dot(a1) + y.dot(A0 * w) + x.dot(B0 * w) - phi0.dot(w);
}

FenchelData fenchel_view(const PolyhedralFunction& f) {
  const auto k = static_cast<Eigen::Index>(f.size());
  FenchelData d;
  d.a1 = Vec::Zero(f.dim_x());
  d.a2 = Vec::Zero(f.dim_y());
  d.A0.resize(f.dim_y(), k);
  d.B0.resize(f.dim_x(), k);
  d.phi0.resize(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto& p = f.pieces()[static_cast<std::size_t>(i)];
    d.A0.col(i) = p.slope_y;
    d.B0.col(i) = p.slope_x;
    d.phi0[i] = -p.offset;
  }
  return d;
}

}  // namespace isddp

#include "isddp/lp.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace isddp::lp {

const char* to_string(Status s) {
  switch (s) {
    case Status::kOptimal: return "optimal";
    case Status::kInfeasible: return "infeasible";
    case Status::kUnbounded: return "unbounded";
    case Status::kMaxPivots: return "max pivots";
    case Status::kStopped: return "stopped";
  }
  return "?";
}

int Problem::add_var(double cost, double lower, double upper) {
  cost_.push_back(cost);
  lower_.push_back(lower);
  upper_.push_back(upper);
  return num_vars() - 1;
}

int Problem::add_row(const std::vector<std::pair<int, double>>& coeffs, Sense sense, double rhs) {
  rows_.push_back(coeffs);
  sense_.push_back(sense);
  rhs_.push_back(rhs);
  return num_rows() - 1;
}

void Problem::set_bounds(int j, double lo, double hi) {
  lower_[static_cast<std::size_t>(j)] = lo;
  upper_[static_cast<std::size_t>(j)] = hi;
}

namespace {

constexpr double kPivotTol = 1e-9;
constexpr double kArtificialBound = 1e6;

enum class State : unsigned char { kBasic, kLower, kUpper, kZero };

// Variables: n structurals, then one logical per row (a_i x + s_i = b_i), then
// phase-1 artificials (sign * e_row). Basis inverse is kept explicitly.
class Simplex {
 public:
  Simplex(const Problem& p, const Options& opt);
  Solution run();

 private:
  int total() const { return n_ + m_ + static_cast<int>(art_row_.size()); }
  bool is_fixed(int j) const { return lo_[j] == up_[j]; }

  void add_artificial(int row, double sign, double value);
  void refactor();
  void recompute_basics();
  void compute_duals();
  double alpha_of(const Vec& rho, int j) const;
  Vec ftran(int j) const;
  void pivot(int r, int q, const Vec& col);
  double max_primal_infeasibility() const;
  double max_dual_infeasibility() const;
  void maybe_refactor();
  void note_step(double step);

  void place_for_dual();
  void place_for_primal();
  Status dual_loop();
  Status primal_loop(bool phase2);
  Solution finish(Status st);

  const Problem& p_;
  const Options& opt_;
  int m_, n_;
  long max_pivots_;
  Eigen::MatrixXd A_;
  Vec b_;
  Eigen::VectorXd c_, cost2_;
  std::vector<double> lo_, up_;
  std::vector<char> artificial_bound_;
  std::vector<int> art_row_;
  std::vector<double> art_sign_;
  Vec x_;
  std::vector<State> state_;
  std::vector<int> head_;
  Eigen::MatrixXd Binv_;
  Vec y_, d_;
  long pivots_ = 0;
  int since_refactor_ = 0;
  int degenerate_ = 0;
  bool bland_ = false;
};

Simplex::Simplex(const Problem& p, const Options& opt)
    : p_(p), opt_(opt), m_(p.num_rows()), n_(p.num_vars()) {
  max_pivots_ = opt.max_pivots > 0 ? opt.max_pivots : 50L * (m_ + n_) + 1000;
  A_ = Eigen::MatrixXd::Zero(m_, n_);
  b_.resize(m_);
  for (int i = 0; i < m_; ++i) {
    for (const auto& [j, a] : p.rows()[static_cast<std::size_t>(i)]) A_(i, j) += a;
    b_[i] = p.rhs()[static_cast<std::size_t>(i)];
  }
  int tot = n_ + m_;
  cost2_ = Vec::Zero(tot);
  lo_.assign(static_cast<std::size_t>(tot), 0.0);
  up_.assign(static_cast<std::size_t>(tot), 0.0);
  for (int j = 0; j < n_; ++j) {
    cost2_[j] = p.cost()[static_cast<std::size_t>(j)];
    lo_[j] = p.lower()[static_cast<std::size_t>(j)];
    up_[j] = p.upper()[static_cast<std::size_t>(j)];
  }
  for (int i = 0; i < m_; ++i) {
    int s = n_ + i;
    switch (p.sense()[static_cast<std::size_t>(i)]) {
      case Sense::kLe: lo_[s] = 0.0; up_[s] = kInf; break;
      case Sense::kGe: lo_[s] = -kInf; up_[s] = 0.0; break;
      case Sense::kEq: lo_[s] = 0.0; up_[s] = 0.0; break;
    }
  }
  artificial_bound_.assign(static_cast<std::size_t>(tot), 0);
  c_ = cost2_;
  x_ = Vec::Zero(tot);
  state_.assign(static_cast<std::size_t>(tot), State::kLower);
  head_.resize(static_cast<std::size_t>(m_));
  for (int i = 0; i < m_; ++i) {
    head_[i] = n_ + i;
    state_[n_ + i] = State::kBasic;
  }
  Binv_ = Eigen::MatrixXd::Identity(m_, m_);
}

void Simplex::add_artificial(int row, double sign, double value) {
  art_row_.push_back(row);
  art_sign_.push_back(sign);
  lo_.push_back(0.0);
  up_.push_back(kInf);
  artificial_bound_.push_back(0);
  state_.push_back(State::kBasic);
  int tot = total();
  x_.conservativeResize(tot);
  x_[tot - 1] = value;
  c_.conservativeResize(tot);
  cost2_.conservativeResize(tot);
  c_[tot - 1] = 0.0;
  cost2_[tot - 1] = 0.0;
}

double Simplex::alpha_of(const Vec& rho, int j) const {
  if (j < n_) return rho.dot(A_.col(j));
  if (j < n_ + m_) return rho[j - n_];
  std::size_t k = static_cast<std::size_t>(j - n_ - m_);
  return art_sign_[k] * rho[art_row_[k]];
}

Vec Simplex::ftran(int j) const {
  if (j < n_) return Binv_ * A_.col(j);
  if (j < n_ + m_) return Binv_.col(j - n_);
  std::size_t k = static_cast<std::size_t>(j - n_ - m_);
  return art_sign_[k] * Binv_.col(art_row_[k]);
}

void Simplex::refactor() {
  since_refactor_ = 0;
  if (m_ == 0) return;
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m_, m_);
  for (int i = 0; i < m_; ++i) {
    int j = head_[i];
    if (j < n_) {
      B.col(i) = A_.col(j);
    } else if (j < n_ + m_) {
      B(j - n_, i) = 1.0;
    } else {
      std::size_t k = static_cast<std::size_t>(j - n_ - m_);
      B(art_row_[k], i) = art_sign_[k];
    }
  }
  Binv_ = Eigen::PartialPivLU<Eigen::MatrixXd>(B).inverse();
  recompute_basics();
}

void Simplex::recompute_basics() {
  if (m_ == 0) return;
  Vec r = b_;
  Vec xs = x_.head(n_);
  for (int i = 0; i < m_; ++i)
    if (head_[i] < n_) xs[head_[i]] = 0.0;
  r.noalias() -= A_ * xs;
  for (int j = n_; j < total(); ++j) {
    if (state_[j] == State::kBasic) continue;
    if (j < n_ + m_) {
      r[j - n_] -= x_[j];
    } else {
      std::size_t k = static_cast<std::size_t>(j - n_ - m_);
      r[art_row_[k]] -= art_sign_[k] * x_[j];
    }
  }
  Vec xb = Binv_ * r;
  for (int i = 0; i < m_; ++i) x_[head_[i]] = xb[i];
}

void Simplex::compute_duals() {
  Vec cb(m_);
  for (int i = 0; i < m_; ++i) cb[i] = c_[head_[i]];
  y_ = Binv_.transpose() * cb;
  d_.resize(total());
  d_.head(n_) = c_.head(n_) - A_.transpose() * y_;
  for (int i = 0; i < m_; ++i) d_[n_ + i] = c_[n_ + i] - y_[i];
  for (std::size_t k = 0; k < art_row_.size(); ++k) {
    int j = n_ + m_ + static_cast<int>(k);
    d_[j] = c_[j] - art_sign_[k] * y_[art_row_[k]];
  }
  for (int i = 0; i < m_; ++i) d_[head_[i]] = 0.0;
}

void Simplex::pivot(int r, int q, const Vec& col) {
  const double piv = col[r];
  Eigen::RowVectorXd pr = Binv_.row(r) / piv;
  Vec c = col;
  c[r] = 0.0;
  Binv_.noalias() -= c * pr;
  Binv_.row(r) = pr;
  head_[r] = q;
  state_[q] = State::kBasic;
  ++since_refactor_;
  ++pivots_;
}

void Simplex::maybe_refactor() {
  if (since_refactor_ >= opt_.refactor_period) refactor();
}

void Simplex::note_step(double step) {
  if (step <= 0.0) {
    if (++degenerate_ > opt_.bland_after) bland_ = true;
  } else {
    degenerate_ = 0;
  }
}

double Simplex::max_primal_infeasibility() const {
  double worst = 0.0;
  for (int i = 0; i < m_; ++i) {
    int j = head_[i];
    worst = std::max({worst, lo_[j] - x_[j], x_[j] - up_[j]});
  }
  return worst;
}

double Simplex::max_dual_infeasibility() const {
  double worst = 0.0;
  for (int j = 0; j < total(); ++j) {
    if (state_[j] == State::kBasic || is_fixed(j)) continue;
    switch (state_[j]) {
      case State::kLower: worst = std::max(worst, -d_[j]); break;
      case State::kUpper: worst = std::max(worst, d_[j]); break;
      case State::kZero: worst = std::max(worst, std::abs(d_[j])); break;
      default: break;
    }
  }
  return worst;
}

// Nonbasic structurals sit at the bound their cost prefers, which makes the
// slack basis dual feasible. Missing bounds are replaced by artificial ones.
void Simplex::place_for_dual() {
  for (int j = 0; j < n_; ++j) {
    double c = c_[j];
    bool lo_ok = std::isfinite(lo_[j]), up_ok = std::isfinite(up_[j]);
    if (!lo_ok && !up_ok && c == 0.0) {
      state_[j] = State::kZero;
      x_[j] = 0.0;
      continue;
    }
    bool want_lower = c > 0.0 || (c == 0.0 && (lo_ok || !up_ok));
    if (want_lower && !lo_ok) {
      lo_[j] = (up_ok ? std::min(up_[j], 0.0) : 0.0) - kArtificialBound;
      artificial_bound_[j] = 1;
    } else if (!want_lower && !up_ok) {
      up_[j] = (lo_ok ? std::max(lo_[j], 0.0) : 0.0) + kArtificialBound;
      artificial_bound_[j] = 1;
    }
    state_[j] = want_lower ? State::kLower : State::kUpper;
    x_[j] = want_lower ? lo_[j] : up_[j];
  }
  recompute_basics();
}

void Simplex::place_for_primal() {
  for (int j = 0; j < n_; ++j) {
    if (std::isfinite(lo_[j])) {
      state_[j] = State::kLower;
      x_[j] = lo_[j];
    } else if (std::isfinite(up_[j])) {
      state_[j] = State::kUpper;
      x_[j] = up_[j];
    } else {
      state_[j] = State::kZero;
      x_[j] = 0.0;
    }
  }
  recompute_basics();
  // Rows whose logical cannot absorb the residual get an artificial.
  for (int i = 0; i < m_; ++i) {
    int s = n_ + i;
    double v = x_[s];
    double bound;
    if (v < lo_[s] - opt_.feas_tol) {
      bound = lo_[s];
    } else if (v > up_[s] + opt_.feas_tol) {
      bound = up_[s];
    } else {
      continue;
    }
    double resid = v - bound;
    state_[s] = (bound == lo_[s]) ? State::kLower : State::kUpper;
    x_[s] = bound;
    add_artificial(i, resid > 0 ? 1.0 : -1.0, std::abs(resid));
    head_[i] = total() - 1;
  }
  Binv_ = Eigen::MatrixXd::Identity(m_, m_);
  refactor();
}

Status Simplex::dual_loop() {
  Vec rho;
  for (;;) {
    if (pivots_ >= max_pivots_) return Status::kMaxPivots;
    maybe_refactor();
    compute_duals();
    int r = -1;
    double worst = opt_.feas_tol;
    for (int i = 0; i < m_; ++i) {
      int j = head_[i];
      double inf = std::max(lo_[j] - x_[j], x_[j] - up_[j]);
      if (inf <= opt_.feas_tol) continue;
      if (bland_) {
        if (r < 0 || j < head_[r]) r = i;
      } else if (inf > worst) {
        worst = inf;
        r = i;
      }
    }
    if (r < 0) return Status::kOptimal;
    const int p = head_[r];
    const bool to_lower = x_[p] < lo_[p];
    rho = Binv_.row(r).transpose();
    Vec alpha_s = A_.transpose() * rho;
    int q = -1;
    double best_ratio = kInf, best_alpha = 0.0;
    for (int j = 0; j < total(); ++j) {
      if (state_[j] == State::kBasic || is_fixed(j)) continue;
      double a = j < n_ ? alpha_s[j] : alpha_of(rho, j);
      if (std::abs(a) < kPivotTol) continue;
      State s = state_[j];
      bool ok = s == State::kZero ||
                (to_lower ? ((s == State::kLower && a < 0) || (s == State::kUpper && a > 0))
                          : ((s == State::kLower && a > 0) || (s == State::kUpper && a < 0)));
      if (!ok) continue;
      double dj = s == State::kLower ? std::max(d_[j], 0.0)
                  : s == State::kUpper ? std::max(-d_[j], 0.0)
                                       : 0.0;
      double ratio = dj / std::abs(a);
      bool take;
      if (q < 0 || ratio < best_ratio - 1e-12) {
        take = true;
      } else if (ratio <= best_ratio + 1e-12) {
        take = bland_ ? false : std::abs(a) > std::abs(best_alpha);
      } else {
        take = false;
      }
      if (take) {
        q = j;
        best_ratio = ratio;
        best_alpha = a;
      }
    }
    if (q < 0) {
      if (since_refactor_ > 0) {
        refactor();
        continue;
      }
      return Status::kInfeasible;
    }
    Vec col = ftran(q);
    double bound = to_lower ? lo_[p] : up_[p];
    double dx = (x_[p] - bound) / col[r];
    for (int i = 0; i < m_; ++i) x_[head_[i]] -= col[i] * dx;
    x_[q] += dx;
    x_[p] = bound;
    state_[p] = to_lower ? State::kLower : State::kUpper;
    if (opt_.trace)
      *opt_.trace << "pivot " << pivots_ << " dual enter " << q << " leave " << p << " ratio "
                  << best_ratio << " obj " << c_.dot(x_) + p_.offset << "\n";
    pivot(r, q, col);
    note_step(best_ratio);
  }
}

Status Simplex::primal_loop(bool phase2) {
  for (;;) {
    if (pivots_ >= max_pivots_) return Status::kMaxPivots;
    maybe_refactor();
    compute_duals();
    if (phase2 && opt_.on_iterate) {
      Vec xs = x_.head(n_);
      Vec dual = y_;
      Vec red = d_.head(n_);
      Iterate it{pivots_, &xs, &dual, &red, c_.head(n_).dot(xs) + p_.offset};
      if (!opt_.on_iterate(it)) return Status::kStopped;
    }
    int q = -1;
    double best = 0.0;
    for (int j = 0; j < total(); ++j) {
      if (state_[j] == State::kBasic || is_fixed(j)) continue;
      double score = state_[j] == State::kLower ? -d_[j]
                     : state_[j] == State::kUpper ? d_[j]
                                                  : std::abs(d_[j]);
      if (score <= opt_.opt_tol) continue;
      if (bland_) {
        q = j;
        break;
      }
      if (score > best) {
        best = score;
        q = j;
      }
    }
    if (q < 0) return Status::kOptimal;
    double dir = state_[q] == State::kLower ? 1.0
                 : state_[q] == State::kUpper ? -1.0
                                              : (d_[q] < 0 ? 1.0 : -1.0);
    Vec col = ftran(q);
    double step = kInf;
    int r = -1;
    double r_rate = 0.0;
    if (std::isfinite(lo_[q]) && std::isfinite(up_[q])) step = up_[q] - lo_[q];
    for (int i = 0; i < m_; ++i) {
      double rate = -col[i] * dir;
      if (std::abs(rate) < kPivotTol) continue;
      int j = head_[i];
      double lim;
      if (rate < 0) {
        if (!std::isfinite(lo_[j])) continue;
        lim = (x_[j] - lo_[j]) / -rate;
      } else {
        if (!std::isfinite(up_[j])) continue;
        lim = (up_[j] - x_[j]) / rate;
      }
      lim = std::max(lim, 0.0);
      bool take;
      if (lim < step - 1e-12) {
        take = true;
      } else if (lim <= step + 1e-12 && r >= 0) {
        take = bland_ ? j < head_[r] : std::abs(rate) > std::abs(r_rate);
      } else {
        take = false;
      }
      if (take) {
        step = lim;
        r = i;
        r_rate = rate;
      }
    }
    if (!std::isfinite(step)) return Status::kUnbounded;
    for (int i = 0; i < m_; ++i) x_[head_[i]] -= col[i] * dir * step;
    x_[q] += dir * step;
    if (r < 0) {
      // Bound flip of the entering variable.
      state_[q] = dir > 0 ? State::kUpper : State::kLower;
      x_[q] = dir > 0 ? up_[q] : lo_[q];
      ++pivots_;
      if (opt_.trace) *opt_.trace << "pivot " << pivots_ << " primal flip " << q << "\n";
      note_step(step);
      continue;
    }
    int p = head_[r];
    bool at_lower = r_rate < 0;
    x_[p] = at_lower ? lo_[p] : up_[p];
    state_[p] = at_lower ? State::kLower : State::kUpper;
    if (opt_.trace)
      *opt_.trace << "pivot " << pivots_ << (phase2 ? " primal" : " phase1") << " enter " << q
                  << " leave " << p << " step " << step << " obj " << c_.dot(x_) << "\n";
    pivot(r, q, col);
    note_step(step);
  }
}

Solution Simplex::finish(Status st) {
  Solution s;
  s.status = st;
  s.pivots = pivots_;
  s.x = x_.head(n_);
  s.row_duals = y_;
  s.reduced_costs = d_.head(n_);
  s.objective = cost2_.head(n_).dot(s.x) + p_.offset;
  return s;
}

Solution Simplex::run() {
  Status st;
  if (opt_.algorithm == Algorithm::kDual) {
    place_for_dual();
    for (int round = 0;; ++round) {
      st = dual_loop();
      if (st != Status::kOptimal) break;
      refactor();
      compute_duals();
      if (max_primal_infeasibility() > opt_.feas_tol) continue;
      if (max_dual_infeasibility() > opt_.opt_tol) {
        st = primal_loop(true);
        if (st != Status::kOptimal) break;
        refactor();
        compute_duals();
        if (max_primal_infeasibility() > opt_.feas_tol && round < 5) continue;
      }
      break;
    }
    if (st == Status::kOptimal) {
      for (int j = 0; j < n_; ++j) {
        if (!artificial_bound_[j] || state_[j] == State::kBasic) continue;
        bool at_art = (state_[j] == State::kLower && !std::isfinite(p_.lower()[j])) ||
                      (state_[j] == State::kUpper && !std::isfinite(p_.upper()[j]));
        if (at_art && std::abs(d_[j]) > opt_.opt_tol) st = Status::kUnbounded;
      }
    }
    return finish(st);
  }

  place_for_primal();
  if (!art_row_.empty()) {
    c_.setZero();
    for (std::size_t k = 0; k < art_row_.size(); ++k) c_[n_ + m_ + static_cast<int>(k)] = 1.0;
    st = primal_loop(false);
    if (st != Status::kOptimal) return finish(st);
    refactor();
    double infeas = 0.0;
    for (std::size_t k = 0; k < art_row_.size(); ++k) infeas += x_[n_ + m_ + static_cast<int>(k)];
    if (infeas > 1e-8) return finish(Status::kInfeasible);
    for (std::size_t k = 0; k < art_row_.size(); ++k) {
      int j = n_ + m_ + static_cast<int>(k);
      up_[j] = 0.0;
      if (state_[j] != State::kBasic) x_[j] = 0.0;
    }
    recompute_basics();
    c_ = cost2_;
  }
  bland_ = false;
  degenerate_ = 0;
  st = primal_loop(true);
  if (st == Status::kOptimal) {
    refactor();
    compute_duals();
  }
  return finish(st);
}

}  // namespace

Solution solve(const Problem& p, const Options& opt) {
  Simplex s(p, opt);
  return s.run();
}

}  // namespace isddp::lp

#include "matchsim/lp.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>

namespace matchsim::lp {

bool Solution::integral(const std::vector<int>& vars) const {
  for (int v : vars)
    if (std::fabs(values[v] - std::round(values[v])) > kIntTol) return false;
  return true;
}

double max_violation(const LinearProgram& prog, const std::vector<double>& values) {
  double worst = 0.0;
  for (int j = 0; j < prog.num_vars; ++j) {
    if (prog.lower[j] > -kInf) worst = std::max(worst, prog.lower[j] - values[j]);
    if (prog.upper[j] < kInf) worst = std::max(worst, values[j] - prog.upper[j]);
  }
  for (const auto& row : prog.rows) {
    double act = 0.0;
    for (auto& [j, a] : row.coeffs) act += a * values[j];
    if (row.rel == Rel::le) worst = std::max(worst, act - row.rhs);
    else if (row.rel == Rel::ge) worst = std::max(worst, row.rhs - act);
    else worst = std::max(worst, std::fabs(act - row.rhs));
  }
  return worst;
}

std::string dump_lp(const LinearProgram& prog) {
  std::ostringstream os;
  os << "max";
  for (int j = 0; j < prog.num_vars; ++j)
    if (prog.objective[j] != 0.0) os << " + " << prog.objective[j] << " x" << j;
  os << "\n";
  for (const auto& row : prog.rows) {
    for (auto& [j, a] : row.coeffs) os << " + " << a << " x" << j;
    os << (row.rel == Rel::le ? " <= " : row.rel == Rel::ge ? " >= " : " == ") << row.rhs << "\n";
  }
  for (int j = 0; j < prog.num_vars; ++j)
    os << prog.lower[j] << " <= x" << j << " <= " << prog.upper[j] << "\n";
  return os.str();
}

namespace {

// dense LU with partial pivoting, used to refine basic values from original data
bool lu_solve(std::vector<double>& a, std::vector<double>& b, int m) {
  std::vector<int> perm(m);
  for (int i = 0; i < m; ++i) perm[i] = i;
  for (int k = 0; k < m; ++k) {
    int piv = k;
    double best = std::fabs(a[k * m + k]);
    for (int i = k + 1; i < m; ++i) {
      double v = std::fabs(a[i * m + k]);
      if (v > best) { best = v; piv = i; }
    }
    if (best < 1e-13) return false;
    if (piv != k) {
      for (int j = 0; j < m; ++j) std::swap(a[k * m + j], a[piv * m + j]);
      std::swap(b[k], b[piv]);
    }
    double inv = 1.0 / a[k * m + k];
    for (int i = k + 1; i < m; ++i) {
      double f = a[i * m + k] * inv;
      if (f == 0.0) continue;
      a[i * m + k] = 0.0;
      for (int j = k + 1; j < m; ++j) a[i * m + j] -= f * a[k * m + j];
      b[i] -= f * b[k];
    }
  }
  for (int i = m - 1; i >= 0; --i) {
    double s = b[i];
    for (int j = i + 1; j < m; ++j) s -= a[i * m + j] * b[j];
    b[i] = s / a[i * m + i];
  }
  return true;
}

class Simplex {
 public:
  explicit Simplex(const LinearProgram& prog, const SimplexOptions& opt)
      : prog_(prog), m_((int)prog.rows.size()), n_(prog.num_vars) {
    limit_ = opt.iteration_limit > 0 ? opt.iteration_limit : 20000 + 40 * (m_ + n_);
    build();
  }

  Solution run() {
    Solution sol;
    if (!artificial_.empty()) {
      set_phase1_costs();
      if (!iterate()) throw NumericalInstability("phase-1 iteration limit");
      double infeas = 0.0;
      for (int c : artificial_) infeas += value_of(c);
      if (infeas > 1e-7) { sol.status = Status::infeasible; sol.pivots = pivots_; return sol; }
      // artificials are pinned at zero from here on
      for (int c : artificial_) { lo_[c] = hi_[c] = 0.0; }
    }
    set_phase2_costs();
    if (!iterate()) throw NumericalInstability("iteration limit reached");
    if (unbounded_) { sol.status = Status::unbounded; sol.pivots = pivots_; return sol; }
    extract(sol);
    return sol;
  }

 private:
  const LinearProgram& prog_;
  int m_, n_, ncols_ = 0, limit_ = 0;
  std::vector<double> T_;     // m x ncols
  std::vector<double> beta_;  // basic values
  std::vector<int> basis_;
  std::vector<int> row_of_;   // col -> basis row, -1 if nonbasic
  std::vector<double> lo_, hi_, cost_, d_, xval_;
  std::vector<std::uint8_t> at_upper_;
  std::vector<int> artificial_;
  std::vector<double> art_coef_;  // original +-1 coefficient per column
  std::vector<int> art_row_;      // per column: row the artificial was created in
  int pivots_ = 0, degen_run_ = 0;
  bool bland_ = false, unbounded_ = false;

  double value_of(int c) const { return row_of_[c] >= 0 ? beta_[row_of_[c]] : xval_[c]; }

  void build() {
    ncols_ = n_ + m_;
    lo_.resize(ncols_);
    hi_.resize(ncols_);
    for (int j = 0; j < n_; ++j) { lo_[j] = prog_.lower[j]; hi_[j] = prog_.upper[j]; }
    for (int i = 0; i < m_; ++i) {
      switch (prog_.rows[i].rel) {
        case Rel::le: lo_[n_ + i] = 0.0; hi_[n_ + i] = kInf; break;
        case Rel::ge: lo_[n_ + i] = -kInf; hi_[n_ + i] = 0.0; break;
        case Rel::eq: lo_[n_ + i] = 0.0; hi_[n_ + i] = 0.0; break;
      }
    }
    xval_.assign(ncols_, 0.0);
    at_upper_.assign(ncols_, 0);
    for (int j = 0; j < ncols_; ++j) {
      if (lo_[j] > -kInf) { xval_[j] = lo_[j]; }
      else if (hi_[j] < kInf) { xval_[j] = hi_[j]; at_upper_[j] = 1; }
      else throw NumericalInstability("free variable without finite bound");
    }

    basis_.assign(m_, -1);
    beta_.assign(m_, 0.0);
    std::vector<double> act(m_, 0.0);
    for (int i = 0; i < m_; ++i)
      for (auto& [j, a] : prog_.rows[i].coeffs) act[i] += a * xval_[j];

    std::vector<double> art_sign(m_, 0.0);
    for (int i = 0; i < m_; ++i) {
      double v = prog_.rows[i].rhs - act[i];  // slack value if slack were basic
      int s = n_ + i;
      if (v >= lo_[s] - 1e-12 && v <= hi_[s] + 1e-12) {
        basis_[i] = s;
        beta_[i] = v;
      } else {
        // clamp slack at its nearest finite bound, cover the rest with an artificial
        double sv = (v < lo_[s]) ? lo_[s] : hi_[s];
        xval_[s] = sv;
        at_upper_[s] = (sv == hi_[s] && hi_[s] < kInf) ? 1 : 0;
        double r = v - sv;
        art_sign[i] = r >= 0 ? 1.0 : -1.0;
        beta_[i] = std::fabs(r);
      }
    }
    art_coef_.assign(ncols_, 0.0);
    art_row_.assign(ncols_, -1);
    for (int i = 0; i < m_; ++i)
      if (basis_[i] == -1) {
        int c = ncols_++;
        lo_.push_back(0.0);
        hi_.push_back(kInf);
        xval_.push_back(0.0);
        at_upper_.push_back(0);
        artificial_.push_back(c);
        art_coef_.push_back(art_sign[i]);
        art_row_.push_back(i);
        basis_[i] = c;
      }

    T_.assign((std::size_t)m_ * ncols_, 0.0);
    for (int i = 0; i < m_; ++i) {
      double scale = art_sign[i] != 0.0 ? art_sign[i] : 1.0;  // B^{-1} is diag of +-1
      double* row = &T_[(std::size_t)i * ncols_];
      for (auto& [j, a] : prog_.rows[i].coeffs) row[j] += a / scale;
      row[n_ + i] += 1.0 / scale;
      if (art_sign[i] != 0.0) row[basis_[i]] = 1.0;
    }
    row_of_.assign(ncols_, -1);
    for (int i = 0; i < m_; ++i) row_of_[basis_[i]] = i;
    cost_.assign(ncols_, 0.0);
    d_.assign(ncols_, 0.0);
  }

  void set_phase1_costs() {
    std::fill(cost_.begin(), cost_.end(), 0.0);
    for (int c : artificial_) cost_[c] = -1.0;
    recompute_reduced_costs();
  }
  void set_phase2_costs() {
    std::fill(cost_.begin(), cost_.end(), 0.0);
    for (int j = 0; j < n_; ++j) cost_[j] = prog_.objective[j];
    recompute_reduced_costs();
  }
  void recompute_reduced_costs() {
    for (int j = 0; j < ncols_; ++j) d_[j] = cost_[j];
    for (int i = 0; i < m_; ++i) {
      double cb = cost_[basis_[i]];
      if (cb == 0.0) continue;
      const double* row = &T_[(std::size_t)i * ncols_];
      for (int j = 0; j < ncols_; ++j) d_[j] -= cb * row[j];
    }
  }

  // returns false if the iteration limit was hit
  bool iterate() {
    unbounded_ = false;
    for (int it = 0; it < limit_; ++it) {
      int e = -1;
      double best = kFeasTol;
      for (int j = 0; j < ncols_; ++j) {
        if (row_of_[j] >= 0 || lo_[j] == hi_[j]) continue;
        double gain = at_upper_[j] ? -d_[j] : d_[j];
        if (gain > best) {
          best = gain;
          e = j;
          if (bland_) break;
        }
      }
      if (e < 0) return true;  // optimal for current costs

      double dir = at_upper_[e] ? -1.0 : 1.0;
      // ratio test over basic variables plus the entering variable's own span
      double step = kInf;
      int leave_row = -1;
      double leave_rate = 0.0;
      for (int i = 0; i < m_; ++i) {
        double y = T_[(std::size_t)i * ncols_ + e];
        double rate = dir * y;
        if (std::fabs(rate) < 1e-11) continue;
        int b = basis_[i];
        double t;
        if (rate > 0.0) {
          if (lo_[b] <= -kInf) continue;
          t = (beta_[i] - lo_[b]) / rate;
        } else {
          if (hi_[b] >= kInf) continue;
          t = (hi_[b] - beta_[i]) / (-rate);
        }
        if (t < -1e-11) t = 0.0;
        if (t < step - 1e-12 ||
            (t < step + 1e-12 &&
             (leave_row < 0 || std::fabs(y) > std::fabs(T_[(std::size_t)leave_row * ncols_ + e])))) {
          step = std::max(t, 0.0);
          leave_row = i;
          leave_rate = rate;
        }
      }
      double span = hi_[e] - lo_[e];
      bool flip = span < kInf && span <= step;
      if (flip) step = span;
      if (step >= kInf) { unbounded_ = true; return true; }

      degen_run_ = (step < 1e-12) ? degen_run_ + 1 : 0;
      if (degen_run_ > 5 * (m_ + n_)) bland_ = true;

      if (flip) {
        for (int i = 0; i < m_; ++i) {
          double y = T_[(std::size_t)i * ncols_ + e];
          if (y != 0.0) beta_[i] -= step * dir * y;
        }
        at_upper_[e] ^= 1;
        xval_[e] = at_upper_[e] ? hi_[e] : lo_[e];
        ++pivots_;
        continue;
      }

      double p = T_[(std::size_t)leave_row * ncols_ + e];
      if (std::fabs(p) < kPivotTol)
        throw NumericalInstability("pivot magnitude " + std::to_string(p));

      // update basic values before the tableau changes
      for (int i = 0; i < m_; ++i) {
        if (i == leave_row) continue;
        double y = T_[(std::size_t)i * ncols_ + e];
        if (y != 0.0) beta_[i] -= step * dir * y;
      }
      int leaving = basis_[leave_row];
      at_upper_[leaving] = leave_rate < 0.0 ? 1 : 0;
      xval_[leaving] = at_upper_[leaving] ? hi_[leaving] : lo_[leaving];
      double enter_value = xval_[e] + step * dir;

      double* pr = &T_[(std::size_t)leave_row * ncols_];
      double inv = 1.0 / p;
      for (int j = 0; j < ncols_; ++j) pr[j] *= inv;
      for (int i = 0; i < m_; ++i) {
        if (i == leave_row) continue;
        double f = T_[(std::size_t)i * ncols_ + e];
        if (f == 0.0) continue;
        double* ri = &T_[(std::size_t)i * ncols_];
#pragma omp simd
        for (int j = 0; j < ncols_; ++j) ri[j] -= f * pr[j];
      }
      double f = d_[e];
      if (f != 0.0)
        for (int j = 0; j < ncols_; ++j) d_[j] -= f * pr[j];

      row_of_[leaving] = -1;
      basis_[leave_row] = e;
      row_of_[e] = leave_row;
      beta_[leave_row] = enter_value;
      ++pivots_;

      if ((pivots_ & 255) == 0) {
        double mx = 0.0;
        for (double v : T_) mx = std::max(mx, std::fabs(v));
        if (mx > 1e10) throw NumericalInstability("tableau magnitude " + std::to_string(mx));
      }
    }
    return false;
  }

  void extract(Solution& sol) {
    sol.values.assign(n_, 0.0);
    for (int j = 0; j < n_; ++j) sol.values[j] = value_of(j);
    if (max_violation(prog_, sol.values) > kFeasTol / 2) refine(sol);
    double viol = max_violation(prog_, sol.values);
    if (viol > kFeasTol)
      throw NumericalInstability("solution violates constraints by " + std::to_string(viol));
    sol.objective = 0.0;
    for (int j = 0; j < n_; ++j) sol.objective += prog_.objective[j] * sol.values[j];
    sol.status = Status::optimal;
    sol.bound = sol.objective;
    sol.pivots = pivots_;
  }

  // re-solve B x_B = b - N x_N from original data to wash out pivot drift
  void refine(Solution& sol) {
    std::vector<double> B((std::size_t)m_ * m_, 0.0);
    std::vector<double> rhs(m_, 0.0);
    for (int i = 0; i < m_; ++i) rhs[i] = prog_.rows[i].rhs;
    auto col_entry = [&](int c, int i) -> double {
      // original coefficient of column c in row i
      if (c < n_) {
        for (auto& [j, a] : prog_.rows[i].coeffs)
          if (j == c) return a;
        return 0.0;
      }
      if (c < n_ + m_) return c - n_ == i ? 1.0 : 0.0;
      return 0.0;  // artificial, pinned at zero by now
    };
    for (int c = 0; c < ncols_; ++c) {
      if (row_of_[c] >= 0) continue;
      double xv = xval_[c];
      if (xv == 0.0) continue;
      if (c < n_) {
        for (int i = 0; i < m_; ++i) {
          double a = col_entry(c, i);
          if (a != 0.0) rhs[i] -= a * xv;
        }
      } else if (c < n_ + m_) {
        rhs[c - n_] -= xv;
      }
    }
    for (int i = 0; i < m_; ++i) {
      int c = basis_[i];
      if (c >= n_ + m_) {  // artificial: single +-1 entry in its creation row
        B[(std::size_t)art_row_[c] * m_ + i] = art_coef_[c];
        continue;
      }
      for (int r = 0; r < m_; ++r) {
        double a = col_entry(c, r);
        if (a != 0.0) B[(std::size_t)r * m_ + i] = a;
      }
    }
    std::vector<double> xb = rhs;
    if (!lu_solve(B, xb, m_)) return;  // keep tableau values; final check decides
    for (int i = 0; i < m_; ++i) beta_[i] = xb[i];
    for (int j = 0; j < n_; ++j) sol.values[j] = value_of(j);
  }
};

}  // namespace

Solution solve_lp(const LinearProgram& prog, const SimplexOptions& opt) {
  Simplex s(prog, opt);
  return s.run();
}

namespace {

struct BoundFix {
  int var;
  double lower, upper;
};
struct Node {
  double bound;
  long id;
  std::vector<BoundFix> fixes;  // path from the root
};
struct NodeOrder {
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound < b.bound;  // max-heap on bound
    return a.id > b.id;
  }
};

int pick_branch_var(const MipProblem& prob, const std::vector<double>& x) {
  int best = -1;
  double best_frac = kIntTol;
  auto rank = [&](int v) {
    if (!prob.branch_rank.empty()) return prob.branch_rank[v];
    return v;
  };
  for (int v : prob.integer_vars) {
    double f = x[v] - std::floor(x[v]);
    double score = std::min(f, 1.0 - f);
    if (score <= kIntTol) continue;
    if (score > best_frac + 1e-12 ||
        (score > best_frac - 1e-12 && best >= 0 && rank(v) < rank(best))) {
      best_frac = std::max(score, best_frac);
      best = v;
    }
  }
  return best;
}

}  // namespace

Solution solve_mip(const MipProblem& prob, const MipOptions& opt) {
  LinearProgram work = prob.lp;
  Solution root = solve_lp(work);
  Solution best;
  best.status = Status::infeasible;
  long nodes = 1;
  int pivots = root.pivots;
  if (root.status != Status::optimal) {
    root.nodes = nodes;
    return root;
  }
  double incumbent = -kInf;
  if (root.integral(prob.integer_vars)) {
    best = root;
    best.nodes = nodes;
    best.pivots = pivots;
    return best;
  }

  // rounding dive: repeatedly fix the most fractional integer variable at its
  // nearest value (falling back to the other side if that kills feasibility)
  // and re-solve; an early incumbent makes best-first pruning bite
  {
    LinearProgram fixed = prob.lp;
    Solution cur = root;
    while (cur.status == Status::optimal) {
      int v = pick_branch_var(prob, cur.values);
      if (v < 0) {
        if (cur.objective > incumbent) {
          incumbent = cur.objective;
          best = cur;
          best.status = Status::optimal;
        }
        break;
      }
      double lo = std::floor(cur.values[v]);
      double hi = std::ceil(cur.values[v]);
      double first_try = cur.values[v] - lo <= 0.5 ? lo : hi;
      for (double r : {first_try, first_try == lo ? hi : lo}) {
        if (r < prob.lp.lower[v] - kIntTol || r > prob.lp.upper[v] + kIntTol) {
          cur.status = Status::infeasible;
          continue;
        }
        fixed.lower[v] = fixed.upper[v] = r;
        try {
          cur = solve_lp(fixed);
        } catch (const NumericalInstability&) {
          cur.status = Status::infeasible;
        }
        pivots += cur.pivots;
        if (cur.status == Status::optimal) break;
      }
    }
  }

  std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
  long next_id = 0;
  open.push(Node{root.objective, next_id++, {}});
  bool first = true;

  while (!open.empty()) {
    Node node = open.top();
    open.pop();
    if (node.bound <= incumbent + 1e-9) continue;
    Solution sol;
    if (first) {
      sol = root;  // root already solved
      first = false;
    } else {
      if (++nodes > opt.node_limit) {
        // best-first order: this node carries the largest remaining bound
        if (opt.best_effort && best.status == Status::optimal) {
          best.bound = std::max(incumbent, node.bound);
          best.proven = false;
          best.nodes = nodes;
          best.pivots = pivots;
          return best;
        }
        throw NodeLimitExceeded("node limit " + std::to_string(opt.node_limit));
      }
      work.lower = prob.lp.lower;
      work.upper = prob.lp.upper;
      for (const auto& f : node.fixes) {
        work.lower[f.var] = std::max(work.lower[f.var], f.lower);
        work.upper[f.var] = std::min(work.upper[f.var], f.upper);
      }
      sol = solve_lp(work);
      pivots += sol.pivots;
      if (sol.status == Status::unbounded) { sol.nodes = nodes; return sol; }
      if (sol.status != Status::optimal) continue;
      if (sol.objective <= incumbent + 1e-9) continue;
    }
    if (sol.integral(prob.integer_vars)) {
      if (sol.objective > incumbent) {
        incumbent = sol.objective;
        best = sol;
        best.status = Status::optimal;
      }
      continue;
    }
    int v = pick_branch_var(prob, sol.values);
    if (v < 0) {  // fractional only within tolerance; accept as integral
      if (sol.objective > incumbent) { incumbent = sol.objective; best = sol; }
      continue;
    }
    Node down{sol.objective, next_id++, node.fixes};
    down.fixes.push_back({v, -kInf, std::floor(sol.values[v])});
    Node up{sol.objective, next_id++, node.fixes};
    up.fixes.push_back({v, std::ceil(sol.values[v]), kInf});
    open.push(std::move(down));
    open.push(std::move(up));
  }
  best.bound = best.objective;
  best.proven = true;
  best.nodes = nodes;
  best.pivots = pivots;
  return best;
}

}  // namespace matchsim::lp

#pragma once
// Dense bounded-variable primal simplex and a best-first branch & bound on
// top of it.  Maximization convention throughout.  Deterministic pivoting:
// Dantzig rule with lowest-index tie break, switching to Bland's rule after
// a run of degenerate pivots.
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace matchsim::lp {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kFeasTol = 1e-9;   // constraint satisfaction in reported solutions
constexpr double kIntTol = 1e-6;    // integrality recognition in branch & bound
constexpr double kPivotTol = 1e-8;  // smallest acceptable pivot magnitude

struct NumericalInstability : std::runtime_error {
  explicit NumericalInstability(const std::string& m) : std::runtime_error(m) {}
};
struct NodeLimitExceeded : std::runtime_error {
  explicit NodeLimitExceeded(const std::string& m) : std::runtime_error(m) {}
};

enum class Rel { le, ge, eq };

struct LinearProgram {
  int num_vars = 0;
  std::vector<double> objective;
  std::vector<double> lower, upper;
  struct Row {
    std::vector<std::pair<int, double>> coeffs;
    Rel rel = Rel::le;
    double rhs = 0.0;
  };
  std::vector<Row> rows;

  int add_var(double lo, double hi, double obj) {
    lower.push_back(lo);
    upper.push_back(hi);
    objective.push_back(obj);
    return num_vars++;
  }
  void add_row(std::vector<std::pair<int, double>> coeffs, Rel rel, double rhs) {
    rows.push_back(Row{std::move(coeffs), rel, rhs});
  }
};

enum class Status { optimal, infeasible, unbounded };

struct Solution {
  Status status = Status::infeasible;
  std::vector<double> values;
  double objective = 0.0;
  // valid upper bound on the true optimum; equals objective except when a
  // node-capped branch & bound stopped with the tree still open
  double bound = 0.0;
  bool proven = true;
  int pivots = 0;        // LP: pivot count; MIP: total over all nodes
  long nodes = 0;        // branch & bound nodes solved
  bool integral(const std::vector<int>& vars) const;
};

struct SimplexOptions {
  int iteration_limit = 0;  // 0 = automatic from problem size
};

Solution solve_lp(const LinearProgram& prog, const SimplexOptions& opt = {});

struct MipProblem {
  LinearProgram lp;
  std::vector<int> integer_vars;
  // optional: rank used to break most-fractional ties (lower rank first);
  // empty means ties break by variable index
  std::vector<int> branch_rank;
};

struct MipOptions {
  long node_limit = 1'000'000;
  // at the node limit, hand back the incumbent and the open tree's bound
  // instead of throwing NodeLimitExceeded
  bool best_effort = false;
};

Solution solve_mip(const MipProblem& prob, const MipOptions& opt = {});

// max violation of rows and bounds at the given point
double max_violation(const LinearProgram& prog, const std::vector<double>& values);

std::string dump_lp(const LinearProgram& prog);

}  // namespace matchsim::lp

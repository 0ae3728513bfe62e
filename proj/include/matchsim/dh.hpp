#pragma once
// Two-period and multi-period display relaxations (the "plan now, harvest
// later" MIP family) and the policies that round their solutions.
#include <map>
#include <memory>
#include <tuple>
#include <utility>
#include <vector>

#include "matchsim/lp.hpp"
#include "matchsim/market.hpp"
#include "matchsim/policy.hpp"

namespace matchsim {

struct TimeInhomogeneousMultiPeriod : std::runtime_error {
  explicit TimeInhomogeneousMultiPeriod(const std::string& m) : std::runtime_error(m) {}
};

enum class DhForm { two_period, multi_period };

// which mutual-display behavior the policy implements on top of a design
// that permits them: none (never), first (period 1 displays only, the MIP's
// w variables), both (also re-optimize mutual pairs in the final period)
enum class DhVariant { none, first, both };

struct DhModel {
  lp::MipProblem mip;
  DhForm form = DhForm::two_period;
  std::vector<std::pair<int, int>> x_vars;  // (viewer, viewed)
  std::vector<std::pair<int, int>> w_vars;  // canonical (i, j)
  std::vector<std::pair<int, int>> y_vars;  // (viewer, backlog member)
  int x_base = 0, w_base = 0, y_base = 0;
};

struct DhRelaxationSolution {
  double objective = 0.0;
  // valid upper bound on the integer optimum; above objective only when the
  // branch & bound hit its node cap and kept the incumbent
  double upper_bound = 0.0;
  bool proven = true;
  std::vector<std::pair<int, int>> x;                  // chosen arcs
  std::vector<std::pair<int, int>> w;                  // chosen pairs
  std::vector<std::tuple<int, int, double>> y;         // (viewer, member, value)
  long nodes = 0;
};

// mutual-display variables appear whenever the design allows them in period
// 1; solve with design.timing = sequential_only to get the no-mutual form
DhModel build_dh_relaxation(const MarketInstance& inst, const PlatformDesign& design, DhForm form);

DhRelaxationSolution solve_dh_relaxation(const DhModel& model,
                                         const lp::MipOptions& opt = {});

class DhIntegralPolicy : public Policy {
 public:
  explicit DhIntegralPolicy(DhVariant variant = DhVariant::first) : variant_(variant) {}
  std::string name() const override;
  void prepare(const MarketInstance& inst, const PlatformDesign& design) override;
  std::unique_ptr<PolicyRun> start_run(Rng rng) const override;
  const DhRelaxationSolution& relaxation() const { return sol_; }

 private:
  DhVariant variant_;
  const MarketInstance* inst_ = nullptr;
  PlatformDesign design_;
  DhRelaxationSolution sol_;
};

// per-period lookahead LP, first-period displays rounded off the fractional
// solution: backlog harvests with y > 0 first (descending), then initiations
// with x > 0 (descending), capacity respected throughout
class DhFractionalPolicy : public Policy {
 public:
  explicit DhFractionalPolicy(DhVariant variant = DhVariant::first) : variant_(variant) {}
  std::string name() const override;
  void prepare(const MarketInstance& inst, const PlatformDesign& design) override;
  std::unique_ptr<PolicyRun> start_run(Rng rng) const override;

 private:
  DhVariant variant_;
  const MarketInstance* inst_ = nullptr;
  PlatformDesign design_;
};

// solves the horizon-wide relaxation once, then spreads the chosen displays
// over periods: planned initiations by decreasing reciprocal like prob, then
// mutual pairs (lowest partner id first) when both users have slack, then
// backlog harvesting with the remaining capacity
class DhMultiPeriodPolicy : public Policy {
 public:
  explicit DhMultiPeriodPolicy(DhVariant variant = DhVariant::first) : variant_(variant) {}
  std::string name() const override;
  void prepare(const MarketInstance& inst, const PlatformDesign& design) override;
  std::unique_ptr<PolicyRun> start_run(Rng rng) const override;
  const DhRelaxationSolution& relaxation() const { return sol_; }

 private:
  DhVariant variant_;
  const MarketInstance* inst_ = nullptr;
  PlatformDesign design_;
  DhRelaxationSolution sol_;
};

// one-directional multi-period variant: LP relaxation plus dependent
// rounding of each initiator's display vector (fresh rounding every run)
class DhOnedirRoundedPolicy : public Policy {
 public:
  std::string name() const override;
  void prepare(const MarketInstance& inst, const PlatformDesign& design) override;
  std::unique_ptr<PolicyRun> start_run(Rng rng) const override;
  double lp_objective() const { return lp_objective_; }
  const std::vector<std::pair<int, int>>& lp_arcs() const { return arcs_; }
  const std::vector<double>& lp_values() const { return arc_values_; }

 private:
  const MarketInstance* inst_ = nullptr;
  PlatformDesign design_;
  double lp_objective_ = 0.0;
  std::vector<std::pair<int, int>> arcs_;  // initiator arcs (i, j)
  std::vector<double> arc_values_;
};

}  // namespace matchsim

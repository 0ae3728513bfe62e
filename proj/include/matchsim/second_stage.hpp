#pragma once
// Second-period (and generally final-period) display selection: greedy
// per-user backlog harvesting, its exact expectation under random backlog
// arrival, and the mixed problem with mutual displays.
#include <tuple>
#include <utility>
#include <vector>

#include "matchsim/lp.hpp"
#include "matchsim/market.hpp"

namespace matchsim {

struct FUserResult {
  double value = 0.0;
  std::vector<int> chosen;  // partner ids, the displayed backlog members
};

// top-min(K,|candidates|) by probability, ties broken by ascending partner id
FUserResult f_user(std::vector<std::pair<int, double>> candidates, int capacity);
FUserResult f_user(const MarketInstance& inst, int user, const std::vector<int>& backlog,
                   int period, int capacity);

double f_total(const MarketInstance& inst, const std::vector<std::vector<int>>& backlog_family,
               int period);

// entries are (value, inclusion probability, id); returns E[sum of the top-K
// values among the entries that materialize], exactly, via a prefix count DP.
// Selection priority is (value desc, id asc), matching f_user.
double expected_topk_value(std::vector<std::tuple<double, double, int>> entries, int capacity);

struct SecondStageSolution {
  DisplayPlan plan;
  double value = 0.0;
  // the one-shot LP relaxation had an integral vertex (expected always; a
  // false here means the branch-and-bound fallback produced the plan)
  bool lp_integral = true;
};

// final-period problem with backlog displays and, when the design allows it,
// mutual displays between users who have not seen each other
// Spend any capacity the plan leaves unused on the best current backlog
// members (skipping pairs the plan already displays).
void fill_plan_from_backlog(const MarketInstance& inst, const MarketState& state,
                            DisplayPlan& plan);

SecondStageSolution solve_second_general(const MarketInstance& inst, const PlatformDesign& design,
                                         const MarketState& state);

}  // namespace matchsim

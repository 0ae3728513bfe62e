#pragma once

// Exponential-time exact references for tiny instances. Everything here
// enumerates: plans, like outcomes, or backlog realizations. Caps are hard
// errors rather than silent truncation.

#include <stdexcept>
#include <string>

#include "matchsim/market.hpp"

namespace matchsim {

class StateSpaceTooLarge : public std::runtime_error {
 public:
  StateSpaceTooLarge(const std::string& what, long long estimate)
      : std::runtime_error(what), estimate(estimate) {}
  long long estimate;
};

class TooManyEdges : public std::runtime_error {
 public:
  explicit TooManyEdges(const std::string& what) : std::runtime_error(what) {}
};

struct DpOptions {
  long long node_cap = 10'000'000;
  // evaluate next-to-last periods by outcome enumeration even when the exact
  // separable shortcut applies (cross-checking hook)
  bool force_full_branching = false;
};

// Exact optimal adaptive expected matches, by exhaustive recursion over
// display plans and like realizations with memoization on market states.
double dp_optimal(const MarketInstance& inst, const PlatformDesign& design,
                  const DpOptions& opt = {});

// Expected matches from displaying `plan` in the current period followed by
// one final period of pure backlog harvesting. Exact (per-user independence).
double two_period_plan_value(const MarketInstance& inst, const MarketState& state,
                             const DisplayPlan& plan);

// Expected final-period harvest value of the backlog produced by the given
// first-period displays: sum of f over all like realizations, weighted by
// their probabilities. At most 20 directed views.
double exact_M2(const MarketInstance& inst, const DisplayPlan& plan);
double exact_M2_serial(const MarketInstance& inst, const DisplayPlan& plan);

// Best expected matches over policies that commit every initiation and mutual
// display up front and only harvest adaptively. Two periods, ground set of
// candidate displays capped at 8.
double semi_adaptive_optimal(const MarketInstance& inst, const PlatformDesign& design);

// Value of the best correlated backlog distribution with the same per-user
// arrival marginals as the displays (an upper bound on the independent one).
// Per-user displayed in-degree capped at 12.
double distribution_problem(const MarketInstance& inst, const DisplayPlan& plan);

// Value of the fractional harvest relaxation at the displays' marginals.
double relaxation_F(const MarketInstance& inst, const DisplayPlan& plan);

struct CorrelationGapReport {
  double m2 = 0.0;
  double g = 0.0;
  double f = 0.0;
  double ratio = 1.0;  // m2 / g, 1 when g is zero
  DisplayPlan plan;    // the planning-stage displays the report evaluates
};

// Solves the two-period display relaxation for the design, then evaluates the
// exact backlog value, the correlated bound and the fractional bound at its
// plan, asserting m2 >= (1-1/e) g and g >= f.
CorrelationGapReport correlation_gap_check(const MarketInstance& inst,
                                           const PlatformDesign& design);

// Optimal value when mutual displays stop after period one, divided by the
// optimal value when they are allowed in every period. Always in [0, 1].
double nonseq_second_period_ratio_probe(const MarketInstance& inst);

}  // namespace matchsim

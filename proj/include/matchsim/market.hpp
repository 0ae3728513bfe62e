#pragma once
// Domain model for a curated two-sided introduction market: instances,
// platform designs, per-period state, display plans and the stochastic
// like/match transition.
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "matchsim/rng.hpp"

namespace matchsim {

struct ValidationError : std::runtime_error {
  enum class Code {
    asymmetric_potentials,
    probability_out_of_range,
    backlog_not_subset,
    missing_probability,
  };
  Code code;
  ValidationError(Code c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

struct InfeasiblePlan : std::runtime_error {
  explicit InfeasiblePlan(const std::string& msg) : std::runtime_error(msg) {}
};

struct PlatformDesign {
  enum class Direction { one_from_i, one_from_j, two_directional };
  enum class Timing { sequential_only, nonseq_first_period, nonseq_all_periods };
  Direction direction = Direction::two_directional;
  Timing timing = Timing::sequential_only;

  bool allows_mutual(int period) const {
    switch (timing) {
      case Timing::sequential_only: return false;
      case Timing::nonseq_first_period: return period == 1;
      case Timing::nonseq_all_periods: return true;
    }
    return false;
  }
  std::string label() const;
  bool operator==(const PlatformDesign&) const = default;
};

// users are dense indices: side I occupies [0, n_i), side J occupies [n_i, n_i+n_j)
struct MarketInstance {
  int n_i = 0;
  int n_j = 0;
  int horizon = 2;
  std::vector<std::string> names;               // size n_i + n_j
  std::vector<int> capacity;                    // per user
  std::vector<std::vector<int>> potentials;     // per user, sorted partner ids
  std::vector<std::vector<double>> phi;         // phi[t-1][u * num_users() + v]
  std::vector<std::vector<int>> initial_backlog;  // per user, sorted
  PlatformDesign default_design;

  int num_users() const { return n_i + n_j; }
  bool is_i_side(int u) const { return u < n_i; }
  bool is_potential(int u, int v) const;
  double like_prob(int period, int viewer, int viewed) const {
    return phi[period - 1][viewer * num_users() + viewed];
  }
  double match_prob(int period, int u, int v) const {
    return like_prob(period, u, v) * like_prob(period, v, u);
  }
  bool time_homogeneous() const;
  bool initiates(const PlatformDesign& d, int u) const {
    if (d.direction == PlatformDesign::Direction::two_directional) return true;
    return (d.direction == PlatformDesign::Direction::one_from_i) == is_i_side(u);
  }
};

// throws ValidationError on the first problem found
void validate_instance(const MarketInstance& inst);

struct MarketState {
  int period = 1;
  std::vector<std::vector<int>> potentials;  // sorted
  std::vector<std::vector<int>> backlog;     // sorted, subset of potentials

  static MarketState initial(const MarketInstance& inst) {
    MarketState s{1, inst.potentials, inst.initial_backlog};
    if (s.backlog.empty()) s.backlog.assign(inst.num_users(), {});
    return s;
  }
  bool in_backlog(int user, int candidate) const;
};

// one period's displays: x = directed "viewer sees viewed", w = mutual pairs
// stored canonically as (I-side user, J-side user)
struct DisplayPlan {
  std::vector<std::pair<int, int>> x;
  std::vector<std::pair<int, int>> w;

  void normalize();  // sort + dedupe, canonical w orientation given n_i
  // every directed view the plan generates, x first then both directions of each w
  std::vector<std::pair<int, int>> views() const;
  int shows_count(int user) const;
  bool empty() const { return x.empty() && w.empty(); }
};

struct MatchRecord {
  int i_user = -1;
  int j_user = -1;
  int period = 0;
  bool sequential = true;
};

// realized like draws, aligned with plan.views() order
struct LikeDraw {
  std::vector<std::pair<int, int>> views;  // (viewer, viewed)
  std::vector<std::uint8_t> liked;
  bool liked_by(int viewer, int viewed) const;
};

LikeDraw sample_likes(const MarketInstance& inst, const DisplayPlan& plan, int period, Rng& rng);

// empty result means feasible; otherwise one message per violation
std::vector<std::string> plan_violations(const MarketInstance& inst, const PlatformDesign& design,
                                         const MarketState& state, const DisplayPlan& plan);
bool plan_is_feasible(const MarketInstance& inst, const PlatformDesign& design,
                      const MarketState& state, const DisplayPlan& plan);

struct TransitionResult {
  MarketState next;
  std::vector<MatchRecord> matches;
};

// applies the potential/backlog updating rules; throws InfeasiblePlan
TransitionResult transition(const MarketInstance& inst, const PlatformDesign& design,
                            const MarketState& state, const DisplayPlan& plan,
                            const LikeDraw& likes);

// probability that first-period sequential displays x produce exactly the
// backlog family B (mutual displays never feed backlogs and are not passed)
double backlog_probability(const MarketInstance& inst,
                           const std::vector<std::pair<int, int>>& x_displays,
                           const std::vector<std::vector<int>>& backlog_family);

}  // namespace matchsim

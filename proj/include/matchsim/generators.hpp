#pragma once
// Instance generators: three adversarial constructions with known analytic
// values plus a synthetic score-based market for the simulation experiments.
#include <map>
#include <stdexcept>
#include <string>

#include "matchsim/market.hpp"
#include "matchsim/rng.hpp"

namespace matchsim {

struct BadGeneratorParams : std::runtime_error {
  explicit BadGeneratorParams(const std::string& m) : std::runtime_error(m) {}
};

// n users per side, complete potentials, K = 1, second-period probabilities
// zero.  One receiver dominates every myopic score, so score-chasing earns
// 1.0 in expectation while spreading displays earns 1 + (n-1)(1-eps).
MarketInstance greedy_adversarial(int n, double eps);

// 2n users on side I, two on side J, complete potentials, K = 1, like probs
// p (I side) and q (J side) in both periods.  Matching mutual displays earns
// 4pq; a staggered schedule earns 2pq + 2q(1-(1-p)^n).
MarketInstance pm_adversarial(int n, double p, double q);

// fixed 2x2 instance whose final-period value, as a function of the realized
// backlog family, gains more from an extra member at a larger family when
// mutual displays stay available
MarketInstance nonsubmodular(double eps);

struct SyntheticParams {
  int n_i = 15;
  int n_j = 20;
  int horizon = 2;
  int capacity = 3;
  double density = 0.6;  // probability a cross-side pair knows about each other
  double alpha = 1.0;    // multiplies side-J like probabilities, clamped to [0,1]
};

// per-user attractiveness scores feeding a logistic link; side I likes freely
// (mean prob near 0.57), side J is selective (near 0.27)
MarketInstance synthetic(const SyntheticParams& params, Rng& rng);

// small random market for exhaustive cross-checks: uniform probabilities,
// capacities in [1, max_capacity], optional one-directional starting backlogs
MarketInstance random_instance(int n_i, int n_j, int horizon, int max_capacity, double density,
                               double backlog_rate, Rng& rng);

// string front end for the CLI; kind is one of greedy_adversarial,
// pm_adversarial, nonsubmodular, synthetic, random
MarketInstance generate_instance(const std::string& kind,
                                 const std::map<std::string, double>& params, Rng rng);

}  // namespace matchsim

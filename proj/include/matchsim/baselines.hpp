#pragma once

// Benchmark policies: per-user myopic score maximization (local greedy) and a
// per-period maximum-weight display problem (perfect matching).

#include "matchsim/policy.hpp"

namespace matchsim {

// Each user independently takes up to capacity profiles ranked by the like
// probability times the chance of a reply (1 for backlog members). Conflicting
// picks of the same pair become one mutual display when the design allows it.
class LocalGreedyPolicy : public Policy {
 public:
  std::string name() const override { return "local-greedy"; }
  void prepare(const MarketInstance& inst, const PlatformDesign& design) override;
  std::unique_ptr<PolicyRun> start_run(Rng rng) const override;

 private:
  const MarketInstance* inst_ = nullptr;
  PlatformDesign design_;
};

// Solves the current period's display problem to optimality (expected matches
// from backlog harvests plus mutual pairs) and nothing further ahead.
class PerfectMatchingPolicy : public Policy {
 public:
  std::string name() const override { return "perfect-matching"; }
  void prepare(const MarketInstance& inst, const PlatformDesign& design) override;
  std::unique_ptr<PolicyRun> start_run(Rng rng) const override;

 private:
  const MarketInstance* inst_ = nullptr;
  PlatformDesign design_;
};

}  // namespace matchsim

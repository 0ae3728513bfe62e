#pragma once
// Display-policy interface.  prepare() does the one-time work (solving a
// relaxation, running a greedy); start_run() hands out per-replication state
// so parallel replications never share anything mutable.
#include <memory>
#include <stdexcept>
#include <string>

#include "matchsim/market.hpp"
#include "matchsim/rng.hpp"

namespace matchsim {

struct IncompatibleAlgorithmDesign : std::runtime_error {
  explicit IncompatibleAlgorithmDesign(const std::string& m) : std::runtime_error(m) {}
};

class PolicyRun {
 public:
  virtual ~PolicyRun() = default;
  virtual DisplayPlan plan(const MarketState& state) = 0;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  virtual void prepare(const MarketInstance& inst, const PlatformDesign& design) = 0;
  // rng is only consumed by policies with a randomized component (rounding)
  virtual std::unique_ptr<PolicyRun> start_run(Rng rng) const = 0;
};

}  // namespace matchsim

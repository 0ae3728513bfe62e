#pragma once
// Monte Carlo simulation of a policy on a market, sensitivity sweeps and the
// CSV reports they produce.
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "matchsim/market.hpp"
#include "matchsim/policy.hpp"

namespace matchsim {

struct SimulationConfig {
  int replications = 100;
  std::uint64_t master_seed = 1;
};

struct ReplicationOutcome {
  int matches_total = 0;
  int matches_seq = 0;
  int matches_nonseq = 0;
  std::uint64_t seed = 0;  // stream seed this replication ran under
};

struct PolicyResult {
  std::string policy;
  std::string design;
  std::vector<ReplicationOutcome> outcomes;  // in replication order
  double mean = 0.0;
  double std_error = 0.0;
  double mean_seq = 0.0;
  double mean_nonseq = 0.0;
};

// replication r draws every random decision from a stream derived from
// (master_seed, r), so results are reproducible and independent of both
// thread count and scheduling
PolicyResult run_simulation(const MarketInstance& inst, const PlatformDesign& design,
                            Policy& policy, const SimulationConfig& config);

enum class SweepAxis { prob_scale, capacity };
enum class MarketSide { i, j };

struct SweepRow {
  double axis_value = 0.0;
  PolicyResult result;
};

// prob_scale multiplies the like probabilities of the chosen side's users by
// the axis value (clamped to [0,1]); capacity replaces their display budget
std::vector<SweepRow> sweep(const MarketInstance& inst, const PlatformDesign& design,
                            Policy& policy, SweepAxis axis, MarketSide side,
                            const std::vector<double>& values, const SimulationConfig& config);

void write_results_csv(std::ostream& out, const std::vector<PolicyResult>& results,
                       std::uint64_t master_seed, bool summary);
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows,
                     std::uint64_t master_seed, bool summary);

}  // namespace matchsim

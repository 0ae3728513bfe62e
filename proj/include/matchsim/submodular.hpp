#pragma once

// Matroid machinery for first-period display regions, plus the set-function
// maximization routines built on them: continuous greedy with dependent
// rounding, plain greedy over a matroid intersection, and local search.

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "matchsim/market.hpp"
#include "matchsim/policy.hpp"
#include "matchsim/rng.hpp"

namespace matchsim {

class IterationCapExceeded : public std::runtime_error {
 public:
  explicit IterationCapExceeded(const std::string& what) : std::runtime_error(what) {}
};

// One candidate first-period display. An arc shows user b to viewer a; an
// edge shows a pair (a on side I, b on side J) to each other simultaneously.
struct GroundElement {
  bool is_edge = false;
  int a = -1;
  int b = -1;
  bool operator==(const GroundElement&) const = default;
};

struct PartitionMatroid {
  std::vector<std::vector<int>> parts;  // disjoint element-index sets
  std::vector<int> budget;              // per part

  bool independent(const std::vector<char>& take) const;
};

struct LaminarMatroid {
  std::vector<std::vector<int>> sets;  // pairwise nested or disjoint
  std::vector<int> caps;

  bool independent(const std::vector<char>& take) const;
};

struct FeasibleRegion {
  std::vector<GroundElement> ground;
  std::vector<PartitionMatroid> partitions;
  std::optional<LaminarMatroid> laminar;

  int matroid_count() const {
    return (int)partitions.size() + (laminar.has_value() ? 1 : 0);
  }
  bool independent(const std::vector<char>& take) const;
  bool can_add(const std::vector<char>& take, int element) const;
};

// Region of feasible first-period plans for the given design, as a matroid
// intersection. Arcs toward a viewer's own initial backlog are left out;
// harvesting those is handled separately by the policies.
FeasibleRegion build_feasible_region(const MarketInstance& inst, const PlatformDesign& design);

// Expected matches over a two-period run of the display set: immediate
// mutual matches from edges plus the expected top-capacity harvest value of
// every user's resulting backlog. Exact (per-user independence).
double display_set_value(const MarketInstance& inst, const std::vector<GroundElement>& ground,
                         const std::vector<char>& take);

using SetOracle = std::function<double(const std::vector<char>&)>;

SetOracle make_display_value_oracle(const MarketInstance& inst,
                                    const std::vector<GroundElement>& ground);

struct MultilinearEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

// Monte Carlo estimate of the multilinear extension at z: each element is
// included independently with probability z[e].
MultilinearEstimate multilinear_estimate(const SetOracle& oracle, const std::vector<double>& z,
                                         int samples, Rng rng);

struct ContinuousGreedyOptions {
  int steps = 100;
  int gradient_samples = 128;
  bool exact_gradient = true;  // closed-form partial derivatives instead of sampling
};

struct ContinuousGreedyResult {
  std::vector<GroundElement> ground;  // all initiating arcs
  std::vector<double> z;              // like-arrival intensity per arc, in [0, phi]
  double value = 0.0;                 // expected matches at z
};

// Continuous greedy over the arrival-intensity polytope
// sum_j z_{i,j} / phi_{i,j} <= K_i, 0 <= z <= phi. One-directional
// sequential designs only.
ContinuousGreedyResult continuous_greedy(const MarketInstance& inst, const PlatformDesign& design,
                                         const ContinuousGreedyOptions& opt, Rng rng);

// Pairwise randomized rounding of one part's fractional vector. The output
// sum never exceeds the ceiling of the input sum and every coordinate keeps
// its fractional value in expectation.
std::vector<char> dependent_rounding(const std::vector<double>& fractional, Rng& rng);

// Adds the feasible element of largest positive marginal gain until no
// feasible element improves the value. Ties break by element index.
std::vector<char> greedy_matroid_intersection(const SetOracle& oracle,
                                              const FeasibleRegion& region);

struct LocalSearchOptions {
  long max_iterations = 200000;
};

// Starts from the greedy set and applies add, delete and swap moves
// (one element out, up to matroid_count elements in). A move is accepted
// when its gain exceeds (epsilon / |ground|^2) times the current value.
std::vector<char> local_search(const SetOracle& oracle, const FeasibleRegion& region,
                               double epsilon, const LocalSearchOptions& opt = {});

enum class SubmodularAlgorithm { continuous_greedy_rounded, greedy, local_search };

class SubmodularPolicy : public Policy {
 public:
  explicit SubmodularPolicy(SubmodularAlgorithm algorithm, double epsilon = 0.5)
      : algorithm_(algorithm), epsilon_(epsilon) {}

  std::string name() const override;
  void prepare(const MarketInstance& inst, const PlatformDesign& design) override;
  std::unique_ptr<PolicyRun> start_run(Rng rng) const override;

  const FeasibleRegion& region() const { return region_; }
  const std::vector<char>& chosen() const { return chosen_; }

 private:
  SubmodularAlgorithm algorithm_;
  double epsilon_;
  const MarketInstance* inst_ = nullptr;
  PlatformDesign design_;
  FeasibleRegion region_;
  std::vector<char> chosen_;               // greedy / local search outcome
  ContinuousGreedyResult cg_;              // continuous-greedy outcome
};

}  // namespace matchsim

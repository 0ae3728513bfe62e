#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "matchsim/baselines.hpp"
#include "matchsim/generators.hpp"
#include "matchsim/oracles.hpp"
#include "matchsim/simulate.hpp"
#include "test_support.hpp"

using namespace matchsim;
using testsupport::dsg;
using testsupport::make_market;
using testsupport::set_pair;

namespace {

DisplayPlan first_plan(Policy& policy, const MarketInstance& inst, const PlatformDesign& design) {
  policy.prepare(inst, design);
  return policy.start_run(Rng(1))->plan(MarketState::initial(inst));
}

int run_episode(const MarketInstance& inst, const PlatformDesign& design, Policy& policy,
                Rng rng) {
  auto run = policy.start_run(rng.split(0));
  Rng likes = rng.split(1);
  MarketState s = MarketState::initial(inst);
  int matches = 0;
  for (int t = 1; t <= inst.horizon; ++t) {
    DisplayPlan p = run->plan(s);
    auto viol = plan_violations(inst, design, s, p);
    for (auto& v : viol) FAIL_CHECK(policy.name() << " period " << t << ": " << v);
    auto res = transition(inst, design, s, p, sample_likes(inst, p, t, likes));
    matches += (int)res.matches.size();
    s = res.next;
  }
  return matches;
}

}  // namespace

// ladder market, n = 4: pair (i, j0) likes with probability 1 both ways, all
// other pairs sqrt(0.81) = 0.9 per direction, and nothing likes in period 2
TEST_CASE("greedy merges conflicting picks into one mutual display") {
  MarketInstance inst = greedy_adversarial(4, 0.19);
  PlatformDesign d = dsg("two/nonseq-first");
  LocalGreedyPolicy lg;
  CHECK(lg.name() == "local-greedy");
  DisplayPlan p = first_plan(lg, inst, d);

  // every i ranks j0 first; j0 then folds its own top pick i0 into a mutual
  // display, and the remaining j's fall back to showing i0 one-sidedly
  CHECK(p.w == std::vector<std::pair<int, int>>{{0, 4}});
  CHECK(p.x == std::vector<std::pair<int, int>>{{1, 4}, {2, 4}, {3, 4}, {5, 0}, {6, 0}, {7, 0}});
  CHECK(plan_is_feasible(inst, d, MarketState::initial(inst), p));
  CHECK(two_period_plan_value(inst, MarketState::initial(inst), p) == doctest::Approx(1.0));

  // the one mutual pair matches surely, every other like strands in a backlog
  SimulationConfig cfg{200, 99};
  PolicyResult res = run_simulation(inst, d, lg, cfg);
  CHECK(res.mean == 1.0);
  CHECK(res.std_error == 0.0);
  CHECK(res.mean_nonseq == 1.0);
  CHECK(res.mean_seq == 0.0);
  for (auto& o : res.outcomes) CHECK(o.matches_total == 1);
}

TEST_CASE("sequential designs make the greedy skip contested pairs") {
  MarketInstance inst = greedy_adversarial(4, 0.19);
  LocalGreedyPolicy lg;

  // two-directional: all of j0's candidates are already showing j0, and with
  // no mutual window the conflicts are dropped rather than merged
  DisplayPlan p = first_plan(lg, inst, dsg("two/seq"));
  CHECK(p.w.empty());
  CHECK(p.x == std::vector<std::pair<int, int>>{
                   {0, 4}, {1, 4}, {2, 4}, {3, 4}, {5, 0}, {6, 0}, {7, 0}});

  // one-directional: the responding side has no backlog yet, so only i shows
  DisplayPlan q = first_plan(lg, inst, dsg("one-i/seq"));
  CHECK(q.w.empty());
  CHECK(q.x == std::vector<std::pair<int, int>>{{0, 4}, {1, 4}, {2, 4}, {3, 4}});

  // nothing can match inside the horizon: likes pile up, period 2 pays zero
  SimulationConfig cfg{50, 7};
  PolicyResult res = run_simulation(inst, dsg("two/seq"), lg, cfg);
  CHECK(res.mean == 0.0);
  CHECK(res.std_error == 0.0);
}

TEST_CASE("zero-probability candidates are never displayed") {
  MarketInstance inst = make_market(1, 2, 2, 1);
  set_pair(inst, 0, 1, 0.0, 0.5);
  set_pair(inst, 0, 2, 0.3, 0.4);
  LocalGreedyPolicy lg;
  DisplayPlan p = first_plan(lg, inst, dsg("one-i/seq"));
  CHECK(p.x == std::vector<std::pair<int, int>>{{0, 2}});
  CHECK(p.w.empty());

  MarketInstance dead = make_market(1, 1, 2, 1);  // all probabilities zero
  CHECK(first_plan(lg, dead, dsg("two/nonseq-all")).empty());
  PerfectMatchingPolicy pm;
  CHECK(first_plan(pm, dead, dsg("two/nonseq-all")).empty());
}

TEST_CASE("backlog members count as certain replies in the greedy ranking") {
  // i0 holds j0: harvesting pays 0.4 against 0.6 * 0.5 = 0.3 for fresh j1
  MarketInstance inst = make_market(1, 2, 2, 1);
  inst.initial_backlog[0] = {1};
  set_pair(inst, 0, 1, 0.4, 0.9);
  set_pair(inst, 0, 2, 0.6, 0.5);
  LocalGreedyPolicy lg;
  CHECK(first_plan(lg, inst, dsg("one-i/seq")).x ==
        std::vector<std::pair<int, int>>{{0, 1}});

  // a likelier reply flips the ranking toward the fresh pair
  set_pair(inst, 0, 2, 0.6, 0.9);
  CHECK(first_plan(lg, inst, dsg("one-i/seq")).x ==
        std::vector<std::pair<int, int>>{{0, 2}});
}

TEST_CASE("the responding side harvests its backlog") {
  MarketInstance inst = make_market(1, 2, 2, 1);
  inst.initial_backlog[1] = {0};  // j0 waits on i0's earlier like
  set_pair(inst, 0, 1, 0.0, 0.7);
  set_pair(inst, 0, 2, 0.3, 0.4);
  LocalGreedyPolicy lg;
  DisplayPlan p = first_plan(lg, inst, dsg("one-i/seq"));
  CHECK(p.x == std::vector<std::pair<int, int>>{{0, 2}, {1, 0}});
  CHECK(p.w.empty());

  // when the initiator also wants the held pair, sequential play drops the
  // harvest and a mutual window folds both picks into one display
  MarketInstance tug = make_market(1, 1, 2, 1);
  tug.initial_backlog[1] = {0};
  set_pair(tug, 0, 1, 0.3, 0.7);
  DisplayPlan seq = first_plan(lg, tug, dsg("one-i/seq"));
  CHECK(seq.x == std::vector<std::pair<int, int>>{{0, 1}});
  DisplayPlan merged = first_plan(lg, tug, dsg("one-i/nonseq-first"));
  CHECK(merged.x.empty());
  CHECK(merged.w == std::vector<std::pair<int, int>>{{0, 1}});
}

TEST_CASE("per-period optimum covers the ladder with disjoint pairs") {
  MarketInstance inst = greedy_adversarial(4, 0.19);
  PlatformDesign d = dsg("two/nonseq-first");
  PerfectMatchingPolicy pm;
  CHECK(pm.name() == "perfect-matching");
  DisplayPlan p = first_plan(pm, inst, d);
  CHECK(p.x.empty());
  CHECK(p.w.size() == 4);
  std::vector<int> uses(inst.num_users(), 0);
  double value = 0.0;
  for (auto& [i, j] : p.w) {
    ++uses[i];
    ++uses[j];
    value += inst.match_prob(1, i, j);
  }
  CHECK(std::all_of(uses.begin(), uses.end(), [](int c) { return c == 1; }));
  CHECK(value == doctest::Approx(1.0 + 3 * 0.81));

  SimulationConfig cfg{1500, 11};
  PolicyResult res = run_simulation(inst, d, pm, cfg);
  CHECK(std::abs(res.mean - value) <= 4 * res.std_error + 1e-9);
  CHECK(res.std_error > 0.0);
  CHECK(res.mean_seq == 0.0);  // period 2 probabilities are zero
}

TEST_CASE("per-period optimum plans nothing under a sequential-only design") {
  MarketInstance inst = greedy_adversarial(4, 0.19);
  PerfectMatchingPolicy pm;
  CHECK(first_plan(pm, inst, dsg("two/seq")).empty());
  SimulationConfig cfg{50, 13};
  PolicyResult res = run_simulation(inst, dsg("two/seq"), pm, cfg);
  CHECK(res.mean == 0.0);
  CHECK(res.std_error == 0.0);
}

// six i-users compete for two j-slots; a mutual display settles its pair in
// every outcome, so myopic pairing leaves nothing behind to harvest
TEST_CASE("crowded market: mutual windows set the per-period optimum's pace") {
  MarketInstance inst = pm_adversarial(3, 0.5, 0.5);
  PlatformDesign d = dsg("two/nonseq-first");
  PerfectMatchingPolicy pm;
  DisplayPlan p = first_plan(pm, inst, d);
  CHECK(p.x.empty());
  CHECK(p.w.size() == 2);
  std::vector<int> users;
  double value = 0.0;
  for (auto& [i, j] : p.w) {
    users.push_back(i);
    users.push_back(j);
    value += inst.match_prob(1, i, j);
  }
  std::sort(users.begin(), users.end());
  CHECK(std::unique(users.begin(), users.end()) == users.end());
  CHECK((users[2] == 6 || users[3] == 7));  // both j-users are occupied
  CHECK(value == doctest::Approx(0.5));

  // a disliked mutual display is a settled pair, not a pending like: no
  // backlog forms, and with the window closed period 2 has nothing to show
  auto run = pm.start_run(Rng(3));
  Rng likes(4);
  MarketState s0 = MarketState::initial(inst);
  DisplayPlan p1 = run->plan(s0);
  MarketState s1 = transition(inst, d, s0, p1, sample_likes(inst, p1, 1, likes)).next;
  for (auto& b : s1.backlog) CHECK(b.empty());
  CHECK(run->plan(s1).empty());

  SimulationConfig cfg{2000, 17};
  PolicyResult res = run_simulation(inst, d, pm, cfg);
  CHECK(std::abs(res.mean - 0.5) <= 4 * res.std_error + 1e-9);
  CHECK(res.std_error > 0.0);
  CHECK(res.mean_seq == 0.0);

  // an every-period window lets the policy pair two fresh i's again
  PolicyResult all = run_simulation(inst, dsg("two/nonseq-all"), pm, cfg);
  CHECK(std::abs(all.mean - 1.0) <= 4 * all.std_error + 1e-9);
  CHECK(all.mean_seq == 0.0);
  CHECK(all.mean_nonseq == doctest::Approx(all.mean));
}

TEST_CASE("benchmark policies stay feasible on random markets") {
  const char* designs[] = {"one-i/seq",  "one-i/nonseq-first", "one-i/nonseq-all",
                           "one-j/seq",  "one-j/nonseq-first", "one-j/nonseq-all",
                           "two/seq",    "two/nonseq-first",   "two/nonseq-all"};
  Rng rng(4100);
  for (int trial = 0; trial < 12; ++trial) {
    Rng gen = rng.split(trial);
    MarketInstance inst =
        random_instance(2 + (int)gen.uniform_int(3), 2 + (int)gen.uniform_int(3),
                        2 + trial % 2, 2, 0.8, 0.3, gen);
    for (const char* label : designs) {
      PlatformDesign d = dsg(label);
      LocalGreedyPolicy lg;
      lg.prepare(inst, d);
      run_episode(inst, d, lg, gen.split(1));
      PerfectMatchingPolicy pm;
      pm.prepare(inst, d);
      run_episode(inst, d, pm, gen.split(2));
    }
  }
}

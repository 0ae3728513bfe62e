#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "matchsim/generators.hpp"
#include "matchsim/oracles.hpp"
#include "test_support.hpp"

using namespace matchsim;
using testsupport::dsg;
using testsupport::make_market;
using testsupport::random_feasible_plan;
using testsupport::set_pair;
using testsupport::set_phi;

namespace {

// expected matches banked in the displayed period itself
double immediate_value(const MarketInstance& inst, const MarketState& s, const DisplayPlan& p) {
  double v = 0.0;
  for (auto& [a, b] : p.x)
    if (s.in_backlog(a, b)) v += inst.like_prob(s.period, a, b);
  for (auto& [i, j] : p.w) v += inst.match_prob(s.period, i, j);
  return v;
}

MarketInstance tiny_random(Rng& gen, double backlog_rate) {
  return random_instance(2 + (int)gen.uniform_int(2), 2 + (int)gen.uniform_int(2), 2, 2, 0.8,
                         backlog_rate, gen);
}

}  // namespace

TEST_CASE("adaptive optimum on a single pair by hand") {
  MarketInstance inst = make_market(1, 1, 2, 1);
  set_phi(inst, 1, 0, 1, 0.6);
  set_phi(inst, 1, 1, 0, 0.7);
  set_phi(inst, 2, 0, 1, 0.5);
  set_phi(inst, 2, 1, 0, 0.3);
  // candidate plays: match now (0.6 * 0.7), or show one way and harvest the
  // like next period (0.6 * 0.3 from i, 0.7 * 0.5 from j)
  CHECK(dp_optimal(inst, dsg("two/nonseq-all")) == doctest::Approx(0.42));
  CHECK(dp_optimal(inst, dsg("two/nonseq-first")) == doctest::Approx(0.42));
  CHECK(dp_optimal(inst, dsg("two/seq")) == doctest::Approx(0.35));
  CHECK(dp_optimal(inst, dsg("one-i/seq")) == doctest::Approx(0.18));
  CHECK(dp_optimal(inst, dsg("one-j/seq")) == doctest::Approx(0.35));
}

TEST_CASE("waiting can beat an immediate harvest") {
  MarketInstance inst = make_market(1, 1, 2, 1);
  inst.initial_backlog[1] = {0};  // j already has i's like in hand
  set_phi(inst, 1, 0, 1, 0.9);
  set_phi(inst, 1, 1, 0, 0.2);
  set_phi(inst, 2, 0, 1, 0.3);
  set_phi(inst, 2, 1, 0, 0.55);
  // harvesting now pays 0.2; sitting on the like until period 2 pays 0.55
  CHECK(dp_optimal(inst, dsg("one-i/seq")) == doctest::Approx(0.55));
  set_phi(inst, 1, 1, 0, 0.8);
  CHECK(dp_optimal(inst, dsg("one-i/seq")) == doctest::Approx(0.8));
}

TEST_CASE("stranded likes pay the final-period harvest exactly") {
  MarketInstance fan = make_market(1, 2, 2, 2);
  set_pair(fan, 0, 1, 0.6, 0.0);
  set_pair(fan, 0, 2, 0.3, 0.0);
  set_phi(fan, 2, 1, 0, 0.5);
  set_phi(fan, 2, 2, 0, 0.8);
  DisplayPlan spread;
  spread.x = {{0, 1}, {0, 2}};
  CHECK(exact_M2(fan, spread) == doctest::Approx(0.6 * 0.5 + 0.3 * 0.8));

  // two likers can land on one display slot; only the better one is kept
  MarketInstance race = make_market(2, 1, 2, 1);
  set_pair(race, 0, 2, 0.5, 0.0);
  set_pair(race, 1, 2, 0.5, 0.0);
  set_phi(race, 2, 2, 0, 0.4);
  set_phi(race, 2, 2, 1, 0.9);
  DisplayPlan both;
  both.x = {{0, 2}, {1, 2}};
  CHECK(exact_M2(race, both) == doctest::Approx(0.25 * 0.9 + 0.25 * 0.4 + 0.25 * 0.9));
  CHECK(exact_M2(race, both) == exact_M2_serial(race, both));
}

TEST_CASE("plan value splits into immediate and harvest parts") {
  const char* designs[] = {"one-i/seq", "one-j/nonseq-first", "two/seq", "two/nonseq-first",
                           "two/nonseq-all"};
  Rng rng(501);
  for (int trial = 0; trial < 40; ++trial) {
    Rng gen = rng.split(trial);
    MarketInstance inst = tiny_random(gen, 0.4);
    PlatformDesign d = dsg(designs[trial % 5]);
    MarketState s0 = MarketState::initial(inst);
    DisplayPlan plan = random_feasible_plan(inst, d, s0, gen, 0.6);
    double parallel = exact_M2(inst, plan);
    CHECK(parallel == exact_M2_serial(inst, plan));
    CHECK(two_period_plan_value(inst, s0, plan) ==
          doctest::Approx(immediate_value(inst, s0, plan) + parallel).epsilon(1e-9));
  }
}

TEST_CASE("re-viewing a pending pair re-rolls its like") {
  MarketInstance inst = make_market(1, 1, 2, 1);
  inst.initial_backlog[1] = {0};
  set_phi(inst, 1, 0, 1, 0.6);
  set_phi(inst, 1, 1, 0, 0.9);
  set_phi(inst, 2, 0, 1, 0.2);
  set_phi(inst, 2, 1, 0, 0.5);
  DisplayPlan p;
  p.x = {{0, 1}};  // i gets shown j again while j still holds i's like
  MarketState s0 = MarketState::initial(inst);
  // a fresh dislike would evict the pending like, so the harvest is 0.6 * 0.5,
  // not the 0.5 a certain backlog would pay
  CHECK(two_period_plan_value(inst, s0, p) == doctest::Approx(0.6 * 0.5));
  CHECK(two_period_plan_value(inst, s0, p) == doctest::Approx(exact_M2(inst, p)));
}

TEST_CASE("full outcome branching agrees with the separable shortcut") {
  const char* designs[] = {"two/seq", "one-i/seq", "two/nonseq-first"};
  Rng rng(733);
  for (int trial = 0; trial < 6; ++trial) {
    Rng gen = rng.split(trial);
    MarketInstance inst = random_instance(2, 2 + (int)gen.uniform_int(2), 2, 2, 0.8, 0.3, gen);
    PlatformDesign d = dsg(designs[trial % 3]);
    DpOptions full;
    full.force_full_branching = true;
    CHECK(dp_optimal(inst, d, full) == doctest::Approx(dp_optimal(inst, d)).epsilon(1e-9));
  }
}

TEST_CASE("no committed plan beats the adaptive optimum") {
  const char* designs[] = {"one-i/seq", "two/nonseq-first", "two/seq"};
  Rng rng(811);
  for (int trial = 0; trial < 10; ++trial) {
    Rng gen = rng.split(trial);
    MarketInstance inst = tiny_random(gen, 0.3);
    PlatformDesign d = dsg(designs[trial % 3]);
    double opt = dp_optimal(inst, d);
    MarketState s0 = MarketState::initial(inst);
    for (int k = 0; k < 3; ++k) {
      DisplayPlan plan = random_feasible_plan(inst, d, s0, gen, 0.5);
      CHECK(opt + 1e-9 >= two_period_plan_value(inst, s0, plan));
    }
  }
}

TEST_CASE("committing the displays up front loses nothing without a final mutual window") {
  MarketInstance inst = make_market(2, 2, 2, 1);
  set_pair(inst, 0, 2, 0.7, 0.4);
  set_pair(inst, 0, 3, 0.5, 0.9);
  set_pair(inst, 1, 2, 0.3, 0.8);
  set_pair(inst, 1, 3, 0.6, 0.2);
  set_phi(inst, 2, 2, 0, 0.65);
  set_phi(inst, 2, 3, 1, 0.35);
  CHECK(semi_adaptive_optimal(inst, dsg("one-i/seq")) ==
        doctest::Approx(dp_optimal(inst, dsg("one-i/seq"))).epsilon(1e-9));
  CHECK(semi_adaptive_optimal(inst, dsg("two/seq")) ==
        doctest::Approx(dp_optimal(inst, dsg("two/seq"))).epsilon(1e-9));

  // a pending like in the mix: the commitment may re-view the pair or leave
  // the harvest for either period, still matching the adaptive optimum
  inst.initial_backlog[2] = {0};
  CHECK(semi_adaptive_optimal(inst, dsg("one-i/seq")) ==
        doctest::Approx(dp_optimal(inst, dsg("one-i/seq"))).epsilon(1e-9));

  // with a second mutual window adaptivity can only help
  MarketInstance fork = make_market(1, 2, 2, 1);
  set_pair(fork, 0, 1, 0.9, 0.9);
  set_pair(fork, 0, 2, 0.5, 0.5);
  CHECK(semi_adaptive_optimal(fork, dsg("two/nonseq-all")) <=
        dp_optimal(fork, dsg("two/nonseq-all")) + 1e-9);
}

TEST_CASE("bound ladder on the relaxation plan") {
  const char* designs[] = {"one-i/seq", "one-i/nonseq-first", "two/seq", "two/nonseq-first"};
  const double guarantee = 1.0 - 1.0 / std::exp(1.0);
  Rng rng(977);
  for (int trial = 0; trial < 24; ++trial) {
    Rng gen = rng.split(trial);
    MarketInstance inst = tiny_random(gen, 0.3);
    PlatformDesign d = dsg(designs[trial % 4]);
    CorrelationGapReport rep = correlation_gap_check(inst, d);
    CHECK(plan_is_feasible(inst, d, MarketState::initial(inst), rep.plan));
    CHECK(rep.m2 == doctest::Approx(exact_M2(inst, rep.plan)));
    CHECK(rep.g == doctest::Approx(distribution_problem(inst, rep.plan)));
    CHECK(rep.f == doctest::Approx(relaxation_F(inst, rep.plan)));
    CHECK(rep.m2 <= rep.g + 1e-9);
    CHECK(rep.g >= rep.f - 1e-9);
    CHECK(rep.ratio >= guarantee - 1e-9);
    CHECK(rep.ratio <= 1.0 + 1e-9);
  }
}

TEST_CASE("correlated backlogs strictly beat independent ones") {
  MarketInstance race = make_market(2, 1, 2, 1);
  set_pair(race, 0, 2, 0.5, 0.0);
  set_pair(race, 1, 2, 0.5, 0.0);
  set_phi(race, 2, 2, 0, 0.4);
  set_phi(race, 2, 2, 1, 0.9);
  DisplayPlan both;
  both.x = {{0, 2}, {1, 2}};
  // anti-correlating the two arrivals always fills j's single slot
  CHECK(distribution_problem(race, both) == doctest::Approx(0.65));
  CHECK(relaxation_F(race, both) == doctest::Approx(0.65));
  CHECK(exact_M2(race, both) == doctest::Approx(0.55));
}

TEST_CASE("oversize inputs are hard errors") {
  MarketInstance wide = make_market(17, 16, 2, 1);
  CHECK_THROWS_AS((void)dp_optimal(wide, dsg("one-i/seq")), StateSpaceTooLarge);

  Rng gen(31);
  MarketInstance inst = random_instance(3, 3, 2, 2, 0.9, 0.2, gen);
  DpOptions strict;
  strict.node_cap = 3;
  CHECK_THROWS_AS((void)dp_optimal(inst, dsg("two/nonseq-all"), strict), StateSpaceTooLarge);

  MarketInstance broad = make_market(3, 7, 2, 7);
  DisplayPlan all_arcs;
  for (int i = 0; i < 3; ++i)
    for (int j = 3; j < 10; ++j) all_arcs.x.push_back({i, j});
  CHECK_THROWS_AS((void)exact_M2(broad, all_arcs), TooManyEdges);

  MarketInstance crowd = make_market(13, 1, 2, 2);
  DisplayPlan pile;
  for (int i = 0; i < 13; ++i) pile.x.push_back({i, 13});
  CHECK_THROWS_AS((void)distribution_problem(crowd, pile), TooManyEdges);

  MarketInstance square = make_market(2, 2, 2, 1);
  CHECK_THROWS_AS((void)semi_adaptive_optimal(square, dsg("two/nonseq-first")),
                  StateSpaceTooLarge);
  MarketInstance longer = make_market(1, 1, 3, 1);
  CHECK_THROWS_AS((void)semi_adaptive_optimal(longer, dsg("one-i/seq")), std::invalid_argument);

  MarketInstance pairm = make_market(1, 1, 2, 1);
  MarketState last = MarketState::initial(pairm);
  last.period = 2;
  CHECK_THROWS_AS((void)two_period_plan_value(pairm, last, DisplayPlan{}), std::invalid_argument);
}

TEST_CASE("value of keeping the mutual window open") {
  // period-2 probabilities are zero, so closing the window after period 1
  // costs nothing
  CHECK(nonseq_second_period_ratio_probe(greedy_adversarial(3, 0.1)) == doctest::Approx(1.0));

  // all the value sits in period 2: an early-only window forces a weak
  // period-1 initiation instead of the strong late mutual display
  MarketInstance late = make_market(1, 1, 2, 1);
  set_pair(late, 0, 1, 0.3, 0.3);
  set_phi(late, 2, 0, 1, 0.9);
  set_phi(late, 2, 1, 0, 0.9);
  double r = nonseq_second_period_ratio_probe(late);
  CHECK(r == doctest::Approx(0.27 / 0.81));

  Rng rng(1202);
  for (int trial = 0; trial < 6; ++trial) {
    Rng gen = rng.split(trial);
    MarketInstance inst = random_instance(2, 2 + (int)gen.uniform_int(2), 2, 2, 0.8, 0.2, gen);
    double ratio = nonseq_second_period_ratio_probe(inst);
    CHECK(ratio >= 0.0);
    CHECK(ratio <= 1.0 + 1e-9);
  }
}

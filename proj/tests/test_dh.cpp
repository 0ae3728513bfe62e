#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <vector>

#include "matchsim/dh.hpp"
#include "matchsim/generators.hpp"
#include "matchsim/second_stage.hpp"
#include "test_support.hpp"

using namespace matchsim;
using testsupport::dsg;
using testsupport::make_market;
using testsupport::set_pair;

namespace {

// drive a policy through a full episode, checking every emitted plan
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
    LikeDraw draw = sample_likes(inst, p, t, likes);
    auto res = transition(inst, design, s, p, draw);
    matches += (int)res.matches.size();
    s = res.next;
  }
  return matches;
}

}  // namespace

TEST_CASE("two-period model has the expected variable layout") {
  MarketInstance inst = make_market(2, 2, 2, 1);
  DhModel m = build_dh_relaxation(inst, dsg("two/nonseq-first"), DhForm::two_period);
  CHECK(m.x_vars.size() == 8);   // every user can initiate toward both partners
  CHECK(m.w_vars.size() == 4);   // one per cross pair
  CHECK(m.y_vars.size() == 8);   // a harvest shadow per directed arc
  CHECK(m.mip.integer_vars.size() == 12);  // displays are integer, harvests are not
  CHECK(m.w_base == 8);
  CHECK(m.y_base == 12);

  DhModel oned = build_dh_relaxation(inst, dsg("one-i/seq"), DhForm::two_period);
  CHECK(oned.x_vars.size() == 4);  // only the I side initiates
  CHECK(oned.w_vars.empty());
  CHECK(oned.y_vars.size() == 4);  // only J users can hold a backlog
  for (auto& [u, v] : oned.x_vars) CHECK(inst.is_i_side(u));
  for (auto& [u, v] : oned.y_vars) CHECK_FALSE(inst.is_i_side(u));
}

TEST_CASE("initial backlog members can be settled now or held for later") {
  MarketInstance inst = make_market(2, 2, 2, 1);
  set_pair(inst, 0, 2, 0.5, 0.5);
  inst.initial_backlog.assign(4, {});
  inst.initial_backlog[2] = {0};  // i0 already liked j0
  DhModel m = build_dh_relaxation(inst, dsg("two/nonseq-first"), DhForm::two_period);
  // the waiting edge gets a settle-now display and a hold variable, but no
  // mutual pair; both periods are on offer, never twice
  CHECK(std::count(m.x_vars.begin(), m.x_vars.end(), std::pair<int, int>{2, 0}) == 1);
  for (auto& [i, j] : m.w_vars) CHECK_FALSE((i == 0 && j == 2));
  CHECK(std::count(m.y_vars.begin(), m.y_vars.end(), std::pair<int, int>{2, 0}) == 1);

  auto solved_with = [&](double now, double later) {
    testsupport::set_phi(inst, 1, 2, 0, now);
    testsupport::set_phi(inst, 2, 2, 0, later);
    DhModel probe = build_dh_relaxation(inst, dsg("two/nonseq-first"), DhForm::two_period);
    return solve_dh_relaxation(probe);
  };
  DhRelaxationSolution settle = solved_with(0.9, 0.1);
  CHECK(settle.objective == doctest::Approx(0.9));
  CHECK(std::count(settle.x.begin(), settle.x.end(), std::pair<int, int>{2, 0}) == 1);
  DhRelaxationSolution hold = solved_with(0.1, 0.9);
  CHECK(hold.objective == doctest::Approx(0.9));
  CHECK(std::count(hold.x.begin(), hold.x.end(), std::pair<int, int>{2, 0}) == 0);
}

TEST_CASE("form preconditions") {
  MarketInstance inst = make_market(2, 2, 3, 1);
  CHECK_THROWS_AS(build_dh_relaxation(inst, dsg("two/seq"), DhForm::two_period),
                  std::invalid_argument);
  testsupport::set_phi(inst, 2, 0, 2, 0.4);
  CHECK_THROWS_AS(build_dh_relaxation(inst, dsg("two/seq"), DhForm::multi_period),
                  TimeInhomogeneousMultiPeriod);
}

TEST_CASE("relaxation value on the score-chasing worst case") {
  // one popular receiver per side; the relaxation must find the spread
  // matching worth 1 + (n-1)(1-eps)
  MarketInstance inst = greedy_adversarial(3, 0.1);
  DhModel m = build_dh_relaxation(inst, dsg("two/nonseq-all"), DhForm::two_period);
  DhRelaxationSolution sol = solve_dh_relaxation(m);
  CHECK(sol.objective == doctest::Approx(1.0 + 2 * 0.9).epsilon(1e-9));
  CHECK(sol.proven);
  CHECK(sol.upper_bound == doctest::Approx(sol.objective));
  CHECK(sol.w.size() == 3);
  CHECK(sol.x.empty());  // second-period probabilities are zero, arcs are useless
}

TEST_CASE("relaxation upper-bounds the staggered alternative plan") {
  MarketInstance inst = pm_adversarial(3, 0.5, 0.5);
  DhModel m = build_dh_relaxation(inst, dsg("two/nonseq-all"), DhForm::two_period);
  DhRelaxationSolution sol = solve_dh_relaxation(m);
  CHECK(sol.proven);
  CHECK(sol.objective >= 1.375 - 1e-9);
}

TEST_CASE("the no-mutual variant never plans pair displays") {
  MarketInstance inst = greedy_adversarial(3, 0.1);
  DhIntegralPolicy dh(DhVariant::none);
  dh.prepare(inst, dsg("two/nonseq-all"));
  CHECK(dh.relaxation().w.empty());
  auto run = dh.start_run(Rng(1));
  DisplayPlan p = run->plan(MarketState::initial(inst));
  CHECK(p.w.empty());
}

TEST_CASE("first-period plan mirrors the solved displays") {
  MarketInstance inst = greedy_adversarial(3, 0.1);
  DhIntegralPolicy dh(DhVariant::first);
  dh.prepare(inst, dsg("two/nonseq-all"));
  const DhRelaxationSolution& sol = dh.relaxation();
  double planned = 0.0;
  for (auto& [i, j] : sol.w) planned += inst.match_prob(1, i, j);
  CHECK(planned == doctest::Approx(2.8));

  auto run = dh.start_run(Rng(1));
  MarketState s = MarketState::initial(inst);
  DisplayPlan p = run->plan(s);
  CHECK(plan_is_feasible(inst, dsg("two/nonseq-all"), s, p));
  CHECK(p.w.size() == 3);
}

TEST_CASE("variant behavior in the final period") {
  Rng rng(11);
  MarketInstance inst = random_instance(3, 3, 2, 2, 0.8, 0.2, rng);
  PlatformDesign d = dsg("two/nonseq-all");

  DhIntegralPolicy first(DhVariant::first);
  first.prepare(inst, d);
  DhIntegralPolicy both(DhVariant::both);
  both.prepare(inst, d);

  // walk to a second-period state
  auto run = first.start_run(Rng(2));
  MarketState s = MarketState::initial(inst);
  DisplayPlan p1 = run->plan(s);
  Rng likes(3);
  MarketState s2 = transition(inst, d, s, p1, sample_likes(inst, p1, 1, likes)).next;

  DisplayPlan pf = first.start_run(Rng(4))->plan(s2);
  s2.period = 2;
  pf = first.start_run(Rng(4))->plan(s2);
  CHECK(pf.w.empty());  // keeps harvesting even though the design would allow pairs
  for (auto& [u, v] : pf.x) CHECK(s2.in_backlog(u, v));

  DisplayPlan pb = both.start_run(Rng(5))->plan(s2);
  SecondStageSolution ref = solve_second_general(inst, d, s2);
  CHECK(pb.x == ref.plan.x);
  CHECK(pb.w == ref.plan.w);
}

TEST_CASE("dh-both needs a final-period mutual window") {
  MarketInstance inst = make_market(2, 2, 2, 1);
  DhIntegralPolicy both(DhVariant::both);
  CHECK_THROWS_AS(both.prepare(inst, dsg("two/nonseq-first")), IncompatibleAlgorithmDesign);
  CHECK_NOTHROW(both.prepare(inst, dsg("two/nonseq-all")));
}

TEST_CASE("two-period policies reject longer horizons") {
  MarketInstance inst = make_market(2, 2, 3, 1);
  DhIntegralPolicy dh(DhVariant::none);
  CHECK_THROWS_AS(dh.prepare(inst, dsg("two/seq")), std::invalid_argument);
}

TEST_CASE("policy plans stay feasible across random episodes") {
  Rng rng(2000);
  for (int trial = 0; trial < 20; ++trial) {
    Rng gen = rng.split(trial);
    MarketInstance inst = random_instance(2 + (int)gen.uniform_int(2), 2 + (int)gen.uniform_int(2),
                                          2, 2, 0.8, 0.3, gen);
    for (const char* label : {"two/seq", "two/nonseq-first", "two/nonseq-all", "one-i/seq",
                              "one-i/nonseq-first"}) {
      PlatformDesign d = dsg(label);
      DhIntegralPolicy none(DhVariant::none);
      none.prepare(inst, d);
      run_episode(inst, d, none, gen.split(1));
      DhIntegralPolicy first(DhVariant::first);
      first.prepare(inst, d);
      run_episode(inst, d, first, gen.split(2));
      DhFractionalPolicy frac(DhVariant::first);
      frac.prepare(inst, d);
      run_episode(inst, d, frac, gen.split(3));
      CHECK(none.relaxation().proven);
      CHECK(first.relaxation().proven);
    }
  }
}

TEST_CASE("multi-period policy spreads a long-horizon plan feasibly") {
  Rng rng(3000);
  for (int trial = 0; trial < 10; ++trial) {
    Rng gen = rng.split(trial);
    MarketInstance base = random_instance(3, 3, 1, 2, 0.8, 0.0, gen);
    MarketInstance inst = base;
    inst.horizon = 3;
    inst.phi.assign(3, base.phi[0]);
    validate_instance(inst);
    for (const char* label : {"two/seq", "two/nonseq-all"}) {
      PlatformDesign d = dsg(label);
      DhMultiPeriodPolicy multi(DhVariant::first);
      multi.prepare(inst, d);
      run_episode(inst, d, multi, gen.split(1));
      CHECK(multi.relaxation().proven);
      CHECK(multi.relaxation().upper_bound ==
            doctest::Approx(multi.relaxation().objective));
    }
  }
}

TEST_CASE("rounded one-directional policy") {
  Rng rng(4000);
  MarketInstance base = random_instance(3, 4, 1, 2, 0.9, 0.0, rng);
  MarketInstance inst = base;
  inst.horizon = 3;
  inst.phi.assign(3, base.phi[0]);
  validate_instance(inst);

  DhOnedirRoundedPolicy pol;
  CHECK_THROWS_AS(pol.prepare(inst, dsg("two/seq")), IncompatibleAlgorithmDesign);
  pol.prepare(inst, dsg("one-i/seq"));
  REQUIRE(pol.lp_arcs().size() == pol.lp_values().size());
  // fractional solution respects the pooled display budgets
  std::vector<double> load(inst.num_users(), 0.0);
  for (std::size_t k = 0; k < pol.lp_arcs().size(); ++k) {
    CHECK(pol.lp_values()[k] >= -1e-9);
    CHECK(pol.lp_values()[k] <= 1 + 1e-9);
    load[pol.lp_arcs()[k].first] += pol.lp_values()[k];
  }
  for (int u = 0; u < inst.num_users(); ++u)
    CHECK(load[u] <= inst.capacity[u] * inst.horizon + 1e-7);

  for (int rep = 0; rep < 10; ++rep)
    run_episode(inst, dsg("one-i/seq"), pol, Rng(rep));
}

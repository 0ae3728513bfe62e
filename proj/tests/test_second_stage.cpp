#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <tuple>
#include <vector>

#include "matchsim/generators.hpp"
#include "matchsim/second_stage.hpp"
#include "test_support.hpp"

using namespace matchsim;
using testsupport::dsg;
using testsupport::make_market;
using testsupport::random_feasible_plan;
using testsupport::set_pair;
using testsupport::set_phi;

TEST_CASE("per-user harvest takes the top probabilities, ties by id") {
  FUserResult r = f_user({{5, 0.3}, {7, 0.9}, {6, 0.9}, {8, 0.1}}, 2);
  CHECK(r.value == doctest::Approx(1.8));
  CHECK(r.chosen == std::vector<int>{6, 7});

  CHECK(f_user({{5, 0.3}, {7, 0.9}}, 10).value == doctest::Approx(1.2));
  CHECK(f_user({{5, 0.3}}, 0).value == 0.0);
  CHECK(f_user({}, 3).value == 0.0);
}

TEST_CASE("instance overload matches the candidate-list form") {
  MarketInstance inst = make_market(1, 3, 2, 2);
  set_pair(inst, 0, 1, 0.2, 0.0);
  set_pair(inst, 0, 2, 0.8, 0.0);
  set_pair(inst, 0, 3, 0.5, 0.0);
  FUserResult a = f_user(inst, 0, {1, 2, 3}, 1, 2);
  FUserResult b = f_user({{1, 0.2}, {2, 0.8}, {3, 0.5}}, 2);
  CHECK(a.value == doctest::Approx(b.value));
  CHECK(a.chosen == b.chosen);
  CHECK(a.chosen == std::vector<int>{2, 3});
}

TEST_CASE("family value adds per-user harvests") {
  MarketInstance inst = make_market(2, 2, 1, 1);
  set_pair(inst, 0, 2, 0.4, 0.6);
  set_pair(inst, 1, 3, 0.9, 0.3);
  std::vector<std::vector<int>> fam = {{2}, {3}, {}, {1}};
  CHECK(f_total(inst, fam, 1) == doctest::Approx(0.4 + 0.9 + 0.3));
}

namespace {

double brute_topk(const std::vector<std::tuple<double, double, int>>& entries, int capacity) {
  const int n = (int)entries.size();
  double total = 0.0;
  for (int mask = 0; mask < (1 << n); ++mask) {
    double p = 1.0;
    std::vector<std::pair<double, int>> present;  // (value, id)
    for (int k = 0; k < n; ++k) {
      auto [value, prob, id] = entries[k];
      if (mask >> k & 1) {
        p *= prob;
        present.push_back({value, id});
      } else {
        p *= 1.0 - prob;
      }
    }
    if (p == 0.0) continue;
    std::sort(present.begin(), present.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    double v = 0.0;
    for (int k = 0; k < std::min<int>(capacity, (int)present.size()); ++k) v += present[k].first;
    total += p * v;
  }
  return total;
}

}  // namespace

TEST_CASE("expected top-k harvest matches subset enumeration") {
  Rng rng(314);
  for (int trial = 0; trial < 300; ++trial) {
    int n = 1 + (int)rng.uniform_int(8);
    int cap = 1 + (int)rng.uniform_int(3);
    std::vector<std::tuple<double, double, int>> entries;
    for (int k = 0; k < n; ++k) {
      // one-decimal values so ties actually happen
      double value = std::round(rng.uniform(0, 2) * 10) / 10;
      entries.push_back({value, rng.next_double(), k});
    }
    double got = expected_topk_value(entries, cap);
    double want = brute_topk(entries, cap);
    CHECK(got == doctest::Approx(want).epsilon(1e-9));
  }
}

TEST_CASE("expected top-k edge cases") {
  std::vector<std::tuple<double, double, int>> entries = {{0.5, 1.0, 0}, {0.9, 1.0, 1}};
  CHECK(expected_topk_value(entries, 1) == doctest::Approx(0.9));
  CHECK(expected_topk_value(entries, 2) == doctest::Approx(1.4));
  CHECK(expected_topk_value(entries, 0) == 0.0);
  CHECK(expected_topk_value({{0.5, 0.0, 0}}, 3) == 0.0);
  CHECK(expected_topk_value({}, 3) == 0.0);
}

namespace {

struct Candidate {
  bool mutual;
  int a, b;
  double value;
};

// mirror of the final-period display problem, solved by full enumeration
double brute_second_stage(const MarketInstance& inst, const PlatformDesign& design,
                          const MarketState& state) {
  const int n = inst.num_users();
  std::vector<Candidate> cand;
  for (int u = 0; u < n; ++u)
    for (int b : state.backlog[u])
      cand.push_back({false, u, b, inst.like_prob(state.period, u, b)});
  if (design.allows_mutual(state.period)) {
    for (int i = 0; i < inst.n_i; ++i)
      for (int j : state.potentials[i]) {
        if (state.in_backlog(i, j) || state.in_backlog(j, i)) continue;
        const auto& pj = state.potentials[j];
        if (!std::binary_search(pj.begin(), pj.end(), i)) continue;
        cand.push_back({true, i, j, inst.match_prob(state.period, i, j)});
      }
  }
  REQUIRE(cand.size() <= 16);
  double best = 0.0;
  for (int mask = 0; mask < (1 << cand.size()); ++mask) {
    std::vector<int> shows(n, 0);
    std::vector<char> pair_used(n * n, 0);
    bool ok = true;
    double value = 0.0;
    for (std::size_t k = 0; k < cand.size() && ok; ++k) {
      if (!(mask >> k & 1)) continue;
      const Candidate& c = cand[k];
      int key = std::min(c.a, c.b) * n + std::max(c.a, c.b);
      if (pair_used[key]) ok = false;
      pair_used[key] = 1;
      ++shows[c.a];
      if (c.mutual) ++shows[c.b];
      value += c.value;
    }
    for (int u = 0; u < n && ok; ++u) ok = shows[u] <= inst.capacity[u];
    if (ok) best = std::max(best, value);
  }
  return best;
}

}  // namespace

TEST_CASE("final-period solver agrees with enumeration on reachable states") {
  Rng rng(77);
  int checked = 0;
  for (int trial = 0; trial < 60; ++trial) {
    Rng gen = rng.split(trial);
    MarketInstance inst = random_instance(2 + (int)gen.uniform_int(2), 2, 2, 2, 0.9, 0.3, gen);
    for (const char* label : {"two/seq", "two/nonseq-all", "one-i/nonseq-all"}) {
      PlatformDesign d = dsg(label);
      MarketState s = MarketState::initial(inst);
      DisplayPlan p1 = random_feasible_plan(inst, d, s, gen);
      LikeDraw draw = sample_likes(inst, p1, 1, gen);
      MarketState s2 = transition(inst, d, s, p1, draw).next;

      SecondStageSolution sol = solve_second_general(inst, d, s2);
      CHECK(sol.lp_integral);
      CHECK(plan_is_feasible(inst, d, s2, sol.plan));
      double want = brute_second_stage(inst, d, s2);
      CHECK(sol.value == doctest::Approx(want).epsilon(1e-9));

      // the reported value is really the plan's value
      double recomputed = 0.0;
      for (auto& [u, v] : sol.plan.x) {
        CHECK(s2.in_backlog(u, v));
        recomputed += inst.like_prob(s2.period, u, v);
      }
      for (auto& [i, j] : sol.plan.w) recomputed += inst.match_prob(s2.period, i, j);
      CHECK(recomputed == doctest::Approx(sol.value).epsilon(1e-9));
      ++checked;
    }
  }
  CHECK(checked == 180);
}

TEST_CASE("empty final-period problem yields an empty plan") {
  MarketInstance inst = make_market(1, 1, 2, 1);
  MarketState s = MarketState::initial(inst);
  s.period = 2;
  SecondStageSolution sol = solve_second_general(inst, dsg("two/seq"), s);
  CHECK(sol.plan.empty());
  CHECK(sol.value == 0.0);
  CHECK(sol.lp_integral);
}

TEST_CASE("harvest-only states ignore the mutual window") {
  // the J user holds the I user in backlog, so no fresh pair exists
  MarketInstance inst = make_market(1, 1, 2, 1);
  set_pair(inst, 0, 1, 0.7, 0.6);
  MarketState s;
  s.period = 2;
  s.potentials = {{}, {0}};
  s.backlog = {{}, {0}};
  SecondStageSolution sol = solve_second_general(inst, dsg("two/nonseq-all"), s);
  REQUIRE(sol.plan.x.size() == 1);
  CHECK(sol.plan.w.empty());
  CHECK(sol.plan.x[0] == std::pair<int, int>{1, 0});
  CHECK(sol.value == doctest::Approx(0.6));  // the member already likes them
}

TEST_CASE("capacity forces a choice between two backlog members") {
  MarketInstance inst = make_market(2, 1, 2, 1);
  set_pair(inst, 0, 2, 0.0, 0.35);
  set_pair(inst, 1, 2, 0.0, 0.65);
  MarketState s;
  s.period = 2;
  s.potentials = {{2}, {2}, {0, 1}};
  s.backlog = {{}, {}, {0, 1}};
  SecondStageSolution sol = solve_second_general(inst, dsg("two/seq"), s);
  CHECK(sol.value == doctest::Approx(0.65));
  REQUIRE(sol.plan.x.size() == 1);
  CHECK(sol.plan.x[0] == std::pair<int, int>{2, 1});
}

TEST_CASE("leftover capacity is spent on the backlog") {
  MarketInstance inst = make_market(1, 2, 2, 2);
  set_pair(inst, 0, 1, 0.4, 0.0);
  set_pair(inst, 0, 2, 0.9, 0.0);
  MarketState s;
  s.period = 2;
  s.potentials = {{1, 2}, {0}, {0}};
  s.backlog = {{1, 2}, {}, {}};

  DisplayPlan plan;
  plan.x = {{0, 1}};
  fill_plan_from_backlog(inst, s, plan);
  plan.normalize();
  CHECK(plan.x == std::vector<std::pair<int, int>>{{0, 1}, {0, 2}});

  // no residual capacity, nothing added
  DisplayPlan full;
  full.x = {{0, 1}, {0, 2}};
  fill_plan_from_backlog(inst, s, full);
  CHECK(full.x.size() == 2);

  // an already-displayed pair is not re-added even with room
  inst.capacity[0] = 3;
  DisplayPlan partial;
  partial.x = {{0, 2}};
  fill_plan_from_backlog(inst, s, partial);
  partial.normalize();
  CHECK(partial.x == std::vector<std::pair<int, int>>{{0, 1}, {0, 2}});
}

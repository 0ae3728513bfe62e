#include "matchsim/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>

#include "matchsim/dh.hpp"
#include "matchsim/lp.hpp"
#include "matchsim/second_stage.hpp"

namespace matchsim {

namespace {

bool sorted_contains(const std::vector<int>& v, int x) {
  return std::binary_search(v.begin(), v.end(), x);
}

// display modes available for one pair in the current state
struct PairOptions {
  int i = -1, j = -1;
  bool i_views_j = false;
  bool j_views_i = false;
  bool mutual = false;
};

std::vector<PairOptions> pair_options(const MarketInstance& inst, const PlatformDesign& design,
                                      const MarketState& state) {
  std::vector<PairOptions> out;
  for (int i = 0; i < inst.n_i; ++i)
    for (int j = inst.n_i; j < inst.num_users(); ++j) {
      PairOptions po;
      po.i = i;
      po.j = j;
      bool ij = sorted_contains(state.potentials[i], j);
      bool ji = sorted_contains(state.potentials[j], i);
      if (ij && (inst.initiates(design, i) || state.in_backlog(i, j))) po.i_views_j = true;
      if (ji && (inst.initiates(design, j) || state.in_backlog(j, i))) po.j_views_i = true;
      if (design.allows_mutual(state.period) && ij && ji && !state.in_backlog(i, j) &&
          !state.in_backlog(j, i))
        po.mutual = true;
      if (po.i_views_j || po.j_views_i || po.mutual) out.push_back(po);
    }
  return out;
}

// depth-first walk over every capacity-feasible plan assembled from the options
void enumerate_plans(const MarketInstance& inst, const std::vector<PairOptions>& opts,
                     const std::function<void(const DisplayPlan&)>& visit) {
  std::vector<int> room = inst.capacity;
  DisplayPlan plan;
  std::function<void(std::size_t)> rec = [&](std::size_t k) {
    if (k == opts.size()) {
      visit(plan);
      return;
    }
    const PairOptions& po = opts[k];
    rec(k + 1);
    if (po.i_views_j && room[po.i] > 0) {
      --room[po.i];
      plan.x.push_back({po.i, po.j});
      rec(k + 1);
      plan.x.pop_back();
      ++room[po.i];
    }
    if (po.j_views_i && room[po.j] > 0) {
      --room[po.j];
      plan.x.push_back({po.j, po.i});
      rec(k + 1);
      plan.x.pop_back();
      ++room[po.j];
    }
    if (po.mutual && room[po.i] > 0 && room[po.j] > 0) {
      --room[po.i];
      --room[po.j];
      plan.w.push_back({po.i, po.j});
      rec(k + 1);
      plan.w.pop_back();
      ++room[po.i];
      ++room[po.j];
    }
  };
  rec(0);
}

struct DpContext {
  const MarketInstance& inst;
  const PlatformDesign& design;
  DpOptions opt;
  long long nodes = 0;
  std::map<std::vector<std::uint32_t>, double> memo;

  void charge() {
    if (++nodes > opt.node_cap)
      throw StateSpaceTooLarge("display plan recursion exceeded the node cap", nodes);
  }
};

std::vector<std::uint32_t> state_key(const MarketInstance& inst, const MarketState& state) {
  std::vector<std::uint32_t> key;
  key.push_back((std::uint32_t)state.period);
  for (int u = 0; u < inst.num_users(); ++u) {
    std::uint32_t p = 0, b = 0;
    for (int v : state.potentials[u]) p |= 1u << v;
    for (int v : state.backlog[u]) b |= 1u << v;
    key.push_back(p);
    key.push_back(b);
  }
  return key;
}

double dp_value(DpContext& ctx, const MarketState& state) {
  const MarketInstance& inst = ctx.inst;
  if (state.period == inst.horizon)
    return solve_second_general(inst, ctx.design, state).value;

  std::vector<std::uint32_t> key = state_key(inst, state);
  if (auto it = ctx.memo.find(key); it != ctx.memo.end()) return it->second;

  const bool separable = !ctx.opt.force_full_branching && state.period + 1 == inst.horizon &&
                         !ctx.design.allows_mutual(inst.horizon);
  double best = 0.0;
  bool first = true;
  auto opts = pair_options(inst, ctx.design, state);
  enumerate_plans(inst, opts, [&](const DisplayPlan& raw) {
    ctx.charge();
    double val = 0.0;
    if (separable) {
      val = two_period_plan_value(inst, state, raw);
    } else {
      DisplayPlan plan = raw;
      plan.normalize();
      auto views = plan.views();
      std::vector<double> pv(views.size());
      for (std::size_t k = 0; k < views.size(); ++k)
        pv[k] = inst.like_prob(state.period, views[k].first, views[k].second);
      const std::uint64_t total = 1ull << views.size();
      for (std::uint64_t mask = 0; mask < total; ++mask) {
        double prob = 1.0;
        LikeDraw draw;
        draw.views = views;
        draw.liked.assign(views.size(), 0);
        for (std::size_t k = 0; k < views.size(); ++k) {
          if (mask >> k & 1) {
            prob *= pv[k];
            draw.liked[k] = 1;
          } else {
            prob *= 1.0 - pv[k];
          }
        }
        if (prob <= 0.0) continue;
        ctx.charge();
        TransitionResult tr = transition(inst, ctx.design, state, plan, draw);
        val += prob * ((double)tr.matches.size() + dp_value(ctx, tr.next));
      }
    }
    if (first || val > best) best = val;
    first = false;
  });
  ctx.memo[key] = best;
  return best;
}

}  // namespace

double dp_optimal(const MarketInstance& inst, const PlatformDesign& design, const DpOptions& opt) {
  if (inst.num_users() > 32)
    throw StateSpaceTooLarge("state keys support at most 32 users", inst.num_users());
  DpContext ctx{inst, design, opt};
  return dp_value(ctx, MarketState::initial(inst));
}

double two_period_plan_value(const MarketInstance& inst, const MarketState& state,
                             const DisplayPlan& plan) {
  const int t = state.period;
  if (t >= inst.horizon)
    throw std::invalid_argument("needs a following period to harvest in");
  const int n = inst.num_users();
  std::vector<std::vector<int>> shown_to(n);
  std::vector<std::vector<std::pair<int, double>>> arrive(n);
  double immediate = 0.0;
  for (auto& [viewer, viewed] : plan.x) {
    shown_to[viewer].push_back(viewed);
    if (state.in_backlog(viewer, viewed))
      immediate += inst.like_prob(t, viewer, viewed);
    else
      arrive[viewed].push_back({viewer, inst.like_prob(t, viewer, viewed)});
  }
  for (auto& [i, j] : plan.w) {
    immediate += inst.match_prob(t, i, j);
    shown_to[i].push_back(j);
    shown_to[j].push_back(i);
  }
  double harvest = 0.0;
  for (int u = 0; u < n; ++u) {
    std::sort(shown_to[u].begin(), shown_to[u].end());
    std::vector<std::tuple<double, double, int>> entries;
    for (int v : state.backlog[u]) {
      if (sorted_contains(shown_to[u], v)) continue;
      // re-displaying the pair the fresh way re-rolls the member's interest;
      // a dislike evicts them, so the harvest is only as certain as that draw
      double present = 1.0;
      for (auto& [viewer, p] : arrive[u])
        if (viewer == v) { present = p; break; }
      entries.push_back({inst.like_prob(t + 1, u, v), present, v});
    }
    for (auto& [v, p] : arrive[u]) {
      if (sorted_contains(shown_to[u], v)) continue;      // pair settled this period
      if (state.in_backlog(u, v)) continue;               // counted with the held entries
      if (!sorted_contains(state.potentials[u], v)) continue;  // liker of a closed pair
      entries.push_back({inst.like_prob(t + 1, u, v), p, v});
    }
    harvest += expected_topk_value(std::move(entries), inst.capacity[u]);
  }
  return immediate + harvest;
}

namespace {

double exact_m2_impl(const MarketInstance& inst, const DisplayPlan& plan, bool parallel) {
  DisplayPlan p = plan;
  p.normalize();
  auto views = p.views();
  if (views.size() > 20)
    throw TooManyEdges("exact backlog enumeration supports at most 20 directed views");
  MarketState s0 = MarketState::initial(inst);
  std::vector<double> pv(views.size());
  for (std::size_t k = 0; k < views.size(); ++k)
    pv[k] = inst.like_prob(1, views[k].first, views[k].second);

  const std::int64_t total = 1ll << views.size();
  const int chunks = (int)std::min<std::int64_t>(64, total);
  std::vector<double> partial(chunks, 0.0);
  // fixed chunking keeps the summation order independent of thread count
#pragma omp parallel for schedule(static) if (parallel)
  for (int c = 0; c < chunks; ++c) {
    const std::int64_t lo = total * c / chunks;
    const std::int64_t hi = total * (c + 1) / chunks;
    double acc = 0.0;
    for (std::int64_t mask = lo; mask < hi; ++mask) {
      double prob = 1.0;
      LikeDraw draw;
      draw.views = views;
      draw.liked.assign(views.size(), 0);
      for (std::size_t k = 0; k < views.size(); ++k) {
        if (mask >> k & 1) {
          prob *= pv[k];
          draw.liked[k] = 1;
        } else {
          prob *= 1.0 - pv[k];
        }
      }
      if (prob <= 0.0) continue;
      PlatformDesign open{PlatformDesign::Direction::two_directional,
                          PlatformDesign::Timing::nonseq_all_periods};
      TransitionResult tr = transition(inst, open, s0, p, draw);
      acc += prob * f_total(inst, tr.next.backlog, 2);
    }
    partial[c] = acc;
  }
  double sum = 0.0;
  for (double v : partial) sum += v;
  return sum;
}

}  // namespace

double exact_M2(const MarketInstance& inst, const DisplayPlan& plan) {
  return exact_m2_impl(inst, plan, true);
}

double exact_M2_serial(const MarketInstance& inst, const DisplayPlan& plan) {
  return exact_m2_impl(inst, plan, false);
}

double semi_adaptive_optimal(const MarketInstance& inst, const PlatformDesign& design) {
  if (inst.horizon != 2)
    throw std::invalid_argument("semi-adaptive enumeration covers two periods");
  MarketState s0 = MarketState::initial(inst);

  // commitment candidates: fresh initiations and mutual displays, per period
  struct Cand { bool mutual; int a, b; int period; };
  std::vector<Cand> ground;
  for (int u = 0; u < inst.num_users(); ++u) {
    if (!inst.initiates(design, u)) continue;
    for (int v : s0.potentials[u])
      if (!s0.in_backlog(u, v)) ground.push_back({false, u, v, 1});
  }
  for (int t = 1; t <= 2; ++t) {
    if (!design.allows_mutual(t)) continue;
    for (int i = 0; i < inst.n_i; ++i)
      for (int j : s0.potentials[i]) {
        if (!sorted_contains(s0.potentials[j], i)) continue;
        if (s0.in_backlog(i, j) || s0.in_backlog(j, i)) continue;
        ground.push_back({true, i, j, t});
      }
  }
  if (ground.size() > 8)
    throw StateSpaceTooLarge("semi-adaptive ground set larger than 8 displays",
                             (long long)ground.size());

  const int n = inst.num_users();
  double best = 0.0;
  const std::uint32_t total = 1u << ground.size();
  for (std::uint32_t mask = 0; mask < total; ++mask) {
    std::vector<int> shows1(n, 0), shows2(n, 0);
    std::map<std::pair<int, int>, int> pair_uses;
    double immediate = 0.0;
    std::vector<std::vector<std::pair<int, double>>> arrive(n);
    bool ok = true;
    for (std::size_t k = 0; k < ground.size() && ok; ++k) {
      if (!(mask >> k & 1)) continue;
      const Cand& c = ground[k];
      if (++pair_uses[{std::min(c.a, c.b), std::max(c.a, c.b)}] > 1) { ok = false; break; }
      if (c.mutual) {
        auto& s = c.period == 1 ? shows1 : shows2;
        ++s[c.a];
        ++s[c.b];
        immediate += inst.match_prob(c.period, c.a, c.b);
      } else {
        ++shows1[c.a];
        arrive[c.b].push_back({c.a, inst.like_prob(1, c.a, c.b)});
      }
    }
    if (!ok) continue;
    for (int u = 0; u < n && ok; ++u)
      if (shows1[u] > inst.capacity[u] || shows2[u] > inst.capacity[u]) ok = false;
    if (!ok) continue;

    double value = immediate;
    for (int u = 0; u < n; ++u) {
      // adaptive part: harvest now (first-period like prob) or keep for the
      // final period; enumerate the harvested subset of the starting backlog
      const std::vector<int>& held = s0.backlog[u];
      int room1 = inst.capacity[u] - shows1[u];
      double user_best = -1.0;
      const std::uint32_t hm_total = 1u << held.size();
      for (std::uint32_t hm = 0; hm < hm_total; ++hm) {
        int taken = 0;
        double now = 0.0;
        bool clash = false;
        for (std::size_t k = 0; k < held.size(); ++k)
          if (hm >> k & 1) {
            // the pair may already be on display as a committed initiation
            if (pair_uses.count({std::min(u, held[k]), std::max(u, held[k])})) {
              clash = true;
              break;
            }
            ++taken;
            now += inst.like_prob(1, u, held[k]);
          }
        if (clash || taken > room1) continue;
        std::vector<std::tuple<double, double, int>> entries;
        for (std::size_t k = 0; k < held.size(); ++k)
          if (!(hm >> k & 1)) {
            double present = 1.0;  // a committed re-view re-rolls the like
            for (auto& [v, pr] : arrive[u])
              if (v == held[k]) { present = pr; break; }
            entries.push_back({inst.like_prob(2, u, held[k]), present, held[k]});
          }
        for (auto& [v, pr] : arrive[u])
          if (!s0.in_backlog(u, v))
            entries.push_back({inst.like_prob(2, u, v), pr, v});
        double later =
            expected_topk_value(std::move(entries), inst.capacity[u] - shows2[u]);
        user_best = std::max(user_best, now + later);
      }
      value += user_best;
    }
    best = std::max(best, value);
  }
  return best;
}

double distribution_problem(const MarketInstance& inst, const DisplayPlan& plan) {
  const int n = inst.num_users();
  MarketState s0 = MarketState::initial(inst);
  std::vector<std::vector<int>> shown_to(n);
  std::vector<std::vector<std::pair<int, double>>> arrive(n);
  for (auto& [viewer, viewed] : plan.x) {
    shown_to[viewer].push_back(viewed);
    if (!s0.in_backlog(viewer, viewed) && sorted_contains(s0.potentials[viewed], viewer) &&
        !s0.in_backlog(viewed, viewer))
      arrive[viewed].push_back({viewer, inst.like_prob(1, viewer, viewed)});
  }
  for (auto& [i, j] : plan.w) {
    shown_to[i].push_back(j);
    shown_to[j].push_back(i);
  }

  double total = 0.0;
  for (int u = 0; u < n; ++u) {
    std::sort(shown_to[u].begin(), shown_to[u].end());
    std::vector<std::pair<int, double>> certain;
    for (int v : s0.backlog[u])
      if (!sorted_contains(shown_to[u], v))
        certain.push_back({v, inst.like_prob(2, u, v)});
    std::vector<std::pair<int, double>> random_in;
    for (auto& [v, p] : arrive[u])
      if (!sorted_contains(shown_to[u], v) && !s0.in_backlog(u, v)) random_in.push_back({v, p});
    if (random_in.empty() && certain.empty()) continue;
    if (random_in.size() > 12)
      throw TooManyEdges("distribution problem supports in-degree at most 12");

    const std::uint32_t sets = 1u << random_in.size();
    lp::LinearProgram prog;
    std::vector<std::pair<int, double>> norm_row;
    for (std::uint32_t s = 0; s < sets; ++s) {
      std::vector<std::pair<int, double>> members = certain;
      for (std::size_t k = 0; k < random_in.size(); ++k)
        if (s >> k & 1) members.push_back({random_in[k].first, inst.like_prob(2, u, random_in[k].first)});
      std::vector<std::pair<int, double>> cands;
      for (auto& [v, val] : members) cands.push_back({v, val});
      double fv = f_user(std::move(cands), inst.capacity[u]).value;
      norm_row.push_back({prog.add_var(0.0, lp::kInf, fv), 1.0});
    }
    prog.add_row(std::move(norm_row), lp::Rel::eq, 1.0);
    for (std::size_t k = 0; k < random_in.size(); ++k) {
      std::vector<std::pair<int, double>> row;
      for (std::uint32_t s = 0; s < sets; ++s)
        if (s >> k & 1) row.push_back({(int)s, 1.0});
      prog.add_row(std::move(row), lp::Rel::eq, random_in[k].second);
    }
    lp::Solution sol = solve_lp(prog);
    if (sol.status != lp::Status::optimal)
      throw lp::NumericalInstability("distribution problem LP did not solve");
    total += sol.objective;
  }
  return total;
}

double relaxation_F(const MarketInstance& inst, const DisplayPlan& plan) {
  const int n = inst.num_users();
  MarketState s0 = MarketState::initial(inst);
  std::vector<std::vector<int>> shown_to(n);
  std::vector<std::vector<std::pair<int, double>>> arrive(n);
  for (auto& [viewer, viewed] : plan.x) {
    shown_to[viewer].push_back(viewed);
    if (!s0.in_backlog(viewer, viewed) && sorted_contains(s0.potentials[viewed], viewer) &&
        !s0.in_backlog(viewed, viewer))
      arrive[viewed].push_back({viewer, inst.like_prob(1, viewer, viewed)});
  }
  for (auto& [i, j] : plan.w) {
    shown_to[i].push_back(j);
    shown_to[j].push_back(i);
  }
  double total = 0.0;
  for (int u = 0; u < n; ++u) {
    std::sort(shown_to[u].begin(), shown_to[u].end());
    struct Item { double value, marginal; int id; };
    std::vector<Item> items;
    for (int v : s0.backlog[u])
      if (!sorted_contains(shown_to[u], v)) items.push_back({inst.like_prob(2, u, v), 1.0, v});
    for (auto& [v, p] : arrive[u])
      if (!sorted_contains(shown_to[u], v) && !s0.in_backlog(u, v))
        items.push_back({inst.like_prob(2, u, v), p, v});
    std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
      if (a.value != b.value) return a.value > b.value;
      return a.id < b.id;
    });
    double room = inst.capacity[u];
    for (const Item& it : items) {
      if (room <= 0.0) break;
      double take = std::min(room, it.marginal);
      total += take * it.value;
      room -= take;
    }
  }
  return total;
}

CorrelationGapReport correlation_gapcheck_impl(const MarketInstance& inst,
                                               const PlatformDesign& design) {
  DhModel model = build_dh_relaxation(inst, design, DhForm::two_period);
  DhRelaxationSolution sol = solve_dh_relaxation(model);
  CorrelationGapReport rep;
  rep.plan.x = sol.x;
  rep.plan.w = sol.w;
  rep.plan.normalize();
  rep.m2 = exact_M2(inst, rep.plan);
  rep.g = distribution_problem(inst, rep.plan);
  rep.f = relaxation_F(inst, rep.plan);
  rep.ratio = rep.g > 1e-12 ? rep.m2 / rep.g : 1.0;
  const double guarantee = 1.0 - 1.0 / std::exp(1.0);
  if (rep.m2 < guarantee * rep.g - 1e-9)
    throw std::runtime_error("correlated-bound guarantee violated: M2 " +
                             std::to_string(rep.m2) + " vs G " + std::to_string(rep.g));
  if (rep.g < rep.f - 1e-9)
    throw std::runtime_error("bound ordering violated: G " + std::to_string(rep.g) + " vs F " +
                             std::to_string(rep.f));
  return rep;
}

CorrelationGapReport correlation_gap_check(const MarketInstance& inst,
                                           const PlatformDesign& design) {
  return correlation_gapcheck_impl(inst, design);
}

double nonseq_second_period_ratio_probe(const MarketInstance& inst) {
  PlatformDesign first{PlatformDesign::Direction::two_directional,
                       PlatformDesign::Timing::nonseq_first_period};
  PlatformDesign all{PlatformDesign::Direction::two_directional,
                     PlatformDesign::Timing::nonseq_all_periods};
  double v1 = dp_optimal(inst, first);
  double v2 = dp_optimal(inst, all);
  if (v2 <= 1e-12) return 1.0;
  return v1 / v2;
}

}  // namespace matchsim

#include "matchsim/submodular.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "matchsim/second_stage.hpp"

namespace matchsim {

namespace {

bool counts_ok(const std::vector<std::vector<int>>& sets, const std::vector<int>& caps,
               const std::vector<char>& take) {
  for (std::size_t s = 0; s < sets.size(); ++s) {
    int c = 0;
    for (int e : sets[s])
      if (take[e]) ++c;
    if (c > caps[s]) return false;
  }
  return true;
}

}  // namespace

bool PartitionMatroid::independent(const std::vector<char>& take) const {
  return counts_ok(parts, budget, take);
}

bool LaminarMatroid::independent(const std::vector<char>& take) const {
  return counts_ok(sets, caps, take);
}

bool FeasibleRegion::independent(const std::vector<char>& take) const {
  for (const auto& m : partitions)
    if (!m.independent(take)) return false;
  if (laminar && !laminar->independent(take)) return false;
  return true;
}

bool FeasibleRegion::can_add(const std::vector<char>& take, int element) const {
  if (take[element]) return false;
  std::vector<char> trial = take;
  trial[element] = 1;
  return independent(trial);
}

FeasibleRegion build_feasible_region(const MarketInstance& inst, const PlatformDesign& design) {
  const int n = inst.num_users();
  FeasibleRegion region;
  auto in_backlog0 = [&](int u, int v) {
    if (inst.initial_backlog.empty()) return false;
    const auto& b = inst.initial_backlog[u];
    return std::binary_search(b.begin(), b.end(), v);
  };

  std::map<std::pair<int, int>, int> arc_at;   // (viewer, target) -> element
  std::map<std::pair<int, int>, int> edge_at;  // (i, j) -> element
  for (int u = 0; u < n; ++u) {
    if (!inst.initiates(design, u)) continue;
    for (int v : inst.potentials[u]) {
      if (in_backlog0(u, v)) continue;
      arc_at[{u, v}] = (int)region.ground.size();
      region.ground.push_back({false, u, v});
    }
  }
  const bool edges = design.allows_mutual(1);
  if (edges) {
    for (int i = 0; i < inst.n_i; ++i)
      for (int j : inst.potentials[i]) {
        if (!inst.is_potential(j, i)) continue;
        if (in_backlog0(i, j) || in_backlog0(j, i)) continue;
        edge_at[{i, j}] = (int)region.ground.size();
        region.ground.push_back({true, i, j});
      }
  }
  const int g = (int)region.ground.size();
  const bool two_dir = design.direction == PlatformDesign::Direction::two_directional;

  auto viewing_partition = [&](bool i_side) {
    // one part per user on the given side, holding everything that user views
    PartitionMatroid m;
    std::vector<std::vector<int>> by_user(n);
    std::vector<int> loose;
    for (int e = 0; e < g; ++e) {
      const GroundElement& el = region.ground[e];
      int viewer = el.is_edge ? (i_side ? el.a : el.b) : el.a;
      bool belongs = el.is_edge || inst.is_i_side(el.a) == i_side;
      if (belongs)
        by_user[viewer].push_back(e);
      else
        loose.push_back(e);
    }
    for (int u = 0; u < n; ++u)
      if (!by_user[u].empty()) {
        m.parts.push_back(std::move(by_user[u]));
        m.budget.push_back(inst.capacity[u]);
      }
    for (int e : loose) {
      m.parts.push_back({e});
      m.budget.push_back(1);
    }
    return m;
  };
  auto pair_partition = [&] {
    PartitionMatroid m;
    for (int i = 0; i < inst.n_i; ++i)
      for (int j : inst.potentials[i]) {
        std::vector<int> members;
        if (auto it = arc_at.find({i, j}); it != arc_at.end()) members.push_back(it->second);
        if (auto it = arc_at.find({j, i}); it != arc_at.end()) members.push_back(it->second);
        if (auto it = edge_at.find({i, j}); it != edge_at.end()) members.push_back(it->second);
        if (!members.empty()) {
          m.parts.push_back(std::move(members));
          m.budget.push_back(1);
        }
      }
    return m;
  };

  if (!two_dir && !edges) {
    // per-initiator capacity only
    PartitionMatroid m;
    std::vector<std::vector<int>> by_user(n);
    for (int e = 0; e < g; ++e) by_user[region.ground[e].a].push_back(e);
    for (int u = 0; u < n; ++u)
      if (!by_user[u].empty()) {
        m.parts.push_back(std::move(by_user[u]));
        m.budget.push_back(inst.capacity[u]);
      }
    region.partitions.push_back(std::move(m));
  } else if (!two_dir && edges) {
    // laminar: initiator capacity with a nested per-pair exclusion inside it
    LaminarMatroid lam;
    std::vector<std::vector<int>> by_init(n);
    for (int e = 0; e < g; ++e) {
      const GroundElement& el = region.ground[e];
      int init = el.is_edge
                     ? (design.direction == PlatformDesign::Direction::one_from_i ? el.a : el.b)
                     : el.a;
      by_init[init].push_back(e);
    }
    for (int u = 0; u < n; ++u)
      if (!by_init[u].empty()) {
        lam.sets.push_back(std::move(by_init[u]));
        lam.caps.push_back(inst.capacity[u]);
      }
    for (auto& [key, arc] : arc_at)
      if (auto it = edge_at.find(inst.is_i_side(key.first) ? key
                                                           : std::pair{key.second, key.first});
          it != edge_at.end()) {
        lam.sets.push_back({arc, it->second});
        lam.caps.push_back(1);
      }
    region.laminar = std::move(lam);
    // partition: responder capacity over edges, arcs free
    PartitionMatroid m;
    std::vector<std::vector<int>> by_resp(n);
    for (auto& [key, e] : edge_at) {
      int resp = design.direction == PlatformDesign::Direction::one_from_i ? key.second : key.first;
      by_resp[resp].push_back(e);
    }
    for (int u = 0; u < n; ++u)
      if (!by_resp[u].empty()) {
        m.parts.push_back(std::move(by_resp[u]));
        m.budget.push_back(inst.capacity[u]);
      }
    for (auto& [key, e] : arc_at) {
      m.parts.push_back({e});
      m.budget.push_back(1);
    }
    region.partitions.push_back(std::move(m));
  } else if (!edges) {
    // per-viewer capacity (arcs partition cleanly by viewer) plus pair exclusion
    PartitionMatroid m;
    std::vector<std::vector<int>> by_user(n);
    for (int e = 0; e < g; ++e) by_user[region.ground[e].a].push_back(e);
    for (int u = 0; u < n; ++u)
      if (!by_user[u].empty()) {
        m.parts.push_back(std::move(by_user[u]));
        m.budget.push_back(inst.capacity[u]);
      }
    region.partitions.push_back(std::move(m));
    region.partitions.push_back(pair_partition());
  } else {
    region.partitions.push_back(viewing_partition(true));
    region.partitions.push_back(viewing_partition(false));
    region.partitions.push_back(pair_partition());
  }
  return region;
}

double display_set_value(const MarketInstance& inst, const std::vector<GroundElement>& ground,
                         const std::vector<char>& take) {
  if (inst.horizon < 2) throw std::invalid_argument("display set value needs two periods");
  const int n = inst.num_users();
  double immediate = 0.0;
  std::vector<std::vector<int>> viewed(n);                     // shown to the user
  std::vector<std::vector<std::pair<int, double>>> arrive(n);  // potential likers
  for (std::size_t k = 0; k < ground.size(); ++k) {
    if (!take[k]) continue;
    const GroundElement& e = ground[k];
    if (e.is_edge) {
      immediate += inst.match_prob(1, e.a, e.b);
      viewed[e.a].push_back(e.b);
      viewed[e.b].push_back(e.a);
    } else {
      viewed[e.a].push_back(e.b);
      arrive[e.b].push_back({e.a, inst.like_prob(1, e.a, e.b)});
    }
  }
  double harvest = 0.0;
  for (int u = 0; u < n; ++u) {
    auto saw = [&](int v) {
      return std::find(viewed[u].begin(), viewed[u].end(), v) != viewed[u].end();
    };
    std::vector<std::tuple<double, double, int>> entries;
    const std::vector<int>* held = inst.initial_backlog.empty() ? nullptr : &inst.initial_backlog[u];
    if (held)
      for (int v : *held) {
        if (saw(v)) continue;
        double present = 1.0;
        for (auto& [w, p] : arrive[u])
          if (w == v) { present = p; break; }  // a re-view can turn into a dislike
        entries.push_back({inst.like_prob(2, u, v), present, v});
      }
    for (auto& [v, p] : arrive[u]) {
      if (saw(v)) continue;
      if (held && std::binary_search(held->begin(), held->end(), v)) continue;
      entries.push_back({inst.like_prob(2, u, v), p, v});
    }
    harvest += expected_topk_value(std::move(entries), inst.capacity[u]);
  }
  return immediate + harvest;
}

SetOracle make_display_value_oracle(const MarketInstance& inst,
                                    const std::vector<GroundElement>& ground) {
  return [&inst, ground](const std::vector<char>& take) {
    return display_set_value(inst, ground, take);
  };
}

MultilinearEstimate multilinear_estimate(const SetOracle& oracle, const std::vector<double>& z,
                                         int samples, Rng rng) {
  const int g = (int)z.size();
  std::vector<double> vals(samples);
#pragma omp parallel for schedule(static)
  for (int s = 0; s < samples; ++s) {
    Rng r = rng.split(s);
    std::vector<char> take(g, 0);
    for (int e = 0; e < g; ++e) take[e] = r.bernoulli(z[e]);
    vals[s] = oracle(take);
  }
  MultilinearEstimate out;
  for (double v : vals) out.mean += v;
  out.mean /= samples;
  if (samples > 1) {
    double ss = 0.0;
    for (double v : vals) ss += (v - out.mean) * (v - out.mean);
    out.std_error = std::sqrt(ss / ((double)samples * (samples - 1)));
  }
  return out;
}

ContinuousGreedyResult continuous_greedy(const MarketInstance& inst, const PlatformDesign& design,
                                         const ContinuousGreedyOptions& opt, Rng rng) {
  if (design.direction == PlatformDesign::Direction::two_directional ||
      design.timing != PlatformDesign::Timing::sequential_only)
    throw IncompatibleAlgorithmDesign(
        "continuous greedy needs a one-directional sequential design");
  if (inst.horizon < 2) throw std::invalid_argument("continuous greedy needs two periods");

  ContinuousGreedyResult res;
  FeasibleRegion skeleton = build_feasible_region(inst, design);
  res.ground = skeleton.ground;
  const int g = (int)res.ground.size();
  std::vector<double> phi(g);
  for (int e = 0; e < g; ++e)
    phi[e] = inst.like_prob(1, res.ground[e].a, res.ground[e].b);

  const int n = inst.num_users();
  std::vector<std::vector<int>> arcs_at(n);  // grouped by the receiving user
  for (int e = 0; e < g; ++e) arcs_at[res.ground[e].b].push_back(e);
  auto held_entries = [&](int u) {
    std::vector<std::tuple<double, double, int>> entries;
    if (!inst.initial_backlog.empty())
      for (int v : inst.initial_backlog[u])
        entries.push_back({inst.like_prob(2, u, v), 1.0, v});
    return entries;
  };

  std::vector<double> share(g, 0.0);  // fraction of the display, in [0,1]
  std::vector<double> grad(g);
  SetOracle oracle = make_display_value_oracle(inst, res.ground);

  for (int step = 0; step < opt.steps; ++step) {
    if (opt.exact_gradient) {
#pragma omp parallel for schedule(dynamic)
      for (int u = 0; u < n; ++u) {
        if (arcs_at[u].empty()) continue;
        auto base = held_entries(u);
        const std::size_t nh = base.size();
        for (int e : arcs_at[u])
          base.push_back({inst.like_prob(2, u, res.ground[e].a), share[e] * phi[e],
                          res.ground[e].a});
        for (std::size_t k = 0; k < arcs_at[u].size(); ++k) {
          int e = arcs_at[u][k];
          auto on = base;
          std::get<1>(on[nh + k]) = phi[e];
          auto off = base;
          std::get<1>(off[nh + k]) = 0.0;
          grad[e] = expected_topk_value(std::move(on), inst.capacity[u]) -
                    expected_topk_value(std::move(off), inst.capacity[u]);
        }
      }
    } else {
      Rng step_rng = rng.split(step);
      std::vector<double> per_sample((std::size_t)opt.gradient_samples * g);
#pragma omp parallel for schedule(static)
      for (int s = 0; s < opt.gradient_samples; ++s) {
        Rng r = step_rng.split(s);
        std::vector<char> take(g, 0);
        for (int e = 0; e < g; ++e) take[e] = r.bernoulli(share[e]);
        for (int e = 0; e < g; ++e) {
          std::vector<char> hi = take, lo = take;
          hi[e] = 1;
          lo[e] = 0;
          per_sample[(std::size_t)s * g + e] = oracle(hi) - oracle(lo);
        }
      }
      for (int e = 0; e < g; ++e) {
        double acc = 0.0;
        for (int s = 0; s < opt.gradient_samples; ++s)
          acc += per_sample[(std::size_t)s * g + e];
        grad[e] = acc / opt.gradient_samples;
      }
    }

    // best polytope vertex for this gradient: each initiator takes its
    // capacity's worth of the largest positive entries
    for (int u = 0; u < n; ++u) {
      std::vector<int> mine;
      for (int e = 0; e < g; ++e)
        if (res.ground[e].a == u && grad[e] > 1e-15) mine.push_back(e);
      std::sort(mine.begin(), mine.end(), [&](int a, int b) {
        if (grad[a] != grad[b]) return grad[a] > grad[b];
        return a < b;
      });
      int take_count = std::min<int>(inst.capacity[u], (int)mine.size());
      for (int k = 0; k < take_count; ++k) share[mine[k]] += 1.0 / opt.steps;
    }
  }

  res.z.resize(g);
  for (int e = 0; e < g; ++e) res.z[e] = share[e] * phi[e];
  double value = 0.0;
  for (int u = 0; u < n; ++u) {
    auto entries = held_entries(u);
    for (int e : arcs_at[u])
      entries.push_back({inst.like_prob(2, u, res.ground[e].a), res.z[e], res.ground[e].a});
    value += expected_topk_value(std::move(entries), inst.capacity[u]);
  }
  res.value = value;
  return res;
}

std::vector<char> dependent_rounding(const std::vector<double>& fractional, Rng& rng) {
  const double tol = 1e-12;
  std::vector<double> v = fractional;
  std::vector<int> active;
  for (int k = 0; k < (int)v.size(); ++k)
    if (v[k] > tol && v[k] < 1.0 - tol) active.push_back(k);
  while (active.size() >= 2) {
    int p = active[0], q = active[1];
    double a = v[p], b = v[q], s = a + b;
    if (s <= 1.0) {
      if (rng.next_double() < a / s) {
        v[p] = s;
        v[q] = 0.0;
      } else {
        v[p] = 0.0;
        v[q] = s;
      }
    } else {
      if (rng.next_double() < (1.0 - b) / (2.0 - s)) {
        v[p] = 1.0;
        v[q] = s - 1.0;
      } else {
        v[p] = s - 1.0;
        v[q] = 1.0;
      }
    }
    active.erase(std::remove_if(active.begin(), active.end(),
                                [&](int k) { return v[k] <= tol || v[k] >= 1.0 - tol; }),
                 active.end());
  }
  if (active.size() == 1) v[active[0]] = rng.bernoulli(v[active[0]]) ? 1.0 : 0.0;
  std::vector<char> out(v.size());
  for (int k = 0; k < (int)v.size(); ++k) out[k] = v[k] > 0.5 ? 1 : 0;
  return out;
}

std::vector<char> greedy_matroid_intersection(const SetOracle& oracle,
                                              const FeasibleRegion& region) {
  const int g = (int)region.ground.size();
  std::vector<char> take(g, 0);
  double current = oracle(take);
  while (true) {
    int best = -1;
    double best_gain = 1e-12;
    for (int e = 0; e < g; ++e) {
      if (take[e] || !region.can_add(take, e)) continue;
      take[e] = 1;
      double gain = oracle(take) - current;
      take[e] = 0;
      if (gain > best_gain) {
        best_gain = gain;
        best = e;
      }
    }
    if (best < 0) break;
    take[best] = 1;
    current += best_gain;
  }
  return take;
}

std::vector<char> local_search(const SetOracle& oracle, const FeasibleRegion& region,
                               double epsilon, const LocalSearchOptions& opt) {
  const int g = (int)region.ground.size();
  std::vector<char> take = greedy_matroid_intersection(oracle, region);
  if (g == 0) return take;
  double current = oracle(take);
  const int r = region.matroid_count();
  long iterations = 0;

  auto accept = [&](const std::vector<char>& trial) {
    double val = oracle(trial);
    if (val - current > epsilon / ((double)g * g) * std::max(current, 0.0) + 1e-12) {
      take = trial;
      current = val;
      return true;
    }
    return false;
  };

  bool improved = true;
  while (improved) {
    if (++iterations > opt.max_iterations)
      throw IterationCapExceeded("local search exceeded its iteration cap");
    improved = false;
    for (int e = 0; e < g && !improved; ++e) {  // additions
      if (take[e] || !region.can_add(take, e)) continue;
      auto trial = take;
      trial[e] = 1;
      improved = accept(trial);
    }
    for (int e = 0; e < g && !improved; ++e) {  // deletions
      if (!take[e]) continue;
      auto trial = take;
      trial[e] = 0;
      improved = accept(trial);
    }
    if (improved) continue;
    // swaps: one element out, up to r elements in
    std::vector<int> outs, ins;
    for (int e = 0; e < g; ++e) (take[e] ? outs : ins).push_back(e);
    for (int out : outs) {
      auto base = take;
      base[out] = 0;
      std::vector<int> stack;
      std::function<bool(std::size_t)> explore = [&](std::size_t from) {
        for (std::size_t k = from; k < ins.size(); ++k) {
          base[ins[k]] = 1;
          stack.push_back(ins[k]);
          if (region.independent(base)) {
            if (accept(base)) return true;
            if ((int)stack.size() < r && explore(k + 1)) return true;
          }
          base[ins[k]] = 0;
          stack.pop_back();
        }
        return false;
      };
      if (explore(0)) {
        improved = true;
        break;
      }
    }
  }
  return take;
}

// ---------------------------------------------------------------------------

namespace {

class SetPlanRun : public PolicyRun {
 public:
  SetPlanRun(const MarketInstance& inst, const PlatformDesign& design, DisplayPlan first)
      : inst_(inst), design_(design), first_(std::move(first)) {}

  DisplayPlan plan(const MarketState& state) override {
    if (state.period == 1) {
      DisplayPlan p = first_;
      fill_plan_from_backlog(inst_, state, p);
      p.normalize();
      return p;
    }
    return solve_second_general(inst_, design_, state).plan;
  }

 private:
  const MarketInstance& inst_;
  PlatformDesign design_;
  DisplayPlan first_;
};

DisplayPlan plan_from_take(const std::vector<GroundElement>& ground,
                           const std::vector<char>& take) {
  DisplayPlan p;
  for (std::size_t k = 0; k < ground.size(); ++k) {
    if (!take[k]) continue;
    if (ground[k].is_edge)
      p.w.push_back({ground[k].a, ground[k].b});
    else
      p.x.push_back({ground[k].a, ground[k].b});
  }
  p.normalize();
  return p;
}

}  // namespace

std::string SubmodularPolicy::name() const {
  switch (algorithm_) {
    case SubmodularAlgorithm::continuous_greedy_rounded: return "cg-rounded";
    case SubmodularAlgorithm::greedy: return "gg-greedy";
    case SubmodularAlgorithm::local_search: return "gg-local-search";
  }
  return "submodular";
}

void SubmodularPolicy::prepare(const MarketInstance& inst, const PlatformDesign& design) {
  if (inst.horizon != 2) throw std::invalid_argument("two-period policy needs horizon 2");
  inst_ = &inst;
  design_ = design;
  if (algorithm_ == SubmodularAlgorithm::continuous_greedy_rounded) {
    cg_ = continuous_greedy(inst, design, {}, Rng(0x6d617463680aULL));
    return;
  }
  region_ = build_feasible_region(inst, design);
  SetOracle oracle = make_display_value_oracle(inst, region_.ground);
  chosen_ = algorithm_ == SubmodularAlgorithm::greedy
                ? greedy_matroid_intersection(oracle, region_)
                : local_search(oracle, region_, epsilon_);
}

std::unique_ptr<PolicyRun> SubmodularPolicy::start_run(Rng rng) const {
  if (algorithm_ != SubmodularAlgorithm::continuous_greedy_rounded)
    return std::make_unique<SetPlanRun>(*inst_, design_,
                                        plan_from_take(region_.ground, chosen_));
  // round the arc shares initiator by initiator
  const int n = inst_->num_users();
  std::vector<char> take(cg_.ground.size(), 0);
  for (int u = 0; u < n; ++u) {
    std::vector<int> mine;
    std::vector<double> frac;
    for (std::size_t e = 0; e < cg_.ground.size(); ++e)
      if (cg_.ground[e].a == u) {
        double phi = inst_->like_prob(1, cg_.ground[e].a, cg_.ground[e].b);
        mine.push_back((int)e);
        frac.push_back(phi > 0.0 ? std::min(1.0, cg_.z[e] / phi) : 0.0);
      }
    if (mine.empty()) continue;
    auto rounded = dependent_rounding(frac, rng);
    for (std::size_t k = 0; k < mine.size(); ++k)
      if (rounded[k]) take[mine[k]] = 1;
  }
  return std::make_unique<SetPlanRun>(*inst_, design_, plan_from_take(cg_.ground, take));
}

}  // namespace matchsim

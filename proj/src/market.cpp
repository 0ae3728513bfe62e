#include "matchsim/market.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace matchsim {

std::string PlatformDesign::label() const {
  std::string d;
  switch (direction) {
    case Direction::one_from_i: d = "one-i"; break;
    case Direction::one_from_j: d = "one-j"; break;
    case Direction::two_directional: d = "two"; break;
  }
  switch (timing) {
    case Timing::sequential_only: return d + "/seq";
    case Timing::nonseq_first_period: return d + "/nonseq-first";
    case Timing::nonseq_all_periods: return d + "/nonseq-all";
  }
  return d;
}

bool MarketInstance::is_potential(int u, int v) const {
  const auto& p = potentials[u];
  return std::binary_search(p.begin(), p.end(), v);
}

bool MarketInstance::time_homogeneous() const {
  // element-wise with NaN == NaN: missing entries do not break homogeneity
  for (std::size_t t = 1; t < phi.size(); ++t) {
    if (phi[t].size() != phi[0].size()) return false;
    for (std::size_t k = 0; k < phi[t].size(); ++k) {
      bool both_nan = std::isnan(phi[t][k]) && std::isnan(phi[0][k]);
      if (!both_nan && phi[t][k] != phi[0][k]) return false;
    }
  }
  return true;
}

void validate_instance(const MarketInstance& inst) {
  using Code = ValidationError::Code;
  const int n = inst.num_users();
  if (inst.n_i <= 0 || inst.n_j <= 0)
    throw ValidationError(Code::missing_probability, "instance needs users on both sides");
  if ((int)inst.names.size() != n || (int)inst.capacity.size() != n ||
      (int)inst.potentials.size() != n)
    throw ValidationError(Code::missing_probability, "instance arrays disagree on user count");
  if (inst.horizon < 1 || (int)inst.phi.size() != inst.horizon)
    throw ValidationError(Code::missing_probability, "need one probability table per period");

  for (int u = 0; u < n; ++u) {
    for (int v : inst.potentials[u]) {
      if (v < 0 || v >= n || inst.is_i_side(u) == inst.is_i_side(v))
        throw ValidationError(Code::asymmetric_potentials,
                              "potential of " + inst.names[u] + " is not on the opposite side");
      if (!inst.is_potential(v, u))
        throw ValidationError(Code::asymmetric_potentials,
                              "pair (" + inst.names[u] + "," + inst.names[v] +
                                  ") present in one direction only");
    }
  }
  for (int t = 1; t <= inst.horizon; ++t) {
    if ((int)inst.phi[t - 1].size() != n * n)
      throw ValidationError(Code::missing_probability, "probability table has wrong size");
    for (int u = 0; u < n; ++u) {
      for (int v : inst.potentials[u]) {
        double p = inst.like_prob(t, u, v);
        if (std::isnan(p))
          throw ValidationError(Code::missing_probability,
                                "no like probability for (" + inst.names[u] + "," +
                                    inst.names[v] + ") in period " + std::to_string(t));
        if (p < 0.0 || p > 1.0)
          throw ValidationError(Code::probability_out_of_range,
                                "like probability for (" + inst.names[u] + "," + inst.names[v] +
                                    ") in period " + std::to_string(t) + " is " +
                                    std::to_string(p));
      }
    }
  }
  if (!inst.initial_backlog.empty()) {
    if ((int)inst.initial_backlog.size() != n)
      throw ValidationError(Code::backlog_not_subset, "backlog array has wrong user count");
    for (int u = 0; u < n; ++u)
      for (int v : inst.initial_backlog[u])
        if (!inst.is_potential(u, v))
          throw ValidationError(Code::backlog_not_subset,
                                "backlog member " + std::to_string(v) + " of " + inst.names[u] +
                                    " is not a potential");
  }
  for (int u = 0; u < n; ++u)
    if (inst.capacity[u] < 0)
      throw ValidationError(Code::probability_out_of_range,
                            "negative capacity for " + inst.names[u]);
}

bool MarketState::in_backlog(int user, int candidate) const {
  const auto& b = backlog[user];
  return std::binary_search(b.begin(), b.end(), candidate);
}

void DisplayPlan::normalize() {
  std::sort(x.begin(), x.end());
  x.erase(std::unique(x.begin(), x.end()), x.end());
  for (auto& e : w)
    if (e.first > e.second) std::swap(e.first, e.second);
  std::sort(w.begin(), w.end());
  w.erase(std::unique(w.begin(), w.end()), w.end());
}

std::vector<std::pair<int, int>> DisplayPlan::views() const {
  std::vector<std::pair<int, int>> out;
  out.reserve(x.size() + 2 * w.size());
  for (auto& e : x) out.push_back(e);
  for (auto& e : w) {
    out.push_back({e.first, e.second});
    out.push_back({e.second, e.first});
  }
  return out;
}

int DisplayPlan::shows_count(int user) const {
  int c = 0;
  for (auto& e : x)
    if (e.first == user) ++c;
  for (auto& e : w)
    if (e.first == user || e.second == user) ++c;
  return c;
}

bool LikeDraw::liked_by(int viewer, int viewed) const {
  for (std::size_t k = 0; k < views.size(); ++k)
    if (views[k].first == viewer && views[k].second == viewed) return liked[k] != 0;
  return false;
}

LikeDraw sample_likes(const MarketInstance& inst, const DisplayPlan& plan, int period, Rng& rng) {
  LikeDraw draw;
  draw.views = plan.views();
  draw.liked.resize(draw.views.size());
  for (std::size_t k = 0; k < draw.views.size(); ++k) {
    auto [viewer, viewed] = draw.views[k];
    draw.liked[k] = rng.bernoulli(inst.like_prob(period, viewer, viewed)) ? 1 : 0;
  }
  return draw;
}

std::vector<std::string> plan_violations(const MarketInstance& inst, const PlatformDesign& design,
                                         const MarketState& state, const DisplayPlan& plan) {
  std::vector<std::string> out;
  const int n = inst.num_users();
  auto name = [&](int u) { return inst.names[u]; };
  std::vector<int> count(n, 0);
  std::set<std::pair<int, int>> seen_directed;
  std::set<std::pair<int, int>> pair_used;  // canonical (min,max)

  auto check_view = [&](int viewer, int viewed, bool mutual) {
    if (viewer < 0 || viewer >= n || viewed < 0 || viewed >= n) {
      out.push_back("display with unknown user id");
      return;
    }
    const auto& pot = state.potentials[viewer];
    if (!std::binary_search(pot.begin(), pot.end(), viewed))
      out.push_back(name(viewed) + " is not a current potential of " + name(viewer));
    if (!seen_directed.insert({viewer, viewed}).second)
      out.push_back("duplicate display " + name(viewer) + " -> " + name(viewed));
    ++count[viewer];
    if (!mutual && !inst.initiates(design, viewer) && !state.in_backlog(viewer, viewed))
      out.push_back(name(viewer) + " is on the responding side but " + name(viewed) +
                    " is not in their backlog");
  };

  for (auto& [viewer, viewed] : plan.x) {
    check_view(viewer, viewed, false);
    auto key = std::minmax(viewer, viewed);
    if (!pair_used.insert({key.first, key.second}).second)
      out.push_back("pair (" + name(viewer) + "," + name(viewed) + ") displayed more than once");
  }
  for (auto& [a, b] : plan.w) {
    if (!design.allows_mutual(state.period)) {
      out.push_back("mutual display (" + name(a) + "," + name(b) +
                    ") but the design forbids non-sequential interactions in period " +
                    std::to_string(state.period));
    }
    check_view(a, b, true);
    check_view(b, a, true);
    auto key = std::minmax(a, b);
    if (!pair_used.insert({key.first, key.second}).second)
      out.push_back("pair (" + name(a) + "," + name(b) + ") displayed more than once");
  }
  for (int u = 0; u < n; ++u)
    if (count[u] > inst.capacity[u])
      out.push_back(name(u) + " is shown " + std::to_string(count[u]) + " profiles, capacity " +
                    std::to_string(inst.capacity[u]));
  return out;
}

bool plan_is_feasible(const MarketInstance& inst, const PlatformDesign& design,
                      const MarketState& state, const DisplayPlan& plan) {
  return plan_violations(inst, design, state, plan).empty();
}

TransitionResult transition(const MarketInstance& inst, const PlatformDesign& design,
                            const MarketState& state, const DisplayPlan& plan,
                            const LikeDraw& likes) {
  auto viol = plan_violations(inst, design, state, plan);
  if (!viol.empty()) throw InfeasiblePlan(viol.front());

  const int n = inst.num_users();
  TransitionResult res;
  res.next.period = state.period + 1;
  res.next.potentials.assign(n, {});
  res.next.backlog.assign(n, {});

  // per-user sets of who they saw / who liked them / who disliked them
  std::vector<std::vector<int>> shown(n), likers(n), dislikers(n);
  for (std::size_t k = 0; k < likes.views.size(); ++k) {
    auto [viewer, viewed] = likes.views[k];
    shown[viewer].push_back(viewed);
    (likes.liked[k] ? likers : dislikers)[viewed].push_back(viewer);
  }
  for (int u = 0; u < n; ++u) {
    std::sort(shown[u].begin(), shown[u].end());
    std::sort(likers[u].begin(), likers[u].end());
    std::sort(dislikers[u].begin(), dislikers[u].end());
  }

  // matches: sequential = liked a backlog member just shown; mutual = both liked
  for (auto& [viewer, viewed] : plan.x) {
    if (state.in_backlog(viewer, viewed) && likes.liked_by(viewer, viewed)) {
      int iu = inst.is_i_side(viewer) ? viewer : viewed;
      int ju = inst.is_i_side(viewer) ? viewed : viewer;
      res.matches.push_back({iu, ju, state.period, true});
    }
  }
  for (auto& [a, b] : plan.w) {
    if (likes.liked_by(a, b) && likes.liked_by(b, a)) {
      int iu = inst.is_i_side(a) ? a : b;
      int ju = inst.is_i_side(a) ? b : a;
      res.matches.push_back({iu, ju, state.period, false});
    }
  }

  auto contains = [](const std::vector<int>& v, int x) {
    return std::binary_search(v.begin(), v.end(), x);
  };
  for (int u = 0; u < n; ++u) {
    for (int v : state.potentials[u])
      if (!contains(shown[u], v) && !contains(dislikers[u], v))
        res.next.potentials[u].push_back(v);
    // likers outside the current potentials stay out: their pair is already
    // settled (they were harvested into a match this period)
    std::vector<int> merged = state.backlog[u];
    for (int v : likers[u])
      if (contains(state.potentials[u], v)) merged.push_back(v);
    std::sort(merged.begin(), merged.end());
    merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
    for (int v : merged)
      if (!contains(shown[u], v) && contains(res.next.potentials[u], v))
        res.next.backlog[u].push_back(v);
  }
  // a matched pair leaves the market entirely
  for (const MatchRecord& m : res.matches) {
    std::erase(res.next.potentials[m.i_user], m.j_user);
    std::erase(res.next.backlog[m.i_user], m.j_user);
    std::erase(res.next.potentials[m.j_user], m.i_user);
    std::erase(res.next.backlog[m.j_user], m.i_user);
  }
  return res;
}

double backlog_probability(const MarketInstance& inst,
                           const std::vector<std::pair<int, int>>& x_displays,
                           const std::vector<std::vector<int>>& backlog_family) {
  const int n = inst.num_users();
  // arc (viewer, viewed): viewer may become a backlog member of viewed
  std::set<std::pair<int, int>> shown(x_displays.begin(), x_displays.end());
  double p = 1.0;
  for (int u = 0; u < n; ++u) {
    const auto& fam = backlog_family[u];
    for (int v : fam)
      if (!inst.is_potential(u, v))
        throw InfeasiblePlan("backlog family member " + inst.names[v] +
                             " is not a potential of " + inst.names[u]);
    for (int v : inst.potentials[u]) {
      double q = shown.count({v, u}) ? inst.like_prob(1, v, u) : 0.0;
      bool member = std::binary_search(fam.begin(), fam.end(), v);
      p *= member ? q : (1.0 - q);
    }
  }
  return p;
}

}  // namespace matchsim

#include "matchsim/second_stage.hpp"

#include <algorithm>
#include <map>

namespace matchsim {

FUserResult f_user(std::vector<std::pair<int, double>> candidates, int capacity) {
  std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  FUserResult res;
  int take = std::min<int>(capacity, (int)candidates.size());
  for (int k = 0; k < take; ++k) {
    res.value += candidates[k].second;
    res.chosen.push_back(candidates[k].first);
  }
  std::sort(res.chosen.begin(), res.chosen.end());
  return res;
}

FUserResult f_user(const MarketInstance& inst, int user, const std::vector<int>& backlog,
                   int period, int capacity) {
  std::vector<std::pair<int, double>> cand;
  cand.reserve(backlog.size());
  for (int b : backlog) cand.push_back({b, inst.like_prob(period, user, b)});
  return f_user(std::move(cand), capacity);
}

double f_total(const MarketInstance& inst, const std::vector<std::vector<int>>& backlog_family,
               int period) {
  double total = 0.0;
  for (int u = 0; u < inst.num_users(); ++u)
    total += f_user(inst, u, backlog_family[u], period, inst.capacity[u]).value;
  return total;
}

double expected_topk_value(std::vector<std::tuple<double, double, int>> entries, int capacity) {
  if (capacity <= 0) return 0.0;
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    return std::get<2>(a) < std::get<2>(b);
  });
  // dist[c] = P(exactly c higher-priority entries present), c capped at capacity
  std::vector<double> dist(capacity + 1, 0.0);
  dist[0] = 1.0;
  double total = 0.0;
  for (auto& [value, prob, id] : entries) {
    (void)id;
    double room = 0.0;
    for (int c = 0; c < capacity; ++c) room += dist[c];
    total += value * prob * room;
    std::vector<double> next(capacity + 1, 0.0);
    for (int c = 0; c <= capacity; ++c) {
      if (dist[c] == 0.0) continue;
      int up = std::min(c + 1, capacity);
      next[up] += dist[c] * prob;
      next[c] += dist[c] * (1.0 - prob);
    }
    dist.swap(next);
  }
  return total;
}

SecondStageSolution solve_second_general(const MarketInstance& inst, const PlatformDesign& design,
                                         const MarketState& state) {
  const int n = inst.num_users();
  lp::LinearProgram prog;
  std::vector<std::pair<int, int>> x_vars;  // (viewer, backlog member)
  std::vector<std::pair<int, int>> w_vars;  // canonical (i, j)
  std::map<std::pair<int, int>, int> x_index;

  for (int u = 0; u < n; ++u)
    for (int b : state.backlog[u]) {
      int v = prog.add_var(0.0, 1.0, inst.like_prob(state.period, u, b));
      x_index[{u, b}] = v;
      x_vars.push_back({u, b});
    }
  bool mutual_ok = design.allows_mutual(state.period);
  if (mutual_ok) {
    for (int i = 0; i < inst.n_i; ++i)
      for (int j : state.potentials[i]) {
        if (state.in_backlog(i, j)) continue;
        const auto& pj = state.potentials[j];
        if (!std::binary_search(pj.begin(), pj.end(), i)) continue;
        if (state.in_backlog(j, i)) continue;
        prog.add_var(0.0, 1.0, inst.match_prob(state.period, i, j));
        w_vars.push_back({i, j});
      }
  }
  const int nx = (int)x_vars.size();
  // per-user capacity over own backlog displays plus incident mutual pairs
  for (int u = 0; u < n; ++u) {
    std::vector<std::pair<int, double>> row;
    for (int k = 0; k < nx; ++k)
      if (x_vars[k].first == u) row.push_back({k, 1.0});
    for (int k = 0; k < (int)w_vars.size(); ++k)
      if (w_vars[k].first == u || w_vars[k].second == u) row.push_back({nx + k, 1.0});
    if (!row.empty()) prog.add_row(std::move(row), lp::Rel::le, (double)inst.capacity[u]);
  }
  // a pair appears at most once even if both directions sit in each other's
  // backlog (cannot happen in reachable states, cheap to enforce anyway)
  for (int k = 0; k < nx; ++k) {
    auto [u, b] = x_vars[k];
    if (u < b) {
      auto it = x_index.find({b, u});
      if (it != x_index.end())
        prog.add_row({{k, 1.0}, {it->second, 1.0}}, lp::Rel::le, 1.0);
    }
  }

  SecondStageSolution out;
  lp::Solution sol = solve_lp(prog);
  if (sol.status != lp::Status::optimal)
    throw lp::NumericalInstability("second-stage LP not optimal");
  std::vector<int> all_vars(prog.num_vars);
  for (int k = 0; k < prog.num_vars; ++k) all_vars[k] = k;
  if (!sol.integral(all_vars)) {
    out.lp_integral = false;
    lp::MipProblem mip{prog, all_vars, {}};
    sol = solve_mip(mip);
  }
  for (int k = 0; k < nx; ++k)
    if (sol.values[k] > 0.5) out.plan.x.push_back(x_vars[k]);
  for (int k = 0; k < (int)w_vars.size(); ++k)
    if (sol.values[nx + k] > 0.5) out.plan.w.push_back(w_vars[k]);
  out.plan.normalize();
  out.value = sol.objective;
  return out;
}

void fill_plan_from_backlog(const MarketInstance& inst, const MarketState& state,
                            DisplayPlan& plan) {
  for (int u = 0; u < inst.num_users(); ++u) {
    if (state.backlog[u].empty()) continue;
    int residual = inst.capacity[u] - plan.shows_count(u);
    if (residual <= 0) continue;
    std::vector<int> eligible;
    for (int b : state.backlog[u]) {
      bool used = false;
      for (auto& [a, c] : plan.x)
        if ((a == u && c == b) || (a == b && c == u)) { used = true; break; }
      if (!used)
        for (auto& [a, c] : plan.w)
          if ((a == u && c == b) || (a == b && c == u)) { used = true; break; }
      if (!used) eligible.push_back(b);
    }
    auto pick = f_user(inst, u, eligible, state.period, residual);
    for (int b : pick.chosen) plan.x.push_back({u, b});
  }
}

}  // namespace matchsim

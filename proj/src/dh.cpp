#include "matchsim/dh.hpp"

#include <algorithm>
#include <cassert>

#include "matchsim/second_stage.hpp"
#include "matchsim/submodular.hpp"

namespace matchsim {

namespace {

PlatformDesign strip_mutual(PlatformDesign d) {
  d.timing = PlatformDesign::Timing::sequential_only;
  return d;
}

}  // namespace

DhModel build_dh_relaxation(const MarketInstance& inst, const PlatformDesign& design, DhForm form) {
  if (form == DhForm::multi_period && !inst.time_homogeneous())
    throw TimeInhomogeneousMultiPeriod("multi-period relaxation needs time-homogeneous probabilities");
  if (form == DhForm::two_period && inst.horizon != 2)
    throw std::invalid_argument("two-period relaxation needs horizon 2");

  const int n = inst.num_users();
  const bool backlogged = !inst.initial_backlog.empty();
  auto in_initial_backlog = [&](int u, int v) {
    if (!backlogged) return false;
    const auto& b = inst.initial_backlog[u];
    return std::binary_search(b.begin(), b.end(), v);
  };

  DhModel model;
  model.form = form;
  lp::LinearProgram& prog = model.mip.lp;

  std::map<std::pair<int, int>, int> x_index, w_index;
  model.x_base = 0;
  for (int u = 0; u < n; ++u) {
    const bool init = inst.initiates(design, u);
    for (int v : inst.potentials[u]) {
      if (in_initial_backlog(u, v)) {
        // settle-now display for a member already waiting: the reply is
        // certain, so the match lands this period at this period's like prob.
        // Deferring instead is the y variable below; at most one of the two.
        if (form == DhForm::two_period) {
          x_index[{u, v}] = prog.add_var(0.0, 1.0, inst.like_prob(1, u, v));
          model.x_vars.push_back({u, v});
        }
        continue;
      }
      if (!init) continue;
      x_index[{u, v}] = prog.add_var(0.0, 1.0, 0.0);
      model.x_vars.push_back({u, v});
    }
  }
  model.w_base = prog.num_vars;
  if (design.allows_mutual(1)) {
    for (int i = 0; i < inst.n_i; ++i)
      for (int j : inst.potentials[i]) {
        if (!inst.is_potential(j, i)) continue;
        if (in_initial_backlog(i, j) || in_initial_backlog(j, i)) continue;
        w_index[{i, j}] = prog.add_var(0.0, 1.0, inst.match_prob(1, i, j));
        model.w_vars.push_back({i, j});
      }
  }
  model.y_base = prog.num_vars;
  const int yper = form == DhForm::two_period ? 2 : 1;
  for (int u = 0; u < n; ++u) {
    for (int v : inst.potentials[u]) {
      double coef = inst.like_prob(yper, u, v);
      if (in_initial_backlog(u, v)) {
        int y = prog.add_var(0.0, 1.0, coef);
        model.y_vars.push_back({u, v});
        if (auto it = x_index.find({u, v}); it != x_index.end())
          prog.add_row({{y, 1.0}, {it->second, 1.0}}, lp::Rel::le, 1.0);
      } else if (!in_initial_backlog(v, u)) {
        // a settle-now display is not a fresh arc: that pair resolves on the
        // spot and leaves nothing to answer next period
        if (auto it = x_index.find({v, u}); it != x_index.end()) {
          int y = prog.add_var(0.0, 1.0, coef);
          model.y_vars.push_back({u, v});
          prog.add_row({{y, 1.0}, {it->second, -inst.like_prob(1, v, u)}}, lp::Rel::le, 0.0);
        }
      }
    }
  }

  // a pair is displayed at most one way in the planning stage
  for (int i = 0; i < inst.n_i; ++i)
    for (int j : inst.potentials[i]) {
      std::vector<std::pair<int, double>> row;
      if (auto it = x_index.find({i, j}); it != x_index.end()) row.push_back({it->second, 1.0});
      if (auto it = x_index.find({j, i}); it != x_index.end()) row.push_back({it->second, 1.0});
      if (auto it = w_index.find({i, j}); it != w_index.end()) row.push_back({it->second, 1.0});
      if (row.size() >= 2) prog.add_row(std::move(row), lp::Rel::le, 1.0);
    }

  const double periods = form == DhForm::multi_period ? (double)inst.horizon : 1.0;
  for (int u = 0; u < n; ++u) {
    std::vector<std::pair<int, double>> shows;
    for (int k = 0; k < (int)model.x_vars.size(); ++k)
      if (model.x_vars[k].first == u) shows.push_back({model.x_base + k, 1.0});
    for (int k = 0; k < (int)model.w_vars.size(); ++k)
      if (model.w_vars[k].first == u || model.w_vars[k].second == u)
        shows.push_back({model.w_base + k, 1.0});
    std::vector<std::pair<int, double>> harvests;
    for (int k = 0; k < (int)model.y_vars.size(); ++k)
      if (model.y_vars[k].first == u) harvests.push_back({model.y_base + k, 1.0});
    if (form == DhForm::two_period) {
      if (!shows.empty())
        prog.add_row(std::move(shows), lp::Rel::le, (double)inst.capacity[u]);
      if (!harvests.empty())
        prog.add_row(std::move(harvests), lp::Rel::le, (double)inst.capacity[u]);
    } else {
      shows.insert(shows.end(), harvests.begin(), harvests.end());
      if (!shows.empty())
        prog.add_row(std::move(shows), lp::Rel::le, inst.capacity[u] * periods);
    }
  }

  // creation order (initiator side, user, partner, then pairs) doubles as the
  // deterministic branching order
  for (int k = 0; k < (int)(model.x_vars.size() + model.w_vars.size()); ++k)
    model.mip.integer_vars.push_back(k);
  return model;
}

DhRelaxationSolution solve_dh_relaxation(const DhModel& model, const lp::MipOptions& opt) {
  lp::Solution sol = solve_mip(model.mip, opt);
  if (sol.status != lp::Status::optimal)
    throw lp::NumericalInstability("display relaxation did not solve to optimality");
  DhRelaxationSolution out;
  out.objective = sol.objective;
  out.upper_bound = sol.bound;
  out.proven = sol.proven;
  out.nodes = sol.nodes;
  for (int k = 0; k < (int)model.x_vars.size(); ++k)
    if (sol.values[model.x_base + k] > 0.5) out.x.push_back(model.x_vars[k]);
  for (int k = 0; k < (int)model.w_vars.size(); ++k)
    if (sol.values[model.w_base + k] > 0.5) out.w.push_back(model.w_vars[k]);
  for (int k = 0; k < (int)model.y_vars.size(); ++k)
    if (sol.values[model.y_base + k] > 1e-9)
      out.y.push_back({model.y_vars[k].first, model.y_vars[k].second,
                       sol.values[model.y_base + k]});
  return out;
}

// ---------------------------------------------------------------------------
// integral two-period policy

namespace {

// policies accept the best incumbent on large markets, where the rounding
// dive already lands within a percent of the tree bound; small markets get a
// budget big enough to close the tree, keeping those solves exact
lp::MipOptions policy_mip_options(const DhModel& model) {
  lp::MipOptions opt;
  opt.node_limit = model.mip.integer_vars.size() <= 60 ? 200000 : 200;
  opt.best_effort = true;
  return opt;
}

class IntegralRun : public PolicyRun {
 public:
  IntegralRun(const MarketInstance& inst, const PlatformDesign& design, DhVariant variant,
              const DhRelaxationSolution& sol)
      : inst_(inst), design_(design), variant_(variant), sol_(sol) {}

  DisplayPlan plan(const MarketState& state) override {
    DisplayPlan p;
    if (state.period == 1) {
      p.x = sol_.x;
      p.w = sol_.w;
      fill_plan_from_backlog(inst_, state, p);
    } else if (variant_ == DhVariant::both) {
      p = solve_second_general(inst_, design_, state).plan;
    } else {
      for (int u = 0; u < inst_.num_users(); ++u) {
        auto pick = f_user(inst_, u, state.backlog[u], state.period, inst_.capacity[u]);
        for (int b : pick.chosen) p.x.push_back({u, b});
      }
    }
    p.normalize();
    return p;
  }

 private:
  const MarketInstance& inst_;
  PlatformDesign design_;
  DhVariant variant_;
  const DhRelaxationSolution& sol_;
};

}  // namespace

std::string DhIntegralPolicy::name() const {
  switch (variant_) {
    case DhVariant::none: return "dh-none";
    case DhVariant::first: return "dh-first";
    case DhVariant::both: return "dh-both";
  }
  return "dh";
}

void DhIntegralPolicy::prepare(const MarketInstance& inst, const PlatformDesign& design) {
  if (inst.horizon != 2) throw std::invalid_argument("two-period policy needs horizon 2");
  if (variant_ == DhVariant::both && !design.allows_mutual(2))
    throw IncompatibleAlgorithmDesign(
        "design forbids non-sequential interactions in the final period");
  inst_ = &inst;
  design_ = design;
  PlatformDesign eff = variant_ == DhVariant::none ? strip_mutual(design) : design;
  DhModel model = build_dh_relaxation(inst, eff, DhForm::two_period);
  sol_ = solve_dh_relaxation(model, policy_mip_options(model));
}

std::unique_ptr<PolicyRun> DhIntegralPolicy::start_run(Rng) const {
  return std::make_unique<IntegralRun>(*inst_, design_, variant_, sol_);
}

// ---------------------------------------------------------------------------
// fractional lookahead policy

namespace {

struct WindowVars {
  lp::LinearProgram prog;
  std::vector<std::pair<int, int>> x1, y1, w1;  // current-period variables
  std::vector<int> x1_id, y1_id, w1_id;
};

WindowVars build_window(const MarketInstance& inst, const PlatformDesign& design,
                        const MarketState& state) {
  WindowVars wv;
  lp::LinearProgram& prog = wv.prog;
  const int n = inst.num_users();
  const int t = state.period;
  const int taus = t < inst.horizon ? 2 : 1;

  std::map<std::tuple<int, int, int>, int> x_id, y_id;   // (tau, viewer, target)
  std::map<std::tuple<int, int, int>, int> w_id;         // (tau, i, j)

  for (int tau = 1; tau <= taus; ++tau) {
    int g = t + tau - 1;
    for (int u = 0; u < n; ++u) {
      if (!inst.initiates(design, u)) continue;
      for (int v : state.potentials[u]) {
        if (state.in_backlog(u, v)) continue;
        int id = prog.add_var(0.0, 1.0, 0.0);
        x_id[{tau, u, v}] = id;
        if (tau == 1) { wv.x1.push_back({u, v}); wv.x1_id.push_back(id); }
      }
      (void)g;
    }
  }
  for (int tau = 1; tau <= taus; ++tau) {
    int g = t + tau - 1;
    if (!design.allows_mutual(g)) continue;
    for (int i = 0; i < inst.n_i; ++i)
      for (int j : state.potentials[i]) {
        if (state.in_backlog(i, j)) continue;
        const auto& pj = state.potentials[j];
        if (!std::binary_search(pj.begin(), pj.end(), i) || state.in_backlog(j, i)) continue;
        int id = prog.add_var(0.0, 1.0, inst.match_prob(g, i, j));
        w_id[{tau, i, j}] = id;
        if (tau == 1) { wv.w1.push_back({i, j}); wv.w1_id.push_back(id); }
      }
  }
  for (int u = 0; u < n; ++u) {
    for (int v : state.backlog[u]) {
      int id = prog.add_var(0.0, 1.0, inst.like_prob(t, u, v));
      y_id[{1, u, v}] = id;
      wv.y1.push_back({u, v});
      wv.y1_id.push_back(id);
    }
  }
  if (taus == 2) {
    for (int u = 0; u < n; ++u) {
      for (int v : state.potentials[u]) {
        bool held = state.in_backlog(u, v);
        auto xit = x_id.find({1, v, u});
        if (!held && xit == x_id.end()) continue;
        int id = prog.add_var(0.0, 1.0, inst.like_prob(t + 1, u, v));
        y_id[{2, u, v}] = id;
        if (held) {
          prog.add_row({{y_id[{1, u, v}], 1.0}, {id, 1.0}}, lp::Rel::le, 1.0);
        } else {
          double phi = inst.like_prob(t, v, u);
          std::vector<std::pair<int, double>> row{{id, 1.0}, {xit->second, -phi}};
          int ii = inst.is_i_side(u) ? u : v;
          int jj = inst.is_i_side(u) ? v : u;
          if (auto wit = w_id.find({1, ii, jj}); wit != w_id.end())
            row.push_back({wit->second, phi});
          prog.add_row(std::move(row), lp::Rel::le, 0.0);
        }
      }
    }
  }
  // mutual displays ride on both users' planned initiations where those exist
  for (auto& [key, wid] : w_id) {
    auto [tau, i, j] = key;
    if (auto it = x_id.find({tau, i, j}); it != x_id.end())
      prog.add_row({{wid, 1.0}, {it->second, -1.0}}, lp::Rel::le, 0.0);
    if (auto it = x_id.find({tau, j, i}); it != x_id.end())
      prog.add_row({{wid, 1.0}, {it->second, -1.0}}, lp::Rel::le, 0.0);
  }
  // each ordered view happens at most once over the lookahead window
  for (int u = 0; u < n; ++u) {
    bool resp = !inst.initiates(design, u);
    for (int v : state.potentials[u]) {
      std::vector<std::pair<int, double>> row;
      for (int tau = 1; tau <= taus; ++tau) {
        if (auto it = x_id.find({tau, u, v}); it != x_id.end()) row.push_back({it->second, 1.0});
        if (auto it = y_id.find({tau, u, v}); it != y_id.end()) row.push_back({it->second, 1.0});
        if (resp) {
          int ii = inst.is_i_side(u) ? u : v;
          int jj = inst.is_i_side(u) ? v : u;
          if (auto it = w_id.find({tau, ii, jj}); it != w_id.end()) row.push_back({it->second, 1.0});
        }
      }
      if (row.size() >= 2) prog.add_row(std::move(row), lp::Rel::le, 1.0);
    }
  }
  // per-period capacities
  for (int tau = 1; tau <= taus; ++tau) {
    for (int u = 0; u < n; ++u) {
      bool resp = !inst.initiates(design, u);
      std::vector<std::pair<int, double>> row;
      for (auto& [key, id] : x_id)
        if (std::get<0>(key) == tau && std::get<1>(key) == u) row.push_back({id, 1.0});
      for (auto& [key, id] : y_id)
        if (std::get<0>(key) == tau && std::get<1>(key) == u) row.push_back({id, 1.0});
      if (resp)
        for (auto& [key, id] : w_id) {
          if (std::get<0>(key) != tau) continue;
          if (std::get<1>(key) == u || std::get<2>(key) == u) row.push_back({id, 1.0});
        }
      if (!row.empty()) prog.add_row(std::move(row), lp::Rel::le, (double)inst.capacity[u]);
    }
  }
  return wv;
}

class FractionalRun : public PolicyRun {
 public:
  FractionalRun(const MarketInstance& inst, const PlatformDesign& design, DhVariant variant)
      : inst_(inst), design_(design), variant_(variant) {}

  DisplayPlan plan(const MarketState& state) override {
    PlatformDesign eff = variant_ == DhVariant::none ? strip_mutual(design_) : design_;
    WindowVars wv = build_window(inst_, eff, state);
    lp::Solution sol = solve_lp(wv.prog);
    if (sol.status != lp::Status::optimal)
      throw lp::NumericalInstability("lookahead LP did not solve");

    DisplayPlan p;
    const int n = inst_.num_users();
    std::vector<int> used(n, 0);
    auto displays = [&](int a, int b) {
      for (auto& e : p.x)
        if (e.first == a && e.second == b) return true;
      return false;
    };
    auto drop_x = [&](int a, int b) {
      for (std::size_t k = 0; k < p.x.size(); ++k)
        if (p.x[k].first == a && p.x[k].second == b) { p.x.erase(p.x.begin() + k); return; }
    };

    for (int u = 0; u < n; ++u) {
      struct Cand { double val; int target; bool harvest; };
      std::vector<Cand> cands;
      for (std::size_t k = 0; k < wv.y1.size(); ++k)
        if (wv.y1[k].first == u && sol.values[wv.y1_id[k]] > 1e-9)
          cands.push_back({sol.values[wv.y1_id[k]], wv.y1[k].second, true});
      std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.val != b.val) return a.val > b.val;
        return a.target < b.target;
      });
      std::vector<Cand> inits;
      for (std::size_t k = 0; k < wv.x1.size(); ++k)
        if (wv.x1[k].first == u && sol.values[wv.x1_id[k]] > 1e-9)
          inits.push_back({sol.values[wv.x1_id[k]], wv.x1[k].second, false});
      std::sort(inits.begin(), inits.end(), [](const Cand& a, const Cand& b) {
        if (a.val != b.val) return a.val > b.val;
        return a.target < b.target;
      });
      cands.insert(cands.end(), inits.begin(), inits.end());

      for (const Cand& c : cands) {
        if (used[u] >= inst_.capacity[u]) break;
        if (!c.harvest && displays(c.target, u)) {
          // the partner already shows u this period; pair up or skip
          if (eff.allows_mutual(state.period)) {
            drop_x(c.target, u);
            int ii = inst_.is_i_side(u) ? u : c.target;
            int jj = inst_.is_i_side(u) ? c.target : u;
            p.w.push_back({ii, jj});
            ++used[u];
          }
          continue;
        }
        p.x.push_back({u, c.target});
        ++used[u];
      }
    }
    // one-directional pairing: responders have no initiation variables, so
    // positive mutual-display values convert an existing initiation instead
    if (design_.direction != PlatformDesign::Direction::two_directional &&
        eff.allows_mutual(state.period)) {
      struct WCand { double val; int i, j; };
      std::vector<WCand> ws;
      for (std::size_t k = 0; k < wv.w1.size(); ++k)
        if (sol.values[wv.w1_id[k]] > 1e-9)
          ws.push_back({sol.values[wv.w1_id[k]], wv.w1[k].first, wv.w1[k].second});
      std::sort(ws.begin(), ws.end(), [](const WCand& a, const WCand& b) {
        if (a.val != b.val) return a.val > b.val;
        return std::tie(a.i, a.j) < std::tie(b.i, b.j);
      });
      for (const WCand& c : ws) {
        int init = inst_.initiates(design_, c.i) ? c.i : c.j;
        int resp = init == c.i ? c.j : c.i;
        if (!displays(init, resp)) continue;
        if (used[resp] >= inst_.capacity[resp]) continue;
        drop_x(init, resp);
        p.w.push_back({c.i, c.j});
        ++used[resp];
      }
    }
    p.normalize();
    return p;
  }

 private:
  const MarketInstance& inst_;
  PlatformDesign design_;
  DhVariant variant_;
};

}  // namespace

std::string DhFractionalPolicy::name() const { return "dh-fractional"; }

void DhFractionalPolicy::prepare(const MarketInstance& inst, const PlatformDesign& design) {
  inst_ = &inst;
  design_ = design;
}

std::unique_ptr<PolicyRun> DhFractionalPolicy::start_run(Rng) const {
  return std::make_unique<FractionalRun>(*inst_, design_, variant_);
}

// ---------------------------------------------------------------------------
// multi-period spread policy and the rounded one-directional variant

namespace {

class SpreadRun : public PolicyRun {
 public:
  SpreadRun(const MarketInstance& inst, const PlatformDesign& design,
            std::vector<std::vector<int>> planned_x, std::vector<std::pair<int, int>> planned_w)
      : inst_(inst), design_(design), x_left_(std::move(planned_x)), w_left_(std::move(planned_w)) {}

  DisplayPlan plan(const MarketState& state) override {
    const int n = inst_.num_users();
    const int t = state.period;
    DisplayPlan p;
    std::vector<int> used(n, 0);

    for (int u = 0; u < n; ++u) {
      // planned initiations, by decreasing reciprocal like probability
      auto& mine = x_left_[u];
      mine.erase(std::remove_if(mine.begin(), mine.end(),
                                [&](int v) {
                                  const auto& pot = state.potentials[u];
                                  return !std::binary_search(pot.begin(), pot.end(), v);
                                }),
                 mine.end());
      std::sort(mine.begin(), mine.end(), [&](int a, int b) {
        double pa = inst_.like_prob(t, a, u), pb = inst_.like_prob(t, b, u);
        if (pa != pb) return pa > pb;
        return a < b;
      });
      while (used[u] < inst_.capacity[u] && !mine.empty()) {
        int v = mine.front();
        mine.erase(mine.begin());
        p.x.push_back({u, v});
        ++used[u];
      }
      // planned mutual pairs, lowest partner id first, both users need slack
      if (design_.allows_mutual(t)) {
        std::vector<std::pair<int, int>> keep;
        for (auto& e : w_left_) {
          int a = e.first, b = e.second;
          if (a != u && b != u) { keep.push_back(e); continue; }
          int partner = a == u ? b : a;
          const auto& pu = state.potentials[u];
          const auto& pp = state.potentials[partner];
          if (!std::binary_search(pu.begin(), pu.end(), partner) ||
              !std::binary_search(pp.begin(), pp.end(), u))
            continue;  // stale pair, drop it
          if (used[u] < inst_.capacity[u] && used[partner] < inst_.capacity[partner]) {
            p.w.push_back({a, b});
            ++used[u];
            ++used[partner];
          } else {
            keep.push_back(e);  // retry in a later period
          }
        }
        w_left_ = std::move(keep);
      }
      // backlog harvesting with whatever capacity remains
      int residual = inst_.capacity[u] - used[u];
      if (residual > 0 && !state.backlog[u].empty()) {
        std::vector<int> eligible;
        for (int b : state.backlog[u]) {
          bool shown = false;
          for (auto& e : p.x)
            if (e.first == u && e.second == b) { shown = true; break; }
          if (!shown) eligible.push_back(b);
        }
        auto pick = f_user(inst_, u, eligible, t, residual);
        for (int b : pick.chosen) {
          p.x.push_back({u, b});
          ++used[u];
        }
      }
    }
    p.normalize();
    return p;
  }

 private:
  const MarketInstance& inst_;
  PlatformDesign design_;
  std::vector<std::vector<int>> x_left_;
  std::vector<std::pair<int, int>> w_left_;
};

}  // namespace

std::string DhMultiPeriodPolicy::name() const { return "dh-multi"; }

void DhMultiPeriodPolicy::prepare(const MarketInstance& inst, const PlatformDesign& design) {
  inst_ = &inst;
  design_ = design;
  PlatformDesign eff = variant_ == DhVariant::none ? strip_mutual(design) : design;
  DhModel model = build_dh_relaxation(inst, eff, DhForm::multi_period);
  sol_ = solve_dh_relaxation(model, policy_mip_options(model));
}

std::unique_ptr<PolicyRun> DhMultiPeriodPolicy::start_run(Rng) const {
  std::vector<std::vector<int>> planned(inst_->num_users());
  for (auto& [u, v] : sol_.x) planned[u].push_back(v);
  return std::make_unique<SpreadRun>(*inst_, design_, std::move(planned), sol_.w);
}

std::string DhOnedirRoundedPolicy::name() const { return "dh-onedir-rounded"; }

void DhOnedirRoundedPolicy::prepare(const MarketInstance& inst, const PlatformDesign& design) {
  if (design.direction == PlatformDesign::Direction::two_directional)
    throw IncompatibleAlgorithmDesign("rounded multi-period policy needs a one-directional design");
  inst_ = &inst;
  design_ = design;
  DhModel model = build_dh_relaxation(inst, strip_mutual(design), DhForm::multi_period);
  lp::Solution sol = solve_lp(model.mip.lp);
  if (sol.status != lp::Status::optimal)
    throw lp::NumericalInstability("one-directional LP did not solve");
  lp_objective_ = sol.objective;
  arcs_ = model.x_vars;
  arc_values_.clear();
  for (int k = 0; k < (int)arcs_.size(); ++k) arc_values_.push_back(sol.values[model.x_base + k]);
}

std::unique_ptr<PolicyRun> DhOnedirRoundedPolicy::start_run(Rng rng) const {
  const int n = inst_->num_users();
  std::vector<std::vector<int>> planned(n);
  for (int u = 0; u < n; ++u) {
    std::vector<double> frac;
    std::vector<int> targets;
    for (int k = 0; k < (int)arcs_.size(); ++k)
      if (arcs_[k].first == u) {
        frac.push_back(arc_values_[k]);
        targets.push_back(arcs_[k].second);
      }
    if (frac.empty()) continue;
    auto rounded = dependent_rounding(frac, rng);
    for (std::size_t k = 0; k < rounded.size(); ++k)
      if (rounded[k]) planned[u].push_back(targets[k]);
  }
  return std::make_unique<SpreadRun>(*inst_, design_, std::move(planned),
                                     std::vector<std::pair<int, int>>{});
}

}  // namespace matchsim

#include "matchsim/baselines.hpp"

#include <algorithm>

#include "matchsim/second_stage.hpp"

namespace matchsim {

namespace {

class LocalGreedyRun : public PolicyRun {
 public:
  LocalGreedyRun(const MarketInstance& inst, const PlatformDesign& design)
      : inst_(inst), design_(design) {}

  DisplayPlan plan(const MarketState& state) override {
    const int t = state.period;
    DisplayPlan p;
    for (int u = 0; u < inst_.num_users(); ++u) {
      struct Cand { double score; int v; };
      std::vector<Cand> cands;
      if (inst_.initiates(design_, u)) {
        for (int v : state.potentials[u]) {
          double s = inst_.like_prob(t, u, v);
          if (!state.in_backlog(u, v)) s *= inst_.like_prob(t, v, u);
          if (s > 0.0) cands.push_back({s, v});
        }
      } else {
        for (int v : state.backlog[u]) {
          double s = inst_.like_prob(t, u, v);
          if (s > 0.0) cands.push_back({s, v});
        }
      }
      std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.v < b.v;
      });
      int taken = 0;
      for (const Cand& c : cands) {
        if (taken >= inst_.capacity[u]) break;
        bool partner_shows_me = false;
        for (auto& [a, b] : p.x)
          if (a == c.v && b == u) { partner_shows_me = true; break; }
        if (partner_shows_me) {
          // both sides picked this pair; merge into one mutual display or drop
          if (design_.allows_mutual(t)) {
            std::erase(p.x, std::pair{c.v, u});
            p.w.push_back(inst_.is_i_side(u) ? std::pair{u, c.v} : std::pair{c.v, u});
            ++taken;
          }
          continue;
        }
        p.x.push_back({u, c.v});
        ++taken;
      }
    }
    p.normalize();
    return p;
  }

 private:
  const MarketInstance& inst_;
  PlatformDesign design_;
};

class PerfectMatchingRun : public PolicyRun {
 public:
  PerfectMatchingRun(const MarketInstance& inst, const PlatformDesign& design)
      : inst_(inst), design_(design) {}

  DisplayPlan plan(const MarketState& state) override {
    return solve_second_general(inst_, design_, state).plan;
  }

 private:
  const MarketInstance& inst_;
  PlatformDesign design_;
};

}  // namespace

void LocalGreedyPolicy::prepare(const MarketInstance& inst, const PlatformDesign& design) {
  inst_ = &inst;
  design_ = design;
}

std::unique_ptr<PolicyRun> LocalGreedyPolicy::start_run(Rng) const {
  return std::make_unique<LocalGreedyRun>(*inst_, design_);
}

void PerfectMatchingPolicy::prepare(const MarketInstance& inst, const PlatformDesign& design) {
  inst_ = &inst;
  design_ = design;
}

std::unique_ptr<PolicyRun> PerfectMatchingPolicy::start_run(Rng) const {
  return std::make_unique<PerfectMatchingRun>(*inst_, design_);
}

}  // namespace matchsim

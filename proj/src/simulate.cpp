#include "matchsim/simulate.hpp"

#include <cmath>
#include <cstdio>
#include <exception>
#include <stdexcept>
#include <utility>

#include "matchsim/generators.hpp"

namespace matchsim {

namespace {

ReplicationOutcome run_one(const MarketInstance& inst, const PlatformDesign& design,
                           const Policy& policy, Rng rep_rng) {
  Rng policy_rng = rep_rng.split(0);
  Rng like_rng = rep_rng.split(1);
  auto run = policy.start_run(policy_rng);
  MarketState state = MarketState::initial(inst);
  ReplicationOutcome out;
  out.seed = rep_rng.seed();
  for (int t = 1; t <= inst.horizon; ++t) {
    DisplayPlan plan = run->plan(state);
    LikeDraw likes = sample_likes(inst, plan, t, like_rng);
    TransitionResult tr = transition(inst, design, state, plan, likes);
    for (const MatchRecord& m : tr.matches) {
      ++out.matches_total;
      if (m.sequential)
        ++out.matches_seq;
      else
        ++out.matches_nonseq;
    }
    state = std::move(tr.next);
  }
  return out;
}

void finalize_stats(PolicyResult& res) {
  const int r = (int)res.outcomes.size();
  if (r == 0) return;
  double sum = 0.0, sum_seq = 0.0, sum_nonseq = 0.0;
  for (const ReplicationOutcome& o : res.outcomes) {
    sum += o.matches_total;
    sum_seq += o.matches_seq;
    sum_nonseq += o.matches_nonseq;
  }
  res.mean = sum / r;
  res.mean_seq = sum_seq / r;
  res.mean_nonseq = sum_nonseq / r;
  if (r > 1) {
    double ss = 0.0;
    for (const ReplicationOutcome& o : res.outcomes) {
      double d = o.matches_total - res.mean;
      ss += d * d;
    }
    res.std_error = std::sqrt(ss / (r - 1)) / std::sqrt((double)r);
  }
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

PolicyResult run_simulation(const MarketInstance& inst, const PlatformDesign& design,
                            Policy& policy, const SimulationConfig& config) {
  if (config.replications < 1)
    throw std::invalid_argument("need at least one replication");
  policy.prepare(inst, design);
  PolicyResult res;
  res.policy = policy.name();
  res.design = design.label();
  res.outcomes.resize(config.replications);
  const Policy& prepared = policy;
  std::exception_ptr err = nullptr;
#pragma omp parallel for schedule(dynamic)
  for (int r = 0; r < config.replications; ++r) {
    try {
      res.outcomes[r] = run_one(inst, design, prepared, Rng::derive(config.master_seed, r));
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  finalize_stats(res);
  return res;
}

std::vector<SweepRow> sweep(const MarketInstance& inst, const PlatformDesign& design,
                            Policy& policy, SweepAxis axis, MarketSide side,
                            const std::vector<double>& values, const SimulationConfig& config) {
  std::vector<SweepRow> rows;
  const int n = inst.num_users();
  for (double v : values) {
    MarketInstance mod = inst;
    const int lo = side == MarketSide::i ? 0 : inst.n_i;
    const int hi = side == MarketSide::i ? inst.n_i : n;
    if (axis == SweepAxis::prob_scale) {
      if (v <= 0.0) throw BadGeneratorParams("probability scale must be positive");
      for (int t = 0; t < inst.horizon; ++t)
        for (int u = lo; u < hi; ++u)
          for (int partner : inst.potentials[u]) {
            double& p = mod.phi[t][u * n + partner];
            p = std::min(1.0, p * v);
          }
    } else {
      int k = (int)std::llround(v);
      if (k < 1 || std::abs(v - k) > 1e-9)
        throw BadGeneratorParams("capacity axis needs integer values >= 1");
      for (int u = lo; u < hi; ++u) mod.capacity[u] = k;
    }
    rows.push_back({v, run_simulation(mod, design, policy, config)});
  }
  return rows;
}

namespace {

void write_header(std::ostream& out, std::uint64_t master_seed) {
  out << "# rng: splitmix64 counter streams; replication r draws from derive(master_seed, r)\n";
  out << "# master_seed: " << master_seed << "\n";
}

void write_block(std::ostream& out, const PolicyResult& res, const char* prefix, bool summary) {
  if (summary) {
    out << prefix << res.policy << ',' << res.design << ',' << res.outcomes.size() << ','
        << fmt(res.mean) << ',' << fmt(res.std_error) << ',' << fmt(res.mean_seq) << ','
        << fmt(res.mean_nonseq) << '\n';
    return;
  }
  for (std::size_t r = 0; r < res.outcomes.size(); ++r) {
    const ReplicationOutcome& o = res.outcomes[r];
    out << prefix << res.policy << ',' << res.design << ',' << r << ',' << o.matches_total << ','
        << o.matches_seq << ',' << o.matches_nonseq << ',' << o.seed << '\n';
  }
}

}  // namespace

void write_results_csv(std::ostream& out, const std::vector<PolicyResult>& results,
                       std::uint64_t master_seed, bool summary) {
  write_header(out, master_seed);
  out << (summary ? "policy,design,replications,mean,std_error,mean_seq,mean_nonseq\n"
                  : "policy,design,replication,matches_total,matches_seq,matches_nonseq,seed\n");
  for (const PolicyResult& res : results) write_block(out, res, "", summary);
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows,
                     std::uint64_t master_seed, bool summary) {
  write_header(out, master_seed);
  out << (summary
              ? "axis_value,policy,design,replications,mean,std_error,mean_seq,mean_nonseq\n"
              : "axis_value,policy,design,replication,matches_total,matches_seq,matches_nonseq,"
                "seed\n");
  for (const SweepRow& row : rows) {
    std::string prefix = fmt(row.axis_value) + ",";
    write_block(out, row.result, prefix.c_str(), summary);
  }
}

}  // namespace matchsim

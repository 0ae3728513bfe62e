#include "matchsim/generators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace matchsim {

namespace {

MarketInstance shell(int n_i, int n_j, int horizon, int capacity) {
  MarketInstance inst;
  inst.n_i = n_i;
  inst.n_j = n_j;
  inst.horizon = horizon;
  const int n = n_i + n_j;
  inst.names.reserve(n);
  for (int u = 0; u < n_i; ++u) inst.names.push_back("i" + std::to_string(u));
  for (int u = 0; u < n_j; ++u) inst.names.push_back("j" + std::to_string(u));
  inst.capacity.assign(n, capacity);
  inst.potentials.assign(n, {});
  inst.initial_backlog.assign(n, {});
  inst.phi.assign(horizon,
                  std::vector<double>(n * n, std::numeric_limits<double>::quiet_NaN()));
  return inst;
}

void add_pair(MarketInstance& inst, int i, int j) {
  inst.potentials[i].push_back(j);
  inst.potentials[j].push_back(i);
}

void set_phi(MarketInstance& inst, int period, int viewer, int viewed, double p) {
  inst.phi[period - 1][viewer * inst.num_users() + viewed] = p;
}

void finish(MarketInstance& inst) {
  for (auto& p : inst.potentials) std::sort(p.begin(), p.end());
  for (auto& b : inst.initial_backlog) std::sort(b.begin(), b.end());
  validate_instance(inst);
}

double logit(double p) { return std::log(p / (1.0 - p)); }
double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double clipped_normal(Rng& rng, double mean, double sd, double lo, double hi) {
  double u1 = rng.next_double();
  double u2 = rng.next_double();
  if (u1 <= 0.0) u1 = std::numeric_limits<double>::min();
  double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  return std::clamp(mean + sd * z, lo, hi);
}

}  // namespace

MarketInstance greedy_adversarial(int n, double eps) {
  if (n < 1) throw BadGeneratorParams("greedy_adversarial needs n >= 1");
  if (eps <= 0.0 || eps >= 1.0) throw BadGeneratorParams("greedy_adversarial needs eps in (0,1)");
  MarketInstance inst = shell(n, n, 2, 1);
  const double other = std::sqrt(1.0 - eps);
  for (int i = 0; i < n; ++i)
    for (int jx = 0; jx < n; ++jx) {
      int j = n + jx;
      add_pair(inst, i, j);
      double p = jx == 0 ? 1.0 : other;
      set_phi(inst, 1, i, j, p);
      set_phi(inst, 1, j, i, p);
      set_phi(inst, 2, i, j, 0.0);
      set_phi(inst, 2, j, i, 0.0);
    }
  finish(inst);
  return inst;
}

MarketInstance pm_adversarial(int n, double p, double q) {
  if (n < 1) throw BadGeneratorParams("pm_adversarial needs n >= 1");
  if (p <= 0.0 || p > 1.0 || q <= 0.0 || q > 1.0)
    throw BadGeneratorParams("pm_adversarial needs p, q in (0,1]");
  MarketInstance inst = shell(2 * n, 2, 2, 1);
  for (int i = 0; i < 2 * n; ++i)
    for (int jx = 0; jx < 2; ++jx) {
      int j = 2 * n + jx;
      add_pair(inst, i, j);
      for (int t = 1; t <= 2; ++t) {
        set_phi(inst, t, i, j, p);
        set_phi(inst, t, j, i, q);
      }
    }
  finish(inst);
  return inst;
}

MarketInstance nonsubmodular(double eps) {
  if (eps <= 0.0 || eps >= 1.0) throw BadGeneratorParams("nonsubmodular needs eps in (0,1)");
  MarketInstance inst = shell(2, 2, 2, 1);
  const int i1 = 0, i2 = 1, j1 = 2, j2 = 3;
  add_pair(inst, i1, j1);
  add_pair(inst, i1, j2);
  add_pair(inst, i2, j1);
  add_pair(inst, i2, j2);
  for (int t = 1; t <= 2; ++t) {
    set_phi(inst, t, i1, j1, 1.0);
    set_phi(inst, t, j1, i1, eps);
    set_phi(inst, t, i2, j2, eps);
    set_phi(inst, t, j2, i2, 1.0);
    // cross pairs match with probability 1/2
    set_phi(inst, t, i1, j2, 1.0);
    set_phi(inst, t, j2, i1, 0.5);
    set_phi(inst, t, i2, j1, 0.5);
    set_phi(inst, t, j1, i2, 1.0);
  }
  finish(inst);
  return inst;
}

MarketInstance synthetic(const SyntheticParams& params, Rng& rng) {
  if (params.n_i < 1 || params.n_j < 1) throw BadGeneratorParams("synthetic needs users on both sides");
  if (params.horizon < 1) throw BadGeneratorParams("synthetic needs horizon >= 1");
  if (params.capacity < 1) throw BadGeneratorParams("synthetic needs capacity >= 1");
  if (params.density <= 0.0 || params.density > 1.0)
    throw BadGeneratorParams("synthetic needs density in (0,1]");
  if (params.alpha <= 0.0) throw BadGeneratorParams("synthetic needs alpha > 0");

  MarketInstance inst = shell(params.n_i, params.n_j, params.horizon, params.capacity);
  const int n = inst.num_users();

  // profile scores (0..10) and a per-viewer selectivity offset
  std::vector<double> score(n), offset(n);
  for (int u = 0; u < n; ++u) {
    score[u] = inst.is_i_side(u) ? clipped_normal(rng, 2.8, 1.5, 0.0, 10.0)
                                 : clipped_normal(rng, 5.3, 2.4, 0.0, 10.0);
    offset[u] = clipped_normal(rng, 0.0, 0.5, -1.5, 1.5);
  }
  const double base_i = logit(0.571);
  const double base_j = logit(0.270);
  const double mean_score_i = 2.8, mean_score_j = 5.3;
  const double attraction = 0.25;

  for (int i = 0; i < params.n_i; ++i)
    for (int jx = 0; jx < params.n_j; ++jx) {
      if (!rng.bernoulli(params.density)) continue;
      int j = params.n_i + jx;
      add_pair(inst, i, j);
      double pij = sigmoid(base_i + offset[i] + attraction * (score[j] - mean_score_j));
      double pji = sigmoid(base_j + offset[j] + attraction * (score[i] - mean_score_i));
      pji = std::min(1.0, pji * params.alpha);
      for (int t = 1; t <= params.horizon; ++t) {
        set_phi(inst, t, i, j, pij);
        set_phi(inst, t, j, i, pji);
      }
    }
  finish(inst);
  return inst;
}

MarketInstance random_instance(int n_i, int n_j, int horizon, int max_capacity, double density,
                               double backlog_rate, Rng& rng) {
  if (n_i < 1 || n_j < 1) throw BadGeneratorParams("random_instance needs users on both sides");
  if (horizon < 1) throw BadGeneratorParams("random_instance needs horizon >= 1");
  if (max_capacity < 1) throw BadGeneratorParams("random_instance needs max_capacity >= 1");
  if (density < 0.0 || density > 1.0 || backlog_rate < 0.0 || backlog_rate > 1.0)
    throw BadGeneratorParams("random_instance needs rates in [0,1]");

  MarketInstance inst = shell(n_i, n_j, horizon, 1);
  for (int u = 0; u < inst.num_users(); ++u)
    inst.capacity[u] = 1 + (int)rng.uniform_int(max_capacity);

  bool any = false;
  for (int i = 0; i < n_i; ++i)
    for (int jx = 0; jx < n_j; ++jx) {
      int j = n_i + jx;
      if (!rng.bernoulli(density)) continue;
      any = true;
      add_pair(inst, i, j);
      for (int t = 1; t <= horizon; ++t) {
        set_phi(inst, t, i, j, rng.next_double());
        set_phi(inst, t, j, i, rng.next_double());
      }
      // at most one direction starts in a backlog: a pair that liked each
      // other would already have matched
      if (rng.bernoulli(backlog_rate)) {
        if (rng.bernoulli(0.5))
          inst.initial_backlog[i].push_back(j);
        else
          inst.initial_backlog[j].push_back(i);
      }
    }
  if (!any) {
    add_pair(inst, 0, n_i);
    for (int t = 1; t <= horizon; ++t) {
      set_phi(inst, t, 0, n_i, rng.next_double());
      set_phi(inst, t, n_i, 0, rng.next_double());
    }
  }
  finish(inst);
  return inst;
}

MarketInstance generate_instance(const std::string& kind,
                                 const std::map<std::string, double>& params, Rng rng) {
  std::set<std::string> seen;
  auto get = [&](const std::string& key, double fallback) {
    seen.insert(key);
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  };
  auto check_keys = [&]() {
    for (auto& [key, value] : params)
      if (!seen.count(key)) throw BadGeneratorParams("unknown parameter: " + key);
  };

  if (kind == "greedy_adversarial") {
    int n = (int)get("n", 4);
    double eps = get("eps", 0.1);
    check_keys();
    return greedy_adversarial(n, eps);
  }
  if (kind == "pm_adversarial") {
    int n = (int)get("n", 3);
    double p = get("p", 0.5);
    double q = get("q", 0.5);
    check_keys();
    return pm_adversarial(n, p, q);
  }
  if (kind == "nonsubmodular") {
    double eps = get("eps", 0.1);
    check_keys();
    return nonsubmodular(eps);
  }
  if (kind == "synthetic") {
    SyntheticParams sp;
    sp.n_i = (int)get("n_i", sp.n_i);
    sp.n_j = (int)get("n_j", sp.n_j);
    sp.horizon = (int)get("horizon", sp.horizon);
    sp.capacity = (int)get("capacity", sp.capacity);
    sp.density = get("density", sp.density);
    sp.alpha = get("alpha", sp.alpha);
    check_keys();
    return synthetic(sp, rng);
  }
  if (kind == "random") {
    int n_i = (int)get("n_i", 3);
    int n_j = (int)get("n_j", 3);
    int horizon = (int)get("horizon", 2);
    int max_capacity = (int)get("max_capacity", 2);
    double density = get("density", 0.7);
    double backlog_rate = get("backlog_rate", 0.3);
    check_keys();
    return random_instance(n_i, n_j, horizon, max_capacity, density, backlog_rate, rng);
  }
  throw BadGeneratorParams("unknown generator kind: " + kind);
}

}  // namespace matchsim

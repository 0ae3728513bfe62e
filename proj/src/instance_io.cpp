#include "matchsim/instance_io.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "json.hpp"

namespace matchsim {

using ordered_json = nlohmann::ordered_json;

PlatformDesign parse_design(const std::string& text) {
  auto slash = text.find('/');
  if (slash == std::string::npos)
    throw std::runtime_error("design must look like <direction>/<timing>: " + text);
  std::string d = text.substr(0, slash);
  std::string t = text.substr(slash + 1);
  PlatformDesign out;
  if (d == "one-i" || d == "one_from_i")
    out.direction = PlatformDesign::Direction::one_from_i;
  else if (d == "one-j" || d == "one_from_j")
    out.direction = PlatformDesign::Direction::one_from_j;
  else if (d == "two" || d == "two_directional")
    out.direction = PlatformDesign::Direction::two_directional;
  else
    throw std::runtime_error("unknown design direction: " + d);
  if (t == "seq" || t == "sequential_only")
    out.timing = PlatformDesign::Timing::sequential_only;
  else if (t == "nonseq-first" || t == "nonseq_first_period")
    out.timing = PlatformDesign::Timing::nonseq_first_period;
  else if (t == "nonseq-all" || t == "nonseq_all_periods")
    out.timing = PlatformDesign::Timing::nonseq_all_periods;
  else
    throw std::runtime_error("unknown design timing: " + t);
  return out;
}

std::string design_direction_name(PlatformDesign::Direction d) {
  switch (d) {
    case PlatformDesign::Direction::one_from_i: return "one_from_i";
    case PlatformDesign::Direction::one_from_j: return "one_from_j";
    case PlatformDesign::Direction::two_directional: return "two_directional";
  }
  return "?";
}

std::string design_timing_name(PlatformDesign::Timing t) {
  switch (t) {
    case PlatformDesign::Timing::sequential_only: return "sequential_only";
    case PlatformDesign::Timing::nonseq_first_period: return "nonseq_first_period";
    case PlatformDesign::Timing::nonseq_all_periods: return "nonseq_all_periods";
  }
  return "?";
}

MarketInstance instance_from_json_text(const std::string& text) {
  ordered_json j = ordered_json::parse(text);
  MarketInstance inst;
  std::vector<std::string> users_i = j.at("users_i").get<std::vector<std::string>>();
  std::vector<std::string> users_j = j.at("users_j").get<std::vector<std::string>>();
  inst.n_i = (int)users_i.size();
  inst.n_j = (int)users_j.size();
  inst.names = users_i;
  inst.names.insert(inst.names.end(), users_j.begin(), users_j.end());
  const int n = inst.num_users();

  std::map<std::string, int> index;
  for (int u = 0; u < n; ++u) {
    if (!index.emplace(inst.names[u], u).second)
      throw std::runtime_error("duplicate user name: " + inst.names[u]);
  }
  auto lookup = [&](const std::string& name) {
    auto it = index.find(name);
    if (it == index.end()) throw std::runtime_error("unknown user name: " + name);
    return it->second;
  };

  inst.horizon = j.at("horizon").get<int>();
  if (inst.horizon < 1) throw std::runtime_error("horizon must be at least 1");
  inst.capacity.assign(n, 0);
  for (auto& [name, cap] : j.at("capacity").items()) inst.capacity[lookup(name)] = cap.get<int>();

  const double nan = std::numeric_limits<double>::quiet_NaN();
  // probabilities may list period 1 only as a time-homogeneous shorthand
  int max_period = 0;
  for (auto& e : j.at("probabilities")) max_period = std::max(max_period, e.at("period").get<int>());
  int stored = std::min(std::max(max_period, 1), inst.horizon);
  inst.phi.assign(stored, std::vector<double>(n * n, nan));
  std::vector<std::vector<int>> pot(n);
  for (auto& e : j.at("probabilities")) {
    int from = lookup(e.at("from").get<std::string>());
    int to = lookup(e.at("to").get<std::string>());
    int period = e.at("period").get<int>();
    if (period < 1) throw std::runtime_error("probability entry with period < 1");
    if (period > inst.horizon) continue;
    inst.phi[period - 1][from * n + to] = e.at("p").get<double>();
    if (period == 1) pot[from].push_back(to);
  }
  if (stored == 1)
    while ((int)inst.phi.size() < inst.horizon) inst.phi.push_back(inst.phi[0]);
  if ((int)inst.phi.size() != inst.horizon)
    throw ValidationError(ValidationError::Code::missing_probability,
                          "probabilities cover " + std::to_string(inst.phi.size()) + " of " +
                              std::to_string(inst.horizon) + " periods");
  for (auto& v : pot) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  inst.potentials = std::move(pot);

  if (j.contains("initial_backlog")) {
    inst.initial_backlog.assign(n, {});
    for (auto& e : j.at("initial_backlog")) {
      int owner = lookup(e.at("user").get<std::string>());
      for (auto& m : e.at("backlog")) inst.initial_backlog[owner].push_back(lookup(m.get<std::string>()));
    }
    for (auto& v : inst.initial_backlog) std::sort(v.begin(), v.end());
  }
  if (j.contains("design")) {
    inst.default_design.direction =
        parse_design(j["design"].at("direction").get<std::string>() + "/seq").direction;
    inst.default_design.timing =
        parse_design("two/" + j["design"].at("timing").get<std::string>()).timing;
  }
  validate_instance(inst);
  return inst;
}

std::string instance_to_json_text(const MarketInstance& inst) {
  ordered_json j;
  const int n = inst.num_users();
  std::vector<std::string> ui(inst.names.begin(), inst.names.begin() + inst.n_i);
  std::vector<std::string> uj(inst.names.begin() + inst.n_i, inst.names.end());
  j["users_i"] = ui;
  j["users_j"] = uj;
  ordered_json cap = ordered_json::object();
  for (int u = 0; u < n; ++u) cap[inst.names[u]] = inst.capacity[u];
  j["capacity"] = cap;
  j["horizon"] = inst.horizon;

  ordered_json probs = ordered_json::array();
  int stored = inst.time_homogeneous() ? 1 : inst.horizon;
  for (int t = 1; t <= stored; ++t)
    for (int u = 0; u < n; ++u)
      for (int v : inst.potentials[u])
        probs.push_back({{"from", inst.names[u]},
                         {"to", inst.names[v]},
                         {"period", t},
                         {"p", inst.like_prob(t, u, v)}});
  j["probabilities"] = probs;

  bool any_backlog = false;
  for (auto& b : inst.initial_backlog) any_backlog |= !b.empty();
  if (any_backlog) {
    ordered_json bl = ordered_json::array();
    for (int u = 0; u < n; ++u) {
      if (inst.initial_backlog[u].empty()) continue;
      ordered_json names = ordered_json::array();
      for (int v : inst.initial_backlog[u]) names.push_back(inst.names[v]);
      bl.push_back({{"user", inst.names[u]}, {"backlog", names}});
    }
    j["initial_backlog"] = bl;
  }
  j["design"] = {{"direction", design_direction_name(inst.default_design.direction)},
                 {"timing", design_timing_name(inst.default_design.timing)}};
  return j.dump(2) + "\n";
}

MarketInstance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return instance_from_json_text(ss.str());
}

void save_instance(const MarketInstance& inst, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << instance_to_json_text(inst);
}

}  // namespace matchsim

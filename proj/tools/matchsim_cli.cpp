// Command line front end: instance generation, simulation, sensitivity
// sweeps, relaxation solving and an oracle verification pass over a
// directory of instances.
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "matchsim/baselines.hpp"
#include "matchsim/dh.hpp"
#include "matchsim/generators.hpp"
#include "matchsim/instance_io.hpp"
#include "matchsim/oracles.hpp"
#include "matchsim/simulate.hpp"
#include "matchsim/submodular.hpp"

namespace {

using namespace matchsim;

std::unique_ptr<Policy> make_policy(const std::string& name) {
  if (name == "dh" || name == "dh-first")
    return std::make_unique<DhIntegralPolicy>(DhVariant::first);
  if (name == "dh-none") return std::make_unique<DhIntegralPolicy>(DhVariant::none);
  if (name == "dh-both") return std::make_unique<DhIntegralPolicy>(DhVariant::both);
  if (name == "dh-fractional") return std::make_unique<DhFractionalPolicy>();
  if (name == "dh-multi") return std::make_unique<DhMultiPeriodPolicy>();
  if (name == "dh-onedir-rounded") return std::make_unique<DhOnedirRoundedPolicy>();
  if (name == "cg-rounded")
    return std::make_unique<SubmodularPolicy>(SubmodularAlgorithm::continuous_greedy_rounded);
  if (name == "gg-greedy") return std::make_unique<SubmodularPolicy>(SubmodularAlgorithm::greedy);
  if (name == "gg-local-search")
    return std::make_unique<SubmodularPolicy>(SubmodularAlgorithm::local_search);
  if (name == "local-greedy") return std::make_unique<LocalGreedyPolicy>();
  if (name == "perfect-matching") return std::make_unique<PerfectMatchingPolicy>();
  throw std::invalid_argument("unknown policy: " + name);
}

std::map<std::string, double> parse_params(const std::string& text) {
  std::map<std::string, double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    auto eq = item.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("parameter needs the form key=value: " + item);
    out[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
  }
  return out;
}

std::ostream& open_output(std::ofstream& file, const std::string& path) {
  if (path.empty()) return std::cout;
  file.open(path);
  if (!file) throw std::invalid_argument("cannot open output file: " + path);
  return file;
}

int cmd_generate(const std::string& kind, const std::string& params, std::uint64_t seed,
                 const std::string& out_path) {
  MarketInstance inst = generate_instance(kind, parse_params(params), Rng(seed));
  if (out_path.empty())
    std::cout << instance_to_json_text(inst) << "\n";
  else
    save_instance(inst, out_path);
  return 0;
}

int cmd_simulate(const std::string& instance_path, const std::string& design_text,
                 const std::vector<std::string>& policy_names, int reps, std::uint64_t seed,
                 const std::string& out_path, bool summary) {
  MarketInstance inst = load_instance(instance_path);
  PlatformDesign design = design_text.empty() ? inst.default_design : parse_design(design_text);
  SimulationConfig config;
  config.replications = reps;
  config.master_seed = seed;
  std::vector<PolicyResult> results;
  for (const std::string& name : policy_names) {
    auto policy = make_policy(name);
    results.push_back(run_simulation(inst, design, *policy, config));
  }
  std::ofstream file;
  write_results_csv(open_output(file, out_path), results, seed, summary);
  return 0;
}

int cmd_sweep(const std::string& instance_path, const std::string& design_text,
              const std::string& policy_name, const std::string& axis_text,
              const std::string& side_text, const std::vector<double>& values, int reps,
              std::uint64_t seed, const std::string& out_path, bool summary) {
  MarketInstance inst = load_instance(instance_path);
  PlatformDesign design = design_text.empty() ? inst.default_design : parse_design(design_text);
  SweepAxis axis;
  if (axis_text == "prob_scale")
    axis = SweepAxis::prob_scale;
  else if (axis_text == "capacity")
    axis = SweepAxis::capacity;
  else
    throw std::invalid_argument("axis must be prob_scale or capacity");
  MarketSide side;
  if (side_text == "i")
    side = MarketSide::i;
  else if (side_text == "j")
    side = MarketSide::j;
  else
    throw std::invalid_argument("side must be i or j");
  if (values.empty()) throw std::invalid_argument("need at least one axis value");
  auto policy = make_policy(policy_name);
  SimulationConfig config;
  config.replications = reps;
  config.master_seed = seed;
  auto rows = sweep(inst, design, *policy, axis, side, values, config);
  std::ofstream file;
  write_sweep_csv(open_output(file, out_path), rows, seed, summary);
  return 0;
}

int cmd_solve(const std::string& instance_path, const std::string& design_text,
              const std::string& policy_name) {
  MarketInstance inst = load_instance(instance_path);
  PlatformDesign design = design_text.empty() ? inst.default_design : parse_design(design_text);
  if (policy_name == "dh" || policy_name == "dh-first" || policy_name == "dh-none" ||
      policy_name == "dh-both" || policy_name == "dh-multi") {
    DhForm form = inst.horizon == 2 && policy_name != "dh-multi" ? DhForm::two_period
                                                                 : DhForm::multi_period;
    PlatformDesign build_design = design;
    if (policy_name == "dh-none") build_design.timing = PlatformDesign::Timing::sequential_only;
    DhModel model = build_dh_relaxation(inst, build_design, form);
    DhRelaxationSolution sol = solve_dh_relaxation(model);
    std::cout << "form: " << (form == DhForm::two_period ? "two-period" : "multi-period") << "\n";
    std::cout << "objective: " << sol.objective << "\n";
    std::cout << "nodes: " << sol.nodes << "\n";
    for (auto& [viewer, viewed] : sol.x)
      std::cout << "x " << inst.names[viewer] << " -> " << inst.names[viewed] << "\n";
    for (auto& [i, j] : sol.w)
      std::cout << "w " << inst.names[i] << " <-> " << inst.names[j] << "\n";
    for (auto& [viewer, member, value] : sol.y)
      std::cout << "y " << inst.names[viewer] << " -> " << inst.names[member] << " " << value
                << "\n";
    return 0;
  }
  if (policy_name == "dh-onedir-rounded") {
    DhOnedirRoundedPolicy policy;
    policy.prepare(inst, design);
    std::cout << "objective: " << policy.lp_objective() << "\n";
    for (std::size_t k = 0; k < policy.lp_arcs().size(); ++k)
      std::cout << "x " << inst.names[policy.lp_arcs()[k].first] << " -> "
                << inst.names[policy.lp_arcs()[k].second] << " " << policy.lp_values()[k] << "\n";
    return 0;
  }
  throw std::invalid_argument("solve supports dh, dh-none, dh-both, dh-multi, dh-onedir-rounded");
}

struct VerifyReport {
  int failures = 0;
  std::ostream* out = nullptr;

  void line(const std::string& instance, const std::string& check, bool pass,
            const std::string& detail) {
    if (!pass) ++failures;
    *out << instance << ',' << check << ',' << (pass ? "pass" : "fail") << ',' << detail << '\n';
  }
  void skip(const std::string& instance, const std::string& check, const std::string& why) {
    *out << instance << ',' << check << ",skip," << why << '\n';
  }
};

void verify_instance_file(const std::filesystem::path& path, VerifyReport& rep) {
  const std::string name = path.filename().string();
  MarketInstance inst;
  try {
    inst = load_instance(path.string());
    validate_instance(inst);
    rep.line(name, "validate", true, "");
  } catch (const std::exception& e) {
    rep.line(name, "validate", false, e.what());
    return;
  }

  try {
    MarketInstance again = instance_from_json_text(instance_to_json_text(inst));
    bool same = instance_to_json_text(again) == instance_to_json_text(inst);
    rep.line(name, "round-trip", same, same ? "" : "serialization not stable");
  } catch (const std::exception& e) {
    rep.line(name, "round-trip", false, e.what());
  }

  if (inst.horizon != 2 || inst.num_users() > 10) {
    rep.skip(name, "dp-vs-dh", "needs a two-period instance with at most 10 users");
    rep.skip(name, "bound-chain", "needs a two-period instance with at most 10 users");
    return;
  }

  const double guarantee = 1.0 - 1.0 / std::exp(1.0);
  for (PlatformDesign::Timing timing : {PlatformDesign::Timing::sequential_only,
                                        PlatformDesign::Timing::nonseq_first_period}) {
    PlatformDesign design{PlatformDesign::Direction::two_directional, timing};
    const std::string check = "dp-vs-dh/" + design.label();
    try {
      double dp = dp_optimal(inst, design);
      DhIntegralPolicy policy(design.allows_mutual(1) ? DhVariant::first : DhVariant::none);
      policy.prepare(inst, design);
      DisplayPlan plan = policy.start_run(Rng(1))->plan(MarketState::initial(inst));
      double exact = two_period_plan_value(inst, MarketState::initial(inst), plan);
      std::ostringstream detail;
      detail << "dp=" << dp << " dh=" << exact;
      bool pass = exact >= guarantee * dp - 1e-9 && exact <= dp + 1e-9;
      rep.line(name, check, pass, detail.str());
    } catch (const StateSpaceTooLarge& e) {
      rep.skip(name, check, e.what());
    } catch (const std::exception& e) {
      rep.line(name, check, false, e.what());
    }
  }

  try {
    PlatformDesign design{PlatformDesign::Direction::two_directional,
                          PlatformDesign::Timing::nonseq_first_period};
    CorrelationGapReport report = correlation_gap_check(inst, design);
    std::ostringstream detail;
    detail << "m2=" << report.m2 << " g=" << report.g << " f=" << report.f;
    rep.line(name, "bound-chain", true, detail.str());
  } catch (const TooManyEdges& e) {
    rep.skip(name, "bound-chain", e.what());
  } catch (const std::exception& e) {
    rep.line(name, "bound-chain", false, e.what());
  }
}

int cmd_verify(const std::string& dir, const std::string& out_path) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::invalid_argument("no .json instances under " + dir);

  std::ofstream file;
  VerifyReport rep;
  rep.out = &open_output(file, out_path);
  *rep.out << "instance,check,status,detail\n";
  for (const auto& path : files) verify_instance_file(path, rep);
  return rep.failures == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"curated two-sided market: generators, policies, simulation"};
  app.require_subcommand(1);

  std::string kind, params, instance_path, design_text, out_path;
  std::string policy_name = "dh", axis_text = "prob_scale", side_text = "j", dir;
  std::vector<std::string> policy_names;
  std::vector<double> values;
  std::uint64_t seed = 1;
  int reps = 100;
  bool summary = false;

  auto* gen = app.add_subcommand("generate", "write a market instance as JSON");
  gen->add_option("--kind", kind,
                  "greedy_adversarial | pm_adversarial | nonsubmodular | synthetic | random")
      ->required();
  gen->add_option("--params", params, "comma separated key=value generator parameters");
  gen->add_option("--seed", seed, "generator seed");
  gen->add_option("--out", out_path, "output file (default stdout)");

  auto* sim = app.add_subcommand("simulate", "Monte Carlo run of one or more policies");
  sim->add_option("--instance", instance_path, "instance JSON file")->required();
  sim->add_option("--design", design_text, "direction/timing label, e.g. two/nonseq-first");
  sim->add_option("--policy", policy_names, "policy name, repeatable")->required();
  sim->add_option("--reps", reps, "replications");
  sim->add_option("--seed", seed, "master seed");
  sim->add_option("--out", out_path, "output CSV (default stdout)");
  sim->add_flag("--summary", summary, "aggregate to mean and standard error");

  auto* sw = app.add_subcommand("sweep", "sensitivity sweep over a probability scale or capacity");
  sw->add_option("--instance", instance_path, "instance JSON file")->required();
  sw->add_option("--design", design_text, "direction/timing label");
  sw->add_option("--policy", policy_name, "policy name")->required();
  sw->add_option("--axis", axis_text, "prob_scale | capacity")->required();
  sw->add_option("--side", side_text, "which side the axis modifies: i | j");
  sw->add_option("--values", values, "axis values")->required()->delimiter(',');
  sw->add_option("--reps", reps, "replications per value");
  sw->add_option("--seed", seed, "master seed");
  sw->add_option("--out", out_path, "output CSV (default stdout)");
  sw->add_flag("--summary", summary, "aggregate to mean and standard error");

  auto* sol = app.add_subcommand("solve", "solve a display relaxation and print the plan");
  sol->add_option("--instance", instance_path, "instance JSON file")->required();
  sol->add_option("--design", design_text, "direction/timing label");
  sol->add_option("--policy", policy_name, "dh | dh-none | dh-both | dh-multi | dh-onedir-rounded");

  auto* ver = app.add_subcommand("verify", "run oracle cross-checks over a directory of instances");
  ver->add_option("--dir", dir, "directory of instance JSON files")->required();
  ver->add_option("--out", out_path, "output CSV (default stdout)");

  try {
    app.parse(argc, argv);
    if (gen->parsed()) return cmd_generate(kind, params, seed, out_path);
    if (sim->parsed())
      return cmd_simulate(instance_path, design_text, policy_names, reps, seed, out_path, summary);
    if (sw->parsed())
      return cmd_sweep(instance_path, design_text, policy_name, axis_text, side_text, values, reps,
                       seed, out_path, summary);
    if (sol->parsed()) return cmd_solve(instance_path, design_text, policy_name);
    if (ver->parsed()) return cmd_verify(dir, out_path);
    return 1;
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const ValidationError& e) {
    std::cerr << "invalid instance: " << e.what() << "\n";
    return 1;
  } catch (const BadGeneratorParams& e) {
    std::cerr << "bad generator parameters: " << e.what() << "\n";
    return 1;
  } catch (const IncompatibleAlgorithmDesign& e) {
    std::cerr << "policy incompatible with design: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 2;
  }
}

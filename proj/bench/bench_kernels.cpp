// Timing comparison of the serial reference kernels against their OpenMP
// counterparts, plus a determinism check (results must agree bit for bit).
#include <chrono>
#include <cstdio>
#include <functional>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "matchsim/baselines.hpp"
#include "matchsim/generators.hpp"
#include "matchsim/oracles.hpp"
#include "matchsim/simulate.hpp"

using namespace matchsim;

namespace {

double time_ms(const std::function<void()>& fn) {
  auto t0 = std::chrono::steady_clock::now();
  fn();
  auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

void row(const char* name, double serial_ms, double parallel_ms, bool identical) {
  std::printf("%-28s %10.1f %12.1f %9.2fx %10s\n", name, serial_ms, parallel_ms,
              parallel_ms > 0 ? serial_ms / parallel_ms : 0.0, identical ? "yes" : "NO");
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("threads: %d\n", omp_get_max_threads());
#else
  std::printf("threads: 1 (no OpenMP)\n");
#endif
  std::printf("%-28s %10s %12s %9s %10s\n", "kernel", "serial ms", "parallel ms", "speedup",
              "identical");

  {
    Rng rng(42);
    MarketInstance inst = random_instance(8, 8, 2, 2, 0.9, 0.2, rng);
    DisplayPlan plan;
    for (int i = 0; i < inst.n_i; ++i) {
      int used = 0;
      for (int v : inst.potentials[i]) {
        if (used == inst.capacity[i] || (int)plan.x.size() >= 16) break;
        plan.x.push_back({i, v});
        ++used;
      }
    }
    double v_serial = 0.0, v_parallel = 0.0;
    double t_serial = time_ms([&] { v_serial = exact_M2_serial(inst, plan); });
    double t_parallel = time_ms([&] { v_parallel = exact_M2(inst, plan); });
    char label[64];
    std::snprintf(label, sizeof(label), "backlog-expectation (%zu)", plan.x.size());
    row(label, t_serial, t_parallel, v_serial == v_parallel);
  }

  {
    Rng rng(7);
    SyntheticParams params;
    MarketInstance inst = synthetic(params, rng);
    SimulationConfig config;
    config.replications = 2000;
    config.master_seed = 99;
    LocalGreedyPolicy policy;
    PlatformDesign design{PlatformDesign::Direction::two_directional,
                          PlatformDesign::Timing::nonseq_first_period};
    PolicyResult serial, parallel;
#ifdef _OPENMP
    int threads = omp_get_max_threads();
    omp_set_num_threads(1);
#endif
    double t_serial = time_ms([&] { serial = run_simulation(inst, design, policy, config); });
#ifdef _OPENMP
    omp_set_num_threads(threads);
#endif
    double t_parallel = time_ms([&] { parallel = run_simulation(inst, design, policy, config); });
    bool identical = serial.mean == parallel.mean && serial.std_error == parallel.std_error;
    for (std::size_t r = 0; identical && r < serial.outcomes.size(); ++r)
      identical = serial.outcomes[r].matches_total == parallel.outcomes[r].matches_total &&
                  serial.outcomes[r].seed == parallel.outcomes[r].seed;
    row("simulation (2000 reps)", t_serial, t_parallel, identical);
  }

  return 0;
}

// Compares the serial reference ensemble loop against the OpenMP one on the
// strong-coupling workload and verifies that both produce identical logs.

#include <chrono>
#include <iostream>

#include "ethsim/ensemble.hpp"

using namespace ethsim;

namespace {

Scenario strong_scenario(long trials) {
  nlohmann::json j{{"name", "bench-strong"},
                   {"N", 2},
                   {"M", 2},
                   {"L", 2},
                   {"model", {{"type", "strongCoupling"}, {"epsilon", 1e-3}, {"seed", 11}}},
                   {"V", {{"type", "random"}, {"seed", 3}}},
                   {"initialState", {{"type", "basis"}, {"index", 0}}},
                   {"fieldSequence", {{"type", "vacuum"}}},
                   {"steps", 10},
                   {"trials", trials},
                   {"masterSeed", 42},
                   {"log", "summaryOnly"}};
  return parse_scenario_json(j);
}

double time_run(const CompiledScenario& cs, ExecMode mode, std::string* log) {
  const auto t0 = std::chrono::steady_clock::now();
  EnsembleOutput out = run_ensemble(cs, mode, 0);
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (log) *log = std::move(out.trajectory_log);
  return dt;
}

}  // namespace

int main() {
  std::cout << "trials   serial[s]   openmp[s]   speedup   identical\n";
  bool all_identical = true;
  for (long trials : {1000l, 4000l, 16000l}) {
    const CompiledScenario cs = compile_scenario(strong_scenario(trials));
    std::string serial_log, parallel_log;
    const double ts = time_run(cs, ExecMode::Serial, &serial_log);
    const double tp = time_run(cs, ExecMode::Parallel, &parallel_log);
    const bool identical = serial_log == parallel_log;
    all_identical = all_identical && identical;
    std::printf("%6ld   %9.3f   %9.3f   %7.2fx   %s\n", trials, ts, tp, ts / tp,
                identical ? "yes" : "NO");
  }
  if (!all_identical) {
    std::cerr << "serial and OpenMP logs differ\n";
    return 1;
  }
  return 0;
}

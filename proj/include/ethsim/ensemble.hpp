#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ethsim/histories.hpp"
#include "ethsim/parallel.hpp"
#include "ethsim/scenario.hpp"

namespace ethsim {

inline constexpr const char* kVersion = "0.1.0";

nlohmann::json convention_flags();

struct StepStats {
  long step = 0;
  double mean_unitary_fidelity = 0.0;
  double mean_event_size = 0.0;
  std::map<int, long> branch_counts;  // 1-based labels in output
  double max_mixture_residual = 0.0;
  long sample_size = 0;
};

struct RunReport {
  std::string version = kVersion;
  nlohmann::json scenario_echo;
  long trials = 0;
  long steps = 0;
  double wall_seconds = 0.0;
  std::vector<StepStats> per_step;
  std::map<int, long> field_index_counts;      // thermal regime draws
  std::vector<double> tv_distance;             // strong-coupling regime
  std::vector<long> click_steps;               // detector regime, -1 censored
  double max_mixture_residual = 0.0;
  double max_event_commutator = 0.0;
  double max_dropped_mass = 0.0;

  nlohmann::json to_json() const;
};

struct EnsembleOutput {
  RunReport report;
  std::string trajectory_log;  // JSON-lines
};

// Runs one trajectory of the compiled scenario on its own random stream.
Trajectory simulate_trajectory(const CompiledScenario& cs, std::uint64_t trajectory_index);

// Deterministic for (scenario, masterSeed) regardless of mode and threads:
// trajectories own independent streams and aggregation runs in index order.
EnsembleOutput run_ensemble(const CompiledScenario& cs, ExecMode mode = ExecMode::Parallel,
                            int threads = 0);

// Maximum |Kraus-chain - dense-tensor| expectation difference over randomized
// (F, C) probes and step counts up to the dimension cap.
struct OracleDiff {
  double max_abs_diff = 0.0;
  long instances = 0;
  long max_steps_probed = 0;
};

OracleDiff oracle_diff(const CompiledScenario& cs, long max_dim, std::uint64_t probe_seed);

// Weak-coupling deviation sweep with shared generators: one point per epsilon,
// plus the least-squares slope of log(deviation) against log(epsilon).
struct WeakSweep {
  std::vector<double> epsilons;
  std::vector<double> deviations;
  double slope = 0.0;
};

WeakSweep weak_sweep(long field_dim, long atom_dim, long partition_size,
                     const std::vector<double>& epsilons, std::uint64_t seed);

nlohmann::json tree_to_json(const HistoryTree& tree);

void write_text_file(const std::string& path, const std::string& contents);

}  // namespace ethsim

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ethsim/ensemble.hpp"

namespace fs = std::filesystem;
using namespace ethsim;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitResourceCap = 4;

long oracle_dim_cap() {
  if (const char* env = std::getenv("ETHSIM_MAX_DIM")) {
    const long cap = std::atol(env);
    if (cap > 0) return cap;
  }
  return 4096;
}

struct CommonOptions {
  std::string scenario_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool seed_set = false;
  long trials = 0;
  int threads = 0;
  bool serial = false;

  ExecMode mode() const { return serial ? ExecMode::Serial : ExecMode::Parallel; }
};

Scenario load_scenario(const CommonOptions& opt) {
  Scenario s = parse_scenario_file(opt.scenario_path);
  if (opt.seed_set) s.master_seed = opt.seed;
  if (opt.trials > 0) s.trials = opt.trials;
  return s;
}

void ensure_out_dir(const std::string& dir) {
  if (!dir.empty() && dir != ".") fs::create_directories(dir);
}

int cmd_validate(const CommonOptions& opt) {
  const Scenario s = load_scenario(opt);
  compile_scenario(s);
  std::cout << "valid: " << s.name << " (N=" << s.field_dim << ", M=" << s.atom_dim
            << ", L=" << s.partition_size << ", steps=" << s.steps << ", trials=" << s.trials
            << ")\n";
  return 0;
}

int cmd_run(const CommonOptions& opt) {
  const Scenario s = load_scenario(opt);
  const CompiledScenario cs = compile_scenario(s);
  const EnsembleOutput out = run_ensemble(cs, opt.mode(), opt.threads);
  ensure_out_dir(opt.out_dir);
  const std::string report_path = opt.out_dir + "/report.json";
  write_text_file(report_path, out.report.to_json().dump(2) + "\n");
  write_text_file(opt.out_dir + "/trajectories.jsonl", out.trajectory_log);
  std::cout << "run: " << s.trials << " trajectories x " << s.steps << " steps in "
            << out.report.wall_seconds << " s -> " << report_path << "\n"
            << "max mixture residual " << out.report.max_mixture_residual << "\n";
  return 0;
}

int cmd_tree(const CommonOptions& opt, long depth, double prune, bool prune_set) {
  Scenario s = load_scenario(opt);
  const CompiledScenario cs = compile_scenario(s);
  const long tree_depth = depth > 0 ? depth : std::max(1l, s.steps);
  const double prune_below = prune_set ? prune : s.tolerances.prune;

  FieldSequence field = cs.field.horizon() >= tree_depth
                            ? cs.field
                            : FieldSequence::vacuum(s.field_dim, tree_depth);
  const HistoryTree tree =
      enumerate_tree(EffectiveState{cs.initial_state, 0}, tree_depth, field, cs.kraus,
                     cs.propagator, prune_below, cs.tol);
  const double violation = check_consistency(tree);

  ensure_out_dir(opt.out_dir);
  write_text_file(opt.out_dir + "/tree.json", tree_to_json(tree).dump(2) + "\n");
  std::cout << "tree: depth " << tree_depth << ", " << tree.nodes.size() << " nodes, "
            << "consistency violation " << violation << ", pruned mass "
            << (tree.pruned_mass_by_depth.empty() ? 0.0 : tree.pruned_mass_by_depth.back())
            << "\n";
  if (violation > 1e-10) {
    std::cerr << "tree: consistency violation exceeds 1e-10\n";
    return kExitNumerical;
  }
  return 0;
}

int cmd_oracle(const CommonOptions& opt, bool write_sidecar) {
  const Scenario s = load_scenario(opt);
  const CompiledScenario cs = compile_scenario(s);
  const OracleDiff diff = oracle_diff(cs, oracle_dim_cap(), s.master_seed);
  std::cout << "oracle: max |Kraus - tensor| = " << diff.max_abs_diff << " over "
            << diff.instances << " probes (steps <= " << diff.max_steps_probed << ")\n";
  if (write_sidecar) {
    const fs::path src(opt.scenario_path);
    const std::string sidecar = (src.parent_path() / src.stem()).string() + ".expected.json";
    nlohmann::json j{{"oracleMaxDiff", diff.max_abs_diff},
                     {"instances", diff.instances},
                     {"maxStepsProbed", diff.max_steps_probed},
                     {"version", kVersion}};
    write_text_file(sidecar, j.dump(2) + "\n");
    std::cout << "oracle: wrote " << sidecar << "\n";
  }
  if (diff.max_abs_diff > 1e-9) {
    std::cerr << "oracle: discrepancy exceeds 1e-9\n";
    return kExitNumerical;
  }
  return 0;
}

int cmd_regimes(const CommonOptions& opt) {
  ensure_out_dir(opt.out_dir);
  const std::uint64_t seed = opt.seed_set ? opt.seed : 7;

  // Weak-coupling sweep.
  const WeakSweep sweep = weak_sweep(2, 2, 2, {1e-1, 1e-2, 1e-3}, seed);
  {
    std::string csv = "epsilon,deviation\n";
    for (std::size_t i = 0; i < sweep.epsilons.size(); ++i)
      csv += std::to_string(sweep.epsilons[i]) + "," + std::to_string(sweep.deviations[i]) +
             "\n";
    write_text_file(opt.out_dir + "/weak_sweep.csv", csv);
  }
  std::cout << "weak sweep: log-log slope " << sweep.slope << "\n";

  // Strong-coupling classical comparison.
  RngStream vstream(seed, 5);
  const UnitaryMatrix v = random_unitary(vstream, 2);
  RngStream mstream(seed, 6);
  const MeasurementModel strong = strong_coupling_model(2, 2, 1e-3, v, mstream);
  const long strong_trials = opt.trials > 0 ? opt.trials : 10000;
  const StrongCouplingResult sc =
      strong_coupling_compare(strong, 0, 10, strong_trials, seed, Tolerances{}, opt.mode(),
                              opt.threads);
  {
    std::string csv = "step,tv_distance\n";
    for (std::size_t n = 0; n < sc.tv_distance.size(); ++n)
      csv += std::to_string(n + 1) + "," + std::to_string(sc.tv_distance[n]) + "\n";
    write_text_file(opt.out_dir + "/tv_distance.csv", csv);
  }
  double tv_max = 0.0;
  for (double tv : sc.tv_distance) tv_max = std::max(tv_max, tv);
  std::cout << "strong compare: max TV " << tv_max << " over " << sc.tv_distance.size()
            << " steps (" << sc.ambiguous << " ambiguous)\n";

  // Detector clicks at two couplings.
  const DetectorModel det_fast = make_detector_model(2, 2, 2, 0.1, 1e-3, seed);
  const DetectorModel det_slow = make_detector_model(2, 2, 2, 0.05, 1e-3, seed);
  const long det_trials = opt.trials > 0 ? opt.trials : 400;
  const ClickExperimentResult fast =
      detector_click_experiment(det_fast, 1500, det_trials, seed, 0.5, 0.1, Tolerances{},
                                opt.mode(), opt.threads);
  const ClickExperimentResult slow =
      detector_click_experiment(det_slow, 1500, det_trials, seed, 0.5, 0.1, Tolerances{},
                                opt.mode(), opt.threads);
  {
    std::string csv = "delta,trajectory,click_step,dwell_steps,branch\n";
    for (long t = 0; t < fast.trials; ++t)
      csv += "0.1," + std::to_string(t) + "," + std::to_string(fast.click_step[std::size_t(t)]) +
             "," + std::to_string(fast.dwell_steps[std::size_t(t)]) + "," +
             std::to_string(fast.click_branch[std::size_t(t)] + 1) + "\n";
    for (long t = 0; t < slow.trials; ++t)
      csv += "0.05," + std::to_string(t) + "," +
             std::to_string(slow.click_step[std::size_t(t)]) + "," +
             std::to_string(slow.dwell_steps[std::size_t(t)]) + "," +
             std::to_string(slow.click_branch[std::size_t(t)] + 1) + "\n";
    write_text_file(opt.out_dir + "/click_times.csv", csv);
  }
  std::cout << "detector: censored " << fast.censored << "/" << fast.trials << " at delta 0.1, "
            << slow.censored << "/" << slow.trials << " at delta 0.05\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"discrete-time repeated-interaction simulator with spectral collapse"};
  app.require_subcommand(1);

  CommonOptions opt;
  long depth = 0;
  double prune = -1.0;
  bool write_sidecar = false;

  const auto add_common = [&](CLI::App* cmd, bool needs_scenario) {
    if (needs_scenario)
      cmd->add_option("--scenario", opt.scenario_path, "scenario JSON file")->required();
    cmd->add_option("--seed", opt.seed, "override masterSeed")
        ->each([&](const std::string&) { opt.seed_set = true; });
    cmd->add_option("--trials", opt.trials, "override trial count");
    cmd->add_option("--out", opt.out_dir, "output directory");
    cmd->add_option("--threads", opt.threads, "worker threads (0 = all)");
    cmd->add_flag("--serial", opt.serial, "use the serial reference ensemble loop");
  };

  CLI::App* validate = app.add_subcommand("validate", "parse and validate a scenario");
  add_common(validate, true);
  CLI::App* run = app.add_subcommand("run", "run the trajectory ensemble");
  add_common(run, true);
  CLI::App* tree = app.add_subcommand("tree", "enumerate the history tree and check it");
  add_common(tree, true);
  tree->add_option("--depth", depth, "tree depth (default: scenario steps)");
  tree->add_option("--prune", prune, "prune branches below this cumulative mass");
  CLI::App* oracle = app.add_subcommand("oracle", "Kraus-chain vs dense-tensor diff");
  add_common(oracle, true);
  oracle->add_flag("--write-sidecar", write_sidecar, "write <scenario>.expected.json");
  CLI::App* regimes = app.add_subcommand("regimes",
                                         "weak sweep, strong compare, detector experiment");
  add_common(regimes, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) return cmd_validate(opt);
    if (run->parsed()) return cmd_run(opt);
    if (tree->parsed()) return cmd_tree(opt, depth, prune, prune >= 0.0);
    if (oracle->parsed()) return cmd_oracle(opt, write_sidecar);
    if (regimes->parsed()) return cmd_regimes(opt);
  } catch (const ScenarioError& e) {
    std::cerr << e.what() << "\n";
    return kExitValidation;
  } catch (const CapExceeded& e) {
    std::cerr << "resource cap: " << e.what() << "\n";
    return kExitResourceCap;
  } catch (const InvariantViolation& e) {
    std::cerr << "numerical invariant: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const NumericalError& e) {
    std::cerr << "numerical invariant: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

#include "ethsim/ensemble.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace ethsim {

using nlohmann::json;

json convention_flags() {
  return json{{"tensorOrdering", "field-first"},
              {"fieldIndexOrigin", 0},
              {"branchLabelOrigin", 1},
              {"stepConsumes", "k[n-1]"},
              {"propagatorOrder", "U-then-V"}};
}

Trajectory simulate_trajectory(const CompiledScenario& cs, std::uint64_t trajectory_index) {
  const long steps = cs.scenario.steps;
  RngStream rng(cs.scenario.master_seed, trajectory_index);
  Trajectory traj;
  traj.master_seed = cs.scenario.master_seed;
  traj.index = trajectory_index;

  DensityMatrix omega = cs.initial_state;
  for (long n = 1; n <= steps; ++n) {
    TrajectoryStep step = [&] {
      if (cs.thermal) {
        auto [k, pre] = thermal_step(*cs.thermal, *cs.model, omega, rng, cs.tol);
        TrajectoryStep out = collapse_from_pre(pre, n, rng, cs.tol);
        out.field_index = k;
        return out;
      }
      return collapse_step(omega, cs.field.at(n - 1), cs.kraus, cs.propagator, rng, cs.tol);
    }();
    step.step_index = n;
    omega = step.post_collapse;
    traj.log_probability += std::log(step.born_probability);
    traj.steps.push_back(std::move(step));
  }
  return traj;
}

namespace {

void append_full_records(std::string& log, const Trajectory& traj) {
  for (const TrajectoryStep& step : traj.steps) {
    json rec{{"trajectory", traj.index},
             {"step", step.step_index},
             {"fieldIndex", step.field_index},
             {"eventSize", step.event_size},
             {"branch", step.branch + 1},
             {"bornProbability", step.born_probability},
             {"mixtureResidual", step.mixture_residual},
             {"droppedMass", step.dropped_mass},
             {"preCollapse", matrix_to_json(step.pre_collapse.mat())},
             {"postCollapse", matrix_to_json(step.post_collapse.mat())}};
    log += rec.dump();
    log += '\n';
  }
}

void append_summary_record(std::string& log, const Trajectory& traj) {
  json branches = json::array();
  json fields = json::array();
  for (const TrajectoryStep& step : traj.steps) {
    branches.push_back(step.branch + 1);
    fields.push_back(step.field_index);
  }
  json rec{{"trajectory", traj.index},
           {"type", "summary"},
           {"steps", long(traj.steps.size())},
           {"branches", std::move(branches)},
           {"fieldIndices", std::move(fields)},
           {"logProbability", traj.log_probability}};
  log += rec.dump();
  log += '\n';
}

}  // namespace

EnsembleOutput run_ensemble(const CompiledScenario& cs, ExecMode mode, int threads) {
  const auto t0 = std::chrono::steady_clock::now();
  const long trials = cs.scenario.trials;
  const long steps = cs.scenario.steps;
  const bool full_log = cs.scenario.log_mode == "full";
  const bool strong = cs.scenario.model.type == "strongCoupling";
  const bool detector = cs.scenario.model.type == "detector";

  // Unitary reference states V^n Ω0 V^{-n}.
  std::vector<Matrix> reference;
  {
    Matrix ref = cs.initial_state.mat();
    reference.push_back(ref);
    for (long n = 1; n <= steps; ++n) {
      ref = Matrix(cs.propagator.mat() * ref * cs.propagator.mat().adjoint());
      reference.push_back(ref);
    }
  }

  RunReport report;
  report.scenario_echo = scenario_to_json(cs.scenario);
  report.trials = trials;
  report.steps = steps;
  report.per_step.resize(std::size_t(steps));
  for (long n = 0; n < steps; ++n) report.per_step[std::size_t(n)].step = n + 1;

  std::vector<std::vector<long>> occupation;  // strong-coupling classification
  if (strong)
    occupation.assign(std::size_t(steps),
                      std::vector<long>(std::size_t(cs.model->partition_size()), 0));

  std::string log;
  const long batch_size = 256;
  for (long base = 0; base < trials; base += batch_size) {
    const long count = std::min(batch_size, trials - base);
    std::vector<Trajectory> batch;
    batch.resize(std::size_t(count));
    parallel_for(count, mode, threads, [&](long i) {
      batch[std::size_t(i)] = simulate_trajectory(cs, std::uint64_t(base + i));
    });
    for (long i = 0; i < count; ++i) {
      const Trajectory& traj = batch[std::size_t(i)];
      long click = -1;
      for (const TrajectoryStep& step : traj.steps) {
        StepStats& stats = report.per_step[std::size_t(step.step_index - 1)];
        stats.sample_size += 1;
        stats.mean_unitary_fidelity +=
            (step.post_collapse.mat() * reference[std::size_t(step.step_index)])
                .trace()
                .real();
        stats.mean_event_size += step.event_size;
        stats.branch_counts[step.branch + 1] += 1;
        stats.max_mixture_residual = std::max(stats.max_mixture_residual,
                                              step.mixture_residual);
        report.max_mixture_residual =
            std::max(report.max_mixture_residual, step.mixture_residual);
        report.max_event_commutator =
            std::max(report.max_event_commutator, step.event_commutator);
        report.max_dropped_mass = std::max(report.max_dropped_mass, step.dropped_mass);
        if (cs.thermal) report.field_index_counts[step.field_index] += 1;
        if (step.mixture_residual > 1e-12)
          throw NumericalError("invariant breach: mixture identity residual " +
                               std::to_string(step.mixture_residual) + " at step " +
                               std::to_string(step.step_index));
        if (step.event_commutator > 1e-10)
          throw NumericalError("invariant breach: event projections fail to commute "
                               "with the pre-collapse state (" +
                               std::to_string(step.event_commutator) + ")");
        if (strong) {
          // Undo the pending propagator application before classifying.
          const Matrix undressed = cs.propagator.mat().adjoint() * step.post_collapse.mat() *
                                   cs.propagator.mat();
          int best = -1;
          double best_dist = 0.1;
          for (long m = 0; m < cs.model->partition_size(); ++m) {
            const double dist =
                operator_norm(Matrix(undressed - cs.model->atom_projection(m).mat()));
            if (dist <= best_dist) {
              best_dist = dist;
              best = int(m);
            }
          }
          if (best >= 0)
            occupation[std::size_t(step.step_index - 1)][std::size_t(best)] += 1;
        }
        if (detector && click < 0) {
          const double overlap =
              (step.post_collapse.mat() * cs.detector->strong_subspace.mat()).trace().real();
          if (overlap > 0.5) click = step.step_index;
        }
      }
      if (detector) report.click_steps.push_back(click);
      if (full_log) append_full_records(log, traj);
      append_summary_record(log, traj);
    }
  }

  for (StepStats& stats : report.per_step) {
    if (stats.sample_size > 0) {
      stats.mean_unitary_fidelity /= double(stats.sample_size);
      stats.mean_event_size /= double(stats.sample_size);
    }
  }
  if (strong) {
    Matrix basis_columns(cs.model->atom_dim(), cs.model->partition_size());
    bool rank_one = true;
    for (long m = 0; m < cs.model->partition_size(); ++m)
      rank_one = rank_one && cs.model->atom_projection(m).rank() == 1;
    if (rank_one && trials > 0) {
      // Reference distribution from the classical chain recursion.
      Eigen::VectorXd mu = Eigen::VectorXd::Zero(cs.model->partition_size());
      long initial = 0;
      double best = -1.0;
      for (long m = 0; m < cs.model->partition_size(); ++m) {
        const double overlap =
            (cs.initial_state.mat() * cs.model->atom_projection(m).mat()).trace().real();
        if (overlap > best) {
          best = overlap;
          initial = m;
        }
      }
      mu(initial) = 1.0;
      for (long m = 0; m < cs.model->partition_size(); ++m) {
        Vector psi = Vector::Zero(cs.model->atom_dim());
        for (long x = 0; x < cs.model->atom_dim(); ++x)
          psi(x) = cs.model->atom_projection(m).mat()(x, m);  // rank-1 basis projections
        basis_columns.col(m) = psi;
      }
      const ClassicalChain chain = classical_transition(cs.propagator, basis_columns);
      // Reference at step n is P^{n-1} μ0: the first branching happens at step 2.
      for (long n = 1; n <= steps; ++n) {
        double tv = 0.0;
        for (long m = 0; m < cs.model->partition_size(); ++m)
          tv += std::abs(double(occupation[std::size_t(n - 1)][std::size_t(m)]) /
                             double(trials) -
                         mu(m));
        report.tv_distance.push_back(tv / 2.0);
        mu = chain.evolve(mu);
      }
    }
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return EnsembleOutput{std::move(report), std::move(log)};
}

json RunReport::to_json() const {
  json steps_json = json::array();
  for (const StepStats& s : per_step) {
    json counts = json::object();
    for (const auto& [branch, count] : s.branch_counts)
      counts[std::to_string(branch)] = count;
    steps_json.push_back(json{{"step", s.step},
                              {"meanUnitaryFidelity", s.mean_unitary_fidelity},
                              {"meanEventSize", s.mean_event_size},
                              {"branchCounts", std::move(counts)},
                              {"maxMixtureResidual", s.max_mixture_residual},
                              {"sampleSize", s.sample_size}});
  }
  json out{{"version", version},
           {"conventions", convention_flags()},
           {"scenario", scenario_echo},
           {"trials", trials},
           {"steps", steps},
           {"wallSeconds", wall_seconds},
           {"perStep", std::move(steps_json)},
           {"invariants",
            json{{"maxMixtureResidual", max_mixture_residual},
                 {"maxEventCommutator", max_event_commutator},
                 {"maxDroppedMass", max_dropped_mass}}}};
  if (!field_index_counts.empty()) {
    json counts = json::object();
    for (const auto& [k, count] : field_index_counts) counts[std::to_string(k)] = count;
    out["fieldIndexCounts"] = std::move(counts);
    out["fieldIndexSampleSize"] = trials * steps;
  }
  if (!tv_distance.empty()) {
    out["tvDistance"] = tv_distance;
    out["tvSampleSize"] = trials;
  }
  if (!click_steps.empty()) {
    out["clickSteps"] = click_steps;
    out["clickSampleSize"] = long(click_steps.size());
  }
  return out;
}

OracleDiff oracle_diff(const CompiledScenario& cs, long max_dim, std::uint64_t probe_seed) {
  const long field_dim = cs.scenario.field_dim;
  const long atom_dim = cs.scenario.atom_dim;
  OracleDiff diff;
  for (long n = 0; n <= cs.scenario.steps; ++n) {
    // Largest chain the cap allows: n consumed slices plus observable support.
    long capacity = max_dim / atom_dim;
    long slices = 0;
    while (capacity >= field_dim) {
      capacity /= field_dim;
      slices += 1;
    }
    if (slices < n) break;
    const long support = std::min(2l, slices - n);
    RngStream rng(probe_seed, std::uint64_t(1000 + n));
    for (int probe = 0; probe < 3; ++probe) {
      SliceObservable f = SliceObservable::identity();
      if (probe > 0 && support > 0) {
        f.start_slot = 0;
        for (long s = 0; s < (probe == 1 ? 1 : support); ++s)
          f.factors.push_back(random_hermitian(rng, field_dim));
      }
      const Matrix c = random_hermitian(rng, atom_dim);
      const Complex via_kraus = heisenberg_expectation(f, c, cs.initial_state, cs.field,
                                                       cs.kraus, cs.propagator, n, cs.tol);
      const Complex via_tensor = tensor_oracle_expectation(f, c, cs.initial_state, cs.field,
                                                           cs.interaction, cs.propagator, n,
                                                           max_dim);
      diff.max_abs_diff = std::max(diff.max_abs_diff, std::abs(via_kraus - via_tensor));
      diff.instances += 1;
    }
    diff.max_steps_probed = n;
  }
  return diff;
}

WeakSweep weak_sweep(long field_dim, long atom_dim, long partition_size,
                     const std::vector<double>& epsilons, std::uint64_t seed) {
  WeakSweep sweep;
  sweep.epsilons = epsilons;

  RngStream setup(seed, 4);
  std::vector<Matrix> generators;
  for (long m = 0; m < partition_size; ++m)
    generators.push_back(random_antihermitian_unit(setup, field_dim));
  std::vector<long> ranks(std::size_t(partition_size), atom_dim / partition_size);
  for (long i = 0; i < atom_dim % partition_size; ++i) ranks[std::size_t(i)] += 1;
  const UnitaryMatrix v = random_unitary(setup, atom_dim);
  const DensityMatrix omega = random_density(setup, atom_dim);

  for (double eps : epsilons) {
    const MeasurementModel model =
        weak_coupling_family(field_dim, ranks, v, eps, generators);
    const KrausFamily kraus =
        KrausFamily::from_unitary(build_measurement_unitary(model), field_dim, atom_dim);
    const DensityMatrix evolved = kraus.apply(0, v, omega);
    const Matrix unitary_ref = v.mat() * omega.mat() * v.mat().adjoint();
    sweep.deviations.push_back(operator_norm(Matrix(evolved.mat() - unitary_ref)));
  }

  // Least-squares slope of log(deviation) on log(epsilon).
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const long n = long(epsilons.size());
  for (long i = 0; i < n; ++i) {
    const double x = std::log(sweep.epsilons[std::size_t(i)]);
    const double y = std::log(sweep.deviations[std::size_t(i)]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  sweep.slope = (double(n) * sxy - sx * sy) / (double(n) * sxx - sx * sx);
  return sweep;
}

namespace {

// Stable short identifier of an atom state: FNV-1a over entries quantized at 1e-9.
std::string state_fingerprint(const Matrix& m) {
  std::uint64_t hash = 0xCBF29CE484222325ull;
  const auto mix = [&](double x) {
    const std::int64_t q = std::llround(x * 1e9);
    for (int b = 0; b < 8; ++b) {
      hash ^= std::uint64_t(q >> (8 * b)) & 0xFFull;
      hash *= 0x100000001B3ull;
    }
  };
  for (long i = 0; i < m.rows(); ++i)
    for (long j = 0; j < m.cols(); ++j) {
      mix(m(i, j).real());
      mix(m(i, j).imag());
    }
  std::ostringstream os;
  os << std::hex << hash;
  return os.str();
}

}  // namespace

json tree_to_json(const HistoryTree& tree) {
  json nodes = json::array();
  for (const HistoryNode& node : tree.nodes) {
    nodes.push_back(json{{"parent", node.parent},
                         {"branch", node.branch >= 0 ? node.branch + 1 : 0},
                         {"depth", node.depth},
                         {"conditionalProbability", node.conditional_probability},
                         {"cumulativeProbability", node.cumulative_probability},
                         {"prunedMass", node.pruned_mass},
                         {"cursor", node.state.cursor},
                         {"fingerprint", state_fingerprint(node.state.atom.mat())}});
  }
  return json{{"depth", tree.depth},
              {"pruneThreshold", tree.prune_threshold},
              {"prunedMassByDepth", tree.pruned_mass_by_depth},
              {"nodes", std::move(nodes)}};
}

void write_text_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << contents;
}

}  // namespace ethsim

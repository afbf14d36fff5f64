#include "ethsim/collapse.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ethsim {

ActualEvent center_of_centralizer(const DensityMatrix& omega, double cluster_tolerance) {
  SpectralDecomposition dec = hermitian_eigendecompose(omega.mat(), cluster_tolerance);
  ActualEvent event;
  for (std::size_t r = 0; r < dec.projections.size(); ++r) {
    const double prob = dec.eigenvalues[r] * double(dec.projections[r].rank());
    if (prob < kBranchDropCutoff) {
      event.dropped_mass += prob;
      event.dropped_branches += 1;
      continue;
    }
    event.eigenvalues.push_back(dec.eigenvalues[r]);
    event.projections.push_back(dec.projections[r]);
    event.born_probabilities.push_back(prob);
  }
  if (event.projections.empty())
    throw NumericalError("center_of_centralizer: no branch above the drop cutoff");
  return event;
}

BranchDraw born_sample(const ActualEvent& event, RngStream& rng) {
  std::vector<std::size_t> order(event.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return event.born_probabilities[a] > event.born_probabilities[b];
  });
  const double u = rng.uniform();
  double cumulative = 0.0;
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    cumulative += event.born_probabilities[order[pos]];
    if (u < cumulative || pos + 1 == order.size())
      return BranchDraw{int(order[pos]), event.born_probabilities[order[pos]]};
  }
  return BranchDraw{int(order.back()), event.born_probabilities[order.back()]};
}

namespace {

double mixture_residual(const ActualEvent& event, const DensityMatrix& pre) {
  Matrix sum = Matrix::Zero(pre.dim(), pre.dim());
  for (std::size_t r = 0; r < event.size(); ++r)
    sum += event.born_probabilities[r] / double(event.projections[r].rank()) *
           event.projections[r].mat();
  return operator_norm(Matrix(sum - pre.mat()));
}

double max_event_commutator(const ActualEvent& event, const DensityMatrix& pre) {
  double worst = 0.0;
  for (const Projection& p : event.projections) {
    Matrix comm = p.mat() * pre.mat() - pre.mat() * p.mat();
    worst = std::max(worst, operator_norm(comm));
  }
  return worst;
}

}  // namespace

TrajectoryStep collapse_from_pre(const DensityMatrix& pre_collapse, long step_index,
                                 RngStream& rng, const Tolerances& tol) {
  const ActualEvent event = center_of_centralizer(pre_collapse, tol.cluster);
  const BranchDraw draw = born_sample(event, rng);
  const Projection& pi = event.projections[std::size_t(draw.branch)];
  DensityMatrix post(Matrix(pi.mat() / double(pi.rank())), tol);

  TrajectoryStep step{step_index,
                      0,
                      pre_collapse,
                      int(event.size()),
                      draw.branch,
                      draw.probability,
                      std::move(post),
                      mixture_residual(event, pre_collapse),
                      max_event_commutator(event, pre_collapse),
                      event.dropped_mass};
  return step;
}

TrajectoryStep collapse_step(const DensityMatrix& omega_prev, int field_index,
                             const KrausFamily& kraus, const UnitaryMatrix& v, RngStream& rng,
                             const Tolerances& tol) {
  DensityMatrix pre = step_pre_collapse(omega_prev, field_index, kraus, v, tol);
  TrajectoryStep step = collapse_from_pre(pre, 0, rng, tol);
  step.field_index = field_index;
  return step;
}

Trajectory run_trajectory(const DensityMatrix& omega0, const FieldSequence& k,
                          const KrausFamily& kraus, const UnitaryMatrix& v, long steps,
                          const Tolerances& tol, std::uint64_t master_seed,
                          std::uint64_t trajectory_index) {
  if (steps > k.horizon())
    throw InvariantViolation("run_trajectory: steps exceed the field horizon");
  RngStream rng(master_seed, trajectory_index);
  Trajectory traj;
  traj.master_seed = master_seed;
  traj.index = trajectory_index;

  DensityMatrix omega = omega0;
  for (long n = 1; n <= steps; ++n) {
    TrajectoryStep step = collapse_step(omega, k.at(n - 1), kraus, v, rng, tol);
    step.step_index = n;
    omega = step.post_collapse;
    traj.log_probability += std::log(step.born_probability);
    traj.steps.push_back(std::move(step));
  }
  return traj;
}

}  // namespace ethsim

#pragma once

#include <cstdint>
#include <vector>

#include "ethsim/evolve.hpp"
#include "ethsim/linalg.hpp"
#include "ethsim/rng.hpp"

namespace ethsim {

// The actual event of a state: clustered spectral projections of the density
// matrix (the center of its centralizer on a full matrix algebra), each with
// Born weight q_r · rank(Π_r). Branches are ordered by descending eigenvalue.
// Branches whose weight falls below the drop cutoff are removed before
// sampling and accounted for in dropped_mass / dropped_branches.
struct ActualEvent {
  std::vector<double> eigenvalues;
  std::vector<Projection> projections;
  std::vector<double> born_probabilities;
  double dropped_mass = 0.0;
  int dropped_branches = 0;

  std::size_t size() const { return projections.size(); }
};

inline constexpr double kBranchDropCutoff = 1e-14;

ActualEvent center_of_centralizer(const DensityMatrix& omega, double cluster_tolerance);

// One branch index plus its Born probability, drawn by inverse CDF over
// descending-probability order (ties broken by event order, i.e. descending
// eigenvalue then ascending index) from a single uniform draw.
struct BranchDraw {
  int branch = 0;
  double probability = 1.0;
};

BranchDraw born_sample(const ActualEvent& event, RngStream& rng);

struct TrajectoryStep {
  long step_index = 0;
  int field_index = 0;  // the k value this step consumed (thermal: the sampled k)
  DensityMatrix pre_collapse;
  int event_size = 0;
  int branch = 0;
  double born_probability = 1.0;
  DensityMatrix post_collapse;
  // ||Σ_r prob(r) Ω^(r) - Ω̂|| over the retained branches, recorded per step.
  double mixture_residual = 0.0;
  double event_commutator = 0.0;  // max ||[Π_r, Ω̂]||
  double dropped_mass = 0.0;
};

struct Trajectory {
  std::uint64_t master_seed = 0;
  std::uint64_t index = 0;
  std::vector<TrajectoryStep> steps;
  double log_probability = 0.0;
};

// Evolve one step, take the event of the evolved state, Born-sample a branch,
// collapse onto Π_r / rank(Π_r).
TrajectoryStep collapse_step(const DensityMatrix& omega_prev, int field_index,
                             const KrausFamily& kraus, const UnitaryMatrix& v, RngStream& rng,
                             const Tolerances& tol);

// As collapse_step but from an externally supplied pre-collapse state (used by
// the thermal regime, where the channel coefficients are sampled per step).
TrajectoryStep collapse_from_pre(const DensityMatrix& pre_collapse, long step_index,
                                 RngStream& rng, const Tolerances& tol);

Trajectory run_trajectory(const DensityMatrix& omega0, const FieldSequence& k,
                          const KrausFamily& kraus, const UnitaryMatrix& v, long steps,
                          const Tolerances& tol, std::uint64_t master_seed,
                          std::uint64_t trajectory_index);

}  // namespace ethsim

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "ethsim/collapse.hpp"
#include "ethsim/evolve.hpp"
#include "ethsim/kraus.hpp"
#include "ethsim/linalg.hpp"
#include "ethsim/parallel.hpp"
#include "ethsim/rng.hpp"

namespace ethsim {

// Interaction of the form U = Σ_m T^(m) ⊗ Q_m: L unitaries on the field
// factor steered by a partition of unity on the atom.
class MeasurementModel {
 public:
  MeasurementModel(long field_dim, std::vector<UnitaryMatrix> field_unitaries,
                   std::vector<Projection> atom_partition, UnitaryMatrix atom_propagator);

  long field_dim() const { return field_dim_; }
  long atom_dim() const { return atom_propagator_.dim(); }
  long partition_size() const { return long(field_unitaries_.size()); }

  const UnitaryMatrix& field_unitary(long m) const { return field_unitaries_[std::size_t(m)]; }
  const Projection& atom_projection(long m) const { return atom_partition_[std::size_t(m)]; }
  const UnitaryMatrix& atom_propagator() const { return atom_propagator_; }

 private:
  long field_dim_ = 0;
  std::vector<UnitaryMatrix> field_unitaries_;
  std::vector<Projection> atom_partition_;
  UnitaryMatrix atom_propagator_;
};

UnitaryMatrix build_measurement_unitary(const MeasurementModel& model);

// Standard-basis partition into contiguous blocks of the given ranks.
std::vector<Projection> basis_block_partition(long atom_dim, const std::vector<long>& ranks);

// Hermitian PSD L×L coupling matrix with unit diagonal; eigenvalues descending
// and diagonalizer D with D†GD = diag(γ) (columns of D follow the ordering).
struct GMatrix {
  int field_index = 0;
  Matrix entries;
  std::vector<double> eigenvalues;
  Matrix diagonalizer;
  double hermiticity_defect = 0.0;
};

// g^{ℓm} = <T^(m) φ_k, T^(ℓ) φ_k> for the pure field slot value k.
GMatrix g_matrix_at(const MeasurementModel& model, int field_index);

// g^{ℓm} = tr(T^(ℓ) P (T^(m))†) / tr(P) for a mixed slice projection.
GMatrix g_matrix_from_projection(const MeasurementModel& model, const Projection& p);

// Ω̂ = Σ_{ℓm} g^{ℓm} V Q_ℓ Ω Q_m V†, evaluated both as the double sum and in
// the diagonalized Kraus form Σ_r γ_r V K_r Ω K_r† V† with K_r = Σ_m D[m,r] Q_m.
// The two routes must agree within 1e-12; their distance is written to
// *path_disagreement when given.
DensityMatrix step_via_g_coeffs(const MeasurementModel& model, const GMatrix& g,
                                const DensityMatrix& omega, const Tolerances& tol = Tolerances{},
                                double* path_disagreement = nullptr);

DensityMatrix step_via_g(const MeasurementModel& model, const DensityMatrix& omega,
                         int field_index, const Tolerances& tol = Tolerances{},
                         double* path_disagreement = nullptr);

// T^(m) = exp(ε σ^(m)) with anti-Hermitian ‖σ^(m)‖ ≤ 1, which matches
// 1 + ε τ^(m) to first order while keeping U exactly unitary.
MeasurementModel weak_coupling_family(long field_dim, const std::vector<long>& partition_ranks,
                                      const UnitaryMatrix& atom_propagator, double epsilon,
                                      const std::vector<Matrix>& generators);

MeasurementModel weak_coupling_family(long field_dim, const std::vector<long>& partition_ranks,
                                      const UnitaryMatrix& atom_propagator, double epsilon,
                                      RngStream& rng);

// Rank-1 standard-basis partition (L = M) with {T^(m) φ_0} exactly orthonormal
// columns of a Haar unitary before the ε-perturbation.
MeasurementModel strong_coupling_model(long field_dim, long atom_dim, double epsilon,
                                       const UnitaryMatrix& atom_propagator, RngStream& rng);

// Classical comparison chain, P(ℓ,m) = |<ψ_ℓ, V ψ_m>|², doubly stochastic.
class ClassicalChain {
 public:
  ClassicalChain(Eigen::MatrixXd transition);

  long state_count() const { return transition_.rows(); }
  const Eigen::MatrixXd& transition() const { return transition_; }
  // μ_n(ℓ) = Σ_m P(ℓ,m) μ_{n-1}(m)
  Eigen::VectorXd evolve(const Eigen::VectorXd& mu) const;

 private:
  Eigen::MatrixXd transition_;
};

// basis columns are the ψ_m; must be orthonormal (a unitary matrix).
ClassicalChain classical_transition(const UnitaryMatrix& v, const Matrix& basis);

struct StrongCouplingResult {
  std::vector<double> tv_distance;                 // per step 1..n
  std::vector<std::vector<long>> occupation;       // [step][basis index]
  Eigen::MatrixXd reference_distribution;          // μ_n per column, 0..n
  long ambiguous = 0;                              // classification failures
  long trials = 0;
};

// Runs collapse trajectories of the model, classifies each post-collapse state
// by the nearest partition projector (operator-norm distance ≤ 0.1, otherwise
// counted as ambiguous), and compares per-step occupation frequencies with the
// classical chain recursion.
StrongCouplingResult strong_coupling_compare(const MeasurementModel& model, long initial_basis,
                                             long steps, long trials, std::uint64_t master_seed,
                                             const Tolerances& tol = Tolerances{},
                                             ExecMode mode = ExecMode::Parallel,
                                             int threads = 0);

// Detector split: atom space h^w ⊕ h^s, weak projections Q_1..Q_J inside h^w
// with an all-ones coupling block, strong projections with an identity block,
// V = V0 ⊕ 1 plus a perturbation of operator norm ≤ delta.
struct DetectorModel {
  MeasurementModel model;
  long weak_dim = 0;
  long split = 0;  // J
  double delta = 0.0;
  double epsilon = 0.0;
  Projection weak_subspace;
  Projection strong_subspace;
};

// split_j weak projections (the first split_j - 1 rank one, the last covering
// the rest of h^w) plus one rank-1 strong projection per strong direction.
DetectorModel make_detector_model(long weak_dim, long strong_dim, long split_j, double delta,
                                  double epsilon, std::uint64_t seed);

struct ClickExperimentResult {
  std::vector<long> click_step;    // -1 when censored (no click in horizon)
  std::vector<long> dwell_steps;   // consecutive post-click steps near one Q_m
  std::vector<long> click_branch;  // index of the dwell projector, -1 censored
  long censored = 0;
  long trials = 0;
  long horizon = 0;
};

ClickExperimentResult detector_click_experiment(const DetectorModel& detector, long horizon,
                                                long trials, std::uint64_t master_seed,
                                                double click_threshold = 0.5,
                                                double dwell_margin = 0.1,
                                                const Tolerances& tol = Tolerances{},
                                                ExecMode mode = ExecMode::Parallel,
                                                int threads = 0);

// Per-slice mixed reference state of the field: orthogonal projections P_k
// with strictly descending positive weights summing to one.
class ThermalEnvironment {
 public:
  ThermalEnvironment(std::vector<Projection> projections, std::vector<double> weights);

  long size() const { return long(weights_.size()); }
  const Projection& projection(long k) const { return projections_[std::size_t(k)]; }
  double weight(long k) const { return weights_[std::size_t(k)]; }

  // Inverse-CDF sample of the slice projection index.
  int sample(RngStream& rng) const;

 private:
  std::vector<Projection> projections_;
  std::vector<double> weights_;
};

// Samples k_n with probability p_k and evolves the atom one pre-collapse step
// with the randomized coefficients of that slice projection.
std::pair<int, DensityMatrix> thermal_step(const ThermalEnvironment& env,
                                           const MeasurementModel& model,
                                           const DensityMatrix& omega, RngStream& rng,
                                           const Tolerances& tol = Tolerances{});

}  // namespace ethsim

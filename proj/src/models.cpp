#include "ethsim/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace ethsim {

MeasurementModel::MeasurementModel(long field_dim, std::vector<UnitaryMatrix> field_unitaries,
                                   std::vector<Projection> atom_partition,
                                   UnitaryMatrix atom_propagator)
    : field_dim_(field_dim),
      field_unitaries_(std::move(field_unitaries)),
      atom_partition_(std::move(atom_partition)),
      atom_propagator_(std::move(atom_propagator)) {
  const long L = partition_size();
  const long M = atom_dim();
  if (L < 1) throw InvariantViolation("MeasurementModel: empty partition");
  if (long(atom_partition_.size()) != L)
    throw InvariantViolation("MeasurementModel: need one projection per field unitary");
  if (L > M) throw InvariantViolation("MeasurementModel: partition size exceeds atom dimension");
  for (const auto& t : field_unitaries_)
    if (t.dim() != field_dim_)
      throw InvariantViolation("MeasurementModel: field unitary dimension mismatch");
  Matrix sum = Matrix::Zero(M, M);
  for (long m = 0; m < L; ++m) {
    if (atom_partition_[std::size_t(m)].dim() != M)
      throw InvariantViolation("MeasurementModel: projection dimension mismatch");
    for (long l = m + 1; l < L; ++l) {
      const double cross = operator_norm(
          Matrix(atom_partition_[std::size_t(m)].mat() * atom_partition_[std::size_t(l)].mat()));
      if (cross > 1e-10)
        throw InvariantViolation("MeasurementModel: projections " + std::to_string(m) + ", " +
                                 std::to_string(l) + " overlap (" + std::to_string(cross) + ")");
    }
    sum += atom_partition_[std::size_t(m)].mat();
  }
  const double completeness = operator_norm(Matrix(sum - Matrix::Identity(M, M)));
  if (completeness > 1e-10)
    throw InvariantViolation("MeasurementModel: partition does not resolve the identity (" +
                             std::to_string(completeness) + ")");
}

UnitaryMatrix build_measurement_unitary(const MeasurementModel& model) {
  const long dim = model.field_dim() * model.atom_dim();
  Matrix u = Matrix::Zero(dim, dim);
  for (long m = 0; m < model.partition_size(); ++m)
    u += kron(model.field_unitary(m).mat(), model.atom_projection(m).mat());
  return UnitaryMatrix(std::move(u));
}

namespace {

// Sorts the eigensystem descending and validates the shared G invariants.
GMatrix finalize_g(Matrix g, int field_index, long gram_rank_bound) {
  const long L = g.rows();
  GMatrix out;
  out.field_index = field_index;
  out.hermiticity_defect = operator_norm(Matrix(g - g.adjoint()));
  if (out.hermiticity_defect > 1e-10)
    throw InvariantViolation("GMatrix: hermiticity defect " +
                             std::to_string(out.hermiticity_defect));
  g = (g + Matrix(g.adjoint())) / 2.0;
  for (long m = 0; m < L; ++m)
    if (std::abs(g(m, m) - Complex(1.0, 0.0)) > 1e-10)
      throw InvariantViolation("GMatrix: diagonal entry " + std::to_string(m) + " is not 1");

  Eigen::SelfAdjointEigenSolver<Matrix> es(g);
  if (es.info() != Eigen::Success) throw NumericalError("GMatrix: eigensolver failed");
  out.entries = std::move(g);
  out.diagonalizer = Matrix(L, L);
  for (long r = 0; r < L; ++r) {
    out.eigenvalues.push_back(es.eigenvalues()(L - 1 - r));
    out.diagonalizer.col(r) = es.eigenvectors().col(L - 1 - r);
  }
  if (out.eigenvalues.back() < -1e-10)
    throw InvariantViolation("GMatrix: negative eigenvalue " +
                             std::to_string(out.eigenvalues.back()));
  const double trace_sum = std::accumulate(out.eigenvalues.begin(), out.eigenvalues.end(), 0.0);
  if (std::abs(trace_sum - double(L)) > 1e-10)
    throw InvariantViolation("GMatrix: eigenvalue sum " + std::to_string(trace_sum) +
                             " differs from L = " + std::to_string(L));
  if (gram_rank_bound > 0 && L > gram_rank_bound) {
    // Gram matrix of at most gram_rank_bound vectors: the excess must vanish.
    for (long r = gram_rank_bound; r < L; ++r)
      if (out.eigenvalues[std::size_t(r)] > 1e-10)
        throw InvariantViolation("GMatrix: rank exceeds the Gram bound");
  }
  return out;
}

}  // namespace

GMatrix g_matrix_at(const MeasurementModel& model, int field_index) {
  if (field_index < 0 || field_index >= model.field_dim())
    throw InvariantViolation("g_matrix_at: field index out of range");
  const long L = model.partition_size();
  Matrix g(L, L);
  for (long ell = 0; ell < L; ++ell)
    for (long m = 0; m < L; ++m)
      g(ell, m) = model.field_unitary(m).mat().col(field_index).dot(
          model.field_unitary(ell).mat().col(field_index));
  return finalize_g(std::move(g), field_index, model.field_dim());
}

GMatrix g_matrix_from_projection(const MeasurementModel& model, const Projection& p) {
  if (p.dim() != model.field_dim())
    throw InvariantViolation("g_matrix_from_projection: projection dimension mismatch");
  if (p.rank() < 1) throw InvariantViolation("g_matrix_from_projection: zero-rank projection");
  const long L = model.partition_size();
  Matrix g(L, L);
  for (long ell = 0; ell < L; ++ell)
    for (long m = 0; m < L; ++m)
      g(ell, m) = (model.field_unitary(ell).mat() * p.mat() *
                   model.field_unitary(m).mat().adjoint())
                      .trace() /
                  double(p.rank());
  return finalize_g(std::move(g), -1, 0);
}

DensityMatrix step_via_g_coeffs(const MeasurementModel& model, const GMatrix& g,
                                const DensityMatrix& omega, const Tolerances& tol,
                                double* path_disagreement) {
  const long L = model.partition_size();
  const long M = model.atom_dim();
  const Matrix& v = model.atom_propagator().mat();

  Matrix double_sum = Matrix::Zero(M, M);
  for (long ell = 0; ell < L; ++ell)
    for (long m = 0; m < L; ++m)
      double_sum += g.entries(ell, m) * Matrix(model.atom_projection(ell).mat() * omega.mat() *
                                               model.atom_projection(m).mat());
  double_sum = v * double_sum * v.adjoint();

  Matrix kraus_form = Matrix::Zero(M, M);
  for (long r = 0; r < L; ++r) {
    Matrix k_r = Matrix::Zero(M, M);
    for (long m = 0; m < L; ++m) k_r += g.diagonalizer(m, r) * model.atom_projection(m).mat();
    kraus_form += g.eigenvalues[std::size_t(r)] * Matrix(k_r * omega.mat() * k_r.adjoint());
  }
  kraus_form = v * kraus_form * v.adjoint();

  const double disagreement = operator_norm(Matrix(double_sum - kraus_form));
  if (path_disagreement) *path_disagreement = disagreement;
  if (disagreement > 1e-12)
    throw NumericalError("step_via_g: double-sum and diagonalized forms differ by " +
                         std::to_string(disagreement));
  return DensityMatrix(std::move(double_sum), tol);
}

DensityMatrix step_via_g(const MeasurementModel& model, const DensityMatrix& omega,
                         int field_index, const Tolerances& tol, double* path_disagreement) {
  return step_via_g_coeffs(model, g_matrix_at(model, field_index), omega, tol,
                           path_disagreement);
}

std::vector<Projection> basis_block_partition(long atom_dim, const std::vector<long>& ranks) {
  const long total = std::accumulate(ranks.begin(), ranks.end(), 0l);
  if (total != atom_dim)
    throw InvariantViolation("partition ranks sum to " + std::to_string(total) +
                             ", expected " + std::to_string(atom_dim));
  std::vector<Projection> partition;
  long offset = 0;
  for (long rank : ranks) {
    if (rank < 1) throw InvariantViolation("partition ranks must be positive");
    Matrix p = Matrix::Zero(atom_dim, atom_dim);
    for (long j = 0; j < rank; ++j) p(offset + j, offset + j) = 1.0;
    partition.emplace_back(std::move(p));
    offset += rank;
  }
  return partition;
}

MeasurementModel weak_coupling_family(long field_dim, const std::vector<long>& partition_ranks,
                                      const UnitaryMatrix& atom_propagator, double epsilon,
                                      const std::vector<Matrix>& generators) {
  if (epsilon < 0.0 || epsilon >= 1.0)
    throw InvariantViolation("weak_coupling_family: epsilon must lie in [0, 1)");
  if (generators.size() != partition_ranks.size())
    throw InvariantViolation("weak_coupling_family: need one generator per partition block");
  std::vector<UnitaryMatrix> ts;
  for (const Matrix& sigma : generators) {
    if (sigma.rows() != field_dim || sigma.cols() != field_dim)
      throw InvariantViolation("weak_coupling_family: generator dimension mismatch");
    if (operator_norm(Matrix(sigma + sigma.adjoint())) > 1e-10)
      throw InvariantViolation("weak_coupling_family: generator is not anti-Hermitian");
    if (operator_norm(sigma) > 1.0 + 1e-10)
      throw InvariantViolation("weak_coupling_family: generator norm exceeds 1");
    ts.push_back(expm_antihermitian(Matrix(epsilon * sigma)));
  }
  return MeasurementModel(field_dim, std::move(ts),
                          basis_block_partition(atom_propagator.dim(), partition_ranks),
                          atom_propagator);
}

MeasurementModel weak_coupling_family(long field_dim, const std::vector<long>& partition_ranks,
                                      const UnitaryMatrix& atom_propagator, double epsilon,
                                      RngStream& rng) {
  std::vector<Matrix> generators;
  for (std::size_t m = 0; m < partition_ranks.size(); ++m)
    generators.push_back(random_antihermitian_unit(rng, field_dim));
  return weak_coupling_family(field_dim, partition_ranks, atom_propagator, epsilon, generators);
}

MeasurementModel strong_coupling_model(long field_dim, long atom_dim, double epsilon,
                                       const UnitaryMatrix& atom_propagator, RngStream& rng) {
  if (field_dim < atom_dim)
    throw InvariantViolation("strong_coupling_model: needs field_dim >= atom_dim");
  if (atom_propagator.dim() != atom_dim)
    throw InvariantViolation("strong_coupling_model: propagator dimension mismatch");
  const UnitaryMatrix w = random_unitary(rng, field_dim);
  Matrix cycle = Matrix::Zero(field_dim, field_dim);
  for (long j = 0; j < field_dim; ++j) cycle((j + 1) % field_dim, j) = 1.0;

  std::vector<UnitaryMatrix> ts;
  Matrix shift = Matrix::Identity(field_dim, field_dim);
  for (long m = 0; m < atom_dim; ++m) {
    Matrix t = w.mat() * shift;
    if (epsilon > 0.0)
      t = t * expm_antihermitian(Matrix(epsilon * random_antihermitian_unit(rng, field_dim)))
                  .mat();
    ts.emplace_back(std::move(t));
    shift = Matrix(cycle * shift);
  }
  std::vector<Projection> partition;
  for (long m = 0; m < atom_dim; ++m) partition.push_back(Projection::basis(atom_dim, m));
  return MeasurementModel(field_dim, std::move(ts), std::move(partition), atom_propagator);
}

ClassicalChain::ClassicalChain(Eigen::MatrixXd transition) : transition_(std::move(transition)) {
  const long n = transition_.rows();
  if (transition_.cols() != n) throw InvariantViolation("ClassicalChain: not square");
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j)
      if (transition_(i, j) < -1e-14)
        throw InvariantViolation("ClassicalChain: negative transition probability");
  for (long i = 0; i < n; ++i) {
    if (std::abs(transition_.row(i).sum() - 1.0) > 1e-12)
      throw InvariantViolation("ClassicalChain: row " + std::to_string(i) + " sums to " +
                               std::to_string(transition_.row(i).sum()));
    if (std::abs(transition_.col(i).sum() - 1.0) > 1e-12)
      throw InvariantViolation("ClassicalChain: column " + std::to_string(i) + " sums to " +
                               std::to_string(transition_.col(i).sum()));
  }
}

Eigen::VectorXd ClassicalChain::evolve(const Eigen::VectorXd& mu) const {
  return transition_ * mu;
}

ClassicalChain classical_transition(const UnitaryMatrix& v, const Matrix& basis) {
  UnitaryMatrix b(basis, 1e-10);  // rejects a non-orthonormal basis
  Matrix amplitudes = b.mat().adjoint() * v.mat() * b.mat();
  Eigen::MatrixXd p(amplitudes.rows(), amplitudes.cols());
  for (long i = 0; i < p.rows(); ++i)
    for (long j = 0; j < p.cols(); ++j) p(i, j) = std::norm(amplitudes(i, j));
  return ClassicalChain(std::move(p));
}

namespace {

// Unit vector carried by a rank-1 projection.
Vector rank_one_vector(const Projection& q) {
  if (q.rank() != 1) throw InvariantViolation("expected a rank-1 projection");
  long pivot = 0;
  double best = -1.0;
  for (long j = 0; j < q.dim(); ++j)
    if (q.mat()(j, j).real() > best) {
      best = q.mat()(j, j).real();
      pivot = j;
    }
  Vector psi = q.mat().col(pivot);
  return psi / psi.norm();
}

}  // namespace

StrongCouplingResult strong_coupling_compare(const MeasurementModel& model, long initial_basis,
                                             long steps, long trials, std::uint64_t master_seed,
                                             const Tolerances& tol, ExecMode mode, int threads) {
  const long L = model.partition_size();
  if (initial_basis < 0 || initial_basis >= L)
    throw InvariantViolation("strong_coupling_compare: initial basis index out of range");
  Matrix basis(model.atom_dim(), L);
  for (long m = 0; m < L; ++m) basis.col(m) = rank_one_vector(model.atom_projection(m));

  const ClassicalChain chain = classical_transition(model.atom_propagator(), basis);
  const KrausFamily kraus =
      KrausFamily::from_unitary(build_measurement_unitary(model), model.field_dim(),
                                model.atom_dim());
  const DensityMatrix omega0(Matrix(model.atom_projection(initial_basis).mat()), tol);
  const FieldSequence field = FieldSequence::vacuum(model.field_dim(), steps);

  // classes[t][n] = nearest projector index at step n+1, or -1 when ambiguous.
  // Post-collapse states carry one pending propagator application (the step
  // rotates by V after the Q-sandwich), so states are compared in the frame
  // with that application undone.
  const Matrix& v = model.atom_propagator().mat();
  std::vector<std::vector<int>> classes;
  classes.resize(std::size_t(trials));
  parallel_for(trials, mode, threads, [&](long t) {
    RngStream rng(master_seed, std::uint64_t(t));
    DensityMatrix omega = omega0;
    std::vector<int> row;
    row.reserve(std::size_t(steps));
    for (long n = 1; n <= steps; ++n) {
      TrajectoryStep step = collapse_step(omega, field.at(n - 1), kraus, model.atom_propagator(),
                                          rng, tol);
      omega = step.post_collapse;
      const Matrix undressed = v.adjoint() * omega.mat() * v;
      int best = -1;
      double best_dist = 0.1;
      for (long m = 0; m < L; ++m) {
        const double dist = operator_norm(Matrix(undressed - model.atom_projection(m).mat()));
        if (dist <= best_dist) {
          best_dist = dist;
          best = int(m);
        }
      }
      row.push_back(best);
    }
    classes[std::size_t(t)] = std::move(row);
  });

  StrongCouplingResult result;
  result.trials = trials;
  result.occupation.assign(std::size_t(steps), std::vector<long>(std::size_t(L), 0));
  for (const auto& row : classes)
    for (std::size_t n = 0; n < row.size(); ++n) {
      if (row[n] < 0)
        result.ambiguous += 1;
      else
        result.occupation[n][std::size_t(row[n])] += 1;
    }

  // A basis-diagonal start does not branch at step 1; the chain advances once
  // per branching, so the reference at step n is P^{n-1} μ0.
  result.reference_distribution = Eigen::MatrixXd::Zero(L, steps + 1);
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(L);
  mu(initial_basis) = 1.0;
  result.reference_distribution.col(0) = mu;
  for (long n = 1; n <= steps; ++n) {
    result.reference_distribution.col(n) = mu;
    double tv = 0.0;
    for (long m = 0; m < L; ++m)
      tv += std::abs(double(result.occupation[std::size_t(n - 1)][std::size_t(m)]) /
                         double(trials) -
                     mu(m));
    result.tv_distance.push_back(tv / 2.0);
    mu = chain.evolve(mu);
  }
  return result;
}

DetectorModel make_detector_model(long weak_dim, long strong_dim, long split_j, double delta,
                                  double epsilon, std::uint64_t seed) {
  if (weak_dim < 1 || strong_dim < 1)
    throw InvariantViolation("make_detector_model: subspace dimensions must be positive");
  if (split_j < 1 || split_j > weak_dim)
    throw InvariantViolation("make_detector_model: split J must lie in [1, weak_dim]");
  if (delta < 0.0 || delta >= 1.0 || epsilon < 0.0 || epsilon >= 1.0)
    throw InvariantViolation("make_detector_model: delta and epsilon must lie in [0, 1)");
  const long M = weak_dim + strong_dim;
  const long L = split_j + strong_dim;
  const long N = strong_dim + 1;  // one shared weak image + orthonormal strong images
  RngStream rng(seed, 0);

  const UnitaryMatrix w = random_unitary(rng, N);
  Matrix cycle = Matrix::Zero(N, N);
  for (long j = 0; j < N; ++j) cycle((j + 1) % N, j) = 1.0;

  std::vector<UnitaryMatrix> ts;
  for (long m = 0; m < L; ++m) {
    const long column = (m < split_j) ? 0 : m - split_j + 1;
    Matrix shift = Matrix::Identity(N, N);
    for (long c = 0; c < column; ++c) shift = Matrix(cycle * shift);
    Matrix t = w.mat() * shift;
    if (epsilon > 0.0)
      t = t * expm_antihermitian(Matrix(epsilon * random_antihermitian_unit(rng, N))).mat();
    ts.emplace_back(std::move(t));
  }

  Matrix v0 = Matrix::Identity(M, M);
  v0.block(0, 0, weak_dim, weak_dim) = random_unitary(rng, weak_dim).mat();
  Matrix v = v0;
  if (delta > 0.0)
    v = v0 * expm_antihermitian(
                 Matrix(std::log1p(delta) * random_antihermitian_unit(rng, M)))
                 .mat();

  std::vector<long> ranks;
  for (long m = 0; m < split_j - 1; ++m) ranks.push_back(1);
  ranks.push_back(weak_dim - (split_j - 1));
  for (long m = 0; m < strong_dim; ++m) ranks.push_back(1);
  std::vector<Projection> partition = basis_block_partition(M, ranks);

  Matrix pw = Matrix::Zero(M, M);
  for (long j = 0; j < weak_dim; ++j) pw(j, j) = 1.0;
  Matrix ps = Matrix::Identity(M, M) - pw;

  DetectorModel detector{
      MeasurementModel(N, std::move(ts), std::move(partition), UnitaryMatrix(std::move(v))),
      weak_dim,
      split_j,
      delta,
      epsilon,
      Projection(std::move(pw)),
      Projection(std::move(ps))};
  return detector;
}

ClickExperimentResult detector_click_experiment(const DetectorModel& detector, long horizon,
                                                long trials, std::uint64_t master_seed,
                                                double click_threshold, double dwell_margin,
                                                const Tolerances& tol, ExecMode mode,
                                                int threads) {
  const MeasurementModel& model = detector.model;
  const KrausFamily kraus =
      KrausFamily::from_unitary(build_measurement_unitary(model), model.field_dim(),
                                model.atom_dim());
  const FieldSequence field = FieldSequence::vacuum(model.field_dim(), horizon);
  const DensityMatrix omega0 = DensityMatrix::basis_projector(model.atom_dim(), 0);

  ClickExperimentResult result;
  result.trials = trials;
  result.horizon = horizon;
  result.click_step.assign(std::size_t(trials), -1);
  result.dwell_steps.assign(std::size_t(trials), 0);
  result.click_branch.assign(std::size_t(trials), -1);

  parallel_for(trials, mode, threads, [&](long t) {
    RngStream rng(master_seed, std::uint64_t(t));
    DensityMatrix omega = omega0;
    long click = -1;
    long branch = -1;
    long dwell = 0;
    for (long n = 1; n <= horizon; ++n) {
      TrajectoryStep step = collapse_step(omega, field.at(n - 1), kraus, model.atom_propagator(),
                                          rng, tol);
      omega = step.post_collapse;
      if (click < 0) {
        const double overlap = (omega.mat() * detector.strong_subspace.mat()).trace().real();
        if (overlap > click_threshold) {
          click = n;
          double best = -1.0;
          for (long m = detector.split; m < model.partition_size(); ++m) {
            const double q_overlap =
                (omega.mat() * model.atom_projection(m).mat()).trace().real();
            if (q_overlap > best) {
              best = q_overlap;
              branch = m;
            }
          }
          dwell = 1;
        }
      } else if (branch >= 0) {
        const double q_overlap =
            (omega.mat() * model.atom_projection(branch).mat()).trace().real();
        if (q_overlap >= 1.0 - dwell_margin)
          dwell += 1;
        else
          break;  // dwell over; nothing further to record
      }
    }
    result.click_step[std::size_t(t)] = click;
    result.dwell_steps[std::size_t(t)] = dwell;
    result.click_branch[std::size_t(t)] = branch;
  });

  for (long t = 0; t < trials; ++t)
    if (result.click_step[std::size_t(t)] < 0) result.censored += 1;
  return result;
}

ThermalEnvironment::ThermalEnvironment(std::vector<Projection> projections,
                                       std::vector<double> weights)
    : projections_(std::move(projections)), weights_(std::move(weights)) {
  if (projections_.empty() || projections_.size() != weights_.size())
    throw InvariantViolation("ThermalEnvironment: need matching projections and weights");
  double sum = 0.0;
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    if (weights_[k] <= 0.0) throw InvariantViolation("ThermalEnvironment: weights must be > 0");
    if (k > 0 && weights_[k] >= weights_[k - 1])
      throw InvariantViolation("ThermalEnvironment: weights must be strictly descending");
    sum += weights_[k];
  }
  if (std::abs(sum - 1.0) > 1e-10)
    throw InvariantViolation("ThermalEnvironment: weights sum to " + std::to_string(sum));
  for (std::size_t k = 0; k < projections_.size(); ++k) {
    if (projections_[k].dim() != projections_[0].dim())
      throw InvariantViolation("ThermalEnvironment: projection dimension mismatch");
    for (std::size_t l = k + 1; l < projections_.size(); ++l)
      if (operator_norm(Matrix(projections_[k].mat() * projections_[l].mat())) > 1e-10)
        throw InvariantViolation("ThermalEnvironment: projections overlap");
  }
}

int ThermalEnvironment::sample(RngStream& rng) const {
  const double u = rng.uniform();
  double cumulative = 0.0;
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    cumulative += weights_[k];
    if (u < cumulative || k + 1 == weights_.size()) return int(k);
  }
  return int(weights_.size()) - 1;
}

std::pair<int, DensityMatrix> thermal_step(const ThermalEnvironment& env,
                                           const MeasurementModel& model,
                                           const DensityMatrix& omega, RngStream& rng,
                                           const Tolerances& tol) {
  const int k = env.sample(rng);
  const GMatrix g = g_matrix_from_projection(model, env.projection(k));
  return {k, step_via_g_coeffs(model, g, omega, tol)};
}

}  // namespace ethsim

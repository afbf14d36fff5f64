#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ethsim/models.hpp"
#include "test_support.hpp"

using namespace ethsim;
using namespace ethsim::testing;

namespace {

MeasurementModel random_model(RngStream& rng, long n, long m, long l) {
  std::vector<UnitaryMatrix> ts;
  for (long i = 0; i < l; ++i) ts.push_back(random_unitary(rng, n));
  std::vector<long> ranks(std::size_t(l), m / l);
  for (long i = 0; i < m % l; ++i) ranks[std::size_t(i)] += 1;
  return MeasurementModel(n, std::move(ts), basis_block_partition(m, ranks),
                          random_unitary(rng, m));
}

}  // namespace

TEST_CASE("partition validation") {
  std::vector<Projection> overlapping{Projection::basis(2, 0), Projection::basis(2, 0)};
  std::vector<UnitaryMatrix> ts{UnitaryMatrix::identity(2), UnitaryMatrix::identity(2)};
  CHECK_THROWS_AS(MeasurementModel(2, ts, overlapping, UnitaryMatrix::identity(2)),
                  InvariantViolation);
  std::vector<Projection> incomplete{Projection::basis(3, 0), Projection::basis(3, 1)};
  std::vector<UnitaryMatrix> ts3{UnitaryMatrix::identity(2), UnitaryMatrix::identity(2)};
  CHECK_THROWS_AS(MeasurementModel(2, ts3, incomplete, UnitaryMatrix::identity(3)),
                  InvariantViolation);
}

TEST_CASE("trivial measurement unitaries") {
  // L = 1, T = 1: the interaction is the identity.
  {
    std::vector<UnitaryMatrix> ts{UnitaryMatrix::identity(3)};
    std::vector<Projection> qs{Projection(Matrix(Matrix::Identity(2, 2)))};
    const MeasurementModel model(3, ts, qs, UnitaryMatrix::identity(2));
    CHECK(max_abs_diff(build_measurement_unitary(model).mat(),
                       Matrix(Matrix::Identity(6, 6))) == 0.0);
  }
  // All T equal: the field factor decouples, U = T ⊗ 1.
  {
    RngStream rng(62, 0);
    const UnitaryMatrix t = random_unitary(rng, 2);
    std::vector<UnitaryMatrix> ts{t, t};
    std::vector<Projection> qs{Projection::basis(2, 0), Projection::basis(2, 1)};
    const MeasurementModel model(2, ts, qs, UnitaryMatrix::identity(2));
    CHECK(max_abs_diff(build_measurement_unitary(model).mat(),
                       kron(t.mat(), Matrix(Matrix::Identity(2, 2)))) < 1e-14);
  }
}

TEST_CASE("Kraus operators of a measurement model follow the projection formula") {
  RngStream rng(63, 0);
  const MeasurementModel model = random_model(rng, 2, 2, 2);
  const KrausFamily family =
      KrausFamily::from_unitary(build_measurement_unitary(model), 2, 2);
  for (long alpha = 0; alpha < 2; ++alpha)
    for (long ell = 0; ell < 2; ++ell) {
      Matrix expected = Matrix::Zero(2, 2);
      for (long m = 0; m < 2; ++m)
        expected += model.field_unitary(m).mat()(alpha, ell) * model.atom_projection(m).mat();
      CHECK(max_abs_diff(family.op(alpha, ell), expected) < 1e-12);
    }
}

TEST_CASE("coupling matrix of coincident field unitaries is all-ones") {
  RngStream rng(64, 0);
  const UnitaryMatrix t = random_unitary(rng, 3);
  std::vector<UnitaryMatrix> ts{t, t, t};
  const MeasurementModel model(3, ts, basis_block_partition(3, {1, 1, 1}),
                               UnitaryMatrix::identity(3));
  const GMatrix g = g_matrix_at(model, 0);
  CHECK(max_abs_diff(g.entries, Matrix(Matrix::Ones(3, 3))) < 1e-12);
  CHECK(approx(g.eigenvalues[0], 3.0, 1e-10));
  CHECK(std::abs(g.eigenvalues[1]) < 1e-10);
  CHECK(std::abs(g.eigenvalues[2]) < 1e-10);
}

TEST_CASE("orthonormal images give the identity coupling matrix") {
  RngStream rng(65, 0);
  const MeasurementModel model = strong_coupling_model(3, 3, 0.0, random_unitary(rng, 3), rng);
  const GMatrix g = g_matrix_at(model, 0);
  CHECK(max_abs_diff(g.entries, Matrix(Matrix::Identity(3, 3))) < 1e-12);
  for (double gamma : g.eigenvalues) CHECK(approx(gamma, 1.0, 1e-10));
}

TEST_CASE("rank deficiency when the partition outnumbers the field dimension") {
  RngStream rng(66, 0);
  for (int trial = 0; trial < 10; ++trial) {
    const MeasurementModel model = random_model(rng, 2, 3, 3);  // N=2, L=3
    const GMatrix g = g_matrix_at(model, trial % 2);
    CHECK(g.eigenvalues.back() <= 1e-10);
  }
}

TEST_CASE("coupling matrix invariants on random models") {
  RngStream rng(67, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const long n = 2 + long(rng.next_u64() % 3);
    const long l = 2 + long(rng.next_u64() % 2);
    const MeasurementModel model = random_model(rng, n, l, l);
    const GMatrix g = g_matrix_at(model, int(rng.next_u64() % std::uint64_t(n)));
    for (long m = 0; m < l; ++m) CHECK(approx(g.entries(m, m).real(), 1.0, 1e-10));
    CHECK(g.eigenvalues.back() >= -1e-10);
    double sum = 0.0;
    for (double gamma : g.eigenvalues) sum += gamma;
    CHECK(approx(sum, double(l), 1e-10));
    CHECK(g.hermiticity_defect <= 1e-12);
  }
}

TEST_CASE("one-step map: all-ones coupling is unitary, identity coupling decoheres") {
  RngStream rng(68, 0);
  const UnitaryMatrix v = random_unitary(rng, 2);
  const DensityMatrix omega = random_density(rng, 2);

  // All T equal -> G all-ones -> Ω̂ = V Ω V†.
  const UnitaryMatrix t = random_unitary(rng, 2);
  std::vector<UnitaryMatrix> equal_ts{t, t};
  const MeasurementModel unitary_model(2, equal_ts, basis_block_partition(2, {1, 1}), v);
  const DensityMatrix u_out = step_via_g(unitary_model, omega, 0);
  CHECK(operator_norm(Matrix(u_out.mat() - v.mat() * omega.mat() * v.mat().adjoint())) <
        1e-12);

  // Orthonormal images -> G = 1 -> pure decoherence in the Q basis.
  RngStream rng2(68, 1);
  const MeasurementModel strong = strong_coupling_model(2, 2, 0.0, v, rng2);
  const DensityMatrix s_out = step_via_g(strong, omega, 0);
  Matrix expected = Matrix::Zero(2, 2);
  for (long m = 0; m < 2; ++m)
    expected += v.mat() * strong.atom_projection(m).mat() * omega.mat() *
                strong.atom_projection(m).mat() * v.mat().adjoint();
  CHECK(operator_norm(Matrix(s_out.mat() - expected)) < 1e-12);
}

TEST_CASE("triple-path agreement of the one-step map") {
  RngStream rng(69, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const long n = 2 + long(rng.next_u64() % 2);
    const long m_dim = 2 + long(rng.next_u64() % 2);
    const long l = std::min(m_dim, 2 + long(rng.next_u64() % 2));
    const MeasurementModel model = random_model(rng, n, m_dim, l);
    const DensityMatrix omega = random_density(rng, m_dim);
    const int k = int(rng.next_u64() % std::uint64_t(n));

    double disagreement = 0.0;
    const DensityMatrix via_g = step_via_g(model, omega, k, Tolerances{}, &disagreement);
    CHECK(disagreement <= 1e-12);  // double sum vs diagonalized Kraus form

    const KrausFamily family =
        KrausFamily::from_unitary(build_measurement_unitary(model), n, m_dim);
    const DensityMatrix via_kraus =
        step_pre_collapse(omega, k, family, model.atom_propagator());
    CHECK(operator_norm(Matrix(via_g.mat() - via_kraus.mat())) <= 1e-10);
  }
}

TEST_CASE("weak-coupling family construction") {
  RngStream rng(70, 0);
  const UnitaryMatrix v = random_unitary(rng, 2);
  CHECK_THROWS_AS(weak_coupling_family(2, {1, 1}, v, 1.5, rng), InvariantViolation);

  const MeasurementModel zero = weak_coupling_family(2, {1, 1}, v, 0.0, rng);
  for (long m = 0; m < 2; ++m)
    CHECK(max_abs_diff(zero.field_unitary(m).mat(), Matrix(Matrix::Identity(2, 2))) < 1e-14);
  const GMatrix g0 = g_matrix_at(zero, 0);
  CHECK(max_abs_diff(g0.entries, Matrix(Matrix::Ones(2, 2))) < 1e-12);

  const double eps = 1e-3;
  const MeasurementModel weak = weak_coupling_family(2, {1, 1}, v, eps, rng);
  const DensityMatrix omega = random_density(rng, 2);
  const DensityMatrix out = step_via_g(weak, omega, 0);
  CHECK(operator_norm(Matrix(out.mat() - v.mat() * omega.mat() * v.mat().adjoint())) <=
        10.0 * eps);
}

TEST_CASE("weak-coupling deviation scales linearly over three decades") {
  RngStream rng(71, 0);
  const UnitaryMatrix v = random_unitary(rng, 2);
  std::vector<Matrix> generators;
  for (int m = 0; m < 2; ++m) generators.push_back(random_antihermitian_unit(rng, 2));
  const DensityMatrix omega = random_density(rng, 2);

  std::vector<double> eps{1e-1, 1e-2, 1e-3};
  std::vector<double> dev;
  for (double e : eps) {
    const MeasurementModel model = weak_coupling_family(2, {1, 1}, v, e, generators);
    const DensityMatrix out = step_via_g(model, omega, 0);
    dev.push_back(operator_norm(Matrix(out.mat() - v.mat() * omega.mat() * v.mat().adjoint())));
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const double x = std::log(eps[i]), y = std::log(dev[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double slope = (3.0 * sxy - sx * sy) / (3.0 * sxx - sx * sx);
  CHECK(slope == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("classical transition matrices") {
  const ClassicalChain identity_chain =
      classical_transition(UnitaryMatrix::identity(3), Matrix(Matrix::Identity(3, 3)));
  CHECK((identity_chain.transition() - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() ==
        0.0);

  Matrix hadamard(2, 2);
  hadamard << 1, 1, 1, -1;
  hadamard /= std::sqrt(2.0);
  const ClassicalChain chain =
      classical_transition(UnitaryMatrix(hadamard), Matrix(Matrix::Identity(2, 2)));
  for (long i = 0; i < 2; ++i)
    for (long j = 0; j < 2; ++j) CHECK(approx(chain.transition()(i, j), 0.5, 1e-14));

  RngStream rng(72, 0);
  const ClassicalChain random_chain =
      classical_transition(random_unitary(rng, 4), Matrix(Matrix::Identity(4, 4)));
  for (long i = 0; i < 4; ++i) {
    CHECK(approx(random_chain.transition().row(i).sum(), 1.0, 1e-12));
    CHECK(approx(random_chain.transition().col(i).sum(), 1.0, 1e-12));
  }

  Matrix not_orthonormal = Matrix::Ones(2, 2);
  CHECK_THROWS_AS(classical_transition(UnitaryMatrix::identity(2), not_orthonormal),
                  InvariantViolation);
}

TEST_CASE("frozen chain when the coupling is ideal and V is trivial") {
  RngStream rng(73, 0);
  const MeasurementModel model = strong_coupling_model(2, 2, 0.0, UnitaryMatrix::identity(2),
                                                       rng);
  const StrongCouplingResult result =
      strong_coupling_compare(model, 0, 5, 200, 11, Tolerances{}, ExecMode::Serial, 0);
  for (double tv : result.tv_distance) CHECK(tv == 0.0);
  CHECK(result.ambiguous == 0);
}

TEST_CASE("strong coupling tracks the classical chain") {
  RngStream rng(74, 0);
  const UnitaryMatrix v = random_unitary(rng, 2);
  const MeasurementModel model = strong_coupling_model(2, 2, 1e-3, v, rng);
  const long trials = 2000;
  const StrongCouplingResult result =
      strong_coupling_compare(model, 0, 8, trials, 12, Tolerances{}, ExecMode::Parallel, 0);
  CHECK(result.ambiguous == 0);
  for (double tv : result.tv_distance) CHECK(tv <= 0.08);

  // The first branching (step 2) draws from P(·, initial).
  const ClassicalChain chain = classical_transition(v, Matrix(Matrix::Identity(2, 2)));
  for (long ell = 0; ell < 2; ++ell) {
    const double p = chain.transition()(ell, 0);
    const double freq = double(result.occupation[1][std::size_t(ell)]) / double(trials);
    const double sigma = std::sqrt(p * (1 - p) / double(trials));
    CHECK(std::abs(freq - p) <= 3.0 * sigma + 1e-2);  // + O(eps) systematic
  }
}

TEST_CASE("detector model structure") {
  const DetectorModel det = make_detector_model(2, 2, 2, 0.1, 1e-3, 5);
  CHECK(det.model.atom_dim() == 4);
  CHECK(det.model.field_dim() == 3);
  CHECK(det.model.partition_size() == 4);
  // The strong block of V moves weak vectors by O(delta) only.
  const Matrix v = det.model.atom_propagator().mat();
  CHECK(operator_norm(Matrix(det.strong_subspace.mat() * v * det.weak_subspace.mat())) <=
        0.1 + 1e-12);
  // Coupling block structure at the vacuum slot: all-ones weak block, identity
  // strong block, O(eps) cross terms.
  const GMatrix g = g_matrix_at(det.model, 0);
  for (long a = 0; a < 2; ++a)
    for (long b = 0; b < 2; ++b)
      CHECK(std::abs(g.entries(a, b) - Complex(1.0, 0.0)) <= 3e-3);
  for (long a = 2; a < 4; ++a)
    for (long b = 2; b < 4; ++b)
      CHECK(std::abs(g.entries(a, b) - Complex(a == b ? 1.0 : 0.0, 0.0)) <= 3e-3);
  for (long a = 0; a < 2; ++a)
    for (long b = 2; b < 4; ++b) CHECK(std::abs(g.entries(a, b)) <= 3e-3);

  CHECK_THROWS_AS(make_detector_model(0, 2, 1, 0.1, 1e-3, 5), InvariantViolation);
  CHECK_THROWS_AS(make_detector_model(2, 2, 3, 0.1, 1e-3, 5), InvariantViolation);
}

TEST_CASE("detector with delta = 0 never clicks") {
  const DetectorModel det = make_detector_model(2, 2, 2, 0.0, 1e-3, 5);
  const ClickExperimentResult result =
      detector_click_experiment(det, 100, 30, 21, 0.5, 0.1, Tolerances{}, ExecMode::Parallel,
                                0);
  CHECK(result.censored == result.trials);
  for (long c : result.click_step) CHECK(c == -1);
}

TEST_CASE("detector clicks arrive and dwell when delta > 0") {
  const DetectorModel det = make_detector_model(2, 2, 2, 0.1, 1e-3, 5);
  const ClickExperimentResult result =
      detector_click_experiment(det, 1200, 60, 22, 0.5, 0.1, Tolerances{}, ExecMode::Parallel,
                                0);
  long clicked = 0, dwell_ok = 0;
  for (long t = 0; t < result.trials; ++t) {
    if (result.click_step[std::size_t(t)] < 0) continue;
    clicked += 1;
    CHECK(result.click_branch[std::size_t(t)] >= det.split);
    if (result.dwell_steps[std::size_t(t)] >= 3) dwell_ok += 1;  // 1/(4*0.1) = 2.5
  }
  CHECK(clicked >= result.trials / 2);
  CHECK(double(dwell_ok) >= 0.8 * double(clicked));
}

TEST_CASE("thermal environment validation and sampling law") {
  CHECK_THROWS_AS(ThermalEnvironment({Projection::basis(2, 0), Projection::basis(2, 1)},
                                     {0.5, 0.5}),
                  InvariantViolation);  // not strictly descending
  CHECK_THROWS_AS(ThermalEnvironment({Projection::basis(2, 0), Projection::basis(2, 0)},
                                     {0.6, 0.4}),
                  InvariantViolation);  // overlapping projections

  Matrix tail = Matrix::Zero(4, 2);
  tail(2, 0) = 1.0;
  tail(3, 1) = 1.0;
  const ThermalEnvironment env(
      {Projection::basis(4, 0), Projection::basis(4, 1), Projection::span(tail)},
      {0.5, 0.3, 0.2});
  const long draws = 100000;
  std::vector<long> counts(3, 0);
  RngStream sample_rng(76, 0);
  for (long i = 0; i < draws; ++i) counts[std::size_t(env.sample(sample_rng))] += 1;
  const double expected[3] = {0.5, 0.3, 0.2};
  for (int k = 0; k < 3; ++k) {
    const double sigma = std::sqrt(expected[k] * (1 - expected[k]) * double(draws));
    CHECK(std::abs(double(counts[std::size_t(k)]) - expected[k] * double(draws)) <=
          3.0 * sigma);
  }
}

TEST_CASE("single-projection environment on the vacuum reduces to the pure metric") {
  RngStream rng(77, 0);
  const MeasurementModel model = random_model(rng, 3, 2, 2);
  const ThermalEnvironment env({Projection::basis(3, 0)}, {1.0});
  const DensityMatrix omega = random_density(rng, 2);
  RngStream step_rng(77, 1);
  const auto [k, evolved] = thermal_step(env, model, omega, step_rng);
  CHECK(k == 0);
  const DensityMatrix reference = step_via_g(model, omega, 0);
  CHECK(operator_norm(Matrix(evolved.mat() - reference.mat())) < 1e-12);
}

TEST_CASE("randomized coupling coefficients match a direct trace computation") {
  RngStream rng(78, 0);
  const MeasurementModel model = random_model(rng, 4, 3, 3);
  const UnitaryMatrix frame = random_unitary(rng, 4);
  const Projection p = Projection::span(frame.mat().block(0, 0, 4, 2));  // rank 2
  const GMatrix g = g_matrix_from_projection(model, p);
  for (long ell = 0; ell < 3; ++ell)
    for (long m = 0; m < 3; ++m) {
      Complex direct(0.0, 0.0);
      const Matrix prod = model.field_unitary(ell).mat() * p.mat() *
                          model.field_unitary(m).mat().adjoint();
      for (long i = 0; i < 4; ++i) direct += prod(i, i);
      direct /= 2.0;  // tr(P) = 2
      CHECK(std::abs(g.entries(ell, m) - direct) < 1e-12);
    }
}

TEST_CASE("thermal steps preserve the trace") {
  RngStream rng(79, 0);
  const MeasurementModel model = random_model(rng, 4, 3, 3);
  const UnitaryMatrix frame = random_unitary(rng, 4);
  const ThermalEnvironment env({Projection::span(frame.mat().block(0, 0, 4, 1)),
                                Projection::span(frame.mat().block(0, 1, 4, 2))},
                               {0.7, 0.3});
  DensityMatrix omega = random_density(rng, 3);
  RngStream step_rng(79, 1);
  for (int n = 0; n < 20; ++n) {
    const auto [k, evolved] = thermal_step(env, model, omega, step_rng);
    CHECK(std::abs(evolved.mat().trace().real() - 1.0) <= 1e-12);
    omega = evolved;
  }
}

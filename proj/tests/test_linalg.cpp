#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ethsim/linalg.hpp"
#include "ethsim/rng.hpp"
#include "test_support.hpp"

using namespace ethsim;
using namespace ethsim::testing;

namespace {

Matrix diag3(double a, double b, double c) {
  Matrix m = Matrix::Zero(3, 3);
  m(0, 0) = a;
  m(1, 1) = b;
  m(2, 2) = c;
  return m;
}

}  // namespace

TEST_CASE("eigendecomposition of a nondegenerate diagonal matrix") {
  const SpectralDecomposition dec = hermitian_eigendecompose(diag3(0.5, 0.3, 0.2), 1e-8);
  REQUIRE(dec.eigenvalues.size() == 3);
  CHECK(approx(dec.eigenvalues[0], 0.5, 1e-14));
  CHECK(approx(dec.eigenvalues[1], 0.3, 1e-14));
  CHECK(approx(dec.eigenvalues[2], 0.2, 1e-14));
  for (const auto& p : dec.projections) CHECK(p.rank() == 1);
  // Diagonal input: the projections are the diagonal basis projectors.
  CHECK(max_abs_diff(dec.projections[0].mat(), Projection::basis(3, 0).mat()) < 1e-12);
  CHECK(max_abs_diff(dec.projections[2].mat(), Projection::basis(3, 2).mat()) < 1e-12);
}

TEST_CASE("full degeneracy clusters into a single projection") {
  const Matrix a = Matrix::Identity(3, 3) / 3.0;
  const SpectralDecomposition dec = hermitian_eigendecompose(a, 1e-8);
  REQUIRE(dec.eigenvalues.size() == 1);
  CHECK(approx(dec.eigenvalues[0], 1.0 / 3.0, 1e-14));
  CHECK(dec.projections[0].rank() == 3);
}

TEST_CASE("random Hermitian 4x4 against the companion-matrix root oracle") {
  RngStream rng(101, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = random_hermitian(rng, 4);
    const SpectralDecomposition dec = hermitian_eigendecompose(a, 1e-8);
    CHECK(operator_norm(Matrix(a - dec.reconstruct())) <= 1e-10);

    const std::vector<double> roots = companion_roots(char_poly_coeffs(a));
    std::vector<double> spectrum;
    for (std::size_t r = 0; r < dec.eigenvalues.size(); ++r)
      for (long m = 0; m < dec.projections[r].rank(); ++m)
        spectrum.push_back(dec.eigenvalues[r]);
    REQUIRE(spectrum.size() == roots.size());
    for (std::size_t i = 0; i < roots.size(); ++i)
      CHECK(approx(spectrum[i], roots[i], 1e-8));
  }
}

TEST_CASE("eigenvalues within the cluster tolerance merge") {
  Matrix a = diag3(0.5, 0.5 - 1e-12, 1e-13);
  const SpectralDecomposition dec = hermitian_eigendecompose(a, 1e-8);
  REQUIRE(dec.eigenvalues.size() == 2);
  CHECK(dec.projections[0].rank() == 2);
  CHECK(approx(dec.eigenvalues[0], 0.5, 1e-11));
  // Representatives stay separated by more than the cluster tolerance.
  CHECK(dec.eigenvalues[0] - dec.eigenvalues[1] > dec.cluster_tolerance);
}

TEST_CASE("spectral decomposition invariants on random input") {
  RngStream rng(7, 0);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix a = random_hermitian(rng, 5);
    const SpectralDecomposition dec = hermitian_eigendecompose(a, 1e-8);
    CHECK(dec.total_rank() == 5);
    double trace_sum = 0.0;
    for (std::size_t r = 0; r < dec.eigenvalues.size(); ++r) {
      trace_sum += dec.eigenvalues[r] * double(dec.projections[r].rank());
      for (std::size_t s = 0; s < dec.eigenvalues.size(); ++s) {
        const Matrix prod = dec.projections[r].mat() * dec.projections[s].mat();
        if (r == s)
          CHECK(operator_norm(Matrix(prod - dec.projections[r].mat())) < 1e-10);
        else
          CHECK(operator_norm(prod) < 1e-10);
      }
    }
    CHECK(approx(trace_sum, a.trace().real(), 1e-10));
  }
}

TEST_CASE("eigendecompose rejects bad input") {
  RngStream rng(8, 0);
  CHECK_THROWS_AS(hermitian_eigendecompose(random_complex(rng, 3, 3), 1e-8),
                  InvariantViolation);
  CHECK_THROWS_AS(hermitian_eigendecompose(Matrix(Matrix::Identity(2, 2)), 0.0),
                  InvariantViolation);
}

TEST_CASE("kron identities") {
  const Matrix id2 = Matrix::Identity(2, 2);
  CHECK(max_abs_diff(kron(id2, id2), Matrix(Matrix::Identity(4, 4))) == 0.0);

  Matrix a = Matrix::Zero(2, 2), b = Matrix::Zero(2, 2);
  a(0, 0) = 1;
  a(1, 1) = 2;
  b(0, 0) = 3;
  b(1, 1) = 4;
  Matrix expected = Matrix::Zero(4, 4);
  expected(0, 0) = 3;
  expected(1, 1) = 4;
  expected(2, 2) = 6;
  expected(3, 3) = 8;
  CHECK(max_abs_diff(kron(a, b), expected) == 0.0);
}

TEST_CASE("kron matches the index formula on random input") {
  RngStream rng(9, 0);
  const Matrix a = random_complex(rng, 2, 2);
  const Matrix b = random_complex(rng, 2, 2);
  const Matrix k = kron(a, b);
  for (long i = 0; i < 2; ++i)
    for (long j = 0; j < 2; ++j)
      for (long p = 0; p < 2; ++p)
        for (long q = 0; q < 2; ++q)
          CHECK(std::abs(k(i * 2 + p, j * 2 + q) - a(i, j) * b(p, q)) == 0.0);
}

TEST_CASE("kron mixed-product and associativity properties") {
  RngStream rng(10, 0);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix a = random_complex(rng, 2, 2), b = random_complex(rng, 3, 3);
    const Matrix c = random_complex(rng, 2, 2), d = random_complex(rng, 3, 3);
    CHECK(max_abs_diff(Matrix(kron(a, b) * kron(c, d)), kron(Matrix(a * c), Matrix(b * d))) <
          1e-12);
    const Matrix e = random_complex(rng, 2, 2);
    CHECK(max_abs_diff(kron(kron(a, b), e), kron(a, kron(b, e))) < 1e-12);
  }
}

TEST_CASE("kron dimension cap") {
  const Matrix big = Matrix::Identity(512, 512);
  CHECK_THROWS_AS(kron(kron(big, big), Matrix(Matrix::Identity(2, 2))), CapExceeded);
}

TEST_CASE("norms and dagger") {
  CHECK(approx(operator_norm(Matrix(Matrix::Identity(5, 5))), 1.0, 1e-14));
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 1;
  d(1, 1) = -2;
  CHECK(approx(trace_norm(d), 3.0, 1e-14));

  RngStream rng(11, 0);
  const Matrix a = random_complex(rng, 3, 3);
  // operatorNorm^2 equals the top eigenvalue of A†A.
  const Matrix gram = a.adjoint() * a;
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
  CHECK(approx(operator_norm(a) * operator_norm(a), es.eigenvalues().maxCoeff(), 1e-10));

  const Matrix back = dagger(dagger(a));
  CHECK(max_abs_diff(back, a) == 0.0);
}

TEST_CASE("validated constructors enforce their invariants") {
  RngStream rng(12, 0);
  CHECK_THROWS_AS(UnitaryMatrix(random_complex(rng, 3, 3)), InvariantViolation);
  CHECK_NOTHROW(random_unitary(rng, 4));

  Matrix not_normalized = Matrix::Identity(2, 2);
  CHECK_THROWS_AS(DensityMatrix{not_normalized}, InvariantViolation);
  CHECK_NOTHROW(DensityMatrix::maximally_mixed(4));
  CHECK_NOTHROW(DensityMatrix::basis_projector(4, 2));

  Matrix skew = Matrix::Zero(2, 2);
  skew(0, 1) = 1.0;
  CHECK_THROWS_AS(Projection{skew}, InvariantViolation);
  CHECK(Projection::basis(3, 1).rank() == 1);

  Matrix nan_mat = Matrix::Identity(2, 2);
  nan_mat(0, 0) = Complex(std::nan(""), 0.0);
  CHECK_THROWS_AS(UnitaryMatrix{nan_mat}, InvariantViolation);
}

TEST_CASE("partial trace over the first factor") {
  RngStream rng(13, 0);
  const Matrix a = random_complex(rng, 3, 3);
  const Matrix b = random_complex(rng, 2, 2);
  const Matrix reduced = partial_trace_first(kron(a, b), 3, 2);
  CHECK(max_abs_diff(reduced, Matrix(a.trace() * b)) < 1e-12);
}

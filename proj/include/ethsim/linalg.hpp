#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ethsim {

using Complex = std::complex<double>;

// Dense, row-major, double-precision complex storage throughout.
using Matrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::Matrix<Complex, Eigen::Dynamic, 1>;

// Hard cap on any matrix dimension produced by kron/embedding.
inline constexpr long kMaxDim = 1 << 16;

// A validated-constructor invariant failed (non-unitary input, trace drift, ...).
class InvariantViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An iterative solver failed to converge or produced an unusable result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A configured resource cap (dimension, node count) was exceeded.
class CapExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Tolerances {
  double unitarity = 1e-10;
  double hermiticity = 1e-10;
  double trace = 1e-10;
  double positivity = 1e-10;
  double cluster = 1e-8;
};

bool all_finite(const Matrix& a);

Matrix dagger(const Matrix& a);

// Standard Kronecker product, (A⊗B)[(i,k),(j,l)] = A[i,j]·B[k,l].
Matrix kron(const Matrix& a, const Matrix& b);

// Largest singular value.
double operator_norm(const Matrix& a);

// Sum of singular values.
double trace_norm(const Matrix& a);

// Partial trace over the first (dim_a) factor of a (dim_a*dim_b) square matrix.
Matrix partial_trace_first(const Matrix& ab, long dim_a, long dim_b);

// Unitary within `tol` in operator norm; throws InvariantViolation otherwise.
class UnitaryMatrix {
 public:
  explicit UnitaryMatrix(Matrix m, double tol = Tolerances{}.unitarity);
  static UnitaryMatrix identity(long dim);

  long dim() const { return mat_.rows(); }
  const Matrix& mat() const { return mat_; }

 private:
  Matrix mat_;
};

// Hermitian, unit trace, smallest eigenvalue ≥ -tol.
class DensityMatrix {
 public:
  explicit DensityMatrix(Matrix m, const Tolerances& tol = Tolerances{});
  static DensityMatrix maximally_mixed(long dim);
  static DensityMatrix basis_projector(long dim, long index);

  long dim() const { return mat_.rows(); }
  const Matrix& mat() const { return mat_; }

 private:
  Matrix mat_;
};

// P = P† = P² within tol; rank is tr(P) rounded to the nearest integer.
class Projection {
 public:
  explicit Projection(Matrix m, double tol = 1e-8);
  static Projection basis(long dim, long index);
  static Projection span(const Matrix& orthonormal_columns);

  long dim() const { return mat_.rows(); }
  long rank() const { return rank_; }
  const Matrix& mat() const { return mat_; }

 private:
  Matrix mat_;
  long rank_ = 0;
};

// Clustered spectral decomposition A = Σ_r q_r Π_r with q_1 > q_2 > ...
// and consecutive representatives separated by more than cluster_tolerance.
struct SpectralDecomposition {
  std::vector<double> eigenvalues;     // cluster representatives, descending
  std::vector<Projection> projections; // mutually orthogonal, rank = multiplicity
  double cluster_tolerance = 0.0;

  Matrix reconstruct() const;
  long total_rank() const;
};

// Eigendecompose a Hermitian matrix, merging eigenvalues whose gap is at most
// cluster_tolerance into a single projection. Throws InvariantViolation for
// non-Hermitian input and NumericalError (with the residual) when the solver
// fails or the reconstruction residual exceeds 1e-10.
SpectralDecomposition hermitian_eigendecompose(const Matrix& a, double cluster_tolerance,
                                               double hermiticity_tol = Tolerances{}.hermiticity);

}  // namespace ethsim

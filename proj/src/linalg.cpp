#include "ethsim/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ethsim {

namespace {

std::string dim_string(const Matrix& a) {
  std::ostringstream os;
  os << a.rows() << "x" << a.cols();
  return os.str();
}

}  // namespace

bool all_finite(const Matrix& a) {
  for (long i = 0; i < a.rows(); ++i)
    for (long j = 0; j < a.cols(); ++j)
      if (!std::isfinite(a(i, j).real()) || !std::isfinite(a(i, j).imag())) return false;
  return true;
}

Matrix dagger(const Matrix& a) { return a.adjoint(); }

Matrix kron(const Matrix& a, const Matrix& b) {
  const long rows = a.rows() * b.rows();
  const long cols = a.cols() * b.cols();
  if (a.rows() > 0 && b.rows() > 0 && (rows > kMaxDim || cols > kMaxDim))
    throw CapExceeded("kron: result dimension " + std::to_string(rows) + "x" +
                      std::to_string(cols) + " exceeds cap " + std::to_string(kMaxDim));
  Matrix out(rows, cols);
  for (long i = 0; i < a.rows(); ++i)
    for (long j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

double operator_norm(const Matrix& a) {
  if (a.rows() == 0 || a.cols() == 0) return 0.0;
  if (std::max(a.rows(), a.cols()) <= 128) {
    Eigen::JacobiSVD<Matrix> svd(a);
    return svd.singularValues()(0);
  }
  // Large matrices only appear as oracle substrates with O(1) norms, where the
  // squared-eigenvalue route is accurate enough.
  Matrix gram = a.adjoint() * a;
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
  double top = es.eigenvalues().maxCoeff();
  return std::sqrt(std::max(0.0, top));
}

double trace_norm(const Matrix& a) {
  if (a.rows() == 0 || a.cols() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues().sum();
}

Matrix partial_trace_first(const Matrix& ab, long dim_a, long dim_b) {
  if (ab.rows() != dim_a * dim_b || ab.cols() != dim_a * dim_b)
    throw InvariantViolation("partial_trace_first: matrix is " + dim_string(ab) +
                             ", expected " + std::to_string(dim_a * dim_b) + " square");
  Matrix out = Matrix::Zero(dim_b, dim_b);
  for (long a = 0; a < dim_a; ++a)
    out += ab.block(a * dim_b, a * dim_b, dim_b, dim_b);
  return out;
}

UnitaryMatrix::UnitaryMatrix(Matrix m, double tol) : mat_(std::move(m)) {
  if (mat_.rows() != mat_.cols())
    throw InvariantViolation("UnitaryMatrix: not square (" + dim_string(mat_) + ")");
  if (!all_finite(mat_)) throw InvariantViolation("UnitaryMatrix: non-finite entries");
  Matrix residual = mat_.adjoint() * mat_ - Matrix::Identity(mat_.rows(), mat_.cols());
  const double r = operator_norm(residual);
  if (r > tol)
    throw InvariantViolation("UnitaryMatrix: ||U†U - 1|| = " + std::to_string(r) +
                             " exceeds tolerance " + std::to_string(tol));
}

UnitaryMatrix UnitaryMatrix::identity(long dim) {
  return UnitaryMatrix(Matrix::Identity(dim, dim));
}

DensityMatrix::DensityMatrix(Matrix m, const Tolerances& tol) : mat_(std::move(m)) {
  if (mat_.rows() != mat_.cols())
    throw InvariantViolation("DensityMatrix: not square (" + dim_string(mat_) + ")");
  if (!all_finite(mat_)) throw InvariantViolation("DensityMatrix: non-finite entries");
  const double herm = operator_norm(Matrix(mat_ - mat_.adjoint()));
  if (herm > tol.hermiticity)
    throw InvariantViolation("DensityMatrix: ||Ω - Ω†|| = " + std::to_string(herm));
  const double tr_err = std::abs(mat_.trace() - Complex(1.0, 0.0));
  if (tr_err > tol.trace)
    throw InvariantViolation("DensityMatrix: |tr(Ω) - 1| = " + std::to_string(tr_err));
  Eigen::SelfAdjointEigenSolver<Matrix> es(mat_, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  if (lo < -tol.positivity)
    throw InvariantViolation("DensityMatrix: smallest eigenvalue " + std::to_string(lo));
}

DensityMatrix DensityMatrix::maximally_mixed(long dim) {
  return DensityMatrix(Matrix(Matrix::Identity(dim, dim) / double(dim)));
}

DensityMatrix DensityMatrix::basis_projector(long dim, long index) {
  Matrix m = Matrix::Zero(dim, dim);
  m(index, index) = 1.0;
  return DensityMatrix(std::move(m));
}

Projection::Projection(Matrix m, double tol) : mat_(std::move(m)) {
  if (mat_.rows() != mat_.cols())
    throw InvariantViolation("Projection: not square (" + dim_string(mat_) + ")");
  if (!all_finite(mat_)) throw InvariantViolation("Projection: non-finite entries");
  const double herm = operator_norm(Matrix(mat_ - mat_.adjoint()));
  const double idem = operator_norm(Matrix(mat_ * mat_ - mat_));
  if (herm > tol || idem > tol)
    throw InvariantViolation("Projection: ||P - P†|| = " + std::to_string(herm) +
                             ", ||P² - P|| = " + std::to_string(idem));
  const double tr = mat_.trace().real();
  rank_ = std::llround(tr);
  if (std::abs(tr - double(rank_)) > tol || rank_ < 0)
    throw InvariantViolation("Projection: trace " + std::to_string(tr) + " is not integral");
}

Projection Projection::basis(long dim, long index) {
  Matrix m = Matrix::Zero(dim, dim);
  m(index, index) = 1.0;
  return Projection(std::move(m));
}

Projection Projection::span(const Matrix& orthonormal_columns) {
  return Projection(Matrix(orthonormal_columns * orthonormal_columns.adjoint()));
}

Matrix SpectralDecomposition::reconstruct() const {
  if (projections.empty()) return Matrix();
  Matrix out = Matrix::Zero(projections[0].dim(), projections[0].dim());
  for (std::size_t r = 0; r < projections.size(); ++r)
    out += eigenvalues[r] * projections[r].mat();
  return out;
}

long SpectralDecomposition::total_rank() const {
  long total = 0;
  for (const auto& p : projections) total += p.rank();
  return total;
}

SpectralDecomposition hermitian_eigendecompose(const Matrix& a, double cluster_tolerance,
                                               double hermiticity_tol) {
  if (a.rows() != a.cols())
    throw InvariantViolation("hermitian_eigendecompose: not square (" + dim_string(a) + ")");
  if (cluster_tolerance <= 0.0)
    throw InvariantViolation("hermitian_eigendecompose: clusterTolerance must be > 0");
  const double herm = operator_norm(Matrix(a - a.adjoint()));
  if (herm > hermiticity_tol)
    throw InvariantViolation("hermitian_eigendecompose: ||A - A†|| = " + std::to_string(herm));

  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  if (es.info() != Eigen::Success)
    throw NumericalError("hermitian_eigendecompose: eigensolver did not converge");

  const long n = a.rows();
  // Eigen returns ascending order; walk from the top down.
  std::vector<long> order(n);
  for (long i = 0; i < n; ++i) order[i] = n - 1 - i;

  SpectralDecomposition dec;
  dec.cluster_tolerance = cluster_tolerance;
  long i = 0;
  while (i < n) {
    long j = i;
    // Extend the cluster while the gap to the previous member stays small.
    while (j + 1 < n && es.eigenvalues()(order[j]) - es.eigenvalues()(order[j + 1]) <=
                            cluster_tolerance)
      ++j;
    Matrix proj = Matrix::Zero(n, n);
    double sum = 0.0;
    for (long k = i; k <= j; ++k) {
      Vector v = es.eigenvectors().col(order[k]);
      proj += Matrix(v * v.adjoint());
      sum += es.eigenvalues()(order[k]);
    }
    dec.eigenvalues.push_back(sum / double(j - i + 1));
    dec.projections.emplace_back(std::move(proj));
    i = j + 1;
  }

  const double residual = operator_norm(Matrix(a - dec.reconstruct()));
  if (residual > 1e-10)
    throw NumericalError("hermitian_eigendecompose: reconstruction residual " +
                         std::to_string(residual));
  return dec;
}

}  // namespace ethsim

#include "ethsim/rng.hpp"

#include <cmath>

namespace ethsim {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t stream_index) {
  std::uint64_t state = master_seed;
  const std::uint64_t a = splitmix64(state);
  state ^= (stream_index + 1) * 0xD1B54A32D192ED03ull;
  const std::uint64_t b = splitmix64(state);
  engine_.seed(a ^ (b << 32 | b >> 32));
}

std::uint64_t RngStream::next_u64() { return engine_(); }

double RngStream::uniform() {
  return double(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_normal_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  cached_normal_ = r * std::sin(theta);
  has_cached_ = true;
  return r * std::cos(theta);
}

Matrix random_complex(RngStream& rng, long rows, long cols) {
  Matrix out(rows, cols);
  for (long i = 0; i < rows; ++i)
    for (long j = 0; j < cols; ++j)
      out(i, j) = Complex(rng.normal(), rng.normal());
  return out;
}

UnitaryMatrix random_unitary(RngStream& rng, long dim) {
  Matrix g = random_complex(rng, dim, dim);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (long j = 0; j < dim; ++j) {
    Complex d = r(j, j);
    const double m = std::abs(d);
    q.col(j) *= (m > 0.0) ? d / m : Complex(1.0, 0.0);
  }
  return UnitaryMatrix(std::move(q));
}

Matrix random_hermitian(RngStream& rng, long dim) {
  Matrix g = random_complex(rng, dim, dim);
  return Matrix((g + g.adjoint()) / 2.0);
}

Matrix random_antihermitian_unit(RngStream& rng, long dim) {
  Matrix g = random_complex(rng, dim, dim);
  Matrix a = (g - g.adjoint()) / 2.0;
  const double norm = operator_norm(a);
  if (norm > 0.0) a /= norm;
  return a;
}

DensityMatrix random_density(RngStream& rng, long dim) {
  Matrix g = random_complex(rng, dim, dim);
  Matrix rho = g * g.adjoint();
  rho /= rho.trace().real();
  return DensityMatrix(std::move(rho));
}

UnitaryMatrix expm_antihermitian(const Matrix& a) {
  // A = iH with H Hermitian; exp(A) = W diag(exp(i h)) W†.
  Matrix h = Matrix(a / Complex(0.0, 1.0));
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  if (es.info() != Eigen::Success)
    throw NumericalError("expm_antihermitian: eigensolver did not converge");
  const long n = a.rows();
  Matrix phases = Matrix::Zero(n, n);
  for (long i = 0; i < n; ++i)
    phases(i, i) = std::polar(1.0, es.eigenvalues()(i));
  Matrix w = es.eigenvectors();
  return UnitaryMatrix(Matrix(w * phases * w.adjoint()));
}

}  // namespace ethsim

#pragma once

#include <cstdint>
#include <random>

#include "ethsim/linalg.hpp"

namespace ethsim {

// Per-trajectory random stream derived from (master seed, stream index).
// Streams are independent of scheduling order, so parallel ensembles
// reproduce serial ones bit for bit. Draw conversions are hand-rolled
// because std:: distributions are not bit-portable across toolchains.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_index);

  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53 random bits.
  double uniform();

  // Standard normal via Box-Muller; second value cached.
  double normal();

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

// Haar-distributed unitary: QR of a complex Ginibre matrix with the phase
// convention fixed by making R's diagonal real positive.
UnitaryMatrix random_unitary(RngStream& rng, long dim);

Matrix random_complex(RngStream& rng, long rows, long cols);

Matrix random_hermitian(RngStream& rng, long dim);

// Anti-Hermitian with unit operator norm.
Matrix random_antihermitian_unit(RngStream& rng, long dim);

DensityMatrix random_density(RngStream& rng, long dim);

// exp(A) for anti-Hermitian A (unitary result), via the Hermitian
// eigendecomposition of -iA.
UnitaryMatrix expm_antihermitian(const Matrix& a);

}  // namespace ethsim

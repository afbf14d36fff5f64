#pragma once

#include <vector>

#include "ethsim/linalg.hpp"

namespace ethsim {

// Basis conventions, fixed globally:
//  - field basis is the standard basis of C^N, slot 0 is the vacuum;
//  - tensor ordering is field-first, composite index (alpha, i) -> alpha*M + i.
//
// The family of M×M operators extracted from an interaction unitary U on
// C^N ⊗ C^M by L[alpha][ell](i, j) = U(alpha*M + i, ell*M + j). For every
// column index ell the family satisfies Σ_alpha L† L = 1 within 1e-10.
class KrausFamily {
 public:
  static KrausFamily from_unitary(const UnitaryMatrix& u, long field_dim, long atom_dim);

  // No sum-rule validation; for diagnosing deliberately broken families.
  static KrausFamily unchecked(long field_dim, long atom_dim, std::vector<Matrix> ops);

  long field_dim() const { return field_dim_; }
  long atom_dim() const { return atom_dim_; }

  const Matrix& op(long alpha, long ell) const;

  // ||Σ_alpha L† L - 1|| per ell. Diagnostic, never throws.
  std::vector<double> sum_rule_residuals() const;

  // One pre-collapse channel application: Σ_alpha V L_alpha^ell Ω L† V†.
  DensityMatrix apply(long ell, const UnitaryMatrix& v, const DensityMatrix& omega,
                      const Tolerances& tol = Tolerances{}) const;

 private:
  KrausFamily(long field_dim, long atom_dim, std::vector<Matrix> ops);

  long field_dim_ = 0;
  long atom_dim_ = 0;
  std::vector<Matrix> ops_;  // indexed alpha * field_dim + ell
};

}  // namespace ethsim

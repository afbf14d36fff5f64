#include "ethsim/kraus.hpp"

#include <string>

namespace ethsim {

KrausFamily::KrausFamily(long field_dim, long atom_dim, std::vector<Matrix> ops)
    : field_dim_(field_dim), atom_dim_(atom_dim), ops_(std::move(ops)) {}

KrausFamily KrausFamily::from_unitary(const UnitaryMatrix& u, long field_dim, long atom_dim) {
  if (field_dim < 1 || atom_dim < 1)
    throw InvariantViolation("KrausFamily: dimensions must be positive");
  if (u.dim() != field_dim * atom_dim)
    throw InvariantViolation("KrausFamily: unitary has dim " + std::to_string(u.dim()) +
                             ", expected " + std::to_string(field_dim * atom_dim));
  std::vector<Matrix> ops;
  ops.reserve(std::size_t(field_dim) * std::size_t(field_dim));
  for (long alpha = 0; alpha < field_dim; ++alpha)
    for (long ell = 0; ell < field_dim; ++ell)
      ops.push_back(u.mat().block(alpha * atom_dim, ell * atom_dim, atom_dim, atom_dim));
  KrausFamily family(field_dim, atom_dim, std::move(ops));
  for (double r : family.sum_rule_residuals())
    if (r > 1e-10)
      throw InvariantViolation("KrausFamily: sum-rule residual " + std::to_string(r));
  return family;
}

KrausFamily KrausFamily::unchecked(long field_dim, long atom_dim, std::vector<Matrix> ops) {
  if (long(ops.size()) != field_dim * field_dim)
    throw InvariantViolation("KrausFamily::unchecked: expected N*N operators");
  return KrausFamily(field_dim, atom_dim, std::move(ops));
}

const Matrix& KrausFamily::op(long alpha, long ell) const {
  if (alpha < 0 || alpha >= field_dim_ || ell < 0 || ell >= field_dim_)
    throw InvariantViolation("KrausFamily::op: index (" + std::to_string(alpha) + ", " +
                             std::to_string(ell) + ") out of range");
  return ops_[std::size_t(alpha) * std::size_t(field_dim_) + std::size_t(ell)];
}

std::vector<double> KrausFamily::sum_rule_residuals() const {
  std::vector<double> residuals;
  residuals.reserve(std::size_t(field_dim_));
  for (long ell = 0; ell < field_dim_; ++ell) {
    Matrix sum = Matrix::Zero(atom_dim_, atom_dim_);
    for (long alpha = 0; alpha < field_dim_; ++alpha) {
      const Matrix& l = op(alpha, ell);
      sum += l.adjoint() * l;
    }
    sum -= Matrix::Identity(atom_dim_, atom_dim_);
    residuals.push_back(operator_norm(sum));
  }
  return residuals;
}

DensityMatrix KrausFamily::apply(long ell, const UnitaryMatrix& v, const DensityMatrix& omega,
                                 const Tolerances& tol) const {
  if (ell < 0 || ell >= field_dim_)
    throw InvariantViolation("KrausFamily::apply: field index " + std::to_string(ell) +
                             " out of range [0, " + std::to_string(field_dim_) + ")");
  if (omega.dim() != atom_dim_ || v.dim() != atom_dim_)
    throw InvariantViolation("KrausFamily::apply: dimension mismatch");
  Matrix sum = Matrix::Zero(atom_dim_, atom_dim_);
  for (long alpha = 0; alpha < field_dim_; ++alpha) {
    Matrix vl = v.mat() * op(alpha, ell);
    sum += vl * omega.mat() * vl.adjoint();
  }
  return DensityMatrix(std::move(sum), tol);
}

}  // namespace ethsim

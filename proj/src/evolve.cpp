#include "ethsim/evolve.hpp"

#include <cmath>
#include <string>

namespace ethsim {

FieldSequence::FieldSequence(std::vector<int> entries, long field_dim)
    : entries_(std::move(entries)), field_dim_(field_dim) {
  if (field_dim_ < 1) throw InvariantViolation("FieldSequence: field_dim must be positive");
  for (std::size_t j = 0; j < entries_.size(); ++j)
    if (entries_[j] < 0 || entries_[j] >= field_dim_)
      throw InvariantViolation("FieldSequence: entry k[" + std::to_string(j) + "] = " +
                               std::to_string(entries_[j]) + " out of range [0, " +
                               std::to_string(field_dim_) + ")");
}

FieldSequence FieldSequence::vacuum(long field_dim, long horizon) {
  return FieldSequence(std::vector<int>(std::size_t(horizon), 0), field_dim);
}

int FieldSequence::at(long slot) const {
  if (slot < 0) throw InvariantViolation("FieldSequence: negative slot");
  return slot < horizon() ? entries_[std::size_t(slot)] : 0;
}

FieldSequence FieldSequence::shifted(long by) const {
  std::vector<int> tail;
  for (long j = by; j < horizon(); ++j) tail.push_back(entries_[std::size_t(j)]);
  return FieldSequence(std::move(tail), field_dim_);
}

DensityMatrix step_pre_collapse(const DensityMatrix& omega, int field_index,
                                const KrausFamily& kraus, const UnitaryMatrix& v,
                                const Tolerances& tol) {
  return kraus.apply(field_index, v, omega, tol);
}

DensityMatrix chain_pre_collapse(const DensityMatrix& omega0, const FieldSequence& k,
                                 const KrausFamily& kraus, const UnitaryMatrix& v, long steps,
                                 const Tolerances& tol) {
  if (steps < 0) throw InvariantViolation("chain_pre_collapse: negative step count");
  if (steps > k.horizon())
    throw InvariantViolation("chain_pre_collapse: " + std::to_string(steps) +
                             " steps exceed the field horizon " + std::to_string(k.horizon()));
  DensityMatrix omega = omega0;
  for (long j = 1; j <= steps; ++j)
    omega = step_pre_collapse(omega, k.at(j - 1), kraus, v, tol);
  return omega;
}

namespace {

// Π over slice factors of <φ_{k_{slot+shift}}, F_slot φ_{k_{slot+shift}}>.
Complex field_factor(const SliceObservable& f, const FieldSequence& k, long shift) {
  Complex out(1.0, 0.0);
  for (std::size_t i = 0; i < f.factors.size(); ++i) {
    const long slot = f.start_slot + long(i);
    if (slot < 0) throw InvariantViolation("SliceObservable: negative slot");
    const int idx = k.at(slot + shift);
    out *= f.factors[i](idx, idx);
  }
  return out;
}

}  // namespace

Complex heisenberg_expectation(const SliceObservable& f, const Matrix& c,
                               const DensityMatrix& omega0, const FieldSequence& k,
                               const KrausFamily& kraus, const UnitaryMatrix& v, long steps,
                               const Tolerances& tol) {
  for (const Matrix& factor : f.factors)
    if (factor.rows() != k.field_dim() || factor.cols() != k.field_dim())
      throw InvariantViolation("heisenberg_expectation: slice factor dimension mismatch");
  const DensityMatrix omega_n = chain_pre_collapse(omega0, k, kraus, v, steps, tol);
  return field_factor(f, k, steps) * (omega_n.mat() * c).trace();
}

TruncatedChain::TruncatedChain(long field_dim, long atom_dim, long slice_count, long max_dim)
    : field_dim_(field_dim), atom_dim_(atom_dim), slice_count_(slice_count) {
  if (field_dim < 1 || atom_dim < 1 || slice_count < 0)
    throw InvariantViolation("TruncatedChain: bad dimensions");
  long d = atom_dim;
  for (long s = 0; s < slice_count; ++s) {
    d *= field_dim;
    if (d > max_dim)
      throw CapExceeded("TruncatedChain: dimension " + std::to_string(field_dim) + "^" +
                        std::to_string(slice_count) + " * " + std::to_string(atom_dim) +
                        " exceeds cap " + std::to_string(max_dim));
  }
  dim_ = d;
}

Vector TruncatedChain::product_vector(const FieldSequence& k, const Vector& atom) const {
  Vector out = Vector::Zero(dim_);
  long field_index = 0;
  for (long s = 0; s < slice_count_; ++s) field_index = field_index * field_dim_ + k.at(s);
  out.segment(field_index * atom_dim_, atom_dim_) = atom;
  return out;
}

Matrix TruncatedChain::embed_slice_atom(const Matrix& op, long slice) const {
  if (op.rows() != field_dim_ * atom_dim_ || op.cols() != field_dim_ * atom_dim_)
    throw InvariantViolation("embed_slice_atom: operator dimension mismatch");
  if (slice < 0 || slice >= slice_count_)
    throw InvariantViolation("embed_slice_atom: slice out of range");
  long pre = 1, post = 1;
  for (long s = 0; s < slice; ++s) pre *= field_dim_;
  for (long s = slice + 1; s < slice_count_; ++s) post *= field_dim_;

  Matrix out = Matrix::Zero(dim_, dim_);
  for (long p = 0; p < pre; ++p)
    for (long q = 0; q < post; ++q)
      for (long ks = 0; ks < field_dim_; ++ks)
        for (long a = 0; a < atom_dim_; ++a)
          for (long ks2 = 0; ks2 < field_dim_; ++ks2)
            for (long a2 = 0; a2 < atom_dim_; ++a2) {
              const long row = ((p * field_dim_ + ks) * post + q) * atom_dim_ + a;
              const long col = ((p * field_dim_ + ks2) * post + q) * atom_dim_ + a2;
              out(row, col) = op(ks * atom_dim_ + a, ks2 * atom_dim_ + a2);
            }
  return out;
}

Matrix TruncatedChain::step_unitary(const UnitaryMatrix& u, const UnitaryMatrix& v,
                                    long m) const {
  Matrix v_pow = Matrix::Identity(atom_dim_, atom_dim_);
  for (long i = 0; i < m - 1; ++i) v_pow = Matrix(v_pow * v.mat());
  Matrix id_field = Matrix::Identity(field_dim_, field_dim_);
  Matrix dressed = kron(id_field, Matrix(v_pow.adjoint())) * u.mat() * kron(id_field, v_pow);
  return embed_slice_atom(dressed, m - 1);
}

Matrix TruncatedChain::observable(const SliceObservable& f, long shift,
                                  const Matrix& atom_factor) const {
  Matrix out = Matrix::Identity(1, 1);
  for (long s = 0; s < slice_count_; ++s) {
    const long slot = s - shift;  // observable coordinates before the shift
    if (!f.is_identity() && slot >= f.start_slot && slot < f.end_slot())
      out = kron(out, f.factors[std::size_t(slot - f.start_slot)]);
    else
      out = kron(out, Matrix(Matrix::Identity(field_dim_, field_dim_)));
  }
  return kron(out, atom_factor);
}

Matrix TruncatedChain::tail_projector(const FieldSequence& k, long from_slice,
                                      const Matrix& atom_factor) const {
  Matrix out = Matrix::Identity(1, 1);
  for (long s = 0; s < slice_count_; ++s) {
    if (s < from_slice) {
      out = kron(out, Matrix(Matrix::Identity(field_dim_, field_dim_)));
    } else {
      Matrix p = Matrix::Zero(field_dim_, field_dim_);
      p(k.at(s), k.at(s)) = 1.0;
      out = kron(out, p);
    }
  }
  return kron(out, atom_factor);
}

Matrix TruncatedChain::chain_state(const FieldSequence& k, const DensityMatrix& atom) const {
  Matrix field = Matrix::Identity(1, 1);
  for (long s = 0; s < slice_count_; ++s) {
    Matrix p = Matrix::Zero(field_dim_, field_dim_);
    p(k.at(s), k.at(s)) = 1.0;
    field = kron(field, p);
  }
  return kron(field, atom.mat());
}

Complex tensor_oracle_expectation(const SliceObservable& f, const Matrix& c,
                                  const DensityMatrix& omega0, const FieldSequence& k,
                                  const UnitaryMatrix& u, const UnitaryMatrix& v, long steps,
                                  long max_dim) {
  const long field_dim = k.field_dim();
  const long atom_dim = omega0.dim();
  if (u.dim() != field_dim * atom_dim)
    throw InvariantViolation("tensor_oracle_expectation: unitary dimension mismatch");
  long slices = steps;
  if (!f.is_identity()) {
    if (f.start_slot < 0) throw InvariantViolation("tensor_oracle_expectation: negative slot");
    slices = std::max(slices, f.end_slot() + steps);
  }
  TruncatedChain chain(field_dim, atom_dim, slices, max_dim);

  // Pure eigenbranches of Ω_0; the expectation is linear in the initial state.
  Eigen::SelfAdjointEigenSolver<Matrix> es(omega0.mat());
  if (es.info() != Eigen::Success)
    throw NumericalError("tensor_oracle_expectation: initial-state eigensolver failed");

  // Back-shifted Heisenberg observable Γ0^{-n} (F ⊗ C) Γ0^{n}.
  Matrix v_pow = Matrix::Identity(atom_dim, atom_dim);
  for (long i = 0; i < steps; ++i) v_pow = Matrix(v_pow * v.mat());
  Matrix obs = chain.observable(f, steps, Matrix(v_pow.adjoint() * c * v_pow));

  std::vector<Matrix> step_ops;
  for (long m = 1; m <= steps; ++m) step_ops.push_back(chain.step_unitary(u, v, m));

  Complex out(0.0, 0.0);
  for (long j = 0; j < atom_dim; ++j) {
    const double p = es.eigenvalues()(j);
    if (std::abs(p) < 1e-15) continue;
    Vector psi = chain.product_vector(k, es.eigenvectors().col(j));
    for (const Matrix& op : step_ops) psi = op * psi;
    out += p * Complex(psi.dot(obs * psi));
  }
  return out;
}

}  // namespace ethsim

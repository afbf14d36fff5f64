#pragma once

#include <vector>

#include "ethsim/kraus.hpp"
#include "ethsim/linalg.hpp"

namespace ethsim {

// Field index per time slot; slots beyond the stored horizon are vacuum (0),
// matching sequences of finite support.
class FieldSequence {
 public:
  FieldSequence(std::vector<int> entries, long field_dim);
  static FieldSequence vacuum(long field_dim, long horizon);

  long horizon() const { return long(entries_.size()); }
  long field_dim() const { return field_dim_; }
  int at(long slot) const;
  FieldSequence shifted(long by) const;

 private:
  std::vector<int> entries_;
  long field_dim_ = 0;
};

// A field observable supported on the contiguous slots
// [start_slot, start_slot + factors.size()); identity elsewhere.
struct SliceObservable {
  long start_slot = 0;
  std::vector<Matrix> factors;

  static SliceObservable identity() { return SliceObservable{}; }
  bool is_identity() const { return factors.empty(); }
  long end_slot() const { return start_slot + long(factors.size()); }
};

// One pre-collapse step: Ω̂_n = Σ_alpha V L_alpha^{k_{n-1}} Ω_{n-1} L† V†.
DensityMatrix step_pre_collapse(const DensityMatrix& omega, int field_index,
                                const KrausFamily& kraus, const UnitaryMatrix& v,
                                const Tolerances& tol = Tolerances{});

// n-fold composition; step j consumes k_{j-1}.
DensityMatrix chain_pre_collapse(const DensityMatrix& omega0, const FieldSequence& k,
                                 const KrausFamily& kraus, const UnitaryMatrix& v, long steps,
                                 const Tolerances& tol = Tolerances{});

// <Φ_{σ^n(k)}, F Φ_{σ^n(k)}> · tr(Ω_n C) with Ω_n the pre-collapse chain state.
Complex heisenberg_expectation(const SliceObservable& f, const Matrix& c,
                               const DensityMatrix& omega0, const FieldSequence& k,
                               const KrausFamily& kraus, const UnitaryMatrix& v, long steps,
                               const Tolerances& tol = Tolerances{});

// Dense substrate for the chain of field slices: slices 0..slice_count-1, each
// of dimension field_dim, then one atom factor of dimension atom_dim. Index
// convention: (((k_0·N + k_1)·N + ...)·N + k_{S-1})·M + atom.
class TruncatedChain {
 public:
  TruncatedChain(long field_dim, long atom_dim, long slice_count, long max_dim = 4096);

  long dim() const { return dim_; }
  long slice_count() const { return slice_count_; }

  // Basis product vector Φ_k ⊗ u.
  Vector product_vector(const FieldSequence& k, const Vector& atom) const;

  // Dense operator acting as `op` (on C^N ⊗ C^M, field-first) on (slice, atom)
  // and as identity on all other slices.
  Matrix embed_slice_atom(const Matrix& op, long slice) const;

  // Interaction propagator for step m (1-based): the base unitary placed on
  // slice m-1 with its atom factor conjugated by powers of the free atom
  // propagator, (1 ⊗ V^{1-m}) U (1 ⊗ V^{m-1}).
  Matrix step_unitary(const UnitaryMatrix& u, const UnitaryMatrix& v, long m) const;

  // F shifted forward by `shift` slots, tensored with the atom factor.
  Matrix observable(const SliceObservable& f, long shift, const Matrix& atom_factor) const;

  // Projection onto the stored field values on slices [from_slice, S), identity
  // on earlier slices, tensored with the atom factor.
  Matrix tail_projector(const FieldSequence& k, long from_slice, const Matrix& atom_factor) const;

  // Full chain density matrix |Φ_k><Φ_k| ⊗ Ω (small instances only).
  Matrix chain_state(const FieldSequence& k, const DensityMatrix& atom) const;

 private:
  long field_dim_ = 0;
  long atom_dim_ = 0;
  long slice_count_ = 0;
  long dim_ = 0;
};

// Evaluates the same expectation as heisenberg_expectation by dense algebra on
// a truncated chain: prepares Φ_k ⊗ (eigenbranches of Ω_0), applies the
// slice-by-slice interaction propagators, and takes the expectation of the
// back-shifted observable. Independent of the Kraus extraction path.
Complex tensor_oracle_expectation(const SliceObservable& f, const Matrix& c,
                                  const DensityMatrix& omega0, const FieldSequence& k,
                                  const UnitaryMatrix& u, const UnitaryMatrix& v, long steps,
                                  long max_dim = 4096);

}  // namespace ethsim

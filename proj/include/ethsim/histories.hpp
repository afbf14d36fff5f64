#pragma once

#include <vector>

#include "ethsim/collapse.hpp"
#include "ethsim/evolve.hpp"

namespace ethsim {

// Reachable states factorize as (atom density matrix, field cursor): the field
// part is the pure tail of the sequence from the cursor onward.
struct EffectiveState {
  DensityMatrix atom;
  long cursor = 0;
};

struct Arrow {
  int branch = 0;
  double probability = 0.0;
  EffectiveState successor;
};

// One arrow per retained branch of the actual event of the one-step-evolved
// state; successors are collapsed with the cursor advanced by one.
std::vector<Arrow> arrows_from(const EffectiveState& state, const FieldSequence& k,
                               const KrausFamily& kraus, const UnitaryMatrix& v,
                               const Tolerances& tol = Tolerances{});

// Probability of the branch sequence as the product of conditional Born
// probabilities along the path.
double history_probability_path(const EffectiveState& root, const std::vector<int>& branches,
                                const FieldSequence& k, const KrausFamily& kraus,
                                const UnitaryMatrix& v, const Tolerances& tol = Tolerances{});

// The same probability evaluated as one expectation of the history operator
// product on the dense truncated chain: the branch-event projections (field
// tail ⊗ conjugated atom projection) filter the propagated state slice by
// slice. Requires the interaction unitary the Kraus family came from.
double history_probability_oracle(const EffectiveState& root, const std::vector<int>& branches,
                                  const FieldSequence& k, const KrausFamily& kraus,
                                  const UnitaryMatrix& u, const UnitaryMatrix& v,
                                  long max_dim = 4096, const Tolerances& tol = Tolerances{});

struct HistoryNode {
  EffectiveState state;
  long parent = -1;   // -1 for the root
  int branch = -1;    // branch label on the incoming arrow
  double conditional_probability = 1.0;
  double cumulative_probability = 1.0;
  long depth = 0;
  // Mass removed when this node was expanded (pruned children plus branches
  // below the event drop cutoff); 0 for leaves.
  double pruned_mass = 0.0;
};

struct HistoryTree {
  std::vector<HistoryNode> nodes;  // breadth-first, root at index 0
  long depth = 0;
  double prune_threshold = 0.0;
  std::vector<double> pruned_mass_by_depth;  // cumulative mass pruned up to each depth 1..r

  std::vector<long> children(long node) const;
  std::vector<long> nodes_at_depth(long d) const;
};

HistoryTree enumerate_tree(const EffectiveState& root, long depth, const FieldSequence& k,
                           const KrausFamily& kraus, const UnitaryMatrix& v, double prune_below,
                           const Tolerances& tol = Tolerances{}, std::size_t node_cap = 200000);

// Maximum over internal nodes of |Σ children cumulative + pruned - node
// cumulative|; the Kolmogorov-consistency defect of the measure.
double check_consistency(const HistoryTree& tree);

}  // namespace ethsim

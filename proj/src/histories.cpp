#include "ethsim/histories.hpp"

#include <cmath>
#include <deque>
#include <string>

namespace ethsim {

std::vector<Arrow> arrows_from(const EffectiveState& state, const FieldSequence& k,
                               const KrausFamily& kraus, const UnitaryMatrix& v,
                               const Tolerances& tol) {
  const DensityMatrix evolved =
      step_pre_collapse(state.atom, k.at(state.cursor), kraus, v, tol);
  const ActualEvent event = center_of_centralizer(evolved, tol.cluster);
  std::vector<Arrow> arrows;
  for (std::size_t r = 0; r < event.size(); ++r) {
    const Projection& pi = event.projections[r];
    DensityMatrix successor(Matrix(pi.mat() / double(pi.rank())), tol);
    arrows.push_back(Arrow{int(r), event.born_probabilities[r],
                           EffectiveState{std::move(successor), state.cursor + 1}});
  }
  return arrows;
}

double history_probability_path(const EffectiveState& root, const std::vector<int>& branches,
                                const FieldSequence& k, const KrausFamily& kraus,
                                const UnitaryMatrix& v, const Tolerances& tol) {
  EffectiveState state = root;
  double probability = 1.0;
  for (std::size_t j = 0; j < branches.size(); ++j) {
    std::vector<Arrow> arrows = arrows_from(state, k, kraus, v, tol);
    if (branches[j] < 0 || std::size_t(branches[j]) >= arrows.size())
      throw InvariantViolation("history_probability: branch " + std::to_string(branches[j]) +
                               " invalid at depth " + std::to_string(j));
    Arrow& chosen = arrows[std::size_t(branches[j])];
    probability *= chosen.probability;
    state = std::move(chosen.successor);
  }
  return probability;
}

double history_probability_oracle(const EffectiveState& root, const std::vector<int>& branches,
                                  const FieldSequence& k, const KrausFamily& kraus,
                                  const UnitaryMatrix& u, const UnitaryMatrix& v, long max_dim,
                                  const Tolerances& tol) {
  if (root.cursor != 0)
    throw InvariantViolation("history_probability_oracle: root cursor must be 0");
  const long field_dim = k.field_dim();
  const long atom_dim = root.atom.dim();
  const long depth = long(branches.size());
  TruncatedChain chain(field_dim, atom_dim, depth, max_dim);

  // Event projections along the path come from the effective recursion; the
  // oracle then re-evaluates the joint probability in one dense expectation.
  std::vector<Projection> path_projections;
  {
    EffectiveState state = root;
    for (std::size_t j = 0; j < branches.size(); ++j) {
      const DensityMatrix evolved =
          step_pre_collapse(state.atom, k.at(state.cursor), kraus, v, tol);
      const ActualEvent event = center_of_centralizer(evolved, tol.cluster);
      if (branches[j] < 0 || std::size_t(branches[j]) >= event.size())
        throw InvariantViolation("history_probability_oracle: invalid branch index");
      const Projection& pi = event.projections[std::size_t(branches[j])];
      path_projections.push_back(pi);
      state = EffectiveState{DensityMatrix(Matrix(pi.mat() / double(pi.rank())), tol),
                             state.cursor + 1};
    }
  }

  // Pure eigenbranches of the root atom state.
  Eigen::SelfAdjointEigenSolver<Matrix> es(root.atom.mat());
  if (es.info() != Eigen::Success)
    throw NumericalError("history_probability_oracle: eigensolver failed");

  Matrix v_pow = Matrix::Identity(atom_dim, atom_dim);
  double probability = 0.0;
  std::vector<Matrix> filters;
  for (long m = 1; m <= depth; ++m) {
    v_pow = Matrix(v_pow * v.mat());  // V^m
    // Event at time m in chain coordinates: field tail on slices >= m,
    // atom projection conjugated back by V^m.
    Matrix atom_part =
        Matrix(v_pow.adjoint() * path_projections[std::size_t(m - 1)].mat() * v_pow);
    filters.push_back(chain.tail_projector(k, m, atom_part));
  }
  std::vector<Matrix> step_ops;
  for (long m = 1; m <= depth; ++m) step_ops.push_back(chain.step_unitary(u, v, m));

  for (long j = 0; j < atom_dim; ++j) {
    const double p = es.eigenvalues()(j);
    if (std::abs(p) < 1e-15) continue;
    Vector psi = chain.product_vector(k, es.eigenvectors().col(j));
    for (long m = 1; m <= depth; ++m) {
      psi = step_ops[std::size_t(m - 1)] * psi;
      psi = filters[std::size_t(m - 1)] * psi;
    }
    probability += p * psi.squaredNorm();
  }
  return probability;
}

std::vector<long> HistoryTree::children(long node) const {
  std::vector<long> out;
  for (long i = 0; i < long(nodes.size()); ++i)
    if (nodes[std::size_t(i)].parent == node) out.push_back(i);
  return out;
}

std::vector<long> HistoryTree::nodes_at_depth(long d) const {
  std::vector<long> out;
  for (long i = 0; i < long(nodes.size()); ++i)
    if (nodes[std::size_t(i)].depth == d) out.push_back(i);
  return out;
}

HistoryTree enumerate_tree(const EffectiveState& root, long depth, const FieldSequence& k,
                           const KrausFamily& kraus, const UnitaryMatrix& v, double prune_below,
                           const Tolerances& tol, std::size_t node_cap) {
  if (prune_below < 0.0) throw InvariantViolation("enumerate_tree: negative prune threshold");
  HistoryTree tree;
  tree.depth = depth;
  tree.prune_threshold = prune_below;
  tree.nodes.push_back(HistoryNode{root, -1, -1, 1.0, 1.0, 0, 0.0});

  std::deque<long> frontier{0};
  double pruned_total = 0.0;
  for (long d = 0; d < depth; ++d) {
    std::deque<long> next;
    for (long index : frontier) {
      HistoryNode& node = tree.nodes[std::size_t(index)];
      const DensityMatrix evolved =
          step_pre_collapse(node.state.atom, k.at(node.state.cursor), kraus, v, tol);
      const ActualEvent event = center_of_centralizer(evolved, tol.cluster);
      double pruned_here = node.cumulative_probability * event.dropped_mass;
      for (std::size_t r = 0; r < event.size(); ++r) {
        const double conditional = event.born_probabilities[r];
        const double cumulative = node.cumulative_probability * conditional;
        if (cumulative < prune_below) {
          pruned_here += cumulative;
          continue;
        }
        if (tree.nodes.size() >= node_cap)
          throw CapExceeded("enumerate_tree: node cap " + std::to_string(node_cap) +
                            " exceeded");
        const Projection& pi = event.projections[r];
        DensityMatrix successor(Matrix(pi.mat() / double(pi.rank())), tol);
        tree.nodes.push_back(
            HistoryNode{EffectiveState{std::move(successor), node.state.cursor + 1}, index,
                        int(r), conditional, cumulative, d + 1, 0.0});
        next.push_back(long(tree.nodes.size()) - 1);
      }
      tree.nodes[std::size_t(index)].pruned_mass = pruned_here;
      pruned_total += pruned_here;
    }
    tree.pruned_mass_by_depth.push_back(pruned_total);
    frontier = std::move(next);
  }
  return tree;
}

double check_consistency(const HistoryTree& tree) {
  double worst = 0.0;
  for (long i = 0; i < long(tree.nodes.size()); ++i) {
    const HistoryNode& node = tree.nodes[std::size_t(i)];
    if (node.depth == tree.depth) continue;  // a leaf; never expanded
    double mass = node.pruned_mass;
    for (long c : tree.children(i)) mass += tree.nodes[std::size_t(c)].cumulative_probability;
    worst = std::max(worst, std::abs(mass - node.cumulative_probability));
  }
  return worst;
}

}  // namespace ethsim

#pragma once

#include <Eigen/Core>
#include <vector>

#include "romsieve/tree.hpp"

namespace romsieve {

/// One element of a (generalized) frontier: a nonempty set of tree vertices.
/// Singletons are ordinary frontier vertices; multi-member groups are child
/// groupings, whose members all share one tree parent. The spanned subspace
/// is the sum of the member subspaces. `inactive` marks elements excised by
/// the conditioning step: still part of the decomposition, no longer a basis
/// column, never refined.
struct FrontierElement {
  std::vector<VertexId> members;
  bool inactive = false;

  bool operator==(const FrontierElement& o) const {
    return members == o.members && inactive == o.inactive;
  }
};

/// Orthogonal decomposition of R^n drawn from tree vertices, one per basis
/// column. Element order is insertion order of refinements.
struct Frontier {
  std::vector<FrontierElement> elements;

  bool operator==(const Frontier& o) const { return elements == o.elements; }
};

Frontier root_frontier(const RefinementTree& tree);

/// Merged (sorted) union of the member leaf sets.
std::vector<int> element_leaf_set(const RefinementTree& tree, const FrontierElement& e);

bool element_is_leaf(const RefinementTree& tree, const FrontierElement& e);

/// Prop 3.10 checker: elements' leaf sets pairwise disjoint and covering
/// {0..n-1}; members nonempty and sharing a parent (or the singleton root).
bool is_valid_frontier(const RefinementTree& tree, const Frontier& f, std::string* why = nullptr);

/// leaf index -> element index; a valid frontier covers every leaf exactly
/// once.
std::vector<int> leaf_to_element(const RefinementTree& tree, const Frontier& f);

/// The pieces an element splits into under full refinement: children for a
/// non-leaf singleton, the element itself for a leaf singleton, the member
/// vertices for a group.
std::vector<FrontierElement> element_constituents(const RefinementTree& tree,
                                                  const FrontierElement& e);

Frontier full_refinement(const RefinementTree& tree, const Frontier& f);

/// Groups replaced by their member singletons; singletons pass through.
/// Yields a plain (vertex-only) frontier dominated by the input.
Frontier member_expansion(const RefinementTree& tree, const Frontier& f);

/// Replace elements at `selected` positions by the given decompositions. Each
/// replacement list's leaf sets must partition the selected element's leaf
/// set; throws invalid_decomposition_error otherwise.
Frontier partial_refinement(const RefinementTree& tree, const Frontier& f,
                            const std::vector<int>& selected,
                            const std::vector<std::vector<FrontierElement>>& decompositions);

/// fine ⪯ coarse: every fine element's span is contained in some coarse
/// element's span.
bool dominated_by(const RefinementTree& tree, const Frontier& fine, const Frontier& coarse);

/// fine element index -> coarse element index; throws not_dominated_error.
std::vector<int> ancestor_map(const RefinementTree& tree, const Frontier& fine,
                              const Frontier& coarse);

// --- global (per-column) frontiers -----------------------------------------

struct FlatIndex {
  int col;   // which basis column's frontier
  int elem;  // element index within that frontier
};

/// Column order of the sieved basis: (column, element) lexicographic.
std::vector<FlatIndex> flatten(const std::vector<Frontier>& frontiers);

/// 0/1 prolongation along the columnwise global ancestor map: exactly one 1
/// per fine row.
struct Prolongation {
  int coarse_size = 0;
  std::vector<int> parent;  // fine flat index -> coarse flat index

  Eigen::VectorXd apply(const Eigen::VectorXd& coarse) const;
  Eigen::VectorXd pullback(const Eigen::VectorXd& fine) const;  // eta^H = eta^h I
  Eigen::MatrixXd to_matrix() const;
};

Prolongation prolongation_operator(const RefinementTree& tree,
                                   const std::vector<Frontier>& coarse,
                                   const std::vector<Frontier>& fine);

// --- sieving ----------------------------------------------------------------

/// Sieve of phi through a frontier: one column per element, the orthogonal
/// projection onto the element's span. Columns sum to phi.
std::vector<Eigen::VectorXd> sieve(const RefinementTree& tree, const Eigen::VectorXd& phi,
                                   const Frontier& f);

/// Materialized sieved basis over the global frontier.
struct SievedBasis {
  Eigen::MatrixXd columns;      // n x (#included elements)
  std::vector<FlatIndex> index; // per column
  std::vector<int> flat_pos;    // per column, position in the full flatten
};

SievedBasis sieve_basis(const RefinementTree& tree, const Eigen::MatrixXd& phi,
                        const std::vector<Frontier>& frontiers, bool active_only);

// --- tree-attribute operations over frontiers --------------------------------

/// Meet (largest lower bound) of plain frontiers, by upward flood-fill:
/// members of the union with no marked strict ancestor. Returns singleton
/// elements sorted by vertex id.
Frontier compute_meet(const RefinementTree& tree, const std::vector<Frontier>& frontiers);

/// Metric V^T V over the flattened global frontier (skipping inactive
/// elements when asked): entry (U, W) reads the projected metric at the
/// deeper vertex when spans are nested, zero otherwise; group elements sum
/// their member contributions.
Eigen::MatrixXd compute_metric(RefinementTree& tree, const std::vector<Frontier>& frontiers,
                               bool skip_inactive);

/// Compression transaction on the tree attributes: conjugate the meet of the
/// member-expanded frontiers by the coordinate representation phi_hat_new of
/// the new basis (rows = full flatten of `frontiers`), reset everything else
/// off the meet to implicit, then recompute above the meet by child sums.
void update_projected_metrics(RefinementTree& tree, const std::vector<Frontier>& frontiers,
                              const Eigen::MatrixXd& phi_hat_new);

}  // namespace romsieve

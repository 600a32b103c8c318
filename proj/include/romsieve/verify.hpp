#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "romsieve/fom.hpp"
#include "romsieve/frontier.hpp"
#include "romsieve/tree.hpp"

namespace romsieve::verify {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Oracle-side utilities. These are deliberately independent of the fast
// paths they are used to check: projections go through densely materialized
// leaf-basis columns, meets through the intersection definition, sieves
// through explicit projector sums.

Eigen::MatrixXd random_orthonormal(int n, int p, std::mt19937_64& rng);

/// Random recursive partition of the leaf indices into 2..max_children parts.
RefinementTree random_tree(std::shared_ptr<const LeafBasis> basis, std::mt19937_64& rng,
                           int max_children = 4);

/// Random frontier generated by walking refinements down from the root;
/// optionally with random sibling groupings.
Frontier random_frontier(const RefinementTree& tree, std::mt19937_64& rng,
                         double descend_prob = 0.55, bool allow_groups = false);

/// Densely materialized leaf-basis columns (Q as a matrix).
Eigen::MatrixXd dense_leaf_matrix(const RefinementTree& tree);

/// Q_S Q_S^T from the dense leaf matrix.
Eigen::MatrixXd dense_projector(const Eigen::MatrixXd& q_dense, const std::vector<int>& leaf_set);

/// Sieved basis assembled column by column through dense projectors.
Eigen::MatrixXd dense_sieve_matrix(const RefinementTree& tree, const Eigen::MatrixXd& q_dense,
                                   const Eigen::MatrixXd& phi,
                                   const std::vector<Frontier>& frontiers, bool active_only);

/// The meet by its intersection definition: all nontrivial intersections of
/// the member leaf sets, one frontier folded in at a time. Returns sorted
/// leaf sets.
std::vector<std::vector<int>> intersection_meet(const RefinementTree& tree,
                                                const std::vector<Frontier>& frontiers);

/// Central-difference Jacobian with h = 1e-6 * (1 + |x_j|).
Eigen::MatrixXd finite_difference_jacobian(const FomProblem& fom, const Eigen::VectorXd& x,
                                           int step);

/// The full [DERIVED]-oracle verification suite at n in {8,16,32} (plus the
/// benchmark Jacobian checks at full size).
std::vector<CheckResult> run_all(std::uint64_t seed);

}  // namespace romsieve::verify

#pragma once

#include <Eigen/Core>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "romsieve/leaf_basis.hpp"

namespace romsieve {

using VertexId = int;
inline constexpr VertexId kNoVertex = -1;

/// A vertex is a subspace of R^n represented by the set of leaf-basis indices
/// it spans. Children partition the parent's leaf set; |leaf_set| == 1 iff the
/// vertex is a leaf. The projected-metric attribute caches Phi^(r)^T P_U
/// Phi^(r) under the explicit/implicit bookkeeping described below.
struct TreeVertex {
  std::vector<int> leaf_set;  // sorted
  VertexId parent = kNoVertex;
  std::vector<VertexId> children;
  int depth = 0;

  Eigen::MatrixXd projected_metric;
  bool is_explicit = true;
  std::optional<Eigen::MatrixXd> deferred_conjugation;
};

class RefinementTree {
 public:
  explicit RefinementTree(std::shared_ptr<const LeafBasis> basis);

  int state_dimension() const { return basis_->dimension(); }
  const LeafBasis& leaf_basis() const { return *basis_; }
  std::shared_ptr<const LeafBasis> leaf_basis_ptr() const { return basis_; }

  VertexId make_root(std::vector<int> leaf_set);
  VertexId add_child(VertexId parent, std::vector<int> leaf_set);

  /// Attach a standalone subtree whose root leaf set is a subset of the
  /// parent's and disjoint from the existing children's. Throws
  /// invalid_input_error on overlap/containment violations.
  VertexId graft(VertexId parent, const RefinementTree& subtree);

  VertexId root() const { return root_; }
  int num_vertices() const { return static_cast<int>(vertices_.size()); }
  const TreeVertex& vertex(VertexId v) const;
  TreeVertex& mutable_vertex(VertexId v);
  bool is_leaf(VertexId v) const { return vertex(v).children.empty(); }
  int depth(VertexId v) const { return vertex(v).depth; }
  /// Vertex spanning leaf i (valid once the tree is fully built).
  VertexId leaf_vertex(int leaf) const;

  /// Full-tree invariants: rooted, children partition parents, leaves are
  /// singletons covering 0..n-1, internal vertices have >= 2 children.
  /// Throws invariant_error with a description on violation.
  void validate() const;

  // --- projected-metric attributes ---

  /// Install Phi0^T P_U Phi0 at every vertex: leaves as rank-one outer
  /// products of analyze(Phi0) rows, internal vertices by child sums. Marks
  /// everything explicit and clears deferred conjugations.
  void precompute_projected_metrics(const Eigen::MatrixXd& phi0);

  /// Current projected metric at u w.r.t. the basis after the most recent
  /// compression. Implicit vertices are corrected on the fly by accumulating
  /// the deferred conjugations up to the first explicit ancestor; the tree is
  /// not modified.
  Eigen::MatrixXd projected_metric(VertexId u) const;

  /// Same value as projected_metric, but promotes every vertex on the upward
  /// walk to explicit so later lookups reuse the work (path compression).
  Eigen::MatrixXd projected_metric_compressing(VertexId u);

  /// Frobenius distance of the root attribute from the identity (accumulated
  /// compression round-off; the root metric is exactly I in exact
  /// arithmetic).
  double diagnose_drift() const;

  int basis_dimension() const { return basis_dim_; }
  void set_basis_dimension(int p) { basis_dim_ = p; }

  /// When enabled, metric assembly uses the path-compressing lookup. Same
  /// output contract either way; off by default.
  bool path_compression = false;

  /// Vertices promoted to explicit by path compression since the last
  /// compression. They sit below the usual explicit region and need their own
  /// conjugation pass during update_projected_metrics.
  std::vector<VertexId>& promoted_registry() { return promoted_; }

 private:
  std::vector<VertexId> promoted_;
  std::shared_ptr<const LeafBasis> basis_;
  std::vector<TreeVertex> vertices_;
  VertexId root_ = kNoVertex;
  std::vector<VertexId> leaf_lookup_;
  int basis_dim_ = 0;
};

/// Deepest vertex ancestral to both u and w (depth-aligned parent walk).
VertexId common_ancestor(const RefinementTree& tree, VertexId u, VertexId w);

/// JSON schema "romsieve-tree-v1": topology + leaf sets + leaf-basis
/// descriptor; attributes excluded. Deterministic output.
std::string tree_to_json(const RefinementTree& tree);
RefinementTree tree_from_json(const std::string& text);

}  // namespace romsieve

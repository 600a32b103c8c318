#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <vector>

#include "romsieve/tree.hpp"

namespace romsieve {

struct TreeBuildConfig {
  int k = 8;  // children per split, >= 2
  std::uint64_t seed = 0;
};

/// Recursive k-means over the leaf-basis representation of the snapshots:
/// rows of analyze(snapshots) are normalized and sign-fixed so Euclidean
/// closeness means correlation or anti-correlation, then clustered until
/// singletons. Deterministic under (snapshots, basis, config).
RefinementTree build_tree_datadriven(const Eigen::MatrixXd& snapshots,
                                     std::shared_ptr<const LeafBasis> basis,
                                     const TreeBuildConfig& config);

/// One recursion of the builder on preprocessed columns D restricted to the
/// index set S; returns the (possibly partial) subtree over S.
RefinementTree build_tree_recursive(const Eigen::MatrixXd& preprocessed,
                                    const std::vector<int>& index_set,
                                    std::shared_ptr<const LeafBasis> basis,
                                    const TreeBuildConfig& config);

/// FHN composite: the topmost decomposition is forced to the v-block /
/// w-block split; each block's subtree is built data-driven from its own
/// snapshot rows.
RefinementTree build_tree_composite_fhn(const Eigen::MatrixXd& snapshots,
                                        std::shared_ptr<const LeafBasis> basis,
                                        const TreeBuildConfig& config);

/// The clustering preprocessing of the builder, exposed for tests:
/// d -> +-d/||d|| with the sign fixed by the first entry; zero rows map to
/// zero.
Eigen::MatrixXd normalize_rows_for_clustering(const Eigen::MatrixXd& transformed);

}  // namespace romsieve

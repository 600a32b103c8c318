#include "romsieve/tree_builder.hpp"

#include <random>

#include "romsieve/clustering.hpp"
#include "romsieve/errors.hpp"

namespace romsieve {

Eigen::MatrixXd normalize_rows_for_clustering(const Eigen::MatrixXd& transformed) {
  // Columns of the result are the preprocessed per-DOF snapshot vectors
  // (one per transformed degree of freedom).
  Eigen::MatrixXd d = transformed.transpose();
  for (Eigen::Index i = 0; i < d.cols(); ++i) {
    const double norm = d.col(i).norm();
    if (norm == 0.0) continue;  // zero rows stay zero; they co-cluster arbitrarily
    d.col(i) /= norm;
    if (d(0, i) < 0.0) d.col(i) = -d.col(i);
  }
  return d;
}

namespace {

void build_recursive(RefinementTree& tree, VertexId parent_or_none,
                     const Eigen::MatrixXd& preprocessed, const std::vector<int>& index_set,
                     const TreeBuildConfig& config, std::mt19937_64& rng) {
  const VertexId v = (parent_or_none == kNoVertex)
                         ? tree.make_root(index_set)
                         : tree.add_child(parent_or_none, index_set);
  if (index_set.size() == 1) return;

  Eigen::MatrixXd active(preprocessed.rows(), index_set.size());
  for (std::size_t i = 0; i < index_set.size(); ++i) active.col(i) = preprocessed.col(index_set[i]);

  const auto result = kmeans(active, config.k, rng());
  std::vector<std::vector<int>> groups;
  for (const auto& cluster : result.clusters) {
    if (cluster.empty()) continue;  // skip-empty branch
    std::vector<int> g;
    g.reserve(cluster.size());
    for (int local : cluster) g.push_back(index_set[local]);
    groups.push_back(std::move(g));
  }
  if (groups.size() == 1) {
    // All points landed in one cluster (identical columns, or k-means
    // degeneracy). Split at the median index so the recursion always makes
    // progress.
    const auto& whole = groups[0];
    const std::size_t half = whole.size() / 2;
    std::vector<int> lo(whole.begin(), whole.begin() + half);
    std::vector<int> hi(whole.begin() + half, whole.end());
    groups = {std::move(lo), std::move(hi)};
  }
  for (const auto& g : groups) build_recursive(tree, v, preprocessed, g, config, rng);
}

}  // namespace

RefinementTree build_tree_recursive(const Eigen::MatrixXd& preprocessed,
                                    const std::vector<int>& index_set,
                                    std::shared_ptr<const LeafBasis> basis,
                                    const TreeBuildConfig& config) {
  if (index_set.empty()) throw invalid_input_error("build_tree_recursive: empty index set");
  RefinementTree tree(std::move(basis));
  std::mt19937_64 rng(config.seed);
  build_recursive(tree, kNoVertex, preprocessed, index_set, config, rng);
  return tree;
}

RefinementTree build_tree_datadriven(const Eigen::MatrixXd& snapshots,
                                     std::shared_ptr<const LeafBasis> basis,
                                     const TreeBuildConfig& config) {
  if (config.k < 2) throw invalid_input_error("build_tree_datadriven: k must be >= 2");
  if (snapshots.cols() < 1) throw invalid_input_error("build_tree_datadriven: no snapshots");
  const int n = basis->dimension();
  if (snapshots.rows() != n) throw invalid_input_error("build_tree_datadriven: row mismatch");

  Eigen::MatrixXd y(n, snapshots.cols());
  for (Eigen::Index j = 0; j < snapshots.cols(); ++j) y.col(j) = basis->analyze(snapshots.col(j));
  const Eigen::MatrixXd d = normalize_rows_for_clustering(y);

  std::vector<int> all(n);
  for (int i = 0; i < n; ++i) all[i] = i;
  RefinementTree tree = build_tree_recursive(d, all, std::move(basis), config);
  tree.validate();
  return tree;
}

RefinementTree build_tree_composite_fhn(const Eigen::MatrixXd& snapshots,
                                        std::shared_ptr<const LeafBasis> basis,
                                        const TreeBuildConfig& config) {
  const int n = basis->dimension();
  if (n % 2 != 0) throw invalid_input_error("build_tree_composite_fhn: n must be even");
  if (snapshots.rows() != n) throw invalid_input_error("build_tree_composite_fhn: row mismatch");
  const int half = n / 2;

  Eigen::MatrixXd y(n, snapshots.cols());
  for (Eigen::Index j = 0; j < snapshots.cols(); ++j) y.col(j) = basis->analyze(snapshots.col(j));
  const Eigen::MatrixXd d = normalize_rows_for_clustering(y);

  std::vector<int> all(n), v_block(half), w_block(half);
  for (int i = 0; i < n; ++i) all[i] = i;
  for (int i = 0; i < half; ++i) {
    v_block[i] = i;
    w_block[i] = half + i;
  }

  RefinementTree tree(basis);
  tree.make_root(all);
  std::mt19937_64 rng(config.seed);
  for (const auto& block : {v_block, w_block}) {
    if (block.size() == 1) {
      tree.add_child(tree.root(), block);
      continue;
    }
    TreeBuildConfig sub = config;
    sub.seed = rng();
    RefinementTree subtree = build_tree_recursive(d, block, basis, sub);
    tree.graft(tree.root(), subtree);
  }
  tree.validate();
  return tree;
}

}  // namespace romsieve

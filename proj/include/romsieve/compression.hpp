#pragma once

#include <Eigen/Core>

#include "romsieve/frontier.hpp"
#include "romsieve/rom.hpp"
#include "romsieve/tree.hpp"

namespace romsieve {

struct PodResult {
  Eigen::MatrixXd psi_hat;         // full-flatten rows x s (zero on inactive rows)
  Eigen::VectorXd singular_values; // spectrum of the metric-corrected data
  double sigma_ref = 0.0;          // ||Z X_hat||_2 (spectral)
  int s = 0;
};

/// POD of the refined-ROM snapshots in coordinates, with the metric
/// factorization Z^T Z = V^T V inducing full-space geometry: project out the
/// phi0 block, correct by Z, SVD, threshold against eps_svd * ||Z X_hat||_2,
/// and back-transform through the snapshot matrix to dodge Z^{-1}
/// (ill-conditioned by construction). Rows belonging to inactive elements of
/// the global frontier are dropped from the computation and come back as
/// zeros. s = 0 (empty enrichment) is a valid result.
PodResult metric_corrected_pod(RefinementTree& tree, const std::vector<Frontier>& frontiers,
                               const Eigen::MatrixXd& x_hat, double eps_svd, int p0_initial);

/// Append a snapshot (full-flatten coordinates) to the compression buffer.
void accumulate_snapshot(AdaptiveState& state, const Eigen::VectorXd& x_hat_full);

/// Re-express the buffered snapshots and warm-start coordinates after a
/// frontier refinement.
void prolong_state(AdaptiveState& state, const Prolongation& prolongation);

/// The compression transaction: enrichment from metric_corrected_pod, new
/// basis [phi0 | V psi], projected-metric update on the tree, frontiers reset
/// to the root, buffer cleared. If the root-attribute drift exceeds
/// drift_threshold afterwards, the state is reset to phi0 and the attributes
/// recomputed from scratch (the recovery escape hatch).
CompressionEvent compress_basis(RefinementTree& tree, AdaptiveState& state, double eps_svd,
                                int step, double drift_threshold);

}  // namespace romsieve

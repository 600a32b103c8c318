#include "romsieve/compression.hpp"

#include <algorithm>

#include "romsieve/dense.hpp"
#include "romsieve/errors.hpp"

namespace romsieve {

PodResult metric_corrected_pod(RefinementTree& tree, const std::vector<Frontier>& frontiers,
                               const Eigen::MatrixXd& x_hat, double eps_svd, int p0_initial) {
  const auto flat = flatten(frontiers);
  if (x_hat.rows() != static_cast<Eigen::Index>(flat.size())) {
    throw invalid_input_error("metric_corrected_pod: snapshot rows do not match the frontier");
  }
  PodResult out;
  out.psi_hat = Eigen::MatrixXd::Zero(flat.size(), 0);
  if (x_hat.cols() == 0) return out;

  // The transaction runs on the full frontier geometry. Snapshot coordinates
  // on deactivated elements are zero by construction, so they drop out of the
  // data on their own; the phi0 prolongation rows must stay, because the
  // original basis columns keep their exact sieve content on deactivated
  // elements and zeroing those rows would hand the tree a basis that is not
  // the one being materialized.
  const int p = static_cast<int>(flat.size());
  const int q = static_cast<int>(x_hat.cols());

  Eigen::MatrixXd phi_hat0 = Eigen::MatrixXd::Zero(p, p0_initial);
  for (int a = 0; a < p; ++a) {
    if (flat[a].col < p0_initial) phi_hat0(a, flat[a].col) = 1.0;
  }

  const Eigen::MatrixXd metric = compute_metric(tree, frontiers, /*skip_inactive=*/false);
  const Eigen::MatrixXd y_perp = x_hat - phi_hat0 * (phi_hat0.transpose() * (metric * x_hat));
  const Eigen::MatrixXd z = factor_spsd(metric);

  const ThinSvd corrected = thin_svd(z * y_perp);
  out.singular_values = corrected.sigma;
  out.sigma_ref = thin_svd(z * x_hat).sigma(0);

  int s = 0;
  for (Eigen::Index i = 0; i < corrected.sigma.size(); ++i) {
    if (corrected.sigma(i) >= eps_svd * out.sigma_ref) s = static_cast<int>(i) + 1;
  }
  out.s = s;
  (void)q;
  if (s == 0) return out;

  // psi = Y_perp V_s Sigma_s^{-1}: only the well-conditioned part of the
  // inverse is ever touched.
  out.psi_hat = y_perp * corrected.vt.topRows(s).transpose() *
                corrected.sigma.head(s).cwiseInverse().asDiagonal();
  return out;
}

void accumulate_snapshot(AdaptiveState& state, const Eigen::VectorXd& x_hat_full) {
  const auto flat = flatten(state.frontiers);
  if (x_hat_full.size() != static_cast<Eigen::Index>(flat.size())) {
    throw invalid_input_error("accumulate_snapshot: coordinate size does not match the frontier");
  }
  state.snapshot_buffer.push_back(x_hat_full);
}

void prolong_state(AdaptiveState& state, const Prolongation& prolongation) {
  state.x_hat_full = prolongation.apply(state.x_hat_full);
  for (auto& column : state.snapshot_buffer) column = prolongation.apply(column);
}

CompressionEvent compress_basis(RefinementTree& tree, AdaptiveState& state, double eps_svd,
                                int step, double drift_threshold) {
  CompressionEvent event;
  event.step = step;

  const auto flat = flatten(state.frontiers);
  int active_count = 0;
  for (const auto& fi : flat) {
    if (!state.frontiers[fi.col].elements[fi.elem].inactive) ++active_count;
  }
  event.old_dim = active_count;

  Eigen::MatrixXd x_hat(flat.size(), state.snapshot_buffer.size());
  for (std::size_t c = 0; c < state.snapshot_buffer.size(); ++c) {
    x_hat.col(c) = state.snapshot_buffer[c];
  }

  const int p0 = state.p0_initial();
  const PodResult pod = metric_corrected_pod(tree, state.frontiers, x_hat, eps_svd, p0);
  event.enrichment = pod.s;
  event.new_dim = p0 + pod.s;

  // Coordinates of the compressed basis in the refined basis: the exact 0/1
  // prolongation of phi0 alongside the enrichment.
  Eigen::MatrixXd phi_hat_new(flat.size(), p0 + pod.s);
  phi_hat_new.setZero();
  for (std::size_t a = 0; a < flat.size(); ++a) {
    if (flat[a].col < p0) phi_hat_new(a, flat[a].col) = 1.0;
  }
  phi_hat_new.rightCols(pod.s) = pod.psi_hat;

  update_projected_metrics(tree, state.frontiers, phi_hat_new);

  // Materialize the new basis. The enrichment needs the full sieved basis
  // (deactivated columns included: the coordinates refer to them too).
  Eigen::MatrixXd phi_new(state.phi0.rows(), p0 + pod.s);
  phi_new.leftCols(p0) = state.phi0;
  if (pod.s > 0) {
    const SievedBasis sieved =
        sieve_basis(tree, state.phi_current, state.frontiers, /*active_only=*/false);
    phi_new.rightCols(pod.s) = sieved.columns * pod.psi_hat;
  }

  state.phi_current = std::move(phi_new);
  state.frontiers.assign(p0 + pod.s, root_frontier(tree));
  state.snapshot_buffer.clear();
  ++state.compressions;

  event.drift = tree.diagnose_drift();
  state.max_drift = std::max(state.max_drift, event.drift);
  if (event.drift > drift_threshold) {
    // Accumulated round-off got visible at the root: fall back to the
    // original basis and rebuild the attributes from scratch.
    state.phi_current = state.phi0;
    state.frontiers.assign(p0, root_frontier(tree));
    tree.precompute_projected_metrics(state.phi0);
    ++state.recoveries;
    event.recovered = true;
  }
  return event;
}

}  // namespace romsieve

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <vector>

#include "romsieve/fom.hpp"
#include "romsieve/frontier.hpp"
#include "romsieve/tree.hpp"

namespace romsieve {

struct RomConfig {
  double tol_rom = 1e-8;  // on ||V_*^T r||_2
  double tol_fom = 1e-3;  // on ||r||_2; +inf disables adaptation
  double eps_qr = 1e-6;
  double alpha = 0.5;  // child-grouping splitting factor, in (0,1)
  int n_reset = 25;
  bool compression = true;
  bool grouping = true;
  std::optional<int> max_dim;
  double eps_svd = 1e-3;
  int max_newton = 20;
  std::uint64_t seed = 0;
  double drift_threshold = 1e-6;
  Eigen::VectorXd x_bar;  // reference state; empty means zero
};

struct RomSolveResult {
  Eigen::VectorXd x_hat;
  int iterations = 0;
  double rom_residual = 0.0;
};

/// Galerkin Newton on V_*^T r(x_bar + V_* x_hat) = 0, warm-started. Throws
/// nonconvergence_error (carrying the last iterate) past max_newton and
/// singular_system_error on a singular reduced Jacobian.
RomSolveResult solve_rom(const FomProblem& fom, const Eigen::MatrixXd& v_star,
                         const Eigen::VectorXd& x_bar, Eigen::VectorXd x_hat_init,
                         double tol_rom, int step, int max_newton);

/// Materialized active basis for one adaptive iteration: raw sieve columns,
/// the unit-norm scaling, and the bookkeeping back into the global frontier.
struct ActiveBasis {
  SievedBasis sieved;      // active columns only
  Eigen::VectorXd scaling; // 1/||column||
  Eigen::MatrixXd scaled() const { return sieved.columns * scaling.asDiagonal(); }
  int dim() const { return static_cast<int>(sieved.columns.cols()); }
};

/// Dual-weighted-residual indicators on the full refinement of the active
/// frontier elements. Leaf constituents carry zero; inactive elements are
/// excluded entirely.
struct ElementIndicators {
  int col = 0;   // frontier (basis column)
  int elem = 0;  // element index within that frontier
  double eta_coarse = 0.0;
  std::vector<FrontierElement> constituents;
  std::vector<double> eta_fine;
};

std::vector<ElementIndicators> compute_error_indicators(
    const FomProblem& fom, const RefinementTree& tree, const std::vector<Frontier>& frontiers,
    const ActiveBasis& basis, const Eigen::VectorXd& x_hat_star, const Eigen::VectorXd& x_bar,
    int step, const Eigen::MatrixXd& phi_current);

/// Alg.-2 selection (eta >= mean, ties refined) followed by either full
/// constituent splitting or first-fit bin packing of constituents into
/// sibling groups with capacity alpha * eta_coarse (descending indicator
/// order).
std::vector<Frontier> refine_frontiers(const RefinementTree& tree,
                                       const std::vector<ElementIndicators>& indicators,
                                       const std::vector<Frontier>& frontiers, double alpha,
                                       bool grouping);

struct ConditionResult {
  Eigen::VectorXd scaling;         // per input column, 1/||v||
  std::vector<int> kept;           // input column indices, pivot order
  std::vector<int> deactivated;    // input column indices past the cutoff
};

/// Unit-norm rescaling followed by CPQR; columns after the last diagonal
/// entry >= eps_qr (in pivot order) are deactivated. Columns must be nonzero
/// (zero columns are deactivated outright by the caller).
ConditionResult condition_basis(const Eigen::MatrixXd& v_raw, double eps_qr);

/// Per-simulation mutable state: the frontiers of the current basis, the
/// materialized bases, the snapshot buffer in unscaled refined-basis
/// coordinates, and telemetry.
struct AdaptiveState {
  std::vector<Frontier> frontiers;
  Eigen::MatrixXd phi0;         // original basis, retained across compressions
  Eigen::MatrixXd phi_current;  // basis after the most recent compression
  double eps_qr_current = 1e-6;
  int compressions = 0;
  std::vector<Eigen::VectorXd> snapshot_buffer;  // full-flatten coordinates
  Eigen::VectorXd x_hat_full;                    // last solution, full-flatten coordinates

  // telemetry
  double max_drift = 0.0;
  long newton_failures = 0;
  long total_refinements = 0;
  int recoveries = 0;

  int p0_initial() const { return static_cast<int>(phi0.cols()); }
};

/// Fresh state: frontiers at the root for every phi0 column, tree attributes
/// precomputed.
AdaptiveState init_adaptive_state(RefinementTree& tree, const Eigen::MatrixXd& phi0,
                                  const RomConfig& config);

/// All refinement options are deactivated: clear the inactive set and halve
/// eps_qr. Throws conditioning_error once eps_qr underflows 1e-15.
void handle_all_inactive(AdaptiveState& state);

struct StepResult {
  Eigen::VectorXd x;
  double residual_norm = 0.0;
  int refinements = 0;
  int dim = 0;  // active basis dimension of the accepted solve
  bool full_span = false;
};

/// One time step of the adaptive loop: sieve / condition / solve / check /
/// indicators / refine until ||r|| < tol_fom or the frontiers hit the leaves.
StepResult solve_adaptive_step(FomProblem& fom, RefinementTree& tree, AdaptiveState& state,
                               int step, const RomConfig& config);

struct CompressionEvent {
  int step = 0;
  int old_dim = 0;  // flattened frontier size before
  int new_dim = 0;  // basis columns after (p0 + enrichment)
  int enrichment = 0;
  double drift = 0.0;
  bool recovered = false;
};

struct RunResult {
  Eigen::MatrixXd trajectory;  // n x T
  std::vector<int> dims;       // accepted dimension per step
  std::vector<double> residuals;
  double mean_dim = 0.0;
  double rel_l2_error = -1.0;       // Frobenius over the trajectory; -1 without a reference
  double mean_step_error = -1.0;    // time-averaged per-step relative l2 error
  double max_drift = 0.0;
  long total_refinements = 0;
  long newton_failures = 0;
  int compressions = 0;
  int recoveries = 0;
  std::vector<CompressionEvent> events;
};

/// Time loop around solve_adaptive_step with periodic compression (or
/// frontier reset). `reference` may be empty; otherwise the relative l2
/// trajectory error is reported against it.
RunResult run_simulation(FomProblem& fom, RefinementTree& tree, const Eigen::MatrixXd& phi0,
                         const RomConfig& config, const Eigen::MatrixXd& reference);

}  // namespace romsieve

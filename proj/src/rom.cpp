#include "romsieve/rom.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <cmath>
#include <map>
#include <numeric>

#include "romsieve/compression.hpp"
#include "romsieve/dense.hpp"
#include "romsieve/errors.hpp"

namespace romsieve {

namespace {

constexpr double kZeroColumnTol = 1e-13;  // sieve columns below this are excised outright
constexpr double kEpsQrFloor = 1e-15;

Eigen::VectorXd reference_state(const RomConfig& config, int n) {
  if (config.x_bar.size() == 0) return Eigen::VectorXd::Zero(n);
  return config.x_bar;
}

/// Reduced systems get arbitrarily ill conditioned between conditioning
/// passes (sieve columns shrink towards dependence before CPQR culls them),
/// so the solver must be rank-revealing: declare singularity only at true
/// numerical rank deficiency, otherwise return the pivoted solution.
Eigen::VectorXd solve_reduced(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                              bool transpose) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(transpose ? a.transpose() : a);
  qr.setThreshold(1e-13);
  if (qr.rank() < a.cols()) {
    throw singular_system_error("reduced system numerically rank deficient");
  }
  return qr.solve(b);
}

struct FrontierScan {
  bool any_inactive_nonleaf = false;
  bool any_active = false;
  bool any_active_nonleaf = false;
};

FrontierScan scan_frontiers(const RefinementTree& tree, const std::vector<Frontier>& frontiers) {
  FrontierScan s;
  for (const auto& f : frontiers) {
    for (const auto& e : f.elements) {
      const bool leaf = element_is_leaf(tree, e);
      if (e.inactive) {
        if (!leaf) s.any_inactive_nonleaf = true;
        continue;
      }
      s.any_active = true;
      if (!leaf) s.any_active_nonleaf = true;
    }
  }
  return s;
}

/// Sieve the active elements; elements whose sieve column vanishes are
/// deactivated outright (their coordinate content is zero by definition).
ActiveBasis materialize_active(const RefinementTree& tree, AdaptiveState& state) {
  SievedBasis sieved = sieve_basis(tree, state.phi_current, state.frontiers, /*active_only=*/true);
  std::vector<int> keep;
  keep.reserve(sieved.index.size());
  for (int c = 0; c < static_cast<int>(sieved.index.size()); ++c) {
    if (sieved.columns.col(c).norm() > kZeroColumnTol) {
      keep.push_back(c);
    } else {
      const FlatIndex fi = sieved.index[c];
      state.frontiers[fi.col].elements[fi.elem].inactive = true;
      if (state.x_hat_full.size() > sieved.flat_pos[c]) state.x_hat_full(sieved.flat_pos[c]) = 0.0;
    }
  }
  ActiveBasis out;
  if (keep.size() != sieved.index.size()) {
    out.sieved.columns.resize(sieved.columns.rows(), keep.size());
    for (std::size_t c = 0; c < keep.size(); ++c) {
      out.sieved.columns.col(c) = sieved.columns.col(keep[c]);
      out.sieved.index.push_back(sieved.index[keep[c]]);
      out.sieved.flat_pos.push_back(sieved.flat_pos[keep[c]]);
    }
  } else {
    out.sieved = std::move(sieved);
  }
  out.scaling.resize(out.sieved.columns.cols());
  for (Eigen::Index c = 0; c < out.sieved.columns.cols(); ++c) {
    out.scaling(c) = 1.0 / out.sieved.columns.col(c).norm();
  }
  return out;
}

}  // namespace

RomSolveResult solve_rom(const FomProblem& fom, const Eigen::MatrixXd& v_star,
                         const Eigen::VectorXd& x_bar, Eigen::VectorXd x_hat_init,
                         double tol_rom, int step, int max_newton) {
  RomSolveResult out;
  out.x_hat = std::move(x_hat_init);
  for (int it = 0; it <= max_newton; ++it) {
    const Eigen::VectorXd x = x_bar + v_star * out.x_hat;
    const Eigen::VectorXd rho = v_star.transpose() * fom.residual(x, step);
    out.rom_residual = rho.norm();
    if (out.rom_residual <= tol_rom) {
      out.iterations = it;
      return out;
    }
    if (it == max_newton) break;
    const Eigen::MatrixXd reduced = v_star.transpose() * (fom.jacobian(x, step) * v_star).eval();
    Eigen::VectorXd delta;
    try {
      delta = solve_reduced(reduced, rho, /*transpose=*/false);
    } catch (const singular_system_error&) {
      throw singular_system_error("solve_rom: singular reduced Jacobian at step " +
                                  std::to_string(step));
    }
    out.x_hat -= delta;
  }
  throw nonconvergence_error("solve_rom: Newton exceeded " + std::to_string(max_newton) +
                                 " iterations at step " + std::to_string(step),
                             out.x_hat, out.rom_residual);
}

std::vector<ElementIndicators> compute_error_indicators(
    const FomProblem& fom, const RefinementTree& tree, const std::vector<Frontier>& frontiers,
    const ActiveBasis& basis, const Eigen::VectorXd& x_hat_star, const Eigen::VectorXd& x_bar,
    int step, const Eigen::MatrixXd& phi_current) {
  const Eigen::MatrixXd v_star = basis.scaled();
  const Eigen::VectorXd x = x_bar + v_star * x_hat_star;
  const Eigen::VectorXd r = fom.residual(x, step);

  // Coarse adjoint: [V_*^T J V_*]^T y = V_*^T dg/dx.
  const Eigen::MatrixXd reduced = v_star.transpose() * (fom.jacobian(x, step) * v_star).eval();
  const Eigen::VectorXd rhs = v_star.transpose() * fom.qoi_gradient(x);
  const Eigen::VectorXd adjoint = solve_reduced(reduced, rhs, /*transpose=*/true);

  // (P_W phi_i)^T r = sum over W's leaves of analyze(phi_i) .* analyze(r):
  // the transforms are orthonormal, so the fine-column dot products reduce to
  // leaf-coefficient sums and no fine basis is ever materialized.
  const Eigen::VectorXd r_coeffs = tree.leaf_basis().analyze(r);
  std::map<int, Eigen::VectorXd> phi_coeffs;
  auto coeffs_for = [&](int col) -> const Eigen::VectorXd& {
    auto it = phi_coeffs.find(col);
    if (it == phi_coeffs.end()) {
      it = phi_coeffs.emplace(col, tree.leaf_basis().analyze(phi_current.col(col))).first;
    }
    return it->second;
  };

  std::vector<ElementIndicators> out;
  out.reserve(basis.dim());
  for (int c = 0; c < basis.dim(); ++c) {
    const FlatIndex fi = basis.sieved.index[c];
    ElementIndicators ind;
    ind.col = fi.col;
    ind.elem = fi.elem;
    ind.constituents = element_constituents(tree, frontiers[fi.col].elements[fi.elem]);
    const Eigen::VectorXd& coeffs = coeffs_for(fi.col);
    ind.eta_fine.reserve(ind.constituents.size());
    for (const auto& w : ind.constituents) {
      double eta = 0.0;
      if (!element_is_leaf(tree, w)) {
        double dot = 0.0;
        for (VertexId m : w.members) {
          for (int leaf : tree.vertex(m).leaf_set) dot += coeffs(leaf) * r_coeffs(leaf);
        }
        eta = std::abs(adjoint(c) * dot);
      }
      ind.eta_fine.push_back(eta);
      ind.eta_coarse += eta;
    }
    out.push_back(std::move(ind));
  }
  return out;
}

std::vector<Frontier> refine_frontiers(const RefinementTree& tree,
                                       const std::vector<ElementIndicators>& indicators,
                                       const std::vector<Frontier>& frontiers, double alpha,
                                       bool grouping) {
  if (indicators.empty()) return frontiers;
  double mean = 0.0;
  for (const auto& ind : indicators) mean += ind.eta_coarse;
  mean /= static_cast<double>(indicators.size());

  std::vector<std::vector<int>> selected(frontiers.size());
  std::vector<std::vector<std::vector<FrontierElement>>> decomps(frontiers.size());
  for (const auto& ind : indicators) {
    if (ind.eta_coarse < mean) continue;
    const FrontierElement& element = frontiers[ind.col].elements[ind.elem];
    if (element_is_leaf(tree, element)) continue;  // nothing to split

    std::vector<FrontierElement> replacement;
    if (!grouping || ind.eta_coarse <= 0.0 || ind.constituents.size() <= 1) {
      replacement = ind.constituents;
    } else {
      // First-fit bin packing, items in descending indicator order, capacity
      // alpha * eta_coarse; each bin becomes a sibling group.
      std::vector<int> order(ind.constituents.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](int a, int b) { return ind.eta_fine[a] > ind.eta_fine[b]; });
      const double capacity = alpha * ind.eta_coarse;
      std::vector<double> load;
      std::vector<std::vector<int>> bins;
      for (int item : order) {
        const double size = ind.eta_fine[item];
        bool placed = false;
        for (std::size_t b = 0; b < bins.size(); ++b) {
          if (load[b] + size <= capacity) {
            bins[b].push_back(item);
            load[b] += size;
            placed = true;
            break;
          }
        }
        if (!placed) {
          bins.push_back({item});
          load.push_back(size);
        }
      }
      for (const auto& bin : bins) {
        FrontierElement g;
        for (int item : bin) {
          for (VertexId m : ind.constituents[item].members) g.members.push_back(m);
        }
        replacement.push_back(std::move(g));
      }
    }
    selected[ind.col].push_back(ind.elem);
    decomps[ind.col].push_back(std::move(replacement));
  }

  std::vector<Frontier> out;
  out.reserve(frontiers.size());
  for (std::size_t i = 0; i < frontiers.size(); ++i) {
    out.push_back(partial_refinement(tree, frontiers[i], selected[i], decomps[i]));
  }
  return out;
}

ConditionResult condition_basis(const Eigen::MatrixXd& v_raw, double eps_qr) {
  const int p = static_cast<int>(v_raw.cols());
  ConditionResult out;
  out.scaling.resize(p);
  for (int c = 0; c < p; ++c) {
    const double norm = v_raw.col(c).norm();
    if (norm == 0.0) throw invalid_input_error("condition_basis: zero column");
    out.scaling(c) = 1.0 / norm;
  }
  const Cpqr qr = cpqr(v_raw * out.scaling.asDiagonal());
  int cutoff = -1;
  for (int i = 0; i < p; ++i) {
    if (std::abs(qr.r(i, i)) >= eps_qr) cutoff = i;
  }
  for (int i = 0; i < p; ++i) {
    if (i <= cutoff) {
      out.kept.push_back(qr.perm[i]);
    } else {
      out.deactivated.push_back(qr.perm[i]);
    }
  }
  return out;
}

AdaptiveState init_adaptive_state(RefinementTree& tree, const Eigen::MatrixXd& phi0,
                                  const RomConfig& config) {
  AdaptiveState state;
  state.phi0 = phi0;
  state.phi_current = phi0;
  state.eps_qr_current = config.eps_qr;
  state.frontiers.assign(phi0.cols(), root_frontier(tree));
  state.x_hat_full = Eigen::VectorXd::Zero(phi0.cols());
  tree.precompute_projected_metrics(phi0);
  return state;
}

void handle_all_inactive(AdaptiveState& state) {
  for (auto& f : state.frontiers) {
    for (auto& e : f.elements) e.inactive = false;
  }
  state.eps_qr_current *= 0.5;
  if (state.eps_qr_current < kEpsQrFloor) {
    throw conditioning_error("handle_all_inactive: eps_qr underflowed below 1e-15");
  }
}

StepResult solve_adaptive_step(FomProblem& fom, RefinementTree& tree, AdaptiveState& state,
                               int step, const RomConfig& config) {
  static const bool trace = std::getenv("ROMSIEVE_TRACE") != nullptr;
  const Eigen::VectorXd x_bar = reference_state(config, fom.dimension());
  StepResult out;
  int guard = 0;
  while (true) {
    if (++guard > 1000000) throw invariant_error("solve_adaptive_step: loop failed to terminate");

    FrontierScan scan = scan_frontiers(tree, state.frontiers);
    if (scan.any_inactive_nonleaf && !scan.any_active_nonleaf) {
      // Every refinement option has been deactivated; reactivate and retry
      // with a smaller independence cutoff. Inactive leaves never gate this:
      // reactivating them cannot create refinement options, only rank
      // deficiency.
      if (trace) std::fprintf(stderr, "[trace] reactivate (top), eps_qr=%g\n", state.eps_qr_current);
      handle_all_inactive(state);
      continue;
    }

    ActiveBasis basis = materialize_active(tree, state);
    if (basis.dim() == 0) {
      handle_all_inactive(state);
      continue;
    }

    // x_hat_full stores unscaled sieve coordinates; the solver works in the
    // scaled basis, so the warm start divides by each column's scale factor.
    Eigen::VectorXd warm(basis.dim());
    for (int c = 0; c < basis.dim(); ++c) {
      warm(c) = state.x_hat_full(basis.sieved.flat_pos[c]) / basis.scaling(c);
    }

    const Eigen::MatrixXd v_star = basis.scaled();
    RomSolveResult solve;
    bool solve_singular = false;
    try {
      solve = solve_rom(fom, v_star, x_bar, warm, config.tol_rom, step, config.max_newton);
    } catch (const nonconvergence_error& e) {
      solve.x_hat = e.last_iterate;
      solve.rom_residual = e.residual_norm;
      ++state.newton_failures;
    } catch (const singular_system_error&) {
      // An exactly dependent column slipped past the last conditioning pass;
      // keep the warm start and let refinement + CPQR rebuild the basis.
      solve.x_hat = warm;
      solve_singular = true;
      ++state.newton_failures;
    }

    out.x = x_bar + v_star * solve.x_hat;
    out.residual_norm = fom.residual(out.x, step).norm();
    if (trace) std::fprintf(stderr, "[trace] solve dim=%d rnorm=%g singular=%d\n", basis.dim(), out.residual_norm, (int)solve_singular);
    out.dim = basis.dim();

    // Record the solution in unscaled full-flatten coordinates.
    state.x_hat_full = Eigen::VectorXd::Zero(flatten(state.frontiers).size());
    for (int c = 0; c < basis.dim(); ++c) {
      state.x_hat_full(basis.sieved.flat_pos[c]) = basis.scaling(c) * solve.x_hat(c);
    }

    if (out.residual_norm < config.tol_fom) break;

    scan = scan_frontiers(tree, state.frontiers);
    if (!scan.any_active_nonleaf) {
      if (scan.any_inactive_nonleaf) {
        handle_all_inactive(state);
        continue;
      }
      out.full_span = true;  // frontiers converged to the leaves; accept
      break;
    }

    std::vector<ElementIndicators> indicators;
    bool uniform_fallback = solve_singular;
    if (!uniform_fallback) {
      try {
        indicators = compute_error_indicators(fom, tree, state.frontiers, basis, solve.x_hat,
                                              x_bar, step, state.phi_current);
      } catch (const singular_system_error&) {
        uniform_fallback = true;  // adjoint not computable on this basis
      }
    }
    if (uniform_fallback) {
      // No usable adjoint; fall back to uniform refinement of every active
      // element.
      indicators.clear();
      for (int c = 0; c < basis.dim(); ++c) {
        const FlatIndex fi = basis.sieved.index[c];
        ElementIndicators ind;
        ind.col = fi.col;
        ind.elem = fi.elem;
        ind.constituents = element_constituents(tree, state.frontiers[fi.col].elements[fi.elem]);
        ind.eta_fine.assign(ind.constituents.size(), 1.0);
        ind.eta_coarse = static_cast<double>(ind.constituents.size());
        indicators.push_back(std::move(ind));
      }
    }
    auto refined = refine_frontiers(tree, indicators, state.frontiers, config.alpha,
                                    config.grouping);
    if (refined == state.frontiers) {
      out.full_span = true;
      break;
    }
    const Prolongation prol = prolongation_operator(tree, state.frontiers, refined);
    state.frontiers = std::move(refined);
    prolong_state(state, prol);
    ++out.refinements;
    ++state.total_refinements;

    // Condition the refined basis: unit-norm rescale + CPQR, deactivating
    // columns past the cutoff.
    ActiveBasis refined_basis = materialize_active(tree, state);
    if (refined_basis.dim() > 0) {
      const ConditionResult cond = condition_basis(refined_basis.sieved.columns,
                                                   state.eps_qr_current);
      if (trace) std::fprintf(stderr, "[trace] condition refined_dim=%d deactivated=%d\n", refined_basis.dim(), (int)cond.deactivated.size());
      for (int c : cond.deactivated) {
        const FlatIndex fi = refined_basis.sieved.index[c];
        state.frontiers[fi.col].elements[fi.elem].inactive = true;
        state.x_hat_full(refined_basis.sieved.flat_pos[c]) = 0.0;
      }
    }
  }
  return out;
}

RunResult run_simulation(FomProblem& fom, RefinementTree& tree, const Eigen::MatrixXd& phi0,
                         const RomConfig& config, const Eigen::MatrixXd& reference) {
  AdaptiveState state = init_adaptive_state(tree, phi0, config);
  const int n = fom.dimension();
  const int T = fom.num_steps();
  const Eigen::VectorXd x_bar = reference_state(config, n);

  RunResult out;
  out.trajectory.resize(n, T);
  out.dims.reserve(T);
  out.residuals.reserve(T);

  Eigen::VectorXd x_prev = fom.initial_state();
  int since_reset = 0;
  for (int k = 1; k <= T; ++k) {
    fom.set_previous_state(x_prev);
    const StepResult step = solve_adaptive_step(fom, tree, state, k, config);
    x_prev = step.x;
    out.trajectory.col(k - 1) = step.x;
    out.dims.push_back(step.dim);
    out.residuals.push_back(step.residual_norm);

    if (config.compression) accumulate_snapshot(state, state.x_hat_full);
    ++since_reset;

    const int flat_dim = static_cast<int>(flatten(state.frontiers).size());
    const bool dim_trigger = config.max_dim && flat_dim > *config.max_dim;
    if (since_reset >= config.n_reset || dim_trigger) {
      if (config.compression) {
        CompressionEvent ev = compress_basis(tree, state, config.eps_svd, k,
                                             config.drift_threshold);
        out.events.push_back(ev);
      } else {
        state.frontiers.assign(state.p0_initial(), root_frontier(tree));
        state.snapshot_buffer.clear();
      }
      // Fresh frontier coordinates: least-squares warm start in the new basis.
      state.x_hat_full = state.phi_current.transpose() * (x_prev - x_bar);
      since_reset = 0;
    }
  }

  out.mean_dim = out.dims.empty()
                     ? 0.0
                     : std::accumulate(out.dims.begin(), out.dims.end(), 0.0) / out.dims.size();
  out.max_drift = state.max_drift;
  out.total_refinements = state.total_refinements;
  out.newton_failures = state.newton_failures;
  out.compressions = state.compressions;
  out.recoveries = state.recoveries;
  if (reference.size() > 0) {
    if (reference.rows() != n || reference.cols() != T) {
      throw invalid_input_error("run_simulation: reference trajectory shape mismatch");
    }
    out.rel_l2_error = (out.trajectory - reference).norm() / reference.norm();
    double acc = 0.0;
    for (int k = 0; k < T; ++k) {
      acc += (out.trajectory.col(k) - reference.col(k)).norm() / reference.col(k).norm();
    }
    out.mean_step_error = acc / T;
  }
  return out;
}

}  // namespace romsieve

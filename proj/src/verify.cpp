#include "romsieve/verify.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <set>
#include <sstream>

#include "romsieve/benchmarks.hpp"
#include "romsieve/compression.hpp"
#include "romsieve/dense.hpp"
#include "romsieve/errors.hpp"
#include "romsieve/rom.hpp"

namespace romsieve::verify {

Eigen::MatrixXd random_orthonormal(int n, int p, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd g(n, p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) g(i, j) = gauss(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  return qr.householderQ() * Eigen::MatrixXd::Identity(n, p);
}

namespace {

void random_partition_recursive(RefinementTree& tree, VertexId parent_or_none,
                                std::vector<int> indices, std::mt19937_64& rng,
                                int max_children) {
  const VertexId v = (parent_or_none == kNoVertex) ? tree.make_root(indices)
                                                   : tree.add_child(parent_or_none, indices);
  const int m = static_cast<int>(indices.size());
  if (m == 1) return;
  const int parts = 2 + static_cast<int>(rng() % std::max<std::size_t>(
                            1, std::min<std::size_t>(max_children - 1, m - 1)));
  std::shuffle(indices.begin(), indices.end(), rng);
  // Cut the shuffled indices at parts-1 distinct positions.
  std::set<int> cuts;
  while (static_cast<int>(cuts.size()) < parts - 1) {
    cuts.insert(1 + static_cast<int>(rng() % (m - 1)));
  }
  std::vector<int> bounds{0};
  bounds.insert(bounds.end(), cuts.begin(), cuts.end());
  bounds.push_back(m);
  for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
    std::vector<int> part(indices.begin() + bounds[i], indices.begin() + bounds[i + 1]);
    random_partition_recursive(tree, v, std::move(part), rng, max_children);
  }
}

}  // namespace

RefinementTree random_tree(std::shared_ptr<const LeafBasis> basis, std::mt19937_64& rng,
                           int max_children) {
  RefinementTree tree(basis);
  std::vector<int> all(basis->dimension());
  for (int i = 0; i < basis->dimension(); ++i) all[i] = i;
  random_partition_recursive(tree, kNoVertex, std::move(all), rng, max_children);
  tree.validate();
  return tree;
}

Frontier random_frontier(const RefinementTree& tree, std::mt19937_64& rng, double descend_prob,
                         bool allow_groups) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Frontier f = root_frontier(tree);
  bool changed = true;
  while (changed) {
    changed = false;
    Frontier next;
    for (const auto& e : f.elements) {
      if (element_is_leaf(tree, e) || unit(rng) >= descend_prob) {
        next.elements.push_back(e);
        continue;
      }
      changed = true;
      const auto parts = element_constituents(tree, e);
      if (allow_groups && parts.size() > 2 && unit(rng) < 0.5) {
        // Random grouping of the constituents into two or more sibling bins.
        const int bins = 2 + static_cast<int>(rng() % (parts.size() - 1));
        std::vector<FrontierElement> grouped(bins);
        for (std::size_t i = 0; i < parts.size(); ++i) {
          const int b = (i < static_cast<std::size_t>(bins))
                            ? static_cast<int>(i)
                            : static_cast<int>(rng() % bins);
          for (VertexId m : parts[i].members) grouped[b].members.push_back(m);
        }
        for (auto& g : grouped) {
          if (!g.members.empty()) next.elements.push_back(std::move(g));
        }
      } else {
        next.elements.insert(next.elements.end(), parts.begin(), parts.end());
      }
    }
    f = std::move(next);
    if (unit(rng) > descend_prob) break;
  }
  return f;
}

Eigen::MatrixXd dense_leaf_matrix(const RefinementTree& tree) {
  const int n = tree.state_dimension();
  Eigen::MatrixXd q(n, n);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    e(i) = 1.0;
    q.col(i) = tree.leaf_basis().synthesize(e);
  }
  return q;
}

Eigen::MatrixXd dense_projector(const Eigen::MatrixXd& q_dense, const std::vector<int>& leaf_set) {
  const int n = static_cast<int>(q_dense.rows());
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  for (int i : leaf_set) p += q_dense.col(i) * q_dense.col(i).transpose();
  return p;
}

Eigen::MatrixXd dense_sieve_matrix(const RefinementTree& tree, const Eigen::MatrixXd& q_dense,
                                   const Eigen::MatrixXd& phi,
                                   const std::vector<Frontier>& frontiers, bool active_only) {
  std::vector<Eigen::VectorXd> cols;
  for (std::size_t i = 0; i < frontiers.size(); ++i) {
    for (const auto& e : frontiers[i].elements) {
      if (active_only && e.inactive) continue;
      Eigen::VectorXd v = Eigen::VectorXd::Zero(q_dense.rows());
      for (VertexId m : e.members) {
        v += dense_projector(q_dense, tree.vertex(m).leaf_set) * phi.col(i);
      }
      cols.push_back(std::move(v));
    }
  }
  Eigen::MatrixXd out(q_dense.rows(), cols.size());
  for (std::size_t c = 0; c < cols.size(); ++c) out.col(c) = cols[c];
  return out;
}

std::vector<std::vector<int>> intersection_meet(const RefinementTree& tree,
                                                const std::vector<Frontier>& frontiers) {
  std::vector<std::vector<int>> acc;
  bool first = true;
  for (const auto& f : frontiers) {
    std::vector<std::vector<int>> sets;
    for (const auto& e : f.elements) sets.push_back(element_leaf_set(tree, e));
    if (first) {
      acc = std::move(sets);
      first = false;
      continue;
    }
    std::vector<std::vector<int>> next;
    for (const auto& a : acc) {
      for (const auto& b : sets) {
        std::vector<int> inter;
        std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
        if (!inter.empty()) next.push_back(std::move(inter));
      }
    }
    acc = std::move(next);
  }
  std::sort(acc.begin(), acc.end());
  return acc;
}

Eigen::MatrixXd finite_difference_jacobian(const FomProblem& fom, const Eigen::VectorXd& x,
                                           int step) {
  const int n = fom.dimension();
  Eigen::MatrixXd j(n, n);
  for (int c = 0; c < n; ++c) {
    const double h = 1e-6 * (1.0 + std::abs(x(c)));
    Eigen::VectorXd xp = x, xm = x;
    xp(c) += h;
    xm(c) -= h;
    j.col(c) = (fom.residual(xp, step) - fom.residual(xm, step)) / (2.0 * h);
  }
  return j;
}

namespace {

struct Harness {
  std::mt19937_64 rng;
  std::vector<CheckResult> results;

  void record(const std::string& name, bool ok, const std::string& detail) {
    results.push_back({name, ok, detail});
  }
};

std::shared_ptr<const LeafBasis> pick_basis(int n, std::mt19937_64& rng) {
  if (rng() % 2 == 0) return std::make_shared<KroneckerBasis>(n);
  return std::make_shared<DctBasis>(std::vector<int>{n});
}

/// Randomly refine a state's frontiers in place (valid operations only).
void random_refine(const RefinementTree& tree, std::vector<Frontier>& frontiers,
                   std::mt19937_64& rng, bool allow_groups) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto& f : frontiers) {
    std::vector<int> selected;
    std::vector<std::vector<FrontierElement>> decomps;
    for (int ei = 0; ei < static_cast<int>(f.elements.size()); ++ei) {
      const auto& e = f.elements[ei];
      if (e.inactive || element_is_leaf(tree, e) || unit(rng) > 0.45) continue;
      auto parts = element_constituents(tree, e);
      if (allow_groups && parts.size() > 2 && unit(rng) < 0.5) {
        const int bins = 2 + static_cast<int>(rng() % (parts.size() - 1));
        std::vector<FrontierElement> grouped(bins);
        for (std::size_t i = 0; i < parts.size(); ++i) {
          const int b = (i < static_cast<std::size_t>(bins))
                            ? static_cast<int>(i)
                            : static_cast<int>(rng() % bins);
          for (VertexId m : parts[i].members) grouped[b].members.push_back(m);
        }
        std::vector<FrontierElement> packed;
        for (auto& g : grouped) {
          if (!g.members.empty()) packed.push_back(std::move(g));
        }
        decomps.push_back(std::move(packed));
      } else {
        decomps.push_back(std::move(parts));
      }
      selected.push_back(ei);
    }
    if (!selected.empty()) f = partial_refinement(tree, f, selected, decomps);
  }
}

void check_metric_equivalence(Harness& h) {
  double worst = 0.0;
  for (int n : {8, 16, 32}) {
    for (int trial = 0; trial < 12; ++trial) {
      auto basis = pick_basis(n, h.rng);
      RefinementTree tree = random_tree(basis, h.rng);
      const int p0 = 2 + static_cast<int>(h.rng() % 3);
      const Eigen::MatrixXd phi0 = random_orthonormal(n, p0, h.rng);
      tree.precompute_projected_metrics(phi0);
      std::vector<Frontier> frontiers;
      for (int i = 0; i < p0; ++i) {
        frontiers.push_back(random_frontier(tree, h.rng, 0.55, /*allow_groups=*/true));
      }
      const Eigen::MatrixXd fast = compute_metric(tree, frontiers, /*skip_inactive=*/false);
      const Eigen::MatrixXd q_dense = dense_leaf_matrix(tree);
      const Eigen::MatrixXd v = dense_sieve_matrix(tree, q_dense, phi0, frontiers, false);
      const Eigen::MatrixXd dense = v.transpose() * v;
      worst = std::max(worst, (fast - dense).norm() / std::max(1.0, dense.norm()));
    }
  }
  std::ostringstream ss;
  ss << "max relative Frobenius deviation " << worst;
  h.record("metric equivalence (compute_metric vs dense V^T V)", worst <= 1e-10, ss.str());
}

void check_meet(Harness& h) {
  int mismatches = 0, trials = 0;
  for (int n : {8, 16, 32}) {
    for (int trial = 0; trial < 20; ++trial) {
      auto basis = std::make_shared<KroneckerBasis>(n);
      RefinementTree tree = random_tree(basis, h.rng);
      const int count = 2 + static_cast<int>(h.rng() % 3);
      std::vector<Frontier> frontiers;
      for (int i = 0; i < count; ++i) frontiers.push_back(random_frontier(tree, h.rng));
      const Frontier meet = compute_meet(tree, frontiers);
      std::vector<std::vector<int>> got;
      for (const auto& e : meet.elements) got.push_back(element_leaf_set(tree, e));
      std::sort(got.begin(), got.end());
      const auto want = intersection_meet(tree, frontiers);
      ++trials;
      if (got != want) ++mismatches;
    }
  }
  std::ostringstream ss;
  ss << mismatches << "/" << trials << " mismatches vs intersection definition";
  h.record("meet vs intersection definition", mismatches == 0, ss.str());
}

void check_pod(Harness& h) {
  double worst_sigma = 0.0, worst_angle = 0.0;
  for (int trial = 0; trial < 8; ++trial) {
    const int n = 32;
    auto basis = pick_basis(n, h.rng);
    RefinementTree tree = random_tree(basis, h.rng);
    const int p0 = 3;
    const Eigen::MatrixXd phi0 = random_orthonormal(n, p0, h.rng);
    tree.precompute_projected_metrics(phi0);
    std::vector<Frontier> frontiers;
    for (int i = 0; i < p0; ++i) frontiers.push_back(random_frontier(tree, h.rng, 0.5, true));

    const int q = 10;
    std::normal_distribution<double> gauss(0.0, 1.0);
    const std::size_t flat_size = flatten(frontiers).size();
    Eigen::MatrixXd x_hat(flat_size, q);
    for (Eigen::Index i = 0; i < x_hat.rows(); ++i) {
      for (int j = 0; j < q; ++j) x_hat(i, j) = gauss(h.rng);
    }

    const double eps_svd = 1e-6;
    const PodResult pod = metric_corrected_pod(tree, frontiers, x_hat, eps_svd, p0);

    const Eigen::MatrixXd q_dense = dense_leaf_matrix(tree);
    const Eigen::MatrixXd v = dense_sieve_matrix(tree, q_dense, phi0, frontiers, false);
    const Eigen::MatrixXd x = v * x_hat;
    const Eigen::MatrixXd x_perp = x - phi0 * (phi0.transpose() * x);
    const ThinSvd dense = thin_svd(x_perp);
    const double sigma_ref = thin_svd(x).sigma(0);

    for (Eigen::Index i = 0; i < dense.sigma.size() && i < pod.singular_values.size(); ++i) {
      if (dense.sigma(i) < eps_svd * sigma_ref) break;
      worst_sigma = std::max(worst_sigma, std::abs(dense.sigma(i) - pod.singular_values(i)) /
                                              dense.sigma(i));
    }
    if (pod.s > 0) {
      Eigen::MatrixXd enrichment(n, pod.s);
      {  // V * psi_hat
        const Eigen::MatrixXd psi = pod.psi_hat;
        enrichment = v * psi;
      }
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(enrichment);
      const Eigen::MatrixXd w = qr.householderQ() * Eigen::MatrixXd::Identity(n, pod.s);
      const Eigen::MatrixXd modes = dense.u.leftCols(pod.s);
      const Eigen::VectorXd cos = thin_svd(modes.transpose() * w).sigma;
      const double c = std::min(1.0, cos.minCoeff());
      worst_angle = std::max(worst_angle, std::acos(c));
    }
  }
  std::ostringstream ss;
  ss << "max sigma deviation " << worst_sigma << ", max principal angle " << worst_angle;
  h.record("metric-corrected POD vs dense full-space POD",
           worst_sigma <= 1e-8 && worst_angle <= 1e-6, ss.str());
}

void check_attribute_interleavings(Harness& h) {
  double worst = 0.0;
  for (int n : {16, 32}) {
    for (int trial = 0; trial < 4; ++trial) {
      for (bool path_compression : {false, true}) {
        auto basis = pick_basis(n, h.rng);
        RefinementTree tree = random_tree(basis, h.rng);
        tree.path_compression = path_compression;
        const int p0 = 3;
        const Eigen::MatrixXd phi0 = random_orthonormal(n, p0, h.rng);
        RomConfig config;
        AdaptiveState state = init_adaptive_state(tree, phi0, config);
        const Eigen::MatrixXd q_dense = dense_leaf_matrix(tree);
        std::normal_distribution<double> gauss(0.0, 1.0);

        for (int op = 0; op < 10; ++op) {
          if (h.rng() % 3 != 0) {
            auto refined = state.frontiers;
            random_refine(tree, refined, h.rng, /*allow_groups=*/true);
            if (!(refined == state.frontiers)) {
              const Prolongation prol = prolongation_operator(tree, state.frontiers, refined);
              state.frontiers = refined;
              prolong_state(state, prol);
            }
          } else {
            const std::size_t flat_size = flatten(state.frontiers).size();
            state.snapshot_buffer.clear();
            for (int c = 0; c < 6; ++c) {
              Eigen::VectorXd col(flat_size);
              for (Eigen::Index i = 0; i < col.size(); ++i) col(i) = gauss(h.rng);
              state.snapshot_buffer.push_back(col);
            }
            compress_basis(tree, state, /*eps_svd=*/0.2, op, /*drift_threshold=*/1e9);
            state.x_hat_full = Eigen::VectorXd::Zero(flatten(state.frontiers).size());
          }
          // Every vertex, against the dense projector oracle.
          for (VertexId v = 0; v < tree.num_vertices(); ++v) {
            const Eigen::MatrixXd want =
                state.phi_current.transpose() *
                dense_projector(q_dense, tree.vertex(v).leaf_set) * state.phi_current;
            const Eigen::MatrixXd got = tree.projected_metric(v);
            worst = std::max(worst, (got - want).norm() / std::max(1.0, want.norm()));
          }
        }
      }
    }
  }
  std::ostringstream ss;
  ss << "max relative deviation " << worst;
  h.record("projected metrics vs dense recomputation (refine/compress interleavings)",
           worst <= 1e-8, ss.str());
}

void check_nesting(Harness& h) {
  double worst = 0.0;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 16;
    auto basis = pick_basis(n, h.rng);
    RefinementTree tree = random_tree(basis, h.rng);
    const int p0 = 2;
    const Eigen::MatrixXd phi0 = random_orthonormal(n, p0, h.rng);
    std::vector<Frontier> frontiers(p0, root_frontier(tree));
    for (int round = 0; round < 4; ++round) {
      const SievedBasis prev = sieve_basis(tree, phi0, frontiers, false);
      auto refined = frontiers;
      random_refine(tree, refined, h.rng, /*allow_groups=*/true);
      frontiers = refined;
      const SievedBasis next = sieve_basis(tree, phi0, frontiers, false);
      // Every previous column must lie in the span of the refined basis.
      const Eigen::MatrixXd& vn = next.columns;
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> solver(vn);
      for (Eigen::Index c = 0; c < prev.columns.cols(); ++c) {
        const Eigen::VectorXd col = prev.columns.col(c);
        if (col.norm() == 0.0) continue;
        const Eigen::VectorXd res = vn * solver.solve(col) - col;
        worst = std::max(worst, res.norm() / col.norm());
      }
    }
  }
  std::ostringstream ss;
  ss << "max projection residual " << worst;
  h.record("monotone nesting of refined subspaces", worst <= 1e-10, ss.str());
}

void check_linear_convergence(Harness& h) {
  double worst = 0.0;
  for (int n : {8, 16, 32}) {
    auto basis = pick_basis(n, h.rng);
    RefinementTree tree = random_tree(basis, h.rng);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) a(i, j) = gauss(h.rng);
    }
    a = a * a.transpose() + 0.5 * static_cast<double>(n) * Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i) b(i) = gauss(h.rng);
    LinearFom fom(a, b);
    const Eigen::VectorXd direct = a.fullPivLu().solve(b);

    RomConfig config;
    config.tol_fom = 1e-12;
    config.tol_rom = 1e-12;
    config.grouping = false;
    AdaptiveState state = init_adaptive_state(tree, random_orthonormal(n, 2, h.rng), config);
    fom.set_previous_state(fom.initial_state());
    const StepResult step = solve_adaptive_step(fom, tree, state, 1, config);
    worst = std::max(worst, (step.x - direct).norm() / direct.norm());
  }
  std::ostringstream ss;
  ss << "max relative deviation from the direct solve " << worst;
  h.record("convergence to the FOM on linear systems", worst <= 1e-9, ss.str());
}

void check_jacobians(Harness& h) {
  double worst = 0.0;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  {
    FhnProblem fhn;
    const int n = fhn.dimension();
    Eigen::VectorXd prev(n);
    for (int trial = 0; trial < 6; ++trial) {
      Eigen::VectorXd x(n);
      for (int i = 0; i < n; ++i) {
        x(i) = -0.5 + 2.0 * unit(h.rng);
        prev(i) = -0.5 + 2.0 * unit(h.rng);
      }
      fhn.set_previous_state(prev);
      const Eigen::MatrixXd fd = finite_difference_jacobian(fhn, x, 3);
      const Eigen::MatrixXd an = fhn.jacobian(x, 3);
      const double scale = an.cwiseAbs().maxCoeff();
      worst = std::max(worst,
                       ((fd - an).cwiseAbs().array() / (an.cwiseAbs().array() + 1e-6 * scale))
                           .maxCoeff());
    }
  }
  {
    NtlProblem ntl(NtlInput::test);
    const int n = ntl.dimension();
    Eigen::VectorXd prev(n);
    for (int trial = 0; trial < 6; ++trial) {
      Eigen::VectorXd x(n);
      for (int i = 0; i < n; ++i) {
        x(i) = -0.1 + 0.4 * unit(h.rng);
        prev(i) = -0.1 + 0.4 * unit(h.rng);
      }
      ntl.set_previous_state(prev);
      const Eigen::MatrixXd fd = finite_difference_jacobian(ntl, x, 3);
      const Eigen::MatrixXd an = ntl.jacobian(x, 3);
      const double scale = an.cwiseAbs().maxCoeff();
      worst = std::max(worst,
                       ((fd - an).cwiseAbs().array() / (an.cwiseAbs().array() + 1e-6 * scale))
                           .maxCoeff());
    }
  }
  std::ostringstream ss;
  ss << "max relative entry deviation " << worst;
  h.record("benchmark Jacobians vs central finite differences", worst <= 1e-5, ss.str());
}

}  // namespace

std::vector<CheckResult> run_all(std::uint64_t seed) {
  Harness h;
  h.rng.seed(seed);
  check_metric_equivalence(h);
  check_meet(h);
  check_pod(h);
  check_attribute_interleavings(h);
  check_nesting(h);
  check_linear_convergence(h);
  check_jacobians(h);
  return h.results;
}

}  // namespace romsieve::verify

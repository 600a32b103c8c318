#include "romsieve/frontier.hpp"

#include <algorithm>
#include <set>

#include "romsieve/errors.hpp"

namespace romsieve {

Frontier root_frontier(const RefinementTree& tree) {
  Frontier f;
  f.elements.push_back(FrontierElement{{tree.root()}, false});
  return f;
}

std::vector<int> element_leaf_set(const RefinementTree& tree, const FrontierElement& e) {
  std::vector<int> out;
  for (VertexId m : e.members) {
    const auto& ls = tree.vertex(m).leaf_set;
    out.insert(out.end(), ls.begin(), ls.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool element_is_leaf(const RefinementTree& tree, const FrontierElement& e) {
  return e.members.size() == 1 && tree.is_leaf(e.members[0]);
}

bool is_valid_frontier(const RefinementTree& tree, const Frontier& f, std::string* why) {
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  const int n = tree.state_dimension();
  std::vector<char> covered(n, 0);
  for (const auto& e : f.elements) {
    if (e.members.empty()) return fail("empty element");
    if (e.members.size() > 1) {
      const VertexId parent = tree.vertex(e.members[0]).parent;
      if (parent == kNoVertex) return fail("grouped element containing the root");
      std::set<VertexId> distinct(e.members.begin(), e.members.end());
      if (distinct.size() != e.members.size()) return fail("duplicate member in group");
      for (VertexId m : e.members) {
        if (tree.vertex(m).parent != parent) return fail("group members do not share a parent");
      }
    }
    for (VertexId m : e.members) {
      for (int leaf : tree.vertex(m).leaf_set) {
        if (covered[leaf]) return fail("leaf covered twice");
        covered[leaf] = 1;
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    if (!covered[i]) return fail("leaf " + std::to_string(i) + " not covered");
  }
  return true;
}

std::vector<int> leaf_to_element(const RefinementTree& tree, const Frontier& f) {
  std::vector<int> map(tree.state_dimension(), -1);
  for (int ei = 0; ei < static_cast<int>(f.elements.size()); ++ei) {
    for (VertexId m : f.elements[ei].members) {
      for (int leaf : tree.vertex(m).leaf_set) {
        if (map[leaf] != -1) throw invariant_error("leaf_to_element: leaf covered twice");
        map[leaf] = ei;
      }
    }
  }
  for (int v : map) {
    if (v == -1) throw invariant_error("leaf_to_element: frontier does not cover the space");
  }
  return map;
}

std::vector<FrontierElement> element_constituents(const RefinementTree& tree,
                                                  const FrontierElement& e) {
  std::vector<FrontierElement> out;
  if (e.members.size() > 1) {
    for (VertexId m : e.members) out.push_back(FrontierElement{{m}, false});
    return out;
  }
  const VertexId u = e.members[0];
  if (tree.is_leaf(u)) {
    out.push_back(FrontierElement{{u}, e.inactive});
    return out;
  }
  for (VertexId c : tree.vertex(u).children) out.push_back(FrontierElement{{c}, false});
  return out;
}

Frontier full_refinement(const RefinementTree& tree, const Frontier& f) {
  Frontier out;
  for (const auto& e : f.elements) {
    auto parts = element_constituents(tree, e);
    out.elements.insert(out.elements.end(), parts.begin(), parts.end());
  }
  return out;
}

Frontier member_expansion(const RefinementTree& tree, const Frontier& f) {
  Frontier out;
  for (const auto& e : f.elements) {
    if (e.members.size() == 1) {
      out.elements.push_back(e);
    } else {
      for (VertexId m : e.members) out.elements.push_back(FrontierElement{{m}, e.inactive});
    }
  }
  (void)tree;
  return out;
}

Frontier partial_refinement(const RefinementTree& tree, const Frontier& f,
                            const std::vector<int>& selected,
                            const std::vector<std::vector<FrontierElement>>& decompositions) {
  if (selected.size() != decompositions.size()) {
    throw invalid_input_error("partial_refinement: selection/decomposition size mismatch");
  }
  std::vector<int> replacement_of(f.elements.size(), -1);
  for (std::size_t i = 0; i < selected.size(); ++i) {
    const int s = selected[i];
    if (s < 0 || s >= static_cast<int>(f.elements.size())) {
      throw invalid_input_error("partial_refinement: selected index out of range");
    }
    // Replacement leaf sets must partition the element's leaf set.
    std::vector<int> merged;
    for (const auto& r : decompositions[i]) {
      const auto ls = element_leaf_set(tree, r);
      merged.insert(merged.end(), ls.begin(), ls.end());
    }
    std::sort(merged.begin(), merged.end());
    if (merged != element_leaf_set(tree, f.elements[s]) ||
        std::adjacent_find(merged.begin(), merged.end()) != merged.end()) {
      throw invalid_decomposition_error(
          "partial_refinement: replacement does not partition the element");
    }
    replacement_of[s] = static_cast<int>(i);
  }
  Frontier out;
  for (int ei = 0; ei < static_cast<int>(f.elements.size()); ++ei) {
    if (replacement_of[ei] == -1) {
      out.elements.push_back(f.elements[ei]);
    } else {
      const auto& parts = decompositions[replacement_of[ei]];
      out.elements.insert(out.elements.end(), parts.begin(), parts.end());
    }
  }
  return out;
}

bool dominated_by(const RefinementTree& tree, const Frontier& fine, const Frontier& coarse) {
  const auto coarse_of_leaf = leaf_to_element(tree, coarse);
  for (const auto& e : fine.elements) {
    const auto ls = element_leaf_set(tree, e);
    for (std::size_t i = 1; i < ls.size(); ++i) {
      if (coarse_of_leaf[ls[i]] != coarse_of_leaf[ls[0]]) return false;
    }
  }
  return true;
}

std::vector<int> ancestor_map(const RefinementTree& tree, const Frontier& fine,
                              const Frontier& coarse) {
  const auto coarse_of_leaf = leaf_to_element(tree, coarse);
  std::vector<int> out;
  out.reserve(fine.elements.size());
  for (const auto& e : fine.elements) {
    const auto ls = element_leaf_set(tree, e);
    const int target = coarse_of_leaf[ls[0]];
    for (std::size_t i = 1; i < ls.size(); ++i) {
      if (coarse_of_leaf[ls[i]] != target) {
        throw not_dominated_error("ancestor_map: fine frontier not dominated by coarse");
      }
    }
    out.push_back(target);
  }
  return out;
}

std::vector<FlatIndex> flatten(const std::vector<Frontier>& frontiers) {
  std::vector<FlatIndex> out;
  for (int i = 0; i < static_cast<int>(frontiers.size()); ++i) {
    for (int j = 0; j < static_cast<int>(frontiers[i].elements.size()); ++j) {
      out.push_back(FlatIndex{i, j});
    }
  }
  return out;
}

Eigen::VectorXd Prolongation::apply(const Eigen::VectorXd& coarse) const {
  if (coarse.size() != coarse_size) throw invalid_input_error("Prolongation::apply: size mismatch");
  Eigen::VectorXd fine(parent.size());
  for (std::size_t i = 0; i < parent.size(); ++i) fine(i) = coarse(parent[i]);
  return fine;
}

Eigen::VectorXd Prolongation::pullback(const Eigen::VectorXd& fine) const {
  if (fine.size() != static_cast<Eigen::Index>(parent.size())) {
    throw invalid_input_error("Prolongation::pullback: size mismatch");
  }
  Eigen::VectorXd coarse = Eigen::VectorXd::Zero(coarse_size);
  for (std::size_t i = 0; i < parent.size(); ++i) coarse(parent[i]) += fine(i);
  return coarse;
}

Eigen::MatrixXd Prolongation::to_matrix() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(parent.size(), coarse_size);
  for (std::size_t i = 0; i < parent.size(); ++i) m(i, parent[i]) = 1.0;
  return m;
}

Prolongation prolongation_operator(const RefinementTree& tree,
                                   const std::vector<Frontier>& coarse,
                                   const std::vector<Frontier>& fine) {
  if (coarse.size() != fine.size()) {
    throw invalid_input_error("prolongation_operator: column count mismatch");
  }
  Prolongation out;
  std::vector<int> coarse_offsets(coarse.size() + 1, 0);
  for (std::size_t i = 0; i < coarse.size(); ++i) {
    coarse_offsets[i + 1] = coarse_offsets[i] + static_cast<int>(coarse[i].elements.size());
  }
  out.coarse_size = coarse_offsets.back();
  for (std::size_t i = 0; i < fine.size(); ++i) {
    const auto map = ancestor_map(tree, fine[i], coarse[i]);
    for (int target : map) out.parent.push_back(coarse_offsets[i] + target);
  }
  return out;
}

namespace {

Eigen::VectorXd project_coeffs(const RefinementTree& tree, const Eigen::VectorXd& coeffs,
                               const FrontierElement& e) {
  Eigen::VectorXd masked = Eigen::VectorXd::Zero(coeffs.size());
  for (VertexId m : e.members) {
    for (int leaf : tree.vertex(m).leaf_set) masked(leaf) = coeffs(leaf);
  }
  return tree.leaf_basis().synthesize(masked);
}

}  // namespace

std::vector<Eigen::VectorXd> sieve(const RefinementTree& tree, const Eigen::VectorXd& phi,
                                   const Frontier& f) {
  const Eigen::VectorXd coeffs = tree.leaf_basis().analyze(phi);
  std::vector<Eigen::VectorXd> out;
  out.reserve(f.elements.size());
  for (const auto& e : f.elements) out.push_back(project_coeffs(tree, coeffs, e));
  return out;
}

SievedBasis sieve_basis(const RefinementTree& tree, const Eigen::MatrixXd& phi,
                        const std::vector<Frontier>& frontiers, bool active_only) {
  if (static_cast<std::size_t>(phi.cols()) != frontiers.size()) {
    throw invalid_input_error("sieve_basis: one frontier per basis column required");
  }
  SievedBasis out;
  int total = 0, flat = 0;
  for (const auto& f : frontiers) {
    for (const auto& e : f.elements) {
      if (!active_only || !e.inactive) ++total;
    }
  }
  out.columns.resize(tree.state_dimension(), total);
  int col = 0;
  for (int i = 0; i < static_cast<int>(frontiers.size()); ++i) {
    const Eigen::VectorXd coeffs = tree.leaf_basis().analyze(phi.col(i));
    for (int j = 0; j < static_cast<int>(frontiers[i].elements.size()); ++j, ++flat) {
      const auto& e = frontiers[i].elements[j];
      if (active_only && e.inactive) continue;
      out.columns.col(col) = project_coeffs(tree, coeffs, e);
      out.index.push_back(FlatIndex{i, j});
      out.flat_pos.push_back(flat);
      ++col;
    }
  }
  return out;
}

Frontier compute_meet(const RefinementTree& tree, const std::vector<Frontier>& frontiers) {
  std::set<VertexId> members;
  for (const auto& f : frontiers) {
    for (const auto& e : f.elements) {
      if (e.members.size() != 1) {
        throw invalid_input_error("compute_meet: expects plain (vertex) frontiers");
      }
      members.insert(e.members[0]);
    }
  }
  // Upward flood-fill: marked vertices are strict ancestors of something in
  // the union; the meet is the unmarked part of the union.
  std::vector<char> marked(tree.num_vertices(), 0);
  for (VertexId u : members) {
    VertexId v = u;
    while (tree.vertex(v).parent != kNoVertex) {
      v = tree.vertex(v).parent;
      if (marked[v]) break;
      marked[v] = 1;
    }
  }
  Frontier out;
  for (VertexId u : members) {
    if (!marked[u]) out.elements.push_back(FrontierElement{{u}, false});
  }
  return out;
}

namespace {

// Relation of two vertices by leaf-set nesting, resolved through the common
// ancestor: returns the deeper vertex when nested, kNoVertex when orthogonal.
VertexId deeper_of_nested(const RefinementTree& tree, VertexId u, VertexId w) {
  const VertexId a = common_ancestor(tree, u, w);
  if (a == u) return w;  // w descends from u (or equals it)
  if (a == w) return u;
  return kNoVertex;
}

class MetricCache {
 public:
  MetricCache(RefinementTree& tree) : tree_(tree), cache_(tree.num_vertices()) {}
  const Eigen::MatrixXd& get(VertexId u) {
    auto& slot = cache_[u];
    if (slot.size() == 0) {
      slot = tree_.path_compression ? tree_.projected_metric_compressing(u)
                                    : tree_.projected_metric(u);
    }
    return slot;
  }

 private:
  RefinementTree& tree_;
  std::vector<Eigen::MatrixXd> cache_;
};

}  // namespace

Eigen::MatrixXd compute_metric(RefinementTree& tree, const std::vector<Frontier>& frontiers,
                               bool skip_inactive) {
  struct Entry {
    const FrontierElement* elem;
    int chi;
  };
  std::vector<Entry> entries;
  for (int i = 0; i < static_cast<int>(frontiers.size()); ++i) {
    for (const auto& e : frontiers[i].elements) {
      if (skip_inactive && e.inactive) continue;
      entries.push_back(Entry{&e, i});
    }
  }
  const int p = static_cast<int>(entries.size());
  MetricCache cache(tree);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(p, p);
  for (int a = 0; a < p; ++a) {
    for (int b = a; b < p; ++b) {
      double value = 0.0;
      for (VertexId u : entries[a].elem->members) {
        for (VertexId w : entries[b].elem->members) {
          const VertexId deeper = deeper_of_nested(tree, u, w);
          if (deeper == kNoVertex) continue;
          value += cache.get(deeper)(entries[a].chi, entries[b].chi);
        }
      }
      m(a, b) = value;
      m(b, a) = value;
    }
  }
  return m;
}

void update_projected_metrics(RefinementTree& tree, const std::vector<Frontier>& frontiers,
                              const Eigen::MatrixXd& phi_hat_new) {
  const auto flat = flatten(frontiers);
  if (phi_hat_new.rows() != static_cast<Eigen::Index>(flat.size())) {
    throw invalid_input_error(
        "update_projected_metrics: coordinate rows do not match the frontier union");
  }
  const int p_prev = static_cast<int>(frontiers.size());
  const int p_new = static_cast<int>(phi_hat_new.cols());

  // Flat row of each (column, element) pair.
  std::vector<std::vector<int>> flat_of(frontiers.size());
  {
    int pos = 0;
    for (std::size_t i = 0; i < frontiers.size(); ++i) {
      flat_of[i].resize(frontiers[i].elements.size());
      for (std::size_t j = 0; j < frontiers[i].elements.size(); ++j) flat_of[i][j] = pos++;
    }
  }
  // Per-column leaf -> element lookup gives the global ancestor maps
  // psi_j : meet -> frontier j.
  std::vector<std::vector<int>> leaf_elem(frontiers.size());
  for (std::size_t i = 0; i < frontiers.size(); ++i) {
    leaf_elem[i] = leaf_to_element(tree, frontiers[i]);
  }

  std::vector<Frontier> expanded;
  expanded.reserve(frontiers.size());
  for (const auto& f : frontiers) expanded.push_back(member_expansion(tree, f));
  const Frontier meet = compute_meet(tree, expanded);

  std::vector<char> on_meet(tree.num_vertices(), 0);
  for (const auto& e : meet.elements) on_meet[e.members[0]] = 1;

  auto conjugation_for = [&](VertexId u) {
    // B^U rows follow Eq. (eq:conj_matrix): row j is the phi_hat_new row of
    // the frontier-j element whose span contains U.
    Eigen::MatrixXd b(p_prev, p_new);
    const int leaf = tree.vertex(u).leaf_set[0];
    for (int j = 0; j < p_prev; ++j) {
      b.row(j) = phi_hat_new.row(flat_of[j][leaf_elem[j][leaf]]);
    }
    return b;
  };

  // Pass 1: conjugate the attributes on the meet. The stored value is first
  // corrected through any deferred conjugations still pending above the
  // vertex (b_above); that same pending chain must also be folded into the
  // deferred conjugation left for the descendants, or a later compression
  // whose meet dives below this one double- or mis-applies updates.
  for (const auto& e : meet.elements) {
    const VertexId u = e.members[0];
    TreeVertex& tv = tree.mutable_vertex(u);
    Eigen::MatrixXd attr = tv.projected_metric;
    Eigen::MatrixXd b_above;
    bool have_above = false;
    if (!tv.is_explicit) {
      VertexId w = u;
      while (true) {
        w = tree.vertex(w).parent;
        if (w == kNoVertex) throw invariant_error("update: no explicit ancestor");
        const TreeVertex& tw = tree.vertex(w);
        if (tw.deferred_conjugation) {
          b_above = have_above ? Eigen::MatrixXd(b_above * *tw.deferred_conjugation)
                               : *tw.deferred_conjugation;
          have_above = true;
        }
        if (tw.is_explicit) break;
      }
      if (have_above) attr = b_above.transpose() * attr * b_above;
    }
    const Eigen::MatrixXd b_u = conjugation_for(u);
    tv.projected_metric = b_u.transpose() * attr * b_u;
    Eigen::MatrixXd chain = have_above ? Eigen::MatrixXd(b_above * b_u) : b_u;
    tv.deferred_conjugation = tv.deferred_conjugation
                                  ? Eigen::MatrixXd(*tv.deferred_conjugation * chain)
                                  : chain;
    tv.is_explicit = true;
  }

  // Pass 1b: explicit vertices strictly below the meet exist only when path
  // compression promoted them; their attributes are current-epoch, so the
  // meet vertex's composed deferred conjugation (which serves older-epoch
  // descendants) would be wrong for them. Conjugate them directly by their
  // meet ancestor's B^U and keep them explicit.
  std::vector<VertexId> still_promoted;
  {
    auto& reg = tree.promoted_registry();
    std::sort(reg.begin(), reg.end());
    reg.erase(std::unique(reg.begin(), reg.end()), reg.end());
    for (VertexId x : reg) {
      if (!tree.vertex(x).is_explicit || on_meet[x]) continue;
      // Find the meet element above x, if any (x below the meet).
      VertexId w = tree.vertex(x).parent;
      while (w != kNoVertex && !on_meet[w]) w = tree.vertex(w).parent;
      if (w == kNoVertex) continue;  // above the meet: handled by the recursion below
      const Eigen::MatrixXd b_u = conjugation_for(w);
      TreeVertex& tx = tree.mutable_vertex(x);
      tx.projected_metric = b_u.transpose() * tx.projected_metric * b_u;
      tx.deferred_conjugation = tx.deferred_conjugation
                                    ? Eigen::MatrixXd(*tx.deferred_conjugation * b_u)
                                    : b_u;
      still_promoted.push_back(x);
    }
  }

  // Pass 2: everything else that was explicit goes implicit (the meet stays,
  // as do the promoted vertices just corrected).
  {
    std::vector<char> keep(tree.num_vertices(), 0);
    for (VertexId x : still_promoted) keep[x] = 1;
    for (VertexId v = 0; v < tree.num_vertices(); ++v) {
      if (!on_meet[v] && !keep[v]) tree.mutable_vertex(v).is_explicit = false;
    }
  }
  tree.promoted_registry() = std::move(still_promoted);

  // Pass 3: recompute above the meet by child sums (recursion stops at the
  // explicit meet vertices), clearing deferred conjugations there.
  struct Rec {
    RefinementTree& tree;
    const Eigen::MatrixXd& run(VertexId v) {
      TreeVertex& tv = tree.mutable_vertex(v);
      if (!tv.is_explicit) {
        Eigen::MatrixXd sum;
        for (VertexId c : tv.children) {
          const Eigen::MatrixXd& child = run(c);
          if (sum.size() == 0) {
            sum = child;
          } else {
            sum += child;
          }
        }
        tv.projected_metric = std::move(sum);
        tv.is_explicit = true;
        tv.deferred_conjugation.reset();
      }
      return tv.projected_metric;
    }
  } rec{tree};
  rec.run(tree.root());

  tree.set_basis_dimension(p_new);
}

}  // namespace romsieve

#include "romsieve/tree.hpp"

#include <algorithm>
#include <json.hpp>

#include "romsieve/errors.hpp"

namespace romsieve {

RefinementTree::RefinementTree(std::shared_ptr<const LeafBasis> basis)
    : basis_(std::move(basis)) {
  if (!basis_) throw invalid_input_error("RefinementTree: null leaf basis");
  leaf_lookup_.assign(basis_->dimension(), kNoVertex);
}

const TreeVertex& RefinementTree::vertex(VertexId v) const {
  if (v < 0 || v >= num_vertices()) throw invalid_input_error("invalid vertex handle");
  return vertices_[v];
}

TreeVertex& RefinementTree::mutable_vertex(VertexId v) {
  if (v < 0 || v >= num_vertices()) throw invalid_input_error("invalid vertex handle");
  return vertices_[v];
}

VertexId RefinementTree::leaf_vertex(int leaf) const {
  if (leaf < 0 || leaf >= static_cast<int>(leaf_lookup_.size()) ||
      leaf_lookup_[leaf] == kNoVertex) {
    throw invalid_input_error("leaf_vertex: no vertex for leaf " + std::to_string(leaf));
  }
  return leaf_lookup_[leaf];
}

VertexId RefinementTree::make_root(std::vector<int> leaf_set) {
  if (root_ != kNoVertex) throw invalid_input_error("make_root: root already exists");
  std::sort(leaf_set.begin(), leaf_set.end());
  TreeVertex v;
  v.leaf_set = std::move(leaf_set);
  v.depth = 0;
  vertices_.push_back(std::move(v));
  root_ = 0;
  if (vertices_[0].leaf_set.size() == 1) leaf_lookup_[vertices_[0].leaf_set[0]] = 0;
  return root_;
}

VertexId RefinementTree::add_child(VertexId parent, std::vector<int> leaf_set) {
  const TreeVertex& p = vertex(parent);
  std::sort(leaf_set.begin(), leaf_set.end());
  TreeVertex v;
  v.leaf_set = std::move(leaf_set);
  v.parent = parent;
  v.depth = p.depth + 1;
  const VertexId id = num_vertices();
  if (v.leaf_set.size() == 1) leaf_lookup_[v.leaf_set[0]] = id;
  vertices_.push_back(std::move(v));
  vertices_[parent].children.push_back(id);
  // The parent stopped being a leaf, if it ever was one.
  if (vertices_[parent].leaf_set.size() == 1 &&
      leaf_lookup_[vertices_[parent].leaf_set[0]] == parent) {
    leaf_lookup_[vertices_[parent].leaf_set[0]] = kNoVertex;
  }
  return id;
}

VertexId RefinementTree::graft(VertexId parent, const RefinementTree& subtree) {
  if (subtree.root_ == kNoVertex) throw invalid_input_error("graft: empty subtree");
  const auto& proot = vertex(parent);
  const auto& sroot = subtree.vertex(subtree.root());
  if (!std::includes(proot.leaf_set.begin(), proot.leaf_set.end(), sroot.leaf_set.begin(),
                     sroot.leaf_set.end())) {
    throw invalid_input_error("graft: subtree leaf set not contained in parent");
  }
  for (VertexId c : proot.children) {
    const auto& cls = vertex(c).leaf_set;
    std::vector<int> overlap;
    std::set_intersection(cls.begin(), cls.end(), sroot.leaf_set.begin(), sroot.leaf_set.end(),
                          std::back_inserter(overlap));
    if (!overlap.empty()) {
      throw invalid_input_error("graft: subtree overlaps an existing child");
    }
  }
  // Copy the subtree in preorder so parents precede children.
  std::vector<VertexId> remap(subtree.num_vertices(), kNoVertex);
  std::vector<VertexId> stack{subtree.root()};
  VertexId new_root = kNoVertex;
  while (!stack.empty()) {
    const VertexId s = stack.back();
    stack.pop_back();
    const auto& sv = subtree.vertex(s);
    const VertexId target = (sv.parent == kNoVertex) ? parent : remap[sv.parent];
    remap[s] = add_child(target, sv.leaf_set);
    if (sv.parent == kNoVertex) new_root = remap[s];
    for (auto it = sv.children.rbegin(); it != sv.children.rend(); ++it) stack.push_back(*it);
  }
  return new_root;
}

void RefinementTree::validate() const {
  if (root_ == kNoVertex) throw invariant_error("tree has no root");
  const int n = state_dimension();
  if (static_cast<int>(vertices_[root_].leaf_set.size()) != n) {
    throw invariant_error("root leaf set does not cover the full space");
  }
  std::vector<char> seen(n, 0);
  for (VertexId v = 0; v < num_vertices(); ++v) {
    const auto& tv = vertices_[v];
    if (tv.leaf_set.empty()) throw invariant_error("vertex with empty leaf set");
    if (!std::is_sorted(tv.leaf_set.begin(), tv.leaf_set.end())) {
      throw invariant_error("vertex leaf set not sorted");
    }
    if (v != root_ && tv.parent == kNoVertex) throw invariant_error("non-root without parent");
    if (tv.children.size() == 1) throw invariant_error("internal vertex with a single child");
    if (tv.children.empty() != (tv.leaf_set.size() == 1)) {
      throw invariant_error("leaf iff singleton leaf set violated");
    }
    if (tv.children.empty()) {
      if (seen[tv.leaf_set[0]]) throw invariant_error("leaf index covered twice");
      seen[tv.leaf_set[0]] = 1;
      if (leaf_lookup_[tv.leaf_set[0]] != v) throw invariant_error("leaf lookup out of date");
    } else {
      // Children must partition the parent's leaf set.
      std::vector<int> merged;
      for (VertexId c : tv.children) {
        if (vertices_[c].parent != v) throw invariant_error("child parent link broken");
        if (vertices_[c].depth != tv.depth + 1) throw invariant_error("depth bookkeeping broken");
        merged.insert(merged.end(), vertices_[c].leaf_set.begin(), vertices_[c].leaf_set.end());
      }
      std::sort(merged.begin(), merged.end());
      if (merged != tv.leaf_set) {
        throw invariant_error("children do not partition the parent leaf set");
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    if (!seen[i]) throw invariant_error("leaf index " + std::to_string(i) + " not covered");
  }
}

void RefinementTree::precompute_projected_metrics(const Eigen::MatrixXd& phi0) {
  const int n = state_dimension();
  if (phi0.rows() != n) throw invalid_input_error("precompute_projected_metrics: row mismatch");
  const int p0 = static_cast<int>(phi0.cols());
  Eigen::MatrixXd ortho = phi0.transpose() * phi0 - Eigen::MatrixXd::Identity(p0, p0);
  if (ortho.cwiseAbs().maxCoeff() > 1e-8) {
    throw invalid_input_error("precompute_projected_metrics: basis not orthonormal");
  }

  // Rows of Q^T Phi0 give the leaf metrics as rank-one outer products.
  Eigen::MatrixXd y(n, p0);
  for (int j = 0; j < p0; ++j) y.col(j) = basis_->analyze(phi0.col(j));

  std::vector<VertexId> order(vertices_.size());
  for (VertexId v = 0; v < num_vertices(); ++v) order[v] = v;
  std::sort(order.begin(), order.end(),
            [&](VertexId a, VertexId b) { return vertices_[a].depth > vertices_[b].depth; });
  for (VertexId v : order) {
    auto& tv = vertices_[v];
    if (tv.children.empty()) {
      const Eigen::RowVectorXd row = y.row(tv.leaf_set[0]);
      tv.projected_metric = row.transpose() * row;
    } else {
      tv.projected_metric = Eigen::MatrixXd::Zero(p0, p0);
      for (VertexId c : tv.children) tv.projected_metric += vertices_[c].projected_metric;
    }
    tv.is_explicit = true;
    tv.deferred_conjugation.reset();
  }
  promoted_.clear();
  basis_dim_ = p0;
}

Eigen::MatrixXd RefinementTree::projected_metric(VertexId u) const {
  const TreeVertex& tu = vertex(u);
  Eigen::MatrixXd m = tu.projected_metric;
  if (tu.is_explicit) return m;
  // Walk upward accumulating deferred conjugations until the first explicit
  // vertex; conjugations compose deepest-first.
  Eigen::MatrixXd b;
  bool have_b = false;
  VertexId w = u;
  while (true) {
    w = vertices_[w].parent;
    if (w == kNoVertex) {
      throw invariant_error("projected_metric: no explicit ancestor found");
    }
    const TreeVertex& tw = vertices_[w];
    if (tw.deferred_conjugation) {
      b = have_b ? Eigen::MatrixXd(b * *tw.deferred_conjugation) : *tw.deferred_conjugation;
      have_b = true;
    }
    if (tw.is_explicit) break;
  }
  if (have_b) m = b.transpose() * m * b;
  return m;
}

Eigen::MatrixXd RefinementTree::projected_metric_compressing(VertexId u) {
  if (vertex(u).is_explicit) return vertex(u).projected_metric;
  // Collect the implicit chain up to the first explicit ancestor.
  std::vector<VertexId> chain;  // u, parent(u), ... last implicit vertex
  VertexId w = u;
  while (!vertices_[w].is_explicit) {
    chain.push_back(w);
    w = vertices_[w].parent;
    if (w == kNoVertex) throw invariant_error("projected_metric: no explicit ancestor found");
  }
  const VertexId anchor = w;
  // Promote the chain top-down. "pending" is the conjugation still owed to
  // the vertex about to be processed: the deferred conjugations strictly
  // above it, deepest first. Once a vertex is explicit, its own stored
  // deferred conjugation must carry everything its descendants still owe, so
  // the pending product is folded into it.
  Eigen::MatrixXd pending;
  bool have_pending = false;
  if (vertices_[anchor].deferred_conjugation) {
    pending = *vertices_[anchor].deferred_conjugation;
    have_pending = true;
  }
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
    TreeVertex& tv = vertices_[*it];
    if (have_pending) {
      tv.projected_metric = pending.transpose() * tv.projected_metric * pending;
      tv.deferred_conjugation =
          tv.deferred_conjugation ? Eigen::MatrixXd(*tv.deferred_conjugation * pending) : pending;
    }
    tv.is_explicit = true;
    promoted_.push_back(*it);
    if (tv.deferred_conjugation) {
      pending = *tv.deferred_conjugation;
      have_pending = true;
    } else {
      have_pending = false;
    }
  }
  return vertices_[u].projected_metric;
}

double RefinementTree::diagnose_drift() const {
  const Eigen::MatrixXd m = projected_metric(root_);
  return (m - Eigen::MatrixXd::Identity(m.rows(), m.cols())).norm();
}

VertexId common_ancestor(const RefinementTree& tree, VertexId u, VertexId w) {
  tree.vertex(u);
  tree.vertex(w);
  while (tree.depth(u) > tree.depth(w)) u = tree.vertex(u).parent;
  while (tree.depth(w) > tree.depth(u)) w = tree.vertex(w).parent;
  while (u != w) {
    u = tree.vertex(u).parent;
    w = tree.vertex(w).parent;
    if (u == kNoVertex || w == kNoVertex) {
      throw invariant_error("common_ancestor: vertices not in one tree");
    }
  }
  return u;
}

std::string tree_to_json(const RefinementTree& tree) {
  nlohmann::ordered_json j;
  j["schema"] = "romsieve-tree-v1";
  j["n"] = tree.state_dimension();
  j["leaf_basis"] = {{"kind", tree.leaf_basis().kind()},
                     {"block_sizes", tree.leaf_basis().block_sizes()}};
  j["root"] = tree.root();
  nlohmann::ordered_json verts = nlohmann::ordered_json::array();
  for (VertexId v = 0; v < tree.num_vertices(); ++v) {
    const auto& tv = tree.vertex(v);
    verts.push_back({{"id", v},
                     {"parent", tv.parent},
                     {"children", tv.children},
                     {"leaf_set", tv.leaf_set}});
  }
  j["vertices"] = std::move(verts);
  return j.dump(2) + "\n";
}

RefinementTree tree_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (j.at("schema").get<std::string>() != "romsieve-tree-v1") {
    throw invalid_input_error("tree_from_json: unknown schema");
  }
  auto basis = make_leaf_basis(j.at("leaf_basis").at("kind").get<std::string>(),
                               j.at("leaf_basis").at("block_sizes").get<std::vector<int>>());
  RefinementTree tree(std::move(basis));
  const auto& verts = j.at("vertices");
  std::vector<VertexId> remap(verts.size(), kNoVertex);
  // Vertices are stored with parents preceding children (construction order),
  // so a single pass re-adds them faithfully.
  for (const auto& v : verts) {
    const VertexId id = v.at("id").get<VertexId>();
    const VertexId parent = v.at("parent").get<VertexId>();
    auto leaf_set = v.at("leaf_set").get<std::vector<int>>();
    if (parent == kNoVertex) {
      remap[id] = tree.make_root(std::move(leaf_set));
    } else {
      if (remap[parent] == kNoVertex) {
        throw invalid_input_error("tree_from_json: parent appears after child");
      }
      remap[id] = tree.add_child(remap[parent], std::move(leaf_set));
    }
  }
  tree.validate();
  return tree;
}

}  // namespace romsieve

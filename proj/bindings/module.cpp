#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "romsieve/benchmarks.hpp"
#include "romsieve/clustering.hpp"
#include "romsieve/dense.hpp"
#include "romsieve/io.hpp"
#include "romsieve/sweep.hpp"
#include "romsieve/tree_builder.hpp"
#include "romsieve/verify.hpp"

namespace py = pybind11;
using namespace romsieve;

namespace {

RunSpec spec_from_json(const std::string& text) { return parse_run_spec(text); }

py::dict record_to_dict(const RunRecord& r) {
  py::dict d;
  d["id"] = r.id;
  d["method"] = r.method;
  d["leaf_basis"] = r.leaf_basis;
  d["k"] = r.k;
  d["grouping"] = r.grouping;
  d["n_reset"] = r.n_reset;
  d["tol_fom"] = r.tol_fom;
  d["rel_l2_error"] = r.rel_l2_error;
  d["mean_dim"] = r.mean_dim;
  d["wall_time"] = r.wall_time;
  d["drift"] = r.drift;
  d["refinements"] = r.refinements;
  d["compressions"] = r.compressions;
  d["newton_failures"] = r.newton_failures;
  d["failed"] = r.failed;
  d["error"] = r.error;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Adaptive basis refinement and online compression for reduced-order models";

  m.def("thin_svd", [](const Eigen::MatrixXd& a) {
    const ThinSvd s = thin_svd(a);
    return py::make_tuple(s.u, s.sigma, s.vt);
  });
  m.def("cpqr", [](const Eigen::MatrixXd& a) {
    const Cpqr q = cpqr(a);
    return py::make_tuple(q.q, q.r, q.perm);
  });
  m.def("factor_spsd", [](const Eigen::MatrixXd& a) { return factor_spsd(a); });
  m.def("kmeans", [](const Eigen::MatrixXd& points, int k, std::uint64_t seed) {
    return kmeans(points, k, seed).assignment;
  }, py::arg("points"), py::arg("k"), py::arg("seed"));

  m.def("build_tree_json",
        [](const Eigen::MatrixXd& snapshots, const std::string& basis_kind,
           const std::vector<int>& block_sizes, int k, std::uint64_t seed) {
          TreeBuildConfig cfg;
          cfg.k = k;
          cfg.seed = seed;
          auto tree = build_tree_datadriven(snapshots, make_leaf_basis(basis_kind, block_sizes),
                                            cfg);
          return tree_to_json(tree);
        },
        py::arg("snapshots"), py::arg("basis_kind"), py::arg("block_sizes"), py::arg("k"),
        py::arg("seed"));

  m.def("run_from_config", [](const std::string& config_json) {
    const RunSpec spec = spec_from_json(config_json);
    const ProblemArtifacts artifacts = prepare_problem(spec);
    const RefinementTree tree = build_problem_tree(
        spec, artifacts.training.snapshots, make_problem_basis(spec.problem, spec.leaf_basis));
    const RunRecord record = execute_run(spec, artifacts, tree);
    return record_to_dict(record);
  }, py::arg("config_json"));

  m.def("verify", [](std::uint64_t seed) {
    py::list out;
    for (const auto& r : verify::run_all(seed)) {
      py::dict d;
      d["name"] = r.name;
      d["passed"] = r.passed;
      d["detail"] = r.detail;
      out.append(d);
    }
    return out;
  }, py::arg("seed") = 20240817ULL);

  m.def("pareto_front", [](const std::vector<std::pair<double, double>>& points) {
    std::vector<RunRecord> records(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      records[i].rel_l2_error = points[i].first;
      records[i].mean_dim = points[i].second;
    }
    return pareto_front(records);
  }, py::arg("points"));
}

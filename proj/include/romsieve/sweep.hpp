#pragma once

#include <memory>
#include <string>
#include <vector>

#include "romsieve/benchmarks.hpp"
#include "romsieve/rom.hpp"
#include "romsieve/tree_builder.hpp"

namespace romsieve {

/// One fully-specified simulation: which benchmark, which leaf basis, fixed
/// or adaptive, reset or compress, plus the tree and ROM parameters.
struct RunSpec {
  std::string problem = "fhn";        // "fhn" | "ntl"
  std::string leaf_basis = "dct";     // "dct" | "kronecker"
  std::string mode = "adaptive";      // "adaptive" | "fixed"
  std::string strategy = "compress";  // "compress" | "reset"
  int k = 8;
  int p0 = 3;
  int train_steps = 100;
  std::uint64_t seed = 0;
  RomConfig rom;
};

/// Parse a run config from JSON text (documented in the README); missing
/// fields fall back to per-problem defaults (fhn: p0=3, q=100; ntl: p0=4,
/// q=1000).
RunSpec parse_run_spec(const std::string& json_text);

std::unique_ptr<FomProblem> make_fom(const std::string& problem, bool train_input);
std::shared_ptr<const LeafBasis> make_problem_basis(const std::string& problem,
                                                    const std::string& kind);

/// Data-driven tree for the spec's problem: FHN forces the v/w top split.
RefinementTree build_problem_tree(const RunSpec& spec, const Eigen::MatrixXd& snapshots,
                                  std::shared_ptr<const LeafBasis> basis);

struct RunRecord {
  std::string id;
  std::string method;      // "compress" | "reset" | "fixed"
  std::string leaf_basis;  // "dct" | "kronecker"
  int k = 0;
  bool grouping = false;
  int n_reset = 0;
  double tol_fom = 0.0;
  double rel_l2_error = -1.0;
  double mean_step_error = -1.0;
  double mean_dim = 0.0;
  double wall_time = 0.0;
  double drift = 0.0;
  long refinements = 0;
  int compressions = 0;
  long newton_failures = 0;
  int recoveries = 0;
  bool failed = false;
  std::string error;
};

std::string run_record_json(const RunRecord& r);
std::string run_records_csv(const std::vector<RunRecord>& records);
std::string trajectory_csv(const RunResult& result, double dt);

/// Shared per-problem artifacts so a sweep trains and integrates the FOM
/// reference once.
struct ProblemArtifacts {
  TrainingData training;
  Eigen::MatrixXd reference;  // test-scenario FOM trajectory
};

ProblemArtifacts prepare_problem(const RunSpec& spec);

/// Execute one run against prepared artifacts (tree copied internally).
RunRecord execute_run(const RunSpec& spec, const ProblemArtifacts& artifacts,
                      const RefinementTree& tree_prototype, RunResult* result_out = nullptr);

struct SweepGrid {
  std::vector<int> k{2, 4, 8, 12};
  std::vector<bool> grouping{true, false};
  std::vector<int> n_reset{10, 25, 50, 75};
  std::vector<double> tol_fom{1e-2, 5e-3, 2e-3, 1e-3, 5e-4, 2e-4, 1e-4, 5e-5};
  double tol_rom = 1e-8;
  struct Method {
    std::string leaf_basis;
    std::string strategy;
  };
  std::vector<Method> methods{{"kronecker", "reset"},
                              {"kronecker", "compress"},
                              {"dct", "reset"},
                              {"dct", "compress"}};
};

struct SweepSpec {
  std::string problem = "ntl";
  SweepGrid grid;
  std::uint64_t seed = 0;
  RunSpec base;  // problem-level defaults (p0, train_steps, rom baselines)
};

SweepSpec parse_sweep_spec(const std::string& json_text);

/// All grid combinations, parallel across runs (jobs threads), deterministic
/// record order. Individual failures are recorded and the sweep continues.
std::vector<RunRecord> run_sweep(const SweepSpec& spec, int jobs);

/// Indices of records not strictly dominated in (rel_l2_error, mean_dim);
/// failed records are never kept.
std::vector<int> pareto_front(const std::vector<RunRecord>& records);

/// Fraction of the baseline front's error levels at which the candidate
/// front reaches that error with mean dimension <= the baseline's.
double pareto_dominance_fraction(const std::vector<RunRecord>& candidate_front,
                                 const std::vector<RunRecord>& baseline_front);

}  // namespace romsieve

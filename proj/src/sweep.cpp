#include "romsieve/sweep.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <json.hpp>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

#include "romsieve/errors.hpp"

namespace romsieve {

namespace {

double parse_tol(const nlohmann::json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
    return std::stod(s);
  }
  return j.get<double>();
}

void apply_rom_json(RomConfig& rom, const nlohmann::json& j) {
  if (j.contains("tol_rom")) rom.tol_rom = parse_tol(j["tol_rom"]);
  if (j.contains("tol_fom")) rom.tol_fom = parse_tol(j["tol_fom"]);
  if (j.contains("eps_qr")) rom.eps_qr = j["eps_qr"].get<double>();
  if (j.contains("alpha")) rom.alpha = j["alpha"].get<double>();
  if (j.contains("n_reset")) rom.n_reset = j["n_reset"].get<int>();
  if (j.contains("grouping")) rom.grouping = j["grouping"].get<bool>();
  if (j.contains("eps_svd")) rom.eps_svd = j["eps_svd"].get<double>();
  if (j.contains("max_newton")) rom.max_newton = j["max_newton"].get<int>();
  if (j.contains("max_dim") && !j["max_dim"].is_null()) rom.max_dim = j["max_dim"].get<int>();
  if (j.contains("drift_threshold")) rom.drift_threshold = j["drift_threshold"].get<double>();
}

void apply_problem_defaults(RunSpec& spec) {
  if (spec.problem == "ntl") {
    spec.p0 = 4;
    spec.train_steps = 1000;
  } else if (spec.problem == "fhn") {
    spec.p0 = 3;
    spec.train_steps = 100;
  } else {
    throw invalid_input_error("unknown problem: " + spec.problem);
  }
}

std::string format_tol(double tol) {
  if (std::isinf(tol)) return "inf";
  std::ostringstream ss;
  ss << std::scientific << std::setprecision(0) << tol;
  return ss.str();
}

}  // namespace

RunSpec parse_run_spec(const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text);
  RunSpec spec;
  spec.problem = j.value("problem", std::string("fhn"));
  apply_problem_defaults(spec);
  spec.leaf_basis = j.value("leaf_basis", std::string("dct"));
  spec.mode = j.value("mode", std::string("adaptive"));
  spec.strategy = j.value("strategy", std::string("compress"));
  if (j.contains("tree")) {
    spec.k = j["tree"].value("k", spec.k);
    spec.seed = j["tree"].value("seed", spec.seed);
  }
  if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("p0")) spec.p0 = j["p0"].get<int>();
  if (j.contains("train_steps")) spec.train_steps = j["train_steps"].get<int>();
  if (j.contains("rom")) apply_rom_json(spec.rom, j["rom"]);
  spec.rom.seed = spec.seed;
  spec.rom.compression = (spec.strategy == "compress");
  if (spec.mode == "fixed") {
    spec.rom.tol_fom = std::numeric_limits<double>::infinity();
    spec.rom.compression = false;
  }
  return spec;
}

std::unique_ptr<FomProblem> make_fom(const std::string& problem, bool train_input) {
  if (problem == "fhn") return std::make_unique<FhnProblem>();
  if (problem == "ntl") {
    if (train_input) {
      // The training ramp 1 - t/50 runs over its full domain so the line
      // relaxes; 1000 integrated steps keep q at the quoted value.
      NtlParams params;
      params.dt = 0.05;
      params.t_end = 50.0;
      return std::make_unique<NtlProblem>(NtlInput::train, params);
    }
    return std::make_unique<NtlProblem>(NtlInput::test);
  }
  throw invalid_input_error("unknown problem: " + problem);
}

std::shared_ptr<const LeafBasis> make_problem_basis(const std::string& problem,
                                                    const std::string& kind) {
  if (problem == "fhn") {
    const int half = FhnParams{}.grid_points;
    return make_leaf_basis(kind, {half, half});
  }
  if (problem == "ntl") {
    return make_leaf_basis(kind, {NtlParams{}.nodes});
  }
  throw invalid_input_error("unknown problem: " + problem);
}

RefinementTree build_problem_tree(const RunSpec& spec, const Eigen::MatrixXd& snapshots,
                                  std::shared_ptr<const LeafBasis> basis) {
  TreeBuildConfig cfg;
  cfg.k = spec.k;
  cfg.seed = spec.seed;
  if (spec.problem == "fhn") {
    return build_tree_composite_fhn(snapshots, std::move(basis), cfg);
  }
  return build_tree_datadriven(snapshots, std::move(basis), cfg);
}

ProblemArtifacts prepare_problem(const RunSpec& spec) {
  ProblemArtifacts out;
  auto train = make_fom(spec.problem, /*train_input=*/true);
  out.training = generate_initial_basis(*train, spec.train_steps, spec.p0);
  auto test = make_fom(spec.problem, /*train_input=*/false);
  out.reference = run_fom(*test);
  return out;
}

RunRecord execute_run(const RunSpec& spec, const ProblemArtifacts& artifacts,
                      const RefinementTree& tree_prototype, RunResult* result_out) {
  RunRecord rec;
  {
    std::ostringstream id;
    id << spec.problem << "-" << spec.leaf_basis << "-"
       << (spec.mode == "fixed" ? "fixed" : spec.strategy) << "-k" << spec.k << "-g"
       << (spec.rom.grouping ? 1 : 0) << "-n" << spec.rom.n_reset << "-tol"
       << format_tol(spec.rom.tol_fom);
    rec.id = id.str();
  }
  rec.method = (spec.mode == "fixed") ? "fixed" : spec.strategy;
  rec.leaf_basis = spec.leaf_basis;
  rec.k = spec.k;
  rec.grouping = spec.rom.grouping;
  rec.n_reset = spec.rom.n_reset;
  rec.tol_fom = spec.rom.tol_fom;

  const auto start = std::chrono::steady_clock::now();
  try {
    auto fom = make_fom(spec.problem, /*train_input=*/false);
    RefinementTree tree = tree_prototype;  // runs own their tree instance
    const RunResult result =
        run_simulation(*fom, tree, artifacts.training.phi0, spec.rom, artifacts.reference);
    rec.rel_l2_error = result.rel_l2_error;
    rec.mean_step_error = result.mean_step_error;
    rec.mean_dim = result.mean_dim;
    rec.drift = result.max_drift;
    rec.refinements = result.total_refinements;
    rec.compressions = result.compressions;
    rec.newton_failures = result.newton_failures;
    rec.recoveries = result.recoveries;
    if (result_out) *result_out = result;
  } catch (const std::exception& e) {
    rec.failed = true;
    rec.error = e.what();
  }
  rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

std::string run_record_json(const RunRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["method"] = r.method;
  j["leaf_basis"] = r.leaf_basis;
  j["k"] = r.k;
  j["grouping"] = r.grouping;
  j["n_reset"] = r.n_reset;
  j["tol_fom"] = std::isinf(r.tol_fom) ? 1e300 : r.tol_fom;
  j["rel_l2_error"] = r.rel_l2_error;
  j["mean_step_error"] = r.mean_step_error;
  j["mean_dim"] = r.mean_dim;
  j["wall_time"] = r.wall_time;
  j["drift"] = r.drift;
  j["refinements"] = r.refinements;
  j["compressions"] = r.compressions;
  j["newton_failures"] = r.newton_failures;
  j["recoveries"] = r.recoveries;
  j["failed"] = r.failed;
  if (r.failed) j["error"] = r.error;
  return j.dump(2) + "\n";
}

std::string run_records_csv(const std::vector<RunRecord>& records) {
  std::ostringstream ss;
  ss << "id,method,leaf_basis,k,grouping,n_reset,tol_fom,rel_l2_error,mean_dim,wall_time,drift\n";
  ss << std::setprecision(12);
  for (const auto& r : records) {
    ss << r.id << "," << r.method << "," << r.leaf_basis << "," << r.k << ","
       << (r.grouping ? "true" : "false") << "," << r.n_reset << "," << r.tol_fom << ","
       << r.rel_l2_error << "," << r.mean_dim << "," << r.wall_time << "," << r.drift << "\n";
  }
  return ss.str();
}

std::string trajectory_csv(const RunResult& result, double dt) {
  std::ostringstream ss;
  ss << "t,dim,residual_norm\n";
  ss << std::setprecision(12);
  for (std::size_t k = 0; k < result.dims.size(); ++k) {
    ss << (k + 1) * dt << "," << result.dims[k] << "," << result.residuals[k] << "\n";
  }
  return ss.str();
}

SweepSpec parse_sweep_spec(const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text);
  SweepSpec spec;
  spec.problem = j.value("problem", std::string("ntl"));
  spec.base.problem = spec.problem;
  apply_problem_defaults(spec.base);
  if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
  spec.base.seed = spec.seed;
  if (j.contains("p0")) spec.base.p0 = j["p0"].get<int>();
  if (j.contains("train_steps")) spec.base.train_steps = j["train_steps"].get<int>();
  if (j.contains("rom")) apply_rom_json(spec.base.rom, j["rom"]);
  if (j.contains("grid")) {
    const auto& g = j["grid"];
    if (g.contains("k")) spec.grid.k = g["k"].get<std::vector<int>>();
    if (g.contains("grouping")) spec.grid.grouping = g["grouping"].get<std::vector<bool>>();
    if (g.contains("n_reset")) spec.grid.n_reset = g["n_reset"].get<std::vector<int>>();
    if (g.contains("tol_fom")) spec.grid.tol_fom = g["tol_fom"].get<std::vector<double>>();
    if (g.contains("tol_rom")) spec.grid.tol_rom = g["tol_rom"].get<double>();
    if (g.contains("methods")) {
      spec.grid.methods.clear();
      for (const auto& m : g["methods"]) {
        spec.grid.methods.push_back(
            {m.at("leaf_basis").get<std::string>(), m.at("strategy").get<std::string>()});
      }
    }
  }
  return spec;
}

std::vector<RunRecord> run_sweep(const SweepSpec& spec, int jobs) {
  const ProblemArtifacts artifacts = prepare_problem(spec.base);

  // Trees depend only on (leaf_basis, k); build each prototype once.
  std::map<std::pair<std::string, int>, RefinementTree> trees;
  for (const auto& method : spec.grid.methods) {
    for (int k : spec.grid.k) {
      const auto key = std::make_pair(method.leaf_basis, k);
      if (trees.count(key)) continue;
      RunSpec tspec = spec.base;
      tspec.leaf_basis = method.leaf_basis;
      tspec.k = k;
      trees.emplace(key, build_problem_tree(tspec, artifacts.training.snapshots,
                                            make_problem_basis(spec.problem,
                                                               method.leaf_basis)));
    }
  }

  std::vector<RunSpec> runs;
  for (const auto& method : spec.grid.methods) {
    for (int k : spec.grid.k) {
      for (bool grouping : spec.grid.grouping) {
        for (int n_reset : spec.grid.n_reset) {
          for (double tol : spec.grid.tol_fom) {
            RunSpec r = spec.base;
            r.leaf_basis = method.leaf_basis;
            r.strategy = method.strategy;
            r.k = k;
            r.rom.grouping = grouping;
            r.rom.n_reset = n_reset;
            r.rom.tol_fom = tol;
            r.rom.tol_rom = spec.grid.tol_rom;
            r.rom.compression = (method.strategy == "compress");
            runs.push_back(std::move(r));
          }
        }
      }
    }
  }

  std::vector<RunRecord> records(runs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= runs.size()) return;
      const auto key = std::make_pair(runs[i].leaf_basis, runs[i].k);
      records[i] = execute_run(runs[i], artifacts, trees.at(key));
    }
  };
  jobs = std::max(1, jobs);
  std::vector<std::thread> pool;
  for (int t = 0; t < jobs - 1; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return records;
}

std::vector<int> pareto_front(const std::vector<RunRecord>& records) {
  std::vector<int> kept;
  for (int i = 0; i < static_cast<int>(records.size()); ++i) {
    if (records[i].failed) continue;
    bool dominated = false;
    for (int j = 0; j < static_cast<int>(records.size()) && !dominated; ++j) {
      if (j == i || records[j].failed) continue;
      const bool no_worse = records[j].rel_l2_error <= records[i].rel_l2_error &&
                            records[j].mean_dim <= records[i].mean_dim;
      const bool better = records[j].rel_l2_error < records[i].rel_l2_error ||
                          records[j].mean_dim < records[i].mean_dim;
      dominated = no_worse && better;
    }
    if (!dominated) kept.push_back(i);
  }
  return kept;
}

double pareto_dominance_fraction(const std::vector<RunRecord>& candidate_front,
                                 const std::vector<RunRecord>& baseline_front) {
  if (baseline_front.empty()) return 1.0;
  int dominated_levels = 0;
  for (const auto& b : baseline_front) {
    double best_baseline = std::numeric_limits<double>::infinity();
    for (const auto& other : baseline_front) {
      if (other.rel_l2_error <= b.rel_l2_error) {
        best_baseline = std::min(best_baseline, other.mean_dim);
      }
    }
    double best_candidate = std::numeric_limits<double>::infinity();
    for (const auto& c : candidate_front) {
      if (c.rel_l2_error <= b.rel_l2_error) best_candidate = std::min(best_candidate, c.mean_dim);
    }
    if (best_candidate <= best_baseline) ++dominated_levels;
  }
  return static_cast<double>(dominated_levels) / baseline_front.size();
}

}  // namespace romsieve

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

#include "romsieve/benchmarks.hpp"
#include "romsieve/io.hpp"
#include "romsieve/sweep.hpp"
#include "romsieve/verify.hpp"

namespace {

namespace fs = std::filesystem;
using namespace romsieve;

std::optional<std::uint64_t> env_seed() {
  if (const char* s = std::getenv("ROMSIEVE_SEED")) return std::stoull(s);
  return std::nullopt;
}

int env_jobs(int fallback) {
  if (const char* s = std::getenv("ROMSIEVE_JOBS")) return std::stoi(s);
  return fallback;
}

RunSpec load_spec(const std::string& config_path, std::optional<std::uint64_t> seed_flag) {
  RunSpec spec = parse_run_spec(read_text_file(config_path));
  if (auto s = env_seed()) spec.seed = *s;
  if (seed_flag) spec.seed = *seed_flag;
  spec.rom.seed = spec.seed;
  return spec;
}

TrainingData load_or_train(const RunSpec& spec, const std::string& train_dir) {
  if (!train_dir.empty()) {
    TrainingData data;
    data.phi0 = read_matrix(train_dir + "/phi0.bin");
    data.snapshots = read_matrix(train_dir + "/snapshots.bin");
    return data;
  }
  auto fom = make_fom(spec.problem, /*train_input=*/true);
  return generate_initial_basis(*fom, spec.train_steps, spec.p0);
}

int cmd_build_tree(const std::string& config_path, const std::string& out_path,
                   const std::string& train_dir, std::optional<std::uint64_t> seed_flag) {
  const RunSpec spec = load_spec(config_path, seed_flag);
  const TrainingData data = load_or_train(spec, train_dir);
  auto basis = make_problem_basis(spec.problem, spec.leaf_basis);
  const RefinementTree tree = build_problem_tree(spec, data.snapshots, basis);
  write_text_file(out_path, tree_to_json(tree));
  std::cout << "wrote " << out_path << " (" << tree.num_vertices() << " vertices)\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed_flag) {
  const RunSpec spec = load_spec(config_path, seed_flag);
  auto fom = make_fom(spec.problem, /*train_input=*/true);
  const TrainingData data = generate_initial_basis(*fom, spec.train_steps, spec.p0);
  fs::create_directories(out_dir);
  write_matrix(out_dir + "/phi0.bin", data.phi0);
  write_matrix(out_dir + "/snapshots.bin", data.snapshots);
  write_matrix(out_dir + "/singular_values.bin", data.singular_values);
  std::cout << "wrote " << out_dir << "/{phi0,snapshots,singular_values}.bin (p0=" << spec.p0
            << ", q=" << spec.train_steps << ")\n";
  return 0;
}

int cmd_run(const std::string& config_path, const std::string& out_path,
            const std::string& tree_path, const std::string& train_dir,
            const std::string& trajectory_path, std::optional<std::uint64_t> seed_flag) {
  const RunSpec spec = load_spec(config_path, seed_flag);
  ProblemArtifacts artifacts;
  artifacts.training = load_or_train(spec, train_dir);
  {
    auto test = make_fom(spec.problem, /*train_input=*/false);
    artifacts.reference = run_fom(*test);
  }
  RefinementTree tree = tree_path.empty()
                            ? build_problem_tree(spec, artifacts.training.snapshots,
                                                 make_problem_basis(spec.problem, spec.leaf_basis))
                            : tree_from_json(read_text_file(tree_path));
  RunResult result;
  const RunRecord record = execute_run(spec, artifacts, tree, &result);
  write_text_file(out_path, run_record_json(record));
  if (!trajectory_path.empty() && !record.failed) {
    const double dt = spec.problem == "fhn" ? FhnParams{}.dt : NtlParams{}.dt;
    write_text_file(trajectory_path, trajectory_csv(result, dt));
  }
  std::cout << run_record_json(record);
  return record.failed ? 1 : 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out_path,
              const std::string& pareto_path, int jobs, std::optional<std::uint64_t> seed_flag) {
  SweepSpec spec = parse_sweep_spec(read_text_file(config_path));
  if (auto s = env_seed()) spec.seed = *s;
  if (seed_flag) spec.seed = *seed_flag;
  spec.base.seed = spec.seed;
  const auto records = run_sweep(spec, env_jobs(jobs));
  write_text_file(out_path, run_records_csv(records));
  const auto front = pareto_front(records);
  std::vector<RunRecord> front_records;
  for (int i : front) front_records.push_back(records[i]);
  const std::string pareto_out = pareto_path.empty() ? out_path + ".pareto.csv" : pareto_path;
  write_text_file(pareto_out, run_records_csv(front_records));
  int failures = 0;
  for (const auto& r : records) failures += r.failed ? 1 : 0;
  std::cout << records.size() << " runs (" << failures << " failed), " << front.size()
            << " Pareto-dominant; wrote " << out_path << " and " << pareto_out << "\n";
  return 0;
}

int cmd_verify(std::optional<std::uint64_t> seed_flag) {
  std::uint64_t seed = 20240817;
  if (auto s = env_seed()) seed = *s;
  if (seed_flag) seed = *seed_flag;
  const auto results = verify::run_all(seed);
  bool all_ok = true;
  for (const auto& r : results) {
    std::cout << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << " — " << r.detail << "\n";
    all_ok = all_ok && r.passed;
  }
  std::cout << (all_ok ? "verification passed\n" : "verification FAILED\n");
  return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online adaptive basis refinement and compression for reduced-order models"};
  app.require_subcommand(1);

  std::string config, out, train_dir, tree_path, trajectory, pareto;
  int jobs = 1;
  std::optional<std::uint64_t> seed;

  auto add_seed = [&](CLI::App* cmd) { cmd->add_option("--seed", seed, "override the seed"); };

  auto* build = app.add_subcommand("build-tree", "build a refinement tree from training data");
  build->add_option("--config", config, "run config (JSON)")->required();
  build->add_option("--out", out, "output tree JSON")->required();
  build->add_option("--train", train_dir, "directory with phi0.bin/snapshots.bin");
  add_seed(build);

  auto* train = app.add_subcommand("train", "integrate the training FOM and store POD data");
  train->add_option("--config", config, "run config (JSON)")->required();
  train->add_option("--out", out, "output directory")->required();
  add_seed(train);

  auto* run = app.add_subcommand("run", "run one adaptive (or fixed-basis) simulation");
  run->add_option("--config", config, "run config (JSON)")->required();
  run->add_option("--out", out, "output run-record JSON")->required();
  run->add_option("--tree", tree_path, "tree JSON (built on the fly when omitted)");
  run->add_option("--train", train_dir, "directory with phi0.bin/snapshots.bin");
  run->add_option("--trajectory", trajectory, "per-step CSV output");
  add_seed(run);

  auto* sweep = app.add_subcommand("sweep", "hyperparameter sweep with Pareto extraction");
  sweep->add_option("--config", config, "sweep config (JSON)")->required();
  sweep->add_option("--out", out, "results CSV")->required();
  sweep->add_option("--pareto", pareto, "Pareto subset CSV (default: <out>.pareto.csv)");
  sweep->add_option("--jobs", jobs, "parallel runs");
  add_seed(sweep);

  auto* verify_cmd = app.add_subcommand("verify", "run the oracle verification suites");
  add_seed(verify_cmd);

  CLI11_PARSE(app, argc, argv);

  try {
    if (build->parsed()) return cmd_build_tree(config, out, train_dir, seed);
    if (train->parsed()) return cmd_train(config, out, seed);
    if (run->parsed()) return cmd_run(config, out, tree_path, train_dir, trajectory, seed);
    if (sweep->parsed()) return cmd_sweep(config, out, pareto, jobs, seed);
    if (verify_cmd->parsed()) return cmd_verify(seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

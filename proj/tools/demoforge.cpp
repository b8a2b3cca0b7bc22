// demoforge: synthesize robot demonstration datasets from a tracked object
// trajectory and a robot description.

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "demoforge/pipeline.hpp"
#include "demoforge/task.hpp"

namespace {

using namespace demoforge;

int run_validate(const std::string& config_path) {
  try {
    const pipeline::TaskSpec spec = pipeline::load_task_config(config_path);
    const pipeline::TaskContext ctx = pipeline::prepare_task(spec);
    std::cout << "# resolved config (defaults filled)\n" << pipeline::resolved_toml(spec);
    std::cout << "# model: " << ctx.model.links.size() << " links, " << ctx.model.dof()
              << " actuated joints, root '" << ctx.model.root << "'\n";
    for (const auto& w : ctx.model.warnings) std::cout << "# urdf warning: " << w << "\n";
    for (std::size_t a = 0; a < ctx.chains.size(); ++a) {
      std::cout << "# arm '" << ctx.chains[a].frame << "': " << ctx.chains[a].slots.size()
                << " chain joints, grasps part '" << ctx.arm_part[a] << "' ("
                << ctx.candidates.at(ctx.arm_part[a]).size() << " grasp candidates)\n";
    }
    std::cout << "# demo trajectory: " << ctx.demo.size() << " frames at dt=" << spec.solver.dt << " s\n";
    std::cout << "ok\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "validation failed: " << e.what() << "\n";
    return 2;
  }
}

int run_generate(const std::string& config_path, const std::string& out_dir, int n_override, int workers,
                 std::int64_t seed_override, bool no_interp, bool only_success) {
  try {
    pipeline::TaskSpec spec = pipeline::load_task_config(config_path);
    if (n_override >= 0) spec.n_demos = n_override;
    if (seed_override >= 0) spec.randomization.master_seed = static_cast<std::uint64_t>(seed_override);
    if (no_interp) spec.interpolate = false;

    const pipeline::TaskContext ctx = pipeline::prepare_task(spec);
    const pipeline::BatchStats stats = pipeline::generate_batch(ctx, out_dir, workers, only_success);

    std::cout << "attempted " << stats.attempted << ", succeeded " << stats.succeeded << " ("
              << stats.demos_per_min << " demos/min, " << workers << " worker" << (workers == 1 ? "" : "s")
              << ", " << stats.wall_time_s << " s)\n";
    for (const auto& [reason, count] : stats.failure_counts) {
      std::cout << "  " << reason << ": " << count << "\n";
    }
    const double rate = stats.attempted > 0 ? static_cast<double>(stats.succeeded) / stats.attempted : 1.0;
    if (spec.n_demos > 0 && (stats.succeeded < spec.n_demos || rate < spec.min_success_rate)) {
      std::cerr << "success rate " << rate << " below the configured floor " << spec.min_success_rate << "\n";
      return 3;
    }
    return 0;
  } catch (const Error& e) {
    std::cerr << "generation failed: " << e.what() << "\n";
    return e.kind() == ErrorKind::IoError ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "generation failed: " << e.what() << "\n";
    return 1;
  }
}

int run_grasps(const std::string& config_path, int top_k) {
  try {
    const pipeline::TaskSpec spec = pipeline::load_task_config(config_path);
    const pipeline::TaskContext ctx = pipeline::prepare_task(spec);
    for (const auto& [part, candidates] : ctx.candidates) {
      std::cout << "part '" << part << "': " << candidates.size() << " candidates\n";
      std::printf("  %-4s %-8s %-8s %s\n", "#", "quality", "width_m", "grasp pose [x y z qw qx qy qz]");
      const int n = std::min<int>(top_k, static_cast<int>(candidates.size()));
      for (int i = 0; i < n; ++i) {
        const auto& c = candidates[i];
        const auto a = c.grasp_pose.to_array();
        std::printf("  %-4d %-8.4f %-8.4f [%.4f %.4f %.4f %.4f %.4f %.4f %.4f]\n", i, c.quality, c.width, a[0],
                    a[1], a[2], a[3], a[4], a[5], a[6]);
      }
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "grasp inspection failed: " << e.what() << "\n";
    return 2;
  }
}

int run_bench(const std::string& config_path, const std::string& workers_list, int n_override) {
  try {
    pipeline::TaskSpec spec = pipeline::load_task_config(config_path);
    if (n_override >= 0) spec.n_demos = n_override;
    const pipeline::TaskContext ctx = pipeline::prepare_task(spec);

    std::vector<int> workers;
    std::stringstream ss(workers_list);
    for (std::string tok; std::getline(ss, tok, ',');) workers.push_back(std::stoi(tok));
    if (workers.empty()) workers = {1};

    std::printf("%-8s %-10s %-12s %-10s\n", "workers", "succeeded", "demos/min", "speedup");
    double base_rate = 0.0;
    for (int w : workers) {
      const std::string out_dir = "/tmp/demoforge_bench_" + std::to_string(w);
      std::filesystem::remove_all(out_dir);
      const pipeline::BatchStats stats = pipeline::generate_batch(ctx, out_dir, w);
      if (base_rate == 0.0) base_rate = stats.demos_per_min;
      std::printf("%-8d %-10d %-12.1f %-10.2f\n", w, stats.succeeded, stats.demos_per_min,
                  base_rate > 0.0 ? stats.demos_per_min / base_rate : 0.0);
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "bench failed: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"demoforge: kinematic robot demonstration synthesis"};
  app.require_subcommand(0, 1);

  bool print_defaults = false;
  app.add_flag("--print-defaults", print_defaults, "print the default task config as TOML and exit");

  std::string config_path, out_dir = "dataset";
  int n_override = -1, workers = 1, top_k = 10;
  std::int64_t seed_override = -1;
  bool no_interp = false, only_success = false;
  std::string workers_list = "1,2,4";

  auto* validate = app.add_subcommand("validate", "parse a task config and report the resolved settings");
  validate->add_option("config", config_path, "task config (TOML)")->required();

  auto* generate = app.add_subcommand("generate", "synthesize a demonstration dataset");
  generate->add_option("config", config_path, "task config (TOML)")->required();
  generate->add_option("--out", out_dir, "output dataset directory");
  generate->add_option("--n", n_override, "override n_demos");
  generate->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
  generate->add_option("--seed", seed_override, "override the master seed");
  generate->add_flag("--no-interp", no_interp, "disable trajectory interpolation (replay the demo track)");
  generate->add_flag("--only-success", only_success, "write only success records");

  auto* grasps = app.add_subcommand("grasps", "inspect sampled grasp candidates");
  grasps->add_option("config", config_path, "task config (TOML)")->required();
  grasps->add_option("--top", top_k, "how many candidates to print");

  auto* bench = app.add_subcommand("bench", "measure generation throughput against worker count");
  bench->add_option("config", config_path, "task config (TOML)")->required();
  bench->add_option("--workers", workers_list, "comma-separated worker counts");
  bench->add_option("--n", n_override, "override n_demos");

  CLI11_PARSE(app, argc, argv);

  if (print_defaults) {
    std::cout << demoforge::pipeline::default_task_toml();
    return 0;
  }
  if (validate->parsed()) return run_validate(config_path);
  if (generate->parsed()) return run_generate(config_path, out_dir, n_override, workers, seed_override, no_interp, only_success);
  if (grasps->parsed()) return run_grasps(config_path, top_k);
  if (bench->parsed()) return run_bench(config_path, workers_list, n_override);
  std::cout << app.help();
  return 0;
}

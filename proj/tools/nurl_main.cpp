// SPDX-License-Identifier: Apache-2.0

#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nurl/commands.hpp"
#include "nurl/config.hpp"
#include "nurl/error.hpp"

namespace fs = std::filesystem;
using namespace nurl;

namespace {

ExperimentConfig resolve_config(const std::string& path, const std::optional<std::uint64_t>& seed,
                                const std::optional<int>& workers) {
  ExperimentConfig cfg = path.empty() ? ExperimentConfig{} : load_config(path);
  apply_env_overrides(cfg);
  if (seed) cfg.seed = *seed;
  if (workers) cfg.workers = *workers;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hint-augmented group policy optimisation on synthetic lock tasks"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  app.add_option("--config", config_path, "experiment config JSON")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "base seed (overrides config and NURL_SEED)");
  app.add_option("--workers", workers, "rollout worker threads")->check(CLI::PositiveNumber);

  std::string out_file;
  auto* gen = app.add_subcommand("gen-tasks", "generate a task set");
  gen->add_option("--out", out_file, "task JSON path")->required();

  std::string tasks_file, hints_file;
  auto* forge = app.add_subcommand("forge-hints", "build the hint bank for a task set");
  forge->add_option("--tasks", tasks_file)->required()->check(CLI::ExistingFile);
  forge->add_option("--out", out_file, "hint JSON path")->required();

  cli::TrainRequest treq;
  std::string mode = "nurl", out_dir, resume;
  auto* tr = app.add_subcommand("train", "run two-stage training");
  tr->add_option("--tasks", tasks_file)->required()->check(CLI::ExistingFile);
  tr->add_option("--hints", hints_file)->check(CLI::ExistingFile);
  tr->add_option("--mode", mode, "grpo | nurl | ablation");
  tr->add_option("--two-stage", treq.two_stage, "ablation: plain stage before hints");
  tr->add_option("--trigger", treq.trigger, "ablation: hint only all-fail groups");
  tr->add_option("--resume", resume, "trainer checkpoint")->check(CLI::ExistingFile);
  tr->add_option("--out", out_dir, "run directory (default: config output_dir)");

  cli::EvalRequest ereq;
  std::string checkpoint;
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint without hints");
  ev->add_option("--tasks", tasks_file)->required()->check(CLI::ExistingFile);
  ev->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  ev->add_flag("--pass-at-k", ereq.pass_at_k, "report pass@k over the config k grid");
  ev->add_flag("--sc", ereq.sc, "report self-consistency accuracy");
  ev->add_option("--name", ereq.name, "output file stem");
  ev->add_option("--out", out_dir, "output directory (default: config output_dir)");

  std::vector<std::string> runs;
  auto* rep = app.add_subcommand("report", "tables from finished runs");
  rep->add_option("runs", runs, "run directories")->required()->check(CLI::ExistingDirectory);
  rep->add_option("--out", out_dir, "table directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const ExperimentConfig cfg = resolve_config(config_path, seed, workers);
    const fs::path out = out_dir.empty() ? fs::path(cfg.output_dir) : fs::path(out_dir);
    if (*gen) {
      cli::cmd_gen_tasks(cfg, out_file, std::cout);
    } else if (*forge) {
      cli::cmd_forge_hints(cfg, tasks_file, out_file, std::cout);
    } else if (*tr) {
      treq.mode = cli::train_mode_from_string(mode);
      treq.tasks_file = tasks_file;
      treq.hints_file = hints_file;
      treq.out_dir = out;
      if (!resume.empty()) treq.resume = resume;
      cli::cmd_train(cfg, treq, std::cout);
    } else if (*ev) {
      ereq.tasks_file = tasks_file;
      ereq.checkpoint = checkpoint;
      ereq.out_dir = out;
      cli::cmd_eval(cfg, ereq, std::cout);
    } else if (*rep) {
      std::vector<fs::path> dirs(runs.begin(), runs.end());
      cli::cmd_report(dirs, out, std::cout);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const LookupError& e) {
    std::cerr << "lookup error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "aborted: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}

// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "nurl/config.hpp"

namespace nurl::cli {

namespace fs = std::filesystem;

/// Writes the TaskSet JSON and prints per-class counts.
void cmd_gen_tasks(const ExperimentConfig& cfg, const fs::path& out_file, std::ostream& log);

/// Writes the HintBank JSON for every task in `tasks_file`.
void cmd_forge_hints(const ExperimentConfig& cfg, const fs::path& tasks_file,
                     const fs::path& out_file, std::ostream& log);

enum class TrainMode { Grpo, Nurl, Ablation };
TrainMode train_mode_from_string(const std::string& s);
std::string to_string(TrainMode m);

struct TrainRequest {
  TrainMode mode = TrainMode::Nurl;
  bool two_stage = true;  // ablation only
  bool trigger = true;    // ablation only
  fs::path tasks_file;
  fs::path hints_file;    // may be empty for grpo
  fs::path out_dir;
  std::optional<fs::path> resume;
};

/// Stage configs that a mode implies, derived from the config's stage blocks.
///  grpo:     hints off in both stages; stage 2 keeps the stage-1 group size.
///  nurl:     stage 1 plain GRPO, stage 2 hints with the difficulty trigger.
///  ablation: two_stage decides whether stage 1 already uses hints;
///            trigger decides whether hints need an all-fail group.
std::pair<StageConfig, StageConfig> stages_for(const ExperimentConfig& cfg,
                                               const TrainRequest& req);

/// Runs training and writes train.jsonl, triggers.jsonl, checkpoints/ and
/// summary.json into req.out_dir. Returns the summary document.
nlohmann::ordered_json cmd_train(const ExperimentConfig& cfg, const TrainRequest& req,
                                 std::ostream& log);

struct EvalRequest {
  fs::path tasks_file;
  fs::path checkpoint;
  fs::path out_dir;
  std::string name = "eval_report";
  bool pass_at_k = false;
  bool sc = false;
};

/// Writes <name>.json and <name>.csv. Returns the report JSON.
nlohmann::ordered_json cmd_eval(const ExperimentConfig& cfg, const EvalRequest& req,
                                std::ostream& log);

/// Builds hint_types.csv, ablation.csv and solvable_fraction.csv from
/// finished run directories (each holding summary.json and train.jsonl).
void cmd_report(const std::vector<fs::path>& run_dirs, const fs::path& out_dir,
                std::ostream& log);

}  // namespace nurl::cli

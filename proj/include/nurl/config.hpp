// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "nurl/eval.hpp"
#include "nurl/policy.hpp"
#include "nurl/task_env.hpp"
#include "nurl/trainer.hpp"

namespace nurl {

struct EnvConfig {
  ClassCounts n_per_class{10, 10, 10};
  int length = 8;
  int alphabet_size = 16;
  std::optional<std::uint64_t> seed;
};

struct HintConfig {
  double corruption_rate = 0.2;
  int distractor_count = 1;
  std::optional<std::uint64_t> seed;
};

struct PolicyConfig {
  InitBias init_bias;
  std::optional<std::uint64_t> seed;
};

struct RunConfig {
  int checkpoint_every = 0;
  int probe_group_size = 8;
  std::optional<std::uint64_t> seed;
};

/// Which tasks `eval` scores: a split, optionally narrowed to one class.
struct EvalSelection {
  std::string split = "validation";  // train | validation | all
  std::optional<Difficulty> difficulty;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  int workers = 1;
  EnvConfig env;
  HintConfig hints;
  PolicyConfig policy;
  StageConfig stage1 = default_grpo_stage();
  StageConfig stage2 = default_nurl_stage();
  RunConfig train;
  EvalConfig eval;
  EvalSelection eval_select;

  // Per-module seeds: explicit value if given, otherwise derived from the
  // global seed with a fixed label ("env", "hints", "policy", "train").
  std::uint64_t env_seed() const;
  std::uint64_t hint_seed() const;
  std::uint64_t policy_seed() const;
  std::uint64_t train_seed() const;

  void validate() const;
};

/// Strict parse: unknown keys and out-of-range values throw ConfigError
/// naming the offending field.
ExperimentConfig parse_config(const nlohmann::ordered_json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Applies NURL_SEED, NURL_WORKERS and NURL_OUT when set.
void apply_env_overrides(ExperimentConfig& cfg);

nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg);
nlohmann::ordered_json stage_to_json(const StageConfig& s);

}  // namespace nurl

// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nurl/grpo.hpp"
#include "nurl/hint_forge.hpp"
#include "nurl/policy.hpp"
#include "nurl/task_env.hpp"

namespace nurl {

struct StageConfig {
  int group_size = 8;
  double temperature = 1.0;
  ClipConfig clip;
  int batch_size = 32;
  int max_steps = 200;
  bool use_hints = false;
  bool difficulty_trigger = true;
  HintType hint_type = HintType::AbstractCue;
  int patience = 10;
  bool stop_on_convergence = true;
  /// Optimizer updates per rollout batch. With more than one, later updates
  /// run off-policy and the ratio clip becomes active.
  int updates_per_step = 1;

  void validate() const;
};

/// Stage-1 defaults: plain GRPO with 16 rollouts.
StageConfig default_grpo_stage();
/// Stage-2 defaults: triggered hints with 8 rollouts.
StageConfig default_nurl_stage();

struct TriggerEvent {
  int stage = 0;
  int step = 0;
  int task_id = 0;
  int hint_variant = 0;
  int pre_pass_count = 0;
  int post_pass_count = 0;
  int hinted_rollouts = 0;
};

struct TrainRecord {
  int stage = 0;
  int step = 0;
  std::uint64_t version = 0;
  double mean_reward = 0.0;
  double solvable_fraction_pre_hint = 0.0;
  double solvable_fraction_post_hint = 0.0;
  int trigger_count = 0;
  double clip_fraction = 0.0;
  double degenerate_group_fraction = 0.0;
  double validation_pass1 = 0.0;
  // diagnostics
  int groups = 0;
  int group_size = 0;
  int rollouts_sampled = 0;
  int hinted_rollouts = 0;
  double objective = 0.0;
  double grad_norm = 0.0;
  double gamma = 0.0;
  double beta = 0.0;
  double train_pass1 = 0.0;
};

/// Samples the group for one task.
///
/// G hint-free rollouts are drawn and verified. When the stage uses hints
/// and either the trigger is off or all G failed, one hint variant is drawn,
/// the first batch is discarded, and G-1 hint-conditioned rollouts plus one
/// hint-free rollout are drawn instead (the hint-free one last).
RolloutGroup run_group(const Task& task, const PolicyParams& snapshot, const StageConfig& stage,
                       const HintBank* bank, Rng& rng);

/// True iff neither series has exceeded its running maximum during the last
/// `patience` entries. Each series keeps its own counter.
bool detect_convergence(std::span<const std::pair<double, double>> history, int patience);

struct FilterResult {
  TaskSet tasks;  // retained train tasks plus every validation task
  int retained = 0;
  int dropped = 0;
};

/// Drops train tasks whose `probe_group_size` hint-free probes are all
/// correct. Validation tasks are kept as-is. Task ids are preserved.
FilterResult filter_easy(const TaskSet& tasks, const PolicyParams& params, int probe_group_size,
                         double temperature, std::uint64_t seed, int workers = 1);

/// Mean exact hint-free pass@1 over the given tasks.
double expected_pass1(const PolicyParams& params, std::span<const Task* const> tasks,
                      double temperature);

struct TrainOptions {
  std::uint64_t seed = 0;
  int workers = 1;
  double validation_temperature = 0.7;
  int probe_group_size = 8;
  double probe_temperature = 1.0;
  int checkpoint_every = 0;  // 0: only at stage boundaries
};

/// Everything needed to continue an interrupted run.
struct TrainerState {
  PolicyParams params;
  AdamState adam;
  int stage = 1;           // stage currently running (3 = finished)
  int step = 0;            // global steps completed
  int stage_steps = 0;     // steps completed in the current stage
  int stage1_steps = 0;
  std::vector<std::pair<double, double>> history;  // current stage
  std::vector<int> stage2_train_ids;               // set once stage 1 ends
  int filter_retained = 0;
  int filter_dropped = 0;
};

class TrainObserver {
 public:
  virtual ~TrainObserver() = default;
  virtual void on_record(const TrainRecord&) {}
  virtual void on_trigger(const TriggerEvent&) {}
  virtual void on_checkpoint(const TrainerState&, std::string_view /*label*/) {}
  virtual void on_warning(std::string_view) {}
};

struct TrainResult {
  PolicyParams params;
  AdamState adam;
  std::vector<TrainRecord> records;
  std::vector<TriggerEvent> triggers;
  int stage1_steps = 0;
  int stage2_steps = 0;
  int filter_retained = 0;
  int filter_dropped = 0;
  std::vector<std::string> warnings;
};

/// Two-stage training: stage 1 until convergence or max_steps, easy-task
/// filtering with the stage-1 checkpoint, then stage 2 on the retained
/// tasks. Every step snapshots the policy, samples one group per batch task,
/// and applies `updates_per_step` Adam steps on the batch-mean surrogate.
/// Throws NumericError (after an "abort" checkpoint) on non-finite values.
TrainResult train(const TaskSet& tasks, const HintBank* bank, const StageConfig& stage1,
                  const StageConfig& stage2, const PolicyParams& initial,
                  const TrainOptions& options, TrainObserver* observer = nullptr,
                  const TrainerState* resume = nullptr);

}  // namespace nurl

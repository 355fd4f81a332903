// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "nurl/policy.hpp"

namespace nurl {

struct RewardStats {
  std::vector<double> rewards;
  double mean = 0.0;
  double stddev = 0.0;  // population form, divisor G
};

RewardStats reward_stats(std::span<const int> rewards);

struct GroupAdvantages {
  std::vector<double> values;
  bool degenerate = false;  // sigma == 0, all values 0
};

/// (r_i - mean) / std within the group; all zeros when std == 0.
/// Throws ConfigError when G < 2.
GroupAdvantages group_advantages(std::span<const int> rewards);

struct ClipConfig {
  double eps_low = 0.2;
  double eps_high = 0.28;
  double learning_rate = 0.05;

  void validate() const;
};

/// The G rollouts for one task in one training step.
struct RolloutGroup {
  int task_id = 0;
  std::vector<Rollout> rollouts;
  /// Rewards of the first, hint-free batch. Equal to the final rewards when
  /// no regeneration happened.
  std::vector<int> pre_hint_rewards;
  bool regenerated = false;
  int hint_variant = -1;
  RewardStats stats;
  GroupAdvantages advantages;

  std::vector<int> rewards() const;
  int hinted_count() const;
  int pass_count() const;
  /// Rollouts sampled for this group, including a discarded first batch.
  int sampled() const;
};

struct SurrogateResult {
  double objective = 0.0;
  SliceGradient grad;
  bool skipped = false;  // degenerate advantages, nothing to learn
  int tokens = 0;
  int clipped_tokens = 0;  // tokens whose clipped branch is the active minimum
};

/// (1/G) sum_i (1/L) sum_t min(rho A_i, clip(rho, 1-eps_low, 1+eps_high) A_i)
/// with rho = exp(log pi_new - old_logprob) per token, and its exact
/// gradient w.r.t. `params`. A token contributes no gradient when the clipped
/// branch is strictly smaller than the unclipped one.
SurrogateResult surrogate_and_grad(const RolloutGroup& group, const PolicyParams& params,
                                   const GroupAdvantages& adv, const ClipConfig& clip,
                                   double temperature);

/// Objective value only (used by finite-difference checks).
double surrogate_objective(const RolloutGroup& group, const PolicyParams& params,
                           const GroupAdvantages& adv, const ClipConfig& clip,
                           double temperature);

struct AdamState {
  std::vector<double> m;  // theta..., gamma, beta
  std::vector<double> v;
  std::int64_t t = 0;

  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  bool operator==(const AdamState&) const = default;
};

/// Adam ascent step on the objective. Throws NumericError on a non-finite
/// gradient and leaves params and state untouched in that case.
void optimizer_step(PolicyParams& params, const PolicyGradient& grad, const ClipConfig& clip,
                    AdamState& state);

}  // namespace nurl

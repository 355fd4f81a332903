// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "nurl/grpo.hpp"
#include "nurl/policy.hpp"
#include "nurl/task_env.hpp"

namespace nurl {

struct EvalConfig {
  int n_samples = 16;
  double temperature = 0.7;
  std::vector<int> k_grid = {1};
  int sc_width = 16;

  void validate() const;
};

/// k = 1, 2, 4, ... up to and including `max_k` (a power of two).
std::vector<int> powers_of_two(int max_k);

struct TaskEval {
  int task_id = 0;
  Difficulty difficulty = Difficulty::Easy;
  int n = 0;
  int c = 0;
  double pass1 = 0.0;
  std::map<int, double> pass_at_k;
  /// Fraction of correct majority votes over floor(n / sc_width) disjoint
  /// windows of sc_width samples.
  double sc_correct = 0.0;
  int sc_votes = 0;
};

struct EvalReport {
  std::vector<TaskEval> tasks;
  double pass1 = 0.0;
  std::map<int, double> pass_at_k;
  double sc_accuracy = 0.0;
  EvalConfig config;
};

/// Unbiased pass@k from n samples with c correct:
/// 1 - C(n-c, k) / C(n, k), evaluated as a running product.
double pass_at_k(int n, int c, int k);

/// Majority answer among the first `width` answers; ties go to the
/// lexicographically smallest sequence.
Sequence self_consistency(std::span<const Sequence> answers, int width);

enum class HintPhase { PreHint, PostHint };

/// Fraction of groups with at least one correct rollout, using the first
/// (hint-free) batch for PreHint and the final batch for PostHint.
double solvable_fraction(std::span<const RolloutGroup> groups, HintPhase phase);

/// Samples cfg.n_samples hint-free rollouts per task. Per-task streams are
/// derived from `seed`, so the result is independent of `workers`.
EvalReport evaluate(const PolicyParams& params, std::span<const Task* const> tasks,
                    const EvalConfig& cfg, std::uint64_t seed, int workers = 1);

}  // namespace nurl

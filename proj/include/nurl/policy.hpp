// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "nurl/hint_forge.hpp"
#include "nurl/rng.hpp"
#include "nurl/task_env.hpp"

namespace nurl {

/// Tabular sequence policy.
///
/// theta holds one logit table of shape [length][alphabet_size] per task.
/// gamma (copy gate, g = sigmoid(gamma)) and beta (set bias) are shared by
/// all tasks. Per position t, with c_t the hint's aligned token (NULL when
/// no hint) and s = softmax((theta[t] + beta * 1[k in set_tokens]) / T):
///
///   P(k) = g * 1[k == c_t] + (1 - g) * s_k
///
/// NULL receives mass only through the copy branch.
struct PolicyParams {
  int n_tasks = 0;
  int length = 0;
  int alphabet_size = 0;
  std::vector<double> theta;
  double gamma = -2.0;
  double beta = 0.0;
  std::uint64_t version = 0;

  PolicyParams() = default;
  PolicyParams(int n_tasks, int length, int alphabet_size);

  std::size_t index(int task, int t, int k) const {
    return (static_cast<std::size_t>(task) * length + t) * alphabet_size + k;
  }
  std::span<const double> logits(int task, int t) const {
    return {theta.data() + index(task, t, 0), static_cast<std::size_t>(alphabet_size)};
  }
  std::span<double> logits(int task, int t) {
    return {theta.data() + index(task, t, 0), static_cast<std::size_t>(alphabet_size)};
  }
  std::size_t slice_size() const { return static_cast<std::size_t>(length) * alphabet_size; }
  int null_token() const { return alphabet_size; }

  bool operator==(const PolicyParams&) const = default;
};

/// Dense gradient with the same layout as PolicyParams.
struct PolicyGradient {
  std::vector<double> theta;
  double gamma = 0.0;
  double beta = 0.0;

  PolicyGradient() = default;
  explicit PolicyGradient(const PolicyParams& shape) : theta(shape.theta.size(), 0.0) {}

  double max_abs() const;
  double norm() const;
  bool all_finite() const;
};

/// Gradient of quantities that depend on one task only: the theta part is
/// the [length][alphabet_size] slice of `task_id`.
struct SliceGradient {
  int task_id = 0;
  std::vector<double> theta;
  double gamma = 0.0;
  double beta = 0.0;

  void scale(double s);
  /// dense += weight * this
  void add_to(PolicyGradient& dense, const PolicyParams& shape, double weight = 1.0) const;
};

struct ConditioningContext {
  int task_id = 0;
  std::optional<Hint> hint;

  bool has_hint() const { return hint.has_value(); }
};

struct Rollout {
  Sequence tokens;
  std::vector<double> old_logprobs;
  bool hinted = false;
  ConditioningContext context;
  int reward = 0;

  double old_logprob() const;
};

struct InitBias {
  double easy = 4.0;    // added to the answer logit of easy tasks
  double medium = 0.0;  // added (signed) for medium tasks
  double hard = 4.0;    // subtracted for hard tasks

  double offset(Difficulty d) const;
};

double sigmoid(double x);
double softplus(double x);

/// Seeded noise in [-0.01, 0.01], answer-logit offsets by class,
/// gamma = -2, beta = 0.
PolicyParams init_policy(const TaskSet& tasks, const InitBias& bias, std::uint64_t seed);

/// Deep copy used as pi_old for one rollout phase.
inline PolicyParams snapshot(const PolicyParams& params) { return params; }

/// Full next-token distribution over the vocabulary (alphabet + NULL).
std::vector<double> token_distribution(const PolicyParams& params, const ConditioningContext& ctx,
                                       int t, double temperature);

struct TokenLogProb {
  double logprob = 0.0;
  bool degenerate = false;
  std::vector<double> d_theta;  // d logprob / d theta[task][t][.]
  double d_gamma = 0.0;
  double d_beta = 0.0;
};

/// log P(token at position t) and its gradient.
TokenLogProb token_logprob(const PolicyParams& params, const ConditioningContext& ctx, int t,
                           int token, double temperature, bool with_grad = true);

struct LogProbResult {
  double logprob = 0.0;
  std::vector<double> token_logprobs;
  SliceGradient grad;
  /// Some token has probability exactly zero; logprob is -inf and the
  /// gradient is zero. Such rollouts must be excluded by the caller.
  bool degenerate = false;
};

LogProbResult logprob_and_grad(const PolicyParams& params, const Rollout& rollout,
                               double temperature);

Rollout sample_rollout(const PolicyParams& params, const ConditioningContext& ctx,
                       double temperature, Rng& rng);

/// Exact probability that one hint-free rollout of `task` is correct.
double success_probability(const PolicyParams& params, const Task& task, double temperature);

}  // namespace nurl

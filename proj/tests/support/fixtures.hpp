// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "nurl/grpo.hpp"
#include "nurl/hint_forge.hpp"
#include "nurl/policy.hpp"
#include "nurl/rng.hpp"
#include "nurl/task_env.hpp"

namespace nurl::fixtures {

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

/// A small random policy with one task, plus a hint bank for it.
struct RandomCase {
  TaskSet tasks;
  HintBank bank;
  PolicyParams params;
  ConditioningContext ctx;
  double temperature = 1.0;
};

inline RandomCase random_case(Rng& rng, std::optional<HintType> type) {
  RandomCase c;
  const int length = 2 + static_cast<int>(uniform_index(rng, 3));
  // At least two non-answer symbols remain, so one distractor always fits.
  const int alphabet = length + 2 + static_cast<int>(uniform_index(rng, 4));
  c.tasks = generate_tasks({1, 1, 1}, length, Alphabet{alphabet}, rng());
  c.bank = forge_hints(c.tasks, 0.3, 1, rng());
  c.params = PolicyParams(c.tasks.id_span(), length, alphabet);
  for (double& x : c.params.theta) x = uniform(rng, -2.0, 2.0);
  c.params.gamma = uniform(rng, -3.0, 3.0);
  c.params.beta = uniform(rng, -2.0, 2.0);
  const double temps[] = {0.7, 1.0, 1.3};
  c.temperature = temps[uniform_index(rng, 3)];
  c.ctx.task_id = static_cast<int>(uniform_index(rng, c.tasks.tasks.size()));
  if (type) c.ctx.hint = sample_hint(c.bank, c.ctx.task_id, *type, rng);
  return c;
}

/// |a - b| relative to the larger magnitude, with a floor so that
/// components near zero are compared absolutely.
inline double rel_err(double a, double b, double floor = 1e-3) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Applies f to a perturbed copy of `p` for every coordinate that the
/// gradient of a single-task quantity touches and compares against `grad`.
/// Returns the largest relative error.
template <typename F>
double check_against_fd(const PolicyParams& p, int task_id, const SliceGradient& grad, F&& f,
                        double h = 1e-5) {
  double worst = 0.0;
  for (std::size_t j = 0; j < p.slice_size(); ++j) {
    PolicyParams hi = p, lo = p;
    hi.theta[p.index(task_id, 0, 0) + j] += h;
    lo.theta[p.index(task_id, 0, 0) + j] -= h;
    worst = std::max(worst, rel_err(grad.theta[j], (f(hi) - f(lo)) / (2 * h)));
  }
  PolicyParams hi = p, lo = p;
  hi.gamma += h;
  lo.gamma -= h;
  worst = std::max(worst, rel_err(grad.gamma, (f(hi) - f(lo)) / (2 * h)));
  hi = p;
  lo = p;
  hi.beta += h;
  lo.beta -= h;
  worst = std::max(worst, rel_err(grad.beta, (f(hi) - f(lo)) / (2 * h)));
  return worst;
}

/// Finite-difference check of logprob_and_grad on one sampled rollout.
inline double logprob_grad_error(const RandomCase& c, Rng& rng) {
  Rollout r = sample_rollout(c.params, c.ctx, c.temperature, rng);
  const LogProbResult res = logprob_and_grad(c.params, r, c.temperature);
  return check_against_fd(c.params, c.ctx.task_id, res.grad, [&](const PolicyParams& q) {
    return logprob_and_grad(q, r, c.temperature).logprob;
  });
}

struct SurrogateCase {
  RolloutGroup group;
  GroupAdvantages adv;
  PolicyParams current;
  int clipped_low = 0;   // tokens with A < 0 and rho < 1 - eps_low
  int clipped_high = 0;  // tokens with A > 0 and rho > 1 + eps_high
};

/// Samples a group from the case's policy, assigns non-degenerate rewards,
/// and perturbs the parameters so that some ratios leave the clip interval.
/// Tokens whose ratio sits within `margin` of a clip boundary are rejected
/// by resampling the perturbation, since the objective has a kink there.
inline SurrogateCase random_surrogate_case(const RandomCase& c, const ClipConfig& clip, Rng& rng,
                                           int group_size = 4, double margin = 1e-3) {
  SurrogateCase s;
  s.group.task_id = c.ctx.task_id;
  std::vector<int> rewards(group_size);
  for (int i = 0; i < group_size; ++i) {
    ConditioningContext ctx = c.ctx;
    if (i == group_size - 1) ctx.hint.reset();
    Rollout r = sample_rollout(c.params, ctx, c.temperature, rng);
    r.reward = i % 2;
    rewards[i] = r.reward;
    s.group.rollouts.push_back(std::move(r));
  }
  s.group.pre_hint_rewards = rewards;
  s.adv = group_advantages(rewards);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    PolicyParams q = c.params;
    const double scale = uniform(rng, 0.05, 0.6);
    for (std::size_t j = 0; j < q.slice_size(); ++j)
      q.theta[q.index(c.ctx.task_id, 0, 0) + j] += uniform(rng, -scale, scale);
    q.gamma += uniform(rng, -scale, scale);
    q.beta += uniform(rng, -scale, scale);
    bool near_kink = false;
    int lo = 0, hi = 0;
    for (std::size_t i = 0; i < s.group.rollouts.size(); ++i) {
      const LogProbResult cur = logprob_and_grad(q, s.group.rollouts[i], c.temperature);
      for (std::size_t t = 0; t < cur.token_logprobs.size(); ++t) {
        const double rho = std::exp(cur.token_logprobs[t] - s.group.rollouts[i].old_logprobs[t]);
        if (std::abs(rho - (1 - clip.eps_low)) < margin || std::abs(rho - (1 + clip.eps_high)) < margin)
          near_kink = true;
        if (s.adv.values[i] < 0 && rho < 1 - clip.eps_low) ++lo;
        if (s.adv.values[i] > 0 && rho > 1 + clip.eps_high) ++hi;
      }
    }
    if (near_kink) continue;
    s.current = q;
    s.clipped_low = lo;
    s.clipped_high = hi;
    return s;
  }
  s.current = c.params;
  return s;
}

inline double surrogate_grad_error(const RandomCase& c, const SurrogateCase& s,
                                   const ClipConfig& clip) {
  const SurrogateResult res = surrogate_and_grad(s.group, s.current, s.adv, clip, c.temperature);
  return check_against_fd(s.current, c.ctx.task_id, res.grad, [&](const PolicyParams& q) {
    return surrogate_objective(s.group, q, s.adv, clip, c.temperature);
  });
}

// Fraction of size-k subsets of n samples (the first c correct) that contain
// at least one correct sample, by walking every bitmask.
inline double enumerate_pass_at_k(int n, int c, int k) {
  long hit = 0, total = 0;
  for (unsigned m = 0; m < (1u << n); ++m) {
    if (__builtin_popcount(m) != k) continue;
    ++total;
    if (m & ((1u << c) - 1)) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(total);
}

}  // namespace nurl::fixtures

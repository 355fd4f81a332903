// SPDX-License-Identifier: Apache-2.0

#include "nurl/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nurl/error.hpp"

namespace nurl {

RewardStats reward_stats(std::span<const int> rewards) {
  RewardStats s;
  s.rewards.assign(rewards.begin(), rewards.end());
  if (rewards.empty()) return s;
  const double G = static_cast<double>(rewards.size());
  for (const double r : s.rewards) s.mean += r;
  s.mean /= G;
  double var = 0.0;
  for (const double r : s.rewards) var += (r - s.mean) * (r - s.mean);
  s.stddev = std::sqrt(var / G);
  return s;
}

GroupAdvantages group_advantages(std::span<const int> rewards) {
  if (rewards.size() < 2)
    throw ConfigError("group advantages need G >= 2, got " + std::to_string(rewards.size()));
  const RewardStats s = reward_stats(rewards);
  GroupAdvantages adv;
  adv.values.assign(rewards.size(), 0.0);
  if (s.stddev == 0.0) {
    adv.degenerate = true;
    return adv;
  }
  for (std::size_t i = 0; i < rewards.size(); ++i) adv.values[i] = (s.rewards[i] - s.mean) / s.stddev;
  return adv;
}

void ClipConfig::validate() const {
  if (!(eps_low > 0.0 && eps_low < 1.0)) throw ConfigError("clip eps_low must lie in (0, 1)");
  if (!(eps_high > 0.0 && eps_high < 1.0)) throw ConfigError("clip eps_high must lie in (0, 1)");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("learning_rate must be positive");
}

std::vector<int> RolloutGroup::rewards() const {
  std::vector<int> r;
  r.reserve(rollouts.size());
  for (const auto& ro : rollouts) r.push_back(ro.reward);
  return r;
}

int RolloutGroup::hinted_count() const {
  return static_cast<int>(std::count_if(rollouts.begin(), rollouts.end(),
                                        [](const Rollout& r) { return r.hinted; }));
}

int RolloutGroup::pass_count() const {
  int n = 0;
  for (const auto& r : rollouts) n += r.reward;
  return n;
}

int RolloutGroup::sampled() const {
  return static_cast<int>(rollouts.size()) +
         (regenerated ? static_cast<int>(pre_hint_rewards.size()) : 0);
}

namespace {

template <bool kWithGrad>
SurrogateResult surrogate_impl(const RolloutGroup& group, const PolicyParams& params,
                               const GroupAdvantages& adv, const ClipConfig& clip,
                               double temperature) {
  SurrogateResult out;
  out.grad.task_id = group.task_id;
  if constexpr (kWithGrad) out.grad.theta.assign(params.slice_size(), 0.0);
  if (adv.degenerate) {
    out.skipped = true;
    return out;
  }
  const std::size_t G = group.rollouts.size();
  if (adv.values.size() != G) throw ContractError("advantages do not match group size");
  const int L = params.length;
  const int A = params.alphabet_size;
  const double lo = 1.0 - clip.eps_low;
  const double hi = 1.0 + clip.eps_high;
  const double scale = 1.0 / (static_cast<double>(G) * L);

  for (std::size_t i = 0; i < G; ++i) {
    const Rollout& ro = group.rollouts[i];
    const double a = adv.values[i];
    for (int t = 0; t < L; ++t) {
      if (std::isnan(ro.old_logprobs[t]))
        throw NumericError("NaN old logprob in a rollout of task " + std::to_string(group.task_id));
      if (std::isinf(ro.old_logprobs[t]))
        throw ContractError("rollout with infinite old logprob passed to the surrogate");
      const TokenLogProb tok =
          token_logprob(params, ro.context, t, ro.tokens[t], temperature, kWithGrad);
      const double rho = std::exp(tok.logprob - ro.old_logprobs[t]);
      const double unclipped = rho * a;
      const double clipped = std::clamp(rho, lo, hi) * a;
      ++out.tokens;
      if (unclipped <= clipped) {
        out.objective += scale * unclipped;
        if constexpr (kWithGrad) {
          // d(rho)/d(param) = rho * d(log pi)/d(param)
          const double w = scale * a * rho;
          for (int k = 0; k < A; ++k)
            out.grad.theta[static_cast<std::size_t>(t) * A + k] += w * tok.d_theta[k];
          out.grad.gamma += w * tok.d_gamma;
          out.grad.beta += w * tok.d_beta;
        }
      } else {
        out.objective += scale * clipped;
        ++out.clipped_tokens;
      }
    }
  }
  return out;
}

}  // namespace

SurrogateResult surrogate_and_grad(const RolloutGroup& group, const PolicyParams& params,
                                   const GroupAdvantages& adv, const ClipConfig& clip,
                                   double temperature) {
  return surrogate_impl<true>(group, params, adv, clip, temperature);
}

double surrogate_objective(const RolloutGroup& group, const PolicyParams& params,
                           const GroupAdvantages& adv, const ClipConfig& clip,
                           double temperature) {
  return surrogate_impl<false>(group, params, adv, clip, temperature).objective;
}

void optimizer_step(PolicyParams& params, const PolicyGradient& grad, const ClipConfig& clip,
                    AdamState& state) {
  const std::size_t n = params.theta.size();
  if (grad.theta.size() != n) throw ContractError("gradient shape does not match parameters");
  if (!grad.all_finite())
    throw NumericError("non-finite gradient (|g|max=" + std::to_string(grad.max_abs()) +
                       ") at version " + std::to_string(params.version));
  if (state.m.empty()) {
    state.m.assign(n + 2, 0.0);
    state.v.assign(n + 2, 0.0);
  }
  if (state.m.size() != n + 2) throw ContractError("optimizer state shape mismatch");

  ++state.t;
  const double b1 = AdamState::kBeta1;
  const double b2 = AdamState::kBeta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  auto update = [&](std::size_t i, double g, double& x) {
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    x += clip.learning_rate * mhat / (std::sqrt(vhat) + AdamState::kEps);
  };
  for (std::size_t i = 0; i < n; ++i) update(i, grad.theta[i], params.theta[i]);
  update(n, grad.gamma, params.gamma);
  update(n + 1, grad.beta, params.beta);
  ++params.version;
}

}  // namespace nurl

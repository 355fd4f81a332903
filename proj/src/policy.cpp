// SPDX-License-Identifier: Apache-2.0

#include "nurl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "nurl/error.hpp"

namespace nurl {

PolicyParams::PolicyParams(int n_tasks_, int length_, int alphabet_size_)
    : n_tasks(n_tasks_),
      length(length_),
      alphabet_size(alphabet_size_),
      theta(static_cast<std::size_t>(n_tasks_) * length_ * alphabet_size_, 0.0) {}

double PolicyGradient::max_abs() const {
  double m = std::max(std::abs(gamma), std::abs(beta));
  for (const double v : theta) m = std::max(m, std::abs(v));
  return m;
}

double PolicyGradient::norm() const {
  double s = gamma * gamma + beta * beta;
  for (const double v : theta) s += v * v;
  return std::sqrt(s);
}

bool PolicyGradient::all_finite() const {
  if (!std::isfinite(gamma) || !std::isfinite(beta)) return false;
  return std::all_of(theta.begin(), theta.end(), [](double v) { return std::isfinite(v); });
}

void SliceGradient::scale(double s) {
  for (double& v : theta) v *= s;
  gamma *= s;
  beta *= s;
}

void SliceGradient::add_to(PolicyGradient& dense, const PolicyParams& shape, double weight) const {
  const std::size_t base = shape.index(task_id, 0, 0);
  for (std::size_t i = 0; i < theta.size(); ++i) dense.theta[base + i] += weight * theta[i];
  dense.gamma += weight * gamma;
  dense.beta += weight * beta;
}

double Rollout::old_logprob() const {
  double s = 0.0;
  for (const double lp : old_logprobs) s += lp;
  return s;
}

double InitBias::offset(Difficulty d) const {
  switch (d) {
    case Difficulty::Easy: return easy;
    case Difficulty::Medium: return medium;
    case Difficulty::Hard: return -hard;
  }
  return 0.0;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

PolicyParams init_policy(const TaskSet& tasks, const InitBias& bias, std::uint64_t seed) {
  PolicyParams p(tasks.id_span(), tasks.length, tasks.alphabet.size);
  Rng rng = make_rng(seed, "policy-init");
  for (double& v : p.theta) v = 0.01 * (2.0 * uniform01(rng) - 1.0);
  for (const Task& task : tasks.tasks) {
    const double off = bias.offset(task.difficulty);
    for (int t = 0; t < p.length; ++t) p.logits(task.task_id, t)[task.answer[t]] += off;
  }
  p.gamma = -2.0;
  p.beta = 0.0;
  p.version = 0;
  return p;
}

namespace {

void check_context(const PolicyParams& params, const ConditioningContext& ctx) {
  if (ctx.task_id < 0 || ctx.task_id >= params.n_tasks)
    throw ContractError("context task id " + std::to_string(ctx.task_id) + " outside policy table");
  if (ctx.hint) {
    if (ctx.hint->task_id != ctx.task_id)
      throw ContractError("hint belongs to task " + std::to_string(ctx.hint->task_id) +
                          ", context is task " + std::to_string(ctx.task_id));
    if (static_cast<int>(ctx.hint->aligned_tokens.size()) != params.length)
      throw ContractError("hint aligned_tokens length does not match policy length");
  }
}

// Per-position softmax and the quantities shared by sampling and scoring.
struct Position {
  std::vector<double> log_s;  // log softmax over the alphabet
  std::vector<double> s;
  double s_dot_mask = 0.0;  // softmax mass on set_tokens
  int copy_token = 0;       // c_t; NULL when not disclosed
};

class ContextView {
 public:
  ContextView(const PolicyParams& params, const ConditioningContext& ctx, double temperature)
      : params_(params), ctx_(ctx), inv_t_(1.0 / temperature), mask_(params.alphabet_size, 0) {
    if (!(temperature > 0.0) || !std::isfinite(temperature))
      throw ContractError("temperature must be a positive finite number");
    check_context(params, ctx);
    if (ctx.hint) {
      for (const int k : ctx.hint->set_tokens) {
        if (k < 0 || k >= params.alphabet_size) throw ContractError("hint set token out of range");
        mask_[k] = 1;
      }
      has_mask_ = !ctx.hint->set_tokens.empty();
    }
  }

  bool has_mask() const { return has_mask_; }
  bool in_set(int k) const { return mask_[k] != 0; }
  double inv_temperature() const { return inv_t_; }

  Position at(int t) const {
    const int A = params_.alphabet_size;
    Position pos;
    pos.log_s.resize(A);
    pos.s.resize(A);
    const auto theta = params_.logits(ctx_.task_id, t);
    double zmax = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < A; ++k) {
      double z = theta[k];
      if (has_mask_ && mask_[k]) z += params_.beta;
      z *= inv_t_;
      pos.log_s[k] = z;
      zmax = std::max(zmax, z);
    }
    double sum = 0.0;
    for (int k = 0; k < A; ++k) sum += std::exp(pos.log_s[k] - zmax);
    const double lse = zmax + std::log(sum);
    for (int k = 0; k < A; ++k) {
      pos.log_s[k] -= lse;
      pos.s[k] = std::exp(pos.log_s[k]);
      if (has_mask_ && mask_[k]) pos.s_dot_mask += pos.s[k];
    }
    pos.copy_token = ctx_.hint ? ctx_.hint->aligned_tokens[t] : params_.null_token();
    return pos;
  }

 private:
  const PolicyParams& params_;
  const ConditioningContext& ctx_;
  double inv_t_;
  std::vector<char> mask_;
  bool has_mask_ = false;
};

double log_add_exp(double a, double b) {
  const double m = std::max(a, b);
  if (m == -std::numeric_limits<double>::infinity()) return m;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

TokenLogProb score_token(const PolicyParams& params, const ContextView& view, int t, int token,
                         bool with_grad) {
  const int A = params.alphabet_size;
  const int null_tok = params.null_token();
  if (token < 0 || token > null_tok)
    throw ContractError("token " + std::to_string(token) + " outside vocabulary");

  const Position pos = view.at(t);
  const double log_g = -softplus(-params.gamma);
  const double log_1mg = -softplus(params.gamma);
  const double g = std::exp(log_g);
  const double inv_t = view.inv_temperature();

  TokenLogProb out;
  if (with_grad) out.d_theta.assign(A, 0.0);

  if (token == null_tok) {
    if (pos.copy_token != null_tok) {
      out.logprob = -std::numeric_limits<double>::infinity();
      out.degenerate = true;
      return out;
    }
    out.logprob = log_g;
    out.d_gamma = std::exp(log_1mg);
    return out;
  }

  // Weight of the softmax branch in d log P; 1 when the copy branch cannot
  // produce this token.
  double w = 1.0;
  if (token != pos.copy_token) {
    out.logprob = log_1mg + pos.log_s[token];
    out.d_gamma = -g;
  } else {
    const double branch = log_1mg + pos.log_s[token];
    out.logprob = log_add_exp(log_g, branch);
    w = std::exp(branch - out.logprob);
    double others = 0.0;
    for (int k = 0; k < A; ++k)
      if (k != token) others += pos.s[k];
    out.d_gamma = std::exp(log_g + log_1mg - out.logprob) * others;
  }
  if (!with_grad) return out;

  for (int k = 0; k < A; ++k) out.d_theta[k] = -w * pos.s[k] * inv_t;
  out.d_theta[token] += w * inv_t;
  if (view.has_mask())
    out.d_beta = w * ((view.in_set(token) ? 1.0 : 0.0) - pos.s_dot_mask) * inv_t;
  return out;
}

}  // namespace

std::vector<double> token_distribution(const PolicyParams& params, const ConditioningContext& ctx,
                                       int t, double temperature) {
  const ContextView view(params, ctx, temperature);
  const Position pos = view.at(t);
  const double g = sigmoid(params.gamma);
  std::vector<double> p(params.alphabet_size + 1, 0.0);
  for (int k = 0; k < params.alphabet_size; ++k) p[k] = (1.0 - g) * pos.s[k];
  p[pos.copy_token] += g;
  return p;
}

TokenLogProb token_logprob(const PolicyParams& params, const ConditioningContext& ctx, int t,
                           int token, double temperature, bool with_grad) {
  const ContextView view(params, ctx, temperature);
  return score_token(params, view, t, token, with_grad);
}

LogProbResult logprob_and_grad(const PolicyParams& params, const Rollout& rollout,
                               double temperature) {
  if (static_cast<int>(rollout.tokens.size()) != params.length)
    throw ContractError("rollout length does not match policy length");
  const ContextView view(params, rollout.context, temperature);
  const int A = params.alphabet_size;

  LogProbResult out;
  out.grad.task_id = rollout.context.task_id;
  out.grad.theta.assign(params.slice_size(), 0.0);
  out.token_logprobs.resize(params.length);
  for (int t = 0; t < params.length; ++t) {
    TokenLogProb tok = score_token(params, view, t, rollout.tokens[t], true);
    out.token_logprobs[t] = tok.logprob;
    if (tok.degenerate) {
      out.degenerate = true;
      out.logprob = -std::numeric_limits<double>::infinity();
      out.grad.theta.assign(params.slice_size(), 0.0);
      out.grad.gamma = 0.0;
      out.grad.beta = 0.0;
      return out;
    }
    out.logprob += tok.logprob;
    for (int k = 0; k < A; ++k) out.grad.theta[static_cast<std::size_t>(t) * A + k] += tok.d_theta[k];
    out.grad.gamma += tok.d_gamma;
    out.grad.beta += tok.d_beta;
  }
  return out;
}

Rollout sample_rollout(const PolicyParams& params, const ConditioningContext& ctx,
                       double temperature, Rng& rng) {
  const ContextView view(params, ctx, temperature);
  const double g = sigmoid(params.gamma);
  Rollout r;
  r.context = ctx;
  r.hinted = ctx.has_hint();
  r.tokens.resize(params.length);
  r.old_logprobs.resize(params.length);
  for (int t = 0; t < params.length; ++t) {
    const Position pos = view.at(t);
    int tok;
    if (uniform01(rng) < g) {
      tok = pos.copy_token;
    } else {
      const double u = uniform01(rng);
      double acc = 0.0;
      tok = params.alphabet_size - 1;
      for (int k = 0; k < params.alphabet_size; ++k) {
        acc += pos.s[k];
        if (u < acc) {
          tok = k;
          break;
        }
      }
    }
    r.tokens[t] = tok;
    r.old_logprobs[t] = score_token(params, view, t, tok, false).logprob;
  }
  return r;
}

double success_probability(const PolicyParams& params, const Task& task, double temperature) {
  const ConditioningContext ctx{task.task_id, std::nullopt};
  const ContextView view(params, ctx, temperature);
  const double log_1mg = -softplus(params.gamma);
  double lp = 0.0;
  for (int t = 0; t < params.length; ++t) lp += log_1mg + view.at(t).log_s[task.answer[t]];
  return std::exp(lp);
}

}  // namespace nurl

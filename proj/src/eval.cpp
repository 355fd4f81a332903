// SPDX-License-Identifier: Apache-2.0

#include "nurl/eval.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>

#include "nurl/error.hpp"
#include "nurl/parallel.hpp"

namespace nurl {

void EvalConfig::validate() const {
  if (n_samples < 1) throw ConfigError("eval n_samples must be >= 1");
  if (!(temperature > 0.0)) throw ConfigError("eval temperature must be > 0");
  if (k_grid.empty()) throw ConfigError("eval k_grid must not be empty");
  for (const int k : k_grid) {
    if (k < 1) throw ConfigError("eval k_grid entries must be >= 1");
    if (k > n_samples)
      throw ConfigError("eval k_grid entry " + std::to_string(k) + " exceeds n_samples " +
                        std::to_string(n_samples));
  }
  if (sc_width < 1 || sc_width > n_samples)
    throw ConfigError("eval sc_width must lie in [1, n_samples]");
}

std::vector<int> powers_of_two(int max_k) {
  std::vector<int> ks;
  for (int k = 1; k <= max_k; k *= 2) ks.push_back(k);
  return ks;
}

namespace {

constexpr std::uint64_t kExactLimit = std::uint64_t{1} << 53;

// C(n, k) when it is at most 2^53, so that it converts to double exactly.
std::optional<std::uint64_t> small_binomial(int n, int k) {
  k = std::min(k, n - k);
  unsigned __int128 r = 1;
  for (int i = 1; i <= k; ++i) {
    r = r * static_cast<unsigned>(n - k + i) / static_cast<unsigned>(i);
    if (r > kExactLimit) return std::nullopt;
  }
  return static_cast<std::uint64_t>(r);
}

}  // namespace

double pass_at_k(int n, int c, int k) {
  if (n < 1 || c < 0 || c > n) throw ContractError("pass_at_k needs 0 <= c <= n, n >= 1");
  if (k < 1 || k > n) throw ContractError("pass_at_k needs 1 <= k <= n");
  if (n - c < k) return 1.0;
  // Exact ratio of integers when both binomials fit in a double mantissa.
  if (const auto total = small_binomial(n, k)) {
    const std::uint64_t miss = *small_binomial(n - c, k);
    return static_cast<double>(*total - miss) / static_cast<double>(*total);
  }
  // C(n-c, k) / C(n, k) = prod_{i=n-c+1}^{n} (1 - k / i)
  double fail = 1.0;
  for (int i = n - c + 1; i <= n; ++i) fail *= 1.0 - static_cast<double>(k) / i;
  return 1.0 - fail;
}

Sequence self_consistency(std::span<const Sequence> answers, int width) {
  if (answers.empty()) throw ContractError("self_consistency: no answers");
  if (width < 1 || width > static_cast<int>(answers.size()))
    throw ContractError("self_consistency: width must lie in [1, answers.size()]");
  std::map<Sequence, int> votes;
  for (int i = 0; i < width; ++i) ++votes[answers[i]];
  // std::map iterates in lexicographic order; keep the first maximum.
  auto best = votes.begin();
  for (auto it = votes.begin(); it != votes.end(); ++it)
    if (it->second > best->second) best = it;
  return best->first;
}

double solvable_fraction(std::span<const RolloutGroup> groups, HintPhase phase) {
  if (groups.empty()) return 0.0;
  int solvable = 0;
  for (const RolloutGroup& g : groups) {
    bool any = false;
    if (phase == HintPhase::PreHint)
      any = std::any_of(g.pre_hint_rewards.begin(), g.pre_hint_rewards.end(),
                        [](int r) { return r > 0; });
    else
      any = g.pass_count() > 0;
    solvable += any;
  }
  return static_cast<double>(solvable) / static_cast<double>(groups.size());
}

EvalReport evaluate(const PolicyParams& params, std::span<const Task* const> tasks,
                    const EvalConfig& cfg, std::uint64_t seed, int workers) {
  cfg.validate();
  EvalReport report;
  report.config = cfg;
  report.tasks.resize(tasks.size());

  parallel_for(tasks.size(), workers, [&](std::size_t i) {
    const Task& task = *tasks[i];
    // Inference never sees a hint.
    const ConditioningContext ctx{task.task_id, std::nullopt};
    Rng rng = make_rng(seed, "eval", {static_cast<std::uint64_t>(task.task_id)});
    std::vector<Sequence> answers;
    answers.reserve(cfg.n_samples);
    TaskEval& te = report.tasks[i];
    te.task_id = task.task_id;
    te.difficulty = task.difficulty;
    te.n = cfg.n_samples;
    for (int j = 0; j < cfg.n_samples; ++j) {
      Rollout r = sample_rollout(params, ctx, cfg.temperature, rng);
      te.c += verify(r.tokens, task);
      answers.push_back(std::move(r.tokens));
    }
    te.pass1 = static_cast<double>(te.c) / te.n;
    for (const int k : cfg.k_grid) te.pass_at_k[k] = pass_at_k(te.n, te.c, k);
    te.sc_votes = cfg.n_samples / cfg.sc_width;
    int sc_hits = 0;
    for (int v = 0; v < te.sc_votes; ++v) {
      const std::span<const Sequence> window(answers.data() + v * cfg.sc_width,
                                             static_cast<std::size_t>(cfg.sc_width));
      sc_hits += verify(self_consistency(window, cfg.sc_width), task);
    }
    te.sc_correct = static_cast<double>(sc_hits) / te.sc_votes;
  });

  if (!report.tasks.empty()) {
    const double n = static_cast<double>(report.tasks.size());
    for (const TaskEval& te : report.tasks) {
      report.pass1 += te.pass1 / n;
      report.sc_accuracy += te.sc_correct / n;
      for (const auto& [k, v] : te.pass_at_k) report.pass_at_k[k] += v / n;
    }
  }
  return report;
}

}  // namespace nurl

// SPDX-License-Identifier: Apache-2.0

#include "nurl/hint_forge.hpp"

#include <algorithm>
#include <string>

#include "nurl/error.hpp"

namespace nurl {

std::string_view to_string(HintType t) {
  switch (t) {
    case HintType::AbstractCue: return "abstract_cue";
    case HintType::PartialSteps: return "partial_steps";
    case HintType::Explanation: return "explanation";
    case HintType::GoldAnswer: return "gold_answer";
  }
  return "?";
}

HintType hint_type_from_string(std::string_view s) {
  for (const HintType t : kAllHintTypes)
    if (to_string(t) == s) return t;
  throw ConfigError("unknown hint type '" + std::string(s) +
                    "' (expected abstract_cue, partial_steps, explanation or gold_answer)");
}

int partial_steps_prefix(int length) { return (length + 3) / 4; }

HintBank::HintBank(double corruption_rate, int distractor_count, std::uint64_t seed,
                   int null_token)
    : corruption_rate_(corruption_rate),
      distractor_count_(distractor_count),
      seed_(seed),
      null_token_(null_token) {}

bool HintBank::contains(int task_id) const {
  return task_id >= 0 && task_id < static_cast<int>(slots_.size()) &&
         !slots_[task_id][0].empty();
}

const std::vector<Hint>& HintBank::variants(int task_id, HintType type) const {
  if (task_id < 0 || task_id >= static_cast<int>(slots_.size()) ||
      slots_[task_id][static_cast<int>(type)].empty())
    throw LookupError("hint bank has no " + std::string(to_string(type)) + " hints for task " +
                      std::to_string(task_id));
  return slots_[task_id][static_cast<int>(type)];
}

std::vector<int> HintBank::task_ids() const {
  std::vector<int> ids;
  for (int i = 0; i < static_cast<int>(slots_.size()); ++i)
    if (contains(i)) ids.push_back(i);
  return ids;
}

std::size_t HintBank::size() const {
  std::size_t n = 0;
  for (const auto& slot : slots_)
    for (const auto& v : slot) n += v.size();
  return n;
}

void HintBank::put(int task_id, HintType type, std::vector<Hint> variants) {
  if (task_id < 0) throw ContractError("negative task id");
  if (task_id >= static_cast<int>(slots_.size())) slots_.resize(task_id + 1);
  slots_[task_id][static_cast<int>(type)] = std::move(variants);
}

namespace {

std::vector<int> distinct_symbols(const Sequence& answer) {
  std::vector<int> s(answer.begin(), answer.end());
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

Hint make_hint(const Task& task, HintType type, int variant, int null_token) {
  Hint h;
  h.task_id = task.task_id;
  h.type = type;
  h.variant_index = variant;
  h.aligned_tokens.assign(task.answer.size(), null_token);
  return h;
}

}  // namespace

HintBank forge_hints(const TaskSet& tasks, double corruption_rate, int distractor_count,
                     std::uint64_t seed) {
  if (tasks.tasks.empty()) throw ConfigError("forge_hints: task set is empty");
  if (!(corruption_rate >= 0.0 && corruption_rate <= 1.0))
    throw ConfigError("corruption_rate must lie in [0, 1]");
  if (distractor_count < 0) throw ConfigError("distractor_count must be >= 0");

  const int A = tasks.alphabet.size;
  const int null_token = tasks.alphabet.null_token();
  const int L = tasks.length;
  HintBank bank(corruption_rate, distractor_count, seed, null_token);

  for (const Task& task : tasks.tasks) {
    const std::vector<int> distinct = distinct_symbols(task.answer);
    const int free_symbols = A - static_cast<int>(distinct.size());
    if (distractor_count > 0 && distractor_count >= free_symbols)
      throw ConfigError("distractor_count " + std::to_string(distractor_count) +
                        " too large: task " + std::to_string(task.task_id) + " leaves only " +
                        std::to_string(free_symbols) + " non-answer symbols");

    std::vector<int> non_answer;
    for (int k = 0; k < A; ++k)
      if (!std::binary_search(distinct.begin(), distinct.end(), k)) non_answer.push_back(k);

    for (const HintType type : kAllHintTypes) {
      std::vector<Hint> variants;
      variants.reserve(kHintVariants);
      for (int v = 0; v < kHintVariants; ++v) {
        Rng rng = make_rng(seed, "hint", {static_cast<std::uint64_t>(task.task_id),
                                          static_cast<std::uint64_t>(type),
                                          static_cast<std::uint64_t>(v)});
        Hint h = make_hint(task, type, v, null_token);
        switch (type) {
          case HintType::AbstractCue: {
            std::vector<int> pool = non_answer;
            // Partial Fisher-Yates: the first `distractor_count` entries.
            for (int i = 0; i < distractor_count; ++i) {
              const auto j = i + static_cast<int>(uniform_index(
                                     rng, static_cast<std::uint64_t>(pool.size() - i)));
              std::swap(pool[i], pool[j]);
            }
            h.set_tokens = distinct;
            h.set_tokens.insert(h.set_tokens.end(), pool.begin(),
                                pool.begin() + distractor_count);
            std::sort(h.set_tokens.begin(), h.set_tokens.end());
            break;
          }
          case HintType::PartialSteps:
            for (int t = 0; t < partial_steps_prefix(L); ++t) h.aligned_tokens[t] = task.answer[t];
            break;
          case HintType::Explanation:
            for (int t = 0; t < L; ++t) {
              int tok = task.answer[t];
              if (uniform01(rng) < corruption_rate) {
                // Uniform over the A-1 other symbols.
                const int r = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(A - 1)));
                tok = r >= tok ? r + 1 : r;
              }
              h.aligned_tokens[t] = tok;
            }
            break;
          case HintType::GoldAnswer:
            h.aligned_tokens = task.answer;
            break;
        }
        variants.push_back(std::move(h));
      }
      bank.put(task.task_id, type, std::move(variants));
    }
  }
  return bank;
}

const Hint& sample_hint(const HintBank& bank, int task_id, HintType type, Rng& rng) {
  const auto& variants = bank.variants(task_id, type);
  return variants[uniform_index(rng, variants.size())];
}

int disclosed(const Hint& hint, const Task& task) {
  int n = 0;
  for (std::size_t t = 0; t < task.answer.size() && t < hint.aligned_tokens.size(); ++t)
    if (hint.aligned_tokens[t] == task.answer[t]) ++n;
  return n;
}

}  // namespace nurl

// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "nurl/rng.hpp"
#include "nurl/task_env.hpp"

namespace nurl {

/// Hint taxonomy, ordered by how much of the answer it discloses.
enum class HintType { AbstractCue = 0, PartialSteps = 1, Explanation = 2, GoldAnswer = 3 };

inline constexpr std::array<HintType, 4> kAllHintTypes = {
    HintType::AbstractCue, HintType::PartialSteps, HintType::Explanation,
    HintType::GoldAnswer};

inline constexpr int kHintVariants = 8;

std::string_view to_string(HintType t);
HintType hint_type_from_string(std::string_view s);

struct Hint {
  int task_id = 0;
  HintType type = HintType::AbstractCue;
  /// Sorted, distinct alphabet symbols (AbstractCue only).
  std::vector<int> set_tokens;
  /// Length-L; alphabet.null_token() where the position is not disclosed.
  Sequence aligned_tokens;
  int variant_index = 0;

  bool operator==(const Hint&) const = default;
};

/// Number of leading positions a PartialSteps hint discloses: ceil(L / 4).
int partial_steps_prefix(int length);

class HintBank {
 public:
  HintBank() = default;
  HintBank(double corruption_rate, int distractor_count, std::uint64_t seed, int null_token);

  double corruption_rate() const { return corruption_rate_; }
  int distractor_count() const { return distractor_count_; }
  std::uint64_t seed() const { return seed_; }
  int null_token() const { return null_token_; }

  bool contains(int task_id) const;
  /// All 8 variants for one (task, type). Throws LookupError when absent.
  const std::vector<Hint>& variants(int task_id, HintType type) const;
  std::vector<int> task_ids() const;
  std::size_t size() const;  // total number of hint records

  /// Inserts (or replaces) the variants of one (task, type) pair.
  void put(int task_id, HintType type, std::vector<Hint> variants);

  bool operator==(const HintBank&) const = default;

 private:
  double corruption_rate_ = 0.2;
  int distractor_count_ = 1;
  std::uint64_t seed_ = 0;
  int null_token_ = 16;
  // Indexed by task id; a slot is empty when the task is not covered.
  std::vector<std::array<std::vector<Hint>, 4>> slots_;
};

/// Builds 8 variants of each hint type for every task in `tasks`.
///
/// AbstractCue: set_tokens = distinct answer symbols plus `distractor_count`
/// random non-answer symbols; nothing positional.
/// PartialSteps: the first ceil(L/4) answer positions.
/// Explanation: the whole answer, each position independently replaced by a
/// different random symbol with probability `corruption_rate`.
/// GoldAnswer: the answer verbatim.
HintBank forge_hints(const TaskSet& tasks, double corruption_rate, int distractor_count,
                     std::uint64_t seed);

/// Uniform draw over the 8 variants of (task_id, type).
const Hint& sample_hint(const HintBank& bank, int task_id, HintType type, Rng& rng);

/// Number of positions where the hint's aligned tokens equal the answer.
int disclosed(const Hint& hint, const Task& task);

}  // namespace nurl

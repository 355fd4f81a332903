// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nurl {

using Sequence = std::vector<int>;

/// Answer symbols are 0..size-1; the extra token `null_token()` marks
/// "nothing emitted" and is never part of an answer.
struct Alphabet {
  int size = 16;

  int null_token() const { return size; }
  int vocabulary() const { return size + 1; }
  bool is_symbol(int tok) const { return tok >= 0 && tok < size; }
};

enum class Difficulty { Easy = 0, Medium = 1, Hard = 2 };
enum class Split { Train = 0, Validation = 1 };

inline constexpr std::array<Difficulty, 3> kAllDifficulties = {
    Difficulty::Easy, Difficulty::Medium, Difficulty::Hard};

std::string_view to_string(Difficulty d);
std::string_view to_string(Split s);
Difficulty difficulty_from_string(std::string_view s);
Split split_from_string(std::string_view s);

struct Task {
  int task_id = 0;
  Sequence answer;
  Difficulty difficulty = Difficulty::Easy;
  Split split = Split::Train;

  bool operator==(const Task&) const = default;
};

/// Number of tasks to generate per difficulty class.
struct ClassCounts {
  int easy = 0;
  int medium = 0;
  int hard = 0;

  int total() const { return easy + medium + hard; }
  int of(Difficulty d) const;
};

struct TaskSet {
  std::vector<Task> tasks;
  std::uint64_t seed = 0;
  int length = 8;
  Alphabet alphabet;

  bool operator==(const TaskSet& o) const {
    return tasks == o.tasks && seed == o.seed && length == o.length &&
           alphabet.size == o.alphabet.size;
  }

  /// Largest task id + 1; the policy sizes its logit table from this.
  int id_span() const;
  const Task& by_id(int task_id) const;
  std::vector<int> ids(Split split) const;
  std::vector<const Task*> select(Split split) const;
  ClassCounts counts() const;
};

/// Generates `counts.total()` tasks with uniformly random answers.
/// Classes are interleaved round-robin (easy, medium, hard, easy, ...) and
/// every tenth task (index % 10 == 9) is tagged validation.
TaskSet generate_tasks(const ClassCounts& counts, int length, Alphabet alphabet,
                       std::uint64_t seed);

/// Rule-based verifier: 1 iff `tokens` equals the answer position-wise.
/// Throws ContractError on a length mismatch.
int verify(std::span<const int> tokens, const Task& task);

}  // namespace nurl

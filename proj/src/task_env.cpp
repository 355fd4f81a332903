// SPDX-License-Identifier: Apache-2.0

#include "nurl/task_env.hpp"

#include <algorithm>

#include "nurl/error.hpp"
#include "nurl/rng.hpp"

namespace nurl {

std::string_view to_string(Difficulty d) {
  switch (d) {
    case Difficulty::Easy: return "easy";
    case Difficulty::Medium: return "medium";
    case Difficulty::Hard: return "hard";
  }
  return "?";
}

std::string_view to_string(Split s) {
  return s == Split::Train ? "train" : "validation";
}

Difficulty difficulty_from_string(std::string_view s) {
  if (s == "easy") return Difficulty::Easy;
  if (s == "medium") return Difficulty::Medium;
  if (s == "hard") return Difficulty::Hard;
  throw ConfigError("unknown difficulty class '" + std::string(s) + "'");
}

Split split_from_string(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "validation") return Split::Validation;
  throw ConfigError("unknown split '" + std::string(s) + "'");
}

int ClassCounts::of(Difficulty d) const {
  switch (d) {
    case Difficulty::Easy: return easy;
    case Difficulty::Medium: return medium;
    case Difficulty::Hard: return hard;
  }
  return 0;
}

int TaskSet::id_span() const {
  int span = 0;
  for (const auto& t : tasks) span = std::max(span, t.task_id + 1);
  return span;
}

const Task& TaskSet::by_id(int task_id) const {
  // Generated sets are dense, so try the direct index first.
  if (task_id >= 0 && task_id < static_cast<int>(tasks.size()) &&
      tasks[task_id].task_id == task_id)
    return tasks[task_id];
  for (const auto& t : tasks)
    if (t.task_id == task_id) return t;
  throw LookupError("no task with id " + std::to_string(task_id));
}

std::vector<int> TaskSet::ids(Split split) const {
  std::vector<int> out;
  for (const auto& t : tasks)
    if (t.split == split) out.push_back(t.task_id);
  return out;
}

std::vector<const Task*> TaskSet::select(Split split) const {
  std::vector<const Task*> out;
  for (const auto& t : tasks)
    if (t.split == split) out.push_back(&t);
  return out;
}

ClassCounts TaskSet::counts() const {
  ClassCounts c;
  for (const auto& t : tasks) {
    switch (t.difficulty) {
      case Difficulty::Easy: ++c.easy; break;
      case Difficulty::Medium: ++c.medium; break;
      case Difficulty::Hard: ++c.hard; break;
    }
  }
  return c;
}

TaskSet generate_tasks(const ClassCounts& counts, int length, Alphabet alphabet,
                       std::uint64_t seed) {
  if (length < 2) throw ConfigError("task length must be >= 2, got " + std::to_string(length));
  if (alphabet.size < 2)
    throw ConfigError("alphabet size must be >= 2, got " + std::to_string(alphabet.size));
  if (counts.easy < 0 || counts.medium < 0 || counts.hard < 0)
    throw ConfigError("per-class task counts must be non-negative");
  if (counts.total() < 1) throw ConfigError("at least one difficulty class needs n >= 1");

  TaskSet set;
  set.seed = seed;
  set.length = length;
  set.alphabet = alphabet;
  set.tasks.reserve(counts.total());

  std::array<int, 3> remaining = {counts.easy, counts.medium, counts.hard};
  Rng rng = make_rng(seed, "tasks");
  int id = 0;
  while (remaining[0] + remaining[1] + remaining[2] > 0) {
    for (const Difficulty d : kAllDifficulties) {
      int& left = remaining[static_cast<int>(d)];
      if (left == 0) continue;
      --left;
      Task t;
      t.task_id = id;
      t.difficulty = d;
      t.split = (id % 10 == 9) ? Split::Validation : Split::Train;
      t.answer.resize(length);
      for (int& sym : t.answer)
        sym = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(alphabet.size)));
      set.tasks.push_back(std::move(t));
      ++id;
    }
  }
  return set;
}

int verify(std::span<const int> tokens, const Task& task) {
  if (tokens.size() != task.answer.size())
    throw ContractError("verify: rollout has " + std::to_string(tokens.size()) +
                        " tokens, task expects " + std::to_string(task.answer.size()));
  return std::equal(tokens.begin(), tokens.end(), task.answer.begin()) ? 1 : 0;
}

}  // namespace nurl

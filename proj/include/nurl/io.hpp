// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nurl/eval.hpp"
#include "nurl/hint_forge.hpp"
#include "nurl/policy.hpp"
#include "nurl/task_env.hpp"
#include "nurl/trainer.hpp"

namespace nurl::io {

using json = nlohmann::ordered_json;

/// Written as a top-level "schema_version" in every file and every
/// JSON-Lines record; readers reject anything else.
inline constexpr int kSchemaVersion = 1;

json to_json(const TaskSet& tasks);
TaskSet task_set_from_json(const json& j);

json to_json(const HintBank& bank);
HintBank hint_bank_from_json(const json& j);

/// {schema_version, version, gamma, beta, theta: [task][t][k]} plus an
/// optional "trainer_state" object used for resuming.
json to_json(const PolicyParams& params);
PolicyParams policy_from_json(const json& j);
json checkpoint_to_json(const TrainerState& state);
TrainerState trainer_state_from_json(const json& j);

json to_json(const TrainRecord& rec);
TrainRecord train_record_from_json(const json& j);
json to_json(const TriggerEvent& ev);
TriggerEvent trigger_event_from_json(const json& j);

json to_json(const EvalReport& report);
/// task_id, difficulty, n, c, pass1, pass@k..., sc_correct
std::string eval_csv(const EvalReport& report, bool with_sc = true);

void check_schema(const json& j, const std::string& what);

json read_json_file(const std::filesystem::path& path);
std::vector<json> read_jsonl_file(const std::filesystem::path& path);
/// Writes `text` to `path` (creating parent directories). Throws
/// std::runtime_error when the file cannot be written.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string dump(const json& j);  // 1-space indent, trailing newline

}  // namespace nurl::io

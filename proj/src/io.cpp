// SPDX-License-Identifier: Apache-2.0

#include "nurl/io.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "nurl/error.hpp"

namespace nurl::io {

void check_schema(const json& j, const std::string& what) {
  if (!j.is_object() || !j.contains("schema_version"))
    throw ConfigError(what + ": missing schema_version");
  const int v = j.at("schema_version").get<int>();
  if (v != kSchemaVersion)
    throw ConfigError(what + ": schema_version " + std::to_string(v) + ", expected " +
                      std::to_string(kSchemaVersion));
}

namespace {

json token_array(const Sequence& seq, int null_token) {
  json a = json::array();
  for (const int t : seq) {
    if (t == null_token) a.push_back(nullptr);
    else a.push_back(t);
  }
  return a;
}

Sequence token_array_from(const json& a, int null_token) {
  Sequence seq;
  for (const auto& v : a) seq.push_back(v.is_null() ? null_token : v.get<int>());
  return seq;
}

}  // namespace

json to_json(const TaskSet& tasks) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["seed"] = tasks.seed;
  j["L"] = tasks.length;
  j["alphabet_size"] = tasks.alphabet.size;
  json arr = json::array();
  for (const Task& t : tasks.tasks) {
    json e;
    e["task_id"] = t.task_id;
    e["answer"] = t.answer;
    e["difficulty_class"] = to_string(t.difficulty);
    e["split"] = to_string(t.split);
    arr.push_back(std::move(e));
  }
  j["tasks"] = std::move(arr);
  return j;
}

TaskSet task_set_from_json(const json& j) {
  check_schema(j, "task file");
  TaskSet s;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.length = j.at("L").get<int>();
  s.alphabet.size = j.at("alphabet_size").get<int>();
  for (const auto& e : j.at("tasks")) {
    Task t;
    t.task_id = e.at("task_id").get<int>();
    t.answer = e.at("answer").get<Sequence>();
    t.difficulty = difficulty_from_string(e.at("difficulty_class").get<std::string>());
    t.split = split_from_string(e.at("split").get<std::string>());
    if (static_cast<int>(t.answer.size()) != s.length)
      throw ConfigError("task " + std::to_string(t.task_id) + " answer length != L");
    for (const int sym : t.answer)
      if (!s.alphabet.is_symbol(sym))
        throw ConfigError("task " + std::to_string(t.task_id) + " has an out-of-range symbol");
    s.tasks.push_back(std::move(t));
  }
  return s;
}

json to_json(const HintBank& bank) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["seed"] = bank.seed();
  j["corruption_rate"] = bank.corruption_rate();
  j["distractor_count"] = bank.distractor_count();
  j["null_token"] = bank.null_token();
  json arr = json::array();
  for (const int id : bank.task_ids()) {
    for (const HintType type : kAllHintTypes) {
      for (const Hint& h : bank.variants(id, type)) {
        json e;
        e["task_id"] = h.task_id;
        e["type"] = to_string(h.type);
        e["variant_index"] = h.variant_index;
        e["set_tokens"] = h.set_tokens;
        e["aligned_tokens"] = token_array(h.aligned_tokens, bank.null_token());
        arr.push_back(std::move(e));
      }
    }
  }
  j["hints"] = std::move(arr);
  return j;
}

HintBank hint_bank_from_json(const json& j) {
  check_schema(j, "hint file");
  const int null_token = j.at("null_token").get<int>();
  HintBank bank(j.at("corruption_rate").get<double>(), j.at("distractor_count").get<int>(),
                j.at("seed").get<std::uint64_t>(), null_token);
  std::map<std::pair<int, int>, std::vector<Hint>> grouped;
  for (const auto& e : j.at("hints")) {
    Hint h;
    h.task_id = e.at("task_id").get<int>();
    h.type = hint_type_from_string(e.at("type").get<std::string>());
    h.variant_index = e.at("variant_index").get<int>();
    h.set_tokens = e.at("set_tokens").get<std::vector<int>>();
    h.aligned_tokens = token_array_from(e.at("aligned_tokens"), null_token);
    grouped[{h.task_id, static_cast<int>(h.type)}].push_back(std::move(h));
  }
  for (auto& [key, variants] : grouped) {
    std::sort(variants.begin(), variants.end(),
              [](const Hint& a, const Hint& b) { return a.variant_index < b.variant_index; });
    if (static_cast<int>(variants.size()) != kHintVariants)
      throw ConfigError("hint file: task " + std::to_string(key.first) + " has " +
                        std::to_string(variants.size()) + " variants of one type, expected 8");
    bank.put(key.first, static_cast<HintType>(key.second), std::move(variants));
  }
  return bank;
}

json to_json(const PolicyParams& p) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["version"] = p.version;
  j["gamma"] = p.gamma;
  j["beta"] = p.beta;
  j["n_tasks"] = p.n_tasks;
  j["L"] = p.length;
  j["alphabet_size"] = p.alphabet_size;
  json theta = json::array();
  for (int task = 0; task < p.n_tasks; ++task) {
    json rows = json::array();
    for (int t = 0; t < p.length; ++t) {
      const auto row = p.logits(task, t);
      rows.push_back(json(std::vector<double>(row.begin(), row.end())));
    }
    theta.push_back(std::move(rows));
  }
  j["theta"] = std::move(theta);
  return j;
}

PolicyParams policy_from_json(const json& j) {
  check_schema(j, "checkpoint");
  PolicyParams p(j.at("n_tasks").get<int>(), j.at("L").get<int>(),
                 j.at("alphabet_size").get<int>());
  p.version = j.at("version").get<std::uint64_t>();
  p.gamma = j.at("gamma").get<double>();
  p.beta = j.at("beta").get<double>();
  const auto& theta = j.at("theta");
  if (static_cast<int>(theta.size()) != p.n_tasks) throw ConfigError("checkpoint: theta shape");
  for (int task = 0; task < p.n_tasks; ++task) {
    const auto& rows = theta[task];
    if (static_cast<int>(rows.size()) != p.length) throw ConfigError("checkpoint: theta shape");
    for (int t = 0; t < p.length; ++t) {
      const auto row = rows[t].get<std::vector<double>>();
      if (static_cast<int>(row.size()) != p.alphabet_size)
        throw ConfigError("checkpoint: theta shape");
      std::copy(row.begin(), row.end(), p.logits(task, t).begin());
    }
  }
  return p;
}

json checkpoint_to_json(const TrainerState& s) {
  json j = to_json(s.params);
  json st;
  st["stage"] = s.stage;
  st["step"] = s.step;
  st["stage_steps"] = s.stage_steps;
  st["stage1_steps"] = s.stage1_steps;
  json hist = json::array();
  for (const auto& [r, v] : s.history) hist.push_back(json::array({r, v}));
  st["history"] = std::move(hist);
  st["stage2_train_ids"] = s.stage2_train_ids;
  st["filter_retained"] = s.filter_retained;
  st["filter_dropped"] = s.filter_dropped;
  st["adam_t"] = s.adam.t;
  st["adam_m"] = s.adam.m;
  st["adam_v"] = s.adam.v;
  j["trainer_state"] = std::move(st);
  return j;
}

TrainerState trainer_state_from_json(const json& j) {
  TrainerState s;
  s.params = policy_from_json(j);
  if (!j.contains("trainer_state")) throw ConfigError("checkpoint has no trainer_state to resume");
  const auto& st = j.at("trainer_state");
  s.stage = st.at("stage").get<int>();
  s.step = st.at("step").get<int>();
  s.stage_steps = st.at("stage_steps").get<int>();
  s.stage1_steps = st.at("stage1_steps").get<int>();
  for (const auto& e : st.at("history"))
    s.history.emplace_back(e.at(0).get<double>(), e.at(1).get<double>());
  s.stage2_train_ids = st.at("stage2_train_ids").get<std::vector<int>>();
  s.filter_retained = st.at("filter_retained").get<int>();
  s.filter_dropped = st.at("filter_dropped").get<int>();
  s.adam.t = st.at("adam_t").get<std::int64_t>();
  s.adam.m = st.at("adam_m").get<std::vector<double>>();
  s.adam.v = st.at("adam_v").get<std::vector<double>>();
  return s;
}

json to_json(const TrainRecord& r) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["stage"] = r.stage;
  j["step"] = r.step;
  j["version"] = r.version;
  j["mean_reward"] = r.mean_reward;
  j["solvable_fraction_pre_hint"] = r.solvable_fraction_pre_hint;
  j["solvable_fraction_post_hint"] = r.solvable_fraction_post_hint;
  j["trigger_count"] = r.trigger_count;
  j["clip_fraction"] = r.clip_fraction;
  j["degenerate_group_fraction"] = r.degenerate_group_fraction;
  j["validation_pass1"] = r.validation_pass1;
  j["groups"] = r.groups;
  j["group_size"] = r.group_size;
  j["rollouts_sampled"] = r.rollouts_sampled;
  j["hinted_rollouts"] = r.hinted_rollouts;
  j["objective"] = r.objective;
  j["grad_norm"] = r.grad_norm;
  j["gamma"] = r.gamma;
  j["beta"] = r.beta;
  j["train_pass1"] = r.train_pass1;
  return j;
}

TrainRecord train_record_from_json(const json& j) {
  check_schema(j, "train record");
  TrainRecord r;
  r.stage = j.at("stage").get<int>();
  r.step = j.at("step").get<int>();
  r.version = j.at("version").get<std::uint64_t>();
  r.mean_reward = j.at("mean_reward").get<double>();
  r.solvable_fraction_pre_hint = j.at("solvable_fraction_pre_hint").get<double>();
  r.solvable_fraction_post_hint = j.at("solvable_fraction_post_hint").get<double>();
  r.trigger_count = j.at("trigger_count").get<int>();
  r.clip_fraction = j.at("clip_fraction").get<double>();
  r.degenerate_group_fraction = j.at("degenerate_group_fraction").get<double>();
  r.validation_pass1 = j.at("validation_pass1").get<double>();
  r.groups = j.at("groups").get<int>();
  r.group_size = j.at("group_size").get<int>();
  r.rollouts_sampled = j.at("rollouts_sampled").get<int>();
  r.hinted_rollouts = j.at("hinted_rollouts").get<int>();
  r.objective = j.at("objective").get<double>();
  r.grad_norm = j.at("grad_norm").get<double>();
  r.gamma = j.at("gamma").get<double>();
  r.beta = j.at("beta").get<double>();
  r.train_pass1 = j.at("train_pass1").get<double>();
  return r;
}

json to_json(const TriggerEvent& e) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["stage"] = e.stage;
  j["step"] = e.step;
  j["task_id"] = e.task_id;
  j["hint_variant_used"] = e.hint_variant;
  j["pre_pass_count"] = e.pre_pass_count;
  j["post_pass_count"] = e.post_pass_count;
  j["hinted_rollouts"] = e.hinted_rollouts;
  return j;
}

TriggerEvent trigger_event_from_json(const json& j) {
  check_schema(j, "trigger event");
  TriggerEvent e;
  e.stage = j.at("stage").get<int>();
  e.step = j.at("step").get<int>();
  e.task_id = j.at("task_id").get<int>();
  e.hint_variant = j.at("hint_variant_used").get<int>();
  e.pre_pass_count = j.at("pre_pass_count").get<int>();
  e.post_pass_count = j.at("post_pass_count").get<int>();
  e.hinted_rollouts = j.at("hinted_rollouts").get<int>();
  return e;
}

namespace {

json k_map(const std::map<int, double>& m) {
  json j = json::object();
  for (const auto& [k, v] : m) j[std::to_string(k)] = v;
  return j;
}

}  // namespace

json to_json(const EvalReport& r) {
  json j;
  j["schema_version"] = kSchemaVersion;
  json cfg;
  cfg["n_samples"] = r.config.n_samples;
  cfg["temperature"] = r.config.temperature;
  cfg["k_grid"] = r.config.k_grid;
  cfg["sc_width"] = r.config.sc_width;
  j["config"] = std::move(cfg);
  json agg;
  agg["tasks"] = r.tasks.size();
  agg["pass1"] = r.pass1;
  agg["pass_at_k"] = k_map(r.pass_at_k);
  agg["sc_accuracy"] = r.sc_accuracy;
  j["aggregate"] = std::move(agg);
  json per = json::array();
  for (const TaskEval& t : r.tasks) {
    json e;
    e["task_id"] = t.task_id;
    e["difficulty_class"] = to_string(t.difficulty);
    e["n_samples"] = t.n;
    e["n_correct"] = t.c;
    e["pass1"] = t.pass1;
    e["pass_at_k"] = k_map(t.pass_at_k);
    e["sc_correct"] = t.sc_correct;
    e["sc_votes"] = t.sc_votes;
    per.push_back(std::move(e));
  }
  j["tasks"] = std::move(per);
  return j;
}

std::string eval_csv(const EvalReport& r, bool with_sc) {
  std::ostringstream out;
  out.precision(17);
  out << "task_id,difficulty_class,n,c,pass1";
  for (const int k : r.config.k_grid) out << ",pass@" << k;
  if (with_sc) out << ",sc_correct";
  out << '\n';
  for (const TaskEval& t : r.tasks) {
    out << t.task_id << ',' << to_string(t.difficulty) << ',' << t.n << ',' << t.c << ','
        << t.pass1;
    for (const int k : r.config.k_grid) out << ',' << t.pass_at_k.at(k);
    if (with_sc) out << ',' << t.sc_correct;
    out << '\n';
  }
  return out.str();
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // Translate the byte offset into a line number for the diagnostic.
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + upto, '\n');
    throw ConfigError(path.string() + ":" + std::to_string(line) + ": malformed JSON: " +
                      e.what());
  }
}

std::vector<json> read_jsonl_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::vector<json> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string dump(const json& j) { return j.dump(1) + "\n"; }

}  // namespace nurl::io

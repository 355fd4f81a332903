// SPDX-License-Identifier: Apache-2.0

#include "nurl/commands.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <sstream>

#include "nurl/error.hpp"
#include "nurl/io.hpp"

namespace nurl::cli {

using io::json;

namespace {

TaskSet load_tasks(const fs::path& p) { return io::task_set_from_json(io::read_json_file(p)); }

std::vector<const Task*> select_tasks(const TaskSet& tasks, const EvalSelection& sel) {
  std::vector<const Task*> out;
  for (const Task& t : tasks.tasks) {
    if (sel.split == "train" && t.split != Split::Train) continue;
    if (sel.split == "validation" && t.split != Split::Validation) continue;
    if (sel.difficulty && t.difficulty != *sel.difficulty) continue;
    out.push_back(&t);
  }
  return out;
}

class JsonlWriter {
 public:
  JsonlWriter(const fs::path& path, bool append)
      : out_(path, append ? std::ios::app : std::ios::trunc) {
    if (!out_) throw ConfigError("cannot write " + path.string());
  }
  void write(const json& j) {
    out_ << j.dump() << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

class RunObserver : public TrainObserver {
 public:
  RunObserver(const fs::path& dir, bool append, std::ostream& log)
      : dir_(dir),
        records_(dir / "train.jsonl", append),
        triggers_(dir / "triggers.jsonl", append),
        log_(log) {}

  void on_record(const TrainRecord& r) override {
    records_.write(io::to_json(r));
    ++n_records_;
  }
  void on_trigger(const TriggerEvent& ev) override { triggers_.write(io::to_json(ev)); }
  void on_checkpoint(const TrainerState& state, std::string_view label) override {
    const fs::path p = dir_ / "checkpoints" / (std::string(label) + ".json");
    io::write_text_file(p, io::dump(io::checkpoint_to_json(state)));
    last_checkpoint = p;
  }
  void on_warning(std::string_view msg) override { log_ << "warning: " << msg << '\n'; }

  fs::path last_checkpoint;
  int n_records_ = 0;

 private:
  fs::path dir_;
  JsonlWriter records_;
  JsonlWriter triggers_;
  std::ostream& log_;
};

// Keeps only lines whose "step" is at most `max_step`, so a resumed run never
// repeats a step number that was logged after the checkpoint was taken.
void truncate_jsonl(const fs::path& path, int max_step) {
  if (!fs::exists(path)) return;
  std::vector<json> kept;
  for (json& j : io::read_jsonl_file(path)) {
    if (j.at("step").get<int>() <= max_step) kept.push_back(std::move(j));
  }
  std::string text;
  for (const json& j : kept) text += j.dump() + "\n";
  io::write_text_file(path, text);
}

}  // namespace

void cmd_gen_tasks(const ExperimentConfig& cfg, const fs::path& out_file, std::ostream& log) {
  Alphabet alphabet;
  alphabet.size = cfg.env.alphabet_size;
  const TaskSet tasks = generate_tasks(cfg.env.n_per_class, cfg.env.length, alphabet,
                                       cfg.env_seed());
  io::write_text_file(out_file, io::dump(io::to_json(tasks)));
  const ClassCounts c = tasks.counts();
  log << "easy " << c.easy << "\nmedium " << c.medium << "\nhard " << c.hard << "\ntotal "
      << c.total() << '\n';
}

void cmd_forge_hints(const ExperimentConfig& cfg, const fs::path& tasks_file,
                     const fs::path& out_file, std::ostream& log) {
  const TaskSet tasks = load_tasks(tasks_file);
  const HintBank bank = forge_hints(tasks, cfg.hints.corruption_rate, cfg.hints.distractor_count,
                                    cfg.hint_seed());
  io::write_text_file(out_file, io::dump(io::to_json(bank)));
  log << bank.task_ids().size() << " tasks, " << bank.size() << " hint records\n";
}

TrainMode train_mode_from_string(const std::string& s) {
  if (s == "grpo") return TrainMode::Grpo;
  if (s == "nurl") return TrainMode::Nurl;
  if (s == "ablation") return TrainMode::Ablation;
  throw ConfigError("unknown mode '" + s + "' (expected grpo|nurl|ablation)");
}

std::string to_string(TrainMode m) {
  switch (m) {
    case TrainMode::Grpo: return "grpo";
    case TrainMode::Nurl: return "nurl";
    case TrainMode::Ablation: return "ablation";
  }
  return "?";
}

std::pair<StageConfig, StageConfig> stages_for(const ExperimentConfig& cfg,
                                               const TrainRequest& req) {
  StageConfig s1 = cfg.stage1;
  StageConfig s2 = cfg.stage2;
  switch (req.mode) {
    case TrainMode::Grpo:
      s1.use_hints = false;
      s2.use_hints = false;
      s2.group_size = s1.group_size;
      break;
    case TrainMode::Nurl:
      s1.use_hints = false;
      s2.use_hints = true;
      s2.difficulty_trigger = true;
      break;
    case TrainMode::Ablation: {
      s2.use_hints = true;
      s2.difficulty_trigger = req.trigger;
      if (req.two_stage) {
        s1.use_hints = false;
      } else {
        // Hinted from the first step: stage 1 takes the hinted stage's
        // rollout settings but keeps its own length and stopping rule.
        StageConfig h = s2;
        h.max_steps = s1.max_steps;
        h.patience = s1.patience;
        h.stop_on_convergence = s1.stop_on_convergence;
        s1 = h;
      }
      break;
    }
  }
  s1.validate();
  s2.validate();
  return {s1, s2};
}

json cmd_train(const ExperimentConfig& cfg, const TrainRequest& req, std::ostream& log) {
  const TaskSet tasks = load_tasks(req.tasks_file);
  const auto [s1, s2] = stages_for(cfg, req);
  const bool needs_hints = s1.use_hints || s2.use_hints;

  std::optional<HintBank> bank;
  if (needs_hints) {
    if (req.hints_file.empty()) throw ConfigError("mode " + to_string(req.mode) + " needs --hints");
    bank = io::hint_bank_from_json(io::read_json_file(req.hints_file));
  }

  std::optional<TrainerState> resume;
  if (req.resume) {
    const json ck = io::read_json_file(*req.resume);
    if (!ck.contains("trainer_state"))
      throw ConfigError(req.resume->string() + ": checkpoint has no trainer_state");
    resume = io::trainer_state_from_json(ck);
  }

  fs::create_directories(req.out_dir / "checkpoints");
  io::write_text_file(req.out_dir / "config.json", io::dump(config_to_json(cfg)));
  if (resume) {
    truncate_jsonl(req.out_dir / "train.jsonl", resume->step);
    truncate_jsonl(req.out_dir / "triggers.jsonl", resume->step);
  }

  TrainOptions opt;
  opt.seed = cfg.train_seed();
  opt.workers = cfg.workers;
  opt.validation_temperature = cfg.eval.temperature;
  opt.probe_group_size = cfg.train.probe_group_size;
  opt.checkpoint_every = cfg.train.checkpoint_every;

  const PolicyParams initial = init_policy(tasks, cfg.policy.init_bias, cfg.policy_seed());
  RunObserver obs(req.out_dir, resume.has_value(), log);

  TrainResult result;
  try {
    result = train(tasks, bank ? &*bank : nullptr, s1, s2, initial, opt, &obs,
                   resume ? &*resume : nullptr);
  } catch (const NumericError& e) {
    std::ostringstream msg;
    msg << e.what();
    if (!obs.last_checkpoint.empty()) msg << " (last checkpoint: " << obs.last_checkpoint.string() << ")";
    throw NumericError(msg.str());
  }

  // Totals come from the full log so a resumed run reports the whole history.
  const std::vector<json> records = io::read_jsonl_file(req.out_dir / "train.jsonl");
  const std::vector<json> triggers = io::read_jsonl_file(req.out_dir / "triggers.jsonl");
  int stage1_steps = 0, stage2_steps = 0;
  for (const json& r : records) (r.at("stage").get<int>() == 1 ? stage1_steps : stage2_steps)++;

  json summary;
  summary["schema_version"] = io::kSchemaVersion;
  summary["mode"] = to_string(req.mode);
  const bool hinted = needs_hints;
  summary["hint_type"] = hinted ? json(std::string(to_string(s2.hint_type))) : json(nullptr);
  summary["two_stage"] = req.mode == TrainMode::Ablation ? req.two_stage : true;
  summary["trigger"] = req.mode == TrainMode::Ablation ? req.trigger : hinted;
  summary["hints"] = hinted;
  summary["stage1_steps"] = stage1_steps;
  summary["stage2_steps"] = stage2_steps;
  summary["total_steps"] = stage1_steps + stage2_steps;
  summary["trigger_total"] = static_cast<int>(triggers.size());
  summary["filter_retained"] = result.filter_retained;
  summary["filter_dropped"] = result.filter_dropped;
  summary["final_validation_pass1"] =
      records.empty() ? 0.0 : records.back().at("validation_pass1").get<double>();
  summary["final_train_pass1"] =
      records.empty() ? 0.0 : records.back().at("train_pass1").get<double>();
  summary["final_gamma"] = result.params.gamma;
  summary["final_copy_gate"] = sigmoid(result.params.gamma);
  summary["final_beta"] = result.params.beta;
  summary["final_version"] = result.params.version;
  summary["warnings"] = result.warnings;
  io::write_text_file(req.out_dir / "summary.json", io::dump(summary));

  log << "stage1 steps " << stage1_steps << ", stage2 steps " << stage2_steps << ", triggers "
      << triggers.size() << ", validation pass1 " << summary["final_validation_pass1"].get<double>()
      << '\n';
  return summary;
}

json cmd_eval(const ExperimentConfig& cfg, const EvalRequest& req, std::ostream& log) {
  const TaskSet tasks = load_tasks(req.tasks_file);
  const PolicyParams params = io::policy_from_json(io::read_json_file(req.checkpoint));
  if (params.n_tasks != static_cast<int>(tasks.tasks.size()) || params.length != tasks.length ||
      params.alphabet_size != tasks.alphabet.size)
    throw ConfigError("checkpoint shape does not match " + req.tasks_file.string());

  EvalConfig ec = cfg.eval;
  if (!req.pass_at_k) ec.k_grid = {1};
  ec.validate();
  const std::vector<const Task*> sel = select_tasks(tasks, cfg.eval_select);
  if (sel.empty()) throw ConfigError("evaluation selection is empty");

  const EvalReport rep = evaluate(params, sel, ec, derive_seed(cfg.seed, "eval-run"), cfg.workers);
  json j = io::to_json(rep);
  if (!req.sc) j["aggregate"].erase("sc_accuracy");
  io::write_text_file(req.out_dir / (req.name + ".json"), io::dump(j));
  io::write_text_file(req.out_dir / (req.name + ".csv"), io::eval_csv(rep, req.sc));

  log << "tasks " << sel.size() << ", pass1 " << rep.pass1;
  if (req.pass_at_k)
    for (const auto& [k, v] : rep.pass_at_k) log << ", pass@" << k << ' ' << v;
  if (req.sc) log << ", sc " << rep.sc_accuracy;
  log << '\n';
  return j;
}

namespace {

struct RunInfo {
  fs::path dir;
  json summary;
  std::vector<json> records;
  std::optional<json> eval;
};

RunInfo load_run(const fs::path& dir) {
  RunInfo r;
  r.dir = dir;
  r.summary = io::read_json_file(dir / "summary.json");
  io::check_schema(r.summary, (dir / "summary.json").string());
  r.records = io::read_jsonl_file(dir / "train.jsonl");
  for (const json& rec : r.records) {
    if (rec.contains("schema_version")) io::check_schema(rec, (dir / "train.jsonl").string());
  }
  if (fs::exists(dir / "eval_report.json")) {
    r.eval = io::read_json_file(dir / "eval_report.json");
    io::check_schema(*r.eval, (dir / "eval_report.json").string());
  }
  return r;
}

std::string fmt(double v) {
  std::ostringstream o;
  o.precision(6);
  o << std::fixed << v;
  return o.str();
}

struct Acc {
  int runs = 0;
  double val = 0.0;
  double eval = 0.0;
  int eval_runs = 0;
  double gate = 0.0;
  void add(const RunInfo& r) {
    ++runs;
    val += r.summary.at("final_validation_pass1").get<double>();
    gate += r.summary.value("final_copy_gate", 0.0);
    if (r.eval) {
      eval += r.eval->at("aggregate").at("pass1").get<double>();
      ++eval_runs;
    }
  }
  std::string row() const {
    std::string s = std::to_string(runs) + "," + fmt(val / runs) + ",";
    s += eval_runs ? fmt(eval / eval_runs) : "";
    return s + "," + fmt(gate / runs);
  }
};

}  // namespace

void cmd_report(const std::vector<fs::path>& run_dirs, const fs::path& out_dir, std::ostream& log) {
  if (run_dirs.empty()) throw ConfigError("report needs at least one run directory");
  std::vector<RunInfo> runs;
  for (const fs::path& d : run_dirs) runs.push_back(load_run(d));

  std::map<int, Acc> by_type;
  std::map<std::pair<bool, bool>, Acc> by_cell;
  const RunInfo* nurl = nullptr;
  const RunInfo* grpo = nullptr;
  for (const RunInfo& r : runs) {
    const std::string mode = r.summary.at("mode").get<std::string>();
    if (mode == "grpo") {
      if (!grpo) grpo = &r;
      continue;
    }
    if (mode == "nurl" && !nurl) nurl = &r;
    const HintType t = hint_type_from_string(r.summary.at("hint_type").get<std::string>());
    by_type[static_cast<int>(t)].add(r);
    by_cell[{r.summary.at("two_stage").get<bool>(), r.summary.at("trigger").get<bool>()}].add(r);
  }

  std::string types = "hint_type,runs,final_validation_pass1,eval_pass1,final_copy_gate\n";
  for (const auto& [t, acc] : by_type)
    types += std::string(to_string(static_cast<HintType>(t))) + "," + acc.row() + "\n";
  io::write_text_file(out_dir / "hint_types.csv", types);

  std::string cells = "two_stage,trigger,runs,final_validation_pass1,eval_pass1,final_copy_gate\n";
  for (const bool two : {true, false})
    for (const bool trig : {true, false}) {
      const auto it = by_cell.find({two, trig});
      if (it == by_cell.end()) continue;
      cells += std::string(two ? "1" : "0") + "," + (trig ? "1" : "0") + "," + it->second.row() + "\n";
    }
  io::write_text_file(out_dir / "ablation.csv", cells);

  std::map<int, std::array<std::string, 3>> series;
  if (nurl)
    for (const json& rec : nurl->records) {
      auto& row = series[rec.at("step").get<int>()];
      row[0] = fmt(rec.at("solvable_fraction_pre_hint").get<double>());
      row[1] = fmt(rec.at("solvable_fraction_post_hint").get<double>());
    }
  if (grpo)
    for (const json& rec : grpo->records)
      series[rec.at("step").get<int>()][2] = fmt(rec.at("solvable_fraction_pre_hint").get<double>());
  std::string sf = "step,nurl_pre_hint,nurl_post_hint,grpo\n";
  for (const auto& [step, row] : series)
    sf += std::to_string(step) + "," + row[0] + "," + row[1] + "," + row[2] + "\n";
  io::write_text_file(out_dir / "solvable_fraction.csv", sf);

  log << "report over " << runs.size() << " runs written to " << out_dir.string() << '\n';
}

}  // namespace nurl::cli

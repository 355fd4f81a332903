// SPDX-License-Identifier: Apache-2.0
//
// Acceptance harness. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "nurl/commands.hpp"
#include "nurl/eval.hpp"
#include "nurl/grpo.hpp"
#include "nurl/io.hpp"
#include "nurl/trainer.hpp"
#include "../support/fixtures.hpp"

namespace nurl::acceptance {
namespace {

namespace fs = std::filesystem;
using io::json;
using fixtures::random_case;

constexpr std::uint64_t kSeeds[] = {1, 2, 3};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// ---- runs shared between criteria ----------------------------------------

struct Run {
  json summary;
  std::vector<json> records;
  std::vector<json> triggers;
  fs::path dir;
};

class Workspace {
 public:
  Workspace(json base, fs::path root) : base_(std::move(base)), root_(std::move(root)) {}

  ExperimentConfig config(std::uint64_t seed, int workers = 1) const {
    json j = base_;
    j["seed"] = seed;
    j["workers"] = workers;
    return parse_config(j);
  }

  fs::path seed_dir(std::uint64_t seed) {
    const fs::path d = root_ / ("seed_" + std::to_string(seed));
    if (!fs::exists(d / "hints.json")) {
      fs::create_directories(d);
      const ExperimentConfig cfg = config(seed);
      cli::cmd_gen_tasks(cfg, d / "tasks.json", log_);
      cli::cmd_forge_hints(cfg, d / "tasks.json", d / "hints.json", log_);
    }
    return d;
  }

  // name is unique per (mode, hint type, cell); results are cached.
  const Run& train(std::uint64_t seed, const std::string& name, cli::TrainMode mode,
                   HintType type = HintType::AbstractCue, bool two_stage = true,
                   bool trigger = true) {
    const std::string key = std::to_string(seed) + "/" + name;
    if (auto it = runs_.find(key); it != runs_.end()) return it->second;
    const fs::path d = seed_dir(seed);
    ExperimentConfig cfg = config(seed);
    cfg.stage2.hint_type = type;
    cli::TrainRequest r;
    r.mode = mode;
    r.two_stage = two_stage;
    r.trigger = trigger;
    r.tasks_file = d / "tasks.json";
    r.hints_file = d / "hints.json";
    r.out_dir = d / name;
    fs::remove_all(r.out_dir);
    Run run;
    run.summary = cli::cmd_train(cfg, r, log_);
    run.records = io::read_jsonl_file(r.out_dir / "train.jsonl");
    run.triggers = io::read_jsonl_file(r.out_dir / "triggers.jsonl");
    run.dir = r.out_dir;
    return runs_.emplace(key, std::move(run)).first->second;
  }

  json eval(std::uint64_t seed, const Run& run, Difficulty cls) {
    ExperimentConfig cfg = config(seed);
    cfg.eval_select.split = "train";
    cfg.eval_select.difficulty = cls;
    cli::EvalRequest e;
    e.tasks_file = seed_dir(seed) / "tasks.json";
    e.checkpoint = run.dir / "checkpoints" / "final.json";
    e.out_dir = run.dir;
    e.name = std::string("eval_train_") + std::string(to_string(cls));
    e.pass_at_k = true;
    return cli::cmd_eval(cfg, e, log_);
  }

  const fs::path& root() const { return root_; }
  std::ostream& log() { return log_; }

 private:
  json base_;
  fs::path root_;
  std::ostringstream log_;
  std::map<std::string, Run> runs_;
};

std::vector<json> stage2(const Run& r) {
  std::vector<json> out;
  for (const json& rec : r.records)
    if (rec.at("stage") == 2) out.push_back(rec);
  return out;
}

// ---- criteria --------------------------------------------------------------

Outcome zero_signal() {
  Rng rng(derive_seed(101, "zero-signal"));
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    std::optional<HintType> type;
    if (i % 5) type = kAllHintTypes[i % 4];
    const auto c = random_case(rng, type);
    RolloutGroup g;
    g.task_id = c.ctx.task_id;
    const int size = 2 + static_cast<int>(uniform_index(rng, 15));
    for (int j = 0; j < size; ++j) {
      Rollout r = sample_rollout(c.params, c.ctx, c.temperature, rng);
      r.reward = i % 2;
      g.rollouts.push_back(std::move(r));
    }
    // Evaluate off-policy so the ratios differ from 1.
    PolicyParams cur = c.params;
    cur.gamma += fixtures::uniform(rng, -1.0, 1.0);
    cur.beta += fixtures::uniform(rng, -1.0, 1.0);
    const SurrogateResult res =
        surrogate_and_grad(g, cur, group_advantages(g.rewards()), ClipConfig{}, c.temperature);
    for (double x : res.grad.theta) worst = std::max(worst, std::abs(x));
    worst = std::max({worst, std::abs(res.grad.gamma), std::abs(res.grad.beta)});
  }
  return {worst < 1e-12, fmt("max |grad| %.3g over 1000 uniform-reward groups", worst)};
}

Outcome gradient_fidelity() {
  Rng rng(derive_seed(102, "fd"));
  const ClipConfig clip;
  double worst_lp = 0.0, worst_sur = 0.0;
  int lo = 0, hi = 0;
  int per_type[4] = {0, 0, 0, 0};
  const int n = 120;
  for (int i = 0; i < n; ++i) {
    std::optional<HintType> type;
    if (i % 5) type = kAllHintTypes[i % 4];
    if (type) ++per_type[static_cast<int>(*type)];
    const auto c = random_case(rng, type);
    worst_lp = std::max(worst_lp, fixtures::logprob_grad_error(c, rng));
    const auto s = fixtures::random_surrogate_case(c, clip, rng);
    lo += s.clipped_low;
    hi += s.clipped_high;
    worst_sur = std::max(worst_sur, fixtures::surrogate_grad_error(c, s, clip));
  }
  const bool types = per_type[0] && per_type[1] && per_type[2] && per_type[3];
  return {worst_lp < 1e-5 && worst_sur < 1e-5 && types && lo > 0 && hi > 0,
          fmt("%d configs, worst rel err logprob %.2e surrogate %.2e, clipped tokens low %d high %d",
              n, worst_lp, worst_sur, lo, hi)};
}

Outcome advantage_normalization() {
  Rng rng(derive_seed(103, "adv"));
  double worst_mean = 0.0, worst_std = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const int size = 2 + static_cast<int>(uniform_index(rng, 63));
    std::vector<int> r(size);
    for (int& x : r) x = static_cast<int>(uniform_index(rng, 2));
    r[0] = 1;
    r[1] = 0;
    const GroupAdvantages a = group_advantages(r);
    long double m = 0, v = 0;
    for (double x : a.values) m += x;
    m /= size;
    for (double x : a.values) v += (x - m) * (x - m);
    worst_mean = std::max(worst_mean, static_cast<double>(std::fabs(m)));
    worst_std = std::max(worst_std, static_cast<double>(std::fabs(std::sqrt(v / size) - 1)));
  }
  const GroupAdvantages ex = group_advantages(std::vector<int>{1, 0, 0, 0});
  bool example = std::abs(ex.values[0] - 1.7321) < 1e-4;
  for (int i = 1; i < 4; ++i) example &= std::abs(ex.values[i] + 0.5774) < 1e-4;
  return {worst_mean < 1e-10 && worst_std < 1e-10 && example,
          fmt("1000 groups, max |mean| %.2e, max |std-1| %.2e, [1,0,0,0] -> [%.4f, %.4f x3]",
              worst_mean, worst_std, ex.values[0], ex.values[1])};
}

Outcome pass_at_k_oracle() {
  int checked = 0, mismatches = 0;
  for (int n = 1; n <= 10; ++n)
    for (int c = 0; c <= n; ++c)
      for (int k = 1; k <= n; ++k) {
        ++checked;
        if (pass_at_k(n, c, k) != fixtures::enumerate_pass_at_k(n, c, k)) ++mismatches;
      }
  return {mismatches == 0, fmt("%d (n,c,k) triples, %d mismatches", checked, mismatches)};
}

Outcome trigger_contract(Workspace& ws) {
  int events = 0, bad = 0;
  for (std::uint64_t seed : kSeeds) {
    const int g = ws.config(seed).stage2.group_size;
    const Run& r = ws.train(seed, "nurl_abstract_cue", cli::TrainMode::Nurl);
    std::map<int, int> per_step;
    for (const json& e : r.triggers) {
      ++events;
      ++per_step[e.at("step").get<int>()];
      if (e.at("stage") != 2 || e.at("pre_pass_count") != 0 || e.at("hinted_rollouts") != g - 1)
        ++bad;
    }
    for (const json& rec : r.records) {
      const int step = rec.at("step").get<int>();
      const int count = rec.at("trigger_count").get<int>();
      if (count != per_step[step]) ++bad;
      if (rec.at("hinted_rollouts").get<int>() != count * (g - 1)) ++bad;
      if (rec.at("stage") == 2) {
        // Every all-fail group must have been regenerated.
        const double failed = (1.0 - rec.at("solvable_fraction_pre_hint").get<double>()) *
                              rec.at("groups").get<int>();
        if (std::abs(failed - count) > 1e-9) ++bad;
      }
    }
  }

  // Direct audit of group contents at the initial policy.
  const ExperimentConfig cfg = ws.config(1);
  const fs::path d = ws.seed_dir(1);
  const TaskSet tasks = io::task_set_from_json(io::read_json_file(d / "tasks.json"));
  const HintBank bank = io::hint_bank_from_json(io::read_json_file(d / "hints.json"));
  const PolicyParams p = init_policy(tasks, cfg.policy.init_bias, cfg.policy_seed());
  Rng rng(derive_seed(105, "groups"));
  int regenerated = 0;
  for (int i = 0; i < 2000; ++i) {
    const Task& t = tasks.tasks[i % tasks.tasks.size()];
    const RolloutGroup grp = run_group(t, p, cfg.stage2, &bank, rng);
    int hinted = 0;
    for (const Rollout& ro : grp.rollouts) hinted += ro.context.has_hint() ? 1 : 0;
    if (grp.regenerated) {
      ++regenerated;
      int pre = 0;
      for (int x : grp.pre_hint_rewards) pre += x;
      if (pre != 0 || hinted != cfg.stage2.group_size - 1 || grp.rollouts.back().context.has_hint())
        ++bad;
    } else if (hinted != 0) {
      ++bad;
    }
  }
  return {bad == 0 && events > 0 && regenerated > 0,
          fmt("%d logged triggers over 3 seeds, %d regenerated groups audited directly, %d violations",
              events, regenerated, bad)};
}

Outcome solvable_fraction(Workspace& ws) {
  std::string detail;
  bool ok = true;
  for (std::uint64_t seed : kSeeds) {
    const std::vector<json> n2 = stage2(ws.train(seed, "nurl_abstract_cue", cli::TrainMode::Nurl));
    const std::vector<json> g2 = stage2(ws.train(seed, "grpo", cli::TrainMode::Grpo));
    if (n2.empty() || g2.size() != n2.size()) {
      ok = false;
      detail += fmt("seed %llu: stage-2 lengths %zu vs %zu; ", (unsigned long long)seed, n2.size(),
                    g2.size());
      continue;
    }
    double lift = 0.0;
    for (const json& r : n2)
      lift += r.at("solvable_fraction_post_hint").get<double>() -
              r.at("solvable_fraction_pre_hint").get<double>();
    lift /= static_cast<double>(n2.size());
    const double nurl_end = n2.back().at("solvable_fraction_pre_hint").get<double>();
    const double grpo_end = g2.back().at("solvable_fraction_pre_hint").get<double>();
    ok &= lift >= 0.02 && nurl_end > grpo_end;
    detail += fmt("seed %llu: lift %+.1f pp, end %.3f vs grpo %.3f; ", (unsigned long long)seed,
                  100 * lift, nurl_end, grpo_end);
  }
  detail.resize(detail.size() - 2);
  return {ok, detail};
}

Outcome hint_type_ordering(Workspace& ws) {
  const HintType order[] = {HintType::AbstractCue, HintType::PartialSteps, HintType::Explanation,
                            HintType::GoldAnswer};
  int weak = 0, gold_worst = 0, gate = 0;
  std::string detail;
  for (std::uint64_t seed : kSeeds) {
    double v[4], g[4];
    for (int i = 0; i < 4; ++i) {
      const std::string name = std::string("nurl_") + std::string(to_string(order[i]));
      const Run& r = ws.train(seed, name, cli::TrainMode::Nurl, order[i]);
      v[i] = r.summary.at("final_validation_pass1").get<double>();
      g[i] = r.summary.at("final_copy_gate").get<double>();
    }
    weak += (v[0] >= v[1] && v[1] >= v[2] && v[2] >= v[3]) ? 1 : 0;
    gold_worst += (v[3] < std::min({v[0], v[1], v[2]})) ? 1 : 0;
    gate += g[3] > g[0] ? 1 : 0;
    detail += fmt("seed %llu: %.5f %.5f %.5f %.5f gate %.4f vs %.4f; ", (unsigned long long)seed,
                  v[0], v[1], v[2], v[3], g[3], g[0]);
  }
  detail += fmt("weak order %d/3, gold_answer worst %d/3, gate %d/3", weak, gold_worst, gate);
  return {weak >= 2 && gold_worst == 3 && gate == 3, detail};
}

Outcome ablation_cells(Workspace& ws) {
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed : kSeeds) {
    double v[2][2];
    for (int two = 1; two >= 0; --two)
      for (int trig = 1; trig >= 0; --trig) {
        const std::string name = fmt("ablation_%d%d", two, trig);
        const Run& r = ws.train(seed, name, cli::TrainMode::Ablation, HintType::AbstractCue,
                                two == 1, trig == 1);
        v[two][trig] = r.summary.at("final_validation_pass1").get<double>();
      }
    const bool best = v[1][1] >= v[1][0] && v[1][1] >= v[0][1] && v[1][1] >= v[0][0];
    wins += best ? 1 : 0;
    detail += fmt("seed %llu: (y,y) %.5f (y,n) %.5f (n,y) %.5f (n,n) %.5f; ",
                  (unsigned long long)seed, v[1][1], v[1][0], v[0][1], v[0][0]);
  }
  detail += fmt("(y,y) best in %d/3", wins);
  return {wins >= 2, detail};
}

Outcome pass_at_k_ceiling(Workspace& ws) {
  int hard_wins = 0, easy_close = 0;
  std::string detail;
  for (std::uint64_t seed : kSeeds) {
    const Run& n = ws.train(seed, "nurl_abstract_cue", cli::TrainMode::Nurl);
    const Run& g = ws.train(seed, "grpo", cli::TrainMode::Grpo);
    auto p64 = [&](const Run& r, Difficulty d) {
      return ws.eval(seed, r, d).at("aggregate").at("pass_at_k").at("64").get<double>();
    };
    const double nh = p64(n, Difficulty::Hard), gh = p64(g, Difficulty::Hard);
    const double ne = p64(n, Difficulty::Easy), ge = p64(g, Difficulty::Easy);
    hard_wins += nh > gh ? 1 : 0;
    easy_close += std::abs(ne - ge) <= 0.02 ? 1 : 0;
    detail += fmt("seed %llu: hard %.3f vs %.3f, easy %.3f vs %.3f; ", (unsigned long long)seed, nh,
                  gh, ne, ge);
  }
  detail += fmt("hard wins %d/3, easy within 0.02 %d/3", hard_wins, easy_close);
  return {hard_wins >= 2 && easy_close == 3, detail};
}

Outcome determinism(Workspace& ws) {
  std::map<int, fs::path> dirs;
  for (int workers : {1, 4}) {
    const ExperimentConfig cfg = ws.config(1, workers);
    const fs::path d = ws.root() / ("determinism_w" + std::to_string(workers));
    fs::remove_all(d);
    fs::create_directories(d);
    cli::cmd_gen_tasks(cfg, d / "tasks.json", ws.log());
    cli::cmd_forge_hints(cfg, d / "tasks.json", d / "hints.json", ws.log());
    cli::TrainRequest r;
    r.mode = cli::TrainMode::Nurl;
    r.tasks_file = d / "tasks.json";
    r.hints_file = d / "hints.json";
    r.out_dir = d / "run";
    cli::cmd_train(cfg, r, ws.log());
    cli::EvalRequest e;
    e.tasks_file = d / "tasks.json";
    e.checkpoint = d / "run" / "checkpoints" / "final.json";
    e.out_dir = d / "run";
    e.pass_at_k = true;
    e.sc = true;
    cli::cmd_eval(cfg, e, ws.log());
    dirs[workers] = d;
  }
  int same = 0, total = 0;
  std::string differing;
  for (const char* f : {"tasks.json", "hints.json", "run/train.jsonl", "run/triggers.jsonl",
                        "run/eval_report.json", "run/eval_report.csv"}) {
    ++total;
    if (slurp(dirs[1] / f) == slurp(dirs[4] / f) && !slurp(dirs[1] / f).empty()) {
      ++same;
    } else {
      differing += std::string(" ") + f;
    }
  }
  return {same == total,
          fmt("%d/%d files byte-identical between 1 and 4 workers%s", same, total,
              differing.empty() ? "" : (" (differ:" + differing + ")").c_str())};
}

Outcome budget_parity(Workspace& ws) {
  int checked = 0, over_cap = 0, over_grpo = 0;
  double worst = 0.0;
  for (std::uint64_t seed : kSeeds) {
    const ExperimentConfig cfg = ws.config(seed);
    const Run& n = ws.train(seed, "nurl_abstract_cue", cli::TrainMode::Nurl);
    const Run& g = ws.train(seed, "grpo", cli::TrainMode::Grpo);
    std::map<int, int> grpo_at;
    for (const json& r : g.records) grpo_at[r.at("step").get<int>()] = r.at("rollouts_sampled");
    for (const json& r : n.records) {
      const StageConfig& st = r.at("stage") == 1 ? cfg.stage1 : cfg.stage2;
      const int sampled = r.at("rollouts_sampled").get<int>();
      const int cap = 2 * st.group_size * st.batch_size;
      ++checked;
      over_cap += sampled > cap ? 1 : 0;
      const auto it = grpo_at.find(r.at("step").get<int>());
      if (it == grpo_at.end() || sampled > it->second) ++over_grpo;
      if (it != grpo_at.end()) worst = std::max(worst, double(sampled) / it->second);
    }
  }
  return {over_cap == 0 && over_grpo == 0 && checked > 0,
          fmt("%d steps audited, %d over 2*G*batch, %d over the GRPO step, max ratio to GRPO %.3f",
              checked, over_cap, over_grpo, worst)};
}

}  // namespace
}  // namespace nurl::acceptance

int main(int argc, char** argv) {
  using namespace nurl::acceptance;
  CLI::App app{"acceptance checks"};
  std::string config_path = NURL_ACCEPTANCE_CONFIG;
  std::string work = (fs::temp_directory_path() / "nurl_acceptance").string();
  app.add_option("--config", config_path, "base experiment config")->check(CLI::ExistingFile);
  app.add_option("--work", work, "scratch directory for runs");
  CLI11_PARSE(app, argc, argv);

  try {
    fs::remove_all(work);
    fs::create_directories(work);
    Workspace ws(nurl::io::read_json_file(config_path), work);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"zero-signal gradient", zero_signal},
        {"gradient fidelity", gradient_fidelity},
        {"advantage normalization", advantage_normalization},
        {"pass@k oracle", pass_at_k_oracle},
        {"trigger/regeneration contract", [&] { return trigger_contract(ws); }},
        {"solvable-fraction unlock", [&] { return solvable_fraction(ws); }},
        {"hint-type ordering", [&] { return hint_type_ordering(ws); }},
        {"ablation-cell ordering", [&] { return ablation_cells(ws); }},
        {"pass@64 ceiling movement", [&] { return pass_at_k_ceiling(ws); }},
        {"determinism across workers", [&] { return determinism(ws); }},
        {"budget parity", [&] { return budget_parity(ws); }},
    };
    // Time limits per criterion, seconds.
    const double limits[] = {5, 30, 5, 5, 600, 600, 1800, 2400, 900, 600, 600};

    int passed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      Outcome o = criteria[i].second();
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (secs > limits[i]) {
        o.pass = false;
        o.detail += fmt("; over time limit %.0f s", limits[i]);
      }
      passed += o.pass ? 1 : 0;
      std::cout << (o.pass ? "PASS" : "FAIL") << "  " << (i + 1) << " " << criteria[i].first
                << ": " << o.detail << fmt(" [%.2f s]", secs) << std::endl;
    }
    std::cout << passed << "/" << criteria.size() << " criteria passed" << std::endl;
    return passed == static_cast<int>(criteria.size()) ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "acceptance: " << e.what() << '\n';
    return 2;
  }
}

// SPDX-License-Identifier: Apache-2.0

#include "nurl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>

#include "nurl/error.hpp"
#include "nurl/eval.hpp"
#include "nurl/parallel.hpp"

namespace nurl {

void StageConfig::validate() const {
  if (group_size < 2) throw ConfigError("group_size (G) must be >= 2");
  if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");
  clip.validate();
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (max_steps < 0) throw ConfigError("max_steps must be >= 0");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (updates_per_step < 1) throw ConfigError("updates_per_step must be >= 1");
}

StageConfig default_grpo_stage() {
  StageConfig s;
  s.group_size = 16;
  s.use_hints = false;
  return s;
}

StageConfig default_nurl_stage() {
  StageConfig s;
  s.group_size = 8;
  s.use_hints = true;
  s.difficulty_trigger = true;
  return s;
}

RolloutGroup run_group(const Task& task, const PolicyParams& snapshot, const StageConfig& stage,
                       const HintBank* bank, Rng& rng) {
  const int G = stage.group_size;
  RolloutGroup group;
  group.task_id = task.task_id;

  const ConditioningContext plain{task.task_id, std::nullopt};
  auto draw = [&](const ConditioningContext& ctx) {
    Rollout r = sample_rollout(snapshot, ctx, stage.temperature, rng);
    r.reward = verify(r.tokens, task);
    return r;
  };

  group.rollouts.reserve(G);
  for (int i = 0; i < G; ++i) group.rollouts.push_back(draw(plain));
  group.pre_hint_rewards = group.rewards();

  const bool all_failed = group.pass_count() == 0;
  if (stage.use_hints && (!stage.difficulty_trigger || all_failed)) {
    if (bank == nullptr) throw ContractError("stage uses hints but no hint bank was given");
    const Hint& hint = sample_hint(*bank, task.task_id, stage.hint_type, rng);
    const ConditioningContext hinted{task.task_id, hint};
    group.regenerated = true;
    group.hint_variant = hint.variant_index;
    group.rollouts.clear();
    for (int i = 0; i < G - 1; ++i) group.rollouts.push_back(draw(hinted));
    group.rollouts.push_back(draw(plain));
  }

  const std::vector<int> rewards = group.rewards();
  group.stats = reward_stats(rewards);
  group.advantages = group_advantages(rewards);
  return group;
}

bool detect_convergence(std::span<const std::pair<double, double>> history, int patience) {
  if (history.empty()) return false;
  double best_reward = history.front().first;
  double best_val = history.front().second;
  int since_reward = 0;
  int since_val = 0;
  for (std::size_t i = 1; i < history.size(); ++i) {
    if (history[i].first > best_reward) {
      best_reward = history[i].first;
      since_reward = 0;
    } else {
      ++since_reward;
    }
    if (history[i].second > best_val) {
      best_val = history[i].second;
      since_val = 0;
    } else {
      ++since_val;
    }
  }
  return since_reward >= patience && since_val >= patience;
}

FilterResult filter_easy(const TaskSet& tasks, const PolicyParams& params, int probe_group_size,
                         double temperature, std::uint64_t seed, int workers) {
  if (probe_group_size < 1) throw ConfigError("probe group size must be >= 1");
  std::vector<char> keep(tasks.tasks.size(), 1);
  parallel_for(tasks.tasks.size(), workers, [&](std::size_t i) {
    const Task& task = tasks.tasks[i];
    if (task.split != Split::Train) return;
    Rng rng = make_rng(seed, "filter-easy", {static_cast<std::uint64_t>(task.task_id)});
    const ConditioningContext ctx{task.task_id, std::nullopt};
    int correct = 0;
    for (int j = 0; j < probe_group_size; ++j)
      correct += verify(sample_rollout(params, ctx, temperature, rng).tokens, task);
    keep[i] = correct < probe_group_size;
  });

  FilterResult out;
  out.tasks.seed = tasks.seed;
  out.tasks.length = tasks.length;
  out.tasks.alphabet = tasks.alphabet;
  for (std::size_t i = 0; i < tasks.tasks.size(); ++i) {
    const Task& task = tasks.tasks[i];
    if (task.split == Split::Train) (keep[i] ? out.retained : out.dropped)++;
    if (keep[i]) out.tasks.tasks.push_back(task);
  }
  return out;
}

double expected_pass1(const PolicyParams& params, std::span<const Task* const> tasks,
                      double temperature) {
  if (tasks.empty()) return 0.0;
  double sum = 0.0;
  for (const Task* t : tasks) sum += success_probability(params, *t, temperature);
  return sum / static_cast<double>(tasks.size());
}

namespace {

class Trainer {
 public:
  Trainer(const TaskSet& tasks, const HintBank* bank, const StageConfig& s1,
          const StageConfig& s2, const TrainOptions& opt, TrainObserver* observer)
      : tasks_(tasks), bank_(bank), stages_{s1, s2}, opt_(opt), observer_(observer) {
    s1.validate();
    s2.validate();
    if (opt.workers < 1) throw ConfigError("workers must be >= 1");
    validation_ = tasks.select(Split::Validation);
    if ((s1.stop_on_convergence || s2.stop_on_convergence) && validation_.empty())
      throw ConfigError("convergence detection needs a non-empty validation split");
    for (const StageConfig* s : {&s1, &s2}) {
      if (!s->use_hints) continue;
      if (bank == nullptr) throw ConfigError("a stage uses hints but no hint bank was given");
      for (const Task& t : tasks.tasks)
        if (t.split == Split::Train && !bank->contains(t.task_id))
          throw ConfigError("hint bank does not cover task " + std::to_string(t.task_id));
    }
  }

  TrainResult run(const PolicyParams& initial, const TrainerState* resume) {
    if (resume) {
      state_ = *resume;
    } else {
      state_.params = initial;
      state_.stage = 1;
    }
    if (state_.params.n_tasks < tasks_.id_span())
      throw ConfigError("policy table is smaller than the task set");

    try {
      if (state_.stage == 1) {
        const std::vector<int> ids = tasks_.ids(Split::Train);
        run_stage(ids);
        state_.stage1_steps = state_.stage_steps;
        const FilterResult filtered =
            filter_easy(tasks_, state_.params, opt_.probe_group_size, opt_.probe_temperature,
                        derive_seed(opt_.seed, "filter"), opt_.workers);
        state_.stage2_train_ids = filtered.tasks.ids(Split::Train);
        state_.filter_retained = filtered.retained;
        state_.filter_dropped = filtered.dropped;
        state_.stage = 2;
        state_.stage_steps = 0;
        state_.history.clear();
        checkpoint("stage1");
        if (state_.stage2_train_ids.empty())
          warn("easy-task filter left no train tasks for stage 2 (dropped " +
               std::to_string(filtered.dropped) + ")");
      }
      if (state_.stage == 2) {
        if (!state_.stage2_train_ids.empty()) run_stage(state_.stage2_train_ids);
        result_.stage2_steps = state_.stage_steps;
        state_.stage = 3;
        checkpoint("final");
      }
    } catch (const NumericError&) {
      checkpoint("abort");
      throw;
    }

    result_.params = state_.params;
    result_.adam = state_.adam;
    result_.stage1_steps = state_.stage1_steps;
    result_.filter_retained = state_.filter_retained;
    result_.filter_dropped = state_.filter_dropped;
    return std::move(result_);
  }

 private:
  const StageConfig& stage() const { return stages_[state_.stage - 1]; }

  void warn(const std::string& msg) {
    result_.warnings.push_back(msg);
    if (observer_) observer_->on_warning(msg);
  }

  void checkpoint(std::string_view label) {
    if (observer_) observer_->on_checkpoint(state_, label);
  }

  void run_stage(const std::vector<int>& train_ids) {
    const StageConfig& cfg = stage();
    while (state_.stage_steps < cfg.max_steps) {
      step(train_ids);
      if (opt_.checkpoint_every > 0 && state_.step % opt_.checkpoint_every == 0) {
        char label[32];
        std::snprintf(label, sizeof label, "step_%06d", state_.step);
        checkpoint(label);
      }
      if (cfg.stop_on_convergence && detect_convergence(state_.history, cfg.patience)) break;
    }
  }

  void step(const std::vector<int>& train_ids) {
    const StageConfig& cfg = stage();
    const int global_step = state_.step + 1;
    const auto stage_key = static_cast<std::uint64_t>(state_.stage);
    const auto step_key = static_cast<std::uint64_t>(global_step);

    std::vector<int> order = train_ids;
    Rng batch_rng = make_rng(opt_.seed, "batch", {stage_key, step_key});
    shuffle(order.begin(), order.end(), batch_rng);
    order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(cfg.batch_size)));

    const PolicyParams old = snapshot(state_.params);
    std::vector<RolloutGroup> groups(order.size());
    parallel_for(order.size(), opt_.workers, [&](std::size_t i) {
      const Task& task = tasks_.by_id(order[i]);
      Rng rng = make_rng(opt_.seed, "group", {stage_key, step_key,
                                              static_cast<std::uint64_t>(task.task_id)});
      groups[i] = run_group(task, old, cfg, bank_, rng);
    });

    TrainRecord rec;
    rec.stage = state_.stage;
    rec.step = global_step;
    rec.groups = static_cast<int>(groups.size());
    rec.group_size = cfg.group_size;
    int reward_sum = 0;
    int rollout_count = 0;
    int degenerate = 0;
    for (const RolloutGroup& g : groups) {
      reward_sum += g.pass_count();
      rollout_count += static_cast<int>(g.rollouts.size());
      rec.rollouts_sampled += g.sampled();
      rec.hinted_rollouts += g.hinted_count();
      if (g.advantages.degenerate) ++degenerate;
      if (g.regenerated) {
        ++rec.trigger_count;
        TriggerEvent ev;
        ev.stage = state_.stage;
        ev.step = global_step;
        ev.task_id = g.task_id;
        ev.hint_variant = g.hint_variant;
        ev.pre_pass_count = 0;
        for (const int r : g.pre_hint_rewards) ev.pre_pass_count += r;
        ev.post_pass_count = g.pass_count();
        ev.hinted_rollouts = g.hinted_count();
        result_.triggers.push_back(ev);
        if (observer_) observer_->on_trigger(ev);
      }
    }
    const double n_groups = static_cast<double>(std::max<std::size_t>(groups.size(), 1));
    rec.mean_reward = rollout_count ? static_cast<double>(reward_sum) / rollout_count : 0.0;
    rec.solvable_fraction_pre_hint = solvable_fraction(groups, HintPhase::PreHint);
    rec.solvable_fraction_post_hint = solvable_fraction(groups, HintPhase::PostHint);
    rec.degenerate_group_fraction = degenerate / n_groups;

    int tokens = 0;
    int clipped = 0;
    for (int u = 0; u < cfg.updates_per_step; ++u) {
      std::vector<SurrogateResult> parts(groups.size());
      parallel_for(groups.size(), opt_.workers, [&](std::size_t i) {
        parts[i] = surrogate_and_grad(groups[i], state_.params, groups[i].advantages, cfg.clip,
                                      cfg.temperature);
      });
      PolicyGradient grad(state_.params);
      double objective = 0.0;
      for (const SurrogateResult& part : parts) {
        objective += part.objective / n_groups;
        tokens += part.tokens;
        clipped += part.clipped_tokens;
        if (!part.skipped) part.grad.add_to(grad, state_.params, 1.0 / n_groups);
      }
      if (!std::isfinite(objective))
        throw NumericError("non-finite surrogate objective at step " + std::to_string(global_step));
      if (u == 0) {
        rec.objective = objective;
        rec.grad_norm = grad.norm();
      }
      optimizer_step(state_.params, grad, cfg.clip, state_.adam);
    }
    rec.clip_fraction = tokens ? static_cast<double>(clipped) / tokens : 0.0;

    rec.version = state_.params.version;
    rec.gamma = state_.params.gamma;
    rec.beta = state_.params.beta;
    rec.validation_pass1 = expected_pass1(state_.params, validation_, opt_.validation_temperature);
    std::vector<const Task*> active;
    active.reserve(train_ids.size());
    for (const int id : train_ids) active.push_back(&tasks_.by_id(id));
    rec.train_pass1 = expected_pass1(state_.params, active, opt_.validation_temperature);

    state_.step = global_step;
    ++state_.stage_steps;
    state_.history.emplace_back(rec.mean_reward, rec.validation_pass1);
    result_.records.push_back(rec);
    if (observer_) observer_->on_record(rec);
  }

  const TaskSet& tasks_;
  const HintBank* bank_;
  StageConfig stages_[2];
  TrainOptions opt_;
  TrainObserver* observer_;
  std::vector<const Task*> validation_;
  TrainerState state_;
  TrainResult result_;
};

}  // namespace

TrainResult train(const TaskSet& tasks, const HintBank* bank, const StageConfig& stage1,
                  const StageConfig& stage2, const PolicyParams& initial,
                  const TrainOptions& options, TrainObserver* observer,
                  const TrainerState* resume) {
  Trainer trainer(tasks, bank, stage1, stage2, options, observer);
  return trainer.run(initial, resume);
}

}  // namespace nurl

// SPDX-License-Identifier: Apache-2.0

#include "nurl/config.hpp"

#include <cstdlib>
#include <set>
#include <type_traits>
#include <utility>

#include "nurl/error.hpp"
#include "nurl/io.hpp"
#include "nurl/rng.hpp"

namespace nurl {

using json = nlohmann::ordered_json;

namespace {

// Reads the fields of one JSON object, remembers which keys were consumed,
// and rejects leftovers in finish().
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) fail("expected an object");
  }

  [[noreturn]] void fail(const std::string& msg, const std::string& key = "") const {
    throw ConfigError("config field '" + (key.empty() ? path_ : field(key)) + "': " + msg);
  }

  std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const json* get(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (const json* v = get(key)) {
      try {
        if constexpr (std::is_same_v<T, bool>) {
          if (!v->is_boolean()) fail("expected true/false", key);
        } else if constexpr (std::is_integral_v<T>) {
          if (!v->is_number_integer()) fail("expected an integer", key);
        } else if constexpr (std::is_floating_point_v<T>) {
          if (!v->is_number()) fail("expected a number", key);
        } else if constexpr (std::is_same_v<T, std::string>) {
          if (!v->is_string()) fail("expected a string", key);
        }
        out = v->get<T>();
      } catch (const json::exception& e) {
        fail(e.what(), key);
      }
    }
  }

  void read_seed(const std::string& key, std::optional<std::uint64_t>& out) {
    if (const json* v = get(key)) {
      if (v->is_null()) return;
      if (!v->is_number_unsigned()) fail("expected a non-negative integer", key);
      out = v->get<std::uint64_t>();
    }
  }

  template <typename Fn>
  void object(const std::string& key, Fn&& fn) {
    if (const json* v = get(key)) {
      ObjectReader sub(*v, field(key));
      fn(sub);
      sub.finish();
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) fail("unknown key", it.key());
  }

  const std::string& path() const { return path_; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_stage(ObjectReader& r, StageConfig& s) {
  r.read("G", s.group_size);
  r.read("temperature", s.temperature);
  r.read("clip_ratio_low", s.clip.eps_low);
  r.read("clip_ratio_high", s.clip.eps_high);
  r.read("lr", s.clip.learning_rate);
  r.read("batch_size", s.batch_size);
  r.read("max_steps", s.max_steps);
  r.read("use_hints", s.use_hints);
  r.read("difficulty_trigger", s.difficulty_trigger);
  std::string type(to_string(s.hint_type));
  r.read("hint_type", type);
  try {
    s.hint_type = hint_type_from_string(type);
  } catch (const ConfigError& e) {
    r.fail(e.what(), "hint_type");
  }
  r.read("patience", s.patience);
  r.read("stop_on_convergence", s.stop_on_convergence);
  r.read("updates_per_step", s.updates_per_step);
  try {
    s.validate();
  } catch (const ConfigError& e) {
    r.fail(e.what());
  }
}

void check(bool ok, const std::string& field, const std::string& msg) {
  if (!ok) throw ConfigError("config field '" + field + "': " + msg);
}

}  // namespace

std::uint64_t ExperimentConfig::env_seed() const {
  return env.seed.value_or(derive_seed(seed, "env"));
}
std::uint64_t ExperimentConfig::hint_seed() const {
  return hints.seed.value_or(derive_seed(seed, "hints"));
}
std::uint64_t ExperimentConfig::policy_seed() const {
  return policy.seed.value_or(derive_seed(seed, "policy"));
}
std::uint64_t ExperimentConfig::train_seed() const {
  return train.seed.value_or(derive_seed(seed, "train"));
}

void ExperimentConfig::validate() const {
  check(workers >= 1, "workers", "must be >= 1");
  check(env.length >= 2, "env.L", "must be >= 2");
  check(env.alphabet_size >= 2, "env.alphabet_size", "must be >= 2");
  check(env.n_per_class.easy >= 0 && env.n_per_class.medium >= 0 && env.n_per_class.hard >= 0,
        "env.n_per_class", "counts must be >= 0");
  check(env.n_per_class.total() >= 1, "env.n_per_class", "at least one class needs n >= 1");
  check(hints.corruption_rate >= 0.0 && hints.corruption_rate <= 1.0, "hints.corruption_rate",
        "must lie in [0, 1]");
  check(hints.distractor_count >= 0, "hints.distractor_count", "must be >= 0");
  check(hints.distractor_count < env.alphabet_size, "hints.distractor_count",
        "must be smaller than the alphabet");
  check(train.checkpoint_every >= 0, "train.checkpoint_every", "must be >= 0");
  check(train.probe_group_size >= 1, "train.probe_G", "must be >= 1");
  for (const auto& [name, stage] : {std::pair{"stage1", &stage1}, std::pair{"stage2", &stage2}}) {
    try {
      stage->validate();
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("config field '") + name + "': " + e.what());
    }
  }
  try {
    eval.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config field 'eval': ") + e.what());
  }
  check(eval_select.split == "train" || eval_select.split == "validation" ||
            eval_select.split == "all",
        "eval.split", "must be train, validation or all");
}

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig cfg;
  ObjectReader root(j, "");
  if (const json* v = root.get("schema_version")) {
    if (!v->is_number_integer() || v->get<int>() != io::kSchemaVersion)
      root.fail("unsupported schema version", "schema_version");
  }
  if (const json* v = root.get("seed")) {
    if (!v->is_number_unsigned()) root.fail("expected a non-negative integer", "seed");
    cfg.seed = v->get<std::uint64_t>();
  }
  root.read("output_dir", cfg.output_dir);
  root.read("workers", cfg.workers);
  root.object("env", [&](ObjectReader& r) {
    r.object("n_per_class", [&](ObjectReader& c) {
      cfg.env.n_per_class = {};
      c.read("easy", cfg.env.n_per_class.easy);
      c.read("medium", cfg.env.n_per_class.medium);
      c.read("hard", cfg.env.n_per_class.hard);
    });
    r.read("L", cfg.env.length);
    r.read("alphabet_size", cfg.env.alphabet_size);
    r.read_seed("seed", cfg.env.seed);
  });
  root.object("hints", [&](ObjectReader& r) {
    r.read("corruption_rate", cfg.hints.corruption_rate);
    r.read("distractor_count", cfg.hints.distractor_count);
    r.read_seed("seed", cfg.hints.seed);
  });
  root.object("policy", [&](ObjectReader& r) {
    r.object("init_bias", [&](ObjectReader& b) {
      b.read("easy", cfg.policy.init_bias.easy);
      b.read("medium", cfg.policy.init_bias.medium);
      b.read("hard", cfg.policy.init_bias.hard);
    });
    r.read_seed("seed", cfg.policy.seed);
  });
  root.object("stage1", [&](ObjectReader& r) { read_stage(r, cfg.stage1); });
  root.object("stage2", [&](ObjectReader& r) { read_stage(r, cfg.stage2); });
  root.object("train", [&](ObjectReader& r) {
    r.read("checkpoint_every", cfg.train.checkpoint_every);
    r.read("probe_G", cfg.train.probe_group_size);
    r.read_seed("seed", cfg.train.seed);
  });
  root.object("eval", [&](ObjectReader& r) {
    r.read("n_samples", cfg.eval.n_samples);
    r.read("temperature", cfg.eval.temperature);
    r.read("k_grid", cfg.eval.k_grid);
    r.read("sc_width", cfg.eval.sc_width);
    r.read("split", cfg.eval_select.split);
    std::string cls;
    r.read("difficulty_class", cls);
    if (!cls.empty()) {
      try {
        cfg.eval_select.difficulty = difficulty_from_string(cls);
      } catch (const ConfigError& e) {
        r.fail(e.what(), "difficulty_class");
      }
    }
  });
  root.finish();
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  const json j = io::read_json_file(path);
  try {
    return parse_config(j);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void apply_env_overrides(ExperimentConfig& cfg) {
  auto parse_u64 = [](const char* name, const char* text) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(text, &end, 10);
    if (end == text || *end != '\0') throw ConfigError(std::string(name) + ": not an integer");
    return static_cast<std::uint64_t>(v);
  };
  if (const char* s = std::getenv("NURL_SEED")) cfg.seed = parse_u64("NURL_SEED", s);
  if (const char* s = std::getenv("NURL_WORKERS")) {
    const auto w = parse_u64("NURL_WORKERS", s);
    if (w < 1 || w > 1024) throw ConfigError("NURL_WORKERS must lie in [1, 1024]");
    cfg.workers = static_cast<int>(w);
  }
  if (const char* s = std::getenv("NURL_OUT")) cfg.output_dir = s;
}

json stage_to_json(const StageConfig& s) {
  json j;
  j["G"] = s.group_size;
  j["temperature"] = s.temperature;
  j["clip_ratio_low"] = s.clip.eps_low;
  j["clip_ratio_high"] = s.clip.eps_high;
  j["lr"] = s.clip.learning_rate;
  j["batch_size"] = s.batch_size;
  j["max_steps"] = s.max_steps;
  j["use_hints"] = s.use_hints;
  j["difficulty_trigger"] = s.difficulty_trigger;
  j["hint_type"] = to_string(s.hint_type);
  j["patience"] = s.patience;
  j["stop_on_convergence"] = s.stop_on_convergence;
  j["updates_per_step"] = s.updates_per_step;
  return j;
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["schema_version"] = io::kSchemaVersion;
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir;
  j["workers"] = cfg.workers;
  j["env"] = {{"n_per_class",
               {{"easy", cfg.env.n_per_class.easy},
                {"medium", cfg.env.n_per_class.medium},
                {"hard", cfg.env.n_per_class.hard}}},
              {"L", cfg.env.length},
              {"alphabet_size", cfg.env.alphabet_size},
              {"seed", cfg.env_seed()}};
  j["hints"] = {{"corruption_rate", cfg.hints.corruption_rate},
                {"distractor_count", cfg.hints.distractor_count},
                {"seed", cfg.hint_seed()}};
  j["policy"] = {{"init_bias",
                  {{"easy", cfg.policy.init_bias.easy},
                   {"medium", cfg.policy.init_bias.medium},
                   {"hard", cfg.policy.init_bias.hard}}},
                 {"seed", cfg.policy_seed()}};
  j["stage1"] = stage_to_json(cfg.stage1);
  j["stage2"] = stage_to_json(cfg.stage2);
  j["train"] = {{"checkpoint_every", cfg.train.checkpoint_every},
                {"probe_G", cfg.train.probe_group_size},
                {"seed", cfg.train_seed()}};
  json ev = {{"n_samples", cfg.eval.n_samples},
             {"temperature", cfg.eval.temperature},
             {"k_grid", cfg.eval.k_grid},
             {"sc_width", cfg.eval.sc_width},
             {"split", cfg.eval_select.split}};
  if (cfg.eval_select.difficulty) ev["difficulty_class"] = to_string(*cfg.eval_select.difficulty);
  j["eval"] = std::move(ev);
  return j;
}

}  // namespace nurl

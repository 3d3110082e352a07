#pragma once

// Run configuration: one flat `key = value` file (# comments, blank lines
// ignored), every field addressable, unknown keys rejected. CLI flags are
// applied on top via the same set_config_value entry point.

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "webrl/common.hpp"
#include "webrl/curriculum.hpp"

namespace webrl {

struct RunConfig {
  std::uint64_t seed = 0;
  int phases = 8;            // curriculum phases after the bootstrap stage
  int tasks_per_phase = 64;  // K
  int rollouts_per_task = 1;
  double beta = 0.1;
  double lambda = 0.5;
  double gamma = 0.9;
  double replay_low = 1.0 / 0.95;  // perplexity band, inclusive
  double replay_high = 1.0 / 0.5;
  double critic_low = 0.05;  // difficulty band for task filtering
  double critic_high = 0.75;
  double temperature = 1.0;
  int horizon = 15;
  std::string method = "webrl";  // webrl | sft | filtered_bc | awr |
                                 // reinforce_baseline | kl_direction
  bool use_replay = true;
  bool critic_uses_replay = true;
  bool store_failed_in_replay = false;
  bool use_curriculum = true;
  bool eval_greedy = true;  // greedy decoding for evaluation rollouts

  double actor_lr = 1.0;
  int actor_epochs = 30;
  double critic_lr = 1.0;
  int critic_epochs = 100;
  double sft_lr = 0.5;
  int sft_epochs = 300;
  double orm_lr = 2.0;
  int orm_epochs = 400;

  int seed_tasks = 200;  // bootstrap task pool size
  int eval_tasks = 100;  // held-out evaluation set size
  int orm_random_rollouts = 4;  // per seed task, untrained policy
  int orm_policy_rollouts = 5;  // per seed task, bootstrap policy
  int max_fill_rounds = 12;
  std::uint64_t replay_capacity = 100000;
  int threads = 1;  // rollout workers; results are thread-count invariant

  MutationWeights mutations;

  // Accepted for compatibility with external run recipes that specify a
  // filtered-BC percentile; this implementation filters on success only
  // and never reads it.
  double filtered_bc_percentile = 0.70;
};

namespace detail {

inline double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double x = std::stod(v, &pos);
    check(pos == v.size(), "");
    return x;
  } catch (...) {
    throw std::runtime_error("config: bad real for " + key + ": '" + v + "'");
  }
}

inline long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    long long x = std::stoll(v, &pos);
    check(pos == v.size(), "");
    return x;
  } catch (...) {
    throw std::runtime_error("config: bad integer for " + key + ": '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::runtime_error("config: bad boolean for " + key + ": '" + v + "'");
}

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace detail

inline const std::vector<std::string>& config_keys();

// Assign one field by key. Throws on unknown keys and unparsable values.
inline void set_config_value(RunConfig& cfg, const std::string& key,
                             const std::string& value) {
  using detail::parse_bool;
  using detail::parse_int;
  using detail::parse_real;
  static const std::map<std::string,
                        std::function<void(RunConfig&, const std::string&)>>
      setters = {
          {"seed", [](RunConfig& c, const std::string& v) {
             c.seed = static_cast<std::uint64_t>(parse_int("seed", v)); }},
          {"phases", [](RunConfig& c, const std::string& v) {
             c.phases = static_cast<int>(parse_int("phases", v)); }},
          {"tasks_per_phase", [](RunConfig& c, const std::string& v) {
             c.tasks_per_phase = static_cast<int>(parse_int("tasks_per_phase", v)); }},
          {"rollouts_per_task", [](RunConfig& c, const std::string& v) {
             c.rollouts_per_task = static_cast<int>(parse_int("rollouts_per_task", v)); }},
          {"beta", [](RunConfig& c, const std::string& v) {
             c.beta = parse_real("beta", v); }},
          {"lambda", [](RunConfig& c, const std::string& v) {
             c.lambda = parse_real("lambda", v); }},
          {"gamma", [](RunConfig& c, const std::string& v) {
             c.gamma = parse_real("gamma", v); }},
          {"replay_low", [](RunConfig& c, const std::string& v) {
             c.replay_low = parse_real("replay_low", v); }},
          {"replay_high", [](RunConfig& c, const std::string& v) {
             c.replay_high = parse_real("replay_high", v); }},
          {"critic_low", [](RunConfig& c, const std::string& v) {
             c.critic_low = parse_real("critic_low", v); }},
          {"critic_high", [](RunConfig& c, const std::string& v) {
             c.critic_high = parse_real("critic_high", v); }},
          {"temperature", [](RunConfig& c, const std::string& v) {
             c.temperature = parse_real("temperature", v); }},
          {"horizon", [](RunConfig& c, const std::string& v) {
             c.horizon = static_cast<int>(parse_int("horizon", v)); }},
          {"method", [](RunConfig& c, const std::string& v) { c.method = v; }},
          {"use_replay", [](RunConfig& c, const std::string& v) {
             c.use_replay = parse_bool("use_replay", v); }},
          {"critic_uses_replay", [](RunConfig& c, const std::string& v) {
             c.critic_uses_replay = parse_bool("critic_uses_replay", v); }},
          {"store_failed_in_replay", [](RunConfig& c, const std::string& v) {
             c.store_failed_in_replay = parse_bool("store_failed_in_replay", v); }},
          {"use_curriculum", [](RunConfig& c, const std::string& v) {
             c.use_curriculum = parse_bool("use_curriculum", v); }},
          {"eval_greedy", [](RunConfig& c, const std::string& v) {
             c.eval_greedy = parse_bool("eval_greedy", v); }},
          {"actor_lr", [](RunConfig& c, const std::string& v) {
             c.actor_lr = parse_real("actor_lr", v); }},
          {"actor_epochs", [](RunConfig& c, const std::string& v) {
             c.actor_epochs = static_cast<int>(parse_int("actor_epochs", v)); }},
          {"critic_lr", [](RunConfig& c, const std::string& v) {
             c.critic_lr = parse_real("critic_lr", v); }},
          {"critic_epochs", [](RunConfig& c, const std::string& v) {
             c.critic_epochs = static_cast<int>(parse_int("critic_epochs", v)); }},
          {"sft_lr", [](RunConfig& c, const std::string& v) {
             c.sft_lr = parse_real("sft_lr", v); }},
          {"sft_epochs", [](RunConfig& c, const std::string& v) {
             c.sft_epochs = static_cast<int>(parse_int("sft_epochs", v)); }},
          {"orm_lr", [](RunConfig& c, const std::string& v) {
             c.orm_lr = parse_real("orm_lr", v); }},
          {"orm_epochs", [](RunConfig& c, const std::string& v) {
             c.orm_epochs = static_cast<int>(parse_int("orm_epochs", v)); }},
          {"seed_tasks", [](RunConfig& c, const std::string& v) {
             c.seed_tasks = static_cast<int>(parse_int("seed_tasks", v)); }},
          {"eval_tasks", [](RunConfig& c, const std::string& v) {
             c.eval_tasks = static_cast<int>(parse_int("eval_tasks", v)); }},
          {"orm_random_rollouts", [](RunConfig& c, const std::string& v) {
             c.orm_random_rollouts = static_cast<int>(parse_int("orm_random_rollouts", v)); }},
          {"orm_policy_rollouts", [](RunConfig& c, const std::string& v) {
             c.orm_policy_rollouts = static_cast<int>(parse_int("orm_policy_rollouts", v)); }},
          {"max_fill_rounds", [](RunConfig& c, const std::string& v) {
             c.max_fill_rounds = static_cast<int>(parse_int("max_fill_rounds", v)); }},
          {"replay_capacity", [](RunConfig& c, const std::string& v) {
             c.replay_capacity = static_cast<std::uint64_t>(parse_int("replay_capacity", v)); }},
          {"threads", [](RunConfig& c, const std::string& v) {
             c.threads = static_cast<int>(parse_int("threads", v)); }},
          {"mut_param_swap", [](RunConfig& c, const std::string& v) {
             c.mutations.param_swap = parse_real("mut_param_swap", v); }},
          {"mut_sibling_shift", [](RunConfig& c, const std::string& v) {
             c.mutations.sibling_shift = parse_real("mut_sibling_shift", v); }},
          {"mut_compose", [](RunConfig& c, const std::string& v) {
             c.mutations.compose = parse_real("mut_compose", v); }},
          {"mut_simplify", [](RunConfig& c, const std::string& v) {
             c.mutations.simplify = parse_real("mut_simplify", v); }},
          {"filtered_bc_percentile", [](RunConfig& c, const std::string& v) {
             c.filtered_bc_percentile = parse_real("filtered_bc_percentile", v); }},
      };
  auto it = setters.find(key);
  check(it != setters.end(), "config: unknown key '" + key + "'");
  it->second(cfg, value);
}

inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "seed", "phases", "tasks_per_phase", "rollouts_per_task", "beta", "lambda",
      "gamma", "replay_low", "replay_high", "critic_low", "critic_high",
      "temperature", "horizon", "method", "use_replay", "critic_uses_replay",
      "store_failed_in_replay", "use_curriculum", "eval_greedy", "actor_lr",
      "actor_epochs", "critic_lr", "critic_epochs", "sft_lr", "sft_epochs",
      "orm_lr", "orm_epochs", "seed_tasks", "eval_tasks", "orm_random_rollouts",
      "orm_policy_rollouts", "max_fill_rounds", "replay_capacity", "threads",
      "mut_param_swap", "mut_sibling_shift", "mut_compose", "mut_simplify",
      "filtered_bc_percentile"};
  return keys;
}

inline void validate_config(const RunConfig& cfg) {
  check(cfg.phases >= 1, "config: phases must be >= 1");
  check(cfg.tasks_per_phase >= 1, "config: tasks_per_phase must be >= 1");
  check(cfg.rollouts_per_task >= 1, "config: rollouts_per_task must be >= 1");
  check(cfg.beta > 0.0, "config: beta must be positive");
  check(cfg.lambda >= 0.0 && cfg.lambda <= 1.0, "config: lambda outside [0,1]");
  check(cfg.gamma > 0.0 && cfg.gamma <= 1.0, "config: gamma outside (0,1]");
  check(cfg.replay_low >= 1.0 && cfg.replay_low < cfg.replay_high,
        "config: replay band must satisfy 1 <= low < high");
  check(cfg.critic_low >= 0.0 && cfg.critic_low < cfg.critic_high &&
            cfg.critic_high <= 1.0,
        "config: critic band must satisfy 0 <= low < high <= 1");
  check(cfg.temperature > 0.0, "config: temperature must be positive");
  check(cfg.horizon >= 1, "config: horizon must be >= 1");
  static const std::vector<std::string> methods = {
      "webrl", "sft", "filtered_bc", "awr", "reinforce_baseline", "kl_direction"};
  check(std::find(methods.begin(), methods.end(), cfg.method) != methods.end(),
        "config: unknown method '" + cfg.method + "'");
  check(cfg.actor_lr > 0 && cfg.critic_lr > 0 && cfg.sft_lr > 0 && cfg.orm_lr > 0,
        "config: learning rates must be positive");
  check(cfg.actor_epochs >= 1 && cfg.critic_epochs >= 1 && cfg.sft_epochs >= 1 &&
            cfg.orm_epochs >= 1,
        "config: epoch counts must be >= 1");
  check(cfg.seed_tasks >= 1 && cfg.eval_tasks >= 1, "config: task pools must be >= 1");
  check(cfg.orm_random_rollouts >= 0 && cfg.orm_policy_rollouts >= 0,
        "config: rollout counts must be >= 0");
  check(cfg.max_fill_rounds >= 1, "config: max_fill_rounds must be >= 1");
  check(cfg.replay_capacity >= 1, "config: replay_capacity must be >= 1");
  check(cfg.threads >= 1, "config: threads must be >= 1");
  double mw = cfg.mutations.param_swap + cfg.mutations.sibling_shift +
              cfg.mutations.compose + cfg.mutations.simplify;
  check(cfg.mutations.param_swap >= 0 && cfg.mutations.sibling_shift >= 0 &&
            cfg.mutations.compose >= 0 && cfg.mutations.simplify >= 0 && mw > 0,
        "config: mutation weights must be non-negative and not all zero");
}

// Parse a config file on top of `base`. Lines are `key = value`; `#` starts
// a comment; blank lines are skipped.
inline RunConfig parse_config_file(const std::string& path, RunConfig base = {}) {
  std::ifstream in(path);
  check(in.good(), "config: cannot open " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string t = detail::trim(line);
    if (t.empty()) continue;
    auto eq = t.find('=');
    check(eq != std::string::npos, "config: " + path + ":" +
                                       std::to_string(lineno) + ": expected key = value");
    std::string key = detail::trim(t.substr(0, eq));
    std::string value = detail::trim(t.substr(eq + 1));
    check(!key.empty() && !value.empty(), "config: " + path + ":" +
                                              std::to_string(lineno) + ": empty key or value");
    set_config_value(base, key, value);
  }
  return base;
}

inline std::string get_config_value(const RunConfig& c, const std::string& key) {
  auto real = [](double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf);
  };
  if (key == "seed") return std::to_string(c.seed);
  if (key == "phases") return std::to_string(c.phases);
  if (key == "tasks_per_phase") return std::to_string(c.tasks_per_phase);
  if (key == "rollouts_per_task") return std::to_string(c.rollouts_per_task);
  if (key == "beta") return real(c.beta);
  if (key == "lambda") return real(c.lambda);
  if (key == "gamma") return real(c.gamma);
  if (key == "replay_low") return real(c.replay_low);
  if (key == "replay_high") return real(c.replay_high);
  if (key == "critic_low") return real(c.critic_low);
  if (key == "critic_high") return real(c.critic_high);
  if (key == "temperature") return real(c.temperature);
  if (key == "horizon") return std::to_string(c.horizon);
  if (key == "method") return c.method;
  if (key == "use_replay") return c.use_replay ? "true" : "false";
  if (key == "critic_uses_replay") return c.critic_uses_replay ? "true" : "false";
  if (key == "store_failed_in_replay") return c.store_failed_in_replay ? "true" : "false";
  if (key == "use_curriculum") return c.use_curriculum ? "true" : "false";
  if (key == "eval_greedy") return c.eval_greedy ? "true" : "false";
  if (key == "actor_lr") return real(c.actor_lr);
  if (key == "actor_epochs") return std::to_string(c.actor_epochs);
  if (key == "critic_lr") return real(c.critic_lr);
  if (key == "critic_epochs") return std::to_string(c.critic_epochs);
  if (key == "sft_lr") return real(c.sft_lr);
  if (key == "sft_epochs") return std::to_string(c.sft_epochs);
  if (key == "orm_lr") return real(c.orm_lr);
  if (key == "orm_epochs") return std::to_string(c.orm_epochs);
  if (key == "seed_tasks") return std::to_string(c.seed_tasks);
  if (key == "eval_tasks") return std::to_string(c.eval_tasks);
  if (key == "orm_random_rollouts") return std::to_string(c.orm_random_rollouts);
  if (key == "orm_policy_rollouts") return std::to_string(c.orm_policy_rollouts);
  if (key == "max_fill_rounds") return std::to_string(c.max_fill_rounds);
  if (key == "replay_capacity") return std::to_string(c.replay_capacity);
  if (key == "threads") return std::to_string(c.threads);
  if (key == "mut_param_swap") return real(c.mutations.param_swap);
  if (key == "mut_sibling_shift") return real(c.mutations.sibling_shift);
  if (key == "mut_compose") return real(c.mutations.compose);
  if (key == "mut_simplify") return real(c.mutations.simplify);
  if (key == "filtered_bc_percentile") return real(c.filtered_bc_percentile);
  throw std::runtime_error("config: unknown key '" + key + "'");
}

// Full round-trippable dump of the resolved configuration.
inline std::string config_to_string(const RunConfig& cfg) {
  std::ostringstream out;
  for (const auto& key : config_keys())
    out << key << " = " << get_config_value(cfg, key) << "\n";
  return out.str();
}

}  // namespace webrl

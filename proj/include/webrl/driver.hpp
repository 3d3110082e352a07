#pragma once

// Training driver: bootstrap stage, curriculum phases, held-out evaluation,
// and the ablation grid. Every run is a pure function of its RunConfig: all
// randomness flows through RngStream::derive tags, artifacts carry no clocks
// or host state, and rollouts may be spread over several threads without
// changing a single output byte.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "webrl/config.hpp"
#include "webrl/critic.hpp"
#include "webrl/curriculum.hpp"
#include "webrl/env.hpp"
#include "webrl/learner.hpp"
#include "webrl/oracle.hpp"
#include "webrl/orm.hpp"
#include "webrl/policy.hpp"
#include "webrl/replay.hpp"
#include "webrl/rollout.hpp"
#include "webrl/site.hpp"
#include "webrl/tasks.hpp"
#include "webrl/trajectory.hpp"

namespace webrl {

// One row of metrics.csv. Success rates are measured on the fixed held-out
// evaluation set after the phase's update; n_success/n_fail count the phase's
// own training rollouts under the labels training actually saw.
struct PhaseResult {
  int phase = 0;
  double success_rate_gt = 0.0;
  double success_rate_orm = 0.0;
  long n_success = 0;
  long n_fail = 0;
  std::size_t buffer_size = 0;
  TrainReport train_report;
};

struct EvalBucket {
  std::string bucket;
  long n = 0;
  long successes = 0;  // simulator-scored, kept as a count so totals add up exactly
  double success_rate = 0.0;
};

struct EvalResult {
  long n = 0;
  long successes_gt = 0;
  long successes_orm = 0;
  double success_rate_gt = 0.0;
  double success_rate_orm = 0.0;
  std::vector<EvalBucket> by_length;        // planner path length buckets
  std::vector<EvalBucket> by_requirements;  // requirement count buckets
};

// Everything a run carries between the bootstrap stage and the phase loop.
struct RunState {
  RunConfig cfg;
  SiteGraph graph;
  TemplateRegistry reg;
  RngStream root;  // never drawn from directly; only derive() children

  PolicyParams actor;
  PolicyParams reference;
  CriticParams critic;
  OrmParams orm;
  ReplayBuffer buffer;
  FailureSet failures;

  std::vector<TaskInstance> seed_pool;
  std::vector<TaskInstance> eval_set;
  std::vector<TaskInstance> phase_tasks;   // most recent phase's training tasks
  std::vector<TaskInstance> last_emitted;  // what the generator produced (may be empty)
  std::set<std::string> emitted_keys;      // seed + eval + every emitted instance

  // Every labeled rollout state collected so far. The critic refits on this
  // whole pool each phase: a phase's data alone is often linearly separable
  // (new failures vs replayed successes), and a converged logistic fit on
  // separable data sends the margins to infinity, wrecking the value scale
  // the difficulty filter depends on. The accumulated pool keeps shared
  // feature bits carrying both labels, so the fit stays calibrated.
  std::vector<CriticExample> critic_pool;

  std::vector<OrmExample> orm_examples;  // full bootstrap dataset, train + heldout
  double orm_train_accuracy = 0.0;
  double orm_heldout_accuracy = 0.0;
  std::size_t orm_train_n = 0;
  std::size_t orm_heldout_n = 0;
  TrainReport sft_report;
  long bootstrap_success = 0;
  long bootstrap_fail = 0;

  std::vector<PhaseResult> results;

  explicit RunState(const RunConfig& c)
      : cfg(c),
        graph(build_default_site(c.seed)),
        reg(graph),
        root(c.seed),
        actor(make_policy()),
        reference(make_policy()),
        critic(make_critic()),
        orm(make_orm()) {
    validate_config(cfg);
    buffer.capacity = cfg.replay_capacity;
  }
};

namespace detail {

// Run f(0..n-1), either inline or on a small worker pool. Every index writes
// only its own slot, so the schedule cannot affect results.
template <class F>
inline void run_indexed(std::size_t n, int threads, F&& f) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  std::size_t workers = std::min(static_cast<std::size_t>(threads), n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      try {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        next.store(n);
      }
    });
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// Sample the evaluation set and the seed pool in one interleaved pass:
// each template cycle tries one evaluation draw and two seed draws. Some
// templates only have a handful of distinct instances (four themes, three
// utility pages), and whichever set sampled first used to swallow them
// whole — leaving the other set, and therefore cloning, with no coverage
// of those templates at all. Together the two sets also never consume more
// than ~3/5 of a template's instance space: instances are never re-issued,
// so whatever they take is gone for the task generator, and a curriculum
// that cannot emit short tasks at all collapses onto the long templates.
// Keys land in `taken` and are never reused.
inline void sample_eval_and_seed(const SiteGraph& g, const TemplateRegistry& reg,
                                 int n_eval, int n_seed, RngStream& eval_rng,
                                 RngStream& seed_rng, std::set<std::string>& taken,
                                 int horizon, std::vector<TaskInstance>& eval_out,
                                 std::vector<TaskInstance>& seed_out) {
  const auto& ids = reg.ids();
  long budget = 200L * (n_eval + n_seed);
  std::map<std::string, long> used;
  auto draw = [&](RngStream& rng, std::vector<TaskInstance>& out, const std::string& tid) {
    // a few tries per slot, so an unlucky duplicate doesn't starve a template
    for (int k = 0; k < 8 && budget > 0; ++k) {
      --budget;
      TaskInstance inst = reg.sample_instance(tid, rng);
      if (taken.count(inst.key())) continue;
      if (!oracle_solve(g, reg, inst, horizon).feasible) continue;
      taken.insert(inst.key());
      out.push_back(std::move(inst));
      ++used[tid];
      return;
    }
  };
  std::size_t cursor = 0;
  while ((static_cast<int>(eval_out.size()) < n_eval ||
          static_cast<int>(seed_out.size()) < n_seed) &&
         budget > 0) {
    const std::string& tid = ids[cursor % ids.size()];
    ++cursor;
    long cap = std::max(2L, reg.at(tid).instance_space() * 3 / 5);
    if (static_cast<int>(eval_out.size()) < n_eval && used[tid] < cap)
      draw(eval_rng, eval_out, tid);
    for (int s = 0; s < 2; ++s)
      if (static_cast<int>(seed_out.size()) < n_seed && used[tid] < cap)
        draw(seed_rng, seed_out, tid);
  }
}

inline std::vector<Action> trajectory_actions(const Trajectory& t) {
  std::vector<Action> a;
  a.reserve(t.steps.size());
  for (const auto& st : t.steps) a.push_back(st.action);
  return a;
}

// Monte-Carlo value targets: every visited state of a finished trajectory is
// labeled with the trajectory's outcome.
inline void append_critic_examples(std::vector<CriticExample>& out, const SiteGraph& g,
                                   const TemplateRegistry& reg, const Trajectory& t,
                                   int dim) {
  for (const auto& st : t.steps)
    out.push_back(make_critic_example(g, reg, st.state, t.instance, t.reward, dim));
  out.push_back(make_critic_example(g, reg, t.final_state, t.instance, t.reward, dim));
}

}  // namespace detail

// Greedy (by default) rollouts of `policy` on a fixed task list, scored both
// by the simulator and by the reward model. Bucket rows keep raw success
// counts so they aggregate to the totals exactly. Bucketing needs one planner
// call per task, so per-phase callers can turn it off.
inline EvalResult evaluate(const SiteGraph& g, const TemplateRegistry& reg,
                           const PolicyParams& policy, const OrmParams& orm,
                           const std::vector<TaskInstance>& tasks,
                           const RunConfig& cfg, RngStream rng_base,
                           bool with_buckets = false) {
  check(!tasks.empty(), "evaluate: empty task list");
  EvalResult res;
  res.n = static_cast<long>(tasks.size());
  std::vector<Trajectory> trajs(tasks.size());
  std::vector<RngStream> streams;
  streams.reserve(tasks.size());
  for (std::size_t i = 0; i < tasks.size(); ++i)
    streams.push_back(rng_base.derive("eval-rollout", static_cast<int>(i), 0, 0));
  detail::run_indexed(tasks.size(), cfg.threads, [&](std::size_t i) {
    trajs[i] = rollout_policy(g, reg, tasks[i], policy, streams[i], 1.0, cfg.horizon,
                              cfg.eval_greedy);
  });

  // bucket index -> (n, successes); length buckets 0..3, requirement 1..3
  std::map<int, std::pair<long, long>> by_len, by_req;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const Trajectory& t = trajs[i];
    bool gt = ground_truth_reward(g, reg, t.instance, t.final_state) == 1.0;
    int orm_label = judge(orm, g, reg, t.instance, detail::trajectory_actions(t),
                          t.final_state);
    res.successes_gt += gt;
    res.successes_orm += orm_label;
    if (with_buckets) {
      OracleResult sol = oracle_solve(g, reg, tasks[i], cfg.horizon);
      int lb = sol.feasible ? length_bucket(sol.length()) : 3;
      by_len[lb].first++;
      by_len[lb].second += gt;
      int rc = reg.at(t.instance.template_id).requirement_count();
      int rb = std::min(rc, 3);
      by_req[rb].first++;
      by_req[rb].second += gt;
    }
  }
  res.success_rate_gt = static_cast<double>(res.successes_gt) / res.n;
  res.success_rate_orm = static_cast<double>(res.successes_orm) / res.n;
  if (with_buckets) {
    static const char* len_names[] = {"len_1_3", "len_4_6", "len_7_9", "len_10_plus"};
    for (const auto& [b, nc] : by_len)
      res.by_length.push_back({len_names[b], nc.first, nc.second,
                               static_cast<double>(nc.second) / nc.first});
    static const char* req_names[] = {"", "req_1", "req_2", "req_3_plus"};
    for (const auto& [b, nc] : by_req)
      res.by_requirements.push_back({req_names[b], nc.first, nc.second,
                                     static_cast<double>(nc.second) / nc.first});
  }
  return res;
}

// Bootstrap stage: sample the evaluation set and the seed pool, clone the
// planner's paths, train the reward model and the initial critic, and charge
// the replay buffer and failure set from the cloned policy's own attempts.
// This is the one stage where simulator labels feed training data; from the
// first phase on, training rewards come from the reward model alone.
inline void run_sft_stage(RunState& st, std::ostream* log = nullptr) {
  const RunConfig& cfg = st.cfg;
  auto say = [&](const std::string& m) {
    if (log) (*log) << m << "\n";
  };

  // Evaluation set and seed pool, sampled together so small templates are
  // split between them rather than consumed by one side. The evaluation set
  // stays fixed for the whole run; both key sets are withheld from the task
  // generator.
  RngStream eval_rng = st.root.derive("eval-set");
  RngStream pool_rng = st.root.derive("seed-pool");
  detail::sample_eval_and_seed(st.graph, st.reg, cfg.eval_tasks, cfg.seed_tasks,
                               eval_rng, pool_rng, st.emitted_keys, cfg.horizon,
                               st.eval_set, st.seed_pool);
  check(!st.eval_set.empty(), "run_sft_stage: could not sample an evaluation set");
  check(!st.seed_pool.empty(), "run_sft_stage: no planner-solvable seed tasks");
  say("bootstrap: " + std::to_string(st.seed_pool.size()) + " seed tasks, " +
      std::to_string(st.eval_set.size()) + " evaluation tasks");

  // Expert demonstrations from the planner.
  std::vector<Trajectory> demos;
  std::vector<DemoItem> demo_items;
  demos.reserve(st.seed_pool.size());
  for (const auto& inst : st.seed_pool) {
    OracleResult sol = oracle_solve(st.graph, st.reg, inst, cfg.horizon);
    check(sol.feasible, "run_sft_stage: seed task became infeasible: " + inst.key());
    Trajectory t = replay_actions(st.graph, inst, sol.actions, cfg.horizon);
    t.reward = ground_truth_reward(st.graph, st.reg, inst, t.final_state);
    t.reward_source = "ground_truth";
    check(t.reward == 1.0, "run_sft_stage: planner path fails for " + inst.key());
    for (const auto& step : t.steps)
      demo_items.push_back(make_demo_item(st.graph, st.reg, step.state, inst, step.action));
    demos.push_back(std::move(t));
  }

  std::vector<OrmExample> orm_data;
  auto add_orm_example = [&](const TaskInstance& inst, const Trajectory& t) {
    OrmExample ex;
    ex.instance = inst;
    ex.history = detail::trajectory_actions(t);
    ex.final_state = t.final_state;
    ex.label = ground_truth_reward(st.graph, st.reg, inst, t.final_state) == 1.0 ? 1 : 0;
    orm_data.push_back(std::move(ex));
  };

  // Reward-model data, part 1: expert paths plus rollouts from the untrained
  // (uniform) policy, which contribute mostly negatives.
  for (const auto& t : demos) add_orm_example(t.instance, t);
  for (std::size_t i = 0; i < st.seed_pool.size(); ++i)
    for (int k = 0; k < cfg.orm_random_rollouts; ++k) {
      RngStream r = st.root.derive("orm-untrained", static_cast<int>(i), k, 0);
      add_orm_example(st.seed_pool[i],
                      rollout_policy(st.graph, st.reg, st.seed_pool[i], st.actor, r,
                                     cfg.temperature, cfg.horizon, false));
    }

  // Behavioural cloning on the expert paths.
  st.sft_report = sft_update(st.actor, demo_items, cfg.sft_lr, cfg.sft_epochs);
  say("bootstrap: cloning loss " + fmt_g6(st.sft_report.loss_before) + " -> " +
      fmt_g6(st.sft_report.loss_after) + " over " +
      std::to_string(demo_items.size()) + " steps");

  // Cloned-policy rollouts on the seed tasks: successes charge the replay
  // buffer, failures charge the curriculum's failure set, and every one is
  // another reward-model example.
  std::vector<Trajectory> seed_rollouts;
  seed_rollouts.reserve(st.seed_pool.size());
  for (std::size_t i = 0; i < st.seed_pool.size(); ++i) {
    RngStream r = st.root.derive("sft-rollout", static_cast<int>(i), 0, 0);
    Trajectory t = rollout_policy(st.graph, st.reg, st.seed_pool[i], st.actor, r,
                                  cfg.temperature, cfg.horizon, false);
    t.reward = ground_truth_reward(st.graph, st.reg, st.seed_pool[i], t.final_state);
    t.reward_source = "ground_truth";
    add_orm_example(st.seed_pool[i], t);
    seed_rollouts.push_back(std::move(t));
  }

  // Reward-model data, part 2: cloned-policy rollouts on mutated variants of
  // the seed tasks, so the model sees instructions beyond the seed keys.
  // These trajectories also widen the critic's bootstrap coverage.
  std::vector<Trajectory> variant_rollouts;
  variant_rollouts.reserve(st.seed_pool.size() * cfg.orm_policy_rollouts);
  for (std::size_t i = 0; i < st.seed_pool.size(); ++i)
    for (int k = 0; k < cfg.orm_policy_rollouts; ++k) {
      RngStream r = st.root.derive("orm-variant", static_cast<int>(i), k, 0);
      TaskInstance inst = st.seed_pool[i];
      if (auto m = detail::apply_mutation(st.reg, inst, cfg.mutations, r, "seed"))
        inst = *m;
      Trajectory t = rollout_policy(st.graph, st.reg, inst, st.actor, r,
                                    cfg.temperature, cfg.horizon, false);
      t.reward = ground_truth_reward(st.graph, st.reg, inst, t.final_state);
      t.reward_source = "ground_truth";
      add_orm_example(inst, t);
      variant_rollouts.push_back(std::move(t));
    }

  for (const auto& t : demos) insert(st.buffer, t, 0);
  for (std::size_t i = 0; i < seed_rollouts.size(); ++i) {
    if (seed_rollouts[i].reward == 1.0) {
      insert(st.buffer, seed_rollouts[i], 0);
      ++st.bootstrap_success;
    } else {
      st.failures.add(st.seed_pool[i], 0);
      ++st.bootstrap_fail;
    }
  }
  say("bootstrap: " + std::to_string(st.bootstrap_success) + "/" +
      std::to_string(seed_rollouts.size()) + " cloned-policy successes, buffer " +
      std::to_string(st.buffer.size()) + ", failures " +
      std::to_string(st.failures.size()));

  // Train the reward model on a 70/30 split and record held-out agreement
  // with the simulator. The deployed model is the one trained on the 70%.
  std::vector<std::size_t> order(orm_data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  RngStream split_rng = st.root.derive("orm-split");
  for (std::size_t i = 0; i + 1 < order.size(); ++i) {
    std::size_t j = i + static_cast<std::size_t>(split_rng.uniform_index(order.size() - i));
    std::swap(order[i], order[j]);
  }
  std::size_t n_train = (orm_data.size() * 7 + 9) / 10;
  std::vector<OrmExample> train, heldout;
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < n_train ? train : heldout).push_back(orm_data[order[i]]);
  st.orm = train_orm(st.graph, st.reg, train, cfg.orm_lr, cfg.orm_epochs);
  st.orm_train_accuracy = evaluate_orm(st.orm, st.graph, st.reg, train);
  st.orm_heldout_accuracy = heldout.empty()
                                ? st.orm_train_accuracy
                                : evaluate_orm(st.orm, st.graph, st.reg, heldout);
  st.orm_train_n = train.size();
  st.orm_heldout_n = heldout.size();
  st.orm_examples = std::move(orm_data);
  say("bootstrap: reward model " + fmt_g6(st.orm_train_accuracy) + " train / " +
      fmt_g6(st.orm_heldout_accuracy) + " heldout agreement (" +
      std::to_string(st.orm_train_n) + "/" + std::to_string(st.orm_heldout_n) +
      " examples)");

  // Critic bootstrap: outcome-labeled states from this stage seed the pool.
  for (const auto& t : demos)
    detail::append_critic_examples(st.critic_pool, st.graph, st.reg, t, st.critic.dim());
  for (const auto& t : seed_rollouts)
    detail::append_critic_examples(st.critic_pool, st.graph, st.reg, t, st.critic.dim());
  for (const auto& t : variant_rollouts)
    detail::append_critic_examples(st.critic_pool, st.graph, st.reg, t, st.critic.dim());
  CriticStepReport crep = critic_fit(st.critic, st.critic_pool, cfg.critic_lr, cfg.critic_epochs);
  say("bootstrap: critic loss " + fmt_g6(crep.loss_before) + " -> " +
      fmt_g6(crep.loss_after) + " over " + std::to_string(st.critic_pool.size()) +
      " states");

  st.reference = st.actor;  // the cloned policy anchors the first phase
}

// One curriculum phase, in strict order: generate tasks, roll out the sealed
// actor, label with the reward model, compute advantages under the pre-update
// critic, admit and cap replay items, fit the critic, update the actor, fold
// the rollouts into the buffer and failure set, and finally advance the
// reference to the updated actor.
inline PhaseResult run_phase(RunState& st, int phase, std::ostream* log = nullptr) {
  check(phase >= 1, "run_phase: phase must be >= 1");
  const RunConfig& cfg = st.cfg;
  PhaseResult pr;
  pr.phase = phase;

  // 1. Task set. With the curriculum off, the first phase's generated set is
  // reused for the whole run.
  std::vector<TaskInstance> tasks;
  st.last_emitted.clear();
  if (cfg.use_curriculum || phase == 1 || st.phase_tasks.empty()) {
    RngStream fill_rng = st.root.derive("fill", phase, 0, 0);
    tasks = fill_phase(st.failures, st.graph, st.reg, st.critic, cfg.tasks_per_phase,
                       fill_rng, cfg.max_fill_rounds, st.emitted_keys, st.seed_pool,
                       cfg.mutations, cfg.horizon, cfg.critic_low, cfg.critic_high,
                       "evolved:" + std::to_string(phase));
    st.last_emitted = tasks;
    if (tasks.empty()) {
      // The generator can dry out late in a run (tight difficulty band, or an
      // exhausted instance space). Training must go on: reuse the previous
      // phase's tasks, or fall back to the seed pool.
      if (!st.phase_tasks.empty()) {
        tasks = st.phase_tasks;
      } else {
        std::size_t take = std::min(st.seed_pool.size(),
                                    static_cast<std::size_t>(cfg.tasks_per_phase));
        tasks.assign(st.seed_pool.begin(), st.seed_pool.begin() + take);
      }
      if (log)
        (*log) << "phase " << phase << ": task generator dried out; reusing "
               << tasks.size() << " tasks\n";
    }
    st.phase_tasks = tasks;
  } else {
    tasks = st.phase_tasks;
  }

  // 2. Rollouts from the sealed actor (identical to the reference here).
  std::size_t n_roll = tasks.size() * static_cast<std::size_t>(cfg.rollouts_per_task);
  std::vector<Trajectory> rollouts(n_roll);
  std::vector<RngStream> streams;
  streams.reserve(n_roll);
  for (std::size_t ti = 0; ti < tasks.size(); ++ti)
    for (int k = 0; k < cfg.rollouts_per_task; ++k)
      streams.push_back(st.root.derive("rollout", phase, static_cast<int>(ti), k));
  detail::run_indexed(n_roll, cfg.threads, [&](std::size_t j) {
    rollouts[j] = rollout_policy(st.graph, st.reg,
                                 tasks[j / cfg.rollouts_per_task], st.actor,
                                 streams[j], cfg.temperature, cfg.horizon, false);
  });

  // 3. Reward-model labels: the only reward this phase trains on.
  for (auto& t : rollouts) {
    t.reward = judge(st.orm, st.graph, st.reg, t.instance,
                     detail::trajectory_actions(t), t.final_state);
    t.reward_source = "orm";
    (t.reward == 1.0 ? pr.n_success : pr.n_fail)++;
  }

  // 4. Advantages for fresh items under the pre-update critic. Reference
  // log-probs are recomputed at temperature 1 rather than reusing the
  // behaviour log-probs, so a non-unit rollout temperature cannot leak into
  // the objective.
  std::vector<BatchItem> fresh;
  for (const auto& t : rollouts) {
    if (t.steps.empty()) continue;
    std::vector<double> adv = advantage(st.critic, st.graph, st.reg, t, cfg.lambda,
                                        cfg.gamma);
    for (std::size_t i = 0; i < t.steps.size(); ++i) {
      const TrajectoryStep& step = t.steps[i];
      std::vector<Action> feas = feasible_actions(st.graph, step.state);
      double ref_lp = log_prob(st.reference, st.graph, st.reg, step.state, t.instance,
                               feas, step.action, 1.0);
      fresh.push_back(make_batch_item(st.graph, st.reg, step.state, t.instance,
                                      step.action, adv[i], ref_lp,
                                      ItemSource::rollout));
    }
  }

  // 5. Replay: confidence-filter the buffer under the current actor, draw at
  // most twice the fresh item count, and rebuild each drawn step against the
  // current reference and critic.
  bool replay_method = cfg.method == "webrl" || cfg.method == "awr";
  std::vector<BatchItem> replayed;
  std::vector<const Trajectory*> replay_trajs;
  if (cfg.use_replay && replay_method && st.buffer.size() > 0 && !fresh.empty()) {
    std::vector<ReplayItem> filtered = filter_by_confidence(
        st.buffer, st.actor, st.graph, st.reg, cfg.replay_low, cfg.replay_high);
    RngStream draw_rng = st.root.derive("replay-draw", phase, 0, 0);
    std::vector<ReplayItem> drawn = draw_capped(filtered, fresh.size(), draw_rng);
    std::map<std::size_t, std::vector<double>> adv_cache;
    for (const ReplayItem& item : drawn) {
      const Trajectory& t = st.buffer.entries[item.entry_index].trajectory;
      auto [it, inserted] = adv_cache.try_emplace(item.entry_index);
      if (inserted) {
        it->second = advantage(st.critic, st.graph, st.reg, t, cfg.lambda, cfg.gamma);
        replay_trajs.push_back(&t);
      }
      std::vector<Action> feas = feasible_actions(st.graph, item.state);
      double ref_lp = log_prob(st.reference, st.graph, st.reg, item.state,
                               item.instance, feas, item.action, 1.0);
      replayed.push_back(make_batch_item(st.graph, st.reg, item.state, item.instance,
                                         item.action, it->second[item.step_index],
                                         ref_lp, ItemSource::replay));
    }
  }

  // 6. Critic update, before the actor moves. Fresh rollout states join the
  // persistent pool; the refit always covers the whole pool so the data never
  // degenerates into a separable fresh-vs-replay split (see RunState). The
  // trajectories drawn for replay this phase are re-appended for this fit
  // only, which tilts the fit toward what the actor is about to train on.
  for (const auto& t : rollouts)
    detail::append_critic_examples(st.critic_pool, st.graph, st.reg, t, st.critic.dim());
  std::vector<CriticExample> critic_data = st.critic_pool;
  if (cfg.critic_uses_replay)
    for (const Trajectory* t : replay_trajs)
      detail::append_critic_examples(critic_data, st.graph, st.reg, *t, st.critic.dim());
  if (!critic_data.empty())
    critic_fit(st.critic, critic_data, cfg.critic_lr, cfg.critic_epochs);

  // 7. Actor update.
  UpdateBatch batch;
  batch.beta = cfg.beta;
  batch.items = fresh;
  batch.items.insert(batch.items.end(), replayed.begin(), replayed.end());
  if (batch.items.empty()) {
    if (log) (*log) << "phase " << phase << ": no training items; skipping update\n";
  } else if (cfg.method == "webrl") {
    pr.train_report = webrl_update(st.actor, batch, cfg.actor_lr, cfg.actor_epochs);
  } else if (cfg.method == "awr") {
    pr.train_report = awr_update(st.actor, batch, cfg.actor_lr, cfg.beta,
                                 cfg.actor_epochs);
  } else if (cfg.method == "filtered_bc") {
    pr.train_report = filtered_bc_update(st.actor, st.graph, st.reg, rollouts,
                                         cfg.actor_lr, cfg.actor_epochs);
  } else if (cfg.method == "reinforce_baseline") {
    UpdateBatch fresh_only{fresh, cfg.beta};
    pr.train_report = reinforce_baseline_update(st.actor, fresh_only, cfg.actor_lr,
                                                cfg.actor_epochs);
  } else if (cfg.method == "kl_direction") {
    // Reference-policy samples only: the objective reweights them in place
    // of anchoring a regression at the reference.
    UpdateBatch fresh_only{fresh, cfg.beta};
    pr.train_report = kl_direction_update(st.actor, fresh_only, cfg.actor_lr,
                                          cfg.beta, cfg.actor_epochs);
  } else {  // "sft": phases only measure the cloned policy
    pr.train_report.items_rollout = static_cast<long>(fresh.size());
  }

  // 8. Fold the labeled rollouts into the buffer and the failure set.
  for (const Trajectory& t : rollouts) {
    insert(st.buffer, t, phase, cfg.store_failed_in_replay);
    if (t.reward != 1.0) st.failures.add(t.instance, phase);
  }

  // 9. The updated actor becomes the next phase's reference.
  st.reference = st.actor;

  // 10. Held-out evaluation of the updated policy.
  EvalResult ev = evaluate(st.graph, st.reg, st.actor, st.orm, st.eval_set, cfg,
                           st.root.derive("eval", phase, 0, 0));
  pr.success_rate_gt = ev.success_rate_gt;
  pr.success_rate_orm = ev.success_rate_orm;
  pr.buffer_size = st.buffer.size();
  st.results.push_back(pr);
  if (log)
    (*log) << "phase " << phase << ": tasks " << tasks.size() << ", success "
           << pr.n_success << "/" << (pr.n_success + pr.n_fail) << ", eval gt "
           << fmt_g6(pr.success_rate_gt) << ", orm " << fmt_g6(pr.success_rate_orm)
           << ", buffer " << pr.buffer_size << ", replay items "
           << pr.train_report.items_replay << "\n";
  return pr;
}

inline void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  check(out.good(), "write_text_file: cannot open " + path);
  out << body;
  check(out.good(), "write_text_file: write failed for " + path);
}

// Task-set artifact. `generated` records whether the list came out of the
// task generator that phase (reused or fallback lists are marked false).
inline void save_task_set(const std::string& path,
                          const std::vector<TaskInstance>& tasks, int phase,
                          bool generated) {
  nlohmann::json j{{"format", "webrl-tasks"},
                   {"version", 1},
                   {"phase", phase},
                   {"generated", generated},
                   {"tasks", tasks}};
  write_text_file(path, j.dump(2) + "\n");
}

struct LoadedTaskSet {
  int phase = 0;
  bool generated = false;
  std::vector<TaskInstance> tasks;
};

inline LoadedTaskSet load_task_set(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "load_task_set: cannot open " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  check(j.value("format", "") == std::string("webrl-tasks"),
        "load_task_set: missing or wrong format tag in " + path);
  LoadedTaskSet out;
  out.phase = j.at("phase").get<int>();
  out.generated = j.at("generated").get<bool>();
  out.tasks = j.at("tasks").get<std::vector<TaskInstance>>();
  return out;
}

inline std::string metrics_header() {
  return "phase,success_rate_gt,success_rate_orm,n_success,n_fail,buffer_size,"
         "loss_before,loss_after,grad_norm,items_rollout,items_replay";
}

inline std::string metrics_row(const PhaseResult& r) {
  std::ostringstream o;
  o << r.phase << ',' << fmt_g6(r.success_rate_gt) << ','
    << fmt_g6(r.success_rate_orm) << ',' << r.n_success << ',' << r.n_fail << ','
    << r.buffer_size << ',' << fmt_g6(r.train_report.loss_before) << ','
    << fmt_g6(r.train_report.loss_after) << ',' << fmt_g6(r.train_report.grad_norm)
    << ',' << r.train_report.items_rollout << ',' << r.train_report.items_replay;
  return o.str();
}

inline std::string eval_csv(const EvalResult& ev) {
  std::ostringstream o;
  o << "bucket,n,successes,success_rate\n";
  o << "all," << ev.n << ',' << ev.successes_gt << ',' << fmt_g6(ev.success_rate_gt)
    << "\n";
  o << "all_orm," << ev.n << ',' << ev.successes_orm << ','
    << fmt_g6(ev.success_rate_orm) << "\n";
  for (const auto& b : ev.by_length)
    o << b.bucket << ',' << b.n << ',' << b.successes << ',' << fmt_g6(b.success_rate)
      << "\n";
  for (const auto& b : ev.by_requirements)
    o << b.bucket << ',' << b.n << ',' << b.successes << ',' << fmt_g6(b.success_rate)
      << "\n";
  return o.str();
}

// Full run: bootstrap stage, then `cfg.phases` curriculum phases, writing
// site.json, config.txt, orm_eval.csv, metrics.csv, eval.csv, per-phase task
// sets, and per-phase checkpoints under `out_dir`. With `bootstrap_only` the
// phase loop is skipped. Artifacts are byte-stable across repeat runs and
// across thread counts.
inline RunState run_training(const RunConfig& cfg, const std::string& out_dir,
                             std::ostream* log = nullptr, bool bootstrap_only = false) {
  validate_config(cfg);
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const std::string ckpt_dir = out_dir + "/checkpoints";
  const std::string phases_dir = out_dir + "/phases";
  fs::create_directories(ckpt_dir);
  fs::create_directories(phases_dir);

  RunState st(cfg);
  write_text_file(out_dir + "/config.txt", config_to_string(cfg));
  save_site(out_dir + "/site.json", st.graph);

  run_sft_stage(st, log);

  save_task_set(phases_dir + "/eval_tasks.json", st.eval_set, 0, false);
  save_task_set(phases_dir + "/seed_tasks.json", st.seed_pool, 0, false);
  {
    std::ostringstream o;
    o << "split,n,accuracy\n"
      << orm_eval_row("train", st.orm_train_n, st.orm_train_accuracy) << "\n"
      << orm_eval_row("heldout", st.orm_heldout_n, st.orm_heldout_accuracy) << "\n";
    write_text_file(out_dir + "/orm_eval.csv", o.str());
  }
  save_policy(ckpt_dir + "/policy_phase_0.json", st.actor, cfg.seed);
  save_critic(ckpt_dir + "/critic_phase_0.json", st.critic, cfg.seed);
  save_orm(ckpt_dir + "/orm.json", st.orm);

  // Phase 0 row: the cloned policy before any phase training.
  {
    PhaseResult p0;
    p0.phase = 0;
    EvalResult ev = evaluate(st.graph, st.reg, st.actor, st.orm, st.eval_set, cfg,
                             st.root.derive("eval", 0, 0, 0));
    p0.success_rate_gt = ev.success_rate_gt;
    p0.success_rate_orm = ev.success_rate_orm;
    p0.n_success = st.bootstrap_success;
    p0.n_fail = st.bootstrap_fail;
    p0.buffer_size = st.buffer.size();
    p0.train_report = st.sft_report;
    st.results.push_back(p0);
    if (log)
      (*log) << "phase 0: eval gt " << fmt_g6(p0.success_rate_gt) << ", orm "
             << fmt_g6(p0.success_rate_orm) << "\n";
  }

  int last_phase = bootstrap_only ? 0 : cfg.phases;
  for (int n = 1; n <= last_phase; ++n) {
    run_phase(st, n, log);
    bool generated = !st.last_emitted.empty();
    save_task_set(phases_dir + "/phase_" + std::to_string(n) + "_tasks.json",
                  generated ? st.last_emitted : st.phase_tasks, n, generated);
    save_policy(ckpt_dir + "/policy_phase_" + std::to_string(n) + ".json", st.actor,
                cfg.seed);
    save_critic(ckpt_dir + "/critic_phase_" + std::to_string(n) + ".json", st.critic,
                cfg.seed);
  }

  std::ostringstream m;
  m << metrics_header() << "\n";
  for (const auto& r : st.results) m << metrics_row(r) << "\n";
  write_text_file(out_dir + "/metrics.csv", m.str());

  save_buffer(ckpt_dir + "/replay.jsonl", st.buffer);

  EvalResult final_ev = evaluate(st.graph, st.reg, st.actor, st.orm, st.eval_set, cfg,
                                 st.root.derive("eval-final", 0, 0, 0), true);
  write_text_file(out_dir + "/eval.csv", eval_csv(final_ev));
  if (log)
    (*log) << "run complete: final eval gt " << fmt_g6(final_ev.success_rate_gt)
           << " over " << final_ev.n << " tasks\n";
  return st;
}

// --- ablation grid ---------------------------------------------------------

struct AblationRow {
  std::string suite;
  std::string variant;
  int phase = 0;
  double mean_sr = 0.0;
  double stderr_sr = 0.0;
  int seeds = 0;
};

struct AblationVariant {
  std::string name;
  RunConfig cfg;
};

inline std::vector<AblationVariant> ablation_variants(const std::string& suite,
                                                      const RunConfig& base) {
  std::vector<AblationVariant> out;
  auto add = [&](const std::string& name, auto&& tweak) {
    RunConfig c = base;
    tweak(c);
    out.push_back({name, std::move(c)});
  };
  if (suite == "components") {
    add("full", [](RunConfig&) {});
    add("no_replay", [](RunConfig& c) { c.use_replay = false; });
    add("no_kl", [](RunConfig& c) { c.method = "awr"; });
    add("no_kl_no_replay", [](RunConfig& c) {
      c.method = "awr";
      c.use_replay = false;
    });
    add("no_curriculum", [](RunConfig& c) { c.use_curriculum = false; });
  } else if (suite == "perplexity_bands") {
    // Confidence bands over stored actions, compared after a single phase so
    // the band is the only thing that has had a chance to act. 1e18 stands in
    // for an unbounded upper limit.
    add("band_all", [](RunConfig& c) {
      c.replay_low = 1.0;
      c.replay_high = 1e18;
      c.phases = 1;
    });
    add("band_high_conf", [](RunConfig& c) {
      c.replay_low = 1.0;
      c.replay_high = 1.0 / 0.95;
      c.phases = 1;
    });
    add("band_mid_conf", [](RunConfig& c) {
      c.replay_low = 1.0 / 0.95;
      c.replay_high = 1.0 / 0.5;
      c.phases = 1;
    });
    add("band_low_conf", [](RunConfig& c) {
      c.replay_low = 1.0 / 0.5;
      c.replay_high = 1e18;
      c.phases = 1;
    });
  } else if (suite == "beta_sweep") {
    for (double b : {0.01, 0.1, 0.5, 1.0, 5.0})
      for (bool replay : {true, false})
        add("beta_" + fmt_g6(b) + (replay ? "_replay" : "_noreplay"),
            [b, replay](RunConfig& c) {
              c.beta = b;
              c.use_replay = replay;
            });
  } else if (suite == "critic_data") {
    add("critic_replay_on", [](RunConfig& c) { c.critic_uses_replay = true; });
    add("critic_replay_off", [](RunConfig& c) { c.critic_uses_replay = false; });
  } else if (suite == "failed_replay") {
    add("success_only", [](RunConfig& c) { c.store_failed_in_replay = false; });
    add("store_failed", [](RunConfig& c) { c.store_failed_in_replay = true; });
  } else if (suite == "objective_compare") {
    for (const char* m :
         {"webrl", "awr", "filtered_bc", "sft", "reinforce_baseline", "kl_direction"})
      add(m, [m](RunConfig& c) { c.method = m; });
  } else {
    throw std::runtime_error("ablation_variants: unknown suite '" + suite + "'");
  }
  return out;
}

// Run every variant of a suite over `n_seeds` consecutive seeds and write
// report.csv (suite,variant,phase,mean_sr,stderr,seeds) under out_dir. The
// per-run artifact trees land in out_dir/runs/.
inline std::vector<AblationRow> run_ablation(const std::string& suite,
                                             const RunConfig& base, int n_seeds,
                                             const std::string& out_dir,
                                             std::ostream* log = nullptr) {
  check(n_seeds >= 1, "run_ablation: n_seeds must be >= 1");
  std::vector<AblationVariant> variants = ablation_variants(suite, base);
  std::vector<AblationRow> rows;
  for (const auto& var : variants) {
    std::vector<std::vector<double>> per_phase(var.cfg.phases + 1);
    for (int s = 0; s < n_seeds; ++s) {
      RunConfig c = var.cfg;
      c.seed = base.seed + static_cast<std::uint64_t>(s);
      std::string run_dir = out_dir + "/runs/" + suite + "_" + var.name + "_seed" +
                            std::to_string(c.seed);
      if (log) (*log) << "=== " << suite << "/" << var.name << " seed " << c.seed << "\n";
      RunState st = run_training(c, run_dir, log);
      for (const auto& r : st.results)
        per_phase[static_cast<std::size_t>(r.phase)].push_back(r.success_rate_gt);
    }
    for (std::size_t p = 0; p < per_phase.size(); ++p) {
      const std::vector<double>& xs = per_phase[p];
      if (xs.empty()) continue;
      double mean = 0.0;
      for (double x : xs) mean += x;
      mean /= static_cast<double>(xs.size());
      double var_sum = 0.0;
      for (double x : xs) var_sum += (x - mean) * (x - mean);
      double sd = xs.size() > 1 ? std::sqrt(var_sum / (xs.size() - 1.0)) : 0.0;
      rows.push_back({suite, var.name, static_cast<int>(p), mean,
                      sd / std::sqrt(static_cast<double>(xs.size())),
                      static_cast<int>(xs.size())});
    }
  }
  std::filesystem::create_directories(out_dir);
  std::ostringstream o;
  o << "suite,variant,phase,mean_sr,stderr,seeds\n";
  for (const auto& r : rows)
    o << r.suite << ',' << r.variant << ',' << r.phase << ',' << fmt_g6(r.mean_sr)
      << ',' << fmt_g6(r.stderr_sr) << ',' << r.seeds << "\n";
  write_text_file(out_dir + "/report.csv", o.str());
  return rows;
}

}  // namespace webrl

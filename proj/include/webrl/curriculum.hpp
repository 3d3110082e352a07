#pragma once

// Self-evolving task generation. Each phase breeds candidate instances
// from previously failed tasks (swap a parameter, shift to a sibling
// template, compose one requirement up, simplify one down), drops
// everything the oracle cannot solve within the horizon, drops everything
// the critic rates outside the target difficulty band, and accumulates
// until the phase quota is met or the round budget runs out.

#include <algorithm>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "webrl/common.hpp"
#include "webrl/critic.hpp"
#include "webrl/oracle.hpp"
#include "webrl/tasks.hpp"

namespace webrl {

inline constexpr double kDifficultyLow = 0.05;
inline constexpr double kDifficultyHigh = 0.75;

struct FailureSet {
  std::vector<std::pair<TaskInstance, int>> entries;  // (instance, phase_failed)

  bool contains(const std::string& key) const { return keys_.count(key) > 0; }

  // Returns false (and leaves the set unchanged) for a duplicate
  // (template, params) pair.
  bool add(const TaskInstance& inst, int phase_failed) {
    if (!keys_.insert(inst.key()).second) return false;
    entries.emplace_back(inst, phase_failed);
    return true;
  }

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }

 private:
  std::set<std::string> keys_;
};

struct MutationWeights {
  double param_swap = 0.4;
  double sibling_shift = 0.3;
  double compose = 0.15;
  double simplify = 0.15;
};

namespace detail {

// Instantiate `target_id`, copying any provided slot values that the target
// allows and sampling the rest.
inline TaskInstance instantiate(const TemplateRegistry& reg,
                                const std::string& target_id,
                                const Params& carried, RngStream& rng,
                                const std::string& origin) {
  const TaskTemplate& t = reg.at(target_id);
  TaskInstance inst;
  inst.template_id = target_id;
  inst.origin = origin;
  for (const auto& slot : t.slots) {
    const auto& vals = t.allowed.at(slot);
    auto it = carried.find(slot);
    if (it != carried.end() &&
        std::binary_search(vals.begin(), vals.end(), it->second))
      inst.params[slot] = it->second;
    else
      inst.params[slot] = vals[rng.uniform_index(vals.size())];
  }
  inst.instruction = render_instruction(t, inst.params);
  return inst;
}

// Remap the seed's parameters through a mutation link's slot_map
// (seed slot -> target slot), then instantiate the link target.
inline TaskInstance follow_link(const TemplateRegistry& reg,
                                const TaskInstance& seed,
                                const TaskTemplate::Link& link, RngStream& rng,
                                const std::string& origin) {
  Params carried;
  for (const auto& [mine, theirs] : link.slot_map) {
    auto it = seed.params.find(mine);
    if (it != seed.params.end()) carried[theirs] = it->second;
  }
  return instantiate(reg, link.target, carried, rng, origin);
}

inline std::optional<TaskInstance> mutate_param_swap(const TemplateRegistry& reg,
                                                     const TaskInstance& seed,
                                                     RngStream& rng,
                                                     const std::string& origin) {
  const TaskTemplate& t = reg.at(seed.template_id);
  const std::string& slot = t.slots[rng.uniform_index(t.slots.size())];
  const auto& vals = t.allowed.at(slot);
  if (vals.size() < 2) return std::nullopt;  // nothing to swap to
  std::string replacement;
  do {
    replacement = vals[rng.uniform_index(vals.size())];
  } while (replacement == seed.params.at(slot));
  TaskInstance inst = seed;
  inst.origin = origin;
  inst.params[slot] = replacement;
  inst.instruction = render_instruction(t, inst.params);
  return inst;
}

inline std::optional<TaskInstance> mutate_sibling_shift(const TemplateRegistry& reg,
                                                        const TaskInstance& seed,
                                                        RngStream& rng,
                                                        const std::string& origin) {
  const TaskTemplate& t = reg.at(seed.template_id);
  if (t.siblings.empty()) return std::nullopt;
  const std::string& target = t.siblings[rng.uniform_index(t.siblings.size())];
  // Same-named slots carry over where the sibling accepts their value.
  return instantiate(reg, target, seed.params, rng, origin);
}

inline std::optional<TaskInstance> mutate_compose(const TemplateRegistry& reg,
                                                  const TaskInstance& seed,
                                                  RngStream& rng,
                                                  const std::string& origin) {
  const TaskTemplate& t = reg.at(seed.template_id);
  if (t.compose.empty()) return std::nullopt;
  return follow_link(reg, seed, t.compose[rng.uniform_index(t.compose.size())], rng,
                     origin);
}

inline std::optional<TaskInstance> mutate_simplify(const TemplateRegistry& reg,
                                                   const TaskInstance& seed,
                                                   RngStream& rng,
                                                   const std::string& origin) {
  const TaskTemplate& t = reg.at(seed.template_id);
  if (t.simplify.empty()) return std::nullopt;  // already at the floor
  return follow_link(reg, seed, t.simplify[rng.uniform_index(t.simplify.size())], rng,
                     origin);
}

inline std::optional<TaskInstance> apply_mutation(const TemplateRegistry& reg,
                                                  const TaskInstance& seed,
                                                  const MutationWeights& w,
                                                  RngStream& rng,
                                                  const std::string& origin) {
  double total = w.param_swap + w.sibling_shift + w.compose + w.simplify;
  check(w.param_swap >= 0 && w.sibling_shift >= 0 && w.compose >= 0 &&
            w.simplify >= 0 && total > 0,
        "apply_mutation: bad mutation weights");
  double u = rng.u01() * total;
  if ((u -= w.param_swap) < 0) return mutate_param_swap(reg, seed, rng, origin);
  if ((u -= w.sibling_shift) < 0) return mutate_sibling_shift(reg, seed, rng, origin);
  if ((u -= w.compose) < 0) return mutate_compose(reg, seed, rng, origin);
  return mutate_simplify(reg, seed, rng, origin);
}

}  // namespace detail

// Breed up to n fresh candidates: draw a failed task uniformly, mutate it,
// keep the result when it duplicates neither the failure set nor anything
// in `avoid`. Produced keys are added to `avoid` so one call never repeats
// itself and the caller can chain calls. Attempts are bounded, so a nearly
// exhausted instance space degrades to a short return, not a hang.
inline std::vector<TaskInstance> evolve(const FailureSet& failures,
                                        const SiteGraph& /*graph*/,
                                        const TemplateRegistry& reg, int n,
                                        RngStream& rng, const MutationWeights& weights,
                                        std::set<std::string>& avoid,
                                        const std::string& origin = "evolved") {
  check(!failures.empty(), "evolve: empty failure set");
  check(n > 0, "evolve: n must be positive");
  std::vector<TaskInstance> out;
  int attempts_left = 16 * n;
  while (static_cast<int>(out.size()) < n && attempts_left-- > 0) {
    const TaskInstance& seed =
        failures.entries[rng.uniform_index(failures.size())].first;
    auto cand = detail::apply_mutation(reg, seed, weights, rng, origin);
    if (!cand) continue;
    std::string key = cand->key();
    if (failures.contains(key) || !avoid.insert(key).second) continue;
    out.push_back(std::move(*cand));
  }
  return out;
}

// Keep exactly the candidates the oracle can solve within the horizon.
// Order is preserved.
inline std::vector<TaskInstance> feasibility_filter(
    const std::vector<TaskInstance>& candidates, const SiteGraph& graph,
    const TemplateRegistry& reg, int horizon = kDefaultHorizon) {
  std::vector<TaskInstance> out;
  for (const auto& c : candidates)
    if (oracle_solve(graph, reg, c, horizon).feasible) out.push_back(c);
  return out;
}

// Keep candidates whose critic value at the reset state falls inside
// [low, high] — hard tasks score near 0 and are unlearnable right now,
// easy ones near 1 and teach nothing.
inline std::vector<TaskInstance> difficulty_filter(
    const std::vector<TaskInstance>& candidates, const CriticParams& critic,
    const SiteGraph& graph, const TemplateRegistry& reg,
    double low = kDifficultyLow, double high = kDifficultyHigh) {
  check(low >= 0.0 && low < high && high <= 1.0,
        "difficulty_filter: need 0 <= low < high <= 1");
  std::vector<TaskInstance> out;
  EnvState s0 = reset(graph);
  for (const auto& c : candidates) {
    double v = value(critic, graph, reg, s0, c);
    if (v >= low && v <= high) out.push_back(c);
  }
  return out;
}

// One phase's instruction set: evolve -> feasibility -> difficulty, looped
// until K instances accumulate or max_rounds runs out. An empty failure set
// (nothing failed yet) falls back to breeding from `seed_pool`. Keys of the
// returned instances are left in `avoid`, which is how cross-phase
// no-duplicate emission is enforced.
inline std::vector<TaskInstance> fill_phase(
    const FailureSet& failures, const SiteGraph& graph, const TemplateRegistry& reg,
    const CriticParams& critic, int K, RngStream& rng, int max_rounds,
    std::set<std::string>& avoid, const std::vector<TaskInstance>& seed_pool,
    const MutationWeights& weights = {}, int horizon = kDefaultHorizon,
    double low = kDifficultyLow, double high = kDifficultyHigh,
    const std::string& origin = "evolved") {
  check(K > 0, "fill_phase: K must be positive");
  check(max_rounds > 0, "fill_phase: max_rounds must be positive");

  const FailureSet* source = &failures;
  FailureSet fallback;
  if (failures.empty()) {
    check(!seed_pool.empty(), "fill_phase: no failures and no seed pool");
    for (const auto& inst : seed_pool) fallback.add(inst, 0);
    source = &fallback;
  }

  // Candidates rejected by a filter may be proposed again in a later phase
  // (the critic will have moved), so evolve dedups against a scratch copy;
  // only the accepted keys go back into the caller's avoid set.
  std::set<std::string> proposed = avoid;
  std::vector<TaskInstance> accepted;
  for (int round = 0; round < max_rounds && static_cast<int>(accepted.size()) < K;
       ++round) {
    int want = K - static_cast<int>(accepted.size());
    auto cands = evolve(*source, graph, reg, 2 * want, rng, weights, proposed, origin);
    if (cands.empty()) continue;
    cands = feasibility_filter(cands, graph, reg, horizon);
    cands = difficulty_filter(cands, critic, graph, reg, low, high);
    for (auto& c : cands) {
      if (static_cast<int>(accepted.size()) >= K) break;
      accepted.push_back(std::move(c));
    }
  }
  for (const auto& c : accepted) avoid.insert(c.key());
  if (static_cast<int>(accepted.size()) < (K + 1) / 2)
    std::cerr << "fill_phase: only " << accepted.size() << " of " << K
              << " instances after " << max_rounds << " rounds; proceeding\n";
  return accepted;
}

}  // namespace webrl

#pragma once

// Shortest-solution oracle. Breadth-first search over (page, projected
// scratch): the scratch map is projected onto the keys the task's
// predicates read plus the scroll flags gating any item the task mentions.
// Action effects are key-local, so dropping irrelevant keys never changes
// the feasibility or success of a projected path — it only collapses states
// that differ in ways the task cannot observe.

#include <algorithm>
#include <map>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "webrl/env.hpp"
#include "webrl/site.hpp"
#include "webrl/tasks.hpp"

namespace webrl {

struct OracleResult {
  bool feasible = false;
  std::vector<Action> actions;  // ends with exit unless the horizon forced stop

  int length() const { return static_cast<int>(actions.size()); }
};

// Length buckets used by evaluation reports: 1-3, 4-6, 7-9, 10+.
inline int length_bucket(int n) {
  if (n <= 3) return 0;
  if (n <= 6) return 1;
  if (n <= 9) return 2;
  return 3;
}

namespace detail {

// Scratch keys the oracle tracks for an instance.
inline std::set<std::string> projection_keys(const SiteGraph& g,
                                             const TemplateRegistry& reg,
                                             const TaskInstance& inst) {
  const TaskTemplate& t = reg.at(inst.template_id);
  std::set<std::string> keys;
  for (const auto& k : t.relevant_keys(inst.params)) keys.insert(k);
  // Scroll gates: clicking a below-the-fold item needs its category's
  // scroll flag, so track the flag of every item the task names.
  for (const auto& [slot, value] : inst.params) {
    auto it = g.item_category.find(value);
    if (it != g.item_category.end()) keys.insert("scrolled:" + it->second);
  }
  return keys;
}

inline void project_scratch(EnvState& s, const std::set<std::string>& keys) {
  for (auto it = s.scratch.begin(); it != s.scratch.end();) {
    if (keys.count(it->first) == 0)
      it = s.scratch.erase(it);
    else
      ++it;
  }
}

inline std::string node_key(const EnvState& s) {
  std::string k = s.page;
  for (const auto& [key, v] : s.scratch) k += "\x1f" + key + "=" + v;
  return k;
}

inline bool goal_reached(const SiteGraph& g, const TemplateRegistry& reg,
                         const TaskInstance& inst, const EnvState& s) {
  return ground_truth_reward(g, reg, inst, s) == 1.0;
}

}  // namespace detail

// Shortest action sequence (ties broken toward the canonical action order)
// that completes the instance within `horizon` steps, or infeasible.
inline OracleResult oracle_solve(const SiteGraph& g, const TemplateRegistry& reg,
                                 const TaskInstance& inst,
                                 int horizon = kDefaultHorizon) {
  reg.validate(inst);
  auto keys = detail::projection_keys(g, reg, inst);

  struct Node {
    EnvState state;
    int parent;  // index into nodes, -1 for root
    Action via;
  };
  std::vector<Node> nodes;
  std::map<std::string, int> seen;

  EnvState root = reset(g);
  detail::project_scratch(root, keys);
  nodes.push_back({root, -1, {}});
  seen[detail::node_key(root)] = 0;

  auto reconstruct = [&](int idx) {
    std::vector<Action> path;
    for (int i = idx; nodes[static_cast<std::size_t>(i)].parent >= 0;
         i = nodes[static_cast<std::size_t>(i)].parent)
      path.push_back(nodes[static_cast<std::size_t>(i)].via);
    std::reverse(path.begin(), path.end());
    return path;
  };

  std::queue<std::pair<int, int>> frontier;  // node index, depth
  frontier.push({0, 0});
  while (!frontier.empty()) {
    auto [idx, depth] = frontier.front();
    frontier.pop();
    EnvState cur = nodes[static_cast<std::size_t>(idx)].state;

    if (detail::goal_reached(g, reg, inst, cur)) {
      OracleResult res;
      res.feasible = true;
      res.actions = reconstruct(idx);
      // Exiting takes a step of its own unless the horizon already ended
      // the episode.
      if (depth < horizon) res.actions.push_back({ActionKind::Exit, ""});
      return res;
    }
    if (depth >= horizon) continue;  // depth-horizon states are terminal

    cur.step_index = 0;  // keep step() happy; depth is tracked separately
    for (const auto& a : feasible_actions(g, cur)) {
      if (a.kind == ActionKind::Exit) continue;
      EnvState next = step(g, cur, a, horizon).state;
      next.history.clear();
      next.step_index = 0;
      detail::project_scratch(next, keys);
      auto key = detail::node_key(next);
      if (seen.count(key)) continue;
      seen[key] = static_cast<int>(nodes.size());
      nodes.push_back({next, idx, a});
      frontier.push({static_cast<int>(nodes.size()) - 1, depth + 1});
    }
  }
  return {};
}

}  // namespace webrl

#pragma once

// Sampling episodes from a policy. One u01 draw per step, so a rollout is
// fully determined by its RNG stream, the policy version, and the site.

#include "webrl/policy.hpp"
#include "webrl/trajectory.hpp"

namespace webrl {

inline Trajectory rollout_policy(const SiteGraph& g, const TemplateRegistry& reg,
                                 const TaskInstance& inst, const PolicyParams& params,
                                 RngStream& rng, double temperature = 1.0,
                                 int horizon = kDefaultHorizon, bool greedy = false) {
  Trajectory traj;
  traj.instance = inst;
  EnvState s = reset(g);
  bool terminal = false;
  while (!terminal) {
    auto feasible = feasible_actions(g, s);
    auto dist = action_probs(params, g, reg, s, inst, feasible, temperature);
    const Action& a = greedy ? greedy_action(dist) : sample(dist, rng);
    double lp = 0.0;
    for (std::size_t i = 0; i < dist.support.size(); ++i)
      if (dist.support[i] == a) lp = std::log(dist.probs[static_cast<long>(i)]);
    auto res = step(g, s, a, horizon);
    traj.steps.push_back({std::move(s), a, lp});
    s = std::move(res.state);
    terminal = res.terminal;
  }
  traj.final_state = std::move(s);
  traj.terminal = true;
  return traj;
}

}  // namespace webrl

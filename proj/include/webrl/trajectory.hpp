#pragma once

// Episode records. In memory a step keeps its full pre-action state; on
// disk only a digest is stored and states are rebuilt by replaying the
// action sequence from reset, with the digests acting as a checksum.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "webrl/env.hpp"
#include "webrl/tasks.hpp"

namespace webrl {

struct TrajectoryStep {
  EnvState state;  // state the action was taken in
  Action action;
  double behavior_log_prob = 0.0;  // log prob under the policy that acted
};

struct Trajectory {
  TaskInstance instance;
  std::vector<TrajectoryStep> steps;
  EnvState final_state;
  bool terminal = false;
  double reward = 0.0;
  std::string reward_source = "none";  // ground_truth | orm | none

  int length() const { return static_cast<int>(steps.size()); }
};

// Execute a fixed action sequence from reset, recording every step. Used
// for oracle demonstrations and for rebuilding loaded trajectories.
inline Trajectory replay_actions(const SiteGraph& g, const TaskInstance& inst,
                                 const std::vector<Action>& actions,
                                 int horizon = kDefaultHorizon) {
  Trajectory traj;
  traj.instance = inst;
  EnvState s = reset(g);
  bool terminal = false;
  for (const auto& a : actions) {
    check(!terminal, "replay_actions: actions continue past terminal state");
    auto res = step(g, s, a, horizon);
    traj.steps.push_back({s, a, 0.0});
    s = std::move(res.state);
    terminal = res.terminal;
  }
  traj.final_state = std::move(s);
  traj.terminal = terminal;
  return traj;
}

inline nlohmann::json trajectory_to_json(const Trajectory& t) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& st : t.steps)
    steps.push_back({{"state", state_digest(st.state)},
                     {"action", st.action},
                     {"behavior_log_prob", st.behavior_log_prob}});
  return nlohmann::json{{"instance", t.instance},
                        {"steps", steps},
                        {"terminal", t.terminal},
                        {"reward", t.reward},
                        {"reward_source", t.reward_source}};
}

// Parse one JSONL record, rebuilding states by replay and checking each
// stored digest against the rebuilt state.
inline Trajectory trajectory_from_json(const nlohmann::json& j, const SiteGraph& g,
                                       int horizon = kDefaultHorizon) {
  TaskInstance inst = j.at("instance").get<TaskInstance>();
  std::vector<Action> actions;
  std::vector<double> lps;
  std::vector<std::string> digests;
  for (const auto& js : j.at("steps")) {
    actions.push_back(js.at("action").get<Action>());
    lps.push_back(js.at("behavior_log_prob").get<double>());
    digests.push_back(js.at("state").get<std::string>());
  }
  Trajectory t = replay_actions(g, inst, actions, horizon);
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    check(state_digest(t.steps[i].state) == digests[i],
          "trajectory_from_json: state digest mismatch at step " + std::to_string(i));
    t.steps[i].behavior_log_prob = lps[i];
  }
  t.terminal = j.at("terminal").get<bool>();
  t.reward = j.at("reward").get<double>();
  t.reward_source = j.at("reward_source").get<std::string>();
  return t;
}

inline void save_trajectories(const std::string& path,
                              const std::vector<Trajectory>& trajs) {
  std::ofstream out(path);
  check(out.good(), "save_trajectories: cannot open " + path);
  for (const auto& t : trajs) out << trajectory_to_json(t).dump() << "\n";
  check(out.good(), "save_trajectories: write failed for " + path);
}

inline std::vector<Trajectory> load_trajectories(const std::string& path,
                                                 const SiteGraph& g,
                                                 int horizon = kDefaultHorizon) {
  std::ifstream in(path);
  check(in.good(), "load_trajectories: cannot open " + path);
  std::vector<Trajectory> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(trajectory_from_json(nlohmann::json::parse(line), g, horizon));
  }
  return out;
}

}  // namespace webrl

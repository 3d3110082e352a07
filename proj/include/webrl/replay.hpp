#pragma once

// Success-only experience replay. Trajectories enter the buffer only when
// their episode reward is 1 (an opt-in mode admits failures for the
// buffer-composition ablation). Training draws are filtered per action by
// the current actor's confidence — perplexity inside [low, high] keeps
// actions that are neither over-familiar nor hopeless — and capped at
// twice the fresh transition count.

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "webrl/common.hpp"
#include "webrl/policy.hpp"
#include "webrl/trajectory.hpp"

namespace webrl {

inline constexpr std::size_t kDefaultReplayCapacity = 100000;
inline constexpr int kReplayFormatVersion = 1;

struct ReplayEntry {
  Trajectory trajectory;
  int phase_added = 0;
};

struct ReplayBuffer {
  std::vector<ReplayEntry> entries;  // oldest first
  std::size_t capacity = kDefaultReplayCapacity;

  std::size_t size() const { return entries.size(); }
};

// One admitted (state, action) pair. entry/step index back into the buffer
// so callers can recover the full trajectory (advantage estimation needs
// the surrounding steps, not just the pair itself).
struct ReplayItem {
  EnvState state;
  TaskInstance instance;
  Action action;
  std::size_t entry_index = 0;
  std::size_t step_index = 0;
};

// Returns true when the trajectory was stored. Failures are dropped unless
// store_failed is set; the oldest entry is evicted once capacity is hit.
inline bool insert(ReplayBuffer& buffer, const Trajectory& traj, int phase_added,
                   bool store_failed = false) {
  check(traj.terminal, "replay insert: trajectory is not terminal");
  check(phase_added >= 0, "replay insert: negative phase_added");
  check(buffer.capacity > 0, "replay insert: zero capacity");
  if (traj.reward != 1.0 && !store_failed) return false;
  if (buffer.entries.size() >= buffer.capacity)
    buffer.entries.erase(buffer.entries.begin(),
                         buffer.entries.begin() +
                             (buffer.entries.size() - buffer.capacity + 1));
  buffer.entries.push_back({traj, phase_added});
  return true;
}

// Keep every stored action whose perplexity under `actor` lies in
// [low, high] inclusive. Filtering is per action: a trajectory can
// contribute some steps and not others.
inline std::vector<ReplayItem> filter_by_confidence(const ReplayBuffer& buffer,
                                                    const PolicyParams& actor,
                                                    const SiteGraph& g,
                                                    const TemplateRegistry& reg,
                                                    double low, double high) {
  check(low >= 1.0 && low < high, "filter_by_confidence: need 1 <= low < high");
  std::vector<ReplayItem> out;
  for (std::size_t e = 0; e < buffer.entries.size(); ++e) {
    const Trajectory& t = buffer.entries[e].trajectory;
    for (std::size_t i = 0; i < t.steps.size(); ++i) {
      const auto& st = t.steps[i];
      auto feasible = feasible_actions(g, st.state);
      double perp = action_perplexity(actor, g, reg, st.state, t.instance,
                                      feasible, st.action);
      if (perp >= low && perp <= high)
        out.push_back({st.state, t.instance, st.action, e, i});
    }
  }
  return out;
}

// Uniform sample without replacement of min(|filtered|, 2 * fresh_count)
// items. The drawn subset is returned in buffer order so downstream batch
// assembly is stable.
inline std::vector<ReplayItem> draw_capped(const std::vector<ReplayItem>& filtered,
                                           std::size_t fresh_count,
                                           RngStream& rng) {
  std::size_t cap = std::min(filtered.size(), 2 * fresh_count);
  std::vector<std::size_t> idx(filtered.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::size_t i = 0; i < cap; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  std::vector<ReplayItem> out;
  out.reserve(cap);
  for (std::size_t i : idx) out.push_back(filtered[i]);
  return out;
}

// Persistence: one trajectory per line (the episode JSONL schema), plus a
// sidecar header next to it carrying capacity, the phase watermark, and the
// per-line phase_added values that the trajectory schema itself lacks.
inline void save_buffer(const std::string& path, const ReplayBuffer& buffer) {
  {
    std::ofstream out(path);
    check(out.good(), "save_buffer: cannot open " + path);
    for (const auto& e : buffer.entries)
      out << trajectory_to_json(e.trajectory).dump() << "\n";
    check(out.good(), "save_buffer: write failed for " + path);
  }
  int watermark = -1;
  nlohmann::json phases = nlohmann::json::array();
  for (const auto& e : buffer.entries) {
    watermark = std::max(watermark, e.phase_added);
    phases.push_back(e.phase_added);
  }
  nlohmann::json header{{"format", "webrl-replay"},
                        {"version", kReplayFormatVersion},
                        {"capacity", buffer.capacity},
                        {"phase_watermark", watermark},
                        {"phases", phases}};
  std::ofstream out(path + ".meta.json");
  check(out.good(), "save_buffer: cannot open " + path + ".meta.json");
  out << header.dump(2) << "\n";
  check(out.good(), "save_buffer: write failed for " + path + ".meta.json");
}

inline ReplayBuffer load_buffer(const std::string& path, const SiteGraph& g,
                                int horizon = kDefaultHorizon) {
  std::ifstream meta_in(path + ".meta.json");
  check(meta_in.good(), "load_buffer: cannot open " + path + ".meta.json");
  nlohmann::json header = nlohmann::json::parse(meta_in);
  check(header.at("format").get<std::string>() == "webrl-replay",
        "load_buffer: not a replay buffer header");
  check(header.at("version").get<int>() == kReplayFormatVersion,
        "load_buffer: unsupported version");
  ReplayBuffer buffer;
  buffer.capacity = header.at("capacity").get<std::size_t>();
  std::vector<int> phases = header.at("phases").get<std::vector<int>>();
  std::vector<Trajectory> trajs = load_trajectories(path, g, horizon);
  check(trajs.size() == phases.size(),
        "load_buffer: header phase count does not match line count");
  for (std::size_t i = 0; i < trajs.size(); ++i)
    buffer.entries.push_back({std::move(trajs[i]), phases[i]});
  check(buffer.entries.size() <= buffer.capacity, "load_buffer: over capacity");
  return buffer;
}

}  // namespace webrl

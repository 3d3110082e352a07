#pragma once

// Logistic critic: V(s, I) = sigmoid(w . phi(s, I) + b), trained with
// binary cross-entropy against episode outcomes, plus the lambda-mixed
// discounted advantage estimator computed from it.

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "webrl/common.hpp"
#include "webrl/features.hpp"
#include "webrl/trajectory.hpp"

namespace webrl {

inline constexpr int kCriticFormatVersion = 1;
inline constexpr double kCriticProbEps = 1e-6;  // clamp inside the logs only

struct CriticParams {
  Eigen::VectorXd w;
  double b = 0.0;
  std::int64_t version = 0;

  int dim() const { return static_cast<int>(w.size()); }
};

inline CriticParams make_critic(int dim = kDefaultFeatureDim) {
  CriticParams c;
  c.w = Eigen::VectorXd::Zero(dim);
  return c;
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline double value_from_features(const CriticParams& c, const FeatureVector& phi) {
  check(phi.dim == c.dim(), "value_from_features: feature dim mismatch");
  return sigmoid(phi.dot(c.w) + c.b);
}

inline double value(const CriticParams& c, const SiteGraph& g,
                    const TemplateRegistry& reg, const EnvState& s,
                    const TaskInstance& inst) {
  return value_from_features(c, featurize(g, reg, s, inst, c.dim()));
}

// One training example: featurized state-instruction pair and the episode
// outcome it led to.
struct CriticExample {
  FeatureVector phi;
  double reward = 0.0;
};

inline CriticExample make_critic_example(const SiteGraph& g, const TemplateRegistry& reg,
                                         const EnvState& s, const TaskInstance& inst,
                                         double reward, int dim = kDefaultFeatureDim) {
  check(reward == 0.0 || reward == 1.0, "make_critic_example: reward must be 0 or 1");
  return {featurize(g, reg, s, inst, dim), reward};
}

// Mean binary cross-entropy. Predictions are clamped away from {0, 1}
// inside the logs so saturated examples yield a large finite loss instead
// of inf; the gradient below stays the exact unclamped (V - r) phi.
inline double critic_loss(const CriticParams& c, const std::vector<CriticExample>& data) {
  check(!data.empty(), "critic_loss: empty dataset");
  double total = 0.0;
  for (const auto& ex : data) {
    double v = value_from_features(c, ex.phi);
    double vc = std::min(1.0 - kCriticProbEps, std::max(kCriticProbEps, v));
    total -= ex.reward * std::log(vc) + (1.0 - ex.reward) * std::log(1.0 - vc);
  }
  return total / static_cast<double>(data.size());
}

struct CriticStepReport {
  double loss_before = 0.0;
  double loss_after = 0.0;
};

// One full-batch gradient step.
inline CriticStepReport critic_update(CriticParams& c,
                                      const std::vector<CriticExample>& data,
                                      double lr) {
  check(lr > 0.0, "critic_update: lr must be positive");
  CriticStepReport rep;
  rep.loss_before = critic_loss(c, data);

  Eigen::VectorXd gw = Eigen::VectorXd::Zero(c.dim());
  double gb = 0.0;
  for (const auto& ex : data) {
    double err = value_from_features(c, ex.phi) - ex.reward;
    for (const auto& [i, x] : ex.phi.entries) gw[i] += err * x;
    gb += err;
  }
  double n = static_cast<double>(data.size());
  c.w -= (lr / n) * gw;
  c.b -= (lr / n) * gb;
  c.version++;

  rep.loss_after = critic_loss(c, data);
  check(std::isfinite(rep.loss_after), "critic_update: loss diverged");
  return rep;
}

inline CriticStepReport critic_fit(CriticParams& c, const std::vector<CriticExample>& data,
                                   double lr, int epochs) {
  check(epochs >= 1, "critic_fit: epochs must be >= 1");
  CriticStepReport rep = critic_update(c, data, lr);
  for (int e = 1; e < epochs; ++e) rep.loss_after = critic_update(c, data, lr).loss_after;
  return rep;
}

// Advantage of every step of a trajectory under the critic.
//
// For a non-final step t (with T the index of the final step):
//   A_t = lambda * (gamma * V(s_{t+1}) - V(s_t))
//       + (1 - lambda) * (gamma^(T-t) * r_T - V(s_t))
// (per-step reward is zero everywhere except the terminal step). For the
// final step the two branches coincide: A_T = r_T - V(s_T).
inline std::vector<double> advantage(const CriticParams& c, const SiteGraph& g,
                                     const TemplateRegistry& reg, const Trajectory& traj,
                                     double lambda, double gamma) {
  check(lambda >= 0.0 && lambda <= 1.0, "advantage: lambda must be in [0, 1]");
  check(gamma > 0.0 && gamma <= 1.0, "advantage: gamma must be in (0, 1]");
  check(!traj.steps.empty(), "advantage: empty trajectory");
  check(traj.terminal, "advantage: trajectory must be terminal");

  std::size_t n = traj.steps.size();
  std::vector<double> values(n);
  for (std::size_t t = 0; t < n; ++t)
    values[t] = value(c, g, reg, traj.steps[t].state, traj.instance);

  double r_final = traj.reward;
  std::vector<double> adv(n);
  for (std::size_t t = 0; t < n; ++t) {
    if (t + 1 == n) {
      adv[t] = r_final - values[t];
      continue;
    }
    double onestep = gamma * values[t + 1] - values[t];
    double horizon = std::pow(gamma, static_cast<double>(n - 1 - t)) * r_final - values[t];
    adv[t] = lambda * onestep + (1.0 - lambda) * horizon;
  }
  return adv;
}

// --- checkpointing ------------------------------------------------------

inline void save_critic(const std::string& path, const CriticParams& c,
                        std::uint64_t run_seed) {
  nlohmann::json j;
  j["format"] = "webrl-critic";
  j["version"] = kCriticFormatVersion;
  j["dim"] = c.dim();
  j["param_version"] = c.version;
  j["run_seed"] = run_seed;
  nlohmann::json w = nlohmann::json::array();
  for (int i = 0; i < c.dim(); ++i) w.push_back(c.w[i]);
  j["w"] = std::move(w);
  j["b"] = c.b;
  std::ofstream out(path);
  check(out.good(), "save_critic: cannot open " + path);
  out << j.dump() << "\n";
  check(out.good(), "save_critic: write failed for " + path);
}

struct LoadedCritic {
  CriticParams params;
  std::uint64_t run_seed = 0;
};

inline LoadedCritic load_critic(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "load_critic: cannot open " + path);
  nlohmann::json j;
  in >> j;
  check(j.value("format", "") == std::string("webrl-critic"),
        "load_critic: not a critic checkpoint: " + path);
  check(j.at("version").get<int>() == kCriticFormatVersion,
        "load_critic: unsupported checkpoint version");
  int dim = j.at("dim").get<int>();
  const auto& w = j.at("w");
  check(static_cast<int>(w.size()) == dim, "load_critic: weight size disagrees with header");
  LoadedCritic lc;
  lc.params.w = Eigen::VectorXd::Zero(dim);
  for (int i = 0; i < dim; ++i) lc.params.w[i] = w[static_cast<std::size_t>(i)].get<double>();
  lc.params.b = j.at("b").get<double>();
  lc.params.version = j.at("param_version").get<std::int64_t>();
  lc.run_seed = j.at("run_seed").get<std::uint64_t>();
  return lc;
}

}  // namespace webrl

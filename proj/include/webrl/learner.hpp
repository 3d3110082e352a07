#pragma once

// Policy-update algorithms: the KL-constrained squared-residual update that
// regresses beta * log(pi/pi_ref) onto advantages, plus the baselines it is
// compared against (behavior cloning, filtered BC, AWR, REINFORCE with a
// value baseline, and the reverse-KL projection variant).
//
// Batch items carry their feasible set and feature vector, captured when
// the batch is assembled; the update ops themselves never touch the
// environment.

#include <cmath>
#include <iostream>
#include <vector>

#include <Eigen/Dense>

#include "webrl/common.hpp"
#include "webrl/critic.hpp"
#include "webrl/policy.hpp"
#include "webrl/trajectory.hpp"

namespace webrl {

inline constexpr double kExpWeightClip = 20.0;  // for AWR-style exp(A/beta)

enum class ItemSource { rollout, replay };

struct BatchItem {
  EnvState state;
  TaskInstance instance;
  Action action;
  double advantage = 0.0;
  double ref_log_prob = 0.0;  // log prob of `action` under the frozen reference
  ItemSource source = ItemSource::rollout;
  std::vector<Action> feasible;  // canonical order, captured at assembly
  FeatureVector phi;             // featurize(state, instance), ditto
};

inline BatchItem make_batch_item(const SiteGraph& g, const TemplateRegistry& reg,
                                 const EnvState& s, const TaskInstance& inst,
                                 const Action& action, double advantage,
                                 double ref_log_prob,
                                 ItemSource source = ItemSource::rollout,
                                 int dim = kDefaultFeatureDim) {
  BatchItem it;
  it.state = s;
  it.instance = inst;
  it.action = action;
  it.advantage = advantage;
  it.ref_log_prob = ref_log_prob;
  it.source = source;
  it.feasible = feasible_actions(g, s);
  it.phi = featurize(g, reg, s, inst, dim);
  return it;
}

struct UpdateBatch {
  std::vector<BatchItem> items;
  double beta = 0.1;
};

inline void validate_batch(const UpdateBatch& batch) {
  check(batch.beta > 0.0, "validate_batch: beta must be positive");
  check(!batch.items.empty(), "validate_batch: empty batch");
  for (const auto& it : batch.items) {
    check(std::isfinite(it.advantage), "validate_batch: non-finite advantage");
    check(std::isfinite(it.ref_log_prob), "validate_batch: non-finite ref_log_prob");
    check(std::binary_search(it.feasible.begin(), it.feasible.end(), it.action),
          "validate_batch: action not in its feasible set");
  }
}

struct TrainReport {
  double loss_before = 0.0;
  double loss_after = 0.0;
  double grad_norm = 0.0;  // Frobenius norm of the first full-batch gradient
  long items_rollout = 0;
  long items_replay = 0;
};

namespace detail {

inline void count_sources(const UpdateBatch& batch, TrainReport& rep) {
  for (const auto& it : batch.items)
    (it.source == ItemSource::rollout ? rep.items_rollout : rep.items_replay)++;
}

}  // namespace detail

// --- the squared-residual KL-constrained objective ----------------------

// mean over items of (beta * (log pi(a|s) - ref_log_prob) - A)^2
inline double webrl_loss(const PolicyParams& policy, const UpdateBatch& batch) {
  validate_batch(batch);
  double total = 0.0;
  for (const auto& it : batch.items) {
    double lp = log_prob_from_features(policy, it.phi, it.feasible, it.action);
    double resid = batch.beta * (lp - it.ref_log_prob) - it.advantage;
    total += resid * resid;
  }
  return total / static_cast<double>(batch.items.size());
}

// -2 beta * mean of (A - beta * log ratio) * grad log pi. Equal to the
// finite-difference gradient of webrl_loss by construction.
inline Eigen::MatrixXd webrl_gradient(const PolicyParams& policy,
                                      const UpdateBatch& batch) {
  validate_batch(batch);
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(policy.slots(), policy.dim());
  double n = static_cast<double>(batch.items.size());
  for (const auto& it : batch.items) {
    double lp = log_prob_from_features(policy, it.phi, it.feasible, it.action);
    double coef = -2.0 * batch.beta * (it.advantage - batch.beta * (lp - it.ref_log_prob));
    grad_log_prob_from_features(policy, it.phi, it.feasible, it.action)
        .add_scaled(grad, coef / n);
  }
  return grad;
}

inline TrainReport webrl_update(PolicyParams& policy, const UpdateBatch& batch,
                                double learning_rate, int epochs = 1) {
  check(learning_rate > 0.0, "webrl_update: learning_rate must be positive");
  check(epochs >= 1, "webrl_update: epochs must be >= 1");
  TrainReport rep;
  detail::count_sources(batch, rep);
  rep.loss_before = webrl_loss(policy, batch);
  for (int e = 0; e < epochs; ++e) {
    Eigen::MatrixXd grad = webrl_gradient(policy, batch);
    if (e == 0) rep.grad_norm = grad.norm();
    policy.weights -= learning_rate * grad;
    policy.version++;
  }
  rep.loss_after = webrl_loss(policy, batch);
  check(std::isfinite(rep.loss_after),
        "webrl_update: loss diverged (non-finite); reduce the learning rate");
  return rep;
}

// --- behavior cloning and friends ---------------------------------------

struct DemoItem {
  EnvState state;
  TaskInstance instance;
  Action action;
  std::vector<Action> feasible;
  FeatureVector phi;
};

inline DemoItem make_demo_item(const SiteGraph& g, const TemplateRegistry& reg,
                               const EnvState& s, const TaskInstance& inst,
                               const Action& action, int dim = kDefaultFeatureDim) {
  DemoItem d;
  d.state = s;
  d.instance = inst;
  d.action = action;
  d.feasible = feasible_actions(g, s);
  d.phi = featurize(g, reg, s, inst, dim);
  return d;
}

inline double bc_loss(const PolicyParams& policy, const std::vector<DemoItem>& demos) {
  check(!demos.empty(), "bc_loss: no demos");
  double total = 0.0;
  for (const auto& d : demos)
    total -= log_prob_from_features(policy, d.phi, d.feasible, d.action);
  return total / static_cast<double>(demos.size());
}

// Maximum-likelihood cloning of demonstration actions.
inline TrainReport sft_update(PolicyParams& policy, const std::vector<DemoItem>& demos,
                              double learning_rate, int epochs = 1) {
  check(!demos.empty(), "sft_update: no demos");
  check(learning_rate > 0.0 && epochs >= 1, "sft_update: bad hyperparameters");
  TrainReport rep;
  rep.items_rollout = static_cast<long>(demos.size());
  rep.loss_before = bc_loss(policy, demos);
  double n = static_cast<double>(demos.size());
  for (int e = 0; e < epochs; ++e) {
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(policy.slots(), policy.dim());
    for (const auto& d : demos)
      grad_log_prob_from_features(policy, d.phi, d.feasible, d.action)
          .add_scaled(grad, -1.0 / n);  // gradient of the negative log likelihood
    if (e == 0) rep.grad_norm = grad.norm();
    policy.weights -= learning_rate * grad;
    policy.version++;
  }
  rep.loss_after = bc_loss(policy, demos);
  check(std::isfinite(rep.loss_after), "sft_update: loss diverged");
  return rep;
}

// Behavior cloning on successful trajectories only. Empty filter result is
// a warned no-op, not an error.
inline TrainReport filtered_bc_update(PolicyParams& policy, const SiteGraph& g,
                                      const TemplateRegistry& reg,
                                      const std::vector<Trajectory>& trajs,
                                      double learning_rate, int epochs = 1) {
  std::vector<DemoItem> demos;
  for (const auto& t : trajs) {
    if (t.reward != 1.0) continue;
    for (const auto& st : t.steps)
      demos.push_back(make_demo_item(g, reg, st.state, t.instance, st.action,
                                     policy.dim()));
  }
  if (demos.empty()) {
    std::cerr << "filtered_bc_update: no successful trajectories; skipping update\n";
    return {};
  }
  return sft_update(policy, demos, learning_rate, epochs);
}

namespace detail {

// Shared core of the weighted-likelihood ascent updates. Weights must be
// non-negative; reported loss is the weighted negative log likelihood.
inline TrainReport weighted_ascent(PolicyParams& policy, const UpdateBatch& batch,
                                   const std::vector<double>& weight,
                                   double learning_rate, int epochs,
                                   const char* what) {
  check(learning_rate > 0.0 && epochs >= 1,
        std::string(what) + ": bad hyperparameters");
  validate_batch(batch);
  double n = static_cast<double>(batch.items.size());
  auto loss = [&]() {
    double total = 0.0;
    for (std::size_t i = 0; i < batch.items.size(); ++i) {
      const auto& it = batch.items[i];
      total -= weight[i] * log_prob_from_features(policy, it.phi, it.feasible, it.action);
    }
    return total / n;
  };
  TrainReport rep;
  count_sources(batch, rep);
  rep.loss_before = loss();
  for (int e = 0; e < epochs; ++e) {
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(policy.slots(), policy.dim());
    for (std::size_t i = 0; i < batch.items.size(); ++i) {
      const auto& it = batch.items[i];
      grad_log_prob_from_features(policy, it.phi, it.feasible, it.action)
          .add_scaled(grad, -weight[i] / n);
    }
    if (e == 0) rep.grad_norm = grad.norm();
    policy.weights -= learning_rate * grad;
    policy.version++;
  }
  rep.loss_after = loss();
  check(std::isfinite(rep.loss_after), std::string(what) + ": loss diverged");
  return rep;
}

}  // namespace detail

// Advantage-weighted regression: BC with weights exp(A / beta), clipped.
// Weights are never negative, so a bad action's probability is only pushed
// down indirectly via normalization — contrast with webrl_update.
inline TrainReport awr_update(PolicyParams& policy, const UpdateBatch& batch,
                              double learning_rate, double beta, int epochs = 1) {
  check(beta > 0.0, "awr_update: beta must be positive");
  std::vector<double> w(batch.items.size());
  for (std::size_t i = 0; i < batch.items.size(); ++i)
    w[i] = std::min(std::exp(batch.items[i].advantage / beta), kExpWeightClip);
  return detail::weighted_ascent(policy, batch, w, learning_rate, epochs, "awr_update");
}

// Plain policy gradient with the critic baseline: ascend mean A * grad log pi.
inline TrainReport reinforce_baseline_update(PolicyParams& policy,
                                             const UpdateBatch& batch,
                                             double learning_rate, int epochs = 1) {
  check(learning_rate > 0.0 && epochs >= 1,
        "reinforce_baseline_update: bad hyperparameters");
  validate_batch(batch);
  double n = static_cast<double>(batch.items.size());
  auto pseudo_loss = [&]() {
    double total = 0.0;
    for (const auto& it : batch.items)
      total -= it.advantage *
               log_prob_from_features(policy, it.phi, it.feasible, it.action);
    return total / n;
  };
  TrainReport rep;
  detail::count_sources(batch, rep);
  rep.loss_before = pseudo_loss();
  for (int e = 0; e < epochs; ++e) {
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(policy.slots(), policy.dim());
    for (const auto& it : batch.items)
      grad_log_prob_from_features(policy, it.phi, it.feasible, it.action)
          .add_scaled(grad, -it.advantage / n);
    if (e == 0) rep.grad_norm = grad.norm();
    policy.weights -= learning_rate * grad;
    policy.version++;
  }
  rep.loss_after = pseudo_loss();
  check(std::isfinite(rep.loss_after), "reinforce_baseline_update: loss diverged");
  return rep;
}

// Reverse-KL projection: ascend E_{pi_ref}[ log pi * exp(A/beta) ], with the
// same weight clip as AWR. The expectation is over reference-policy samples,
// so callers must pass rollouts drawn from pi_ref only — never replay data.
inline TrainReport kl_direction_update(PolicyParams& policy, const UpdateBatch& ref_samples,
                                       double learning_rate, double beta,
                                       int epochs = 1) {
  check(beta > 0.0, "kl_direction_update: beta must be positive");
  std::vector<double> w(ref_samples.items.size());
  for (std::size_t i = 0; i < ref_samples.items.size(); ++i)
    w[i] = std::min(std::exp(ref_samples.items[i].advantage / beta), kExpWeightClip);
  return detail::weighted_ascent(policy, ref_samples, w, learning_rate, epochs,
                                 "kl_direction_update");
}

}  // namespace webrl

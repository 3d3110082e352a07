#pragma once

// Linear-softmax policy over factored action slots.
//
// Each action maps to one of K slots (kind x hashed-argument bucket); the
// score of an action in a state is W[slot, :] . phi(state, instruction).
// Probabilities are a temperature softmax over the feasible set only.

#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "webrl/action.hpp"
#include "webrl/common.hpp"
#include "webrl/features.hpp"

namespace webrl {

// 64 argument buckets per action kind: enough for the default site's widest
// same-page argument namespace (a fully scrolled category listing's 28 item
// links) to stay collision-free under the frozen hash salt, with room for
// the fixed navigation targets and option values.
inline constexpr int kDefaultActionSlots = 512;
inline constexpr int kPolicyFormatVersion = 1;

struct PolicyParams {
  Eigen::MatrixXd weights;  // slots x dim
  std::int64_t version = 0;

  int slots() const { return static_cast<int>(weights.rows()); }
  int dim() const { return static_cast<int>(weights.cols()); }
};

inline PolicyParams make_policy(int slots = kDefaultActionSlots,
                                int dim = kDefaultFeatureDim) {
  check(slots > 0 && slots % kNumActionKinds == 0,
        "make_policy: slots must be a positive multiple of 8");
  PolicyParams p;
  p.weights = Eigen::MatrixXd::Zero(slots, dim);
  return p;
}

struct ActionDistribution {
  std::vector<Action> support;  // canonical order (kind, then argument)
  Eigen::VectorXd probs;        // aligned with support, sums to 1
};

// Core distribution computation on a precomputed feature vector. `feasible`
// must be canonically sorted and non-empty (the environment guarantees
// both).
inline ActionDistribution dist_from_features(const PolicyParams& params,
                                             const FeatureVector& phi,
                                             const std::vector<Action>& feasible,
                                             double temperature = 1.0) {
  check(!feasible.empty(), "dist_from_features: empty feasible set");
  check(temperature > 0.0, "dist_from_features: temperature must be positive");
  check(phi.dim == params.dim(), "dist_from_features: feature dim mismatch");

  ActionDistribution dist;
  dist.support = feasible;
  Eigen::VectorXd logits(static_cast<long>(feasible.size()));
  for (std::size_t i = 0; i < feasible.size(); ++i) {
    double score = phi.dot_row(params.weights, action_slot(feasible[i], params.slots()));
    check(std::isfinite(score), "dist_from_features: non-finite action score");
    logits[static_cast<long>(i)] = score / temperature;
  }
  double m = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - m).exp();
  dist.probs = e / e.sum();
  return dist;
}

inline ActionDistribution action_probs(const PolicyParams& params, const SiteGraph& g,
                                       const TemplateRegistry& reg, const EnvState& s,
                                       const TaskInstance& inst,
                                       const std::vector<Action>& feasible,
                                       double temperature = 1.0) {
  return dist_from_features(params, featurize(g, reg, s, inst, params.dim()), feasible,
                            temperature);
}

// Inverse-CDF sampling in canonical support order: one u01 draw per call,
// so a sampled rollout is reproducible from its stream alone.
inline const Action& sample(const ActionDistribution& dist, RngStream& rng) {
  double u = rng.u01();
  double acc = 0.0;
  for (long i = 0; i < dist.probs.size(); ++i) {
    acc += dist.probs[i];
    if (u < acc) return dist.support[static_cast<std::size_t>(i)];
  }
  return dist.support.back();  // guard against acc rounding below 1
}

inline const Action& greedy_action(const ActionDistribution& dist) {
  long best = 0;
  for (long i = 1; i < dist.probs.size(); ++i)
    if (dist.probs[i] > dist.probs[best]) best = i;
  return dist.support[static_cast<std::size_t>(best)];
}

inline double log_prob_from_features(const PolicyParams& params, const FeatureVector& phi,
                                     const std::vector<Action>& feasible,
                                     const Action& action, double temperature = 1.0) {
  auto dist = dist_from_features(params, phi, feasible, temperature);
  for (std::size_t i = 0; i < dist.support.size(); ++i)
    if (dist.support[i] == action) return std::log(dist.probs[static_cast<long>(i)]);
  throw std::invalid_argument("log_prob: action " + action.str() + " not feasible");
}

inline double log_prob(const PolicyParams& params, const SiteGraph& g,
                       const TemplateRegistry& reg, const EnvState& s,
                       const TaskInstance& inst, const std::vector<Action>& feasible,
                       const Action& action, double temperature = 1.0) {
  return log_prob_from_features(params, featurize(g, reg, s, inst, params.dim()),
                                feasible, action, temperature);
}

// Per-action perplexity 1 / pi(a|s). Deliberately routed through log_prob
// so that replay filtering and any test of it share one floating-point
// path: a probability of 0.95 gives 1/0.95 here bit-for-bit.
inline double action_perplexity_from_features(const PolicyParams& params,
                                              const FeatureVector& phi,
                                              const std::vector<Action>& feasible,
                                              const Action& action,
                                              double temperature = 1.0) {
  return 1.0 / std::exp(log_prob_from_features(params, phi, feasible, action, temperature));
}

inline double action_perplexity(const PolicyParams& params, const SiteGraph& g,
                                const TemplateRegistry& reg, const EnvState& s,
                                const TaskInstance& inst,
                                const std::vector<Action>& feasible, const Action& action,
                                double temperature = 1.0) {
  return action_perplexity_from_features(
      params, featurize(g, reg, s, inst, params.dim()), feasible, action, temperature);
}

// Gradient of log pi(action | state) w.r.t. the weight matrix, kept in
// factored form: the full gradient is sum_r row_coeff[r] * e_r phi^T.
// Rows collapse when several feasible actions share a slot.
struct LogProbGrad {
  std::map<int, double> row_coeff;
  FeatureVector phi;

  Eigen::MatrixXd dense(int slots, int dim) const {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(slots, dim);
    add_scaled(g, 1.0);
    return g;
  }

  void add_scaled(Eigen::MatrixXd& acc, double scale) const {
    for (const auto& [r, c] : row_coeff)
      for (const auto& [i, x] : phi.entries) acc(r, i) += scale * c * x;
  }
};

inline LogProbGrad grad_log_prob_from_features(const PolicyParams& params,
                                               const FeatureVector& phi,
                                               const std::vector<Action>& feasible,
                                               const Action& action,
                                               double temperature = 1.0) {
  auto dist = dist_from_features(params, phi, feasible, temperature);
  LogProbGrad g;
  g.phi = phi;
  bool found = false;
  for (std::size_t i = 0; i < dist.support.size(); ++i) {
    int r = action_slot(dist.support[i], params.slots());
    g.row_coeff[r] -= dist.probs[static_cast<long>(i)] / temperature;
    if (dist.support[i] == action) {
      g.row_coeff[r] += 1.0 / temperature;
      found = true;
    }
  }
  check(found, "grad_log_prob: action not in feasible set");
  return g;
}

inline LogProbGrad policy_grad_log_prob(const PolicyParams& params, const SiteGraph& g,
                                        const TemplateRegistry& reg, const EnvState& s,
                                        const TaskInstance& inst,
                                        const std::vector<Action>& feasible,
                                        const Action& action, double temperature = 1.0) {
  return grad_log_prob_from_features(
      params, featurize(g, reg, s, inst, params.dim()), feasible, action, temperature);
}

// --- checkpointing ------------------------------------------------------

inline void save_policy(const std::string& path, const PolicyParams& p,
                        std::uint64_t run_seed) {
  nlohmann::json j;
  j["format"] = "webrl-policy";
  j["version"] = kPolicyFormatVersion;
  j["slots"] = p.slots();
  j["dim"] = p.dim();
  j["param_version"] = p.version;
  j["run_seed"] = run_seed;
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < p.slots(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < p.dim(); ++c) row.push_back(p.weights(r, c));
    rows.push_back(std::move(row));
  }
  j["weights"] = std::move(rows);
  std::ofstream out(path);
  check(out.good(), "save_policy: cannot open " + path);
  out << j.dump() << "\n";
  check(out.good(), "save_policy: write failed for " + path);
}

struct LoadedPolicy {
  PolicyParams params;
  std::uint64_t run_seed = 0;
};

inline LoadedPolicy load_policy(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "load_policy: cannot open " + path);
  nlohmann::json j;
  in >> j;
  check(j.value("format", "") == std::string("webrl-policy"),
        "load_policy: not a policy checkpoint: " + path);
  check(j.at("version").get<int>() == kPolicyFormatVersion,
        "load_policy: unsupported checkpoint version");
  int slots = j.at("slots").get<int>();
  int dim = j.at("dim").get<int>();
  const auto& rows = j.at("weights");
  check(static_cast<int>(rows.size()) == slots,
        "load_policy: weight rows disagree with shape header");
  LoadedPolicy lp;
  lp.params.weights = Eigen::MatrixXd::Zero(slots, dim);
  for (int r = 0; r < slots; ++r) {
    const auto& row = rows[static_cast<std::size_t>(r)];
    check(static_cast<int>(row.size()) == dim,
          "load_policy: weight cols disagree with shape header");
    for (int c = 0; c < dim; ++c)
      lp.params.weights(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  lp.params.version = j.at("param_version").get<std::int64_t>();
  lp.run_seed = j.at("run_seed").get<std::uint64_t>();
  return lp;
}

}  // namespace webrl

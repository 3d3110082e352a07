#pragma once

// Outcome-supervised reward model: a logistic classifier that decides from
// (instruction, action history, final state) whether a rollout completed
// its task. It supplies the rewards used during training phases, standing
// in for a ground-truth checker the agent is not allowed to query.
//
// Features are deliberately final-state-only: template one-hot, final-page
// one-hot, a bag of action kinds over the history, and a fixed catalog of
// relational predicate bits comparing the final scratch state against the
// instance's parameters. Each predicate bit also appears in a
// template-indexed copy so the model can learn per-template requirement
// sets exactly (a shared bit like "cart holds the named item" is required
// by some templates and incidental to others).

#include <cmath>
#include <cstddef>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "webrl/common.hpp"
#include "webrl/critic.hpp"
#include "webrl/features.hpp"
#include "webrl/tasks.hpp"

namespace webrl {

inline constexpr int kOrmTemplateBlock = 24;
inline constexpr int kOrmPageBlock = 356;
inline constexpr int kOrmPredicateCount = 16;
// template ⊕ page ⊕ kind bag ⊕ shared predicates ⊕ template-indexed predicates
inline constexpr int kOrmDim = kOrmTemplateBlock + kOrmPageBlock + kNumActionKinds +
                               kOrmPredicateCount +
                               kOrmTemplateBlock * kOrmPredicateCount;
inline constexpr int kOrmFormatVersion = 1;

struct OrmParams {
  Eigen::VectorXd weights;  // length kOrmDim
  double bias = 0.0;

  int dim() const { return static_cast<int>(weights.size()); }
};

inline OrmParams make_orm() {
  OrmParams p;
  p.weights = Eigen::VectorXd::Zero(kOrmDim);
  return p;
}

struct OrmExample {
  TaskInstance instance;
  std::vector<Action> history;
  EnvState final_state;
  int label = 0;  // 0 or 1
};

namespace detail {

// The relational predicate catalog. Each bit is a pure function of the
// final scratch state and the instance parameters; missing parameter slots
// simply leave their bits off.
inline void orm_predicate_bits(const EnvState& final_state, const Params& params,
                               bool (&bits)[kOrmPredicateCount]) {
  auto param = [&](const char* slot) -> const std::string* {
    auto it = params.find(slot);
    return it == params.end() ? nullptr : &it->second;
  };
  auto scratch_is = [&](const std::string& key, const std::string* want) {
    if (!want) return false;
    auto v = final_state.get(key);
    return v && *v == *want;
  };
  for (auto& b : bits) b = false;
  for (const auto& [slot, value] : params)
    if (final_state.page == value) bits[0] = true;
  if (const auto* v = param("item")) bits[1] = final_state.flag("cart:" + *v);
  if (const auto* v = param("item_a")) bits[2] = final_state.flag("cart:" + *v);
  if (const auto* v = param("item_b")) bits[3] = final_state.flag("cart:" + *v);
  bits[4] = final_state.flag("checked_out");
  if (const auto* v = param("page")) bits[5] = final_state.flag("scrolled:" + *v);
  bits[6] = scratch_is("query", param("keyword"));
  bits[7] = scratch_is("query", param("item"));
  bits[8] = scratch_is("theme", param("theme"));
  bits[9] = scratch_is("notif", param("mode"));
  if (const auto* cat = param("category"))
    bits[10] = scratch_is("sort:" + *cat, param("order"));
  for (const auto& [key, value] : final_state.scratch) {
    if (key.rfind("cart:", 0) == 0) bits[11] = true;
    if (key.rfind("sort:", 0) == 0) bits[12] = true;
  }
  bits[13] = final_state.get("theme").has_value();
  bits[14] = final_state.get("notif").has_value();
  bits[15] = final_state.get("query").has_value();
}

}  // namespace detail

inline FeatureVector orm_featurize(const SiteGraph& g, const TemplateRegistry& reg,
                                   const TaskInstance& inst,
                                   const std::vector<Action>& history,
                                   const EnvState& final_state) {
  FeatureVector phi;
  phi.dim = kOrmDim;
  int tindex = reg.index_of(inst.template_id) % kOrmTemplateBlock;
  phi.entries.push_back({tindex, 1.0});

  auto it = g.page_index.find(final_state.page);
  check(it != g.page_index.end(), "orm_featurize: unknown final page " + final_state.page);
  phi.entries.push_back({kOrmTemplateBlock + it->second % kOrmPageBlock, 1.0});

  double kind_counts[kNumActionKinds] = {};
  for (const auto& a : history) kind_counts[static_cast<int>(a.kind)] += 1.0;
  int base = kOrmTemplateBlock + kOrmPageBlock;
  for (int k = 0; k < kNumActionKinds; ++k)
    if (kind_counts[k] > 0.0) phi.entries.push_back({base + k, kind_counts[k]});

  bool bits[kOrmPredicateCount];
  detail::orm_predicate_bits(final_state, inst.params, bits);
  base += kNumActionKinds;
  int interaction_base = base + kOrmPredicateCount + tindex * kOrmPredicateCount;
  for (int b = 0; b < kOrmPredicateCount; ++b) {
    if (!bits[b]) continue;
    phi.entries.push_back({base + b, 1.0});
    phi.entries.push_back({interaction_base + b, 1.0});
  }
  return phi;
}

inline FeatureVector orm_featurize(const SiteGraph& g, const TemplateRegistry& reg,
                                   const OrmExample& ex) {
  return orm_featurize(g, reg, ex.instance, ex.history, ex.final_state);
}

// Mean binary cross-entropy of the logistic scores against the labels.
inline double orm_loss(const OrmParams& p, const std::vector<FeatureVector>& phis,
                       const std::vector<int>& labels) {
  check(phis.size() == labels.size() && !phis.empty(), "orm_loss: bad dataset");
  double total = 0.0;
  for (std::size_t i = 0; i < phis.size(); ++i) {
    double s = 1.0 / (1.0 + std::exp(-(phis[i].dot(p.weights) + p.bias)));
    s = std::min(1.0 - kCriticProbEps, std::max(kCriticProbEps, s));
    total += labels[i] == 1 ? -std::log(s) : -std::log(1.0 - s);
  }
  return total / static_cast<double>(phis.size());
}

// Full-batch logistic regression from zero init. Deterministic; refuses a
// dataset where only one label occurs (nothing to separate).
inline OrmParams train_orm(const SiteGraph& g, const TemplateRegistry& reg,
                           const std::vector<OrmExample>& dataset, double lr,
                           int epochs) {
  check(!dataset.empty(), "train_orm: empty dataset");
  check(lr > 0.0 && epochs > 0, "train_orm: need lr > 0 and epochs > 0");
  bool saw[2] = {false, false};
  for (const auto& ex : dataset) {
    check(ex.label == 0 || ex.label == 1, "train_orm: label outside {0,1}");
    saw[ex.label] = true;
  }
  check(saw[0] && saw[1], "train_orm: single-class dataset");

  std::vector<FeatureVector> phis;
  phis.reserve(dataset.size());
  for (const auto& ex : dataset) phis.push_back(orm_featurize(g, reg, ex));

  OrmParams p = make_orm();
  double n = static_cast<double>(dataset.size());
  for (int epoch = 0; epoch < epochs; ++epoch) {
    Eigen::VectorXd gw = Eigen::VectorXd::Zero(kOrmDim);
    double gb = 0.0;
    for (std::size_t i = 0; i < phis.size(); ++i) {
      double s = 1.0 / (1.0 + std::exp(-(phis[i].dot(p.weights) + p.bias)));
      double err = (s - dataset[i].label) / n;
      for (const auto& [idx, val] : phis[i].entries) gw[idx] += err * val;
      gb += err;
    }
    p.weights -= lr * gw;
    p.bias -= lr * gb;
  }
  check(p.weights.allFinite() && std::isfinite(p.bias),
        "train_orm: diverged; reduce the learning rate");
  return p;
}

// Binary verdict: 1 iff the logistic score exceeds 0.5. A score of exactly
// 0.5 (zero linear score) counts as failure.
inline int judge(const OrmParams& p, const SiteGraph& g, const TemplateRegistry& reg,
                 const TaskInstance& inst, const std::vector<Action>& history,
                 const EnvState& final_state) {
  FeatureVector phi = orm_featurize(g, reg, inst, history, final_state);
  return phi.dot(p.weights) + p.bias > 0.0 ? 1 : 0;
}

inline double evaluate_orm(const OrmParams& p, const SiteGraph& g,
                           const TemplateRegistry& reg,
                           const std::vector<OrmExample>& labeled) {
  check(!labeled.empty(), "evaluate_orm: empty dataset");
  int agree = 0;
  for (const auto& ex : labeled)
    if (judge(p, g, reg, ex.instance, ex.history, ex.final_state) == ex.label) ++agree;
  return static_cast<double>(agree) / static_cast<double>(labeled.size());
}

// One CSV row of the evaluation report: split name, example count, accuracy.
inline std::string orm_eval_row(const std::string& split, std::size_t n,
                                double accuracy) {
  return split + "," + std::to_string(n) + "," + fmt_g6(accuracy);
}

inline void save_orm(const std::string& path, const OrmParams& p) {
  nlohmann::json w = nlohmann::json::array();
  for (int i = 0; i < p.dim(); ++i) w.push_back(p.weights[i]);
  nlohmann::json j{{"format", "webrl-checkpoint"},
                   {"role", "orm"},
                   {"version", kOrmFormatVersion},
                   {"dim", p.dim()},
                   {"weights", std::move(w)},
                   {"bias", p.bias}};
  std::ofstream out(path);
  check(out.good(), "save_orm: cannot open " + path);
  out << j.dump(2) << "\n";
  check(out.good(), "save_orm: write failed for " + path);
}

inline OrmParams load_orm(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "load_orm: cannot open " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  check(j.at("format").get<std::string>() == "webrl-checkpoint" &&
            j.at("role").get<std::string>() == "orm",
        "load_orm: not an outcome-model checkpoint");
  check(j.at("version").get<int>() == kOrmFormatVersion,
        "load_orm: unsupported version");
  OrmParams p;
  const auto& w = j.at("weights");
  p.weights = Eigen::VectorXd::Zero(static_cast<long>(w.size()));
  for (std::size_t i = 0; i < w.size(); ++i) p.weights[static_cast<long>(i)] = w[i].get<double>();
  p.bias = j.at("bias").get<double>();
  check(p.dim() == j.at("dim").get<int>(), "load_orm: dim mismatch");
  return p;
}

}  // namespace webrl

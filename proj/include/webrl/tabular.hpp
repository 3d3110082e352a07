#pragma once

// Tiny layered MDPs with exactly computable soft-optimal values, built as
// real SiteGraphs so the full policy/critic/learner stack runs on them
// unchanged. Test and verification machinery only — the training loop
// never touches this header.
//
// Layering (every page reachable at exactly one depth) is what makes the
// soft-optimal tables well-defined per page: a finite-horizon V* is
// otherwise time-indexed, which a stationary policy could not match.

#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "webrl/critic.hpp"
#include "webrl/env.hpp"
#include "webrl/policy.hpp"
#include "webrl/site.hpp"
#include "webrl/tasks.hpp"

namespace webrl {

struct TabularMdp {
  SiteGraph graph;
  std::shared_ptr<TemplateRegistry> reg;
  TaskInstance instance;
  int horizon = 4;
  std::vector<std::vector<std::string>> layers;  // pages by depth
  std::map<std::string, int> depth;

  // Canonical state for a page: the scratch-free state a rollout reaches it
  // in. Only the page and the last action kind feed the features here.
  EnvState state_at(const std::string& page) const {
    EnvState s;
    s.page = page;
    int d = depth.at(page);
    s.step_index = d;
    if (d > 0) s.history = {Action{ActionKind::Goto, page}};
    return s;
  }

  double goal_reward(const std::string& page) const {
    return ground_truth_reward(graph, *reg, instance, state_at(page));
  }
};

namespace detail {

// Shared scaffolding: the auxiliary pages TemplateRegistry needs to build
// its catalog (one item per two-item pool, two categories, a search entry).
// None of them are reachable from the tabular layers.
inline void add_registry_scaffolding(SiteGraph& g) {
  g.pages.push_back({"category_0", "category", {}});
  g.pages.push_back({"category_2", "category", {}});
  g.pages.push_back({"item_00", "home", {}});  // goal page; plain role on purpose
  g.pages.push_back({"item_01", "home", {}});
  g.category_items["category_0"] = {"item_00"};
  g.category_items["category_2"] = {"item_01"};
  g.item_category["item_00"] = "category_0";
  g.item_category["item_01"] = "category_2";
  g.search_vocab = {"item_00"};
}

// Pick n page names whose goto-argument buckets are pairwise distinct, so
// the factored policy can tell the alternatives at one state apart.
inline std::vector<std::string> distinct_goto_names(int n, const std::string& prefix) {
  std::vector<std::string> names;
  std::vector<int> used;
  for (int i = 0; static_cast<int>(names.size()) < n; ++i) {
    check(i < 200, "distinct_goto_names: exhausted candidates");
    std::string cand = prefix + std::to_string(i);
    int b = detail::arg_bucket(cand);
    bool clash = false;
    for (int u : used) clash |= (u == b);
    if (!clash) {
      names.push_back(cand);
      used.push_back(b);
    }
  }
  return names;
}

}  // namespace detail

// The 6-state, horizon-4 layered MDP: home branches to two mid states, each
// branches to two more, and both of those can reach the goal page.
//
//   depth 0: home          (goto m0 | goto m1 | exit)
//   depth 1: m0, m1        (goto m2 | goto m3 | exit)
//   depth 2: m2, m3        (goto item_00 | exit)
//   depth 3: item_00       (exit, or the horizon ends the episode)
//
// Success: the episode ends on the goal page.
inline TabularMdp make_layered_mdp() {
  auto names = detail::distinct_goto_names(4, "mid_");
  const std::string &m0 = names[0], &m1 = names[1], &m2 = names[2], &m3 = names[3];

  SiteGraph g;
  g.seed = 0;
  g.pages.push_back({"home", "home", {}});
  for (const auto& m : names) g.pages.push_back({m, "home", {}});
  detail::add_registry_scaffolding(g);
  g.edges["home"][{ActionKind::Goto, m0}] = m0;
  g.edges["home"][{ActionKind::Goto, m1}] = m1;
  for (const auto& m : {m0, m1}) {
    g.edges[m][{ActionKind::Goto, m2}] = m2;
    g.edges[m][{ActionKind::Goto, m3}] = m3;
  }
  g.edges[m2][{ActionKind::Goto, "item_00"}] = "item_00";
  g.edges[m3][{ActionKind::Goto, "item_00"}] = "item_00";
  g.rebuild_index();
  validate_site(g);

  TabularMdp mdp;
  mdp.graph = std::move(g);
  mdp.reg = std::make_shared<TemplateRegistry>(mdp.graph);
  mdp.instance.template_id = "nav_item";
  mdp.instance.params = {{"item", "item_00"}};
  mdp.instance.instruction =
      render_instruction(mdp.reg->at("nav_item"), mdp.instance.params);
  mdp.horizon = 4;
  mdp.layers = {{"home"}, {m0, m1}, {m2, m3}, {"item_00"}};
  for (std::size_t d = 0; d < mdp.layers.size(); ++d)
    for (const auto& p : mdp.layers[d]) mdp.depth[p] = static_cast<int>(d);
  return mdp;
}

// A deterministic corridor: home -> c1 -> ... -> item_00, one useful move
// per state. The hard optimal value from the start is exactly 1.
inline TabularMdp make_chain_mdp(int mid_states = 3) {
  check(mid_states >= 1, "make_chain_mdp: need at least one mid state");
  SiteGraph g;
  g.seed = 0;
  g.pages.push_back({"home", "home", {}});
  std::vector<std::string> chain;
  for (int i = 0; i < mid_states; ++i) {
    chain.push_back("corridor_" + std::to_string(i));
    g.pages.push_back({chain.back(), "home", {}});
  }
  detail::add_registry_scaffolding(g);
  std::string prev = "home";
  for (const auto& c : chain) {
    g.edges[prev][{ActionKind::Goto, c}] = c;
    prev = c;
  }
  g.edges[prev][{ActionKind::Goto, "item_00"}] = "item_00";
  g.rebuild_index();
  validate_site(g);

  TabularMdp mdp;
  mdp.graph = std::move(g);
  mdp.reg = std::make_shared<TemplateRegistry>(mdp.graph);
  mdp.instance.template_id = "nav_item";
  mdp.instance.params = {{"item", "item_00"}};
  mdp.instance.instruction =
      render_instruction(mdp.reg->at("nav_item"), mdp.instance.params);
  mdp.horizon = mid_states + 2;
  mdp.layers.push_back({"home"});
  for (const auto& c : chain) mdp.layers.push_back({c});
  mdp.layers.push_back({"item_00"});
  for (std::size_t d = 0; d < mdp.layers.size(); ++d)
    for (const auto& p : mdp.layers[d]) mdp.depth[p] = static_cast<int>(d);
  return mdp;
}

// Exact soft-optimal tables of the KL-regularized objective, by backward
// induction over the layers:
//   Q*(s,a) = r + beta log pi_ref(a|s) + [s' not terminal] V*(s')
//   V*(s)   = beta log sum_a exp(Q*(s,a) / beta)
//   A*(s,a) = r + [s' not terminal] V*(s') - V*(s)
// so that beta log(pi*/pi_ref) = A* with pi* = exp((Q* - V*)/beta).
struct SoftTables {
  std::map<std::string, double> v;
  std::map<std::string, std::map<Action, double>> q;
  std::map<std::string, std::map<Action, double>> a;
};

inline SoftTables exact_soft_values(const TabularMdp& mdp, const PolicyParams& pi_ref,
                                    double beta) {
  check(beta > 0.0, "exact_soft_values: beta must be positive");
  std::size_t pairs = 0;
  for (const auto& [p, d] : mdp.depth)
    pairs += feasible_actions(mdp.graph, mdp.state_at(p)).size();
  check(pairs <= 50, "exact_soft_values: MDP too large to enumerate");

  SoftTables t;
  for (auto layer = mdp.layers.rbegin(); layer != mdp.layers.rend(); ++layer) {
    for (const auto& p : *layer) {
      int d = mdp.depth.at(p);
      EnvState s = mdp.state_at(p);
      auto feasible = feasible_actions(mdp.graph, s);
      auto ref = action_probs(pi_ref, mdp.graph, *mdp.reg, s, mdp.instance, feasible);

      std::vector<double> qs;
      for (std::size_t i = 0; i < feasible.size(); ++i) {
        const Action& a = feasible[i];
        bool terminal = (a.kind == ActionKind::Exit) || (d + 1 == mdp.horizon);
        std::string next = p;
        if (a.kind == ActionKind::Goto) next = *mdp.graph.edge_target(p, a);
        double r = terminal ? mdp.goal_reward(next) : 0.0;
        double cont = terminal ? 0.0 : t.v.at(next);
        double q = r + beta * std::log(ref.probs[static_cast<long>(i)]) + cont;
        t.q[p][a] = q;
        t.a[p][a] = r + cont;  // V*(s) subtracted below
        qs.push_back(q);
      }
      double m = *std::max_element(qs.begin(), qs.end());
      double lse = 0.0;
      for (double q : qs) lse += std::exp((q - m) / beta);
      t.v[p] = m + beta * std::log(lse);
      for (auto& [a, adv] : t.a[p]) adv -= t.v[p];
    }
  }
  return t;
}

// Exact success probability of a policy from the start state, by
// enumeration over the layered transitions.
inline double exact_policy_value(const TabularMdp& mdp, const PolicyParams& policy,
                                 double temperature = 1.0) {
  std::function<double(const std::string&, int)> go = [&](const std::string& p,
                                                          int d) -> double {
    EnvState s = mdp.state_at(p);
    auto feasible = feasible_actions(mdp.graph, s);
    auto dist = action_probs(policy, mdp.graph, *mdp.reg, s, mdp.instance, feasible,
                             temperature);
    double total = 0.0;
    for (std::size_t i = 0; i < feasible.size(); ++i) {
      const Action& a = feasible[i];
      bool terminal = (a.kind == ActionKind::Exit) || (d + 1 == mdp.horizon);
      std::string next = p;
      if (a.kind == ActionKind::Goto) next = *mdp.graph.edge_target(p, a);
      double out = terminal ? mdp.goal_reward(next) : go(next, d + 1);
      total += dist.probs[static_cast<long>(i)] * out;
    }
    return total;
  };
  return go("home", 0);
}

// Best achievable success probability (hard value iteration by enumeration).
inline double hard_optimal_value(const TabularMdp& mdp) {
  std::function<double(const std::string&, int)> go = [&](const std::string& p,
                                                          int d) -> double {
    EnvState s = mdp.state_at(p);
    double best = 0.0;
    for (const auto& a : feasible_actions(mdp.graph, s)) {
      bool terminal = (a.kind == ActionKind::Exit) || (d + 1 == mdp.horizon);
      std::string next = p;
      if (a.kind == ActionKind::Goto) next = *mdp.graph.edge_target(p, a);
      double out = terminal ? mdp.goal_reward(next) : go(next, d + 1);
      best = std::max(best, out);
    }
    return best;
  };
  return go("home", 0);
}

}  // namespace webrl

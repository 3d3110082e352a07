#pragma once

// Environment dynamics over a SiteGraph: state, feasible-action sets, and
// the step function. States are tiny value types so rollouts and search can
// copy them freely.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "webrl/action.hpp"
#include "webrl/common.hpp"
#include "webrl/site.hpp"

namespace webrl {

inline constexpr int kDefaultHorizon = 15;

struct EnvState {
  std::string page = "home";
  int step_index = 0;
  std::vector<Action> history;
  std::map<std::string, std::string> scratch;  // cart:*, theme, query, ...

  friend bool operator==(const EnvState&, const EnvState&) = default;

  std::optional<std::string> get(const std::string& key) const {
    auto it = scratch.find(key);
    if (it == scratch.end()) return std::nullopt;
    return it->second;
  }

  bool flag(const std::string& key) const {
    auto v = get(key);
    return v && *v == "1";
  }
};

inline EnvState reset(const SiteGraph& g) {
  check(g.has_page("home"), "reset: site has no home page");
  return EnvState{};
}

inline bool page_is_scrollable(const SiteGraph& g, const std::string& page_id) {
  const auto& role = g.page(page_id).role;
  return role == "category" || role == "item";
}

// All actions executable from `s`, sorted by (kind, argument). Never empty:
// Exit is always available. This ordering is the canonical one used for
// sampling CDFs, greedy tie-breaks, and search expansion everywhere.
inline std::vector<Action> feasible_actions(const SiteGraph& g, const EnvState& s) {
  std::vector<Action> out;
  const Page& page = g.page(s.page);
  bool scrolled = s.flag("scrolled:" + s.page);

  for (const auto& e : page.elements) {
    if (e.kind == "button") {
      out.push_back({ActionKind::Click, e.id});
    } else if (e.kind == "link") {
      // Category listings show the first couple of items; the rest sit
      // below the fold and need a scroll first.
      Action click{ActionKind::Click, e.id};
      auto tgt = g.edge_target(s.page, click);
      check(tgt.has_value(), "feasible_actions: link without edge: " + e.id);
      if (scrolled || g.item_is_visible(s.page, *tgt))
        out.push_back(click);
    } else if (e.kind == "input") {
      for (const auto& kw : g.search_vocab) out.push_back({ActionKind::Type, kw});
    }
  }
  if (page.role == "search")
    for (const auto& kw : g.search_vocab) out.push_back({ActionKind::Search, kw});
  if (page_is_scrollable(g, s.page))
    out.push_back(scrolled ? Action{ActionKind::Scroll, "up"}
                           : Action{ActionKind::Scroll, "down"});
  if (auto it = g.edges.find(s.page); it != g.edges.end())
    for (const auto& [a, tgt] : it->second)
      if (a.kind == ActionKind::Goto) out.push_back(a);
  if (g.parent.count(s.page)) out.push_back({ActionKind::GoBack, ""});
  if (page.role == "settings") {
    out.push_back({ActionKind::SelectOption, "theme_contrast"});
    out.push_back({ActionKind::SelectOption, "theme_dark"});
    out.push_back({ActionKind::SelectOption, "theme_light"});
    out.push_back({ActionKind::SelectOption, "theme_sepia"});
    out.push_back({ActionKind::SelectOption, "notif_on"});
    out.push_back({ActionKind::SelectOption, "notif_off"});
  }
  if (page.role == "category") {
    out.push_back({ActionKind::SelectOption, "price_asc"});
    out.push_back({ActionKind::SelectOption, "price_desc"});
  }
  out.push_back({ActionKind::Exit, ""});

  std::sort(out.begin(), out.end());
  return out;
}

struct StepResult {
  EnvState state;
  bool terminal = false;
};

// Execute one action. Infeasible actions are a caller bug, not a soft
// failure: the policy always samples from the feasible set.
inline StepResult step(const SiteGraph& g, const EnvState& s, const Action& a,
                       int horizon = kDefaultHorizon) {
  check(horizon >= 1, "step: horizon must be >= 1");
  check(s.step_index < horizon, "step: episode already ended");
  auto feas = feasible_actions(g, s);
  check(std::binary_search(feas.begin(), feas.end(), a),
        "step: infeasible action " + a.str() + " on page " + s.page);

  EnvState n = s;
  switch (a.kind) {
    case ActionKind::Click: {
      if (a.arg == "btn_add_to_cart") {
        n.scratch["cart:" + s.page] = "1";
      } else if (a.arg == "btn_checkout") {
        n.scratch["checked_out"] = "1";
      } else {  // a link; feasibility guarantees the edge exists
        n.page = *g.edge_target(s.page, a);
      }
      break;
    }
    case ActionKind::Type:
      n.scratch["query"] = a.arg;
      break;
    case ActionKind::Search:
      n.scratch["query"] = a.arg;
      n.page = *g.edge_target(s.page, a);
      break;
    case ActionKind::Scroll:
      if (a.arg == "down")
        n.scratch["scrolled:" + s.page] = "1";
      else
        n.scratch.erase("scrolled:" + s.page);
      break;
    case ActionKind::Goto:
      n.page = *g.edge_target(s.page, a);
      break;
    case ActionKind::GoBack:
      n.page = g.parent.at(s.page);
      break;
    case ActionKind::SelectOption: {
      if (a.arg.rfind("theme_", 0) == 0) n.scratch["theme"] = a.arg.substr(6);
      else if (a.arg.rfind("notif_", 0) == 0) n.scratch["notif"] = a.arg.substr(6);
      else if (a.arg == "price_asc") n.scratch["sort:" + s.page] = "asc";
      else if (a.arg == "price_desc") n.scratch["sort:" + s.page] = "desc";
      else throw std::runtime_error("step: unknown option " + a.arg);
      break;
    }
    case ActionKind::Exit:
      break;
  }
  n.history.push_back(a);
  n.step_index = s.step_index + 1;
  bool terminal = (a.kind == ActionKind::Exit) || (n.step_index >= horizon);
  return {std::move(n), terminal};
}

// Stable short fingerprint of a state, for trajectory records.
inline std::string state_digest(const EnvState& s) {
  std::string blob = s.page + "\x1f" + std::to_string(s.step_index);
  for (const auto& [k, v] : s.scratch) blob += "\x1f" + k + "=" + v;
  for (const auto& a : s.history) blob += "\x1f" + a.str();
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(splitmix64(fnv1a64(blob, 0xd16e57u))));
  return buf;
}

}  // namespace webrl

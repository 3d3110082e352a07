#pragma once

// Task templates and concrete task instances.
//
// A template is an instruction pattern with typed slots, a conjunction of
// success predicates over the final state, and mutation links (siblings at
// the same requirement count, compose targets one level up, simplify
// targets one level down) that the curriculum uses to evolve new tasks.

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "webrl/common.hpp"
#include "webrl/env.hpp"
#include "webrl/site.hpp"

namespace webrl {

using Params = std::map<std::string, std::string>;

struct TaskInstance {
  std::string template_id;
  Params params;
  std::string origin = "seed";  // "seed" or "evolved:<phase>"
  std::string instruction;

  friend bool operator==(const TaskInstance&, const TaskInstance&) = default;

  // Identity for dedup: template plus canonically ordered params.
  std::string key() const {
    std::string k = template_id;
    for (const auto& [s, v] : params) k += "|" + s + "=" + v;
    return k;
  }
};

inline void to_json(nlohmann::json& j, const TaskInstance& t) {
  j = nlohmann::json{{"template_id", t.template_id},
                     {"params", t.params},
                     {"origin", t.origin},
                     {"instruction", t.instruction}};
}

inline void from_json(const nlohmann::json& j, TaskInstance& t) {
  t.template_id = j.at("template_id").get<std::string>();
  t.params = j.at("params").get<Params>();
  t.origin = j.at("origin").get<std::string>();
  t.instruction = j.at("instruction").get<std::string>();
}

// One success requirement: a predicate over the final state.
using Conjunct = std::function<bool(const SiteGraph&, const EnvState&, const Params&)>;

struct TaskTemplate {
  std::string id;
  std::vector<std::string> slots;  // declaration order, used when sampling
  std::map<std::string, std::vector<std::string>> allowed;  // sorted values
  std::string pattern;             // instruction text with {slot} holes
  std::vector<std::string> siblings;  // same requirement count
  struct Link {
    std::string target;
    std::map<std::string, std::string> slot_map;  // my slot -> target slot
  };
  std::vector<Link> compose;   // requirement count + 1
  std::vector<Link> simplify;  // requirement count - 1
  std::vector<Conjunct> conjuncts;
  // Scratch keys the predicates read, for the oracle's state projection.
  std::function<std::vector<std::string>(const Params&)> relevant_keys;

  int requirement_count() const { return static_cast<int>(conjuncts.size()); }

  // Number of distinct instances this template can produce (slots draw
  // independently, so the product is exact).
  long instance_space() const {
    long n = 1;
    for (const auto& s : slots) n *= static_cast<long>(allowed.at(s).size());
    return n;
  }
};

inline std::string render_instruction(const TaskTemplate& t, const Params& params) {
  std::string out = t.pattern;
  for (const auto& [slot, value] : params) {
    std::string hole = "{" + slot + "}";
    for (std::size_t p = out.find(hole); p != std::string::npos; p = out.find(hole))
      out.replace(p, hole.size(), value);
  }
  return out;
}

class TemplateRegistry {
 public:
  explicit TemplateRegistry(const SiteGraph& g) { build(g); }

  bool has(const std::string& id) const { return templates_.count(id) > 0; }

  const TaskTemplate& at(const std::string& id) const {
    auto it = templates_.find(id);
    check(it != templates_.end(), "TemplateRegistry: unknown template " + id);
    return it->second;
  }

  const std::vector<std::string>& ids() const { return ids_; }

  int index_of(const std::string& id) const {
    auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
    check(it != ids_.end() && *it == id, "TemplateRegistry: unknown template " + id);
    return static_cast<int>(it - ids_.begin());
  }

  // Throws unless the instance binds exactly the template's slots to
  // allowed values.
  void validate(const TaskInstance& inst) const {
    const TaskTemplate& t = at(inst.template_id);
    check(inst.params.size() == t.slots.size(),
          "validate: wrong slot count for " + inst.template_id);
    for (const auto& slot : t.slots) {
      auto it = inst.params.find(slot);
      check(it != inst.params.end(),
            "validate: missing slot " + slot + " in " + inst.template_id);
      const auto& vals = t.allowed.at(slot);
      check(std::binary_search(vals.begin(), vals.end(), it->second),
            "validate: value '" + it->second + "' not allowed for slot " + slot +
                " of " + inst.template_id);
    }
  }

  TaskInstance sample_instance(const std::string& template_id, RngStream& rng,
                               const std::string& origin = "seed") const {
    const TaskTemplate& t = at(template_id);
    TaskInstance inst;
    inst.template_id = template_id;
    inst.origin = origin;
    for (const auto& slot : t.slots) {
      const auto& vals = t.allowed.at(slot);
      inst.params[slot] = vals[rng.uniform_index(vals.size())];
    }
    inst.instruction = render_instruction(t, inst.params);
    return inst;
  }

 private:
  std::map<std::string, TaskTemplate> templates_;
  std::vector<std::string> ids_;

  void add(TaskTemplate t) {
    for (auto& [slot, vals] : t.allowed) {
      std::sort(vals.begin(), vals.end());
      check(!vals.empty(), "template " + t.id + ": empty slot " + slot);
    }
    check(t.slots.size() == t.allowed.size(), "template " + t.id + ": slot mismatch");
    check(!t.conjuncts.empty(), "template " + t.id + ": no requirements");
    templates_[t.id] = std::move(t);
  }

  void build(const SiteGraph& g);
};

// --- predicate helpers --------------------------------------------------

namespace detail {

inline Conjunct final_page_is(std::string slot) {
  return [slot](const SiteGraph&, const EnvState& s, const Params& p) {
    return s.page == p.at(slot);
  };
}

// scratch[prefix + params[slot]] == "1"
inline Conjunct flag_set(std::string prefix, std::string slot) {
  return [prefix, slot](const SiteGraph&, const EnvState& s, const Params& p) {
    return s.flag(prefix + p.at(slot));
  };
}

inline Conjunct flag_set_const(std::string key) {
  return [key](const SiteGraph&, const EnvState& s, const Params&) {
    return s.flag(key);
  };
}

// scratch[key] == params[slot]
inline Conjunct scratch_equals(std::string key, std::string slot) {
  return [key, slot](const SiteGraph&, const EnvState& s, const Params& p) {
    auto v = s.get(key);
    return v && *v == p.at(slot);
  };
}

// scratch["sort:" + params[cat_slot]] == params[order_slot]
inline Conjunct sort_matches(std::string cat_slot, std::string order_slot) {
  return [cat_slot, order_slot](const SiteGraph&, const EnvState& s, const Params& p) {
    auto v = s.get("sort:" + p.at(cat_slot));
    return v && *v == p.at(order_slot);
  };
}

}  // namespace detail

inline void TemplateRegistry::build(const SiteGraph& g) {
  using detail::final_page_is;
  using detail::flag_set;
  using detail::flag_set_const;
  using detail::scratch_equals;
  using detail::sort_matches;
  using Link = TaskTemplate::Link;

  std::vector<std::string> all_items, cats, scrollable;
  for (const auto& [it, cat] : g.item_category) all_items.push_back(it);
  for (const auto& p : g.pages)
    if (p.role == "category") cats.push_back(p.id);
  scrollable = cats;
  scrollable.insert(scrollable.end(), all_items.begin(), all_items.end());
  // Two disjoint item pools for the two-item templates; forcing the items
  // into different category groups keeps those tasks genuinely long.
  std::vector<std::string> pool_a, pool_b;
  for (const auto& [it, cat] : g.item_category)
    (cat == "category_0" || cat == "category_1" ? pool_a : pool_b).push_back(it);
  std::vector<std::string> vocab = g.search_vocab;
  std::vector<std::string> themes = {"contrast", "dark", "light", "sepia"};
  std::vector<std::string> modes = {"off", "on"};
  std::vector<std::string> orders = {"asc", "desc"};
  std::vector<std::string> utilities = {"cart", "search", "settings"};

  // requirement count 1 -------------------------------------------------
  add({.id = "nav_item",
       .slots = {"item"},
       .allowed = {{"item", all_items}},
       .pattern = "Open the product page for {item} and stay there.",
       .siblings = {"nav_category", "nav_utility"},
       .compose = {Link{"search_visit", {{"item", "item"}}},
                   Link{"cart_add_two", {{"item", "item_a"}}}},
       .simplify = {},
       .conjuncts = {final_page_is("item")},
       .relevant_keys = [](const Params&) { return std::vector<std::string>{}; }});

  add({.id = "nav_category",
       .slots = {"category"},
       .allowed = {{"category", cats}},
       .pattern = "Browse to the {category} section and stop there.",
       .siblings = {"nav_item", "nav_utility"},
       .compose = {},
       .simplify = {},
       .conjuncts = {final_page_is("category")},
       .relevant_keys = [](const Params&) { return std::vector<std::string>{}; }});

  add({.id = "nav_utility",
       .slots = {"utility"},
       .allowed = {{"utility", utilities}},
       .pattern = "Go to the {utility} page.",
       .siblings = {"nav_item", "nav_category"},
       .compose = {},
       .simplify = {},
       .conjuncts = {final_page_is("utility")},
       .relevant_keys = [](const Params&) { return std::vector<std::string>{}; }});

  add({.id = "sort_category",
       .slots = {"category", "order"},
       .allowed = {{"category", cats}, {"order", orders}},
       .pattern = "Sort the {category} listing by price ({order}).",
       .siblings = {"settings_theme", "scroll_page"},
       .compose = {},
       .simplify = {},
       .conjuncts = {sort_matches("category", "order")},
       .relevant_keys =
           [](const Params& p) {
             return std::vector<std::string>{"sort:" + p.at("category")};
           }});

  add({.id = "cart_add",
       .slots = {"item"},
       .allowed = {{"item", all_items}},
       .pattern = "Add {item} to your cart.",
       .siblings = {"search_query", "scroll_page"},
       .compose = {Link{"cart_add_two", {{"item", "item_a"}}},
                   Link{"cart_checkout", {{"item", "item"}}}},
       .simplify = {},
       .conjuncts = {flag_set("cart:", "item")},
       .relevant_keys =
           [](const Params& p) {
             return std::vector<std::string>{"cart:" + p.at("item")};
           }});

  add({.id = "search_query",
       .slots = {"keyword"},
       .allowed = {{"keyword", vocab}},
       .pattern = "Run a site search for {keyword}.",
       .siblings = {"cart_add", "settings_theme"},
       .compose = {Link{"search_visit", {{"keyword", "item"}}}},
       .simplify = {},
       .conjuncts = {scratch_equals("query", "keyword")},
       .relevant_keys =
           [](const Params&) { return std::vector<std::string>{"query"}; }});

  add({.id = "settings_theme",
       .slots = {"theme"},
       .allowed = {{"theme", themes}},
       .pattern = "Switch the site theme to {theme}.",
       .siblings = {"settings_notifications", "sort_category"},
       .compose = {Link{"settings_both", {{"theme", "theme"}}}},
       .simplify = {},
       .conjuncts = {scratch_equals("theme", "theme")},
       .relevant_keys =
           [](const Params&) { return std::vector<std::string>{"theme"}; }});

  add({.id = "settings_notifications",
       .slots = {"mode"},
       .allowed = {{"mode", modes}},
       .pattern = "Turn notifications {mode} in the settings.",
       .siblings = {"settings_theme", "sort_category"},
       .compose = {Link{"settings_both", {{"mode", "mode"}}}},
       .simplify = {},
       .conjuncts = {scratch_equals("notif", "mode")},
       .relevant_keys =
           [](const Params&) { return std::vector<std::string>{"notif"}; }});

  add({.id = "scroll_page",
       .slots = {"page"},
       .allowed = {{"page", scrollable}},
       .pattern = "Scroll down to the bottom of the {page} page.",
       .siblings = {"cart_add", "sort_category"},
       .compose = {},
       .simplify = {},
       .conjuncts = {flag_set("scrolled:", "page")},
       .relevant_keys =
           [](const Params& p) {
             return std::vector<std::string>{"scrolled:" + p.at("page")};
           }});

  // requirement count 2 -------------------------------------------------
  add({.id = "cart_add_two",
       .slots = {"item_a", "item_b"},
       .allowed = {{"item_a", pool_a}, {"item_b", pool_b}},
       .pattern = "Put {item_a} and {item_b} in your cart.",
       .siblings = {"cart_checkout", "search_visit", "settings_both"},
       .compose = {Link{"cart_two_checkout", {{"item_a", "item_a"}, {"item_b", "item_b"}}}},
       .simplify = {Link{"cart_add", {{"item_a", "item"}}},
                    Link{"cart_add", {{"item_b", "item"}}}},
       .conjuncts = {flag_set("cart:", "item_a"), flag_set("cart:", "item_b")},
       .relevant_keys =
           [](const Params& p) {
             return std::vector<std::string>{"cart:" + p.at("item_a"),
                                             "cart:" + p.at("item_b")};
           }});

  add({.id = "cart_checkout",
       .slots = {"item"},
       .allowed = {{"item", all_items}},
       .pattern = "Buy {item}: add it to the cart and complete checkout.",
       .siblings = {"cart_add_two", "search_visit", "settings_both"},
       .compose = {Link{"cart_checkout_theme", {{"item", "item"}}},
                   Link{"cart_two_checkout", {{"item", "item_a"}}}},
       .simplify = {Link{"cart_add", {{"item", "item"}}}},
       .conjuncts = {flag_set("cart:", "item"), flag_set_const("checked_out")},
       .relevant_keys =
           [](const Params& p) {
             return std::vector<std::string>{"cart:" + p.at("item"), "checked_out"};
           }});

  add({.id = "search_visit",
       .slots = {"item"},
       .allowed = {{"item", vocab}},
       .pattern = "Search for {item} and open it from the results.",
       .siblings = {"cart_add_two", "cart_checkout", "settings_both"},
       .compose = {},
       .simplify = {Link{"search_query", {{"item", "keyword"}}},
                    Link{"nav_item", {{"item", "item"}}}},
       .conjuncts = {scratch_equals("query", "item"), final_page_is("item")},
       .relevant_keys =
           [](const Params&) { return std::vector<std::string>{"query"}; }});

  add({.id = "settings_both",
       .slots = {"theme", "mode"},
       .allowed = {{"theme", themes}, {"mode", modes}},
       .pattern = "Set the theme to {theme} and turn notifications {mode}.",
       .siblings = {"cart_add_two", "cart_checkout", "search_visit"},
       .compose = {Link{"settings_both_cart", {{"theme", "theme"}, {"mode", "mode"}}}},
       .simplify = {Link{"settings_theme", {{"theme", "theme"}}},
                    Link{"settings_notifications", {{"mode", "mode"}}}},
       .conjuncts = {scratch_equals("theme", "theme"), scratch_equals("notif", "mode")},
       .relevant_keys =
           [](const Params&) {
             return std::vector<std::string>{"theme", "notif"};
           }});

  // requirement count 3 -------------------------------------------------
  add({.id = "cart_checkout_theme",
       .slots = {"item", "theme"},
       .allowed = {{"item", all_items}, {"theme", themes}},
       .pattern = "Buy {item} (add to cart, check out) and set the theme to {theme}.",
       .siblings = {"cart_two_checkout", "settings_both_cart"},
       .compose = {},
       .simplify = {Link{"cart_checkout", {{"item", "item"}}},
                    Link{"settings_both", {{"theme", "theme"}}}},
       .conjuncts = {flag_set("cart:", "item"), flag_set_const("checked_out"),
                     scratch_equals("theme", "theme")},
       .relevant_keys =
           [](const Params& p) {
             return std::vector<std::string>{"cart:" + p.at("item"), "checked_out",
                                             "theme"};
           }});

  add({.id = "cart_two_checkout",
       .slots = {"item_a", "item_b"},
       .allowed = {{"item_a", pool_a}, {"item_b", pool_b}},
       .pattern = "Order {item_a} and {item_b}: add both to the cart, then check out.",
       .siblings = {"cart_checkout_theme", "settings_both_cart"},
       .compose = {},
       .simplify = {Link{"cart_add_two", {{"item_a", "item_a"}, {"item_b", "item_b"}}},
                    Link{"cart_checkout", {{"item_a", "item"}}}},
       .conjuncts = {flag_set("cart:", "item_a"), flag_set("cart:", "item_b"),
                     flag_set_const("checked_out")},
       .relevant_keys =
           [](const Params& p) {
             return std::vector<std::string>{"cart:" + p.at("item_a"),
                                             "cart:" + p.at("item_b"), "checked_out"};
           }});

  add({.id = "settings_both_cart",
       .slots = {"theme", "mode", "item"},
       .allowed = {{"theme", themes}, {"mode", modes}, {"item", all_items}},
       .pattern =
           "Set the theme to {theme}, turn notifications {mode}, and add {item} "
           "to your cart.",
       .siblings = {"cart_checkout_theme", "cart_two_checkout"},
       .compose = {},
       .simplify = {Link{"settings_both", {{"theme", "theme"}, {"mode", "mode"}}},
                    Link{"cart_checkout", {{"item", "item"}}}},
       .conjuncts = {scratch_equals("theme", "theme"), scratch_equals("notif", "mode"),
                     flag_set("cart:", "item")},
       .relevant_keys =
           [](const Params& p) {
             return std::vector<std::string>{"theme", "notif", "cart:" + p.at("item")};
           }});

  ids_.clear();
  for (const auto& [id, t] : templates_) ids_.push_back(id);

  // Cross-check the link structure once at construction.
  for (const auto& [id, t] : templates_) {
    for (const auto& s : t.siblings) {
      check(templates_.count(s) > 0, "template " + id + ": unknown sibling " + s);
      check(templates_.at(s).requirement_count() == t.requirement_count(),
            "template " + id + ": sibling " + s + " has different requirement count");
    }
    for (const auto& l : t.compose)
      check(templates_.count(l.target) > 0 &&
                templates_.at(l.target).requirement_count() ==
                    t.requirement_count() + 1,
            "template " + id + ": bad compose link " + l.target);
    for (const auto& l : t.simplify)
      check(templates_.count(l.target) > 0 &&
                templates_.at(l.target).requirement_count() ==
                    std::max(1, t.requirement_count() - 1),
            "template " + id + ": bad simplify link " + l.target);
  }
}

// 1.0 when every requirement of the instance holds in the final state,
// else 0.0. Pure: no sampling, no mutation.
inline double ground_truth_reward(const SiteGraph& g, const TemplateRegistry& reg,
                                  const TaskInstance& inst, const EnvState& final_state) {
  const TaskTemplate& t = reg.at(inst.template_id);
  for (const auto& c : t.conjuncts)
    if (!c(g, final_state, inst.params)) return 0.0;
  return 1.0;
}

}  // namespace webrl

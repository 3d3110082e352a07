#pragma once

// Synthetic shopping-site graph: pages, interactive elements, and the
// deterministic navigation structure the environment executes against.
//
// The default site is a 352-page shop: a home page, 12 category pages,
// 336 item pages, plus cart / search / settings utility pages. Every
// category stocks one item per catalog serial; an item's id is
// "item_<serial>_<copy>", where the copy index says nothing about where it
// lives. Seeds vary which copy of each serial lands in which category, the
// display order (and therefore which items are hidden below the fold),
// which items the search index covers, and the price ranking — the
// page/edge *schema* stays fixed. Category listings label their links by
// serial, so "link_s07" is the same control on every category page even
// though it leads to a different item page on each.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "webrl/action.hpp"
#include "webrl/common.hpp"

namespace webrl {

inline constexpr int kSiteFormatVersion = 1;
inline constexpr int kNumCategories = 12;
inline constexpr int kNumSerials = 28;  // items per category, one per serial
inline constexpr int kNumItems = kNumCategories * kNumSerials;
inline constexpr int kArgBuckets = 64;  // per-kind argument buckets at the default slot count
inline constexpr int kVisiblePerCategory = 2;  // rest hidden until scrolled

struct PageElement {
  std::string id;
  std::string kind;  // link | button | select | input
  friend bool operator==(const PageElement&, const PageElement&) = default;
};

struct Page {
  std::string id;
  std::string role;  // home | category | item | cart | search | settings
  std::vector<PageElement> elements;
  friend bool operator==(const Page&, const Page&) = default;
};

struct SiteGraph {
  int version = kSiteFormatVersion;
  std::uint64_t seed = 0;
  std::vector<Page> pages;  // stable order; the index doubles as feature id
  std::map<std::string, std::map<Action, std::string>> edges;  // page -> action -> target
  std::map<std::string, std::string> parent;  // go_back target per page
  std::vector<std::string> search_vocab;      // item ids reachable via search
  std::map<std::string, std::vector<std::string>> category_items;  // display order
  std::map<std::string, std::string> item_category;
  std::map<std::string, int> price_rank;

  std::map<std::string, int> page_index;  // derived, rebuilt on load

  const Page& page(const std::string& id) const {
    auto it = page_index.find(id);
    check(it != page_index.end(), "SiteGraph::page: unknown page '" + id + "'");
    return pages[static_cast<std::size_t>(it->second)];
  }

  bool has_page(const std::string& id) const { return page_index.count(id) > 0; }

  std::optional<std::string> edge_target(const std::string& page_id, const Action& a) const {
    auto pit = edges.find(page_id);
    if (pit == edges.end()) return std::nullopt;
    auto ait = pit->second.find(a);
    if (ait == pit->second.end()) return std::nullopt;
    return ait->second;
  }

  // Items shown without scrolling on a category page.
  std::vector<std::string> visible_items(const std::string& cat) const {
    auto it = category_items.find(cat);
    check(it != category_items.end(), "visible_items: not a category: " + cat);
    auto n = std::min<std::size_t>(kVisiblePerCategory, it->second.size());
    return {it->second.begin(), it->second.begin() + static_cast<long>(n)};
  }

  bool item_is_visible(const std::string& cat, const std::string& item) const {
    auto vis = visible_items(cat);
    return std::find(vis.begin(), vis.end(), item) != vis.end();
  }

  std::size_t edge_count() const {
    std::size_t n = 0;
    for (const auto& [p, m] : edges) n += m.size();
    return n;
  }

  void rebuild_index() {
    page_index.clear();
    for (std::size_t i = 0; i < pages.size(); ++i)
      page_index[pages[i].id] = static_cast<int>(i);
  }
};

namespace detail {

// Argument bucket an action argument falls into for a given kind; used by
// the builder to keep same-page same-kind arguments distinguishable to the
// slot-factored policy.
inline int arg_bucket(const std::string& arg, int per_kind = kArgBuckets) {
  return static_cast<int>(splitmix64(fnv1a64("a:" + arg, kHashSalt)) % per_kind);
}

inline std::string category_id(int c) { return "category_" + std::to_string(c); }

// Catalog serials. Scanned from the s00.. namespace in order, keeping only
// names whose click-argument bucket is new, so the per-category link
// controls are always distinguishable to the slot-factored policy.
inline const std::vector<std::string>& serials() {
  static const std::vector<std::string> out = [] {
    std::vector<std::string> v;
    std::set<int> used;
    for (int i = 0; static_cast<int>(v.size()) < kNumSerials; ++i) {
      check(i < 1000, "serials: serial namespace exhausted");
      char buf[8];
      std::snprintf(buf, sizeof buf, "s%02d", i);
      if (!used.insert(arg_bucket(std::string("link_") + buf)).second) continue;
      v.push_back(buf);
    }
    return v;
  }();
  return out;
}

inline std::string item_id(const std::string& serial, int copy) {
  return "item_" + serial + "_" + std::to_string(copy);
}

// The fixed item catalog: every serial exists in kNumCategories copies.
// Which copy of a serial a given category stocks is the seeded part.
inline const std::vector<std::string>& default_items() {
  static const std::vector<std::string> items = [] {
    std::vector<std::string> out;
    for (const auto& s : serials())
      for (int c = 0; c < kNumCategories; ++c) out.push_back(item_id(s, c));
    return out;
  }();
  return items;
}

// Stock the categories: for each serial, a seeded permutation decides which
// copy goes to which category, then each category's display order is
// shuffled. Copy indices carry no placement information on their own — only
// the permutations (i.e. the seed) know where a given item ended up.
inline std::map<std::string, std::vector<std::string>> assign_items(RngStream& rng) {
  std::vector<std::vector<std::string>> bins(kNumCategories);
  for (const auto& s : serials()) {
    std::vector<int> perm(kNumCategories);
    for (int c = 0; c < kNumCategories; ++c) perm[static_cast<std::size_t>(c)] = c;
    for (std::size_t i = perm.size(); i > 1; --i)
      std::swap(perm[i - 1], perm[rng.uniform_index(i)]);
    for (int c = 0; c < kNumCategories; ++c)
      bins[static_cast<std::size_t>(c)].push_back(item_id(s, perm[static_cast<std::size_t>(c)]));
  }
  std::map<std::string, std::vector<std::string>> out;
  for (int c = 0; c < kNumCategories; ++c) {
    auto& b = bins[static_cast<std::size_t>(c)];
    for (std::size_t i = b.size(); i > 1; --i)
      std::swap(b[i - 1], b[rng.uniform_index(i)]);
    out[category_id(c)] = b;
  }
  return out;
}

// "item_<serial>_<copy>" -> serial
inline std::string item_serial(const std::string& id) {
  auto a = id.find('_');
  auto b = id.rfind('_');
  check(a != std::string::npos && b != std::string::npos && a < b,
        "item_serial: not an item id: " + id);
  return id.substr(a + 1, b - a - 1);
}

}  // namespace detail

// Deterministically build the default site for a seed. Two different seeds
// differ in item placement / search index / price ranks but share the page
// schema. Everything downstream (templates, oracle, features) reads
// structure from the returned graph, never from globals.
inline SiteGraph build_default_site(std::uint64_t seed) {
  SiteGraph g;
  g.seed = seed;
  RngStream rng = RngStream(seed).derive("site");

  // --- pages ---
  g.pages.push_back({"home", "home", {}});
  for (int c = 0; c < kNumCategories; ++c)
    g.pages.push_back({detail::category_id(c), "category", {}});
  for (const auto& it : detail::default_items())
    g.pages.push_back({it, "item", {{"btn_add_to_cart", "button"}}});
  g.pages.push_back({"cart", "cart", {{"btn_checkout", "button"}}});
  g.pages.push_back({"search", "search", {{"search_box", "input"}}});
  g.pages.push_back({"settings",
                     "settings",
                     {{"sel_theme", "select"}, {"sel_notifications", "select"}}});
  g.rebuild_index();

  // --- item placement (seeded, bucket-collision-free) ---
  g.category_items = detail::assign_items(rng);
  for (const auto& [cat, its] : g.category_items) {
    for (const auto& it : its) g.item_category[it] = cat;
    auto& elems = g.pages[static_cast<std::size_t>(g.page_index[cat])].elements;
    elems.push_back({"sel_sort", "select"});
    for (const auto& it : its) elems.push_back({"link_" + detail::item_serial(it), "link"});
  }

  // --- search index: one seeded item per search-argument bucket, so the
  // terms a search can use are never ambiguous to the slot-factored
  // policy. ---
  std::map<int, std::vector<std::string>> by_bucket;
  for (const auto& id : detail::default_items())
    by_bucket[detail::arg_bucket(id)].push_back(id);
  for (auto& [b, cand] : by_bucket)
    g.search_vocab.push_back(cand[rng.uniform_index(cand.size())]);
  std::sort(g.search_vocab.begin(), g.search_vocab.end());

  // --- price ranks (seeded permutation) ---
  {
    std::vector<int> ranks(kNumItems);
    for (int i = 0; i < kNumItems; ++i) ranks[static_cast<std::size_t>(i)] = i;
    for (std::size_t i = ranks.size(); i > 1; --i)
      std::swap(ranks[i - 1], ranks[rng.uniform_index(i)]);
    const auto& items = detail::default_items();
    for (int i = 0; i < kNumItems; ++i)
      g.price_rank[items[static_cast<std::size_t>(i)]] = ranks[static_cast<std::size_t>(i)];
  }

  // --- navigation edges ---
  const std::vector<std::string> utilities = {"cart", "search", "settings"};
  for (const auto& p : g.pages) {
    if (p.id != "home") g.edges[p.id][{ActionKind::Goto, "home"}] = "home";
    for (const auto& u : utilities)
      if (p.id != u) g.edges[p.id][{ActionKind::Goto, u}] = u;
  }
  for (int c = 0; c < kNumCategories; ++c)
    g.edges["home"][{ActionKind::Goto, detail::category_id(c)}] = detail::category_id(c);
  for (const auto& [cat, its] : g.category_items)
    for (const auto& it : its)
      g.edges[cat][{ActionKind::Click, "link_" + detail::item_serial(it)}] = it;
  for (const auto& it : g.search_vocab)
    g.edges["search"][{ActionKind::Search, it}] = it;

  // --- go_back parents (static; arrival path never matters) ---
  for (int c = 0; c < kNumCategories; ++c) g.parent[detail::category_id(c)] = "home";
  for (const auto& [it, cat] : g.item_category) g.parent[it] = cat;
  for (const auto& u : utilities) g.parent[u] = "home";

  return g;
}

// --- validation -------------------------------------------------------

inline void validate_site(const SiteGraph& g) {
  check(g.version == kSiteFormatVersion, "validate_site: unsupported version");
  check(!g.pages.empty(), "validate_site: no pages");
  std::set<std::string> ids;
  for (const auto& p : g.pages) {
    check(ids.insert(p.id).second, "validate_site: duplicate page id " + p.id);
    std::set<std::string> eids;
    for (const auto& e : p.elements)
      check(eids.insert(e.id).second,
            "validate_site: duplicate element " + e.id + " on " + p.id);
  }
  for (const auto& [src, m] : g.edges) {
    check(ids.count(src) > 0, "validate_site: edge from unknown page " + src);
    for (const auto& [a, dst] : m)
      check(ids.count(dst) > 0,
            "validate_site: edge " + src + " -[" + a.str() + "]-> unknown page " + dst);
  }
  for (const auto& [p, q] : g.parent) {
    check(ids.count(p) > 0 && ids.count(q) > 0, "validate_site: bad parent entry");
  }
  for (const auto& [cat, its] : g.category_items)
    for (const auto& it : its) {
      check(ids.count(it) > 0, "validate_site: category lists unknown item " + it);
      auto ic = g.item_category.find(it);
      check(ic != g.item_category.end() && ic->second == cat,
            "validate_site: item_category inconsistent for " + it);
    }
  for (const auto& v : g.search_vocab)
    check(g.item_category.count(v) > 0, "validate_site: search vocab has non-item " + v);
}

// --- serialization ----------------------------------------------------

inline void to_json(nlohmann::json& j, const PageElement& e) {
  j = nlohmann::json{{"id", e.id}, {"kind", e.kind}};
}
inline void from_json(const nlohmann::json& j, PageElement& e) {
  e.id = j.at("id").get<std::string>();
  e.kind = j.at("kind").get<std::string>();
}
inline void to_json(nlohmann::json& j, const Page& p) {
  j = nlohmann::json{{"id", p.id}, {"role", p.role}, {"elements", p.elements}};
}
inline void from_json(const nlohmann::json& j, Page& p) {
  p.id = j.at("id").get<std::string>();
  p.role = j.at("role").get<std::string>();
  p.elements = j.at("elements").get<std::vector<PageElement>>();
}

inline nlohmann::json site_to_json(const SiteGraph& g) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [src, m] : g.edges)
    for (const auto& [a, dst] : m)
      edges.push_back({{"page", src}, {"action", a}, {"target", dst}});
  return nlohmann::json{{"format", "webrl-site"},
                        {"version", g.version},
                        {"seed", g.seed},
                        {"pages", g.pages},
                        {"edges", edges},
                        {"parents", g.parent},
                        {"search_vocab", g.search_vocab},
                        {"category_items", g.category_items},
                        {"price_rank", g.price_rank}};
}

inline SiteGraph site_from_json(const nlohmann::json& j) {
  check(j.value("format", "") == std::string("webrl-site"),
        "site_from_json: missing or wrong format tag");
  check(j.at("version").get<int>() == kSiteFormatVersion,
        "site_from_json: unsupported version " + j.at("version").dump());
  SiteGraph g;
  g.version = j.at("version").get<int>();
  g.seed = j.at("seed").get<std::uint64_t>();
  g.pages = j.at("pages").get<std::vector<Page>>();
  for (const auto& e : j.at("edges")) {
    Action a = e.at("action").get<Action>();
    g.edges[e.at("page").get<std::string>()][a] = e.at("target").get<std::string>();
  }
  g.parent = j.at("parents").get<std::map<std::string, std::string>>();
  g.search_vocab = j.at("search_vocab").get<std::vector<std::string>>();
  g.category_items =
      j.at("category_items").get<std::map<std::string, std::vector<std::string>>>();
  for (const auto& [cat, its] : g.category_items)
    for (const auto& it : its) g.item_category[it] = cat;
  g.price_rank = j.at("price_rank").get<std::map<std::string, int>>();
  g.rebuild_index();
  validate_site(g);
  return g;
}

inline void save_site(const std::string& path, const SiteGraph& g) {
  std::ofstream out(path);
  check(out.good(), "save_site: cannot open " + path);
  out << site_to_json(g).dump(2) << "\n";
  check(out.good(), "save_site: write failed for " + path);
}

inline SiteGraph load_site(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "load_site: cannot open " + path);
  nlohmann::json j;
  in >> j;
  return site_from_json(j);
}

}  // namespace webrl

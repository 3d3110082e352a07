#pragma once

// Action vocabulary of the synthetic web environment.

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "webrl/common.hpp"

namespace webrl {

// Canonical kind order. Everything that needs "sorted by action kind then
// argument" (feasible sets, tie-breaking, CDF sampling) uses this order.
enum class ActionKind : int {
  Click = 0,
  Type = 1,
  Search = 2,
  Scroll = 3,
  Goto = 4,
  GoBack = 5,
  SelectOption = 6,
  Exit = 7,
};

inline constexpr int kNumActionKinds = 8;

inline std::string_view kind_name(ActionKind k) {
  switch (k) {
    case ActionKind::Click: return "click";
    case ActionKind::Type: return "type";
    case ActionKind::Search: return "search";
    case ActionKind::Scroll: return "scroll";
    case ActionKind::Goto: return "goto";
    case ActionKind::GoBack: return "go_back";
    case ActionKind::SelectOption: return "select_option";
    case ActionKind::Exit: return "exit";
  }
  throw std::invalid_argument("kind_name: bad ActionKind");
}

inline ActionKind kind_from_name(std::string_view s) {
  for (int i = 0; i < kNumActionKinds; ++i) {
    auto k = static_cast<ActionKind>(i);
    if (kind_name(k) == s) return k;
  }
  throw std::invalid_argument("kind_from_name: unknown kind '" + std::string(s) + "'");
}

// An action is a kind plus one string argument (element id, page id, query
// text, scroll direction, option id; empty for GoBack/Exit).
struct Action {
  ActionKind kind = ActionKind::Exit;
  std::string arg;

  friend auto operator<=>(const Action&, const Action&) = default;

  std::string str() const {
    std::string s{kind_name(kind)};
    if (!arg.empty()) s += ":" + arg;
    return s;
  }
};

inline void to_json(nlohmann::json& j, const Action& a) {
  j = nlohmann::json{{"kind", kind_name(a.kind)}, {"arg", a.arg}};
}

inline void from_json(const nlohmann::json& j, Action& a) {
  a.kind = kind_from_name(j.at("kind").get<std::string>());
  a.arg = j.at("arg").get<std::string>();
}

// Policy/critic action slot: kind index times buckets-per-kind plus a hashed
// argument bucket. slots must be divisible by the number of kinds so every
// kind owns an equal bucket range. The splitmix64 finalizer matters: FNV-1a
// alone has weak low bits and the modulo looks only at those.
inline int action_slot(const Action& a, int slots) {
  if (slots % kNumActionKinds != 0)
    throw std::invalid_argument("action_slot: slots must be a multiple of 8");
  int per_kind = slots / kNumActionKinds;
  auto bucket =
      static_cast<int>(splitmix64(fnv1a64("a:" + a.arg, kHashSalt)) % per_kind);
  return static_cast<int>(a.kind) * per_kind + bucket;
}

}  // namespace webrl

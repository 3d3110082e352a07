#pragma once

// Shared low-level utilities: deterministic hashing, seeded RNG streams,
// and fixed-width number formatting for artifacts.
//
// Everything here is chosen so that a run is reproducible bit-for-bit from
// its seed on any platform: mt19937_64 and our own uniform mappings are
// fully specified by the standard, unlike std::uniform_*_distribution.

#include <cstdint>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace webrl {

// FNV-1a 64-bit. Used for every stable string -> index mapping (feature
// bits, action-argument buckets). The salt is folded in first so unrelated
// hash uses can't collide by accident.
//
// kHashSalt was picked by offline search so that on the default site the
// action arguments that must compete within one feasible set land in
// distinct argument buckets (see action_slot). It is frozen: changing it
// silently breaks the bucket-distinctness assumptions baked into the
// default site builder.
inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;
inline constexpr std::uint64_t kHashSalt = 33;

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t salt) {
  std::uint64_t h = kFnvOffset;
  for (int i = 0; i < 8; ++i) {
    h ^= (salt >> (8 * i)) & 0xffu;
    h *= kFnvPrime;
  }
  for (unsigned char c : s) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

// splitmix64: mixes seed material into statistically independent 64-bit
// values; used to derive child stream seeds from (seed, tag) pairs.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// A named RNG stream. Child streams are derived by hashing the parent seed
// with a tag, so the draw order in one stream can never perturb another.
// That is what makes multi-threaded rollouts reproduce the single-threaded
// run exactly: each rollout gets its own derived stream.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), eng_(splitmix64(seed)) {}

  std::uint64_t seed() const { return seed_; }

  // Uniform in [0, 1). 53 random mantissa bits, the standard trick.
  double u01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). Rejection-free multiply-shift would bias for
  // huge n; rejection sampling keeps it exact and is still O(1) expected.
  std::size_t uniform_index(std::size_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
    std::uint64_t bound = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    for (;;) {
      std::uint64_t v = eng_();
      if (v < bound) return static_cast<std::size_t>(v % n);
    }
  }

  std::uint64_t next_u64() { return eng_(); }

  // Derive an independent child stream from a string tag.
  RngStream derive(std::string_view tag) const {
    return RngStream(splitmix64(seed_ ^ fnv1a64(tag, 0x5eedu)));
  }

  // Derive from numeric coordinates, e.g. (phase, task index, rollout k).
  RngStream derive(std::string_view tag, std::uint64_t a, std::uint64_t b = 0,
                   std::uint64_t c = 0) const {
    std::uint64_t h = seed_ ^ fnv1a64(tag, 0x5eedu);
    h = splitmix64(h ^ splitmix64(a));
    h = splitmix64(h ^ splitmix64(b));
    h = splitmix64(h ^ splitmix64(c));
    return RngStream(h);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 eng_;
};

// Reals in CSV/JSON artifacts are printed with 6 significant digits so that
// reruns diff cleanly.
inline std::string fmt_g6(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return std::string(buf);
}

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw std::runtime_error(msg);
}

}  // namespace webrl

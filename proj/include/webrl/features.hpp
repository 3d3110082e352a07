#pragma once

// State-instruction featurization shared by the policy and the critic.
//
// Layout for dimension D (default 640):
//   [0, 356)   current page one-hot
//   [356, 380) task template one-hot
//   [380, 508) hashed bits of the instruction parameter values, three per value
//   [508, 517) last action kind one-hot (slot 0 = no action yet)
//   [517, D)   hashed (key=value) bits of the scratch state
//
// Hashed bits use FNV-1a with the frozen salt plus a splitmix64 finalizer
// (FNV's low bits alone are too weak to index with). Parameter values get
// three independently hashed bits each, so two values only become
// indistinguishable if all three bits collide at once — checked to never
// happen for the default site's value set. Vectors are sparse: typically
// fewer than a dozen active bits.

#include <algorithm>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "webrl/common.hpp"
#include "webrl/env.hpp"
#include "webrl/site.hpp"
#include "webrl/tasks.hpp"

namespace webrl {

inline constexpr int kDefaultFeatureDim = 640;
inline constexpr int kPageBlock = 356;  // >= page count of the default site (352)
inline constexpr int kTemplateBlock = 24;
inline constexpr int kParamBlock = 128;
inline constexpr int kLastKindBlock = 1 + kNumActionKinds;
inline constexpr int kScratchBase = kPageBlock + kTemplateBlock + kParamBlock + kLastKindBlock;

struct FeatureVector {
  int dim = 0;
  std::vector<std::pair<int, double>> entries;  // sorted by index, unique

  Eigen::VectorXd dense() const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
    for (const auto& [i, x] : entries) v[i] = x;
    return v;
  }

  // phi . row(W, r)
  double dot_row(const Eigen::MatrixXd& w, int row) const {
    double s = 0.0;
    for (const auto& [i, x] : entries) s += w(row, i) * x;
    return s;
  }

  double dot(const Eigen::VectorXd& w) const {
    double s = 0.0;
    for (const auto& [i, x] : entries) s += w[i] * x;
    return s;
  }

  double norm2() const {
    double s = 0.0;
    for (const auto& [i, x] : entries) s += x * x;
    return s;
  }
};

namespace detail {
inline int hashed_bit(const std::string& token, int block) {
  return static_cast<int>(splitmix64(fnv1a64(token, kHashSalt)) %
                          static_cast<std::uint64_t>(block));
}
}  // namespace detail

inline FeatureVector featurize(const SiteGraph& g, const TemplateRegistry& reg,
                               const EnvState& s, const TaskInstance& inst,
                               int dim = kDefaultFeatureDim) {
  check(dim > kScratchBase, "featurize: dim too small for the block layout");
  std::vector<int> bits;
  bits.reserve(8 + s.scratch.size());

  bits.push_back(g.page_index.at(s.page) % kPageBlock);
  bits.push_back(kPageBlock + reg.index_of(inst.template_id) % kTemplateBlock);
  // Parameter tokens are keyed by value alone: "item_s07_3" names the same
  // thing whether a task says to open it, add it to the cart, or search for
  // it, and sharing the bit is what lets one task family teach another
  // where that value lives. Alongside the whole-value bits, each "_"-piece
  // of the value gets a position-tagged bit, so structured names share
  // features: every item of serial s07 lights the same t1:s07 bit, which is
  // what lets the policy read the serial off an unfamiliar name and pick
  // the matching listing link.
  for (const auto& [slot, value] : inst.params) {
    bits.push_back(kPageBlock + kTemplateBlock +
                   detail::hashed_bit("p:" + value, kParamBlock));
    bits.push_back(kPageBlock + kTemplateBlock +
                   detail::hashed_bit("q:" + value, kParamBlock));
    bits.push_back(kPageBlock + kTemplateBlock +
                   detail::hashed_bit("r:" + value, kParamBlock));
    int pos = 0;
    std::size_t start = 0;
    while (start <= value.size()) {
      std::size_t end = value.find('_', start);
      if (end == std::string::npos) end = value.size();
      bits.push_back(kPageBlock + kTemplateBlock +
                     detail::hashed_bit("t" + std::to_string(pos) + ":" +
                                            value.substr(start, end - start),
                                        kParamBlock));
      ++pos;
      start = end + 1;
    }
  }
  {
    int base = kPageBlock + kTemplateBlock + kParamBlock;
    int k = s.history.empty() ? 0 : 1 + static_cast<int>(s.history.back().kind);
    bits.push_back(base + k);
  }
  int scratch_block = dim - kScratchBase;
  for (const auto& [key, value] : s.scratch)
    bits.push_back(kScratchBase + detail::hashed_bit("s:" + key + "=" + value,
                                                     scratch_block));

  std::sort(bits.begin(), bits.end());
  bits.erase(std::unique(bits.begin(), bits.end()), bits.end());

  FeatureVector phi;
  phi.dim = dim;
  phi.entries.reserve(bits.size());
  for (int b : bits) phi.entries.emplace_back(b, 1.0);
  return phi;
}

}  // namespace webrl

#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "mathsim/expr.hpp"
#include "mathsim/normalize.hpp"

namespace mathsim {

using Subpath = std::vector<std::string>;
using SubpathSet = std::set<Subpath>;
using SubpathBag = std::map<Subpath, std::size_t>;

namespace detail {

/// Calls f once per contiguous downward path: for every node, every path that
/// ends there and starts at one of its ancestors (or itself).
template <class F>
void forEachSubpath(const Expr& e, std::vector<std::string>& stack, F& f) {
  stack.push_back(e.label());
  for (std::size_t start = 0; start < stack.size(); ++start) f(Subpath(stack.begin() + start, stack.end()));
  for (const auto& c : e.children()) forEachSubpath(c, stack, f);
  stack.pop_back();
}

}  // namespace detail

/// All distinct contiguous downward label paths of e.
inline SubpathSet subpaths(const Expr& e) {
  SubpathSet out;
  std::vector<std::string> stack;
  auto add = [&](Subpath p) { out.insert(std::move(p)); };
  detail::forEachSubpath(e, stack, add);
  return out;
}

/// Contiguous downward label paths with their occurrence counts.
inline SubpathBag subpathMultiset(const Expr& e) {
  SubpathBag out;
  std::vector<std::string> stack;
  auto add = [&](Subpath p) { ++out[std::move(p)]; };
  detail::forEachSubpath(e, stack, add);
  return out;
}

inline double jaccard(const SubpathSet& a, const SubpathSet& b) {
  std::size_t inter = 0;
  for (const auto& p : a) inter += b.contains(p);
  std::size_t uni = a.size() + b.size() - inter;
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// Multiset Jaccard: sum of minimum counts over sum of maximum counts.
inline double jaccard(const SubpathBag& a, const SubpathBag& b) {
  std::size_t num = 0, den = 0;
  for (const auto& [p, n] : a) {
    auto it = b.find(p);
    std::size_t m = it == b.end() ? 0 : it->second;
    num += std::min(n, m);
    den += std::max(n, m);
  }
  for (const auto& [p, m] : b)
    if (!a.contains(p)) den += m;
  return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
}

struct StructuralConfig {
  NormLevel level = NormLevel::Commute;
  bool equiv = false;
  bool multiset = false;
};

/// Subpath-set similarity of the normalized trees.
inline double simSubpath(const Expr& a, const Expr& b, const StructuralConfig& cfg = {},
                         const RuleTable& rules = defaultRules()) {
  Expr na = normalize(a, cfg.level, rules, cfg.equiv);
  Expr nb = normalize(b, cfg.level, rules, cfg.equiv);
  if (cfg.multiset) return jaccard(subpathMultiset(na), subpathMultiset(nb));
  return jaccard(subpaths(na), subpaths(nb));
}

inline double simSubpath(const Expr& a, const Expr& b, NormLevel level, const RuleTable& rules = defaultRules()) {
  return simSubpath(a, b, StructuralConfig{level, false, false}, rules);
}

}  // namespace mathsim

#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "mathsim/expr.hpp"
#include "mathsim/parse.hpp"
#include "mathsim/rules.hpp"

namespace mathsim {

/// Cumulative normalization levels.
enum class NormLevel { Chars = 0, Synonyms = 1, Commute = 2, AlphaBound = 3, FullRename = 4 };

inline std::string_view normLevelName(NormLevel l) {
  switch (l) {
    case NormLevel::Chars: return "chars";
    case NormLevel::Synonyms: return "syn";
    case NormLevel::Commute: return "commute";
    case NormLevel::AlphaBound: return "alpha";
    case NormLevel::FullRename: return "rename";
  }
  return "chars";
}

inline std::optional<NormLevel> normLevelFromName(std::string_view s) {
  std::string n(s);
  std::transform(n.begin(), n.end(), n.begin(), [](unsigned char c) { return std::tolower(c); });
  if (n == "chars") return NormLevel::Chars;
  if (n == "syn" || n == "synonyms") return NormLevel::Synonyms;
  if (n == "commute") return NormLevel::Commute;
  if (n == "alpha" || n == "alphabound") return NormLevel::AlphaBound;
  if (n == "rename" || n == "fullrename") return NormLevel::FullRename;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Characters

/// Maps homoglyphs to their ASCII representative and drops whitespace. A single
/// space survives between a command name and a following letter ("\sin x").
inline std::string normalizeChars(std::string_view s, const RuleTable& rules) {
  std::string mapped;
  for (std::size_t i = 0; i < s.size();) {
    char32_t cp = detail::decodeUtf8(s, i);
    auto it = rules.homoglyphs.find(cp);
    detail::encodeUtf8(it == rules.homoglyphs.end() ? cp : it->second, mapped);
  }
  std::string out;
  bool inCommand = false;
  bool pendingSpace = false;
  for (std::size_t i = 0; i < mapped.size(); ++i) {
    char c = mapped[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      pendingSpace = true;
      continue;
    }
    if (pendingSpace && inCommand && detail::isAsciiLetter(c)) out += ' ';
    pendingSpace = false;
    if (c == '\\') {
      out += c;
      if (i + 1 < mapped.size() && detail::isAsciiLetter(mapped[i + 1])) {
        inCommand = true;
      } else if (i + 1 < mapped.size()) {
        out += mapped[++i];
        inCommand = false;
      }
      continue;
    }
    if (!detail::isAsciiLetter(c)) inCommand = false;
    out += c;
  }
  return out;
}

/// parseDocument with character normalization applied to each formula.
inline Document parseDocument(std::string_view src, const RuleTable& rules, std::string id = {}) {
  return parseDocument(src, [&](std::string_view raw) { return normalizeChars(raw, rules); }, std::move(id));
}

inline Expr parseFormula(std::string_view latex, const RuleTable& rules) {
  return parseLatex(normalizeChars(latex, rules));
}

// ---------------------------------------------------------------------------
// Rewriting

namespace detail {

/// One top-down pass; every rewrite counts against the budget.
inline Expr rewritePass(const Expr& e, const std::vector<RewriteRule>& rules, std::size_t& steps,
                        std::size_t budget) {
  Expr cur = e;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& r : rules) {
      if (auto out = r.tryApply(cur)) {
        if (++steps > budget) throw RuleDivergence("rewriting did not converge within " + std::to_string(budget) + " steps");
        cur = *out;
        changed = true;
        break;
      }
    }
  }
  if (cur.childCount() == 0) return cur;
  auto kids = cur.children();
  bool any = false;
  for (auto& k : kids) {
    Expr nk = rewritePass(k, rules, steps, budget);
    if (!(nk == k)) {
      k = nk;
      any = true;
    }
  }
  return any ? cur.withChildren(std::move(kids)) : cur;
}

inline Expr rewriteFixpoint(const Expr& e, const std::vector<RewriteRule>& rules, std::size_t budget) {
  std::size_t steps = 0;
  Expr cur = e;
  while (true) {
    Expr next = rewritePass(cur, rules, steps, budget);
    if (next == cur) return cur;
    cur = next;
  }
}

}  // namespace detail

inline Expr normalizeSynonyms(const Expr& e, const RuleTable& rules) {
  return detail::rewriteFixpoint(e, rules.synonyms, rules.stepBudget);
}

inline Expr applyEquivRules(const Expr& e, const RuleTable& rules, Orientation o = Orientation::ToCanonical) {
  return detail::rewriteFixpoint(e, rules.orientedEquivRules(o), rules.stepBudget);
}

/// A place where a single rewrite applies: path from the root and the result
/// of rewriting that subtree.
struct RewriteSite {
  std::vector<std::size_t> path;
  std::string rule;
  Expr replacement;
};

inline std::vector<RewriteSite> findRewriteSites(const Expr& e, const std::vector<RewriteRule>& rules) {
  std::vector<RewriteSite> out;
  std::vector<std::size_t> path;
  std::function<void(const Expr&)> rec = [&](const Expr& n) {
    for (const auto& r : rules)
      if (auto res = r.tryApply(n)) out.push_back({path, r.name, *res});
    auto kids = n.children();
    for (std::size_t i = 0; i < kids.size(); ++i) {
      path.push_back(i);
      rec(kids[i]);
      path.pop_back();
    }
  };
  rec(e);
  return out;
}

inline Expr replaceAt(const Expr& e, std::span<const std::size_t> path, const Expr& replacement) {
  if (path.empty()) return replacement;
  auto kids = e.children();
  if (path[0] >= kids.size()) throw InvalidPath("path index out of range");
  kids[path[0]] = replaceAt(kids[path[0]], path.subspan(1), replacement);
  return e.withChildren(std::move(kids));
}

// ---------------------------------------------------------------------------
// Ordering

enum class OrderKey { Plain, BoundInsensitive, ShapeOnly };

namespace detail {

inline bool isAlphaName(const std::string& n) {
  return n.size() > 1 && n[0] == 'b' && std::all_of(n.begin() + 1, n.end(), [](char c) { return isDigit(c); });
}

/// Serialization with identifier names masked according to the key.
inline void appendMasked(const Expr& e, OrderKey key, std::string& out) {
  switch (e.kind()) {
    case Expr::Kind::Number: out += rationalToString(e.value()); return;
    case Expr::Kind::Identifier: {
      bool mask = key == OrderKey::ShapeOnly || (key == OrderKey::BoundInsensitive && isAlphaName(e.name()));
      out += mask ? "#" : e.name();
      return;
    }
    case Expr::Kind::Apply:
      out += '(';
      out += e.head();
      for (const auto& a : e.args()) {
        out += ' ';
        appendMasked(a, key, out);
      }
      out += ')';
      return;
    case Expr::Kind::Binder:
      out += '(';
      out += binderKindName(e.binderKind());
      out += " [" + std::to_string(e.boundVars().size()) + "]";
      for (const auto& c : {e.lower(), e.upper()}) {
        out += ' ';
        if (c)
          appendMasked(*c, key, out);
        else
          out += '_';
      }
      out += ' ';
      appendMasked(e.body(), key, out);
      out += ')';
      return;
  }
}

struct SortKey {
  int rank;
  std::string masked;
  std::string plain;
  auto operator<=>(const SortKey&) const = default;
};

inline SortKey sortKey(const Expr& e, OrderKey key) {
  SortKey k{e.childCount() == 0 ? 0 : 1, {}, canonicalString(e)};
  if (key != OrderKey::Plain) appendMasked(e, key, k.masked);
  return k;
}

}  // namespace detail

/// Sorts the arguments of commutative heads bottom-up and flattens nested
/// associative heads.
inline Expr orderCommutative(const Expr& e, const RuleTable& rules, OrderKey key = OrderKey::Plain) {
  return transformBottomUp(e, [&](const Expr& n) {
    if (!n.isApply() || !rules.commutativeHeads.contains(n.head())) return n;
    std::vector<Expr> args;
    for (const auto& a : n.args()) {
      if (rules.associativeHeads.contains(n.head()) && a.isApply() && a.head() == n.head())
        args.insert(args.end(), a.args().begin(), a.args().end());
      else
        args.push_back(a);
    }
    std::vector<std::pair<detail::SortKey, Expr>> keyed;
    for (auto& a : args) keyed.emplace_back(detail::sortKey(a, key), a);
    std::stable_sort(keyed.begin(), keyed.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
    std::vector<Expr> sorted;
    for (auto& [k, a] : keyed) sorted.push_back(a);
    return Expr::apply(n.head(), std::move(sorted));
  });
}

// ---------------------------------------------------------------------------
// Renaming

/// Renames bound variables to b1, b2, ... in binder pre-order. Free
/// identifiers are untouched and fresh names avoid them.
inline Expr alphaCanonicalize(const Expr& e) {
  std::set<std::string> avoid = freeIdentifiers(e);
  std::size_t counter = 0;
  auto fresh = [&] {
    std::string n;
    do n = "b" + std::to_string(++counter);
    while (avoid.contains(n));
    return n;
  };
  std::function<Expr(const Expr&, const std::map<std::string, std::string>&)> rec =
      [&](const Expr& n, const std::map<std::string, std::string>& env) -> Expr {
    switch (n.kind()) {
      case Expr::Kind::Number: return n;
      case Expr::Kind::Identifier: {
        auto it = env.find(n.name());
        return it == env.end() ? n : Expr::ident(it->second, n.tag());
      }
      case Expr::Kind::Apply: {
        std::vector<Expr> args;
        for (const auto& a : n.args()) args.push_back(rec(a, env));
        return Expr::apply(n.head(), std::move(args));
      }
      case Expr::Kind::Binder: {
        std::vector<std::string> vars;
        auto inner = env;
        for (const auto& v : n.boundVars()) {
          vars.push_back(fresh());
          inner[v] = vars.back();
        }
        std::optional<Expr> lo, hi;
        if (n.lower()) lo = rec(*n.lower(), env);
        if (n.upper()) hi = rec(*n.upper(), env);
        return Expr::binder(n.binderKind(), std::move(vars), lo, hi, rec(n.body(), inner));
      }
    }
    return n;
  };
  return rec(e, {});
}

/// Renames every identifier, bound or free, to v1, v2, ... by first pre-order
/// occurrence.
inline Expr fullRenameCanonicalize(const Expr& e) {
  std::map<std::string, std::string> names;
  auto nameFor = [&](const std::string& n) {
    auto [it, inserted] = names.emplace(n, "");
    if (inserted) it->second = "v" + std::to_string(names.size());
    return it->second;
  };
  std::function<Expr(const Expr&)> rec = [&](const Expr& n) -> Expr {
    switch (n.kind()) {
      case Expr::Kind::Number: return n;
      case Expr::Kind::Identifier: return Expr::ident(nameFor(n.name()), n.tag());
      case Expr::Kind::Apply: {
        std::vector<Expr> args;
        for (const auto& a : n.args()) args.push_back(rec(a));
        return Expr::apply(n.head(), std::move(args));
      }
      case Expr::Kind::Binder: {
        std::vector<std::string> vars;
        for (const auto& v : n.boundVars()) vars.push_back(nameFor(v));
        std::optional<Expr> lo, hi;
        if (n.lower()) lo = rec(*n.lower());
        if (n.upper()) hi = rec(*n.upper());
        return Expr::binder(n.binderKind(), std::move(vars), lo, hi, rec(n.body()));
      }
    }
    return n;
  };
  return rec(e);
}

// ---------------------------------------------------------------------------
// Pipeline

namespace detail {

constexpr int kMaxRounds = 32;

template <typename Step>
Expr iterateToFixpoint(Expr e, Step step) {
  for (int i = 0; i < kMaxRounds; ++i) {
    Expr next = step(e);
    if (next == e) return e;
    e = std::move(next);
  }
  return e;
}

constexpr std::size_t kMaxTieVariants = 4096;

/// Number of trees obtained by permuting arguments of commutative heads
/// within groups of equal masked key, saturating at the cap.
inline std::size_t tieVariantCount(const Expr& e, const RuleTable& rules, OrderKey key) {
  auto mul = [](std::size_t a, std::size_t b) {
    return (a == 0 || b <= kMaxTieVariants / a) ? a * b : kMaxTieVariants + 1;
  };
  std::size_t n = 1;
  for (const auto& c : e.children()) n = mul(n, tieVariantCount(c, rules, key));
  if (e.isApply() && rules.commutativeHeads.contains(e.head())) {
    std::map<std::string, std::size_t> groups;
    for (const auto& a : e.args()) {
      std::string m;
      appendMasked(a, key, m);
      ++groups[m];
    }
    for (const auto& [m, size] : groups)
      for (std::size_t k = 2; k <= size; ++k) n = mul(n, k);
  }
  return n;
}

/// All tie permutations of e. e must be sorted by the masked key.
inline std::vector<Expr> tieVariants(const Expr& e, const RuleTable& rules, OrderKey key) {
  if (e.childCount() == 0) return {e};
  auto kids = e.children();
  std::vector<std::vector<Expr>> kidVariants;
  for (const auto& k : kids) kidVariants.push_back(tieVariants(k, rules, key));

  std::vector<std::vector<std::size_t>> orders{{}};
  for (std::size_t i = 0; i < kids.size(); ++i) orders.front().push_back(i);
  if (e.isApply() && rules.commutativeHeads.contains(e.head())) {
    std::vector<std::string> masks;
    for (const auto& a : kids) {
      std::string m;
      appendMasked(a, key, m);
      masks.push_back(m);
    }
    std::size_t start = 0;
    while (start < kids.size()) {
      std::size_t end = start + 1;
      while (end < kids.size() && masks[end] == masks[start]) ++end;
      if (end - start > 1) {
        std::vector<std::vector<std::size_t>> next;
        for (const auto& o : orders) {
          std::vector<std::size_t> cur = o;
          do next.push_back(cur);
          while (std::next_permutation(cur.begin() + start, cur.begin() + end));
        }
        orders = std::move(next);
      }
      start = end;
    }
  }

  std::vector<Expr> out;
  for (const auto& order : orders) {
    std::vector<std::vector<Expr>> partial{{}};
    for (std::size_t slot = 0; slot < order.size(); ++slot) {
      std::vector<std::vector<Expr>> grown;
      for (const auto& p : partial)
        for (const auto& v : kidVariants[order[slot]]) {
          grown.push_back(p);
          grown.back().push_back(v);
        }
      partial = std::move(grown);
    }
    for (auto& p : partial) out.push_back(e.withChildren(std::move(p)));
  }
  return out;
}

/// Applies rename to every tie permutation of the key-sorted tree and keeps
/// the result with the smallest canonical string. Trees with too many ties
/// fall back to iterating rename and sort.
template <typename Rename>
Expr canonicalOverTies(const Expr& in, const RuleTable& rules, OrderKey key, Rename rename) {
  Expr sorted = orderCommutative(rename(in), rules, key);
  if (tieVariantCount(sorted, rules, key) > kMaxTieVariants)
    return iterateToFixpoint(sorted, [&](const Expr& x) { return orderCommutative(rename(x), rules, key); });
  std::optional<Expr> best;
  std::string bestKey;
  for (const auto& v : tieVariants(sorted, rules, key)) {
    Expr r = rename(v);
    std::string k = canonicalString(r);
    if (!best || k < bestKey) {
      best = r;
      bestKey = std::move(k);
    }
  }
  return *best;
}

inline Expr normalizeStep(const Expr& in, NormLevel level, const RuleTable& rules, bool equiv) {
  Expr e = in;
  if (level >= NormLevel::Synonyms) e = normalizeSynonyms(e, rules);
  if (equiv) e = applyEquivRules(e, rules, Orientation::ToCanonical);
  if (level >= NormLevel::Commute) e = orderCommutative(e, rules, OrderKey::Plain);
  if (level == NormLevel::AlphaBound)
    e = canonicalOverTies(e, rules, OrderKey::BoundInsensitive, [](const Expr& x) { return alphaCanonicalize(x); });
  if (level >= NormLevel::FullRename)
    e = canonicalOverTies(e, rules, OrderKey::ShapeOnly, [](const Expr& x) { return fullRenameCanonicalize(x); });
  return e;
}

}  // namespace detail

/// Applies the normalization levels cumulatively: synonyms, optional
/// equivalence folding, commutative ordering, then bound or full renaming.
inline Expr normalize(const Expr& e, NormLevel level, const RuleTable& rules, bool equiv = false) {
  if (level == NormLevel::Chars && !equiv) return e;
  return detail::iterateToFixpoint(e, [&](const Expr& x) { return detail::normalizeStep(x, level, rules, equiv); });
}

/// Renaming-only equivalence checks.
inline bool alphaEquivalent(const Expr& a, const Expr& b) { return alphaCanonicalize(a) == alphaCanonicalize(b); }
inline bool renameEquivalent(const Expr& a, const Expr& b) {
  return fullRenameCanonicalize(a) == fullRenameCanonicalize(b);
}

}  // namespace mathsim

#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "mathsim/expr.hpp"
#include "mathsim/parse.hpp"

#ifndef MATHSIM_DATA_DIR
#define MATHSIM_DATA_DIR "data"
#endif

namespace mathsim {

/// Raised when rewriting does not reach a fixpoint within the step budget.
class RuleDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RuleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Bindings = std::map<std::string, Expr>;

inline bool isWildcard(const Expr& e) { return e.isIdentifier() && !e.name().empty() && e.name()[0] == '?'; }

/// Matches pattern against e. Wildcards (?name) bind any subtree; repeated
/// wildcards must bind equal subtrees.
inline bool matchPattern(const Expr& pattern, const Expr& e, Bindings& b) {
  if (isWildcard(pattern)) {
    auto [it, inserted] = b.emplace(pattern.name(), e);
    return inserted || it->second == e;
  }
  if (pattern.kind() != e.kind()) return false;
  switch (pattern.kind()) {
    case Expr::Kind::Number: return pattern.value() == e.value();
    case Expr::Kind::Identifier: return pattern.name() == e.name() && (!pattern.tag() || pattern.tag() == e.tag());
    case Expr::Kind::Apply: {
      if (pattern.head() != e.head() || pattern.args().size() != e.args().size()) return false;
      for (std::size_t i = 0; i < pattern.args().size(); ++i)
        if (!matchPattern(pattern.args()[i], e.args()[i], b)) return false;
      return true;
    }
    case Expr::Kind::Binder: {
      if (pattern.binderKind() != e.binderKind() || pattern.boundVars() != e.boundVars()) return false;
      if (pattern.lower().has_value() != e.lower().has_value()) return false;
      if (pattern.upper().has_value() != e.upper().has_value()) return false;
      if (pattern.lower() && !matchPattern(*pattern.lower(), *e.lower(), b)) return false;
      if (pattern.upper() && !matchPattern(*pattern.upper(), *e.upper(), b)) return false;
      return matchPattern(pattern.body(), e.body(), b);
    }
  }
  return false;
}

inline Expr substitute(const Expr& templ, const Bindings& b) {
  if (isWildcard(templ)) {
    auto it = b.find(templ.name());
    if (it == b.end()) throw RuleError("unbound wildcard " + templ.name());
    return it->second;
  }
  if (templ.childCount() == 0) return templ;
  auto kids = templ.children();
  for (auto& k : kids) k = substitute(k, b);
  return templ.withChildren(std::move(kids));
}

struct RewriteRule {
  std::string name;
  Expr pattern;
  Expr replacement;

  std::optional<Expr> tryApply(const Expr& e) const {
    Bindings b;
    if (!matchPattern(pattern, e, b)) return std::nullopt;
    return substitute(replacement, b);
  }
};

/// A named bidirectional equivalence: one canonical (folded) form and one or
/// more expanded alternatives.
struct EquivRule {
  std::string name;
  Expr canonical;
  std::vector<Expr> alternatives;
};

enum class Orientation { Forward, ToCanonical };

namespace detail {

inline std::set<std::string> wildcardNames(const Expr& e) {
  std::set<std::string> out;
  visitPreorder(e, [&](const Expr& n, std::size_t) {
    if (isWildcard(n)) out.insert(n.name());
  });
  return out;
}

/// Wildcards in a right-hand side become opaque constants that only a
/// pattern wildcard can match.
inline Expr freezeWildcards(const Expr& e) {
  return transformBottomUp(e, [](const Expr& n) {
    return isWildcard(n) ? Expr::ident("#frozen" + n.name()) : n;
  });
}

inline bool matchesSomewhere(const Expr& pattern, const Expr& e) {
  bool found = false;
  visitPreorder(e, [&](const Expr& n, std::size_t) {
    Bindings b;
    if (!found && !isWildcard(pattern) && matchPattern(pattern, n, b)) found = true;
  });
  return found;
}

/// Rejects rule sets whose rules can feed each other in a cycle.
inline void checkAcyclic(const std::vector<RewriteRule>& rules, const std::string& what) {
  std::size_t n = rules.size();
  std::vector<std::vector<std::size_t>> edges(n);
  for (std::size_t i = 0; i < n; ++i) {
    Expr rhs = freezeWildcards(rules[i].replacement);
    for (std::size_t j = 0; j < n; ++j)
      if (matchesSomewhere(rules[j].pattern, rhs)) edges[i].push_back(j);
  }
  std::vector<int> state(n, 0);
  std::function<void(std::size_t)> dfs = [&](std::size_t v) {
    state[v] = 1;
    for (std::size_t w : edges[v]) {
      if (state[w] == 1) throw RuleError(what + " rules are cyclic at '" + rules[w].name + "'");
      if (state[w] == 0) dfs(w);
    }
    state[v] = 2;
  };
  for (std::size_t v = 0; v < n; ++v)
    if (state[v] == 0) dfs(v);
}

inline void checkWildcards(const RewriteRule& r) {
  auto lhs = wildcardNames(r.pattern);
  for (const auto& w : wildcardNames(r.replacement))
    if (!lhs.contains(w)) throw RuleError("rule '" + r.name + "' introduces unbound wildcard " + w);
  if (isWildcard(r.pattern)) throw RuleError("rule '" + r.name + "' has a bare wildcard pattern");
}

inline char32_t parseCodepoint(const std::string& hex) {
  std::string h = hex;
  if (h.rfind("U+", 0) == 0 || h.rfind("u+", 0) == 0) h = h.substr(2);
  std::size_t used = 0;
  unsigned long v = std::stoul(h, &used, 16);
  if (used != h.size() || v > 0x10FFFF) throw RuleError("bad codepoint " + hex);
  return static_cast<char32_t>(v);
}

}  // namespace detail

struct RuleTable {
  std::map<char32_t, char32_t> homoglyphs;
  std::vector<RewriteRule> synonyms;
  std::set<std::string> commutativeHeads;
  std::set<std::string> associativeHeads;
  std::vector<EquivRule> equivRules;
  std::size_t stepBudget = 1000;

  /// Equivalence rules as one-way rewrites in the given orientation.
  std::vector<RewriteRule> orientedEquivRules(Orientation o) const {
    std::vector<RewriteRule> out;
    for (const auto& r : equivRules) {
      if (o == Orientation::Forward) {
        out.push_back({r.name, r.canonical, r.alternatives.front()});
      } else {
        for (const auto& alt : r.alternatives) out.push_back({r.name, alt, r.canonical});
      }
    }
    return out;
  }

  /// Reserved identifier names that rules match literally (e.g. C in C(n,k)).
  std::set<std::string> literalNames() const {
    std::set<std::string> out;
    auto collect = [&](const Expr& e) {
      visitPreorder(e, [&](const Expr& n, std::size_t) {
        if (n.isIdentifier() && !isWildcard(n)) out.insert(n.name());
        if (n.isApply()) out.insert(n.head());
      });
    };
    for (const auto& r : synonyms) collect(r.pattern);
    return out;
  }

  void validate() const {
    for (const auto& r : synonyms) detail::checkWildcards(r);
    detail::checkAcyclic(synonyms, "synonym");
    for (const auto& r : equivRules)
      if (r.alternatives.empty()) throw RuleError("equivalence '" + r.name + "' has no alternatives");
    for (auto o : {Orientation::Forward, Orientation::ToCanonical}) {
      auto rules = orientedEquivRules(o);
      for (const auto& r : rules) detail::checkWildcards(r);
      detail::checkAcyclic(rules, o == Orientation::Forward ? "forward equivalence" : "canonical equivalence");
    }
  }

  static RuleTable fromJson(const nlohmann::json& j) {
    RuleTable t;
    try {
      for (const auto& pair : j.value("homoglyphs", nlohmann::json::array()))
        t.homoglyphs[detail::parseCodepoint(pair.at(0).get<std::string>())] =
            detail::parseCodepoint(pair.at(1).get<std::string>());
      for (const auto& r : j.value("synonyms", nlohmann::json::array()))
        t.synonyms.push_back({r.value("name", std::string("synonym")), parseCanonical(r.at("pattern").get<std::string>()),
                              parseCanonical(r.at("replacement").get<std::string>())});
      for (const auto& h : j.value("commutative", nlohmann::json::array())) t.commutativeHeads.insert(h.get<std::string>());
      for (const auto& h : j.value("associative", nlohmann::json::array())) t.associativeHeads.insert(h.get<std::string>());
      for (const auto& r : j.value("equivalences", nlohmann::json::array())) {
        EquivRule e{r.at("name").get<std::string>(), parseCanonical(r.at("canonical").get<std::string>()), {}};
        for (const auto& alt : r.at("alternatives")) e.alternatives.push_back(parseCanonical(alt.get<std::string>()));
        t.equivRules.push_back(std::move(e));
      }
      t.stepBudget = j.value("step_budget", std::size_t{1000});
    } catch (const nlohmann::json::exception& e) {
      throw RuleError(std::string("malformed rule table: ") + e.what());
    } catch (const ParseError& e) {
      throw RuleError(std::string("malformed rule pattern: ") + e.what());
    }
    t.validate();
    return t;
  }

  static RuleTable load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw RuleError("cannot open rule table " + path.string());
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw RuleError(path.string() + ": " + e.what());
    }
    return fromJson(j);
  }
};

inline std::filesystem::path dataDir() {
  if (const char* d = std::getenv("MATHSIM_DATA_DIR")) return d;
  return MATHSIM_DATA_DIR;
}

/// The shipped rule table; MATHSIM_RULES overrides its location.
inline const RuleTable& defaultRules() {
  static const RuleTable table = [] {
    if (const char* p = std::getenv("MATHSIM_RULES")) return RuleTable::load(p);
    return RuleTable::load(dataDir() / "rules.json");
  }();
  return table;
}

}  // namespace mathsim

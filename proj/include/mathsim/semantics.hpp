#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <regex>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "mathsim/expr.hpp"
#include "mathsim/parse.hpp"

namespace mathsim {

struct Definition {
  std::string meaning;
  /// Index of the text fragment the definition was read from.
  std::size_t fragment = 0;
  std::string pattern;
  friend bool operator==(const Definition&, const Definition&) = default;
};

struct DefinitionMap {
  std::map<std::string, Definition> entries;
  /// Later definitions that disagree with the first one for the same name.
  std::map<std::string, std::vector<Definition>> ambiguous;

  bool empty() const { return entries.empty(); }
};

namespace detail {

/// Lowercases, collapses whitespace and cuts a noun phrase at the first
/// clause connective.
inline std::string cleanMeaning(const std::string& raw) {
  std::string out;
  bool space = false;
  for (char ch : raw) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      space = !out.empty();
      continue;
    }
    if (space) out += ' ';
    space = false;
    out += static_cast<char>(std::tolower(c));
  }
  static const std::vector<std::string> stops{" and ", " where ", " with ", " which ", " while ", " if ", " for "};
  std::size_t cut = out.size();
  for (const auto& s : stops) cut = std::min(cut, out.find(s));
  out.resize(cut);
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

struct DefinitionPattern {
  std::string name;
  std::regex re;
};

/// Patterns in priority order. Group 1 is the identifier, group 2 the meaning.
inline const std::vector<DefinitionPattern>& definitionPatterns() {
  static const std::string id = R"((\\[A-Za-z]+|[A-Za-z])(?![A-Za-z]))";
  static const std::string x = R"((?:^|[^A-Za-z\\]))" + id;
  static const std::string y = R"(([^.,;:!?\n\x1f$]+))";
  static const std::string art = R"((?:(?:the|an|a)\s+)?)";
  static const std::vector<DefinitionPattern> p{
      {"where X is Y", std::regex(R"((?:^|[^A-Za-z])[Ww]here\s+)" + id + R"(\s+(?:is|denotes)\s+)" + art + y)},
      {"let X be Y", std::regex(R"((?:^|[^A-Za-z])[Ll]et\s+)" + id + R"(\s+be\s+)" + art + y)},
      {"X denotes Y", std::regex(x + R"(\s+denotes\s+)" + art + y)},
      {"X is the Y", std::regex(x + R"(\s+is\s+the\s+)" + y)},
      {"X is Y", std::regex(x + R"(\s+is\s+(?:an?\s+)?)" + y)},
  };
  return p;
}

struct RawDefinition {
  std::size_t at;
  std::string name;
  std::string meaning;
  std::size_t fragment;
  std::string pattern;
};

/// Scans the document text with lone-identifier inline formulas spliced in,
/// so "where $E$ is energy" reads like "where E is energy".
inline std::vector<RawDefinition> scanDefinitions(const Document& d) {
  std::string text;
  std::vector<std::size_t> owner;
  for (std::size_t i = 0; i < d.fragments.size(); ++i) {
    const auto& f = d.fragments[i];
    std::string piece;
    if (f.isText()) {
      piece = f.text().content;
    } else if (f.formula().expr.isIdentifier()) {
      const auto& n = f.formula().expr.name();
      piece = greekNames().contains(n) ? "\\" + n : n;
      if (piece.size() > 1 && piece[0] != '\\') piece = "\x1f";
    } else {
      piece = "\x1f";
    }
    text += piece;
    owner.insert(owner.end(), piece.size(), i);
  }
  std::map<std::size_t, RawDefinition> byPosition;
  for (const auto& pat : definitionPatterns()) {
    // Resume right after each identifier so definitions chained in one
    // sentence are all found.
    auto begin = text.cbegin();
    auto flags = std::regex_constants::match_default;
    std::smatch m;
    while (std::regex_search(begin, text.cend(), m, pat.re, flags)) {
      auto offset = static_cast<std::size_t>(begin - text.cbegin());
      auto at = offset + static_cast<std::size_t>(m.position(1));
      begin = text.cbegin() + static_cast<long>(at + static_cast<std::size_t>(m.length(1)));
      flags = std::regex_constants::match_prev_avail;
      if (byPosition.contains(at)) continue;
      std::string name = m.str(1);
      if (name[0] == '\\') {
        name = name.substr(1);
        if (!greekNames().contains(name)) continue;
      }
      std::string meaning = cleanMeaning(m.str(2));
      if (meaning.empty()) continue;
      std::size_t frag = owner[offset + static_cast<std::size_t>(m.position(2))];
      if (!d.fragments[frag].isText()) continue;
      byPosition[at] = {at, name, meaning, frag, pat.name};
    }
  }
  std::vector<RawDefinition> out;
  for (auto& [at, r] : byPosition) out.push_back(std::move(r));
  return out;
}

/// Text fragments among the window nearest on each side of a fragment.
inline std::vector<std::size_t> textWindow(const Document& d, std::size_t pos, std::size_t window) {
  std::vector<std::size_t> out;
  std::size_t seen = 0;
  for (std::size_t i = pos; i-- > 0 && seen < window;)
    if (d.fragments[i].isText()) out.push_back(i), ++seen;
  std::reverse(out.begin(), out.end());
  seen = 0;
  for (std::size_t i = pos + 1; i < d.fragments.size() && seen < window; ++i)
    if (d.fragments[i].isText()) out.push_back(i), ++seen;
  return out;
}

inline Expr tagFree(const Expr& e, const DefinitionMap& m, std::vector<std::string>& bound) {
  switch (e.kind()) {
    case Expr::Kind::Number: return e;
    case Expr::Kind::Identifier: {
      auto it = m.entries.find(e.name());
      if (it == m.entries.end() || std::find(bound.begin(), bound.end(), e.name()) != bound.end()) return e;
      return Expr::ident(e.name(), it->second.meaning);
    }
    case Expr::Kind::Apply: {
      std::vector<Expr> args;
      for (const auto& a : e.args()) args.push_back(tagFree(a, m, bound));
      return Expr::apply(e.head(), std::move(args));
    }
    case Expr::Kind::Binder: {
      std::optional<Expr> lo, hi;
      if (e.lower()) lo = tagFree(*e.lower(), m, bound);
      if (e.upper()) hi = tagFree(*e.upper(), m, bound);
      std::size_t mark = bound.size();
      bound.insert(bound.end(), e.boundVars().begin(), e.boundVars().end());
      Expr body = tagFree(e.body(), m, bound);
      bound.resize(mark);
      return Expr::binder(e.binderKind(), e.boundVars(), lo, hi, body);
    }
  }
  return e;
}

}  // namespace detail

/// Reads identifier definitions from the text near each formula. The window
/// counts text fragments on each side. Only identifiers occurring free in
/// the formula are defined; the first meaning per name wins.
inline DefinitionMap extractDefinitions(const Document& d, std::size_t window = 1) {
  DefinitionMap out;
  auto raw = detail::scanDefinitions(d);
  for (std::size_t pos : d.formulaIndices()) {
    auto names = freeIdentifiers(d.fragments[pos].formula().expr);
    for (std::size_t t : detail::textWindow(d, pos, window)) {
      for (const auto& r : raw) {
        if (r.fragment != t || !names.contains(r.name)) continue;
        Definition def{r.meaning, r.fragment, r.pattern};
        auto [it, inserted] = out.entries.emplace(r.name, def);
        if (inserted || it->second.meaning == def.meaning) continue;
        auto& amb = out.ambiguous[r.name];
        if (std::none_of(amb.begin(), amb.end(), [&](const Definition& x) { return x == def; })) amb.push_back(def);
      }
    }
  }
  return out;
}

/// Tags every free occurrence of a defined identifier with its meaning.
inline Expr annotate(const Expr& e, const DefinitionMap& m) {
  if (m.empty()) return e;
  std::vector<std::string> bound;
  return detail::tagFree(e, m, bound);
}

inline Document annotate(const Document& d, const DefinitionMap& m) {
  Document out = d;
  for (auto& f : out.fragments)
    if (f.isFormula()) std::get<FormulaFragment>(f.body).expr = annotate(f.formula().expr, m);
  return out;
}

inline std::map<std::string, std::set<std::string>> identifierTags(const Expr& e) {
  std::map<std::string, std::set<std::string>> out;
  visitPreorder(e, [&](const Expr& n, std::size_t) {
    if (n.isIdentifier() && n.tag()) out[n.name()].insert(*n.tag());
  });
  return out;
}

/// rho^k where k counts identifier names tagged on both sides with no
/// meaning in common.
inline double semanticCompatibility(const Expr& a, const Expr& b, double rho = 0.5) {
  if (!(rho >= 0 && rho <= 1)) throw std::invalid_argument("semantic penalty must be in [0,1]");
  auto ta = identifierTags(a), tb = identifierTags(b);
  int conflicts = 0;
  for (const auto& [name, tags] : ta) {
    auto it = tb.find(name);
    if (it == tb.end()) continue;
    bool shared = std::any_of(tags.begin(), tags.end(), [&](const std::string& t) { return it->second.contains(t); });
    if (!shared) ++conflicts;
  }
  return std::pow(rho, conflicts);
}

}  // namespace mathsim

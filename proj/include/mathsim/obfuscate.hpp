#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <functional>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "mathsim/expr.hpp"
#include "mathsim/normalize.hpp"
#include "mathsim/parse.hpp"
#include "mathsim/rules.hpp"

namespace mathsim {

enum class ObfKind { CopyPaste, Notational, Rename, Split, StepChange, Substitute, EquivTransform };

inline constexpr std::array<ObfKind, 7> kAllObfKinds{ObfKind::CopyPaste,  ObfKind::Notational, ObfKind::Rename,
                                                     ObfKind::Split,      ObfKind::StepChange, ObfKind::Substitute,
                                                     ObfKind::EquivTransform};

inline std::string obfKindName(ObfKind k) {
  switch (k) {
    case ObfKind::CopyPaste: return "copy-paste";
    case ObfKind::Notational: return "notational";
    case ObfKind::Rename: return "rename";
    case ObfKind::Split: return "split";
    case ObfKind::StepChange: return "step-change";
    case ObfKind::Substitute: return "substitute";
    case ObfKind::EquivTransform: return "equiv-transform";
  }
  return {};
}

inline ObfKind obfKindFromName(const std::string& s) {
  for (auto k : kAllObfKinds)
    if (obfKindName(k) == s) return k;
  throw std::invalid_argument("unknown obfuscation kind '" + s + "'");
}

/// Raised when a generator has nothing to act on in the given document.
class ObfuscationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class NoSplittableFormula : public ObfuscationError {
 public:
  NoSplittableFormula() : ObfuscationError("no derivation chain to split or change") {}
};
class NoSubstitutableTerm : public ObfuscationError {
 public:
  NoSubstitutableTerm() : ObfuscationError("no subterm of at least 3 nodes with a free identifier") {}
};
class NoApplicableRule : public ObfuscationError {
 public:
  NoApplicableRule() : ObfuscationError("no equivalence rule applies to any formula") {}
};

struct Obfuscated {
  Document doc;
  std::vector<std::string> notes;
};

struct LabeledPair {
  Document original;
  Document variant;
  ObfKind kind;
  std::uint64_t seed;
  std::vector<std::string> notes;
};

enum class StepMode { Add, Remove };

namespace detail {

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Draws are taken modulo n so sequences do not depend on the standard
/// library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : g_(seed) {}
  std::size_t below(std::size_t n) { return n == 0 ? 0 : static_cast<std::size_t>(g_() % n); }
  bool chance(int pct) { return static_cast<int>(below(100)) < pct; }
  template <class T>
  const T& pick(const std::vector<T>& v) {
    return v.at(below(v.size()));
  }
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 g_;
};

inline FormulaFragment makeFormula(const std::string& latex, const RuleTable& rules, bool display) {
  return FormulaFragment{parseFormula(latex, rules), latex, display};
}

inline void setFormula(Document& d, std::size_t i, const Expr& e, const RuleTable& rules, LatexStyle style = {}) {
  bool display = d.fragments[i].formula().display;
  d.fragments[i].body = makeFormula(toLatex(e, style), rules, display);
}

inline std::string pathString(const std::vector<std::size_t>& p) {
  std::string s = "/";
  for (std::size_t i = 0; i < p.size(); ++i) s += (i ? "/" : "") + std::to_string(p[i]);
  return s;
}

inline std::vector<Expr> chainLines(const Expr& e) {
  if (e.isApply() && e.head() == "chain") return e.args();
  return {e};
}

inline Expr fromLines(std::vector<Expr> lines) {
  if (lines.size() == 1) return lines.front();
  return Expr::apply("chain", std::move(lines));
}

inline bool isChain(const Expr& e) { return e.isApply() && e.head() == "chain" && e.args().size() >= 2; }

inline void collectPaths(const Expr& e, std::vector<std::size_t>& path, std::vector<std::vector<std::size_t>>& out) {
  out.push_back(path);
  auto kids = e.children();
  for (std::size_t i = 0; i < kids.size(); ++i) {
    path.push_back(i);
    collectPaths(kids[i], path, out);
    path.pop_back();
  }
}

inline Expr subtreeAtPath(const Expr& e, const std::vector<std::size_t>& p) {
  Expr cur = e;
  for (auto i : p) cur = cur.children().at(i);
  return cur;
}

/// Names a document uses for identifiers or applied functions.
inline std::set<std::string> usedNames(const Document& d) {
  std::set<std::string> out;
  for (const auto& f : d.formulas()) {
    auto ids = allIdentifiers(f);
    out.insert(ids.begin(), ids.end());
    visitPreorder(f, [&](const Expr& n, std::size_t) {
      if (n.isApply()) out.insert(n.head());
    });
  }
  return out;
}

inline const std::vector<std::pair<std::string, std::string>>& textSynonyms() {
  static const std::vector<std::pair<std::string, std::string>> t{
      {"show", "demonstrate"},     {"shows", "demonstrates"},  {"obtain", "get"},
      {"therefore", "hence"},      {"thus", "so"},             {"consider", "look at"},
      {"assume", "suppose"},       {"prove", "establish"},     {"yields", "gives"},
      {"equation", "formula"},     {"following", "subsequent"}, {"compute", "calculate"},
      {"clearly", "obviously"},    {"get", "obtain"},          {"now", "next"},
      {"holds", "is true"},        {"using", "applying"},      {"find", "determine"}};
  return t;
}

inline std::string rewordText(const std::string& s, std::vector<std::string>& notes) {
  std::string out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!std::isalpha(static_cast<unsigned char>(s[i]))) {
      out += s[i++];
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && std::isalpha(static_cast<unsigned char>(s[j]))) ++j;
    std::string word = s.substr(i, j - i), lower = word;
    for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    std::string repl = word;
    for (const auto& [from, to] : textSynonyms())
      if (lower == from) {
        repl = to;
        if (std::isupper(static_cast<unsigned char>(word[0])))
          repl[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(repl[0])));
        notes.push_back("reworded '" + word + "' as '" + repl + "'");
        break;
      }
    out += repl;
    i = j;
  }
  return out;
}

inline const std::vector<std::string>& fillerTemplates() {
  static const std::vector<std::string> t{" Because of this, we can conclude that ",
                                          " It follows that ",
                                          " Rearranging the terms, we obtain ",
                                          " Using the previous step, we get ",
                                          " Hence ",
                                          " This simplifies to "};
  return t;
}

/// Reverses the arguments of one commutative node, if any has distinct arguments.
inline std::optional<Expr> permuteCommutative(const Expr& e, const RuleTable& rules, Rng& rng) {
  std::vector<std::vector<std::size_t>> paths, ok;
  std::vector<std::size_t> p;
  collectPaths(e, p, paths);
  for (const auto& path : paths) {
    Expr n = subtreeAtPath(e, path);
    if (!n.isApply() || !rules.commutativeHeads.contains(n.head())) continue;
    const auto& a = n.args();
    if (std::adjacent_find(a.begin(), a.end(), std::not_equal_to<>()) != a.end()) ok.push_back(path);
  }
  if (ok.empty()) return std::nullopt;
  const auto& path = rng.pick(ok);
  Expr n = subtreeAtPath(e, path);
  std::vector<Expr> args(n.args().rbegin(), n.args().rend());
  return replaceAt(e, path, Expr::apply(n.head(), std::move(args)));
}

}  // namespace detail

/// Identical formulas; text reworded through a fixed synonym table.
inline Obfuscated obfCopyPaste(const Document& d) {
  Obfuscated out{d, {}};
  for (auto& f : out.doc.fragments)
    if (f.isText()) f.body = TextFragment{detail::rewordText(f.text().content, out.notes)};
  return out;
}

/// Rewrites notation without changing meaning: inverse synonyms, expanded
/// fractions, a different multiplication sign and homoglyph characters.
inline Obfuscated obfNotational(const Document& d, const RuleTable& rules, std::uint64_t seed) {
  detail::Rng rng(seed);
  Obfuscated out{d, {}};
  auto fracRules = rules.orientedEquivRules(Orientation::Forward);
  std::erase_if(fracRules, [](const RewriteRule& r) { return r.name.rfind("frac-distribute", 0) != 0; });
  std::map<char32_t, std::vector<char32_t>> lookalikes;
  for (const auto& [from, to] : rules.homoglyphs)
    if (to < 0x80 && to != U' ') lookalikes[to].push_back(from);

  bool any = false;
  for (std::size_t i = 0; i < out.doc.fragments.size(); ++i) {
    if (!out.doc.fragments[i].isFormula()) continue;
    any = true;
    std::string where = "fragment " + std::to_string(i) + ": ";
    Expr e = transformBottomUp(out.doc.fragments[i].formula().expr, [&](const Expr& n) {
      std::vector<const RewriteRule*> inverse;
      for (const auto& r : rules.synonyms) {
        Bindings b;
        if (matchPattern(r.replacement, n, b)) inverse.push_back(&r);
      }
      if (inverse.empty() || !rng.chance(70)) return n;
      const RewriteRule* r = inverse[rng.below(inverse.size())];
      Bindings b;
      matchPattern(r->replacement, n, b);
      out.notes.push_back(where + "wrote " + canonicalString(n) + " via " + r->name);
      return substitute(r->pattern, b);
    });
    auto sites = findRewriteSites(e, fracRules);
    if (!sites.empty() && rng.chance(80)) {
      const auto& s = rng.pick(sites);
      e = replaceAt(e, s.path, s.replacement);
      out.notes.push_back(where + s.rule + " at " + detail::pathString(s.path));
    }
    auto style = static_cast<TimesStyle>(rng.below(4));
    static const char* styleNames[] = {"juxtaposition", "\\cdot", "*", "\\times"};
    out.notes.push_back(where + "multiplication written as " + styleNames[static_cast<int>(style)]);
    std::string latex = toLatex(e, LatexStyle{style});

    std::u32string cps;
    for (std::size_t k = 0; k < latex.size();) cps.push_back(detail::decodeUtf8(latex, k));
    std::vector<std::size_t> candidates;
    for (std::size_t k = 0; k < cps.size(); ++k)
      if (lookalikes.contains(cps[k])) candidates.push_back(k);
    if (!candidates.empty()) {
      std::size_t forced = rng.pick(candidates);
      for (auto k : candidates) {
        if (k != forced && !rng.chance(15)) continue;
        const auto& options = lookalikes.at(cps[k]);
        char32_t from = cps[k], to = options[rng.below(options.size())];
        cps[k] = to;
        char buf[16];
        std::snprintf(buf, sizeof buf, "U+%04X", static_cast<unsigned>(to));
        std::string orig;
        detail::encodeUtf8(from, orig);
        out.notes.push_back(where + "homoglyph " + buf + " for '" + orig + "'");
      }
    }
    std::string raw;
    for (char32_t c : cps) detail::encodeUtf8(c, raw);
    out.doc.fragments[i].body = detail::makeFormula(raw, rules, out.doc.fragments[i].formula().display);
  }
  if (!any) throw ObfuscationError("no formula to rewrite");
  return out;
}

/// Renames every identifier across the document to fresh names, injectively.
inline Obfuscated obfRename(const Document& d, const RuleTable& rules, std::uint64_t seed) {
  detail::Rng rng(seed);
  Obfuscated out{d, {}};
  auto used = detail::usedNames(d);
  auto literal = rules.literalNames();
  std::vector<std::string> names;
  for (const auto& f : d.formulas())
    for (const auto& n : allIdentifiers(f))
      if (!literal.contains(n) && std::find(names.begin(), names.end(), n) == names.end()) names.push_back(n);
  std::sort(names.begin(), names.end());
  if (names.empty()) {
    out.notes.push_back("no identifiers; document unchanged");
    return out;
  }
  static const std::set<std::string> reserved{"d", "e", "i", "pi"};
  std::vector<std::string> pool;
  auto offer = [&](const std::string& n) {
    if (!used.contains(n) && !literal.contains(n) && !reserved.contains(n)) pool.push_back(n);
  };
  for (char c = 'a'; c <= 'z'; ++c) offer(std::string(1, c));
  for (char c = 'A'; c <= 'Z'; ++c) offer(std::string(1, c));
  for (const auto& g : greekNames())
    if (!std::isupper(static_cast<unsigned char>(g[0]))) offer(g);
  for (char a = 'a'; pool.size() < names.size() && a <= 'z'; ++a)
    for (char b = 'a'; b <= 'z'; ++b) offer(std::string{a, b});
  rng.shuffle(pool);
  std::map<std::string, std::string> sigma;
  for (std::size_t k = 0; k < names.size(); ++k) {
    sigma[names[k]] = pool.at(k);
    out.notes.push_back("renamed " + names[k] + " to " + pool[k]);
  }
  auto ren = [&](const std::string& n) {
    auto it = sigma.find(n);
    return it == sigma.end() ? n : it->second;
  };
  std::function<Expr(const Expr&)> apply = [&](const Expr& e) -> Expr {
    switch (e.kind()) {
      case Expr::Kind::Number: return e;
      case Expr::Kind::Identifier: return Expr::ident(ren(e.name()), e.tag());
      case Expr::Kind::Apply: {
        std::vector<Expr> args;
        for (const auto& a : e.args()) args.push_back(apply(a));
        return Expr::apply(e.head(), std::move(args));
      }
      case Expr::Kind::Binder: {
        std::vector<std::string> vars;
        for (const auto& v : e.boundVars()) vars.push_back(ren(v));
        std::optional<Expr> lo, hi;
        if (e.lower()) lo = apply(*e.lower());
        if (e.upper()) hi = apply(*e.upper());
        return Expr::binder(e.binderKind(), vars, lo, hi, apply(e.body()));
      }
    }
    return e;
  };
  for (std::size_t i = 0; i < out.doc.fragments.size(); ++i)
    if (out.doc.fragments[i].isFormula()) detail::setFormula(out.doc, i, apply(out.doc.fragments[i].formula().expr), rules);
  return out;
}

/// Breaks every multi-line derivation into up to three formulas joined by
/// filler sentences.
inline Obfuscated obfSplit(const Document& d, const RuleTable& rules, std::uint64_t seed) {
  detail::Rng rng(seed);
  Obfuscated out{Document{d.id, {}}, {}};
  bool any = false;
  for (std::size_t i = 0; i < d.fragments.size(); ++i) {
    const auto& f = d.fragments[i];
    if (!f.isFormula() || !detail::isChain(f.formula().expr)) {
      out.doc.fragments.push_back(f);
      continue;
    }
    any = true;
    auto lines = f.formula().expr.args();
    std::size_t groups = std::min<std::size_t>(3, lines.size());
    std::vector<std::size_t> cuts;
    for (std::size_t c = 1; c < lines.size(); ++c) cuts.push_back(c);
    rng.shuffle(cuts);
    cuts.resize(groups - 1);
    std::sort(cuts.begin(), cuts.end());
    cuts.push_back(lines.size());
    std::size_t start = 0;
    for (std::size_t g = 0; g < cuts.size(); ++g) {
      if (g > 0) {
        std::string filler = rng.pick(detail::fillerTemplates());
        out.doc.fragments.push_back(Fragment{TextFragment{filler}, 0});
        out.notes.push_back("fragment " + std::to_string(i) + ": inserted filler '" + filler + "'");
      }
      std::vector<Expr> part(lines.begin() + static_cast<long>(start), lines.begin() + static_cast<long>(cuts[g]));
      out.doc.fragments.push_back(
          Fragment{detail::makeFormula(toLatex(detail::fromLines(part)), rules, f.formula().display), 0});
      out.notes.push_back("fragment " + std::to_string(i) + ": part " + std::to_string(g + 1) + " has lines " +
                          std::to_string(start + 1) + ".." + std::to_string(cuts[g]));
      start = cuts[g];
    }
  }
  if (!any) throw NoSplittableFormula();
  // Merge text runs so the result reads back to the same fragments.
  std::vector<Fragment> merged;
  for (auto& f : out.doc.fragments) {
    if (f.isText() && !merged.empty() && merged.back().isText())
      merged.back().body = TextFragment{merged.back().text().content + f.text().content};
    else
      merged.push_back(std::move(f));
  }
  out.doc.fragments = std::move(merged);
  out.doc.renumber();
  return out;
}

/// Removes an interior line of a derivation, or inserts a restated copy of a
/// line with commutative arguments reordered.
inline Obfuscated obfStepChange(const Document& d, StepMode mode, const RuleTable& rules, std::uint64_t seed) {
  detail::Rng rng(seed);
  Obfuscated out{d, {}};
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < d.fragments.size(); ++i) {
    if (!d.fragments[i].isFormula()) continue;
    const Expr& e = d.fragments[i].formula().expr;
    bool ok = mode == StepMode::Remove ? detail::isChain(e) && e.args().size() >= 3
                                       : detail::isChain(e) || (e.isRelation() && e.args().size() == 2);
    if (ok) eligible.push_back(i);
  }
  if (eligible.empty()) throw NoSplittableFormula();
  std::size_t i = rng.pick(eligible);
  auto lines = detail::chainLines(d.fragments[i].formula().expr);
  std::string where = "fragment " + std::to_string(i) + ": ";
  if (mode == StepMode::Remove) {
    std::size_t k = 1 + rng.below(lines.size() - 2);
    out.notes.push_back(where + "removed line " + std::to_string(k + 1) + " " + canonicalString(lines[k]));
    lines.erase(lines.begin() + static_cast<long>(k));
  } else {
    // Interior lines when there are any; the restated copy never becomes the
    // last line of a multi-line chain.
    std::size_t k = lines.size() >= 3 ? 1 + rng.below(lines.size() - 2) : 0;
    Expr added = detail::permuteCommutative(lines[k], rules, rng).value_or(lines[k]);
    out.notes.push_back(where + "restated line " + std::to_string(k + 1) + " as " + canonicalString(added));
    lines.insert(lines.begin() + static_cast<long>(k) + 1, added);
  }
  detail::setFormula(out.doc, i, detail::fromLines(std::move(lines)), rules);
  return out;
}

/// Replaces a subterm by a fresh function of its free identifiers and defines
/// that function in the following text.
inline Obfuscated obfSubstitute(const Document& d, const RuleTable& rules, std::uint64_t seed) {
  detail::Rng rng(seed);
  Obfuscated out{d, {}};
  struct Site {
    std::size_t fragment;
    std::vector<std::size_t> path;
  };
  std::vector<Site> sites;
  for (std::size_t i = 0; i < d.fragments.size(); ++i) {
    if (!d.fragments[i].isFormula()) continue;
    const Expr& e = d.fragments[i].formula().expr;
    std::vector<std::vector<std::size_t>> paths;
    std::vector<std::size_t> p;
    detail::collectPaths(e, p, paths);
    for (const auto& path : paths) {
      if (path.empty()) continue;
      Expr s = detail::subtreeAtPath(e, path);
      if (nodeCount(s) < 3 || s.isRelation() || freeIdentifiers(s).empty()) continue;
      sites.push_back({i, path});
    }
  }
  if (sites.empty()) throw NoSubstitutableTerm();
  const Site& site = rng.pick(sites);
  const Expr& e = d.fragments[site.fragment].formula().expr;
  Expr sub = detail::subtreeAtPath(e, site.path);
  auto used = detail::usedNames(d);
  std::string fname;
  for (const char* cand : {"g", "h", "G", "H", "F", "q", "w", "u"})
    if (!used.contains(cand) && !rules.literalNames().contains(cand)) {
      fname = cand;
      break;
    }
  if (fname.empty()) throw NoSubstitutableTerm();
  std::vector<Expr> args;
  for (const auto& v : freeIdentifiers(sub)) args.push_back(Expr::ident(v));
  Expr call = Expr::apply(fname, std::move(args));
  detail::setFormula(out.doc, site.fragment, replaceAt(e, site.path, call), rules);
  std::string definition = " where " + toLatex(call) + " = " + toLatex(sub) + ".";
  out.notes.push_back("fragment " + std::to_string(site.fragment) + ": replaced " + canonicalString(sub) + " at " +
                      detail::pathString(site.path) + " by " + canonicalString(call));
  std::size_t next = site.fragment + 1;
  if (next < out.doc.fragments.size() && out.doc.fragments[next].isText())
    out.doc.fragments[next].body = TextFragment{definition + out.doc.fragments[next].text().content};
  else
    out.doc.fragments.insert(out.doc.fragments.begin() + static_cast<long>(next), Fragment{TextFragment{definition}, 0});
  out.doc.renumber();
  return out;
}

/// Applies one to three equivalence rules in the expanding direction. steps
/// fixes the number of applications; 0 draws it from the seed.
inline Obfuscated obfEquivTransform(const Document& d, const RuleTable& rules, std::uint64_t seed,
                                    std::size_t steps = 0) {
  detail::Rng rng(seed);
  Obfuscated out{d, {}};
  auto forward = rules.orientedEquivRules(Orientation::Forward);
  if (steps == 0) steps = 1 + rng.below(3);
  std::map<std::size_t, Expr> changed;
  for (std::size_t step = 0; step < steps; ++step) {
    std::vector<std::pair<std::size_t, RewriteSite>> sites;
    for (std::size_t i = 0; i < out.doc.fragments.size(); ++i) {
      if (!out.doc.fragments[i].isFormula()) continue;
      auto it = changed.find(i);
      const Expr& e = it == changed.end() ? out.doc.fragments[i].formula().expr : it->second;
      for (auto& s : findRewriteSites(e, forward)) sites.emplace_back(i, std::move(s));
    }
    if (sites.empty()) break;
    const auto& [i, s] = sites[rng.below(sites.size())];
    auto it = changed.find(i);
    Expr base = it == changed.end() ? out.doc.fragments[i].formula().expr : it->second;
    changed.insert_or_assign(i, replaceAt(base, s.path, s.replacement));
    out.notes.push_back("fragment " + std::to_string(i) + ": " + s.rule + " at " + detail::pathString(s.path));
  }
  if (changed.empty()) throw NoApplicableRule();
  for (const auto& [i, e] : changed) detail::setFormula(out.doc, i, e, rules);
  return out;
}

/// Runs the generator for kind. StepChange picks its mode from the seed.
inline LabeledPair obfuscate(const Document& d, ObfKind kind, const RuleTable& rules, std::uint64_t seed) {
  Obfuscated o;
  switch (kind) {
    case ObfKind::CopyPaste: o = obfCopyPaste(d); break;
    case ObfKind::Notational: o = obfNotational(d, rules, seed); break;
    case ObfKind::Rename: o = obfRename(d, rules, seed); break;
    case ObfKind::Split: o = obfSplit(d, rules, seed); break;
    case ObfKind::StepChange: {
      bool canRemove = false;
      for (const auto& f : d.formulas()) canRemove |= detail::isChain(f) && f.args().size() >= 3;
      StepMode mode = canRemove && detail::fnv1a(std::to_string(seed)) % 2 == 0 ? StepMode::Remove : StepMode::Add;
      o = obfStepChange(d, mode, rules, seed);
      o.notes.insert(o.notes.begin(), mode == StepMode::Remove ? "mode remove" : "mode add");
      break;
    }
    case ObfKind::Substitute: o = obfSubstitute(d, rules, seed); break;
    case ObfKind::EquivTransform: o = obfEquivTransform(d, rules, seed); break;
  }
  o.doc.id = d.id + "-" + obfKindName(kind);
  return {d, std::move(o.doc), kind, seed, std::move(o.notes)};
}

inline std::uint64_t pairSeed(const std::string& docId, ObfKind kind, std::uint64_t baseSeed) {
  return detail::fnv1a(docId + "|" + obfKindName(kind) + "|" + std::to_string(baseSeed));
}

struct Corpus {
  std::vector<LabeledPair> pairs;
  /// One line per skipped (document, kind) combination with the reason.
  std::vector<std::string> skipped;
};

inline bool sameContent(const Document& a, const Document& b) {
  if (a.fragments.size() != b.fragments.size()) return false;
  for (std::size_t i = 0; i < a.fragments.size(); ++i) {
    const auto& x = a.fragments[i];
    const auto& y = b.fragments[i];
    if (x.isText() != y.isText()) return false;
    if (x.isText() ? x.text().content != y.text().content : x.formula().rawSource != y.formula().rawSource)
      return false;
  }
  return true;
}

/// Every applicable (seed document, kind) pair, ordered by document id then kind.
inline Corpus generateCorpus(std::vector<Document> seeds, const std::vector<ObfKind>& kinds, std::uint64_t baseSeed,
                             const RuleTable& rules = defaultRules()) {
  std::stable_sort(seeds.begin(), seeds.end(), [](const Document& a, const Document& b) { return a.id < b.id; });
  Corpus out;
  for (const auto& d : seeds)
    for (auto kind : kinds) {
      std::uint64_t seed = pairSeed(d.id, kind, baseSeed);
      try {
        auto pair = obfuscate(d, kind, rules, seed);
        if (kind != ObfKind::CopyPaste && sameContent(pair.original, pair.variant)) {
          out.skipped.push_back(d.id + " " + obfKindName(kind) + ": no change");
          continue;
        }
        out.pairs.push_back(std::move(pair));
      } catch (const ObfuscationError& e) {
        out.skipped.push_back(d.id + " " + obfKindName(kind) + ": " + e.what());
      }
    }
  return out;
}

}  // namespace mathsim

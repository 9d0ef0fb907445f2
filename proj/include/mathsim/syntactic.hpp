#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mathsim/expr.hpp"
#include "mathsim/normalize.hpp"

namespace mathsim {

enum class TokenClass { StructureMarker, OperatorWord, Identifier, Number };

struct Token {
  std::string text;
  TokenClass cls;
  friend bool operator==(const Token&, const Token&) = default;
};

using TokenSeq = std::vector<Token>;

struct ClassWeights {
  double structureMarker = 1.5;
  double operatorWord = 2.0;
  double identifier = 1.0;
  double number = 1.0;

  double of(TokenClass c) const {
    switch (c) {
      case TokenClass::StructureMarker: return structureMarker;
      case TokenClass::OperatorWord: return operatorWord;
      case TokenClass::Identifier: return identifier;
      case TokenClass::Number: return number;
    }
    return 0.0;
  }
};

using Ngram = std::vector<std::string>;

struct WeightedNgramSet {
  std::map<Ngram, double> entries;
  int nMin = 1;
  int nMax = 3;
};

namespace detail {

enum class Fixity { Infix, Prefix, Postfix, Closed };

inline const std::map<std::string, std::string, std::less<>>& infixWords() {
  static const std::map<std::string, std::string, std::less<>> w{
      {"plus", "Plus"},      {"minus", "Minus"},          {"times", "Times"},  {"pm", "PlusMinus"},
      {"mp", "MinusPlus"},   {"eq", "Equal"},             {"neq", "NotEqual"}, {"lt", "Less"},
      {"leq", "LessEqual"},  {"gt", "Greater"},           {"geq", "GreaterEqual"}};
  return w;
}

inline Fixity fixityOf(const Expr& e) {
  if (!e.isApply()) return Fixity::Closed;
  const auto& h = e.head();
  auto n = e.args().size();
  if ((h == "chain" || infixWords().contains(h)) && n >= 2) return Fixity::Infix;
  if ((h == "neg" && n == 1) || (h == "presub" && n == 2)) return Fixity::Prefix;
  if (((h == "pow" || h == "sub") && n == 2) || (h == "fact" && n == 1)) return Fixity::Postfix;
  return Fixity::Closed;
}

class Textualizer {
 public:
  TokenSeq run(const Expr& e) {
    emit(e);
    return std::move(out_);
  }

 private:
  void marker(std::string s) { out_.push_back({std::move(s), TokenClass::StructureMarker}); }
  void word(std::string s) { out_.push_back({std::move(s), TokenClass::OperatorWord}); }

  /// Emits c as an operand, grouped when the flattening would otherwise be ambiguous.
  void operand(const Expr& c, bool groupPrefix) {
    Fixity f = fixityOf(c);
    bool group = f == Fixity::Infix || (groupPrefix && f == Fixity::Prefix);
    if (group) marker("BeginGroup");
    emit(c);
    if (group) marker("EndGroup");
  }

  void arguments(const std::vector<Expr>& args) {
    marker("BeginArgument");
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (i) marker("Comma");
      emit(args[i]);
    }
    marker("EndArgument");
  }

  void emit(const Expr& e) {
    switch (e.kind()) {
      case Expr::Kind::Number: out_.push_back({rationalToString(e.value()), TokenClass::Number}); return;
      case Expr::Kind::Identifier: out_.push_back({e.name(), TokenClass::Identifier}); return;
      case Expr::Kind::Binder: binder(e); return;
      case Expr::Kind::Apply: apply(e); return;
    }
  }

  void apply(const Expr& e) {
    const auto& h = e.head();
    const auto& a = e.args();
    switch (fixityOf(e)) {
      case Fixity::Infix: {
        std::string sep = h == "chain" ? "NextLine" : infixWords().find(h)->second;
        for (std::size_t i = 0; i < a.size(); ++i) {
          if (i) h == "chain" ? marker(sep) : word(sep);
          operand(a[i], false);
        }
        return;
      }
      case Fixity::Prefix:
        if (h == "neg") {
          word("Negative");
          operand(a[0], false);
        } else {
          marker("BeginPresub");
          emit(a[0]);
          marker("EndPresub");
          operand(a[1], false);
        }
        return;
      case Fixity::Postfix:
        operand(a[0], true);
        if (h == "fact") {
          word("Factorial");
        } else if (h == "pow") {
          marker("BeginExponent");
          emit(a[1]);
          marker("EndExponent");
        } else {
          marker("BeginSubscript");
          emit(a[1]);
          marker("EndSubscript");
        }
        return;
      case Fixity::Closed: break;
    }
    if (h == "frac" && a.size() == 2) {
      marker("BeginFraction");
      emit(a[0]);
      marker("Over");
      emit(a[1]);
      marker("EndFraction");
    } else if (h == "binom" && a.size() == 2) {
      marker("BeginBinomial");
      emit(a[0]);
      marker("Choose");
      emit(a[1]);
      marker("EndBinomial");
    } else if (h == "sqrt" && a.size() == 1) {
      marker("BeginRoot");
      emit(a[0]);
      marker("EndRoot");
    } else if (h == "root" && a.size() == 2) {
      marker("BeginRoot");
      emit(a[0]);
      marker("Of");
      emit(a[1]);
      marker("EndRoot");
    } else if (h == "log" && a.size() == 2) {
      word("Log");
      marker("BeginBase");
      emit(a[0]);
      marker("EndBase");
      arguments({a[1]});
    } else if (h == "log") {
      word("Log");
      arguments(a);
    } else if (functionNames().contains(h)) {
      word(h);
      arguments(a);
    } else {
      out_.push_back({h, TokenClass::Identifier});
      arguments(a);
    }
  }

  void binder(const Expr& e) {
    std::string kind{binderKindName(e.binderKind())};
    kind[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(kind[0])));
    marker("Begin" + kind);
    bool integral = e.binderKind() == BinderKind::Integral;
    if (!integral)
      for (const auto& v : e.boundVars()) out_.push_back({v, TokenClass::Identifier});
    if (e.lower()) {
      marker("From");
      emit(*e.lower());
    }
    if (e.upper()) {
      marker("To");
      emit(*e.upper());
    }
    marker("Body");
    emit(e.body());
    if (integral)
      for (const auto& v : e.boundVars()) {
        marker("Differential");
        out_.push_back({v, TokenClass::Identifier});
      }
    marker("End" + kind);
  }

  TokenSeq out_;
};

}  // namespace detail

/// Flattens an expression into a token sequence in pre-order reading order.
inline TokenSeq textualize(const Expr& e) { return detail::Textualizer().run(e); }

inline std::vector<std::string> tokenTexts(const TokenSeq& t) {
  std::vector<std::string> out;
  for (const auto& tok : t) out.push_back(tok.text);
  return out;
}

/// All contiguous n-grams for n in [nMin, nMax]. A gram's weight is the sum of
/// its token class weights, accumulated over occurrences.
inline WeightedNgramSet ngrams(const TokenSeq& t, int nMin, int nMax, const ClassWeights& w = {}) {
  if (nMin < 1 || nMax < nMin) throw std::invalid_argument("n-gram range must satisfy 1 <= nMin <= nMax");
  WeightedNgramSet out{{}, nMin, nMax};
  for (int n = nMin; n <= nMax; ++n) {
    for (std::size_t i = 0; i + n <= t.size(); ++i) {
      Ngram g;
      double weight = 0;
      for (int k = 0; k < n; ++k) {
        g.push_back(t[i + k].text);
        weight += w.of(t[i + k].cls);
      }
      out.entries[g] += weight;
    }
  }
  return out;
}

/// Weighted Jaccard: sum of minima over sum of maxima; 1 when both are empty.
inline double weightedJaccard(const WeightedNgramSet& a, const WeightedNgramSet& b) {
  double num = 0, den = 0;
  auto ia = a.entries.begin(), ib = b.entries.begin();
  while (ia != a.entries.end() || ib != b.entries.end()) {
    if (ib == b.entries.end() || (ia != a.entries.end() && ia->first < ib->first)) {
      den += ia->second;
      ++ia;
    } else if (ia == a.entries.end() || ib->first < ia->first) {
      den += ib->second;
      ++ib;
    } else {
      num += std::min(ia->second, ib->second);
      den += std::max(ia->second, ib->second);
      ++ia;
      ++ib;
    }
  }
  return den == 0 ? 1.0 : num / den;
}

struct SyntacticConfig {
  NormLevel level = NormLevel::Commute;
  bool equiv = false;
  int nMin = 1;
  int nMax = 3;
  ClassWeights weights{};
};

inline WeightedNgramSet syntacticProfile(const Expr& e, const SyntacticConfig& cfg, const RuleTable& rules) {
  return ngrams(textualize(normalize(e, cfg.level, rules, cfg.equiv)), cfg.nMin, cfg.nMax, cfg.weights);
}

inline double simSyntactic(const Expr& a, const Expr& b, const SyntacticConfig& cfg = {},
                           const RuleTable& rules = defaultRules()) {
  return weightedJaccard(syntacticProfile(a, cfg, rules), syntacticProfile(b, cfg, rules));
}

struct NgramHit {
  Ngram gram;
  double weight;
};

/// Shared n-grams whose intrinsic weight reaches the threshold, heaviest first.
inline std::vector<NgramHit> subtermHits(const Expr& query, const Expr& doc, double threshold,
                                         const SyntacticConfig& cfg = {}, const RuleTable& rules = defaultRules()) {
  if (threshold < 0) throw std::invalid_argument("threshold must be non-negative");
  TokenSeq q = textualize(normalize(query, cfg.level, rules, cfg.equiv));
  TokenSeq d = textualize(normalize(doc, cfg.level, rules, cfg.equiv));
  auto qa = ngrams(q, cfg.nMin, cfg.nMax, cfg.weights);
  auto da = ngrams(d, cfg.nMin, cfg.nMax, cfg.weights);
  std::map<Ngram, double> intrinsic;
  for (int n = cfg.nMin; n <= cfg.nMax; ++n)
    for (std::size_t i = 0; i + n <= q.size(); ++i) {
      Ngram g;
      double w = 0;
      for (int k = 0; k < n; ++k) {
        g.push_back(q[i + k].text);
        w += cfg.weights.of(q[i + k].cls);
      }
      intrinsic[g] = w;
    }
  std::vector<NgramHit> out;
  for (const auto& [g, w] : intrinsic)
    if (w >= threshold && da.entries.contains(g)) out.push_back({g, w});
  std::stable_sort(out.begin(), out.end(), [](const NgramHit& x, const NgramHit& y) { return x.weight > y.weight; });
  return out;
}

}  // namespace mathsim

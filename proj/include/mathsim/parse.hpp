#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mathsim/expr.hpp"

namespace mathsim {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t position, std::string expected, std::string found,
             std::optional<std::size_t> fragment = std::nullopt)
      : std::runtime_error(format(position, expected, found, fragment)),
        position_(position),
        expected_(std::move(expected)),
        found_(std::move(found)),
        fragment_(fragment) {}

  std::size_t position() const { return position_; }
  const std::string& expected() const { return expected_; }
  const std::string& found() const { return found_; }
  std::optional<std::size_t> fragment() const { return fragment_; }

 private:
  static std::string format(std::size_t pos, const std::string& exp, const std::string& found,
                            std::optional<std::size_t> frag) {
    std::string s = "parse error at offset " + std::to_string(pos);
    if (frag) s += " in fragment " + std::to_string(*frag);
    return s + ": expected " + exp + ", found " + (found.empty() ? "end of input" : "'" + found + "'");
  }
  std::size_t position_;
  std::string expected_;
  std::string found_;
  std::optional<std::size_t> fragment_;
};

// ---------------------------------------------------------------------------
// Symbol tables

inline const std::set<std::string, std::less<>>& greekNames() {
  static const std::set<std::string, std::less<>> names{
      "alpha", "beta",  "gamma", "delta",   "epsilon", "varepsilon", "zeta",  "eta",   "theta", "vartheta",
      "iota",  "kappa", "lambda", "mu",     "nu",      "xi",         "pi",    "rho",   "sigma", "tau",
      "upsilon", "phi", "varphi", "chi",    "psi",     "omega",      "Gamma", "Delta", "Theta", "Lambda",
      "Xi",    "Pi",    "Sigma", "Upsilon", "Phi",     "Psi",        "Omega"};
  return names;
}

inline const std::set<std::string, std::less<>>& functionNames() {
  static const std::set<std::string, std::less<>> names{
      "sin", "cos", "tan",  "cot", "sec", "csc", "sinh", "cosh", "tanh", "arcsin", "arccos",
      "arctan", "exp", "ln", "log", "lg", "det", "min", "max", "gcd"};
  return names;
}

namespace detail {

inline bool isAsciiLetter(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
inline bool isDigit(char c) { return c >= '0' && c <= '9'; }

/// Decodes one UTF-8 code point at s[i]; advances i. Returns U+FFFD on malformed input.
inline char32_t decodeUtf8(std::string_view s, std::size_t& i) {
  auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) -> unsigned {
    if (i + k >= s.size()) return 0x100;
    auto b = static_cast<unsigned char>(s[i + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : 0x100;
  };
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int len = (b0 & 0xE0) == 0xC0 ? 2 : (b0 & 0xF0) == 0xE0 ? 3 : (b0 & 0xF8) == 0xF0 ? 4 : 0;
  if (len == 0) {
    ++i;
    return 0xFFFD;
  }
  char32_t cp = b0 & (0x7F >> len);
  for (int k = 1; k < len; ++k) {
    unsigned c = cont(k);
    if (c == 0x100) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | c;
  }
  i += len;
  return cp;
}

inline void encodeUtf8(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

// ---------------------------------------------------------------------------
// LaTeX lexer

struct Token {
  enum class Type { Number, Letter, Command, Symbol, Raw, LineBreak, End };
  Type type = Type::End;
  std::string text;  // digits, letter, command name (no backslash), symbol char, raw braced content
  std::size_t offset = 0;

  bool isSymbol(char c) const { return type == Type::Symbol && text.size() == 1 && text[0] == c; }
  bool isCommand(std::string_view n) const { return type == Type::Command && text == n; }
};

inline std::string unicodeCommand(char32_t cp) {
  switch (cp) {
    case 0x2264: return "leq";
    case 0x2265: return "geq";
    case 0x2260: return "neq";
    case 0x00B7:
    case 0x22C5:
    case 0x2219: return "cdot";
    case 0x00D7: return "times";
    case 0x2211: return "sum";
    case 0x220F: return "prod";
    case 0x222B: return "int";
    default: break;
  }
  static const char* lower[] = {"alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta",
                                "iota", "kappa", "lambda", "mu", "nu", "xi", "omicron", "pi", "rho",
                                "varsigma", "sigma", "tau", "upsilon", "phi", "chi", "psi", "omega"};
  if (cp >= 0x03B1 && cp <= 0x03C9) {
    std::string n = lower[cp - 0x03B1];
    if (n == "omicron") return {};
    if (n == "varsigma") return "sigma";
    return n;
  }
  return {};
}

inline std::vector<Token> lexLatex(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  bool scriptPending = false;  // a single digit follows ^ or _
  auto push = [&](Token::Type t, std::string text, std::size_t off) {
    out.push_back(Token{t, std::move(text), off});
  };
  while (i < s.size()) {
    char c = s[i];
    std::size_t start = i;
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    bool script = scriptPending;
    scriptPending = false;
    if (isDigit(c)) {
      if (script) {
        push(Token::Type::Number, std::string(1, c), start);
        ++i;
        continue;
      }
      while (i < s.size() && isDigit(s[i])) ++i;
      if (i + 1 < s.size() && s[i] == '.' && isDigit(s[i + 1])) {
        ++i;
        while (i < s.size() && isDigit(s[i])) ++i;
      }
      push(Token::Type::Number, std::string(s.substr(start, i - start)), start);
      continue;
    }
    if (isAsciiLetter(c)) {
      push(Token::Type::Letter, std::string(1, c), start);
      ++i;
      continue;
    }
    if (c == '\\') {
      ++i;
      if (i >= s.size()) throw ParseError(start, "command name", "");
      char d = s[i];
      if (d == '\\') {
        ++i;
        push(Token::Type::LineBreak, "\\\\", start);
        continue;
      }
      if (!isAsciiLetter(d)) {
        ++i;
        if (d == ',' || d == ';' || d == ':' || d == '!' || d == ' ') continue;  // spacing
        if (d == '{' || d == '}') {
          push(Token::Type::Symbol, std::string(1, d == '{' ? '(' : ')'), start);
          continue;
        }
        throw ParseError(start, "command", std::string("\\") + d);
      }
      std::size_t nameStart = i;
      while (i < s.size() && isAsciiLetter(s[i])) ++i;
      std::string name(s.substr(nameStart, i - nameStart));
      if (name == "left" || name == "right" || name == "big" || name == "Big" || name == "bigl" ||
          name == "bigr" || name == "Bigl" || name == "Bigr" || name == "quad" || name == "qquad" ||
          name == "displaystyle" || name == "limits" || name == "nolimits") {
        if ((name == "left" || name == "right") && i < s.size() && s[i] == '.') ++i;
        if ((name == "left" || name == "right") && i < s.size() && s[i] == '\\' && i + 1 < s.size() &&
            (s[i + 1] == '{' || s[i + 1] == '}')) {
          push(Token::Type::Symbol, s[i + 1] == '{' ? "(" : ")", i);
          i += 2;
        }
        continue;
      }
      if (name == "operatorname" || name == "mathrm" || name == "mathit" || name == "text") {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        if (i >= s.size() || s[i] != '{') throw ParseError(i, "'{' after \\" + name, i < s.size() ? std::string(1, s[i]) : "");
        std::size_t close = s.find('}', i);
        if (close == std::string_view::npos) throw ParseError(i, "'}'", "");
        std::string raw(s.substr(i + 1, close - i - 1));
        raw.erase(std::remove_if(raw.begin(), raw.end(), [](unsigned char ch) { return std::isspace(ch); }), raw.end());
        if (raw.empty()) throw ParseError(i, "name inside braces", "}");
        push(Token::Type::Command, name, start);
        push(Token::Type::Raw, raw, i + 1);
        i = close + 1;
        continue;
      }
      push(Token::Type::Command, name, start);
      continue;
    }
    if (static_cast<unsigned char>(c) >= 0x80) {
      char32_t cp = decodeUtf8(s, i);
      if (cp == 0x2212) {
        push(Token::Type::Symbol, "-", start);
        continue;
      }
      std::string cmd = unicodeCommand(cp);
      if (cmd.empty()) throw ParseError(start, "ASCII or known math symbol", std::string(s.substr(start, i - start)));
      push(Token::Type::Command, cmd, start);
      continue;
    }
    if (c == '&') {
      ++i;
      continue;
    }
    static constexpr std::string_view symbols = "+-*/=<>()[]{}^_!,|";
    if (symbols.find(c) == std::string_view::npos) throw ParseError(start, "math token", std::string(1, c));
    push(Token::Type::Symbol, std::string(1, c), start);
    ++i;
    if (c == '^' || c == '_') scriptPending = true;
  }
  out.push_back(Token{Token::Type::End, "", s.size()});
  return out;
}

inline Rational parseDecimal(std::string_view digits) {
  auto dot = digits.find('.');
  std::string whole(digits.substr(0, dot));
  std::string frac = dot == std::string_view::npos ? "" : std::string(digits.substr(dot + 1));
  std::int64_t den = 1;
  for (std::size_t k = 0; k < frac.size(); ++k) den *= 10;
  std::int64_t num = 0;
  for (char ch : whole + frac) num = num * 10 + (ch - '0');
  return Rational(num, den);
}

class LatexParser {
 public:
  explicit LatexParser(std::string_view src) : toks_(lexLatex(src)) {}

  Expr parseAll() {
    Expr e = parseLines(true);
    if (cur().type != Token::Type::End) fail("end of formula");
    return e;
  }

 private:
  const Token& cur() const { return toks_[pos_]; }
  const Token& peek(std::size_t k = 1) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
  void advance() {
    if (pos_ + 1 < toks_.size()) ++pos_;
  }
  [[noreturn]] void fail(const std::string& expected) const {
    const Token& t = cur();
    std::string found = t.type == Token::Type::End ? "" : (t.type == Token::Type::Command ? "\\" + t.text : t.text);
    throw ParseError(t.offset, expected, found);
  }
  void expectSymbol(char c) {
    if (!cur().isSymbol(c)) fail(std::string("'") + c + "'");
    advance();
  }

  static std::optional<std::string> relationHead(const Token& t) {
    if (t.isSymbol('=')) return "eq";
    if (t.isSymbol('<')) return "lt";
    if (t.isSymbol('>')) return "gt";
    if (t.type == Token::Type::Command) {
      if (t.text == "leq" || t.text == "le" || t.text == "leqslant") return "leq";
      if (t.text == "geq" || t.text == "ge" || t.text == "geqslant") return "geq";
      if (t.text == "neq" || t.text == "ne") return "neq";
      if (t.text == "lt") return "lt";
      if (t.text == "gt") return "gt";
    }
    return std::nullopt;
  }

  /// Relation chains, optionally across \\ line breaks. A line that starts with a
  /// relation continues from the previous right-hand side.
  Expr parseLines(bool allowBreaks) {
    std::vector<Expr> lines;
    std::optional<Expr> lone;
    std::optional<Expr> prevRhs;
    bool sawBreak = false;
    while (true) {
      if (cur().type == Token::Type::End) break;
      std::optional<Expr> lhs;
      if (relationHead(cur())) {
        if (!prevRhs) fail("left-hand side before relation");
        lhs = *prevRhs;
      } else {
        lhs = parseAdditive();
      }
      bool any = false;
      while (auto rel = relationHead(cur())) {
        advance();
        Expr rhs = parseAdditive();
        lines.push_back(Expr::apply(*rel, {*lhs, rhs}));
        lhs = rhs;
        prevRhs = rhs;
        any = true;
      }
      if (!any) {
        if (lone || !lines.empty() || sawBreak) fail("relation on every line of a derivation");
        lone = lhs;
      }
      if (allowBreaks && cur().type == Token::Type::LineBreak) {
        if (lone) fail("relation on every line of a derivation");
        sawBreak = true;
        advance();
        continue;
      }
      break;
    }
    if (lone) return *lone;
    if (lines.empty()) fail("expression");
    if (lines.size() == 1) return lines.front();
    return Expr::apply("chain", std::move(lines));
  }

  Expr parseAdditive() {
    std::optional<Expr> acc;
    bool accIsOpenPlus = false;
    if (cur().isSymbol('-')) {
      advance();
      acc = Expr::apply("neg", {parseTerm()});
    } else {
      if (cur().isSymbol('+')) advance();
      acc = parseTerm();
    }
    while (cur().isSymbol('+') || cur().isSymbol('-') || cur().isCommand("pm") || cur().isCommand("mp")) {
      if (cur().type == Token::Type::Command) {
        std::string h = cur().text;
        advance();
        acc = Expr::apply(h, {*acc, parseTerm()});
        accIsOpenPlus = false;
        continue;
      }
      bool plus = cur().isSymbol('+');
      advance();
      Expr rhs = parseTerm();
      if (plus) {
        if (accIsOpenPlus) {
          auto args = acc->args();
          args.push_back(rhs);
          acc = Expr::apply("plus", std::move(args));
        } else {
          acc = Expr::apply("plus", {*acc, rhs});
          accIsOpenPlus = true;
        }
      } else {
        acc = Expr::apply("minus", {*acc, rhs});
        accIsOpenPlus = false;
      }
    }
    return *acc;
  }

  Expr parseTerm() {
    Expr acc = parseProduct();
    while (cur().isSymbol('/')) {
      advance();
      acc = Expr::apply("frac", {acc, parseProduct()});
    }
    return acc;
  }

  static bool isExplicitTimes(const Token& t) {
    return t.isSymbol('*') || t.isCommand("cdot") || t.isCommand("times") || t.isCommand("ast");
  }

  static bool isDifferentialVar(const Token& t) {
    return t.type == Token::Type::Letter || (t.type == Token::Type::Command && greekNames().contains(t.text));
  }

  bool atDifferential() const {
    return differentialDepth_ > 0 && cur().type == Token::Type::Letter && cur().text == "d" && isDifferentialVar(peek());
  }

  bool startsPrimary() const {
    const Token& t = cur();
    switch (t.type) {
      case Token::Type::Number: return true;
      case Token::Type::Letter: return !atDifferential();
      case Token::Type::Symbol: return t.text == "(" || t.text == "[" || t.text == "{";
      case Token::Type::Command:
        return greekNames().contains(t.text) || functionNames().contains(t.text) || t.text == "frac" ||
               t.text == "dfrac" || t.text == "tfrac" || t.text == "binom" || t.text == "dbinom" ||
               t.text == "tbinom" || t.text == "sqrt" || t.text == "operatorname" || t.text == "mathrm" ||
               t.text == "mathit" || t.text == "text" || t.text == "sum" || t.text == "prod" || t.text == "int";
      default: return false;
    }
  }

  Expr parseProduct() {
    std::vector<Expr> factors{parseFactor()};
    while (true) {
      if (isExplicitTimes(cur())) {
        advance();
        factors.push_back(parseFactor());
      } else if (startsPrimary()) {
        factors.push_back(parseFactor());
      } else {
        break;
      }
    }
    if (factors.size() == 1) return factors.front();
    return Expr::apply("times", std::move(factors));
  }

  Expr parseFactor() {
    Expr e = parsePrimary();
    return parsePostfix(e);
  }

  Expr parsePostfix(Expr e) {
    while (true) {
      if (cur().isSymbol('_') || cur().isSymbol('^')) {
        std::optional<Expr> sub, sup;
        for (int k = 0; k < 2; ++k) {
          if (cur().isSymbol('_') && !sub) {
            advance();
            sub = parseScript();
          } else if (cur().isSymbol('^') && !sup) {
            advance();
            sup = parseScript();
          }
        }
        if (sub) e = Expr::apply("sub", {e, *sub});
        if (sup) e = Expr::apply("pow", {e, *sup});
        continue;
      }
      if (cur().isSymbol('!')) {
        advance();
        e = Expr::apply("fact", {e});
        continue;
      }
      return e;
    }
  }

  Expr parseScript() {
    if (cur().isSymbol('{')) {
      advance();
      Expr e = parseLines(false);
      expectSymbol('}');
      return e;
    }
    if (cur().isSymbol('-')) {
      advance();
      return Expr::apply("neg", {parsePrimary()});
    }
    if (cur().type == Token::Type::Letter) {
      Expr e = Expr::ident(cur().text);
      advance();
      return e;
    }
    return parsePrimary();
  }

  Expr parseGroupArg() {
    expectSymbol('{');
    Expr e = parseLines(false);
    expectSymbol('}');
    return e;
  }

  /// Letter followed by '(' is an application when the parenthesized content
  /// has a top-level comma or no top-level infix operator.
  bool looksLikeApplication() const {
    if (!peek().isSymbol('(')) return false;
    int depth = 0;
    bool infix = false;
    for (std::size_t k = pos_ + 1; k < toks_.size(); ++k) {
      const Token& t = toks_[k];
      if (t.isSymbol('(') || t.isSymbol('[') || t.isSymbol('{')) {
        ++depth;
      } else if (t.isSymbol(')') || t.isSymbol(']') || t.isSymbol('}')) {
        --depth;
        if (depth == 0) return !infix && k > pos_ + 2;
      } else if (depth == 1) {
        if (t.isSymbol(',')) return true;
        if (t.isSymbol('+') || t.isSymbol('-') || t.isSymbol('*') || t.isSymbol('/') || isExplicitTimes(t) ||
            t.isCommand("pm") || t.isCommand("mp") || relationHead(t))
          infix = true;
      }
      if (t.type == Token::Type::End) return false;
    }
    return false;
  }

  std::vector<Expr> parseArgList() {
    expectSymbol('(');
    std::vector<Expr> args{parseLines(false)};
    while (cur().isSymbol(',')) {
      advance();
      args.push_back(parseLines(false));
    }
    expectSymbol(')');
    return args;
  }

  Expr parsePrimary() {
    const Token t = cur();
    switch (t.type) {
      case Token::Type::Number:
        advance();
        return Expr::number(parseDecimal(t.text));
      case Token::Type::Letter:
        if (looksLikeApplication()) {
          advance();
          return Expr::apply(t.text, parseArgList());
        }
        advance();
        return Expr::ident(t.text);
      case Token::Type::Symbol: {
        if (t.text == "(" || t.text == "[") {
          char close = t.text == "(" ? ')' : ']';
          advance();
          Expr e = parseLines(false);
          expectSymbol(close);
          return e;
        }
        if (t.text == "{") {
          advance();
          if (cur().isSymbol('}')) {
            advance();
            if (!cur().isSymbol('_')) fail("'_' after empty group");
            advance();
            Expr pre = parseScript();
            return Expr::apply("presub", {pre, parseFactor()});
          }
          Expr e = parseLines(false);
          if (cur().isCommand("choose")) {
            advance();
            Expr k = parseLines(false);
            expectSymbol('}');
            return Expr::apply("binom", {e, k});
          }
          expectSymbol('}');
          return e;
        }
        if (t.text == "_") {
          advance();
          Expr pre = parseScript();
          return Expr::apply("presub", {pre, parseFactor()});
        }
        fail("operand");
      }
      case Token::Type::Command: return parseCommand();
      default: fail("operand");
    }
  }

  Expr parseCommand() {
    const Token t = cur();
    const std::string& n = t.text;
    if (greekNames().contains(n)) {
      advance();
      return Expr::ident(n);
    }
    if (n == "frac" || n == "dfrac" || n == "tfrac") {
      advance();
      Expr a = parseGroupArg();
      Expr b = parseGroupArg();
      return Expr::apply("frac", {a, b});
    }
    if (n == "binom" || n == "dbinom" || n == "tbinom") {
      advance();
      Expr a = parseGroupArg();
      Expr b = parseGroupArg();
      return Expr::apply("binom", {a, b});
    }
    if (n == "sqrt") {
      advance();
      if (cur().isSymbol('[')) {
        advance();
        Expr idx = parseLines(false);
        expectSymbol(']');
        return Expr::apply("root", {idx, parseGroupArg()});
      }
      return Expr::apply("sqrt", {parseGroupArg()});
    }
    if (n == "mathrm" || n == "mathit" || n == "text") {
      advance();
      std::string raw = cur().text;
      advance();
      return Expr::ident(raw);
    }
    if (n == "operatorname") {
      advance();
      std::string raw = cur().text;
      advance();
      return parseFunction(raw);
    }
    if (functionNames().contains(n)) {
      advance();
      return parseFunction(n);
    }
    if (n == "sum" || n == "prod" || n == "int") {
      advance();
      return parseBinder(n == "sum" ? BinderKind::Sum : n == "prod" ? BinderKind::Product : BinderKind::Integral);
    }
    fail("supported command");
  }

  Expr parseFunction(const std::string& name) {
    std::optional<Expr> base, power;
    for (int k = 0; k < 2; ++k) {
      if (cur().isSymbol('_') && !base) {
        advance();
        base = parseScript();
      } else if (cur().isSymbol('^') && !power) {
        advance();
        power = parseScript();
      }
    }
    std::vector<Expr> args;
    if (base) args.push_back(*base);
    if (cur().isSymbol('(')) {
      auto inner = parseArgList();
      args.insert(args.end(), inner.begin(), inner.end());
    } else {
      args.push_back(parseFactor());
    }
    Expr app = Expr::apply(name, std::move(args));
    if (power) app = Expr::apply("pow", {app, *power});
    return app;
  }

  Expr parseBinder(BinderKind kind) {
    std::optional<Expr> sub, sup;
    for (int k = 0; k < 2; ++k) {
      if (cur().isSymbol('_') && !sub) {
        advance();
        sub = parseScript();
      } else if (cur().isSymbol('^') && !sup) {
        advance();
        sup = parseScript();
      }
    }
    std::vector<std::string> vars;
    std::optional<Expr> lower;
    if (kind == BinderKind::Integral) {
      lower = sub;
      ++differentialDepth_;
      Expr body = parseProduct();
      --differentialDepth_;
      if (cur().type == Token::Type::Letter && cur().text == "d" && isDifferentialVar(peek())) {
        advance();
        vars.push_back(cur().text);
        advance();
      }
      return Expr::binder(kind, std::move(vars), lower, sup, body);
    }
    if (sub) {
      if (sub->isIdentifier()) {
        vars.push_back(sub->name());
      } else if (sub->isApply() && sub->head() == "eq" && sub->args()[0].isIdentifier()) {
        vars.push_back(sub->args()[0].name());
        lower = sub->args()[1];
      } else {
        fail("summation index such as i=1");
      }
    }
    Expr body = parseProduct();
    return Expr::binder(kind, std::move(vars), lower, sup, body);
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  int differentialDepth_ = 0;
};

// ---------------------------------------------------------------------------
// Canonical s-expression parser

class CanonicalParser {
 public:
  explicit CanonicalParser(std::string_view s) : s_(s) {}

  Expr parseAll() {
    Expr e = parseExpr();
    skipWs();
    if (i_ != s_.size()) throw ParseError(i_, "end of input", std::string(1, s_[i_]));
    return e;
  }

 private:
  void skipWs() {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
  }
  static bool isDelim(char c) {
    return std::isspace(static_cast<unsigned char>(c)) || c == '(' || c == ')' || c == '[' || c == ']' ||
           c == '{' || c == '}';
  }
  std::string found() const { return i_ < s_.size() ? std::string(1, s_[i_]) : ""; }

  std::string atom() {
    skipWs();
    std::size_t start = i_;
    while (i_ < s_.size() && !isDelim(s_[i_])) ++i_;
    if (start == i_) throw ParseError(start, "atom", found());
    return std::string(s_.substr(start, i_ - start));
  }

  static std::optional<Rational> asNumber(std::string_view a) {
    std::size_t k = 0;
    bool neg = false;
    if (k < a.size() && a[k] == '-') {
      neg = true;
      ++k;
    }
    auto digitsAt = [&](std::size_t from, std::size_t& to) {
      to = from;
      while (to < a.size() && detail::isDigit(a[to])) ++to;
      return to > from;
    };
    std::size_t e1;
    if (!digitsAt(k, e1)) return std::nullopt;
    std::int64_t num = 0, den = 1;
    auto r = std::from_chars(a.data() + k, a.data() + e1, num);
    if (r.ec != std::errc()) return std::nullopt;
    if (e1 != a.size()) {
      if (a[e1] != '/') return std::nullopt;
      std::size_t e2;
      if (!digitsAt(e1 + 1, e2) || e2 != a.size()) return std::nullopt;
      auto r2 = std::from_chars(a.data() + e1 + 1, a.data() + e2, den);
      if (r2.ec != std::errc() || den == 0) return std::nullopt;
    }
    return Rational(neg ? -num : num, den);
  }

  Expr leaf(std::size_t start, const std::string& a) {
    if (auto num = asNumber(a)) return Expr::number(*num);
    if (a == "_") throw ParseError(start, "expression", "_");
    if (detail::isDigit(a[0]) || a[0] == '-') throw ParseError(start, "number or identifier", a);
    if (i_ < s_.size() && s_[i_] == '{') {
      std::size_t close = s_.find('}', i_);
      if (close == std::string_view::npos) throw ParseError(i_, "'}'", "");
      std::string tag(s_.substr(i_ + 1, close - i_ - 1));
      i_ = close + 1;
      return Expr::ident(a, tag);
    }
    return Expr::ident(a);
  }

  std::optional<Expr> parseOptional() {
    skipWs();
    if (i_ < s_.size() && s_[i_] == '_' && (i_ + 1 == s_.size() || isDelim(s_[i_ + 1]))) {
      ++i_;
      return std::nullopt;
    }
    return parseExpr();
  }

  Expr parseExpr() {
    skipWs();
    if (i_ >= s_.size()) throw ParseError(i_, "expression", "");
    if (s_[i_] != '(') {
      std::size_t start = i_;
      return leaf(start, atom());
    }
    ++i_;
    std::size_t headPos = i_;
    std::string head = atom();
    if (head[0] == '-' || detail::isDigit(head[0])) throw ParseError(headPos, "head symbol", head);
    skipWs();
    if (i_ < s_.size() && s_[i_] == '[') {
      auto kind = binderKindFromName(head);
      if (!kind) throw ParseError(headPos, "binder kind", head);
      ++i_;
      std::vector<std::string> vars;
      while (true) {
        skipWs();
        if (i_ < s_.size() && s_[i_] == ']') {
          ++i_;
          break;
        }
        vars.push_back(atom());
      }
      auto lo = parseOptional();
      auto hi = parseOptional();
      Expr body = parseExpr();
      skipWs();
      if (i_ >= s_.size() || s_[i_] != ')') throw ParseError(i_, "')'", found());
      ++i_;
      try {
        return Expr::binder(*kind, std::move(vars), lo, hi, body);
      } catch (const std::invalid_argument& e) {
        throw ParseError(headPos, "distinct binder variables", head);
      }
    }
    std::vector<Expr> args;
    while (true) {
      skipWs();
      if (i_ >= s_.size()) throw ParseError(i_, "')'", "");
      if (s_[i_] == ')') {
        ++i_;
        break;
      }
      args.push_back(parseExpr());
    }
    if (args.empty()) throw ParseError(i_ - 1, "at least one argument", ")");
    return Expr::apply(head, std::move(args));
  }

  std::string_view s_;
  std::size_t i_ = 0;
};

}  // namespace detail

/// Parses the supported LaTeX subset into an expression tree.
inline Expr parseLatex(std::string_view src) {
  bool blank = std::all_of(src.begin(), src.end(), [](unsigned char c) { return std::isspace(c); });
  if (blank) throw ParseError(0, "formula", "");
  return detail::LatexParser(src).parseAll();
}

/// Inverse of canonicalString.
inline Expr parseCanonical(std::string_view src) { return detail::CanonicalParser(src).parseAll(); }

// ---------------------------------------------------------------------------
// LaTeX printer

enum class TimesStyle { Juxtapose, Cdot, Star, Times };

struct LatexStyle {
  TimesStyle times = TimesStyle::Juxtapose;
};

namespace detail {

enum Prec { kRel = 1, kAdd = 2, kProd = 3, kPostfix = 5, kPrimary = 6 };

inline bool isBinderLike(const Expr& e) { return e.isBinder(); }

inline int precOf(const Expr& e) {
  switch (e.kind()) {
    case Expr::Kind::Number: return e.value() < 0 ? kAdd : kPrimary;
    case Expr::Kind::Identifier: return kPrimary;
    case Expr::Kind::Binder: return kProd;
    case Expr::Kind::Apply: {
      const auto& h = e.head();
      if (relationHeads().contains(h)) return kRel;
      if (h == "plus" || h == "minus" || h == "neg" || h == "pm" || h == "mp") return kAdd;
      if (h == "times") return kProd;
      if (h == "pow" || h == "sub" || h == "fact" || h == "presub") return kPostfix;
      return kPrimary;
    }
  }
  return kPrimary;
}

class LatexPrinter {
 public:
  explicit LatexPrinter(LatexStyle style) : style_(style) {}

  std::string print(const Expr& e) const {
    switch (e.kind()) {
      case Expr::Kind::Number: return number(e.value());
      case Expr::Kind::Identifier: return identifier(e.name());
      case Expr::Kind::Binder: return binder(e);
      case Expr::Kind::Apply: return apply(e);
    }
    return {};
  }

 private:
  static std::string number(const Rational& r) {
    if (r.denominator() == 1) return std::to_string(r.numerator());
    std::int64_t d = r.denominator();
    int twos = 0, fives = 0;
    while (d % 2 == 0) d /= 2, ++twos;
    while (d % 5 == 0) d /= 5, ++fives;
    std::string sign = r < 0 ? "-" : "";
    std::int64_t num = r.numerator() < 0 ? -r.numerator() : r.numerator();
    if (d != 1) return sign + "\\frac{" + std::to_string(num) + "}{" + std::to_string(r.denominator()) + "}";
    int places = std::max(twos, fives);
    std::int64_t scale = 1;
    for (int k = 0; k < places; ++k) scale *= 10;
    std::int64_t scaled = num * (scale / r.denominator());
    std::string digits = std::to_string(scaled);
    while (static_cast<int>(digits.size()) <= places) digits.insert(digits.begin(), '0');
    return sign + digits.substr(0, digits.size() - places) + "." + digits.substr(digits.size() - places);
  }

  static std::string identifier(const std::string& n) {
    if (n.size() == 1 && isAsciiLetter(n[0])) return n;
    if (greekNames().contains(n)) return "\\" + n;
    return "\\mathrm{" + n + "}";
  }

  std::string wrap(const Expr& e, int minPrec) const {
    std::string s = print(e);
    return precOf(e) < minPrec ? "(" + s + ")" : s;
  }
  std::string paren(const Expr& e) const { return "(" + print(e) + ")"; }

  static std::string relOp(const std::string& h) {
    if (h == "eq") return "=";
    if (h == "neq") return "\\neq";
    if (h == "lt") return "<";
    if (h == "leq") return "\\leq";
    if (h == "gt") return ">";
    return "\\geq";
  }

  std::string relation(const Expr& e) const {
    return wrap(e.args()[0], kAdd) + " " + relOp(e.head()) + " " + wrap(e.args()[1], kAdd);
  }

  std::string timesSep() const {
    switch (style_.times) {
      case TimesStyle::Juxtapose: return " ";
      case TimesStyle::Cdot: return " \\cdot ";
      case TimesStyle::Star: return " * ";
      case TimesStyle::Times: return " \\times ";
    }
    return " ";
  }

  std::string apply(const Expr& e) const {
    const auto& h = e.head();
    const auto& a = e.args();
    if (relationHeads().contains(h) && h != "chain" && a.size() == 2) return relation(e);
    if (h == "chain") {
      std::string out;
      for (std::size_t i = 0; i < a.size(); ++i) {
        const Expr& line = a[i];
        bool binaryRel = line.isRelation() && line.head() != "chain" && line.args().size() == 2;
        if (!binaryRel) throw std::invalid_argument("chain lines must be binary relations");
        if (i > 0 && a[i - 1].args()[1] == line.args()[0]) {
          out += " " + relOp(line.head()) + " " + wrap(line.args()[1], kAdd);
        } else {
          if (i > 0) out += " \\\\ ";
          out += relation(line);
        }
      }
      return out;
    }
    if ((h == "plus" || h == "minus" || h == "pm" || h == "mp") && (h == "plus" || a.size() == 2)) {
      std::string op = h == "plus" ? " + " : h == "minus" ? " - " : h == "pm" ? " \\pm " : " \\mp ";
      std::string out;
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (i == 0) {
          bool nestedPlus = h == "plus" && a[0].isApply() && a[0].head() == "plus";
          out += nestedPlus || precOf(a[0]) < kAdd ? paren(a[0]) : print(a[0]);
        } else {
          out += op;
          out += wrap(a[i], kProd);
        }
      }
      return out;
    }
    if (h == "neg" && a.size() == 1) {
      bool needs = precOf(a[0]) < kProd || (a[0].isApply() && a[0].head() == "neg");
      return "-" + (needs ? paren(a[0]) : print(a[0]));
    }
    if (h == "times") {
      std::string out;
      for (std::size_t i = 0; i < a.size(); ++i) {
        bool last = i + 1 == a.size();
        bool nestedTimes = a[i].isApply() && a[i].head() == "times";
        std::string f = (nestedTimes || precOf(a[i]) < kProd || (a[i].isBinder() && !last)) ? paren(a[i]) : print(a[i]);
        if (i > 0) {
          bool forced = f.front() == '(' || isDigit(f.front()) || f.front() == '-';
          out += forced && style_.times == TimesStyle::Juxtapose ? " \\cdot " : timesSep();
        }
        out += f;
      }
      return out;
    }
    if (h == "pow" && a.size() == 2) {
      const Expr& b = a[0];
      bool bare = precOf(b) == kPrimary ||
                  (b.isApply() && (b.head() == "sub" || b.head() == "fact") && precOf(b) == kPostfix);
      if (b.isNumber() && b.value() < 0) bare = false;
      return (bare ? print(b) : paren(b)) + "^{" + print(a[1]) + "}";
    }
    if (h == "sub" && a.size() == 2) {
      const Expr& b = a[0];
      bool bare = precOf(b) == kPrimary && !(b.isNumber() && b.value() < 0);
      return (bare ? print(b) : paren(b)) + "_{" + print(a[1]) + "}";
    }
    if (h == "fact" && a.size() == 1) {
      const Expr& b = a[0];
      bool bare = precOf(b) == kPrimary || (precOf(b) == kPostfix && !(b.isApply() && b.head() == "presub"));
      if (b.isNumber() && b.value() < 0) bare = false;
      return (bare ? print(b) : paren(b)) + "!";
    }
    if (h == "presub" && a.size() == 2) {
      const Expr& t = a[1];
      bool bare = precOf(t) >= kPostfix && !(t.isApply() && t.head() == "presub");
      return "{}_{" + print(a[0]) + "}" + (bare ? print(t) : paren(t));
    }
    if (h == "frac" && a.size() == 2) return "\\frac{" + print(a[0]) + "}{" + print(a[1]) + "}";
    if (h == "binom" && a.size() == 2) return "\\binom{" + print(a[0]) + "}{" + print(a[1]) + "}";
    if (h == "sqrt" && a.size() == 1) return "\\sqrt{" + print(a[0]) + "}";
    if (h == "root" && a.size() == 2) return "\\sqrt[" + print(a[0]) + "]{" + print(a[1]) + "}";
    if (h == "log" && a.size() == 2) return "\\log_{" + print(a[0]) + "}(" + print(a[1]) + ")";
    std::string args;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (i) args += ", ";
      args += print(a[i]);
    }
    if (functionNames().contains(h)) return "\\" + h + "(" + args + ")";
    if (h.size() == 1 && isAsciiLetter(h[0])) {
      bool safe = a.size() >= 2 || precOf(a[0]) >= kPostfix;
      if (safe) return h + "(" + args + ")";
    }
    return "\\operatorname{" + h + "}(" + args + ")";
  }

  std::string binder(const Expr& e) const {
    const auto& vars = e.boundVars();
    if (vars.size() > 1) throw std::invalid_argument("LaTeX printing supports one bound variable per binder");
    std::string body = e.body().isApply() && e.body().head() == "times"
                           ? print(e.body())
                           : wrap(e.body(), kProd);
    switch (e.binderKind()) {
      case BinderKind::Sum:
      case BinderKind::Product: {
        std::string out = e.binderKind() == BinderKind::Sum ? "\\sum" : "\\prod";
        if (!vars.empty()) {
          out += "_{" + identifier(vars[0]);
          if (e.lower()) out += "=" + wrap(*e.lower(), kAdd);
          out += "}";
        } else if (e.lower()) {
          throw std::invalid_argument("sum with a lower bound needs an index variable");
        }
        if (e.upper()) out += "^{" + print(*e.upper()) + "}";
        return out + " " + body;
      }
      case BinderKind::Integral: {
        std::string out = "\\int";
        if (e.lower()) out += "_{" + print(*e.lower()) + "}";
        if (e.upper()) out += "^{" + print(*e.upper()) + "}";
        out += " " + body;
        if (!vars.empty()) out += " \\, d" + identifier(vars[0]);
        return out;
      }
      case BinderKind::Lambda: break;
    }
    throw std::invalid_argument("lambda binders have no LaTeX form");
  }

  LatexStyle style_;
};

}  // namespace detail

/// Prints an expression in the LaTeX subset accepted by parseLatex.
inline std::string toLatex(const Expr& e, LatexStyle style = {}) { return detail::LatexPrinter(style).print(e); }

// ---------------------------------------------------------------------------
// Documents

using CharNormalizer = std::function<std::string(std::string_view)>;

/// Splits plain text with $...$, $$...$$, \[...\] and align/equation
/// environments into text and formula fragments.
inline Document parseDocument(std::string_view src, const CharNormalizer& normalizeChars = {},
                              std::string id = {}) {
  Document doc;
  doc.id = std::move(id);
  std::string text;
  std::size_t i = 0;
  auto addFormula = [&](std::string_view raw, std::size_t offset, bool display) {
    doc.addText(std::move(text));
    text.clear();
    std::string trimmed(raw);
    auto notSpace = [](unsigned char c) { return !std::isspace(c); };
    trimmed.erase(trimmed.begin(), std::find_if(trimmed.begin(), trimmed.end(), notSpace));
    trimmed.erase(std::find_if(trimmed.rbegin(), trimmed.rend(), notSpace).base(), trimmed.end());
    std::size_t fragIndex = doc.fragments.size();
    try {
      std::string norm = normalizeChars ? normalizeChars(trimmed) : trimmed;
      doc.addFormula(parseLatex(norm), trimmed, display);
    } catch (const ParseError& e) {
      throw ParseError(offset + e.position(), e.expected(), e.found(), fragIndex);
    }
  };
  static const char* envs[] = {"align*", "align", "equation*", "equation", "gather*", "gather", "eqnarray*", "eqnarray"};
  while (i < src.size()) {
    if (src.compare(i, 2, "\\$") == 0) {
      text += "\\$";
      i += 2;
      continue;
    }
    if (src.compare(i, 2, "$$") == 0) {
      std::size_t close = src.find("$$", i + 2);
      if (close == std::string_view::npos) throw ParseError(i, "closing $$", "", doc.fragments.size());
      addFormula(src.substr(i + 2, close - i - 2), i + 2, true);
      i = close + 2;
      continue;
    }
    if (src.compare(i, 2, "\\[") == 0) {
      std::size_t close = src.find("\\]", i + 2);
      if (close == std::string_view::npos) throw ParseError(i, "closing \\]", "", doc.fragments.size());
      addFormula(src.substr(i + 2, close - i - 2), i + 2, true);
      i = close + 2;
      continue;
    }
    if (src.compare(i, 7, "\\begin{") == 0) {
      bool matched = false;
      for (const char* env : envs) {
        std::string open = std::string("\\begin{") + env + "}";
        if (src.compare(i, open.size(), open) != 0) continue;
        std::string closeTag = std::string("\\end{") + env + "}";
        std::size_t close = src.find(closeTag, i + open.size());
        if (close == std::string_view::npos) throw ParseError(i, closeTag, "", doc.fragments.size());
        addFormula(src.substr(i + open.size(), close - i - open.size()), i + open.size(), true);
        i = close + closeTag.size();
        matched = true;
        break;
      }
      if (matched) continue;
    }
    if (src[i] == '$') {
      std::size_t close = i + 1;
      while (close < src.size() && (src[close] != '$' || src[close - 1] == '\\')) ++close;
      if (close >= src.size()) throw ParseError(i, "closing $", "", doc.fragments.size());
      addFormula(src.substr(i + 1, close - i - 1), i + 1, false);
      i = close + 1;
      continue;
    }
    text += src[i++];
  }
  doc.addText(std::move(text));
  doc.renumber();
  return doc;
}

/// Inverse of parseDocument for documents built from raw sources.
inline std::string writeDocument(const Document& doc) {
  std::string out;
  for (const auto& f : doc.fragments) {
    if (f.isText()) {
      out += f.text().content;
    } else if (f.formula().display) {
      out += "$$" + f.formula().rawSource + "$$";
    } else {
      out += "$" + f.formula().rawSource + "$";
    }
  }
  return out;
}

}  // namespace mathsim

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <boost/rational.hpp>

namespace mathsim {

using Rational = boost::rational<std::int64_t>;

/// Thrown by depthOf / subtreeAt when a child index is out of range.
class InvalidPath : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

enum class BinderKind { Sum, Product, Integral, Lambda };

inline std::string_view binderKindName(BinderKind k) {
  switch (k) {
    case BinderKind::Sum: return "sum";
    case BinderKind::Product: return "product";
    case BinderKind::Integral: return "integral";
    case BinderKind::Lambda: return "lambda";
  }
  return "sum";
}

inline std::optional<BinderKind> binderKindFromName(std::string_view s) {
  if (s == "sum") return BinderKind::Sum;
  if (s == "product") return BinderKind::Product;
  if (s == "integral") return BinderKind::Integral;
  if (s == "lambda") return BinderKind::Lambda;
  return std::nullopt;
}

struct Node;

/// Immutable expression tree handle. Copies share structure.
class Expr {
 public:
  enum class Kind { Number, Identifier, Apply, Binder };

  static Expr number(Rational value);
  static Expr number(std::int64_t value) { return number(Rational(value)); }
  static Expr ident(std::string name, std::optional<std::string> tag = std::nullopt);
  static Expr apply(std::string head, std::vector<Expr> args);
  static Expr binder(BinderKind kind, std::vector<std::string> vars, std::optional<Expr> lower,
                     std::optional<Expr> upper, Expr body);

  Kind kind() const;
  bool isNumber() const { return kind() == Kind::Number; }
  bool isIdentifier() const { return kind() == Kind::Identifier; }
  bool isApply() const { return kind() == Kind::Apply; }
  bool isBinder() const { return kind() == Kind::Binder; }

  const Rational& value() const;
  const std::string& name() const;
  const std::optional<std::string>& tag() const;
  const std::string& head() const;
  const std::vector<Expr>& args() const;
  BinderKind binderKind() const;
  const std::vector<std::string>& boundVars() const;
  const std::optional<Expr>& lower() const;
  const std::optional<Expr>& upper() const;
  const Expr& body() const;

  /// Children in traversal order. Binders yield lower, upper (when present), body.
  std::vector<Expr> children() const;
  std::size_t childCount() const;

  /// Same node with its children replaced, in children() order.
  Expr withChildren(std::vector<Expr> kids) const;

  /// Head symbol, binder kind, identifier name or number literal.
  std::string label() const;

  bool isRelation() const;
  bool sameNode(const Expr& other) const { return node_ == other.node_; }

  friend bool operator==(const Expr& a, const Expr& b);
  friend bool operator!=(const Expr& a, const Expr& b) { return !(a == b); }

 private:
  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;
};

struct NumberNode {
  Rational value;
};
struct IdentifierNode {
  std::string name;
  std::optional<std::string> tag;
};
struct ApplyNode {
  std::string head;
  std::vector<Expr> args;
};
struct BinderNode {
  BinderKind kind;
  std::vector<std::string> vars;
  std::optional<Expr> lower;
  std::optional<Expr> upper;
  Expr body;
};

struct Node {
  std::variant<NumberNode, IdentifierNode, ApplyNode, BinderNode> v;
};

inline const std::set<std::string, std::less<>>& relationHeads() {
  static const std::set<std::string, std::less<>> heads{"eq", "neq", "lt", "leq", "gt", "geq", "chain"};
  return heads;
}

inline Expr Expr::number(Rational value) {
  return Expr(std::make_shared<const Node>(Node{NumberNode{value}}));
}

inline Expr Expr::ident(std::string name, std::optional<std::string> tag) {
  if (name.empty()) throw std::invalid_argument("identifier name must be nonempty");
  return Expr(std::make_shared<const Node>(Node{IdentifierNode{std::move(name), std::move(tag)}}));
}

inline Expr Expr::apply(std::string head, std::vector<Expr> args) {
  if (head.empty()) throw std::invalid_argument("apply head must be nonempty");
  if (args.empty()) throw std::invalid_argument("apply '" + head + "' needs at least one argument");
  return Expr(std::make_shared<const Node>(Node{ApplyNode{std::move(head), std::move(args)}}));
}

inline Expr Expr::binder(BinderKind kind, std::vector<std::string> vars, std::optional<Expr> lower,
                         std::optional<Expr> upper, Expr body) {
  for (std::size_t i = 0; i < vars.size(); ++i)
    for (std::size_t j = i + 1; j < vars.size(); ++j)
      if (vars[i] == vars[j]) throw std::invalid_argument("binder variables must be distinct: " + vars[i]);
  return Expr(std::make_shared<const Node>(
      Node{BinderNode{kind, std::move(vars), std::move(lower), std::move(upper), std::move(body)}}));
}

inline Expr::Kind Expr::kind() const { return static_cast<Kind>(node_->v.index()); }
inline const Rational& Expr::value() const { return std::get<NumberNode>(node_->v).value; }
inline const std::string& Expr::name() const { return std::get<IdentifierNode>(node_->v).name; }
inline const std::optional<std::string>& Expr::tag() const { return std::get<IdentifierNode>(node_->v).tag; }
inline const std::string& Expr::head() const { return std::get<ApplyNode>(node_->v).head; }
inline const std::vector<Expr>& Expr::args() const { return std::get<ApplyNode>(node_->v).args; }
inline BinderKind Expr::binderKind() const { return std::get<BinderNode>(node_->v).kind; }
inline const std::vector<std::string>& Expr::boundVars() const { return std::get<BinderNode>(node_->v).vars; }
inline const std::optional<Expr>& Expr::lower() const { return std::get<BinderNode>(node_->v).lower; }
inline const std::optional<Expr>& Expr::upper() const { return std::get<BinderNode>(node_->v).upper; }
inline const Expr& Expr::body() const { return std::get<BinderNode>(node_->v).body; }

inline std::vector<Expr> Expr::children() const {
  switch (kind()) {
    case Kind::Apply: return args();
    case Kind::Binder: {
      std::vector<Expr> out;
      if (lower()) out.push_back(*lower());
      if (upper()) out.push_back(*upper());
      out.push_back(body());
      return out;
    }
    default: return {};
  }
}

inline std::size_t Expr::childCount() const {
  switch (kind()) {
    case Kind::Apply: return args().size();
    case Kind::Binder: return 1 + (lower() ? 1 : 0) + (upper() ? 1 : 0);
    default: return 0;
  }
}

inline Expr Expr::withChildren(std::vector<Expr> kids) const {
  if (kids.size() != childCount()) throw std::invalid_argument("withChildren: arity mismatch");
  switch (kind()) {
    case Kind::Apply: return apply(head(), std::move(kids));
    case Kind::Binder: {
      std::size_t i = 0;
      std::optional<Expr> lo, hi;
      if (lower()) lo = kids[i++];
      if (upper()) hi = kids[i++];
      return binder(binderKind(), boundVars(), lo, hi, kids[i]);
    }
    default: return *this;
  }
}

inline std::string rationalToString(const Rational& r) {
  std::string s = std::to_string(r.numerator());
  if (r.denominator() != 1) s += "/" + std::to_string(r.denominator());
  return s;
}

inline std::string Expr::label() const {
  switch (kind()) {
    case Kind::Number: return rationalToString(value());
    case Kind::Identifier: return name();
    case Kind::Apply: return head();
    case Kind::Binder: return std::string(binderKindName(binderKind()));
  }
  return {};
}

inline bool Expr::isRelation() const { return isApply() && relationHeads().contains(head()); }

inline bool operator==(const Expr& a, const Expr& b) {
  if (a.node_ == b.node_) return true;
  if (a.kind() != b.kind()) return false;
  switch (a.kind()) {
    case Expr::Kind::Number: return a.value() == b.value();
    case Expr::Kind::Identifier: return a.name() == b.name() && a.tag() == b.tag();
    case Expr::Kind::Apply: return a.head() == b.head() && a.args() == b.args();
    case Expr::Kind::Binder:
      return a.binderKind() == b.binderKind() && a.boundVars() == b.boundVars() && a.lower() == b.lower() &&
             a.upper() == b.upper() && a.body() == b.body();
  }
  return false;
}

// ---------------------------------------------------------------------------
// Tree utilities

inline std::size_t nodeCount(const Expr& e) {
  std::size_t n = 1;
  for (const auto& c : e.children()) n += nodeCount(c);
  return n;
}

/// Node addressed by a child-index path (indices into children()).
inline Expr subtreeAt(const Expr& e, std::span<const std::size_t> path) {
  Expr cur = e;
  for (std::size_t idx : path) {
    auto kids = cur.children();
    if (idx >= kids.size())
      throw InvalidPath("child index " + std::to_string(idx) + " out of range (node has " +
                        std::to_string(kids.size()) + " children)");
    cur = kids[idx];
  }
  return cur;
}

inline std::size_t depthOf(const Expr& e, std::span<const std::size_t> path) {
  subtreeAt(e, path);
  return path.size();
}

inline std::size_t treeHeight(const Expr& e) {
  std::size_t h = 0;
  for (const auto& c : e.children()) h = std::max(h, 1 + treeHeight(c));
  return h;
}

/// Bottom-up rewrite: f is applied to every node after its children were rewritten.
template <typename F>
Expr transformBottomUp(const Expr& e, F&& f) {
  if (e.childCount() == 0) return f(e);
  auto kids = e.children();
  for (auto& k : kids) k = transformBottomUp(k, f);
  return f(e.withChildren(std::move(kids)));
}

/// Pre-order visit of (node, depth).
template <typename F>
void visitPreorder(const Expr& e, F&& f, std::size_t depth = 0) {
  f(e, depth);
  for (const auto& c : e.children()) visitPreorder(c, f, depth + 1);
}

namespace detail {
inline void appendCanonical(const Expr& e, std::string& out) {
  switch (e.kind()) {
    case Expr::Kind::Number: out += rationalToString(e.value()); return;
    case Expr::Kind::Identifier:
      out += e.name();
      if (e.tag()) {
        out += '{';
        out += *e.tag();
        out += '}';
      }
      return;
    case Expr::Kind::Apply:
      out += '(';
      out += e.head();
      for (const auto& a : e.args()) {
        out += ' ';
        appendCanonical(a, out);
      }
      out += ')';
      return;
    case Expr::Kind::Binder:
      out += '(';
      out += binderKindName(e.binderKind());
      out += " [";
      for (std::size_t i = 0; i < e.boundVars().size(); ++i) {
        if (i) out += ' ';
        out += e.boundVars()[i];
      }
      out += "] ";
      if (e.lower()) appendCanonical(*e.lower(), out);
      else out += '_';
      out += ' ';
      if (e.upper()) appendCanonical(*e.upper(), out);
      else out += '_';
      out += ' ';
      appendCanonical(e.body(), out);
      out += ')';
      return;
  }
}
}  // namespace detail

/// Parenthesized prefix serialization, e.g. (eq (pow x (plus t 2)) 1).
/// Binders print as (sum [i] lower upper body) with '_' for an absent bound;
/// tagged identifiers print as name{tag}.
inline std::string canonicalString(const Expr& e) {
  std::string out;
  detail::appendCanonical(e, out);
  return out;
}

/// Names of identifiers not bound by an enclosing binder.
inline void collectFreeIdentifiers(const Expr& e, std::vector<std::string>& bound, std::set<std::string>& out) {
  switch (e.kind()) {
    case Expr::Kind::Identifier:
      if (std::find(bound.begin(), bound.end(), e.name()) == bound.end()) out.insert(e.name());
      return;
    case Expr::Kind::Binder: {
      if (e.lower()) collectFreeIdentifiers(*e.lower(), bound, out);
      if (e.upper()) collectFreeIdentifiers(*e.upper(), bound, out);
      std::size_t mark = bound.size();
      bound.insert(bound.end(), e.boundVars().begin(), e.boundVars().end());
      collectFreeIdentifiers(e.body(), bound, out);
      bound.resize(mark);
      return;
    }
    default:
      for (const auto& c : e.children()) collectFreeIdentifiers(c, bound, out);
  }
}

inline std::set<std::string> freeIdentifiers(const Expr& e) {
  std::vector<std::string> bound;
  std::set<std::string> out;
  collectFreeIdentifiers(e, bound, out);
  return out;
}

/// Every identifier name, including binder variables.
inline std::set<std::string> allIdentifiers(const Expr& e) {
  std::set<std::string> out;
  visitPreorder(e, [&](const Expr& n, std::size_t) {
    if (n.isIdentifier()) out.insert(n.name());
    if (n.isBinder()) out.insert(n.boundVars().begin(), n.boundVars().end());
  });
  return out;
}

// ---------------------------------------------------------------------------
// Documents

struct TextFragment {
  std::string content;
};

struct FormulaFragment {
  Expr expr;
  std::string rawSource;
  bool display = false;
};

struct Fragment {
  std::variant<TextFragment, FormulaFragment> body;
  std::size_t position = 0;

  bool isText() const { return std::holds_alternative<TextFragment>(body); }
  bool isFormula() const { return std::holds_alternative<FormulaFragment>(body); }
  const TextFragment& text() const { return std::get<TextFragment>(body); }
  const FormulaFragment& formula() const { return std::get<FormulaFragment>(body); }
};

struct Document {
  std::string id;
  std::vector<Fragment> fragments;

  /// Renumbers positions 0..n-1 in order.
  void renumber() {
    for (std::size_t i = 0; i < fragments.size(); ++i) fragments[i].position = i;
  }

  std::vector<std::size_t> formulaIndices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fragments.size(); ++i)
      if (fragments[i].isFormula()) out.push_back(i);
    return out;
  }

  std::vector<Expr> formulas() const {
    std::vector<Expr> out;
    for (const auto& f : fragments)
      if (f.isFormula()) out.push_back(f.formula().expr);
    return out;
  }

  void addText(std::string s) {
    if (s.empty()) return;
    fragments.push_back(Fragment{TextFragment{std::move(s)}, fragments.size()});
  }
  void addFormula(Expr e, std::string raw, bool display = false) {
    fragments.push_back(Fragment{FormulaFragment{std::move(e), std::move(raw), display}, fragments.size()});
  }
};

}  // namespace mathsim

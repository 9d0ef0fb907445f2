#include <gtest/gtest.h>

#include <array>
#include <set>

#include "mathsim/expr.hpp"
#include "mathsim/parse.hpp"
#include "oracles.hpp"

using namespace mathsim;

namespace {
Expr x() { return Expr::ident("x"); }
Expr y() { return Expr::ident("y"); }
}  // namespace

TEST(Expr, NodeCount) {
  EXPECT_EQ(nodeCount(x()), 1u);
  EXPECT_EQ(nodeCount(Expr::apply("plus", {x(), y()})), 3u);
  EXPECT_EQ(nodeCount(parseLatex("x^{t+2}=1")), 7u);
}

TEST(Expr, DepthOf) {
  Expr e = parseLatex("x^{t+2}=1");
  EXPECT_EQ(depthOf(e, {}), 0u);
  std::array<std::size_t, 1> one{1};
  EXPECT_EQ(depthOf(Expr::apply("plus", {x(), y()}), one), 1u);
  std::array<std::size_t, 3> toTwo{0, 1, 1};
  EXPECT_EQ(depthOf(e, toTwo), 3u);
  EXPECT_EQ(subtreeAt(e, toTwo), Expr::number(2));
  std::array<std::size_t, 2> bad{0, 5};
  EXPECT_THROW(depthOf(e, bad), InvalidPath);
}

TEST(Expr, CanonicalString) {
  EXPECT_EQ(canonicalString(Expr::number(1)), "1");
  EXPECT_EQ(canonicalString(Expr::apply("plus", {x(), Expr::number(2)})), "(plus x 2)");
  EXPECT_EQ(canonicalString(parseLatex("x^{t+2}=1")), "(eq (pow x (plus t 2)) 1)");
  EXPECT_EQ(canonicalString(Expr::number(Rational(-3, 4))), "-3/4");
  EXPECT_EQ(canonicalString(Expr::ident("x", "real")), "x{real}");
  Expr s = Expr::binder(BinderKind::Sum, {"i"}, Expr::number(1), std::nullopt, Expr::ident("i"));
  EXPECT_EQ(canonicalString(s), "(sum [i] 1 _ i)");
}

TEST(Expr, ConstructionValidates) {
  EXPECT_THROW(Expr::apply("", {x()}), std::invalid_argument);
  EXPECT_THROW(Expr::apply("f", {}), std::invalid_argument);
  EXPECT_THROW(Expr::binder(BinderKind::Sum, {"i", "i"}, std::nullopt, std::nullopt, x()), std::invalid_argument);
}

TEST(Expr, BoundsPresenceMatters) {
  Expr a = Expr::binder(BinderKind::Integral, {"x"}, std::nullopt, std::nullopt, x());
  Expr b = Expr::binder(BinderKind::Integral, {"x"}, Expr::number(0), std::nullopt, x());
  EXPECT_NE(a, b);
}

TEST(Expr, FreeIdentifiers) {
  Expr e = parseLatex("\\sum_{i=1}^{n} i x");
  EXPECT_EQ(freeIdentifiers(e), (std::set<std::string>{"n", "x"}));
  EXPECT_EQ(allIdentifiers(e), (std::set<std::string>{"i", "n", "x"}));
}

TEST(ExprProperty, CanonicalRoundTrip) {
  oracle::ExprGen gen(11);
  for (int i = 0; i < 500; ++i) {
    Expr e = gen.tree(50);
    EXPECT_EQ(parseCanonical(canonicalString(e)), e) << canonicalString(e);
  }
}

TEST(ExprProperty, CanonicalInjective) {
  oracle::ExprGen gen(12);
  std::map<std::string, Expr> seen;
  for (int i = 0; i < 2000; ++i) {
    Expr e = gen.tree(30);
    auto [it, inserted] = seen.emplace(canonicalString(e), e);
    if (!inserted) EXPECT_EQ(it->second, e);
  }
}

TEST(ExprProperty, NodeCountRecurrence) {
  oracle::ExprGen gen(13);
  for (int i = 0; i < 300; ++i) {
    Expr e = gen.tree(50);
    std::size_t sum = 1;
    for (const auto& c : e.children()) sum += nodeCount(c);
    EXPECT_EQ(nodeCount(e), sum);
  }
}

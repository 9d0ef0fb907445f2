#include <gtest/gtest.h>

#include "mathsim/normalize.hpp"
#include "mathsim/semantics.hpp"
#include "oracles.hpp"

using namespace mathsim;

namespace {
Document D(std::string_view src) { return parseDocument(std::string(src), defaultRules(), "doc"); }
Expr C(std::string_view canon) { return parseCanonical(canon); }

Expr stripTags(const Expr& e) {
  return transformBottomUp(e, [](const Expr& n) { return n.isIdentifier() ? Expr::ident(n.name()) : n; });
}

std::size_t taggedCount(const Expr& e) {
  std::size_t k = 0;
  visitPreorder(e, [&](const Expr& n, std::size_t) { k += n.isIdentifier() && n.tag().has_value(); });
  return k;
}
}  // namespace

TEST(ExtractDefinitions, WorkedExamples) {
  auto m = extractDefinitions(D("We have $E=mc^2$ where E is energy."));
  ASSERT_EQ(m.entries.size(), 1u);
  EXPECT_EQ(m.entries.at("E").meaning, "energy");
  EXPECT_EQ(m.entries.at("E").pattern, "where X is Y");
  EXPECT_EQ(m.entries.at("E").fragment, 2u);

  auto c = extractDefinitions(D("$E=mc^2$, where $c$ is the speed of light."));
  ASSERT_TRUE(c.entries.contains("c"));
  EXPECT_EQ(c.entries.at("c").meaning, "speed of light");

  auto plain = extractDefinitions(D("$E=mc^2$. Here c is the speed of light."));
  EXPECT_EQ(plain.entries.at("c").meaning, "speed of light");
  EXPECT_EQ(plain.entries.at("c").pattern, "X is the Y");

  EXPECT_TRUE(extractDefinitions(D("$$x^2+1$$")).empty());
  EXPECT_TRUE(extractDefinitions(Document{}).empty());
}

TEST(ExtractDefinitions, PatternsAndChains) {
  auto m = extractDefinitions(
      D("Let F be the force acting on the body. $F=ma$ where m is the mass and a denotes the acceleration."));
  EXPECT_EQ(m.entries.at("F").meaning, "force acting on the body");
  EXPECT_EQ(m.entries.at("F").pattern, "let X be Y");
  EXPECT_EQ(m.entries.at("m").meaning, "mass");
  EXPECT_EQ(m.entries.at("a").meaning, "acceleration");
  EXPECT_EQ(m.entries.at("a").pattern, "X denotes Y");
  auto g = extractDefinitions(D("$\\alpha + \\beta = \\pi$ where $\\alpha$ is an angle."));
  EXPECT_EQ(g.entries.at("alpha").meaning, "angle");
}

TEST(ExtractDefinitions, OnlyIdentifiersOfNearbyFormulas) {
  // y does not occur in the formula.
  EXPECT_FALSE(extractDefinitions(D("$x+1$ where y is the yield.")).entries.contains("y"));
  // Definitions two text fragments away need a wider window.
  auto src = "$E=mc^2$ first. $$a$$ second. $$b$$ where E is energy.";
  EXPECT_FALSE(extractDefinitions(D(src), 1).entries.contains("E"));
  EXPECT_TRUE(extractDefinitions(D(src), 3).entries.contains("E"));
  EXPECT_TRUE(extractDefinitions(D(src), 0).empty());
}

TEST(ExtractDefinitions, FirstMatchWinsAndConflictsAreRecorded) {
  auto m = extractDefinitions(D("$E=mc^2$ where E is energy. Also E is the expectancy value."));
  EXPECT_EQ(m.entries.at("E").meaning, "energy");
  ASSERT_EQ(m.ambiguous.at("E").size(), 1u);
  EXPECT_EQ(m.ambiguous.at("E")[0].meaning, "expectancy value");
}

TEST(Annotate, Examples) {
  Document d = D("$E=mc^2$ where E is energy.");
  auto m = extractDefinitions(d);
  Document a = annotate(d, m);
  EXPECT_EQ(a.fragments[0].formula().expr, C("(eq E{energy} (times m (pow c 2)))"));
  EXPECT_EQ(a.fragments[0].formula().rawSource, d.fragments[0].formula().rawSource);
  Document same = annotate(d, DefinitionMap{});
  EXPECT_EQ(same.fragments[0].formula().expr, d.fragments[0].formula().expr);
}

TEST(Annotate, BoundIdentifiersAreNotTagged) {
  Document d = D("$I = i + \\sum_{i=1}^{n} i^2$ where i is current.");
  auto m = extractDefinitions(d);
  ASSERT_EQ(m.entries.at("i").meaning, "current");
  Expr e = annotate(d, m).fragments[0].formula().expr;
  EXPECT_EQ(taggedCount(e), 1u);
  auto sum = e.args()[1].args()[1];
  ASSERT_TRUE(sum.isBinder());
  EXPECT_EQ(taggedCount(sum), 0u);
  // Only bound occurrences: nothing to define.
  EXPECT_FALSE(extractDefinitions(D("$\\sum_{i=1}^{n} i^2$ where i is current.")).entries.contains("i"));
}

TEST(SemanticCompatibility, Examples) {
  EXPECT_DOUBLE_EQ(semanticCompatibility(C("(eq E (times m c))"), C("(eq E (times m c))")), 1.0);
  EXPECT_DOUBLE_EQ(semanticCompatibility(C("E{energy}"), C("(plus E{energy} 1)")), 1.0);
  EXPECT_DOUBLE_EQ(semanticCompatibility(C("E{energy}"), C("E{expectancy value}")), 0.5);
  EXPECT_DOUBLE_EQ(semanticCompatibility(C("(plus E{energy} m{mass})"), C("(plus E{ev} m{meters})")), 0.25);
  EXPECT_DOUBLE_EQ(semanticCompatibility(C("E{energy}"), C("E{expectancy value}"), 0.2), 0.2);
  EXPECT_THROW(semanticCompatibility(C("x"), C("x"), 1.5), std::invalid_argument);
}

TEST(SemanticsProperty, ExtractionNeverInventsIdentifiers) {
  oracle::ExprGen gen(91, true);
  const std::vector<std::string> letters{"a", "b", "c", "x", "y", "z", "n", "k", "t", "E", "m"};
  const std::vector<std::string> templates{"where {} is the {}", "let {} be {}", "{} denotes {}", "{} is {}"};
  for (int i = 0; i < 300; ++i) {
    std::string src;
    for (int part = 0; part < 4; ++part) {
      Expr f = gen.tree(12);
      src += "$" + toLatex(f) + "$ ";
      std::string t = gen.pick(templates);
      t.replace(t.find("{}"), 2, gen.pick(letters));
      t.replace(t.find("{}"), 2, gen.pick(std::vector<std::string>{"energy", "mass", "speed of light", "count"}));
      src += t + ". ";
    }
    Document d = D(src);
    auto m = extractDefinitions(d, 1 + gen.below(2));
    std::set<std::string> names;
    for (const auto& f : d.formulas())
      for (const auto& n : freeIdentifiers(f)) names.insert(n);
    for (const auto& [name, def] : m.entries) {
      EXPECT_TRUE(names.contains(name)) << name << " in " << src;
      EXPECT_FALSE(def.meaning.empty());
      ASSERT_LT(def.fragment, d.fragments.size());
      EXPECT_TRUE(d.fragments[def.fragment].isText());
    }
  }
}

TEST(SemanticsProperty, AnnotatePreservesShape) {
  oracle::ExprGen gen(92, true);
  for (int i = 0; i < 500; ++i) {
    Expr e = gen.tree(30);
    DefinitionMap m;
    for (const auto& n : allIdentifiers(e))
      if (gen.coin(50)) m.entries[n] = {"concept " + n, 0, "X is Y"};
    Expr a = annotate(e, m);
    EXPECT_EQ(stripTags(a), e) << canonicalString(e);
    EXPECT_EQ(nodeCount(a), nodeCount(e));
    // Identifiers outside the map are untouched, so every tagged name is mapped.
    visitPreorder(a, [&](const Expr& n, std::size_t) {
      if (n.isIdentifier() && n.tag()) EXPECT_EQ(*n.tag(), m.entries.at(n.name()).meaning);
      if (n.isIdentifier() && !m.entries.contains(n.name())) EXPECT_FALSE(n.tag());
    });
  }
}

TEST(SemanticsProperty, CompatibilitySymmetricAndNeutralWhenUntagged) {
  oracle::ExprGen gen(93);
  for (int i = 0; i < 1000; ++i) {
    Expr a = gen.tree(20), b = gen.tree(20);
    double s = semanticCompatibility(a, b);
    EXPECT_EQ(s, semanticCompatibility(b, a));
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
    EXPECT_EQ(semanticCompatibility(stripTags(a), b), 1.0);
    EXPECT_EQ(semanticCompatibility(a, stripTags(b)), 1.0);
  }
}

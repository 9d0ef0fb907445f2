#include <gtest/gtest.h>

#include "mathsim/normalize.hpp"
#include "oracles.hpp"

using namespace mathsim;

namespace {
const RuleTable& R() { return defaultRules(); }
Expr P(std::string_view latex) { return parseFormula(latex, R()); }
Expr C(std::string_view canon) { return parseCanonical(canon); }
std::string S(const Expr& e) { return canonicalString(e); }

const char* kRadial =
    "R_{p q}(r) = \\sum_{i=0}^{(p-q)/2} (-1)^i \\frac{(p-i)!}{i! ((p+q)/2-i)! ((p-q)/2-i)!} r^{p-2i}";
const char* kRadialRenamed =
    "R_{n l}(r) = \\sum_{j=0}^{(n-l)/2} (-1)^j \\frac{(n-j)!}{j! ((n+l)/2-j)! ((n-l)/2-j)!} r^{n-2j}";
}  // namespace

TEST(NormalizeChars, Examples) {
  EXPECT_EQ(normalizeChars("x \xe2\x88\x92 2", R()), normalizeChars("x - 2", R()));
  EXPECT_EQ(normalizeChars("x \xe2\x88\x92 2", R()).find("\xe2\x88\x92"), std::string::npos);
  EXPECT_EQ(normalizeChars("x  +   2 =  1", R()), "x+2=1");
  EXPECT_EQ(normalizeChars("", R()), "");
  EXPECT_EQ(normalizeChars("\\sin   x + \\cdot y", R()), "\\sin x+\\cdot y");
  EXPECT_EQ(normalizeChars("\xd1\x85^2", R()), "x^2");  // Cyrillic x
  EXPECT_EQ(normalizeChars("a \\, b \\\\ c", R()), "a\\,b\\\\c");
}

TEST(NormalizeChars, HomoglyphMinusVariants) {
  Expr ascii = P("a - b");
  for (const char* dash : {"\xe2\x88\x92", "\xe2\x80\x93", "\xe2\x80\x90"}) {
    EXPECT_EQ(P(std::string("a ") + dash + " b"), ascii) << dash;
  }
}

TEST(Synonyms, BinomialForms) {
  const Expr binom = C("(binom n k)");
  for (const char* src : {"C(n,k)", "{}_{n}C_{k}", "C_k^n", "C^n_k", "\\frac{n!}{k!(n-k)!}", "\\frac{n!}{(n-k)!k!}",
                          "\\binom{n}{k}", "{n \\choose k}"}) {
    EXPECT_EQ(normalizeSynonyms(P(src), R()), binom) << src;
  }
  EXPECT_EQ(normalizeSynonyms(binom, R()), binom);
  EXPECT_EQ(S(normalizeSynonyms(P("\\frac{m!}{k!(n-k)!}"), R())), S(P("\\frac{m!}{k!(n-k)!}")));
}

TEST(Synonyms, DivergenceIsReported) {
  nlohmann::json j = {{"synonyms", {{{"name", "grow"}, {"pattern", "(f ?x)"}, {"replacement", "(g (f ?x))"}}}}};
  EXPECT_THROW(RuleTable::fromJson(j), RuleError);
  RuleTable t;
  t.synonyms.push_back({"grow", C("(f ?x)"), C("(f (f ?x))")});
  t.stepBudget = 50;
  EXPECT_THROW(normalizeSynonyms(C("(f a)"), t), RuleDivergence);
}

TEST(Commute, Examples) {
  EXPECT_EQ(normalize(P("1 = x^{2+t}"), NormLevel::Commute, R()), normalize(P("x^{t+2} = 1"), NormLevel::Commute, R()));
  EXPECT_EQ(S(orderCommutative(C("(plus b a)"), R())), "(plus a b)");
  EXPECT_EQ(S(orderCommutative(C("(times (plus c a) b)"), R())), "(times b (plus a c))");
  EXPECT_EQ(S(orderCommutative(C("(plus (plus c b) a)"), R())), "(plus a b c)");
  EXPECT_EQ(S(orderCommutative(C("(minus b a)"), R())), "(minus b a)");
}

TEST(Alpha, Examples) {
  EXPECT_EQ(alphaCanonicalize(P("\\sum_{a=1}^{n} a^2")), P("\\sum_{\\mathrm{b1}=1}^{n} \\mathrm{b1}^2"));
  EXPECT_EQ(alphaCanonicalize(P("\\sum_{a=1}^{n} a^2")), alphaCanonicalize(P("\\sum_{i=1}^{n} i^2")));
  Expr plain = P("x + y^2");
  EXPECT_EQ(alphaCanonicalize(plain), plain);
  Expr nested = C("(sum [a] 1 n (times a (sum [a] 1 a a)))");
  EXPECT_EQ(S(alphaCanonicalize(nested)), "(sum [b1] 1 n (times b1 (sum [b2] 1 b1 b2)))");
  EXPECT_EQ(S(alphaCanonicalize(C("(sum [i] 1 n (plus i b1))"))), "(sum [b2] 1 n (plus b2 b1))");
}

TEST(FullRename, Examples) {
  EXPECT_EQ(S(fullRenameCanonicalize(C("(eq (plus a b) (pow a 2))"))), "(eq (plus v1 v2) (pow v1 2))");
  EXPECT_EQ(S(fullRenameCanonicalize(C("(eq (plus x y) (pow z 2))"))), "(eq (plus v1 v2) (pow v3 2))");
  EXPECT_EQ(S(fullRenameCanonicalize(C("x"))), "v1");
  EXPECT_TRUE(renameEquivalent(P("a+b=a^2"), P("x+y=x^2")));
  EXPECT_FALSE(renameEquivalent(P("a+b=a^2"), P("x+y=z^2")));
}

TEST(Equiv, LogarithmQuotient) {
  Expr e1 = P("\\log_a\\left(\\frac{x+2}{y^2}\\right)");
  Expr e2 = P("\\log_a(x+2) - \\log_a(y^2)");
  EXPECT_EQ(applyEquivRules(e1, R()), applyEquivRules(e2, R()));
  EXPECT_EQ(normalize(e1, NormLevel::Commute, R(), true), normalize(e2, NormLevel::Commute, R(), true));
  EXPECT_NE(normalize(e1, NormLevel::FullRename, R(), false), normalize(e2, NormLevel::FullRename, R(), false));
}

TEST(Equiv, FractionDistribution) {
  EXPECT_EQ(applyEquivRules(P("\\frac{a+b+c}{n}"), R()), applyEquivRules(P("\\frac{a}{n}+\\frac{b}{n}+\\frac{c}{n}"), R()));
  Expr plain = P("x^2 + 1");
  EXPECT_EQ(applyEquivRules(plain, R()), plain);
  EXPECT_EQ(S(applyEquivRules(P("\\frac{a+b}{n}"), R(), Orientation::Forward)), "(plus (frac a n) (frac b n))");
}

TEST(Normalize, Levels) {
  Expr e = P("x^{t+2}=1");
  EXPECT_EQ(normalize(e, NormLevel::Chars, R()), e);
  EXPECT_EQ(normalize(P(kRadial), NormLevel::FullRename, R()), normalize(P(kRadialRenamed), NormLevel::FullRename, R()));
  EXPECT_NE(normalize(P(kRadial), NormLevel::Commute, R()), normalize(P(kRadialRenamed), NormLevel::Commute, R()));
  EXPECT_EQ(normLevelFromName("alpha"), NormLevel::AlphaBound);
  EXPECT_FALSE(normLevelFromName("bogus").has_value());
}

TEST(RuleTableLoad, Validation) {
  EXPECT_NO_THROW(R().validate());
  EXPECT_TRUE(R().literalNames().contains("C"));
  nlohmann::json unbound = {{"synonyms", {{{"pattern", "(f ?x)"}, {"replacement", "(g ?y)"}}}}};
  EXPECT_THROW(RuleTable::fromJson(unbound), RuleError);
  nlohmann::json cyc = {{"synonyms", {{{"name", "a"}, {"pattern", "(f ?x)"}, {"replacement", "(g ?x)"}},
                                      {{"name", "b"}, {"pattern", "(g ?x)"}, {"replacement", "(f ?x)"}}}}};
  EXPECT_THROW(RuleTable::fromJson(cyc), RuleError);
  EXPECT_THROW(RuleTable::load("/nonexistent/rules.json"), RuleError);
}

namespace {
const std::array<NormLevel, 5> kLevels{NormLevel::Chars, NormLevel::Synonyms, NormLevel::Commute,
                                       NormLevel::AlphaBound, NormLevel::FullRename};

bool sortedEverywhere(const Expr& e) {
  bool ok = true;
  visitPreorder(e, [&](const Expr& n, std::size_t) {
    if (n.isApply() && R().commutativeHeads.contains(n.head()))
      for (std::size_t i = 1; i < n.args().size(); ++i)
        if (detail::sortKey(n.args()[i], OrderKey::Plain) < detail::sortKey(n.args()[i - 1], OrderKey::Plain)) ok = false;
  });
  return ok;
}

bool sameShape(const Expr& a, const Expr& b) {
  if (a.kind() != b.kind() || a.childCount() != b.childCount()) return false;
  if (a.isApply() && a.head() != b.head()) return false;
  if (a.isBinder() && (a.binderKind() != b.binderKind() || a.boundVars().size() != b.boundVars().size())) return false;
  auto ka = a.children(), kb = b.children();
  for (std::size_t i = 0; i < ka.size(); ++i)
    if (!sameShape(ka[i], kb[i])) return false;
  return true;
}
}  // namespace

TEST(NormalizeProperty, Idempotent) {
  oracle::ExprGen gen(31, true);
  for (int i = 0; i < 400; ++i) {
    Expr e = gen.tree(40);
    for (auto l : kLevels)
      for (bool eq : {false, true}) {
        Expr once = normalize(e, l, R(), eq);
        EXPECT_EQ(normalize(once, l, R(), eq), once) << S(e) << " level " << normLevelName(l);
      }
  }
}

TEST(NormalizeProperty, CommuteOutputSorted) {
  oracle::ExprGen gen(32, true);
  for (int i = 0; i < 400; ++i) {
    Expr e = gen.tree(40);
    EXPECT_TRUE(sortedEverywhere(orderCommutative(e, R()))) << S(e);
  }
}

TEST(NormalizeProperty, AlphaPreservesShape) {
  oracle::ExprGen gen(33, true);
  for (int i = 0; i < 400; ++i) {
    Expr e = gen.tree(50);
    EXPECT_TRUE(sameShape(alphaCanonicalize(e), e)) << S(e);
  }
}

TEST(NormalizeProperty, FullRenameInvariant) {
  oracle::ExprGen gen(34, true);
  std::mt19937_64 rng(9);
  for (int i = 0; i < 400; ++i) {
    Expr e = gen.tree(50);
    Expr renamed = oracle::renameAll(e, oracle::randomRenaming(e, rng));
    EXPECT_EQ(fullRenameCanonicalize(renamed), fullRenameCanonicalize(e)) << S(e);
  }
}

TEST(NormalizeProperty, FullRenameLevelInvariant) {
  oracle::ExprGen gen(35, true);
  std::mt19937_64 rng(10);
  int failures = 0;
  for (int i = 0; i < 1500; ++i) {
    Expr e = gen.tree(40);
    auto sigma = oracle::randomRenaming(e, rng);
    for (const auto& lit : R().literalNames()) sigma.erase(lit);
    Expr renamed = oracle::renameAll(e, sigma);
    if (normalize(renamed, NormLevel::FullRename, R()) != normalize(e, NormLevel::FullRename, R())) {
      ++failures;
      ADD_FAILURE() << S(e) << "\n" << S(renamed);
    }
  }
  EXPECT_EQ(failures, 0);
}

TEST(NormalizeProperty, MonotoneMerging) {
  oracle::ExprGen gen(36, true);
  std::mt19937_64 rng(11);
  for (int i = 0; i < 300; ++i) {
    Expr a = gen.tree(30);
    // b is a variant that merges with a at some level: reorder commutative args or rename.
    Expr b = (i % 2) ? orderCommutative(a, R()) : oracle::renameAll(a, oracle::randomRenaming(a, rng));
    for (std::size_t l = 0; l < kLevels.size(); ++l) {
      if (normalize(a, kLevels[l], R()) != normalize(b, kLevels[l], R())) continue;
      for (std::size_t m = l; m < kLevels.size(); ++m)
        EXPECT_EQ(normalize(a, kLevels[m], R()), normalize(b, kLevels[m], R())) << S(a);
      break;
    }
  }
}

TEST(NormalizeProperty, AlphaLevelInvariant) {
  oracle::ExprGen gen(37, true);
  std::mt19937_64 rng(12);
  for (int i = 0; i < 600; ++i) {
    Expr e = gen.tree(50);
    Expr renamed = oracle::renameBound(e, rng);
    ASSERT_TRUE(alphaEquivalent(e, renamed));
    EXPECT_EQ(normalize(renamed, NormLevel::AlphaBound, R()), normalize(e, NormLevel::AlphaBound, R())) << S(e);
  }
}

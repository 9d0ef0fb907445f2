#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mathsim/hybrid.hpp"
#include "mathsim/normalize.hpp"
#include "oracles.hpp"

using namespace mathsim;

namespace {
const Taxonomy& T() { return defaultTaxonomy(); }
Expr P(std::string_view latex) { return parseFormula(latex, defaultRules()); }
Expr C(std::string_view canon) { return parseCanonical(canon); }

// Brute-force assignment oracle over all injective row-to-column maps.
double bruteAssignment(const std::vector<std::vector<double>>& w) {
  std::size_t rows = w.size(), cols = w.front().size();
  std::vector<std::size_t> perm(std::max(rows, cols));
  std::iota(perm.begin(), perm.end(), 0);
  double best = 0;
  do {
    double s = 0;
    for (std::size_t i = 0; i < rows; ++i)
      if (perm[i] < cols) s += w[i][perm[i]];
    best = std::max(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

TEST(Taxonomy, Examples) {
  EXPECT_DOUBLE_EQ(taxonomicSim("plus", "plus", T(), 0.5), 1.0);
  EXPECT_DOUBLE_EQ(taxonomicSim("plus", "minus", T(), 0.5), 1.0);
  // additive -> arithmetic -> root -> functions -> trigonometric
  EXPECT_EQ(T().distance("plus", "cos"), 4u);
  EXPECT_DOUBLE_EQ(taxonomicSim("plus", "cos", T(), 0.5), 0.0625);
  EXPECT_EQ(T().categoryName(T().categoryOf("somefunction")), "unknown");
  EXPECT_EQ(T().categoryOf("f"), T().categoryOf("g"));
  EXPECT_GE(T().symbolCount(), 40u);
}

TEST(Taxonomy, RejectsInvalidFiles) {
  auto dup = nlohmann::json::parse(
      R"({"name":"r","children":[{"name":"a","symbols":["x"]},{"name":"unknown","symbols":["x"]}]})");
  EXPECT_THROW(Taxonomy::fromJson(dup), TaxonomyError);
  auto noUnknown = nlohmann::json::parse(R"({"name":"r","children":[{"name":"a","symbols":["x"]}]})");
  EXPECT_THROW(Taxonomy::fromJson(noUnknown), TaxonomyError);
  EXPECT_THROW(Taxonomy::load("/nonexistent/taxonomy.json"), TaxonomyError);
}

TEST(TypeLevel, Examples) {
  EXPECT_DOUBLE_EQ(typeLevelSim(C("x"), C("y")), 1.0);
  EXPECT_DOUBLE_EQ(typeLevelSim(C("x"), C("(f x)")), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(typeLevelSim(C("3"), C("(eq x 1)")), 0.0);
}

TEST(DepthPenalty, Examples) {
  for (auto d : {DepthDecay::Linear, DepthDecay::Quadratic, DepthDecay::Exponential}) {
    HybridParams p;
    p.decay = d;
    EXPECT_DOUBLE_EQ(depthPenalty(0, p), 1.0);
    for (std::size_t k = 0; k < 5; ++k) EXPECT_GE(depthPenalty(k, p), depthPenalty(k + 1, p));
    EXPECT_GT(depthPenalty(0, p), depthPenalty(1, p));
  }
  HybridParams p;
  EXPECT_NEAR(depthPenalty(2, p), std::exp(-1.0), 1e-12);
  // Match at increasing depths E1 < E2 < E3.
  Expr q = P("x^{t+2}=1");
  Expr e1 = Expr::apply("f", {q});
  Expr e2 = Expr::apply("f", {e1});
  Expr e3 = Expr::apply("f", {e2});
  double s1 = simHybrid(q, e1), s2 = simHybrid(q, e2), s3 = simHybrid(q, e3);
  EXPECT_GT(s1, s2);
  EXPECT_GT(s2, s3);
}

TEST(Params, ValidationAndJson) {
  HybridParams bad;
  bad.gamma = 1.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = {};
  bad.lambda = 0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = {};
  bad.taxWeight = -1;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  auto p = HybridParams::fromJson(nlohmann::json::parse(
      R"({"tax_weight":3,"type_weight":2,"coverage_weight":5,"depth_decay":"linear","lambda":0.25})"));
  EXPECT_DOUBLE_EQ(p.taxWeight, 0.3);
  EXPECT_DOUBLE_EQ(p.coverageWeight, 0.5);
  EXPECT_EQ(p.decay, DepthDecay::Linear);
  EXPECT_THROW(HybridParams::fromJson(nlohmann::json::parse(R"({"depth_decay":"cubic"})")), std::invalid_argument);
}

TEST(Assignment, MatchesBruteForce) {
  std::mt19937_64 rng(81);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int t = 0; t < 500; ++t) {
    std::size_t r = 1 + rng() % 5, c = 1 + rng() % 5;
    std::vector<std::vector<double>> w(r, std::vector<double>(c));
    for (auto& row : w)
      for (auto& x : row) x = rng() % 4 == 0 ? 0.0 : u(rng);
    EXPECT_NEAR(maxWeightAssignment(w), bruteAssignment(w), 1e-9);
  }
}

TEST(SimHybrid, Examples) {
  Expr q = P("x^{t+2}=1");
  EXPECT_EQ(simHybrid(q, q), 1.0);
  Expr nested = P("g(x^{t+2}=1, y)");
  EXPECT_LT(simHybrid(q, nested), simHybrid(q, q));
  // Frozen regression value.
  EXPECT_NEAR(simHybrid(q, nested), 0.54587759374137013, 1e-12);
  // No shared symbol or structure: no node can anchor the query root.
  double disjoint = simHybrid(P("a+b"), P("\\cos y"));
  EXPECT_LT(disjoint, 0.2);
  EXPECT_EQ(disjoint, 0.0);
  EXPECT_EQ(simHybrid(P("a+b"), P("7")), 0.0);
  // Root in the same category, leaves differ: M = (1 + 0.4 + 0.4) / 3, coverage 0.
  EXPECT_NEAR(simHybrid(P("a+b"), P("x-y")), 0.5 * 0.6, 1e-12);
}

TEST(SimHybrid, FormulaBoost) {
  Expr rel = P("a+b=c");
  Expr expr = P("(a+b=c)+1");
  // Without a relation at the candidate root the best anchor score is damped.
  HybridParams noBoost;
  noBoost.formulaBoost = 1.0;
  EXPECT_NEAR(simHybrid(rel, expr), 0.9 * simHybrid(rel, expr, T(), noBoost), 1e-12);
  Expr x = P("a+b");
  EXPECT_EQ(simHybrid(x, x), 1.0);
}

TEST(QueryCoverage, Examples) {
  Expr e = P("\\sum_{i=1}^{n} i^2");
  EXPECT_DOUBLE_EQ(queryCoverage(e, e), 1.0);
  EXPECT_DOUBLE_EQ(queryCoverage(C("(plus a b)"), C("(times 3 y)")), 0.0);
  EXPECT_DOUBLE_EQ(queryCoverage(C("(plus a b)"), C("(plus a c)")), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(hybridMatch(C("(plus a b)"), C("(plus a c)")).coverage, 2.0 / 3.0);
}

TEST(HybridProperty, IdentityIsExactlyOne) {
  oracle::ExprGen gen(82);
  std::mt19937_64 rng(82);
  for (int i = 0; i < 500; ++i) {
    Expr e = gen.tree(40);
    EXPECT_EQ(simHybrid(e, e), 1.0) << canonicalString(e);
    EXPECT_EQ(simHybrid(e, e, T(), oracle::randomParams(rng)), 1.0) << canonicalString(e);
  }
}

TEST(HybridProperty, Bounded) {
  oracle::ExprGen gen(83);
  std::mt19937_64 rng(83);
  for (int i = 0; i < 1000; ++i) {
    Expr a = gen.tree(30), b = gen.tree(30);
    double s = simHybrid(a, b, T(), oracle::randomParams(rng));
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
    double c = queryCoverage(a, b);
    EXPECT_GE(c, 0.0);
    EXPECT_LE(c, 1.0);
  }
}

TEST(HybridProperty, PruningCandidateNeverIncreasesScore) {
  oracle::ExprGen gen(84);
  std::mt19937_64 rng(84);
  int pruned = 0;
  for (int i = 0; i < 2500; ++i) {
    Expr q = gen.tree(15);
    Expr cand = gen.coin(50) ? Expr::apply("plus", {q, gen.tree(15)}) : gen.tree(30);
    HybridParams p = i % 2 ? HybridParams{} : oracle::randomParams(rng);
    Expr cur = cand;
    double before = simHybrid(q, cur, T(), p);
    for (int step = 0; step < 4; ++step) {
      auto next = oracle::pruneRandom(cur, gen);
      if (!next) break;
      double after = simHybrid(q, *next, T(), p);
      EXPECT_LE(after, before + 1e-12) << canonicalString(q) << " | " << canonicalString(cur) << " -> "
                                       << canonicalString(*next);
      cur = *next;
      before = after;
      ++pruned;
    }
  }
  EXPECT_GT(pruned, 1000);
}

TEST(HybridProperty, WrappingIsNonIncreasingInDepth) {
  oracle::ExprGen gen(85);
  std::mt19937_64 rng(85);
  const std::vector<std::string> wrappers{"f", "g", "sin", "plus", "times", "eq", "sqrt", "neg"};
  for (int i = 0; i < 600; ++i) {
    Expr q = gen.tree(15);
    HybridParams p = i % 2 ? HybridParams{} : oracle::randomParams(rng);
    // Layers must not themselves be candidates for the query root.
    std::vector<std::string> heads;
    while (heads.size() < 6) {
      const auto& h = gen.pick(wrappers);
      bool compoundRoot = q.isApply() || q.isBinder();
      if (!compoundRoot || T().categoryOf(h) != T().categoryOf(q.label())) heads.push_back(h);
    }
    Expr cand = q;
    double prev = simHybrid(q, cand, T(), p);
    for (const auto& h : heads) {
      cand = Expr::apply(h, {cand});
      double s = simHybrid(q, cand, T(), p);
      EXPECT_LE(s, prev + 1e-12) << canonicalString(q) << " in " << canonicalString(cand);
      prev = s;
    }
  }
}

TEST(HybridProperty, ScalingWeightsKeepsRanking) {
  oracle::ExprGen gen(86);
  std::mt19937_64 rng(86);
  for (int i = 0; i < 100; ++i) {
    Expr q = gen.tree(12);
    std::vector<Expr> cands;
    for (int k = 0; k < 6; ++k) cands.push_back(gen.tree(25));
    HybridParams p = oracle::randomParams(rng), scaled = p;
    double f = 0.1 + 10.0 * (rng() % 100) / 100.0;
    scaled.taxWeight *= f;
    scaled.typeWeight *= f;
    scaled.coverageWeight *= f;
    auto rank = [&](const HybridParams& params) {
      std::vector<std::pair<double, std::size_t>> r;
      for (std::size_t k = 0; k < cands.size(); ++k) r.push_back({simHybrid(q, cands[k], T(), params), k});
      std::stable_sort(r.begin(), r.end(), [](auto& x, auto& y) { return x.first > y.first; });
      std::vector<std::size_t> order;
      for (auto& [s, k] : r) order.push_back(k);
      return order;
    };
    EXPECT_EQ(rank(p), rank(scaled));
  }
}

#include <gtest/gtest.h>

#include "mathsim/obfuscate.hpp"
#include "mathsim/structural.hpp"
#include "oracles.hpp"

using namespace mathsim;

namespace {
const RuleTable& R() { return defaultRules(); }
Document D(std::string_view src, std::string id = "doc") { return parseDocument(std::string(src), R(), id); }
Expr P(std::string_view latex) { return parseFormula(latex, R()); }
Expr C(std::string_view canon) { return parseCanonical(canon); }

const char* kBernoulli =
    "By induction, \\begin{align*}(1+x)^{t+1} &= (1+x)^t \\cdot (1+x)\\\\ &\\geq (1+tx)(1+x)\\\\ "
    "&= 1 + x + tx + tx^2\\\\ &\\geq 1 + (t+1)x\\end{align*} which proves the claim.";

Expr strongest(const Expr& e) { return normalize(e, NormLevel::FullRename, R(), true); }

std::size_t countFormulas(const Document& d) { return d.formulaIndices().size(); }

// A random document of inline and display formulas separated by prose.
Document randomDoc(oracle::ExprGen& gen, const std::string& id) {
  std::string src = "We show that ";
  std::size_t n = 1 + gen.below(3);
  for (std::size_t i = 0; i < n; ++i) {
    Expr f = gen.tree(25);
    src += gen.coin(50) ? "$" + toLatex(f) + "$" : "$$" + toLatex(f) + "$$";
    src += i + 1 < n ? " and therefore " : ".";
  }
  return D(src, id);
}

void expectFormulasParseFromRaw(const Document& d) {
  for (const auto& f : d.fragments)
    if (f.isFormula()) EXPECT_EQ(f.formula().expr, P(f.formula().rawSource)) << f.formula().rawSource;
}
}  // namespace

TEST(ObfKinds, Names) {
  EXPECT_EQ(kAllObfKinds.size(), 7u);
  for (auto k : kAllObfKinds) EXPECT_EQ(obfKindFromName(obfKindName(k)), k);
  EXPECT_THROW(obfKindFromName("paraphrase"), std::invalid_argument);
}

TEST(CopyPaste, FormulasIdenticalTextReworded) {
  Document d = D("We show that $E=mc^2$ holds. Therefore $x^2 \\geq 0$.");
  auto o = obfCopyPaste(d);
  EXPECT_EQ(o.doc.formulas(), d.formulas());
  EXPECT_EQ(o.doc.fragments[0].text().content, "We demonstrate that ");
  EXPECT_EQ(o.doc.fragments[2].text().content, " is true. Hence ");
  EXPECT_FALSE(o.notes.empty());
  EXPECT_TRUE(obfCopyPaste(Document{}).doc.fragments.empty());
}

TEST(Notational, BinomialAndFractionExamples) {
  Document d = D("$\\binom{n}{k}$");
  bool sawFunction = false;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    auto o = obfNotational(d, R(), seed);
    const auto& raw = o.doc.fragments[0].formula().rawSource;
    sawFunction |= o.doc.formulas()[0] == C("(C n k)");
    EXPECT_EQ(normalize(o.doc.formulas()[0], NormLevel::Synonyms, R()), C("(binom n k)")) << raw;
    EXPECT_FALSE(o.notes.empty());
  }
  EXPECT_TRUE(sawFunction);

  Document f = D("$\\frac{a+b+c}{n}$");
  bool distributed = false;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Expr e = obfNotational(f, R(), seed).doc.formulas()[0];
    distributed |= e == P("\\frac{a}{n}+\\frac{b}{n}+\\frac{c}{n}");
    EXPECT_EQ(strongest(e), strongest(f.formulas()[0]));
  }
  EXPECT_TRUE(distributed);
  EXPECT_THROW(obfNotational(D("only prose"), R(), 1), ObfuscationError);
}

TEST(Notational, Deterministic) {
  Document d = D(kBernoulli);
  EXPECT_EQ(writeDocument(obfNotational(d, R(), 7).doc), writeDocument(obfNotational(d, R(), 7).doc));
  EXPECT_EQ(obfNotational(d, R(), 7).notes, obfNotational(d, R(), 7).notes);
}

TEST(Rename, Examples) {
  Document d = D("$a+b=a^2$");
  auto o = obfRename(d, R(), 3);
  Expr v = o.doc.formulas()[0];
  ASSERT_TRUE(v.isRelation());
  Expr lhs = v.args()[0];
  EXPECT_EQ(v.args()[1].args()[0], lhs.args()[0]);  // both a's renamed together
  EXPECT_NE(lhs.args()[0], lhs.args()[1]);
  EXPECT_TRUE(allIdentifiers(v).count("a") == 0 && allIdentifiers(v).count("b") == 0);
  EXPECT_TRUE(renameEquivalent(d.formulas()[0], v));

  Document none = D("$1+2=3$ text");
  EXPECT_TRUE(sameContent(obfRename(none, R(), 3).doc, none));
}

TEST(Rename, ConsistentAcrossDocumentAndKeepsLiterals) {
  Document d = D("$\\sum_{i=1}^{n} i = x$ and $y = {}_{n}C_{k} + x$");
  auto o = obfRename(d, R(), 11);
  auto f = o.doc.formulas();
  auto x1 = f[0].args()[1];
  auto x2 = f[1].args()[1].args()[1];
  EXPECT_EQ(x1, x2);
  EXPECT_TRUE(allIdentifiers(f[1]).contains("C"));
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_TRUE(renameEquivalent(d.formulas()[i], f[i]));
}

TEST(Split, BernoulliChain) {
  Document d = D(kBernoulli);
  ASSERT_EQ(countFormulas(d), 1u);
  auto o = obfSplit(d, R(), 5);
  ASSERT_EQ(countFormulas(o.doc), 3u);
  auto idx = o.doc.formulaIndices();
  // Filler text between consecutive parts.
  for (std::size_t k = 0; k + 1 < idx.size(); ++k) {
    ASSERT_EQ(idx[k + 1], idx[k] + 2);
    EXPECT_TRUE(o.doc.fragments[idx[k] + 1].isText());
  }
  std::vector<Expr> lines;
  for (const auto& f : o.doc.formulas()) {
    auto part = detail::chainLines(f);
    lines.insert(lines.end(), part.begin(), part.end());
  }
  EXPECT_EQ(lines, d.formulas()[0].args());
  EXPECT_EQ(writeDocument(obfSplit(d, R(), 5).doc), writeDocument(o.doc));
  EXPECT_THROW(obfSplit(D("$x=1$"), R(), 5), NoSplittableFormula);
  // The written variant reads back to the same fragments.
  Document back = D(writeDocument(o.doc));
  EXPECT_EQ(back.formulas(), o.doc.formulas());
  EXPECT_EQ(back.fragments.size(), o.doc.fragments.size());
}

TEST(StepChange, RemoveAndAdd) {
  Document d = D(kBernoulli);
  auto lines = d.formulas()[0].args();
  auto r = obfStepChange(d, StepMode::Remove, R(), 9);
  auto rl = r.doc.formulas()[0].args();
  ASSERT_EQ(rl.size(), 3u);
  EXPECT_EQ(rl.front(), lines.front());
  EXPECT_EQ(rl.back(), lines.back());

  auto a = obfStepChange(D("$y = x + 1$"), StepMode::Add, R(), 2);
  Expr chain = a.doc.formulas()[0];
  ASSERT_TRUE(detail::isChain(chain));
  ASSERT_EQ(chain.args().size(), 2u);
  EXPECT_EQ(normalize(chain.args()[0], NormLevel::Commute, R()), normalize(chain.args()[1], NormLevel::Commute, R()));

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto added = obfStepChange(d, StepMode::Add, R(), seed).doc.formulas()[0].args();
    ASSERT_EQ(added.size(), lines.size() + 1);
    EXPECT_EQ(added.front(), lines.front());
    EXPECT_EQ(added.back(), lines.back());
    // Some line is an inserted restatement of its predecessor.
    bool neighbour = false;
    for (std::size_t k = 0; k + 1 < added.size(); ++k) {
      auto without = added;
      without.erase(without.begin() + static_cast<long>(k) + 1);
      neighbour |= without == lines && normalize(added[k], NormLevel::Commute, R()) ==
                                           normalize(added[k + 1], NormLevel::Commute, R());
    }
    EXPECT_TRUE(neighbour);
  }
  EXPECT_THROW(obfStepChange(D("$x = 1 \\\\ = y$"), StepMode::Remove, R(), 1), NoSplittableFormula);
  EXPECT_THROW(obfStepChange(D("$x + 1$"), StepMode::Add, R(), 1), NoSplittableFormula);
}

TEST(Substitute, LinearExample) {
  Document d = D("$y = a x + b$ for all x.");
  bool sawExample = false;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto o = obfSubstitute(d, R(), seed);
    Expr v = o.doc.formulas()[0];
    sawExample |= v == C("(eq y (plus (g a x) b))");
    ASSERT_TRUE(o.doc.fragments[1].isText());
    const std::string& text = o.doc.fragments[1].text().content;
    ASSERT_EQ(text.rfind(" where ", 0), 0u) << text;
    auto eq = text.find(" = ");
    auto dot = text.find('.');
    Expr call = P(text.substr(7, eq - 7));
    Expr body = P(text.substr(eq + 3, dot - eq - 3));
    // Substituting the definition back recovers the original formula.
    Expr restored = transformBottomUp(v, [&](const Expr& n) { return n == call ? body : n; });
    EXPECT_EQ(restored, d.formulas()[0]);
    ASSERT_EQ(o.notes.size(), 1u);
    EXPECT_NE(o.notes[0].find(canonicalString(body)), std::string::npos);
    EXPECT_EQ(writeDocument(obfSubstitute(d, R(), seed).doc), writeDocument(o.doc));
  }
  EXPECT_TRUE(sawExample);
  EXPECT_THROW(obfSubstitute(D("$x = 1$"), R(), 1), NoSubstitutableTerm);
}

TEST(EquivTransform, LogQuotientExample) {
  Document d = D("$\\log_a\\left(\\frac{x+2}{y^2}\\right)$");
  Expr expected = P("\\log_a(x+2) - \\log_a(y^2)");
  bool saw = false;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto o = obfEquivTransform(d, R(), seed, 1);
    Expr v = o.doc.formulas()[0];
    saw |= v == expected;
    EXPECT_NE(v, d.formulas()[0]);
    EXPECT_EQ(applyEquivRules(v, R()), applyEquivRules(d.formulas()[0], R()));
    EXPECT_EQ(writeDocument(obfEquivTransform(d, R(), seed).doc), writeDocument(obfEquivTransform(d, R(), seed).doc));
  }
  EXPECT_TRUE(saw);
  EXPECT_THROW(obfEquivTransform(D("$x = 1$"), R(), 1), NoApplicableRule);
}

TEST(ObfuscateProperty, SemanticPreservation) {
  oracle::ExprGen gen(101, true);
  int checked = 0;
  for (int i = 0; i < 250; ++i) {
    Document d = randomDoc(gen, "r" + std::to_string(i));
    for (auto kind : {ObfKind::Notational, ObfKind::Rename, ObfKind::EquivTransform}) {
      LabeledPair p = [&] {
        try {
          return obfuscate(d, kind, R(), 1000 + i);
        } catch (const NoApplicableRule&) {
          return LabeledPair{d, d, kind, 0, {}};
        }
      }();
      if (p.notes.empty()) continue;
      expectFormulasParseFromRaw(p.variant);
      auto a = d.formulas(), b = p.variant.formulas();
      ASSERT_EQ(a.size(), b.size());
      for (std::size_t k = 0; k < a.size(); ++k)
        EXPECT_EQ(strongest(a[k]), strongest(b[k]))
            << obfKindName(kind) << ": " << d.fragments[d.formulaIndices()[k]].formula().rawSource << " vs "
            << p.variant.fragments[p.variant.formulaIndices()[k]].formula().rawSource;
      ++checked;
    }
  }
  EXPECT_GT(checked, 500);
}

TEST(ObfuscateProperty, ChainEndpointsPreserved) {
  oracle::ExprGen gen(102, true);
  for (int i = 0; i < 200; ++i) {
    auto term = [&] {
      while (true) {
        Expr t = gen.tree(8);
        if (!t.isRelation()) return t;
      }
    };
    std::vector<Expr> lines;
    Expr lhs = term();
    std::size_t n = 2 + gen.below(4);
    for (std::size_t k = 0; k < n; ++k) {
      Expr rhs = term();
      lines.push_back(Expr::apply(k % 2 ? "leq" : "eq", {lhs, rhs}));
      lhs = rhs;
    }
    Expr chain = Expr::apply("chain", lines);
    Document d = D("Proof: $$" + toLatex(chain) + "$$ done.");
    ASSERT_EQ(d.formulas()[0], chain);
    auto split = obfSplit(d, R(), i);
    auto parts = split.doc.formulas();
    ASSERT_GE(parts.size(), 2u);
    EXPECT_EQ(detail::chainLines(parts.front()).front(), lines.front());
    EXPECT_EQ(detail::chainLines(parts.back()).back(), lines.back());
    for (auto mode : {StepMode::Add, StepMode::Remove}) {
      if (mode == StepMode::Remove && n < 3) continue;
      auto changed = obfStepChange(d, mode, R(), i).doc.formulas()[0];
      auto cl = detail::chainLines(changed);
      EXPECT_EQ(cl.front(), lines.front());
      EXPECT_EQ(cl.back(), lines.back());
    }
  }
}

TEST(Corpus, DeterministicAndLabeled) {
  std::vector<Document> seeds{D(kBernoulli, "bernoulli"), D("$y = a x + b$ where a is the slope.", "linear"),
                              D("Just words.", "prose")};
  std::vector<ObfKind> kinds(kAllObfKinds.begin(), kAllObfKinds.end());
  auto serialize = [](const Corpus& c) {
    std::string s;
    for (const auto& p : c.pairs) {
      s += p.original.id + "|" + p.variant.id + "|" + obfKindName(p.kind) + "|" + std::to_string(p.seed) + "\n";
      s += writeDocument(p.variant) + "\n";
      for (const auto& n : p.notes) s += n + "\n";
    }
    for (const auto& k : c.skipped) s += k + "\n";
    return s;
  };
  Corpus a = generateCorpus(seeds, kinds, 42), b = generateCorpus(seeds, kinds, 42);
  EXPECT_EQ(serialize(a), serialize(b));
  EXPECT_NE(serialize(a), serialize(generateCorpus(seeds, kinds, 43)));
  EXPECT_LE(a.pairs.size(), seeds.size() * kinds.size());
  EXPECT_EQ(a.pairs.size() + a.skipped.size(), seeds.size() * kinds.size());
  for (const auto& p : a.pairs) {
    EXPECT_EQ(p.variant.id, p.original.id + "-" + obfKindName(p.kind));
    EXPECT_EQ(p.seed, pairSeed(p.original.id, p.kind, 42));
    if (p.kind != ObfKind::CopyPaste) EXPECT_FALSE(p.notes.empty());
  }
  // The prose-only document supports only copy-paste.
  std::size_t prose = 0;
  for (const auto& p : a.pairs) prose += p.original.id == "prose";
  EXPECT_EQ(prose, 1u);
  // Ordered by document id, then kind.
  for (std::size_t k = 1; k < a.pairs.size(); ++k) EXPECT_LE(a.pairs[k - 1].original.id, a.pairs[k].original.id);
}

// Command-line front end for the mathsim library.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mathsim/detect.hpp"

using namespace mathsim;

namespace {

constexpr int kExitClean = 0;
constexpr int kExitError = 1;
constexpr int kExitSuspicious = 2;

std::string readFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

NormLevel levelArg(const std::string& s) {
  auto l = normLevelFromName(s);
  if (!l) throw std::invalid_argument("unknown level '" + s + "'");
  return *l;
}

void printFormulas(const Document& d, const RuleTable& rules, std::optional<NormLevel> level, bool equiv) {
  std::size_t k = 0;
  for (const auto& e : d.formulas()) {
    Expr out = level ? normalize(e, *level, rules, equiv) : e;
    std::cout << k++ << "\t" << canonicalString(out) << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Similarity of mathematical expressions and plagiarism detection"};
  app.require_subcommand(1);
  std::string rulesPath;
  app.add_option("--rules", rulesPath, "Rule table (overrides MATHSIM_RULES)");

  // parse
  auto* parseCmd = app.add_subcommand("parse", "Print the expression tree of every formula in a document");
  std::string parseInput;
  bool parseLatex = false;
  parseCmd->add_option("input", parseInput, "Document file, or a formula with --latex")->required();
  parseCmd->add_flag("--latex", parseLatex, "Treat input as a LaTeX formula");

  // normalize
  auto* normCmd = app.add_subcommand("normalize", "Normalize every formula in a document");
  std::string normInput, normLevel = "commute";
  bool normEquiv = false, normLatex = false;
  normCmd->add_option("input", normInput, "Document file, or a formula with --latex")->required();
  normCmd->add_option("--level", normLevel, "chars|syn|commute|alpha|rename");
  normCmd->add_flag("--equiv", normEquiv, "Fold equivalence rules");
  normCmd->add_flag("--latex", normLatex, "Treat input as a LaTeX formula");

  // sim
  auto* simCmd = app.add_subcommand("sim", "Similarity of two LaTeX formulas");
  std::string simA, simB, simEngine = "syntactic", simLevel = "commute", simParams, simTaxonomy;
  bool simMultiset = false, simEquiv = false;
  simCmd->add_option("a", simA, "First formula (hybrid query)")->required();
  simCmd->add_option("b", simB, "Second formula (hybrid candidate)")->required();
  simCmd->add_option("--engine", simEngine, "syntactic|structural|hybrid");
  simCmd->add_option("--level", simLevel, "Normalization level");
  simCmd->add_flag("--equiv", simEquiv, "Fold equivalence rules");
  simCmd->add_flag("--multiset", simMultiset, "Structural engine counts repeated subpaths");
  simCmd->add_option("--params", simParams, "Hybrid parameter file");
  simCmd->add_option("--taxonomy", simTaxonomy, "Taxonomy file");

  // annotate
  auto* annCmd = app.add_subcommand("annotate", "Extract identifier definitions and tag formulas");
  std::string annInput;
  std::size_t annWindow = 1;
  annCmd->add_option("input", annInput, "Document file")->required();
  annCmd->add_option("--window", annWindow, "Text fragments searched on each side");

  // obfuscate
  auto* obfCmd = app.add_subcommand("obfuscate", "Generate a plagiarized variant of a document");
  std::string obfInput, obfKind, obfOut;
  std::uint64_t obfSeed = 0;
  obfCmd->add_option("input", obfInput, "Document file")->required();
  obfCmd->add_option("--kind", obfKind, "Obfuscation kind")->required();
  obfCmd->add_option("--seed", obfSeed, "Random seed");
  obfCmd->add_option("--out", obfOut, "Output file (default standard output)");

  // corpus
  auto* corpusCmd = app.add_subcommand("corpus", "Generate a labeled corpus from seed documents");
  std::string corpusSeeds, corpusOut;
  std::uint64_t corpusBase = 0;
  std::vector<std::string> corpusKinds;
  corpusCmd->add_option("--seeds", corpusSeeds, "Directory of .tex seed documents")->required();
  corpusCmd->add_option("--out", corpusOut, "Output directory")->required();
  corpusCmd->add_option("--base-seed", corpusBase, "Base seed");
  corpusCmd->add_option("--kinds", corpusKinds, "Subset of obfuscation kinds");

  // compare
  auto* cmpCmd = app.add_subcommand("compare", "Compare two documents");
  std::string cmpA, cmpB, cmpConfig, cmpJson;
  cmpCmd->add_option("docA", cmpA, "Source document")->required();
  cmpCmd->add_option("docB", cmpB, "Candidate document")->required();
  cmpCmd->add_option("--config", cmpConfig, "Detection config");
  cmpCmd->add_option("--json", cmpJson, "Write the report as JSON");

  // evaluate
  auto* evalCmd = app.add_subcommand("evaluate", "Evaluate engines on a labeled corpus");
  std::string evalCorpus, evalConfig, evalOut;
  evalCmd->add_option("--corpus", evalCorpus, "Corpus directory")->required();
  evalCmd->add_option("--config", evalConfig, "Detection config");
  evalCmd->add_option("--out", evalOut, "Report file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitClean : kExitError;
  }

  try {
    std::optional<RuleTable> ownRules;
    if (!rulesPath.empty()) ownRules = RuleTable::load(rulesPath);
    const RuleTable& rules = ownRules ? *ownRules : defaultRules();
    auto config = [&](const std::string& path) {
      return path.empty() ? DetectConfig::defaults(rules) : DetectConfig::load(path, rules);
    };
    auto input = [&](const std::string& s, bool latex) {
      if (!latex) return loadDocument(s, rules);
      Document d;
      d.addFormula(parseFormula(s, rules), s);
      return d;
    };

    if (*parseCmd) {
      printFormulas(input(parseInput, parseLatex), rules, std::nullopt, false);
    } else if (*normCmd) {
      printFormulas(input(normInput, normLatex), rules, levelArg(normLevel), normEquiv);
    } else if (*simCmd) {
      Expr a = parseFormula(simA, rules), b = parseFormula(simB, rules);
      NormLevel level = levelArg(simLevel);
      double score = 0;
      switch (engineFromName(simEngine)) {
        case Engine::Syntactic: score = simSyntactic(a, b, {level, simEquiv}, rules); break;
        case Engine::Structural: score = simSubpath(a, b, {level, simEquiv, simMultiset}, rules); break;
        case Engine::Hybrid: {
          HybridParams p = simParams.empty() ? HybridParams{}.normalized() : HybridParams::load(simParams);
          std::optional<Taxonomy> tax;
          if (!simTaxonomy.empty()) tax = Taxonomy::load(simTaxonomy);
          score = simHybrid(normalize(a, level, rules, simEquiv), normalize(b, level, rules, simEquiv),
                            tax ? *tax : defaultTaxonomy(), p);
          break;
        }
      }
      std::cout << std::setprecision(17) << score << "\n";
    } else if (*annCmd) {
      Document d = loadDocument(annInput, rules);
      auto defs = extractDefinitions(d, annWindow);
      for (const auto& [name, def] : defs.entries) std::cout << "define\t" << name << "\t" << def.meaning << "\n";
      for (const auto& [name, alts] : defs.ambiguous)
        for (const auto& def : alts) std::cout << "ambiguous\t" << name << "\t" << def.meaning << "\n";
      printFormulas(annotate(d, defs), rules, std::nullopt, false);
    } else if (*obfCmd) {
      Document d = loadDocument(obfInput, rules);
      auto pair = obfuscate(d, obfKindFromName(obfKind), rules, obfSeed);
      for (const auto& n : pair.notes) std::cerr << "note: " << n << "\n";
      if (obfOut.empty()) {
        std::cout << writeDocument(pair.variant);
      } else {
        saveDocument(pair.variant, obfOut);
      }
    } else if (*corpusCmd) {
      std::vector<ObfKind> kinds;
      for (const auto& k : corpusKinds) kinds.push_back(obfKindFromName(k));
      if (kinds.empty()) kinds.assign(kAllObfKinds.begin(), kAllObfKinds.end());
      auto corpus = generateCorpus(loadSeeds(corpusSeeds, rules), kinds, corpusBase, rules);
      writeCorpus(corpus, corpusOut);
      std::cout << corpus.pairs.size() << " pairs, " << corpus.skipped.size() << " skipped\n";
    } else if (*cmpCmd) {
      auto cfg = config(cmpConfig);
      auto r = compareDocuments(loadDocument(cmpA, rules), loadDocument(cmpB, rules), cfg, rules);
      printReport(r, std::cout);
      if (!cmpJson.empty()) reportEmit(r, cmpJson);
      return r.suspicious ? kExitSuspicious : kExitClean;
    } else if (*evalCmd) {
      auto cfg = config(evalConfig);
      auto corpus = loadCorpus(evalCorpus, rules);
      auto m = evaluateMatrix(corpus, cfg, rules);
      printMatrix(m, std::cout);
      reportEmit(m, evalOut);
    }
    return kExitClean;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
}

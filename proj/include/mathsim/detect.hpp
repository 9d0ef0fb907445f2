#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "mathsim/expr.hpp"
#include "mathsim/hybrid.hpp"
#include "mathsim/normalize.hpp"
#include "mathsim/obfuscate.hpp"
#include "mathsim/parse.hpp"
#include "mathsim/rules.hpp"
#include "mathsim/semantics.hpp"
#include "mathsim/structural.hpp"
#include "mathsim/syntactic.hpp"

namespace mathsim {

enum class Engine { Syntactic, Structural, Hybrid };

inline constexpr std::array<Engine, 3> kAllEngines{Engine::Syntactic, Engine::Structural, Engine::Hybrid};

inline std::string engineName(Engine e) {
  switch (e) {
    case Engine::Syntactic: return "syntactic";
    case Engine::Structural: return "structural";
    case Engine::Hybrid: return "hybrid";
  }
  return "syntactic";
}

inline Engine engineFromName(const std::string& s) {
  for (auto e : kAllEngines)
    if (engineName(e) == s) return e;
  throw std::invalid_argument("unknown engine '" + s + "'");
}

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Whitelist key: the canonical string at level Commute.
inline std::string whitelistKey(const Expr& e, const RuleTable& rules = defaultRules()) {
  return canonicalString(normalize(e, NormLevel::Commute, rules));
}

/// One LaTeX formula per line; blank lines and lines starting with # are skipped.
inline std::set<std::string> loadWhitelist(const std::filesystem::path& path, const RuleTable& rules = defaultRules()) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open whitelist " + path.string());
  std::set<std::string> out;
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    try {
      out.insert(whitelistKey(parseFormula(line, rules), rules));
    } catch (const std::exception& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineNo) + ": " + e.what());
    }
  }
  return out;
}

enum class Aggregation { Max, TopK };

struct DetectConfig {
  std::vector<Engine> engines{kAllEngines.begin(), kAllEngines.end()};
  std::map<Engine, NormLevel> levels{
      {Engine::Syntactic, NormLevel::Commute}, {Engine::Structural, NormLevel::FullRename}, {Engine::Hybrid, NormLevel::Commute}};
  /// Fold equivalence rewrite rules during normalization.
  bool equiv = true;
  bool semanticFilter = false;
  double semanticPenalty = 0.5;
  std::size_t definitionWindow = 1;
  double pairThreshold = 0.8;
  double docThreshold = 0.5;
  std::set<std::string> whitelist;
  /// How a candidate formula's pair scores against all source formulae reduce to one value.
  Aggregation aggregation = Aggregation::Max;
  std::size_t topK = 1;
  /// Formulae with fewer nodes are not matched and not counted.
  std::size_t minFormulaNodes = 3;
  int nMin = 1;
  int nMax = 3;
  bool multiset = false;
  HybridParams hybrid{};
  std::shared_ptr<const Taxonomy> taxonomy;

  NormLevel levelOf(Engine e) const {
    auto it = levels.find(e);
    return it == levels.end() ? NormLevel::Commute : it->second;
  }

  const Taxonomy& tax() const { return taxonomy ? *taxonomy : defaultTaxonomy(); }

  void validate() const {
    if (engines.empty()) throw ConfigError("at least one engine is required");
    if (!(pairThreshold >= 0 && pairThreshold <= 1)) throw ConfigError("pair threshold must be in [0,1]");
    if (!(docThreshold >= 0 && docThreshold <= 1)) throw ConfigError("document threshold must be in [0,1]");
    if (!(semanticPenalty >= 0 && semanticPenalty <= 1)) throw ConfigError("semantic penalty must be in [0,1]");
    if (topK < 1) throw ConfigError("top-k must be at least 1");
    if (nMin < 1 || nMax < nMin) throw ConfigError("n-gram range must satisfy 1 <= n_min <= n_max");
    try {
      hybrid.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }

  /// Relative file names (whitelist, taxonomy, hybrid params) resolve against baseDir.
  static DetectConfig fromJson(const nlohmann::json& j, const std::filesystem::path& baseDir,
                               const RuleTable& rules = defaultRules()) {
    DetectConfig c;
    auto resolve = [&](const std::string& p) {
      std::filesystem::path path(p);
      return path.is_relative() ? baseDir / path : path;
    };
    try {
      if (j.contains("engines")) {
        c.engines.clear();
        for (const auto& e : j.at("engines")) c.engines.push_back(engineFromName(e.get<std::string>()));
      }
      if (j.contains("levels"))
        for (const auto& [k, v] : j.at("levels").items()) {
          auto level = normLevelFromName(v.get<std::string>());
          if (!level) throw ConfigError("unknown normalization level '" + v.get<std::string>() + "'");
          c.levels[engineFromName(k)] = *level;
        }
      c.equiv = j.value("equiv_rules", c.equiv);
      c.semanticFilter = j.value("semantic_filter", c.semanticFilter);
      c.semanticPenalty = j.value("semantic_penalty", c.semanticPenalty);
      c.definitionWindow = j.value("definition_window", c.definitionWindow);
      c.pairThreshold = j.value("pair_threshold", c.pairThreshold);
      c.docThreshold = j.value("doc_threshold", c.docThreshold);
      if (j.contains("aggregation")) {
        auto a = j.at("aggregation").get<std::string>();
        if (a == "max") {
          c.aggregation = Aggregation::Max;
        } else if (a == "top_k") {
          c.aggregation = Aggregation::TopK;
        } else {
          throw ConfigError("unknown aggregation '" + a + "'");
        }
      }
      c.topK = j.value("top_k", c.topK);
      c.minFormulaNodes = j.value("min_formula_nodes", c.minFormulaNodes);
      c.nMin = j.value("n_min", c.nMin);
      c.nMax = j.value("n_max", c.nMax);
      c.multiset = j.value("multiset", c.multiset);
      if (j.contains("whitelist")) {
        const auto& w = j.at("whitelist");
        if (w.is_string()) {
          c.whitelist = loadWhitelist(resolve(w.get<std::string>()), rules);
        } else {
          for (const auto& f : w) c.whitelist.insert(whitelistKey(parseFormula(f.get<std::string>(), rules), rules));
        }
      }
      if (j.contains("hybrid")) {
        const auto& h = j.at("hybrid");
        c.hybrid = h.is_string() ? HybridParams::load(resolve(h.get<std::string>())) : HybridParams::fromJson(h);
      }
      if (j.contains("taxonomy"))
        c.taxonomy = std::make_shared<const Taxonomy>(Taxonomy::load(resolve(j.at("taxonomy").get<std::string>())));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("malformed detection config: ") + e.what());
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
    c.validate();
    return c;
  }

  static DetectConfig load(const std::filesystem::path& path, const RuleTable& rules = defaultRules()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
    try {
      return fromJson(j, path.parent_path(), rules);
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
  }

  /// The shipped configuration in the data directory.
  static DetectConfig defaults(const RuleTable& rules = defaultRules()) { return load(dataDir() / "config.json", rules); }
};

inline bool whitelistFilter(const Expr& e, const DetectConfig& cfg, const RuleTable& rules = defaultRules()) {
  return cfg.whitelist.contains(whitelistKey(e, rules));
}

// ---------------------------------------------------------------------------
// Pair scoring

namespace detail {

/// Per-formula data shared by all pairs it takes part in.
struct PreparedFormula {
  Expr raw;
  Expr annotated;
  bool whitelisted = false;
  bool small = false;
  std::map<Engine, Expr> norm;
  WeightedNgramSet ngrams;
  SubpathSet paths;
  SubpathBag bag;

  bool counted() const { return !whitelisted && !small; }
};

inline std::vector<PreparedFormula> prepare(const Document& d, const DetectConfig& cfg, const RuleTable& rules,
                                            bool applyWhitelist) {
  std::optional<DefinitionMap> defs;
  if (cfg.semanticFilter) defs = extractDefinitions(d, cfg.definitionWindow);
  std::vector<PreparedFormula> out;
  for (const auto& e : d.formulas()) {
    PreparedFormula p{e, defs ? annotate(e, *defs) : e};
    p.whitelisted = applyWhitelist && whitelistFilter(e, cfg, rules);
    p.small = nodeCount(e) < cfg.minFormulaNodes;
    for (auto eng : cfg.engines) {
      Expr n = normalize(e, cfg.levelOf(eng), rules, cfg.equiv);
      if (eng == Engine::Syntactic) p.ngrams = ngrams(textualize(n), cfg.nMin, cfg.nMax);
      if (eng == Engine::Structural) cfg.multiset ? void(p.bag = subpathMultiset(n)) : void(p.paths = subpaths(n));
      p.norm.emplace(eng, std::move(n));
    }
    out.push_back(std::move(p));
  }
  return out;
}

/// Engine score of source formula s against candidate formula c, before filtering.
inline double engineScore(Engine eng, const PreparedFormula& s, const PreparedFormula& c, const DetectConfig& cfg) {
  switch (eng) {
    case Engine::Syntactic: return weightedJaccard(s.ngrams, c.ngrams);
    case Engine::Structural: return cfg.multiset ? jaccard(s.bag, c.bag) : jaccard(s.paths, c.paths);
    case Engine::Hybrid: return simHybrid(s.norm.at(eng), c.norm.at(eng), cfg.tax(), cfg.hybrid);
  }
  return 0.0;
}

inline double pairScore(Engine eng, const PreparedFormula& s, const PreparedFormula& c, const DetectConfig& cfg) {
  if (!s.counted() || !c.counted()) return 0.0;
  double v = engineScore(eng, s, c, cfg);
  if (cfg.semanticFilter) v *= semanticCompatibility(s.annotated, c.annotated, cfg.semanticPenalty);
  return v;
}

/// Max, or the mean of the k highest values.
inline double aggregate(std::vector<double> v, const DetectConfig& cfg) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end(), std::greater<>());
  std::size_t k = cfg.aggregation == Aggregation::Max ? 1 : std::min(cfg.topK, v.size());
  double s = 0;
  for (std::size_t i = 0; i < k; ++i) s += v[i];
  return s / static_cast<double>(k);
}

}  // namespace detail

struct FlaggedPair {
  std::size_t source;
  std::size_t candidate;
  std::string engine;
  double score;
  friend bool operator==(const FlaggedPair&, const FlaggedPair&) = default;
};

struct WhitelistHit {
  /// "source" or "candidate".
  std::string side;
  std::size_t index;
  std::string canonical;
  friend bool operator==(const WhitelistHit&, const WhitelistHit&) = default;
};

using ScoreMatrix = std::vector<std::vector<double>>;

struct MatchReport {
  std::string sourceId;
  std::string candidateId;
  /// engine name -> [source formula][candidate formula].
  std::map<std::string, ScoreMatrix> perEngine;
  /// Aggregated best score per candidate formula; empty for formulae not counted.
  std::vector<std::optional<double>> candidateBest;
  std::vector<FlaggedPair> flaggedPairs;
  double suspiciousness = 0.0;
  bool suspicious = false;
  std::vector<WhitelistHit> whitelistHits;
  double pairThreshold = 0.8;
  double docThreshold = 0.5;

  std::string classification() const { return suspicious ? "suspicious" : "clean"; }
  friend bool operator==(const MatchReport&, const MatchReport&) = default;
};

/// Scores every formula of a against every formula of b. For the hybrid engine
/// the source formula is the query.
inline MatchReport compareDocuments(const Document& a, const Document& b, const DetectConfig& cfg,
                                    const RuleTable& rules = defaultRules()) {
  cfg.validate();
  auto fa = detail::prepare(a, cfg, rules, true);
  auto fb = detail::prepare(b, cfg, rules, true);
  MatchReport r;
  r.sourceId = a.id;
  r.candidateId = b.id;
  r.pairThreshold = cfg.pairThreshold;
  r.docThreshold = cfg.docThreshold;
  for (std::size_t i = 0; i < fa.size(); ++i)
    if (fa[i].whitelisted) r.whitelistHits.push_back({"source", i, whitelistKey(fa[i].raw, rules)});
  for (std::size_t j = 0; j < fb.size(); ++j)
    if (fb[j].whitelisted) r.whitelistHits.push_back({"candidate", j, whitelistKey(fb[j].raw, rules)});

  for (auto eng : cfg.engines) {
    ScoreMatrix m(fa.size(), std::vector<double>(fb.size(), 0.0));
    for (std::size_t i = 0; i < fa.size(); ++i)
      for (std::size_t j = 0; j < fb.size(); ++j) {
        m[i][j] = detail::pairScore(eng, fa[i], fb[j], cfg);
        if (fa[i].counted() && fb[j].counted() && m[i][j] >= cfg.pairThreshold)
          r.flaggedPairs.push_back({i, j, engineName(eng), m[i][j]});
      }
    r.perEngine.emplace(engineName(eng), std::move(m));
  }

  std::size_t counted = 0, matched = 0;
  for (std::size_t j = 0; j < fb.size(); ++j) {
    if (!fb[j].counted()) {
      r.candidateBest.push_back(std::nullopt);
      continue;
    }
    ++counted;
    double best = 0.0;
    for (const auto& [name, m] : r.perEngine) {
      std::vector<double> column;
      for (std::size_t i = 0; i < fa.size(); ++i)
        if (fa[i].counted()) column.push_back(m[i][j]);
      best = std::max(best, detail::aggregate(std::move(column), cfg));
    }
    r.candidateBest.push_back(best);
    if (best >= cfg.pairThreshold) ++matched;
  }
  r.suspiciousness = counted == 0 ? 0.0 : static_cast<double>(matched) / static_cast<double>(counted);
  r.suspicious = r.suspiciousness >= cfg.docThreshold;
  return r;
}

// ---------------------------------------------------------------------------
// Evaluation against the expectation table

enum class Expectation { Ideal, Good, PossibleFalsePositives, Problematic, NotFeasible, Unconstrained };

inline std::string expectationName(Expectation e) {
  switch (e) {
    case Expectation::Ideal: return "ideal";
    case Expectation::Good: return "good";
    case Expectation::PossibleFalsePositives: return "possible-false-positives";
    case Expectation::Problematic: return "problematic";
    case Expectation::NotFeasible: return "not-feasible";
    case Expectation::Unconstrained: return "unconstrained";
  }
  return "unconstrained";
}

inline Expectation expectationFromName(const std::string& s) {
  for (auto e : {Expectation::Ideal, Expectation::Good, Expectation::PossibleFalsePositives, Expectation::Problematic,
                 Expectation::NotFeasible, Expectation::Unconstrained})
    if (expectationName(e) == s) return e;
  throw std::invalid_argument("unknown expectation '" + s + "'");
}

/// Qualitative applicability of each engine to each obfuscation kind.
inline Expectation expectedOutcome(Engine eng, ObfKind kind) {
  using E = Expectation;
  switch (kind) {
    case ObfKind::CopyPaste:
      return eng == Engine::Syntactic ? E::Ideal : eng == Engine::Structural ? E::PossibleFalsePositives : E::Good;
    case ObfKind::Notational:
      return eng == Engine::Structural ? E::PossibleFalsePositives : E::Good;
    case ObfKind::Rename:
      return eng == Engine::Syntactic ? E::Problematic : eng == Engine::Structural ? E::Ideal : E::Unconstrained;
    case ObfKind::Split:
    case ObfKind::Substitute: return E::Problematic;
    case ObfKind::StepChange: return E::Unconstrained;
    case ObfKind::EquivTransform: return E::NotFeasible;
  }
  return E::Unconstrained;
}

struct MatrixCell {
  /// Mean over pairs; NaN when no pair contributed.
  double mean = std::nan("");
  std::size_t pairs = 0;
  Expectation expectation = Expectation::Unconstrained;
  bool operator==(const MatrixCell& o) const {
    bool sameMean = (std::isnan(mean) && std::isnan(o.mean)) || mean == o.mean;
    return sameMean && pairs == o.pairs && expectation == o.expectation;
  }
};

struct DetectionMatrix {
  std::vector<std::string> engines;
  /// (engine name, kind name) -> cell.
  std::map<std::pair<std::string, std::string>, MatrixCell> cells;
  std::size_t pairCount = 0;

  const MatrixCell& at(Engine e, ObfKind k) const { return cells.at({engineName(e), obfKindName(k)}); }
  friend bool operator==(const DetectionMatrix&, const DetectionMatrix&) = default;
};

/// Mean over the variant's counted formulae of the best score against any counted
/// original formula. Empty when either side has no counted formula.
inline std::optional<double> pairBestMean(Engine eng, const std::vector<detail::PreparedFormula>& orig,
                                          const std::vector<detail::PreparedFormula>& var, const DetectConfig& cfg) {
  double sum = 0;
  std::size_t n = 0;
  bool anySource = std::any_of(orig.begin(), orig.end(), [](const auto& p) { return p.counted(); });
  if (!anySource) return std::nullopt;
  for (const auto& c : var) {
    if (!c.counted()) continue;
    std::vector<double> col;
    for (const auto& s : orig)
      if (s.counted()) col.push_back(detail::pairScore(eng, s, c, cfg));
    sum += detail::aggregate(std::move(col), cfg);
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

/// Per-fragment best scores of one labeled pair for one engine, in variant formula order.
/// Whitelisting does not apply: the evaluation measures engines, not common knowledge.
inline std::vector<std::optional<double>> fragmentBestScores(const LabeledPair& p, Engine eng, const DetectConfig& cfg,
                                                             const RuleTable& rules = defaultRules()) {
  auto orig = detail::prepare(p.original, cfg, rules, false);
  auto var = detail::prepare(p.variant, cfg, rules, false);
  std::vector<std::optional<double>> out;
  for (const auto& c : var) {
    if (!c.counted()) {
      out.push_back(std::nullopt);
      continue;
    }
    std::vector<double> col;
    for (const auto& s : orig)
      if (s.counted()) col.push_back(detail::pairScore(eng, s, c, cfg));
    out.push_back(col.empty() ? std::nullopt : std::optional<double>(detail::aggregate(std::move(col), cfg)));
  }
  return out;
}

inline DetectionMatrix evaluateMatrix(const std::vector<LabeledPair>& corpus, const DetectConfig& cfg,
                                      const RuleTable& rules = defaultRules()) {
  cfg.validate();
  if (corpus.empty()) throw std::invalid_argument("evaluation corpus is empty");
  DetectionMatrix m;
  m.pairCount = corpus.size();
  for (auto eng : cfg.engines) m.engines.push_back(engineName(eng));
  std::map<std::pair<std::string, std::string>, std::pair<double, std::size_t>> acc;
  for (const auto& p : corpus) {
    auto orig = detail::prepare(p.original, cfg, rules, false);
    auto var = detail::prepare(p.variant, cfg, rules, false);
    for (auto eng : cfg.engines)
      if (auto v = pairBestMean(eng, orig, var, cfg)) {
        auto& slot = acc[{engineName(eng), obfKindName(p.kind)}];
        slot.first += *v;
        ++slot.second;
      }
  }
  for (auto eng : cfg.engines)
    for (auto kind : kAllObfKinds) {
      MatrixCell c;
      c.expectation = expectedOutcome(eng, kind);
      auto it = acc.find({engineName(eng), obfKindName(kind)});
      if (it != acc.end()) {
        c.pairs = it->second.second;
        c.mean = it->second.first / static_cast<double>(c.pairs);
      }
      m.cells[{engineName(eng), obfKindName(kind)}] = c;
    }
  return m;
}

// ---------------------------------------------------------------------------
// Reports

inline nlohmann::json toJson(const MatchReport& r) {
  nlohmann::json j;
  j["source"] = r.sourceId;
  j["candidate"] = r.candidateId;
  j["pair_threshold"] = r.pairThreshold;
  j["doc_threshold"] = r.docThreshold;
  j["per_engine"] = nlohmann::json::object();
  for (const auto& [name, m] : r.perEngine) j["per_engine"][name] = m;
  auto& best = j["candidate_best"] = nlohmann::json::array();
  for (const auto& b : r.candidateBest) best.push_back(b ? nlohmann::json(*b) : nlohmann::json(nullptr));
  auto& flagged = j["flagged_pairs"] = nlohmann::json::array();
  for (const auto& f : r.flaggedPairs)
    flagged.push_back({{"source", f.source}, {"candidate", f.candidate}, {"engine", f.engine}, {"score", f.score}});
  j["suspiciousness"] = r.suspiciousness;
  j["classification"] = r.classification();
  auto& hits = j["whitelist_hits"] = nlohmann::json::array();
  for (const auto& h : r.whitelistHits) hits.push_back({{"side", h.side}, {"index", h.index}, {"canonical", h.canonical}});
  return j;
}

inline MatchReport matchReportFromJson(const nlohmann::json& j) {
  MatchReport r;
  try {
    r.sourceId = j.at("source").get<std::string>();
    r.candidateId = j.at("candidate").get<std::string>();
    r.pairThreshold = j.at("pair_threshold").get<double>();
    r.docThreshold = j.at("doc_threshold").get<double>();
    for (const auto& [name, m] : j.at("per_engine").items()) r.perEngine[name] = m.get<ScoreMatrix>();
    for (const auto& b : j.at("candidate_best"))
      r.candidateBest.push_back(b.is_null() ? std::nullopt : std::optional<double>(b.get<double>()));
    for (const auto& f : j.at("flagged_pairs"))
      r.flaggedPairs.push_back({f.at("source").get<std::size_t>(), f.at("candidate").get<std::size_t>(),
                                f.at("engine").get<std::string>(), f.at("score").get<double>()});
    r.suspiciousness = j.at("suspiciousness").get<double>();
    auto cls = j.at("classification").get<std::string>();
    if (cls != "suspicious" && cls != "clean") throw std::invalid_argument("unknown classification '" + cls + "'");
    r.suspicious = cls == "suspicious";
    for (const auto& h : j.at("whitelist_hits"))
      r.whitelistHits.push_back(
          {h.at("side").get<std::string>(), h.at("index").get<std::size_t>(), h.at("canonical").get<std::string>()});
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed match report: ") + e.what());
  }
  return r;
}

inline nlohmann::json toJson(const DetectionMatrix& m) {
  nlohmann::json j;
  j["engines"] = m.engines;
  j["pairs"] = m.pairCount;
  auto& rows = j["rows"] = nlohmann::json::array();
  for (auto kind : kAllObfKinds) {
    nlohmann::json row{{"kind", obfKindName(kind)}, {"cells", nlohmann::json::object()}};
    for (const auto& eng : m.engines) {
      auto it = m.cells.find({eng, obfKindName(kind)});
      if (it == m.cells.end()) continue;
      const auto& c = it->second;
      row["cells"][eng] = {{"mean", std::isnan(c.mean) ? nlohmann::json(nullptr) : nlohmann::json(c.mean)},
                           {"pairs", c.pairs},
                           {"expectation", expectationName(c.expectation)}};
    }
    rows.push_back(std::move(row));
  }
  return j;
}

inline DetectionMatrix detectionMatrixFromJson(const nlohmann::json& j) {
  DetectionMatrix m;
  try {
    m.engines = j.at("engines").get<std::vector<std::string>>();
    m.pairCount = j.at("pairs").get<std::size_t>();
    for (const auto& row : j.at("rows")) {
      auto kind = row.at("kind").get<std::string>();
      for (const auto& [eng, c] : row.at("cells").items()) {
        MatrixCell cell;
        cell.mean = c.at("mean").is_null() ? std::nan("") : c.at("mean").get<double>();
        cell.pairs = c.at("pairs").get<std::size_t>();
        cell.expectation = expectationFromName(c.at("expectation").get<std::string>());
        m.cells[{eng, kind}] = cell;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed detection matrix: ") + e.what());
  }
  return m;
}

namespace detail {

inline std::string fixed(double v, int digits = 4) {
  if (std::isnan(v)) return "-";
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

inline void writeJsonFile(const nlohmann::json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("error writing " + path.string());
}

inline nlohmann::json readJsonFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

}  // namespace detail

inline void printReport(const MatchReport& r, std::ostream& os) {
  os << "source " << r.sourceId << " vs candidate " << r.candidateId << "\n";
  for (const auto& [name, m] : r.perEngine) {
    os << name << "\n";
    for (const auto& row : m) {
      os << " ";
      for (double v : row) os << " " << detail::fixed(v);
      os << "\n";
    }
  }
  for (const auto& f : r.flaggedPairs)
    os << "flagged " << f.source << " " << f.candidate << " " << f.engine << " " << detail::fixed(f.score) << "\n";
  for (const auto& h : r.whitelistHits) os << "whitelisted " << h.side << " " << h.index << " " << h.canonical << "\n";
  os << "suspiciousness " << detail::fixed(r.suspiciousness) << " " << r.classification() << "\n";
}

/// One row per obfuscation kind, one column per engine.
inline void printMatrix(const DetectionMatrix& m, std::ostream& os) {
  os << std::left << std::setw(16) << "kind";
  for (const auto& e : m.engines) os << std::setw(34) << e;
  os << "\n";
  for (auto kind : kAllObfKinds) {
    os << std::setw(16) << obfKindName(kind);
    for (const auto& e : m.engines) {
      auto it = m.cells.find({e, obfKindName(kind)});
      std::string cell = it == m.cells.end()
                             ? "-"
                             : detail::fixed(it->second.mean) + " (" + expectationName(it->second.expectation) + ")";
      os << std::setw(34) << cell;
    }
    os << "\n";
  }
  os << std::right;
}

inline void reportEmit(const MatchReport& r, const std::filesystem::path& path) {
  detail::writeJsonFile(toJson(r), path);
}
inline void reportEmit(const DetectionMatrix& m, const std::filesystem::path& path) {
  detail::writeJsonFile(toJson(m), path);
}
inline MatchReport loadMatchReport(const std::filesystem::path& path) {
  return matchReportFromJson(detail::readJsonFile(path));
}
inline DetectionMatrix loadDetectionMatrix(const std::filesystem::path& path) {
  return detectionMatrixFromJson(detail::readJsonFile(path));
}

// ---------------------------------------------------------------------------
// Corpus directories

inline Document loadDocument(const std::filesystem::path& path, const RuleTable& rules = defaultRules()) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parseDocument(buf.str(), rules, path.stem().string());
}

inline void saveDocument(const Document& d, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << writeDocument(d);
  if (!out) throw std::runtime_error("error writing " + path.string());
}

/// Every *.tex file in dir, ordered by file name; the stem is the document id.
inline std::vector<Document> loadSeeds(const std::filesystem::path& dir, const RuleTable& rules = defaultRules()) {
  if (!std::filesystem::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& ent : std::filesystem::directory_iterator(dir))
    if (ent.is_regular_file() && ent.path().extension() == ".tex") files.push_back(ent.path());
  std::sort(files.begin(), files.end());
  std::vector<Document> out;
  for (const auto& f : files) out.push_back(loadDocument(f, rules));
  return out;
}

/// Writes originals and variants as .tex files plus manifest.jsonl (one record per
/// pair) and skipped.txt.
inline void writeCorpus(const Corpus& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.jsonl", std::ios::binary);
  if (!manifest) throw std::runtime_error("cannot write " + (dir / "manifest.jsonl").string());
  std::set<std::string> written;
  for (const auto& p : c.pairs) {
    std::string origFile = p.original.id + ".tex";
    std::string varFile = p.variant.id + ".tex";
    if (written.insert(origFile).second) saveDocument(p.original, dir / origFile);
    saveDocument(p.variant, dir / varFile);
    nlohmann::json rec{{"original", origFile}, {"variant", varFile}, {"kind", obfKindName(p.kind)},
                       {"seed", p.seed},       {"notes", p.notes}};
    manifest << rec.dump() << '\n';
  }
  std::ofstream skipped(dir / "skipped.txt", std::ios::binary);
  for (const auto& s : c.skipped) skipped << s << '\n';
}

inline std::vector<LabeledPair> loadCorpus(const std::filesystem::path& dir, const RuleTable& rules = defaultRules()) {
  auto path = dir / "manifest.jsonl";
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<LabeledPair> out;
  std::map<std::string, Document> cache;
  auto doc = [&](const std::string& f) -> const Document& {
    auto it = cache.find(f);
    if (it == cache.end()) it = cache.emplace(f, loadDocument(dir / f, rules)).first;
    return it->second;
  };
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      out.push_back({doc(j.at("original").get<std::string>()), doc(j.at("variant").get<std::string>()),
                     obfKindFromName(j.at("kind").get<std::string>()), j.at("seed").get<std::uint64_t>(),
                     j.value("notes", std::vector<std::string>{})});
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineNo) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace mathsim

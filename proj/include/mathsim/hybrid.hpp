#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "mathsim/expr.hpp"
#include "mathsim/rules.hpp"

namespace mathsim {

class TaxonomyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A category tree whose leaves own function and operator symbols. Symbols
/// not listed fall into the "unknown" category.
class Taxonomy {
 public:
  static Taxonomy fromJson(const nlohmann::json& j) {
    Taxonomy t;
    try {
      t.addCategory(j, kNone, 0);
    } catch (const nlohmann::json::exception& e) {
      throw TaxonomyError(std::string("malformed taxonomy: ") + e.what());
    }
    auto it = std::find_if(t.nodes_.begin(), t.nodes_.end(), [](const Category& c) { return c.name == "unknown"; });
    if (it == t.nodes_.end()) throw TaxonomyError("taxonomy has no 'unknown' category");
    t.unknown_ = static_cast<std::size_t>(it - t.nodes_.begin());
    return t;
  }

  static Taxonomy load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw TaxonomyError("cannot open taxonomy " + path.string());
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw TaxonomyError(path.string() + ": " + e.what());
    }
    return fromJson(j);
  }

  std::size_t categoryOf(const std::string& symbol) const {
    auto it = symbols_.find(symbol);
    return it == symbols_.end() ? unknown_ : it->second;
  }

  const std::string& categoryName(std::size_t c) const { return nodes_.at(c).name; }

  /// Number of tree edges between the categories of two symbols.
  std::size_t distance(const std::string& f, const std::string& g) const {
    std::size_t a = categoryOf(f), b = categoryOf(g), d = 0;
    while (nodes_[a].depth > nodes_[b].depth) a = nodes_[a].parent, ++d;
    while (nodes_[b].depth > nodes_[a].depth) b = nodes_[b].parent, ++d;
    while (a != b) a = nodes_[a].parent, b = nodes_[b].parent, d += 2;
    return d;
  }

  std::size_t symbolCount() const { return symbols_.size(); }

 private:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  struct Category {
    std::string name;
    std::size_t parent;
    std::size_t depth;
  };

  void addCategory(const nlohmann::json& j, std::size_t parent, std::size_t depth) {
    std::size_t id = nodes_.size();
    nodes_.push_back({j.at("name").get<std::string>(), parent, depth});
    auto kids = j.value("children", nlohmann::json::array());
    auto syms = j.value("symbols", nlohmann::json::array());
    if (!kids.empty() && !syms.empty())
      throw TaxonomyError("category '" + nodes_[id].name + "' has both children and symbols");
    for (const auto& s : syms) {
      auto name = s.get<std::string>();
      if (!symbols_.emplace(name, id).second) throw TaxonomyError("symbol '" + name + "' listed twice");
    }
    for (const auto& k : kids) addCategory(k, id, depth + 1);
  }

  std::vector<Category> nodes_;
  std::map<std::string, std::size_t> symbols_;
  std::size_t unknown_ = 0;
};

/// The shipped taxonomy; MATHSIM_TAXONOMY overrides its location.
inline const Taxonomy& defaultTaxonomy() {
  static const Taxonomy tax = [] {
    if (const char* p = std::getenv("MATHSIM_TAXONOMY")) return Taxonomy::load(p);
    return Taxonomy::load(dataDir() / "taxonomy.json");
  }();
  return tax;
}

enum class DepthDecay { Linear, Quadratic, Exponential };

inline DepthDecay depthDecayFromName(const std::string& s) {
  if (s == "linear") return DepthDecay::Linear;
  if (s == "quadratic") return DepthDecay::Quadratic;
  if (s == "exponential") return DepthDecay::Exponential;
  throw std::invalid_argument("unknown depth decay '" + s + "'");
}

struct HybridParams {
  double taxWeight = 0.3;
  double typeWeight = 0.2;
  double coverageWeight = 0.5;
  /// Strength of the depth penalty: 0 disables it, 1 applies the full decay.
  double depthWeight = 1.0;
  /// Factor applied when the query is a relation and the candidate root is not.
  double formulaBoost = 0.9;
  DepthDecay decay = DepthDecay::Exponential;
  double lambda = 0.5;
  double gamma = 0.5;

  void validate() const {
    for (double w : {taxWeight, typeWeight, coverageWeight})
      if (!(w >= 0) || !std::isfinite(w)) throw std::invalid_argument("hybrid weights must be finite and non-negative");
    if (!(taxWeight + typeWeight + coverageWeight > 0)) throw std::invalid_argument("hybrid weights sum to zero");
    if (!(depthWeight >= 0 && depthWeight <= 1)) throw std::invalid_argument("depth weight must be in [0,1]");
    if (!(formulaBoost > 0 && formulaBoost <= 1)) throw std::invalid_argument("formula boost must be in (0,1]");
    if (!(lambda > 0) || !std::isfinite(lambda)) throw std::invalid_argument("depth decay rate must be positive");
    if (!(gamma > 0 && gamma < 1)) throw std::invalid_argument("taxonomic decay must be in (0,1)");
  }

  /// Copy with the three factor weights scaled to sum to one.
  HybridParams normalized() const {
    HybridParams p = *this;
    double s = taxWeight + typeWeight + coverageWeight;
    p.taxWeight /= s;
    p.typeWeight /= s;
    p.coverageWeight /= s;
    return p;
  }

  static HybridParams fromJson(const nlohmann::json& j) {
    HybridParams p;
    try {
      p.taxWeight = j.value("tax_weight", p.taxWeight);
      p.typeWeight = j.value("type_weight", p.typeWeight);
      p.coverageWeight = j.value("coverage_weight", p.coverageWeight);
      p.depthWeight = j.value("depth_weight", p.depthWeight);
      p.formulaBoost = j.value("formula_boost", p.formulaBoost);
      if (j.contains("depth_decay")) p.decay = depthDecayFromName(j.at("depth_decay").get<std::string>());
      p.lambda = j.value("lambda", p.lambda);
      p.gamma = j.value("gamma", p.gamma);
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument(std::string("malformed hybrid params: ") + e.what());
    }
    p.validate();
    return p.normalized();
  }

  static HybridParams load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open hybrid params " + path.string());
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument(path.string() + ": " + e.what());
    }
    return fromJson(j);
  }
};

inline double taxonomicSim(const std::string& f, const std::string& g, const Taxonomy& tax, double gamma) {
  if (f == g) return 1.0;
  return std::pow(gamma, static_cast<double>(tax.distance(f, g)));
}

/// Data type level: number 0, identifier 1, application or binder 2, relation 3.
inline int typeLevel(const Expr& e) {
  switch (e.kind()) {
    case Expr::Kind::Number: return 0;
    case Expr::Kind::Identifier: return 1;
    case Expr::Kind::Binder: return 2;
    case Expr::Kind::Apply: return e.isRelation() ? 3 : 2;
  }
  return 0;
}

inline double typeLevelSim(const Expr& a, const Expr& b) {
  return 1.0 - std::abs(typeLevel(a) - typeLevel(b)) / 3.0;
}

inline double depthPenalty(std::size_t depth, const HybridParams& p) {
  double d = static_cast<double>(depth), decay = 1.0;
  switch (p.decay) {
    case DepthDecay::Linear: decay = std::max(0.0, 1.0 - p.lambda * d); break;
    case DepthDecay::Quadratic: decay = 1.0 / (1.0 + p.lambda * d * d); break;
    case DepthDecay::Exponential: decay = std::exp(-p.lambda * d); break;
  }
  return 1.0 - p.depthWeight * (1.0 - decay);
}

/// Maximum total weight of a one-to-one assignment between rows and columns
/// of a non-negative matrix (Hungarian method).
inline double maxWeightAssignment(const std::vector<std::vector<double>>& w) {
  if (w.empty() || w.front().empty()) return 0.0;
  bool transposed = w.size() > w.front().size();
  std::size_t n = transposed ? w.front().size() : w.size();
  std::size_t m = transposed ? w.size() : w.front().size();
  auto weight = [&](std::size_t i, std::size_t j) { return transposed ? w[j][i] : w[i][j]; };
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      std::size_t i0 = p[j0], j1 = 0;
      double delta = inf;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        double cur = -weight(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) minv[j] = cur, way[j] = j0;
        if (minv[j] < delta) delta = minv[j], j1 = j;
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  double total = 0.0;
  for (std::size_t j = 1; j <= m; ++j)
    if (p[j] != 0) total += weight(p[j] - 1, j - 1);
  return total;
}

namespace detail {

struct FlatTree {
  std::vector<Expr> nodes;
  std::vector<std::vector<std::size_t>> kids;
  std::vector<std::size_t> depth;

  explicit FlatTree(const Expr& root) { add(root, 0); }

  std::size_t add(const Expr& e, std::size_t d) {
    std::size_t id = nodes.size();
    nodes.push_back(e);
    kids.emplace_back();
    depth.push_back(d);
    for (const auto& c : e.children()) {
      std::size_t k = add(c, d + 1);
      kids[id].push_back(k);
    }
    return id;
  }
};

/// Head similarity: taxonomic for compound nodes, exact for leaves.
inline double labelSim(const Expr& a, const Expr& b, const Taxonomy& tax, double gamma) {
  bool ca = a.isApply() || a.isBinder(), cb = b.isApply() || b.isBinder();
  if (ca && cb) return taxonomicSim(a.label(), b.label(), tax, gamma);
  if (ca || cb || a.kind() != b.kind()) return 0.0;
  return a == b ? 1.0 : 0.0;
}

/// Pairwise alignment tables between every query node and candidate node.
/// match: local node similarity plus the best assignment of child matches.
/// cover: exact label agreements plus the best assignment of child covers.
class Aligner {
 public:
  Aligner(const Expr& query, const Expr& cand, const Taxonomy* tax, const HybridParams& p)
      : q_(query), c_(cand), tax_(tax), p_(p),
        match_(q_.nodes.size() * c_.nodes.size(), -1.0), cover_(q_.nodes.size() * c_.nodes.size(), -1.0) {}

  const FlatTree& query() const { return q_; }
  const FlatTree& cand() const { return c_; }

  double match(std::size_t qi, std::size_t ci) {
    double& slot = match_[qi * c_.nodes.size() + ci];
    if (slot >= 0) return slot;
    double wNode = p_.taxWeight + p_.typeWeight;
    const Expr& a = q_.nodes[qi];
    const Expr& b = c_.nodes[ci];
    double local = wNode > 0 ? (p_.taxWeight * labelSim(a, b, *tax_, p_.gamma) + p_.typeWeight * typeLevelSim(a, b)) / wNode
                             : (a.label() == b.label() ? 1.0 : 0.0);
    slot = local + children(qi, ci, [&](std::size_t x, std::size_t y) { return match(x, y); });
    return slot;
  }

  double cover(std::size_t qi, std::size_t ci) {
    double& slot = cover_[qi * c_.nodes.size() + ci];
    if (slot >= 0) return slot;
    const Expr& a = q_.nodes[qi];
    const Expr& b = c_.nodes[ci];
    bool same = a.kind() == b.kind() && a.label() == b.label();
    slot = (same ? 1.0 : 0.0) + children(qi, ci, [&](std::size_t x, std::size_t y) { return cover(x, y); });
    return slot;
  }

 private:
  template <class F>
  double children(std::size_t qi, std::size_t ci, F f) {
    const auto& qk = q_.kids[qi];
    const auto& ck = c_.kids[ci];
    if (qk.empty() || ck.empty()) return 0.0;
    std::vector<std::vector<double>> w(qk.size(), std::vector<double>(ck.size()));
    for (std::size_t i = 0; i < qk.size(); ++i)
      for (std::size_t j = 0; j < ck.size(); ++j) w[i][j] = f(qk[i], ck[j]);
    return maxWeightAssignment(w);
  }

  FlatTree q_, c_;
  const Taxonomy* tax_;
  HybridParams p_;
  std::vector<double> match_, cover_;
};

}  // namespace detail

struct HybridMatch {
  double score = 0.0;
  double coverage = 0.0;
  /// Depth in the candidate of the node the query root aligned to.
  std::size_t anchorDepth = 0;
  bool anchored = false;
};

/// Aligns the query root with every candidate node whose label is in the same
/// taxonomic category (or equal, for leaves) and keeps the best depth-penalized combination of node similarity and
/// query coverage.
inline HybridMatch hybridMatch(const Expr& query, const Expr& cand, const Taxonomy& tax = defaultTaxonomy(),
                               const HybridParams& params = {}) {
  params.validate();
  HybridParams p = params.normalized();
  detail::Aligner al(query, cand, &tax, p);
  double n = static_cast<double>(al.query().nodes.size());
  double wNode = p.taxWeight + p.typeWeight;
  HybridMatch best;
  for (std::size_t ci = 0; ci < al.cand().nodes.size(); ++ci) {
    if (detail::labelSim(query, al.cand().nodes[ci], tax, p.gamma) < 1.0) continue;
    double m = al.match(0, ci) / n, c = al.cover(0, ci) / n;
    double s = depthPenalty(al.cand().depth[ci], p) * (wNode * m + p.coverageWeight * c) / (wNode + p.coverageWeight);
    if (!best.anchored || s > best.score) best = {s, c, al.cand().depth[ci], true};
  }
  if (query.isRelation() && !cand.isRelation()) best.score *= p.formulaBoost;
  best.score = std::clamp(best.score, 0.0, 1.0);
  best.coverage = std::clamp(best.coverage, 0.0, 1.0);
  return best;
}

inline double simHybrid(const Expr& query, const Expr& cand, const Taxonomy& tax = defaultTaxonomy(),
                        const HybridParams& params = {}) {
  return hybridMatch(query, cand, tax, params).score;
}

/// Largest fraction of query nodes whose labels agree under an alignment of
/// the query root with some candidate node.
inline double queryCoverage(const Expr& query, const Expr& cand) {
  HybridParams p;
  detail::Aligner al(query, cand, nullptr, p);
  double best = 0.0;
  for (std::size_t ci = 0; ci < al.cand().nodes.size(); ++ci) best = std::max(best, al.cover(0, ci));
  return best / static_cast<double>(al.query().nodes.size());
}

}  // namespace mathsim

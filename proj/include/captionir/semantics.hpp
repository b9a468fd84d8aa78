// Meaning lists (semantic graphs) from parse trees, unknown-word typing by
// co-occurrence, and the multi-interpretation view of a caption.

#ifndef CAPTIONIR_SEMANTICS_HPP_
#define CAPTIONIR_SEMANTICS_HPP_

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "captionir/counts.hpp"
#include "captionir/grammar.hpp"
#include "captionir/lexicon.hpp"
#include "captionir/parser.hpp"
#include "captionir/tree.hpp"

namespace captionir {

struct Predicate {
  enum class Kind { ako, property, relation };
  Kind kind = Kind::ako;
  std::string label;  // relation label; empty otherwise
  int a = 0;          // variable
  int b = 0;          // second variable of a relation
  SynsetId synset;    // ako / property argument

  friend auto operator<=>(const Predicate&, const Predicate&) = default;
  friend bool operator==(const Predicate&, const Predicate&) = default;
};

inline Predicate ako(int v, SynsetId s) {
  return {Predicate::Kind::ako, "", v, 0, std::move(s)};
}
inline Predicate property(int v, SynsetId s) {
  return {Predicate::Kind::property, "", v, 0, std::move(s)};
}
inline Predicate relation(std::string label, int a, int b) {
  return {Predicate::Kind::relation, std::move(label), a, b, {}};
}

/// Sorted, duplicate-free predicate set over integer variables.
struct MeaningList {
  std::vector<Predicate> predicates;

  void add(Predicate p) {
    auto it = std::lower_bound(predicates.begin(), predicates.end(), p);
    if (it == predicates.end() || !(*it == p)) predicates.insert(it, std::move(p));
  }
  std::set<int> variables() const {
    std::set<int> out;
    for (auto& p : predicates) {
      out.insert(p.a);
      if (p.kind == Predicate::Kind::relation) out.insert(p.b);
    }
    return out;
  }
  std::vector<SynsetId> types_of(int v) const {
    std::vector<SynsetId> out;
    for (auto& p : predicates)
      if (p.kind == Predicate::Kind::ako && p.a == v) out.push_back(p.synset);
    return out;
  }
  std::size_t size() const { return predicates.size(); }

  friend bool operator==(const MeaningList&, const MeaningList&) = default;
};

inline std::string var_name(int v) { return "v" + std::to_string(v); }

/// Line form: `ako v3 projectile-1`, `prop v3 big-1`, `rel locationover v3 v5`.
inline std::string to_text(const MeaningList& m) {
  std::string out;
  for (auto& p : m.predicates) {
    switch (p.kind) {
      case Predicate::Kind::ako:
        out += "ako " + var_name(p.a) + " " + p.synset.id + "\n";
        break;
      case Predicate::Kind::property:
        out += "prop " + var_name(p.a) + " " + p.synset.id + "\n";
        break;
      case Predicate::Kind::relation:
        out += "rel " + p.label + " " + var_name(p.a) + " " + var_name(p.b) + "\n";
        break;
    }
  }
  return out;
}

inline MeaningList meaning_from_text(std::string_view body) {
  MeaningList m;
  auto var = [](const std::string& s, std::size_t line) {
    int v = 0;
    if (s.size() < 2 || s[0] != 'v' || !text::parse_int(std::string_view(s).substr(1), v))
      throw FormatError("meaning list", line, "bad variable '" + s + "'");
    return v;
  };
  for (auto& line : text::content_lines(body)) {
    auto f = text::fields(line.content);
    if (f[0] == "ako" && f.size() == 3)
      m.add(ako(var(f[1], line.number), SynsetId(f[2])));
    else if (f[0] == "prop" && f.size() == 3)
      m.add(property(var(f[1], line.number), SynsetId(f[2])));
    else if (f[0] == "rel" && f.size() == 4)
      m.add(relation(f[1], var(f[2], line.number), var(f[3], line.number)));
    else
      throw FormatError("meaning list", line.number, "malformed predicate");
  }
  return m;
}

inline nlohmann::json to_json(const MeaningList& m) {
  nlohmann::json out = nlohmann::json::array();
  for (auto& p : m.predicates) {
    switch (p.kind) {
      case Predicate::Kind::ako:
        out.push_back({{"pred", "a_kind_of"}, {"var", var_name(p.a)}, {"synset", p.synset.id}});
        break;
      case Predicate::Kind::property:
        out.push_back({{"pred", "property"}, {"var", var_name(p.a)}, {"synset", p.synset.id}});
        break;
      case Predicate::Kind::relation:
        out.push_back({{"pred", "relation"}, {"label", p.label},
                       {"from", var_name(p.a)}, {"to", var_name(p.b)}});
        break;
    }
  }
  return out;
}

inline MeaningList meaning_from_json(const nlohmann::json& j) {
  MeaningList m;
  auto var = [](const nlohmann::json& v) {
    std::string s = v.get<std::string>();
    int n = 0;
    if (s.size() < 2 || s[0] != 'v' || !text::parse_int(std::string_view(s).substr(1), n))
      throw Error("meaning json: bad variable '" + s + "'");
    return n;
  };
  try {
    for (auto& p : j) {
      std::string kind = p.at("pred").get<std::string>();
      if (kind == "a_kind_of")
        m.add(ako(var(p.at("var")), SynsetId(p.at("synset").get<std::string>())));
      else if (kind == "property")
        m.add(property(var(p.at("var")), SynsetId(p.at("synset").get<std::string>())));
      else if (kind == "relation")
        m.add(relation(p.at("label").get<std::string>(), var(p.at("from")), var(p.at("to"))));
      else
        throw Error("meaning json: unknown predicate '" + kind + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("meaning json: ") + e.what());
  }
  return m;
}

namespace detail {

inline bool introduces_variable(const WordSense& s) {
  return s.pos == Pos::noun || s.pos == Pos::verb;
}
inline bool is_modifier(const WordSense& s) {
  return s.pos == Pos::adjective || s.pos == Pos::adverb;
}

inline void collect_leaves(const ParseNode& n, std::vector<const ParseNode*>& out) {
  if (n.is_leaf()) {
    out.push_back(&n);
    return;
  }
  collect_leaves(*n.left, out);
  if (n.right) collect_leaves(*n.right, out);
}

}  // namespace detail

/// Relation label of a binary node after preposition-class specialization.
inline std::string node_relation(const Grammar& g, const ParseNode& node) {
  const auto& r = g.rule(node.rule);
  const ParseNode& dep = r.head == 1 ? *node.right : *node.left;
  if (g.attaches_preposition(r) && dep.prep_leaf && dep.prep_leaf->sense->prep) {
    const auto& ps = *dep.prep_leaf->sense;
    if (auto l = g.specialize(r.relation, *ps.prep, ps.synset.lemma())) return *l;
  }
  return r.relation;
}

/// Nouns and verbs become variables typed by their synset; adjective and
/// adverb dependents become properties of their head; every other binary
/// node between two variables becomes a relation.  Variables are numbered
/// by token position.
inline MeaningList meaning_list(const Grammar& g, const ParseNode& tree) {
  std::vector<const ParseNode*> leaves;
  detail::collect_leaves(tree, leaves);
  std::map<const ParseNode*, int> var;
  MeaningList m;
  int next = 1;
  for (auto* leaf : leaves) {
    if (!leaf->sense) throw Error("malformed tree: leaf without a sense");
    if (!detail::introduces_variable(*leaf->sense)) continue;
    var[leaf] = next;
    m.add(ako(next, leaf->sense->synset));
    ++next;
  }
  auto walk = [&](auto&& self, const ParseNode& n) -> void {
    if (n.is_leaf()) return;
    self(self, *n.left);
    if (!n.right) return;
    self(self, *n.right);
    const auto& r = g.rule(n.rule);
    const ParseNode& head = r.head == 1 ? *n.left : *n.right;
    const ParseNode& dep = r.head == 1 ? *n.right : *n.left;
    auto hv = var.find(head.head_leaf);
    if (hv == var.end()) return;
    const WordSense& ds = dep.head_sense();
    if (detail::is_modifier(ds)) {
      m.add(property(hv->second, ds.synset));
      return;
    }
    auto dv = var.find(dep.head_leaf);
    if (dv == var.end() || dv->second == hv->second) return;
    m.add(relation(node_relation(g, n), hv->second, dv->second));
  };
  walk(walk, tree);
  return m;
}

// Isomorphism ---------------------------------------------------------------

namespace detail {

struct VarProfile {
  std::vector<std::string> unary;  // sorted "ako:x" / "prop:x"
  std::vector<std::string> out, in;

  friend bool operator==(const VarProfile&, const VarProfile&) = default;
  friend auto operator<=>(const VarProfile&, const VarProfile&) = default;
};

inline std::map<int, VarProfile> profiles(const MeaningList& m) {
  std::map<int, VarProfile> out;
  for (int v : m.variables()) out[v];
  for (auto& p : m.predicates) {
    switch (p.kind) {
      case Predicate::Kind::ako: out[p.a].unary.push_back("ako:" + p.synset.id); break;
      case Predicate::Kind::property: out[p.a].unary.push_back("prop:" + p.synset.id); break;
      case Predicate::Kind::relation:
        out[p.a].out.push_back(p.label + (p.a == p.b ? "@self" : ""));
        out[p.b].in.push_back(p.label + (p.a == p.b ? "@self" : ""));
        break;
    }
  }
  for (auto& [v, pr] : out) {
    std::sort(pr.unary.begin(), pr.unary.end());
    std::sort(pr.out.begin(), pr.out.end());
    std::sort(pr.in.begin(), pr.in.end());
  }
  return out;
}

inline MeaningList rename(const MeaningList& m, const std::map<int, int>& map) {
  MeaningList out;
  for (auto p : m.predicates) {
    p.a = map.at(p.a);
    if (p.kind == Predicate::Kind::relation) p.b = map.at(p.b);
    out.add(p);
  }
  return out;
}

}  // namespace detail

/// Equality up to a bijective renaming of variables.
inline bool isomorphic(const MeaningList& x, const MeaningList& y) {
  if (x.size() != y.size()) return false;
  auto px = detail::profiles(x), py = detail::profiles(y);
  if (px.size() != py.size()) return false;
  std::vector<int> xs;
  for (auto& [v, p] : px) xs.push_back(v);
  std::map<int, int> map;
  std::set<int> used;
  auto search = [&](auto&& self, std::size_t i) -> bool {
    if (i == xs.size()) return detail::rename(x, map) == y;
    int v = xs[i];
    for (auto& [w, pw] : py) {
      if (used.count(w) || !(pw == px[v])) continue;
      // Relations between already-mapped variables must exist in y.
      bool ok = true;
      for (auto& p : x.predicates) {
        if (p.kind != Predicate::Kind::relation) continue;
        if (p.a != v && p.b != v) continue;
        int other = p.a == v ? p.b : p.a;
        if (other != v && !map.count(other)) continue;
        int ma = p.a == v ? w : map[p.a];
        int mb = p.b == v ? w : map[p.b];
        if (!std::binary_search(y.predicates.begin(), y.predicates.end(),
                                relation(p.label, ma, mb))) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      map[v] = w;
      used.insert(w);
      if (self(self, i + 1)) return true;
      map.erase(v);
      used.erase(w);
    }
    return false;
  };
  return search(search, 0);
}

// Lexical analysis and unknown words ---------------------------------------

struct ContextPair {
  enum class Slot { head, dependent };
  std::string key;  // statistics key of the binary node
  Slot slot;        // the unknown word's slot
  SynsetId known;   // the other word's sense
};

struct Classification {
  std::vector<std::pair<SynsetId, double>> ranking;  // best first
  bool low_confidence = false;
};

/// Types an unknown word by how well each candidate category co-occurs with
/// the words around it.  Ties fall back to the candidates' unary counts.
inline Classification classify_unknown(const ParseContext& ctx,
                                       const std::vector<ContextPair>& context,
                                       const std::vector<SynsetId>& candidates) {
  Classification out;
  std::vector<SynsetId> cands;
  for (auto& c : candidates)
    if (ctx.lexicon.has_synset(c)) cands.push_back(c);
  if (cands.empty()) throw Error("classify_unknown: no candidate categories");
  if (context.empty()) {
    out.low_confidence = true;
    for (auto& c : cands) out.ranking.emplace_back(c, 0.0);
    return out;
  }
  std::vector<std::tuple<double, std::uint64_t, std::size_t, SynsetId>> scored;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    double score = 1.0;
    for (auto& cp : context) {
      bool head = cp.slot == ContextPair::Slot::head;
      score *= estimated_pair_count(ctx.store, ctx.lexicon, ctx.policy, cp.key,
                                    head ? cands[i] : cp.known,
                                    head ? cp.known : cands[i], ctx.counts)
                   .estimate;
    }
    scored.emplace_back(score, ctx.store.unary_count(cands[i]), i, cands[i]);
  }
  std::sort(scored.begin(), scored.end(), [](auto& a, auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) > std::get<1>(b);
    return std::get<2>(a) < std::get<2>(b);
  });
  for (auto& [score, unary, idx, syn] : scored) out.ranking.emplace_back(syn, score);
  return out;
}

struct AnalysisOptions {
  ResolverOptions resolver;
  std::vector<SynsetId> unknown_roots{SynsetId("equipment-1"),
                                      SynsetId("person-1"),
                                      SynsetId("place-1")};
};

struct UnknownWord {
  std::size_t index;
  std::string token;
  Classification classification;
};

struct Analysis {
  Lattice lattice;
  std::vector<UnknownWord> unknowns;
};

/// Context pairs a parse gives the token at `index`.
inline std::vector<ContextPair> context_pairs(const ParseNode& tree,
                                              std::size_t index) {
  std::vector<ContextPair> out;
  auto walk = [&](auto&& self, const ParseNode& n) -> void {
    if (n.is_leaf()) return;
    self(self, *n.left);
    if (!n.right) return;
    self(self, *n.right);
    const ParseNode* hl = n.head_leaf;
    const ParseNode* dl = n.left->head_leaf == hl ? n.right->head_leaf
                                                  : n.left->head_leaf;
    if (hl->begin == index && dl->begin != index)
      out.push_back({n.stat_key, ContextPair::Slot::head, dl->sense->synset});
    else if (dl->begin == index && hl->begin != index)
      out.push_back({n.stat_key, ContextPair::Slot::dependent, hl->sense->synset});
  };
  walk(walk, tree);
  return out;
}

/// Candidate senses for one token: special formats, then the lexicon, then
/// misspelling/abbreviation resolution.  Empty for a truly unknown word.
inline std::vector<WordSense> token_senses(const Lexicon& lex,
                                           const std::string& token,
                                           const ResolverOptions& opt = {}) {
  if (auto sp = lex.classify_special(token)) {
    WordSense s;
    s.surface = token;
    s.pos = lex.info(sp->first).pos;
    s.synset = sp->first;
    s.frequency_rank = lex.info(sp->first).frequency_rank;
    s.form = Form::special;
    s.value = sp->second;
    return {s};
  }
  auto senses = lex.lookup_senses(token);
  if (!senses.empty()) return senses;
  auto res = lex.resolve_unknown(token, opt);
  if (res.empty()) return {};
  auto resolved = lex.lookup_senses(res.front().surface);
  for (auto& s : resolved) {
    s.surface = token;
    s.form = Form::resolved;
  }
  return resolved;
}

inline std::vector<WordSense> unknown_senses(const Lexicon& lex,
                                             const std::string& token,
                                             const std::vector<SynsetId>& roots) {
  std::vector<WordSense> out;
  for (auto& r : roots) {
    if (!lex.has_synset(r)) continue;
    WordSense s;
    s.surface = token;
    s.pos = lex.info(r).pos;
    s.synset = r;
    s.frequency_rank = lex.info(r).frequency_rank;
    s.form = Form::classified;
    out.push_back(s);
  }
  return out;
}

/// Tokenizes and assigns candidate senses.  Unknown words are typed by a
/// first parse in which they may take any open-class category; the winning
/// category then becomes their only sense.
inline Analysis analyze(const ParseContext& ctx, std::string_view caption,
                        const AnalysisOptions& opt = {}) {
  Analysis a;
  for (auto& tok : ctx.lexicon.tokenize(caption)) {
    auto senses = token_senses(ctx.lexicon, tok.text, opt.resolver);
    if (senses.empty()) {
      a.unknowns.push_back({a.lattice.size(), tok.text, {}});
      senses = unknown_senses(ctx.lexicon, tok.text, opt.unknown_roots);
    }
    a.lattice.push_back({tok, std::move(senses)});
  }
  if (a.unknowns.empty() || a.lattice.empty()) return a;

  NodePtr first;
  try {
    first = nbest_parse(ctx, a.lattice, 1).trees.front();
  } catch (const NoParseError&) {
  }
  for (auto& u : a.unknowns) {
    std::vector<ContextPair> context;
    if (first) context = context_pairs(*first, u.index);
    u.classification = classify_unknown(ctx, context, opt.unknown_roots);
    const SynsetId& winner = u.classification.ranking.front().first;
    auto& senses = a.lattice[u.index].senses;
    std::erase_if(senses, [&](auto& s) { return s.synset != winner; });
  }
  return a;
}

struct Interpretation {
  MeaningList meaning;
  NodePtr tree;
  double score;
};

struct InterpretationOptions {
  std::size_t max_alternatives = 5;
  double margin = std::log(100.0);
  AnalysisOptions analysis;
};

/// Meaning lists of the parses scoring within `margin` of the best, with
/// isomorphic graphs merged, best first.
inline std::vector<Interpretation> interpretations(
    const ParseContext& ctx, std::string_view caption,
    const InterpretationOptions& opt = {}) {
  if (opt.max_alternatives < 1)
    throw Error("interpretations: maxAlternatives must be at least 1");
  Analysis a = analyze(ctx, caption, opt.analysis);
  if (a.lattice.empty()) throw NoParseError("no parse; empty caption", {});
  auto result = nbest_parse(ctx, a.lattice, opt.max_alternatives);
  std::vector<Interpretation> out;
  double best = result.trees.front()->score;
  for (auto& t : result.trees) {
    if (t->score < best - opt.margin) break;
    MeaningList m = meaning_list(ctx.grammar, *t);
    bool dup = std::any_of(out.begin(), out.end(), [&](auto& i) {
      return isomorphic(i.meaning, m);
    });
    if (!dup) out.push_back({std::move(m), t, t->score});
  }
  return out;
}

}  // namespace captionir

#endif  // CAPTIONIR_SEMANTICS_HPP_

// Caption index and query matching over meaning lists, with type-hierarchy,
// one-hop part-of, and relation-alias expansion.

#ifndef CAPTIONIR_RETRIEVAL_HPP_
#define CAPTIONIR_RETRIEVAL_HPP_

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "captionir/lexicon.hpp"
#include "captionir/parser.hpp"
#include "captionir/semantics.hpp"

namespace captionir {

/// Folds a verb that stands for a relation ("mounted", "attached") into a
/// direct edge: x -participle-mod-> v -any-> y becomes L(x, y) when v's
/// synset has relation alias L and v has exactly that one edge in and one
/// out.  Relation labels are then replaced by their aliases.
inline MeaningList canonicalize(const Lexicon& lex, const MeaningList& m) {
  std::map<int, std::vector<const Predicate*>> in, out;
  std::map<int, SynsetId> type;
  for (auto& p : m.predicates) {
    if (p.kind == Predicate::Kind::relation) {
      out[p.a].push_back(&p);
      in[p.b].push_back(&p);
    } else if (p.kind == Predicate::Kind::ako) {
      type.emplace(p.a, p.synset);
    }
  }
  std::set<const Predicate*> removed;
  std::set<int> folded;
  std::vector<Predicate> added;
  for (auto& [v, syn] : type) {
    if (!lex.has_synset(syn) || lex.info(syn).pos != Pos::verb) continue;
    auto label = lex.relation_alias(syn);
    if (!label) continue;
    auto& ins = in[v];
    auto& outs = out[v];
    if (ins.size() != 1 || outs.size() != 1) continue;
    if (ins[0]->label != "participle-mod") continue;
    int x = ins[0]->a, y = outs[0]->b;
    if (x == y || folded.count(x) || folded.count(y)) continue;
    removed.insert(ins[0]);
    removed.insert(outs[0]);
    folded.insert(v);
    added.push_back(relation(*label, x, y));
  }
  MeaningList res;
  for (auto& p : m.predicates) {
    if (removed.count(&p)) continue;
    if (p.kind != Predicate::Kind::relation && folded.count(p.a)) continue;
    Predicate q = p;
    if (q.kind == Predicate::Kind::relation)
      if (auto l = lex.relation_alias(std::string_view(q.label))) q.label = *l;
    res.add(q);
  }
  for (auto& p : added) res.add(p);
  return res;
}

/// Whether a caption entity of type `have` satisfies a query type `want`:
/// the same synset or a descendant, or a part of such a thing (one hop).
inline bool type_satisfies(const Lexicon& lex, const SynsetId& have,
                           const SynsetId& want) {
  if (!lex.has_synset(have) || !lex.has_synset(want)) return have == want;
  if (lex.is_a(have, want)) return true;
  std::vector<SynsetId> up{have};
  for (auto& s : lex.superconcepts(have)) up.push_back(s);
  for (auto& s : up)
    for (auto& whole : lex.info(s).wholes)
      if (lex.is_a(whole, want)) return true;
  return false;
}

struct MatchBinding {
  std::map<int, int> variables;  // query variable -> caption variable
  std::size_t interpretation = 0;
  std::size_t matched = 0;  // query predicates witnessed
};

/// Maps every query predicate onto the caption graph, or returns nothing.
inline std::optional<MatchBinding> graph_match(const Lexicon& lex,
                                               const MeaningList& query,
                                               const MeaningList& caption) {
  MeaningList q = canonicalize(lex, query);
  MeaningList c = canonicalize(lex, caption);

  struct Need {
    std::vector<SynsetId> types, props;
  };
  std::map<int, Need> need;
  for (int v : q.variables()) need[v];
  for (auto& p : q.predicates) {
    if (p.kind == Predicate::Kind::ako) need[p.a].types.push_back(p.synset);
    if (p.kind == Predicate::Kind::property) need[p.a].props.push_back(p.synset);
  }
  std::map<int, std::vector<SynsetId>> ctypes, cprops;
  for (auto& p : c.predicates) {
    if (p.kind == Predicate::Kind::ako) ctypes[p.a].push_back(p.synset);
    if (p.kind == Predicate::Kind::property) cprops[p.a].push_back(p.synset);
  }
  auto cvars = c.variables();

  auto fits = [&](int qv, int cv) {
    for (auto& want : need[qv].types) {
      bool ok = std::any_of(ctypes[cv].begin(), ctypes[cv].end(),
                            [&](auto& have) { return type_satisfies(lex, have, want); });
      if (!ok) return false;
    }
    for (auto& want : need[qv].props)
      if (std::find(cprops[cv].begin(), cprops[cv].end(), want) == cprops[cv].end())
        return false;
    return true;
  };

  // Most constrained variables first.
  std::vector<int> order;
  std::map<int, std::vector<int>> options;
  for (auto& [qv, n] : need) {
    for (int cv : cvars)
      if (fits(qv, cv)) options[qv].push_back(cv);
    if (options[qv].empty()) return std::nullopt;
    order.push_back(qv);
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return options[a].size() < options[b].size();
  });

  std::vector<const Predicate*> rels;
  for (auto& p : q.predicates)
    if (p.kind == Predicate::Kind::relation) rels.push_back(&p);

  std::map<int, int> map;
  std::set<int> used;
  auto consistent = [&]() {
    for (auto* r : rels) {
      auto a = map.find(r->a), b = map.find(r->b);
      if (a == map.end() || b == map.end()) continue;
      if (!std::binary_search(c.predicates.begin(), c.predicates.end(),
                              relation(r->label, a->second, b->second)))
        return false;
    }
    return true;
  };
  auto search = [&](auto&& self, std::size_t i) -> bool {
    if (i == order.size()) return true;
    int qv = order[i];
    for (int cv : options[qv]) {
      if (used.count(cv)) continue;
      map[qv] = cv;
      used.insert(cv);
      if (consistent() && self(self, i + 1)) return true;
      map.erase(qv);
      used.erase(cv);
    }
    return false;
  };
  if (!search(search, 0)) return std::nullopt;
  MatchBinding b;
  b.variables = map;
  b.matched = q.size();
  return b;
}

// Index ---------------------------------------------------------------------

struct CaptionRecord {
  std::string id;
  std::string text;
  std::vector<MeaningList> interpretations;
  double best_score = 0;
  bool parsed = false;
  std::string diagnostic;  // why an unparsed record failed

  friend bool operator==(const CaptionRecord&, const CaptionRecord&) = default;
};

struct SearchHit {
  std::string caption_id;
  std::size_t matched = 0;
  double best_score = 0;
  MatchBinding binding;
};

class CaptionIndex {
 public:
  const std::map<std::string, CaptionRecord>& records() const { return records_; }
  bool contains(const std::string& id) const { return records_.count(id) > 0; }
  const CaptionRecord& record(const std::string& id) const {
    auto it = records_.find(id);
    if (it == records_.end()) throw Error("unknown caption " + id);
    return it->second;
  }
  std::size_t size() const { return records_.size(); }

  void add(const Lexicon& lex, CaptionRecord r) {
    if (r.id.empty()) throw Error("caption id is empty");
    if (records_.count(r.id)) throw Error("duplicate caption id " + r.id);
    if (r.parsed && r.interpretations.empty())
      throw Error("caption " + r.id + " has no interpretation");
    if (r.parsed)
      for (auto& m : r.interpretations)
        for (auto& key : index_keys(lex, m)) inverted_[key].insert(r.id);
    records_.emplace(r.id, std::move(r));
  }

  /// Captions holding, for every type the query names, some entity that
  /// could satisfy it.  A superset of the matches.
  std::set<std::string> candidates(const MeaningList& query) const {
    std::set<SynsetId> wanted;
    for (auto& p : query.predicates)
      if (p.kind == Predicate::Kind::ako) wanted.insert(p.synset);
    std::set<std::string> out;
    bool first = true;
    for (auto& s : wanted) {
      auto it = inverted_.find(s);
      if (it == inverted_.end()) return {};
      if (first) {
        out = it->second;
        first = false;
        continue;
      }
      std::set<std::string> both;
      std::set_intersection(out.begin(), out.end(), it->second.begin(),
                            it->second.end(), std::inserter(both, both.end()));
      out.swap(both);
    }
    if (first)
      for (auto& [id, r] : records_)
        if (r.parsed) out.insert(id);
    return out;
  }

  /// Every synset under which a caption entity can be found: its type, the
  /// type's superconcepts, and the wholes (and their superconcepts) that it
  /// or a superconcept is part of.
  static std::set<SynsetId> index_keys(const Lexicon& lex, const MeaningList& m) {
    std::set<SynsetId> keys;
    for (auto& p : m.predicates) {
      if (p.kind != Predicate::Kind::ako) continue;
      keys.insert(p.synset);
      if (!lex.has_synset(p.synset)) continue;
      std::vector<SynsetId> up{p.synset};
      for (auto& s : lex.superconcepts(p.synset)) up.push_back(s);
      for (auto& s : up) {
        keys.insert(s);
        for (auto& w : lex.info(s).wholes) {
          keys.insert(w);
          for (auto& ws : lex.superconcepts(w)) keys.insert(ws);
        }
      }
    }
    return keys;
  }

 private:
  std::map<std::string, CaptionRecord> records_;
  std::map<SynsetId, std::set<std::string>> inverted_;
};

inline CaptionRecord make_record(const ParseContext& ctx, const std::string& id,
                                 const std::string& caption,
                                 const InterpretationOptions& opt = {}) {
  if (text::trim(caption).empty()) throw Error("caption " + id + " has empty text");
  CaptionRecord r;
  r.id = id;
  r.text = caption;
  try {
    auto interps = interpretations(ctx, caption, opt);
    for (auto& i : interps) r.interpretations.push_back(i.meaning);
    r.best_score = interps.front().score;
    r.parsed = true;
  } catch (const NoParseError& e) {
    r.diagnostic = e.what();
  }
  return r;
}

/// Parses and indexes one caption.  Unparsable captions are stored with
/// their diagnostic and excluded from search.
inline const CaptionRecord& index_caption(const ParseContext& ctx,
                                          CaptionIndex& index,
                                          const std::string& id,
                                          const std::string& caption,
                                          const InterpretationOptions& opt = {}) {
  if (index.contains(id)) throw Error("duplicate caption id " + id);
  index.add(ctx.lexicon, make_record(ctx, id, caption, opt));
  return index.record(id);
}

/// Best binding of any query interpretation against any caption
/// interpretation: most predicates matched, then earliest interpretations.
inline std::optional<MatchBinding> match_record(
    const Lexicon& lex, const std::vector<MeaningList>& query,
    const CaptionRecord& r) {
  std::optional<MatchBinding> best;
  for (auto& q : query) {
    for (std::size_t i = 0; i < r.interpretations.size(); ++i) {
      auto b = graph_match(lex, q, r.interpretations[i]);
      if (!b) continue;
      b->interpretation = i;
      if (!best || b->matched > best->matched) best = b;
      break;
    }
  }
  return best;
}

/// Union over query interpretations; ranked by predicates matched, then
/// caption parse score, then caption id.
inline std::vector<SearchHit> search(const ParseContext& ctx,
                                     const CaptionIndex& index,
                                     std::string_view query, std::size_t k,
                                     const InterpretationOptions& opt = {}) {
  if (k < 1) throw Error("search: k must be at least 1");
  std::vector<MeaningList> graphs;
  for (auto& i : interpretations(ctx, query, opt)) graphs.push_back(i.meaning);
  std::set<std::string> cands;
  for (auto& g : graphs) {
    auto c = index.candidates(canonicalize(ctx.lexicon, g));
    cands.insert(c.begin(), c.end());
  }
  std::vector<SearchHit> hits;
  for (auto& id : cands) {
    const auto& r = index.record(id);
    if (!r.parsed) continue;
    if (auto b = match_record(ctx.lexicon, graphs, r))
      hits.push_back({id, b->matched, r.best_score, *b});
  }
  std::sort(hits.begin(), hits.end(), [](auto& a, auto& b) {
    if (a.matched != b.matched) return a.matched > b.matched;
    if (a.best_score != b.best_score) return a.best_score > b.best_score;
    return a.caption_id < b.caption_id;
  });
  if (hits.size() > k) hits.resize(k);
  return hits;
}

// Persistence ---------------------------------------------------------------

inline nlohmann::json to_json(const CaptionRecord& r) {
  nlohmann::json j;
  j["captionId"] = r.id;
  j["text"] = r.text;
  j["parsed"] = r.parsed;
  if (r.parsed) {
    j["bestScore"] = r.best_score;
    nlohmann::json list = nlohmann::json::array();
    for (auto& m : r.interpretations) list.push_back(to_json(m));
    j["interpretations"] = list;
  } else {
    j["diagnostic"] = r.diagnostic;
  }
  return j;
}

inline CaptionRecord record_from_json(const nlohmann::json& j) {
  CaptionRecord r;
  try {
    r.id = j.at("captionId").get<std::string>();
    r.text = j.at("text").get<std::string>();
    r.parsed = j.at("parsed").get<bool>();
    if (r.parsed) {
      r.best_score = j.at("bestScore").get<double>();
      for (auto& m : j.at("interpretations"))
        r.interpretations.push_back(meaning_from_json(m));
    } else {
      r.diagnostic = j.value("diagnostic", "");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("index record: ") + e.what());
  }
  return r;
}

inline std::string save_index(const CaptionIndex& index) {
  nlohmann::json j;
  j["schema"] = 1;
  nlohmann::json list = nlohmann::json::array();
  for (auto& [id, r] : index.records()) list.push_back(to_json(r));
  j["captions"] = list;
  return j.dump(1) + "\n";
}

inline CaptionIndex load_index(const Lexicon& lex, std::string_view body) {
  CaptionIndex index;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("index file: ") + e.what());
  }
  if (!j.contains("captions")) throw Error("index file: missing captions");
  for (auto& r : j["captions"]) index.add(lex, record_from_json(r));
  return index;
}

/// `<caption-id>\t<text>` records; blank and `#` lines ignored.
inline std::vector<std::pair<std::string, std::string>> load_corpus(
    std::string_view body) {
  std::vector<std::pair<std::string, std::string>> out;
  std::set<std::string> seen;
  for (auto& line : text::content_lines(body)) {
    auto tab = line.content.find('\t');
    if (tab == std::string::npos)
      throw FormatError("corpus", line.number, "expected '<caption-id><TAB><text>'");
    std::string id(text::trim(line.content.substr(0, tab)));
    std::string caption(text::trim(line.content.substr(tab + 1)));
    if (id.empty()) throw FormatError("corpus", line.number, "empty caption id");
    if (caption.empty()) throw FormatError("corpus", line.number, "empty caption text");
    if (!seen.insert(id).second)
      throw FormatError("corpus", line.number, "duplicate caption id " + id);
    out.emplace_back(id, caption);
  }
  return out;
}

}  // namespace captionir

#endif  // CAPTIONIR_RETRIEVAL_HPP_

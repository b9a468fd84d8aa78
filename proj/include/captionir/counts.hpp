// Co-occurrence counts database.
//
// Pair counts are keyed by (statistics key, head synset, dependent synset).
// The statistics key is the rule id, suffixed with "@<class>" for nodes that
// attach a prepositional phrase.  Every increment is propagated to the full
// cross-product of the two synsets' superconcepts, so any generalization of
// a stored pair can be read directly.  Missing pairs are estimated from the
// nearest well-populated generalization by scaling with unary counts, and
// compaction drops pairs that such an estimate already reproduces to within
// one standard deviation.
//
// CountStore is a plain value type and is not internally synchronized; the
// engine serializes writers against readers.

#ifndef CAPTIONIR_COUNTS_HPP_
#define CAPTIONIR_COUNTS_HPP_

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "captionir/grammar.hpp"
#include "captionir/lexicon.hpp"
#include "captionir/text.hpp"

namespace captionir {

struct PairKey {
  std::string rule;
  SynsetId first;
  SynsetId second;

  friend auto operator<=>(const PairKey&, const PairKey&) = default;
  friend bool operator==(const PairKey&, const PairKey&) = default;
};

inline std::string stat_key(std::string_view rule_id,
                            std::optional<PrepClass> prep = std::nullopt) {
  std::string k(rule_id);
  if (prep) k += "@" + std::string(prep_class_name(*prep));
  return k;
}

inline std::string_view stat_key_rule(std::string_view key) {
  return key.substr(0, key.find('@'));
}

enum class PairIndex { first, first_sense_pos, second, second_sense_pos };

inline constexpr std::string_view pair_index_name(PairIndex i) {
  switch (i) {
    case PairIndex::first: return "first";
    case PairIndex::first_sense_pos: return "firstSensePos";
    case PairIndex::second: return "second";
    case PairIndex::second_sense_pos: return "secondSensePos";
  }
  return "first";
}

/// Synsets whose subconcepts are only ever counted at the category itself
/// (identification numbers, dates, personal names).
struct CodePolicy {
  std::set<SynsetId> categories;
};

struct CountOptions {
  std::uint64_t threshold = 5;  // minimum ancestor-pair count to inherit from
  double floor = 0.5;           // estimate when nothing qualifies
  std::size_t max_depth = 0;    // ancestor depth cap for increments; 0 = none
};

class CountStore {
 public:
  using Entry = std::pair<PairKey, std::uint64_t>;

  std::uint64_t pair_count(const PairKey& k) const {
    auto it = pairs_.find(k);
    return it == pairs_.end() ? 0 : it->second;
  }
  std::uint64_t unary_count(const SynsetId& s) const {
    auto it = unary_.find(s);
    return it == unary_.end() ? 0 : it->second;
  }
  std::uint64_t total() const { return total_; }
  /// Learned rule counts, added on top of the grammar file's counts.
  std::uint64_t rule_count(const std::string& id) const {
    auto it = rules_.find(id);
    return it == rules_.end() ? 0 : it->second;
  }
  const std::map<std::string, std::uint64_t>& rule_counts() const {
    return rules_;
  }
  const std::map<PairKey, std::uint64_t>& pairs() const { return pairs_; }
  const std::map<SynsetId, std::uint64_t>& unary() const { return unary_; }
  bool empty() const {
    return pairs_.empty() && unary_.empty() && rules_.empty() && !total_;
  }

  void add_pair(const PairKey& k, std::uint64_t delta) {
    if (!delta) return;
    auto [it, fresh] = pairs_.try_emplace(k, 0);
    it->second += delta;
    if (fresh) index_insert(k);
  }
  void remove_pair(const PairKey& k) {
    if (pairs_.erase(k)) index_erase(k);
  }
  void add_unary(const SynsetId& s, std::uint64_t delta) {
    if (delta) unary_[s] += delta;
  }
  void add_total(std::uint64_t delta) { total_ += delta; }
  void add_rule(const std::string& id, std::uint64_t delta) {
    if (delta) rules_[id] += delta;
  }

  /// Every stored pair whose indexed component equals `key`, ordered by
  /// PairKey.  Word indexes take a lemma ("f-18"); sense indexes take a
  /// synset id ("f-18-1"), which already fixes the part of speech.
  std::vector<Entry> lookup_by(PairIndex index, std::string_view key) const {
    std::vector<Entry> out;
    const auto& idx = index_for(index);
    auto it = idx.find(std::string(key));
    if (it == idx.end()) return out;
    for (auto& k : it->second) out.emplace_back(k, pairs_.at(k));
    return out;
  }

  /// All keys reachable through one index (for consistency checks).
  std::set<PairKey> index_keys(PairIndex index) const {
    std::set<PairKey> out;
    for (auto& [key, set] : index_for(index)) out.insert(set.begin(), set.end());
    return out;
  }

  friend bool operator==(const CountStore& a, const CountStore& b) {
    return a.pairs_ == b.pairs_ && a.unary_ == b.unary_ &&
           a.rules_ == b.rules_ && a.total_ == b.total_;
  }

 private:
  using Index = std::map<std::string, std::set<PairKey>>;

  const Index& index_for(PairIndex i) const {
    switch (i) {
      case PairIndex::first: return by_first_word_;
      case PairIndex::first_sense_pos: return by_first_sense_;
      case PairIndex::second: return by_second_word_;
      case PairIndex::second_sense_pos: return by_second_sense_;
    }
    return by_first_word_;
  }
  void index_insert(const PairKey& k) {
    by_first_word_[std::string(k.first.lemma())].insert(k);
    by_first_sense_[k.first.id].insert(k);
    by_second_word_[std::string(k.second.lemma())].insert(k);
    by_second_sense_[k.second.id].insert(k);
  }
  static void erase_from(Index& idx, const std::string& key, const PairKey& k) {
    auto it = idx.find(key);
    if (it == idx.end()) return;
    it->second.erase(k);
    if (it->second.empty()) idx.erase(it);
  }
  void index_erase(const PairKey& k) {
    erase_from(by_first_word_, std::string(k.first.lemma()), k);
    erase_from(by_first_sense_, k.first.id, k);
    erase_from(by_second_word_, std::string(k.second.lemma()), k);
    erase_from(by_second_sense_, k.second.id, k);
  }

  std::map<PairKey, std::uint64_t> pairs_;
  std::map<SynsetId, std::uint64_t> unary_;
  std::map<std::string, std::uint64_t> rules_;
  std::uint64_t total_ = 0;
  Index by_first_word_, by_first_sense_, by_second_word_, by_second_sense_;
};

/// Nearest code category at or above `s`, else `s` itself.
inline SynsetId generalize_code(const Lexicon& lex, const CodePolicy& policy,
                                const SynsetId& s) {
  if (policy.categories.empty() || policy.categories.count(s)) return s;
  for (auto& a : lex.ancestors(s))
    if (policy.categories.count(a.synset)) return a.synset;
  return s;
}

/// `s` followed by its ancestors, each with its depth, honouring the cap.
inline std::vector<Ancestor> self_and_ancestors(const Lexicon& lex,
                                                const SynsetId& s,
                                                std::size_t max_depth = 0) {
  std::vector<Ancestor> out{{s, 0}};
  for (auto& a : lex.ancestors(s))
    if (!max_depth || a.depth <= max_depth) out.push_back(a);
  return out;
}

namespace detail {

inline void check_known(const Lexicon& lex, const SynsetId& s) {
  if (!lex.has_synset(s)) throw Error("unknown synset " + s.id);
}

inline void check_rule(const Grammar& g, std::string_view key) {
  if (!g.has_rule(stat_key_rule(key)))
    throw Error("unknown rule " + std::string(stat_key_rule(key)));
}

}  // namespace detail

/// Adds `delta` to the pair and to every superconcept generalization of it,
/// and to the unary counts of both synsets and their superconcepts.
inline void increment_pair(CountStore& store, const Lexicon& lex,
                           const Grammar& grammar, const CodePolicy& policy,
                           std::string_view key, const SynsetId& head,
                           const SynsetId& dep, std::uint64_t delta,
                           const CountOptions& opt = {}) {
  detail::check_rule(grammar, key);
  detail::check_known(lex, head);
  detail::check_known(lex, dep);
  if (delta < 1) throw Error("increment_pair: delta must be positive");
  auto heads = self_and_ancestors(lex, generalize_code(lex, policy, head),
                                  opt.max_depth);
  auto deps = self_and_ancestors(lex, generalize_code(lex, policy, dep),
                                 opt.max_depth);
  for (auto& h : heads)
    for (auto& d : deps)
      store.add_pair({std::string(key), h.synset, d.synset}, delta);
  for (auto& h : heads) store.add_unary(h.synset, delta);
  for (auto& d : deps) store.add_unary(d.synset, delta);
}

/// Counts one word instance: the sense and all its superconcepts.
inline void increment_unary(CountStore& store, const Lexicon& lex,
                            const CodePolicy& policy, const SynsetId& s,
                            std::uint64_t delta,
                            const CountOptions& opt = {}) {
  detail::check_known(lex, s);
  for (auto& a :
       self_and_ancestors(lex, generalize_code(lex, policy, s), opt.max_depth))
    store.add_unary(a.synset, delta);
  store.add_total(delta);
}

struct AntisampleEstimate {
  double estimate = 0;
  double proportion_stddev = 0;
  double count_stddev = 0;  // n * proportion_stddev
};

/// Estimate of a subpopulation count from a population count: A is the
/// population's pair count, n and N the unary counts of the subpopulation
/// and the population.  The deviation is the finite-population standard
/// deviation of the sampled proportion.
inline AntisampleEstimate antisample_estimate(double A, double n, double N) {
  if (!(N >= 2)) throw Error("antisample_estimate: N must be at least 2");
  if (!(n > 0)) throw Error("antisample_estimate: n must be positive");
  if (!(n <= N)) throw Error("antisample_estimate: n must not exceed N");
  if (!(A >= 0)) throw Error("antisample_estimate: A must be nonnegative");
  if (!(A <= N)) throw Error("antisample_estimate: A must not exceed N");
  AntisampleEstimate e;
  e.estimate = A * n / N;
  double var = A * (N - A) * (N - n) / (n * N * N * (N - 1));
  e.proportion_stddev = std::sqrt(var);
  e.count_stddev = n * e.proportion_stddev;
  return e;
}

struct PairEstimate {
  enum class Source { exact, inherited, floor };
  double estimate = 0;
  Source source = Source::floor;
  PairKey basis;             // the pair the estimate was read from
  double count_stddev = 0;   // zero unless inherited
};

inline constexpr std::string_view source_name(PairEstimate::Source s) {
  switch (s) {
    case PairEstimate::Source::exact: return "exact";
    case PairEstimate::Source::inherited: return "inherited";
    case PairEstimate::Source::floor: return "floor";
  }
  return "floor";
}

namespace detail {

struct Generalization {
  std::size_t head_depth, dep_depth;
  std::size_t head_rank, dep_rank;  // position in the BFS ancestor lists
  SynsetId head, dep;
};

// Ancestor pairs of (head, dep) other than the pair itself, in search order:
// total generalization distance, then the dependent slot generalized first,
// then breadth-first order within each slot.
inline std::vector<Generalization> generalizations(const Lexicon& lex,
                                                   const SynsetId& head,
                                                   const SynsetId& dep) {
  auto hs = self_and_ancestors(lex, head);
  auto ds = self_and_ancestors(lex, dep);
  std::vector<Generalization> out;
  for (std::size_t i = 0; i < hs.size(); ++i)
    for (std::size_t j = 0; j < ds.size(); ++j)
      if (i || j)
        out.push_back({hs[i].depth, ds[j].depth, i, j, hs[i].synset,
                       ds[j].synset});
  std::stable_sort(out.begin(), out.end(), [](auto& a, auto& b) {
    auto ka = std::make_tuple(a.head_depth + a.dep_depth,
                              -static_cast<long>(a.dep_depth), a.head_rank,
                              a.dep_rank);
    auto kb = std::make_tuple(b.head_depth + b.dep_depth,
                              -static_cast<long>(b.dep_depth), b.head_rank,
                              b.dep_rank);
    return ka < kb;
  });
  return out;
}

// First qualifying ancestor pair and the estimate it gives, ignoring any
// exact count for the pair itself.
inline std::optional<PairEstimate> inherit(const CountStore& store,
                                           const Lexicon& lex,
                                           const std::string& key,
                                           const SynsetId& head,
                                           const SynsetId& dep,
                                           const CountOptions& opt) {
  for (auto& g : generalizations(lex, head, dep)) {
    PairKey basis{key, g.head, g.dep};
    double A = static_cast<double>(store.pair_count(basis));
    if (A < static_cast<double>(opt.threshold) || A <= 0) continue;
    double n = 1, N = 1;
    bool ok = true;
    auto scale = [&](const SynsetId& specific, const SynsetId& general) {
      double sn = static_cast<double>(store.unary_count(specific));
      double sN = static_cast<double>(store.unary_count(general));
      if (sn <= 0 || sN <= 0 || sn > sN) ok = false;
      n *= sn;
      N *= sN;
    };
    if (g.head_depth) scale(head, g.head);
    if (g.dep_depth) scale(dep, g.dep);
    if (!ok || N < 2 || A > N) continue;
    auto e = antisample_estimate(A, n, N);
    PairEstimate out;
    out.estimate = e.estimate;
    out.source = PairEstimate::Source::inherited;
    out.basis = basis;
    out.count_stddev = e.count_stddev;
    return out;
  }
  return std::nullopt;
}

}  // namespace detail

inline PairEstimate estimated_pair_count(const CountStore& store,
                                         const Lexicon& lex,
                                         const CodePolicy& policy,
                                         std::string_view key,
                                         const SynsetId& head,
                                         const SynsetId& dep,
                                         const CountOptions& opt = {}) {
  detail::check_known(lex, head);
  detail::check_known(lex, dep);
  SynsetId h = generalize_code(lex, policy, head);
  SynsetId d = generalize_code(lex, policy, dep);
  PairKey exact{std::string(key), h, d};
  if (auto c = store.pair_count(exact)) {
    PairEstimate e;
    e.estimate = static_cast<double>(c);
    e.source = PairEstimate::Source::exact;
    e.basis = exact;
    return e;
  }
  if (auto e = detail::inherit(store, lex, exact.rule, h, d, opt)) return *e;
  PairEstimate e;
  e.estimate = opt.floor;
  e.source = PairEstimate::Source::floor;
  return e;
}

/// Drops pairs that their nearest qualifying generalization reproduces to
/// within one count-scale standard deviation.  Decisions are made against
/// the store as it was on entry; a pair whose basis is itself dropped is
/// kept, so every dropped pair stays reconstructible from what remains.
inline std::size_t compact(CountStore& store, const Lexicon& lex,
                           const CountOptions& opt = {}) {
  std::map<PairKey, PairKey> droppable;  // pair -> basis
  for (auto& [key, count] : store.pairs()) {
    if (!lex.has_synset(key.first) || !lex.has_synset(key.second)) continue;
    auto e = detail::inherit(store, lex, key.rule, key.first, key.second, opt);
    if (!e) continue;
    if (std::fabs(static_cast<double>(count) - e->estimate) <= e->count_stddev)
      droppable.emplace(key, e->basis);
  }
  std::map<PairKey, bool> dropped;
  auto decide = [&](auto&& self, const PairKey& k) -> bool {
    if (auto it = dropped.find(k); it != dropped.end()) return it->second;
    auto it = droppable.find(k);
    bool d = it != droppable.end() && !self(self, it->second);
    dropped[k] = d;
    return d;
  };
  std::size_t n = 0;
  for (auto& [k, basis] : droppable)
    if (decide(decide, k)) ++n;
  for (auto& [k, d] : dropped)
    if (d) store.remove_pair(k);
  return n;
}

inline std::string save_counts(const CountStore& store) {
  std::string out = "total " + std::to_string(store.total()) + "\n";
  for (auto& [s, c] : store.unary())
    out += "unary " + s.id + " " + std::to_string(c) + "\n";
  for (auto& [id, c] : store.rule_counts())
    out += "rule " + id + " " + std::to_string(c) + "\n";
  for (auto& [k, c] : store.pairs())
    out += "pair " + k.rule + " " + k.first.id + " " + k.second.id + " " +
           std::to_string(c) + "\n";
  return out;
}

inline CountStore load_counts(std::string_view body) {
  CountStore store;
  for (auto& line : text::content_lines(body)) {
    auto f = text::fields(line.content);
    auto fail = [&](const std::string& what) {
      throw FormatError("counts", line.number, what);
    };
    auto count = [&](const std::string& s) {
      if (!s.empty() && s[0] == '-') fail("negative count " + s);
      std::uint64_t v = 0;
      if (!text::parse_int(s, v)) fail("malformed count '" + s + "'");
      return v;
    };
    if (f[0] == "total" && f.size() == 2) {
      store.add_total(count(f[1]));
    } else if (f[0] == "unary" && f.size() == 3) {
      store.add_unary(SynsetId(f[1]), count(f[2]));
    } else if (f[0] == "rule" && f.size() == 3) {
      store.add_rule(f[1], count(f[2]));
    } else if (f[0] == "pair" && f.size() == 5) {
      store.add_pair({f[1], SynsetId(f[2]), SynsetId(f[3])}, count(f[4]));
    } else {
      fail("malformed record");
    }
  }
  return store;
}

}  // namespace captionir

#endif  // CAPTIONIR_COUNTS_HPP_

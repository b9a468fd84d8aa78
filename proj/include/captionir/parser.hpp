// N-best parsing under the binary grammar.
//
// A parse scores the sum, over its nodes, of the log rule probability and,
// at binary nodes, the log co-occurrence probability of the two headwords.
// Every term is <= 0, so the score of a partial parse bounds the score of
// anything built from it.  nbest_parse exploits that with a best-first
// agenda: derivations leave the agenda in exact ranking order, each chart
// signature keeps at most N of them, and search stops at the N-th complete
// parse.  exhaustive_parses is the brute-force reference for the same
// scoring function.

#ifndef CAPTIONIR_PARSER_HPP_
#define CAPTIONIR_PARSER_HPP_

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <queue>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "captionir/counts.hpp"
#include "captionir/grammar.hpp"
#include "captionir/lexicon.hpp"
#include "captionir/tree.hpp"

namespace captionir {

/// Read-only view of everything a parse depends on.
struct ParseContext {
  const Grammar& grammar;
  const Lexicon& lexicon;
  const CountStore& store;
  const CodePolicy& policy;
  CountOptions counts;
};

/// A token with the senses the parser may assign to it.
struct LatticeEntry {
  Token token;
  std::vector<WordSense> senses;
};
using Lattice = std::vector<LatticeEntry>;

using Span = std::pair<std::size_t, std::size_t>;

class NoParseError : public Error {
 public:
  NoParseError(const std::string& what, std::vector<Span> spans)
      : Error(what), spans_(std::move(spans)) {}
  /// Greedy left-to-right cover by the longest constituents found.
  const std::vector<Span>& spans() const { return spans_; }

 private:
  std::vector<Span> spans_;
};

/// log P(dependent | head, rule), estimated from counts and capped at 0.
/// When the head itself has never been counted the ratio is taken at its
/// nearest counted superconcept.
inline double cooc_log_prob(const ParseContext& ctx, std::string_view key,
                            const SynsetId& head, const SynsetId& dep) {
  if (!ctx.grammar.rule(stat_key_rule(key)).binary())
    throw Error("cooc_log_prob: rule " + std::string(key) + " is not binary");
  SynsetId h = generalize_code(ctx.lexicon, ctx.policy, head);
  double ratio = ctx.counts.floor;
  auto at = [&](const SynsetId& basis) {
    double u = static_cast<double>(ctx.store.unary_count(basis));
    double est = estimated_pair_count(ctx.store, ctx.lexicon, ctx.policy, key,
                                      basis, dep, ctx.counts)
                     .estimate;
    return est / u;
  };
  if (ctx.store.unary_count(h) > 0) {
    ratio = at(h);
  } else {
    for (auto& a : ctx.lexicon.ancestors(h)) {
      if (ctx.store.unary_count(a.synset) > 0) {
        ratio = at(a.synset);
        break;
      }
    }
  }
  return ratio >= 1.0 ? 0.0 : std::log(ratio);
}

/// Builds scored nodes; caches co-occurrence terms for one parse.
class Scorer {
 public:
  explicit Scorer(const ParseContext& ctx) : ctx_(ctx) {}

  const ParseContext& context() const { return ctx_; }

  NodePtr leaf(std::size_t index, const std::string& token,
               const WordSense& sense) const {
    auto n = std::make_shared<ParseNode>();
    n->category = terminal_class(sense);
    n->begin = index;
    n->end = index + 1;
    n->sense = sense;
    n->token = token;
    n->head_leaf = n.get();
    n->prep_leaf = sense.pos == Pos::preposition ? n.get() : nullptr;
    return n;
  }

  NodePtr unary(const GrammarRule& r, const NodePtr& child) const {
    auto n = std::make_shared<ParseNode>();
    n->category = r.lhs;
    n->begin = child->begin;
    n->end = child->end;
    n->rule = r.id;
    n->left = child;
    n->head_leaf = child->head_leaf;
    n->prep_leaf = child->prep_leaf;
    n->local = ctx_.grammar.rule_log_prob(r);
    n->score = child->score + n->local;
    n->size = child->size + 1;
    return n;
  }

  NodePtr binary(const GrammarRule& r, const NodePtr& left,
                 const NodePtr& right) {
    auto [head, dep] = Grammar::head_of(r, left, right);
    auto n = std::make_shared<ParseNode>();
    n->category = r.lhs;
    n->begin = left->begin;
    n->end = right->end;
    n->rule = r.id;
    n->left = left;
    n->right = right;
    n->head_leaf = head->head_leaf;
    n->prep_leaf = dep->head_sense().pos == Pos::preposition
                       ? dep->head_leaf
                       : head->prep_leaf;
    std::optional<PrepClass> cls;
    if (ctx_.grammar.attaches_preposition(r) && dep->prep_leaf)
      cls = dep->prep_leaf->sense->prep;
    n->stat_key = stat_key(r.id, cls);
    n->local = ctx_.grammar.rule_log_prob(r) +
               cooc(n->stat_key, head->head(), dep->head());
    n->score = (left->score + right->score) + n->local;
    n->size = left->size + right->size + 1;
    return n;
  }

  double cooc(const std::string& key, const SynsetId& head,
              const SynsetId& dep) {
    auto k = std::make_tuple(key, head, dep);
    auto it = cache_.find(k);
    if (it != cache_.end()) return it->second;
    double v = cooc_log_prob(ctx_, key, head, dep);
    cache_.emplace(std::move(k), v);
    return v;
  }

 private:
  const ParseContext& ctx_;
  std::map<std::tuple<std::string, SynsetId, SynsetId>, double> cache_;
};

struct ParseResult {
  std::vector<NodePtr> trees;  // best first
  bool exhausted = false;      // true when no further parses exist
};

/// Records every derivation taken off the agenda, for admissibility checks.
struct SearchTrace {
  std::vector<NodePtr> expanded;
  std::size_t pushed = 0;
  std::size_t pruned = 0;
};

namespace detail {

inline bool is_complete(const ParseNode& n, const ParseContext& ctx,
                        std::size_t length) {
  return n.begin == 0 && n.end == length && n.category == ctx.grammar.start();
}

inline std::vector<Span> longest_cover(
    std::size_t length,
    const std::map<std::pair<std::size_t, std::string>, std::vector<NodePtr>>&
        starts) {
  std::vector<std::size_t> reach(length, 0);
  for (auto& [key, list] : starts)
    for (auto& n : list) reach[n->begin] = std::max(reach[n->begin], n->end);
  std::vector<Span> out;
  std::size_t pos = 0;
  while (pos < length) {
    std::size_t end = std::max(reach[pos], pos + 1);
    out.emplace_back(pos, end);
    pos = end;
  }
  return out;
}

inline std::string describe_cover(const std::vector<Span>& spans) {
  std::string s;
  for (auto& [b, e] : spans)
    s += (s.empty() ? "" : " ") + std::string("[") + std::to_string(b) + "," +
         std::to_string(e) + ")";
  return s;
}

}  // namespace detail

inline ParseResult nbest_parse(const ParseContext& ctx, const Lattice& lattice,
                               std::size_t n_best,
                               SearchTrace* trace = nullptr) {
  if (lattice.empty()) throw Error("nbest_parse: empty token sequence");
  if (n_best < 1) throw Error("nbest_parse: N must be at least 1");
  const std::size_t length = lattice.size();
  Scorer scorer(ctx);

  auto worse = [](const NodePtr& a, const NodePtr& b) {
    return ranks_before(*b, *a);
  };
  std::priority_queue<NodePtr, std::vector<NodePtr>, decltype(worse)> agenda(
      worse);
  std::map<std::pair<std::size_t, std::string>, std::vector<NodePtr>> starts,
      ends;
  using Signature =
      std::tuple<std::size_t, std::size_t, std::string, SynsetId, int>;
  std::map<Signature, std::size_t> popped;
  std::multiset<double> complete_scores;  // best N complete scores pushed
  bool discarded = false;
  ParseResult result;

  auto push = [&](NodePtr d) {
    if (complete_scores.size() >= n_best &&
        score_key(d->score) < score_key(*complete_scores.begin())) {
      discarded = true;
      if (trace) ++trace->pruned;
      return;
    }
    if (detail::is_complete(*d, ctx, length)) {
      complete_scores.insert(d->score);
      if (complete_scores.size() > n_best)
        complete_scores.erase(complete_scores.begin());
    }
    if (trace) ++trace->pushed;
    agenda.push(std::move(d));
  };

  for (std::size_t i = 0; i < length; ++i)
    for (auto& s : lattice[i].senses)
      push(scorer.leaf(i, lattice[i].token.text, s));

  while (!agenda.empty()) {
    NodePtr d = agenda.top();
    agenda.pop();
    int prep = d->prep_leaf && d->prep_leaf->sense->prep
                   ? static_cast<int>(*d->prep_leaf->sense->prep)
                   : -1;
    Signature sig{d->begin, d->end, d->category, d->head(), prep};
    if (++popped[sig] > n_best) {
      discarded = true;
      continue;
    }
    if (trace) trace->expanded.push_back(d);
    if (detail::is_complete(*d, ctx, length)) {
      result.trees.push_back(d);
      if (result.trees.size() == n_best) break;
    }
    starts[{d->begin, d->category}].push_back(d);
    ends[{d->end, d->category}].push_back(d);

    for (auto i : ctx.grammar.unary_over(d->category))
      push(scorer.unary(ctx.grammar.rules()[i], d));
    for (auto i : ctx.grammar.binary_with_left(d->category)) {
      const auto& r = ctx.grammar.rules()[i];
      auto it = starts.find({d->end, r.rhs[1]});
      if (it == starts.end()) continue;
      for (auto& right : it->second) push(scorer.binary(r, d, right));
    }
    for (auto i : ctx.grammar.binary_with_right(d->category)) {
      const auto& r = ctx.grammar.rules()[i];
      auto it = ends.find({d->begin, r.rhs[0]});
      if (it == ends.end()) continue;
      for (auto& left : it->second) push(scorer.binary(r, left, d));
    }
  }

  if (result.trees.empty()) {
    auto cover = detail::longest_cover(length, starts);
    throw NoParseError("no parse; longest constituents " +
                           detail::describe_cover(cover),
                       cover);
  }
  result.exhausted = agenda.empty() && !discarded;
  return result;
}

struct OracleOptions {
  std::size_t max_tokens = 10;
};

/// Every complete parse, best first.  Exponential; for verification only.
inline std::vector<NodePtr> exhaustive_parses(const ParseContext& ctx,
                                              const Lattice& lattice,
                                              const OracleOptions& opt = {}) {
  const std::size_t n = lattice.size();
  if (n > opt.max_tokens)
    throw Error("exhaustive_parses: " + std::to_string(n) +
                " tokens exceeds the oracle cap of " +
                std::to_string(opt.max_tokens));
  if (n == 0) return {};
  Scorer scorer(ctx);
  using Cell = std::map<std::string, std::vector<NodePtr>>;
  std::vector<std::vector<Cell>> chart(n, std::vector<Cell>(n + 1));

  auto close_unary = [&](Cell& cell) {
    std::vector<NodePtr> work;
    for (auto& [cat, list] : cell) work.insert(work.end(), list.begin(), list.end());
    while (!work.empty()) {
      NodePtr d = work.back();
      work.pop_back();
      for (auto i : ctx.grammar.unary_over(d->category)) {
        NodePtr u = scorer.unary(ctx.grammar.rules()[i], d);
        cell[u->category].push_back(u);
        work.push_back(u);
      }
    }
  };

  for (std::size_t i = 0; i < n; ++i) {
    for (auto& s : lattice[i].senses) {
      NodePtr leaf = scorer.leaf(i, lattice[i].token.text, s);
      chart[i][i + 1][leaf->category].push_back(leaf);
    }
    close_unary(chart[i][i + 1]);
  }
  for (std::size_t len = 2; len <= n; ++len) {
    for (std::size_t i = 0; i + len <= n; ++i) {
      std::size_t j = i + len;
      Cell& cell = chart[i][j];
      for (std::size_t k = i + 1; k < j; ++k) {
        for (auto& [lcat, lefts] : chart[i][k]) {
          for (auto ri : ctx.grammar.binary_with_left(lcat)) {
            const auto& r = ctx.grammar.rules()[ri];
            auto it = chart[k][j].find(r.rhs[1]);
            if (it == chart[k][j].end()) continue;
            for (auto& l : lefts)
              for (auto& rt : it->second)
                cell[r.lhs].push_back(scorer.binary(r, l, rt));
          }
        }
      }
      close_unary(cell);
    }
  }
  std::vector<NodePtr> out;
  if (auto it = chart[0][n].find(ctx.grammar.start()); it != chart[0][n].end())
    out = it->second;
  std::sort(out.begin(), out.end(),
            [](const NodePtr& a, const NodePtr& b) { return ranks_before(*a, *b); });
  return out;
}

/// Recomputes a tree's score from its leaves, checking its structure.
inline double score_tree(const ParseContext& ctx, const ParseNode& tree) {
  auto fail = [](const std::string& what) -> double {
    throw Error("malformed tree: " + what);
  };
  if (tree.is_leaf()) {
    if (!tree.sense) return fail("leaf without a sense");
    if (tree.end != tree.begin + 1) return fail("leaf spans more than one token");
    if (tree.category != terminal_class(*tree.sense))
      return fail("leaf category " + tree.category + " does not fit its sense");
    return 0.0;
  }
  if (!ctx.grammar.has_rule(tree.rule)) return fail("unknown rule " + tree.rule);
  const auto& r = ctx.grammar.rule(tree.rule);
  if (r.lhs != tree.category) return fail("rule lhs mismatch at " + r.id);
  if (r.rhs.size() != (tree.is_binary() ? 2u : 1u))
    return fail("arity mismatch at " + r.id);
  if (tree.left->category != r.rhs[0] ||
      (tree.is_binary() && tree.right->category != r.rhs[1]))
    return fail("child categories do not match rule " + r.id);
  double left = score_tree(ctx, *tree.left);
  if (!tree.is_binary()) {
    if (tree.left->begin != tree.begin || tree.left->end != tree.end)
      return fail("unary child span mismatch");
    if (tree.head() != tree.left->head()) return fail("head not propagated");
    return left + ctx.grammar.rule_log_prob(r);
  }
  if (tree.left->begin != tree.begin || tree.left->end != tree.right->begin ||
      tree.right->end != tree.end)
    return fail("children do not partition the span");
  double right = score_tree(ctx, *tree.right);
  const ParseNode& head = r.head == 1 ? *tree.left : *tree.right;
  const ParseNode& dep = r.head == 1 ? *tree.right : *tree.left;
  if (tree.head() != head.head()) return fail("head not taken from head child");
  std::optional<PrepClass> cls;
  if (ctx.grammar.attaches_preposition(r) && dep.prep_leaf)
    cls = dep.prep_leaf->sense->prep;
  double cooc = cooc_log_prob(ctx, stat_key(r.id, cls), head.head(), dep.head());
  return (left + right) + (ctx.grammar.rule_log_prob(r) + cooc);
}

/// Senses a leaf token may take when rebuilding a tree from text.
using SenseSource = std::function<std::vector<WordSense>(const std::string&)>;

/// Rebuilds a RawTree under the grammar, recomputing every score.
inline NodePtr rebuild_tree(const ParseContext& ctx, const RawTree& raw,
                            const SenseSource& senses) {
  Scorer scorer(ctx);
  std::size_t next = 0;
  auto build = [&](auto&& self, const RawTree& t) -> NodePtr {
    if (t.token) {
      for (auto& s : senses(*t.token))
        if (s.synset.id == t.head && terminal_class(s) == t.category)
          return scorer.leaf(next++, *t.token, s);
      throw Error("token \"" + *t.token + "\" has no " + t.category +
                  " sense " + t.head);
    }
    if (t.children.size() > 2)
      throw Error(t.category + " node has " + std::to_string(t.children.size()) +
                  " children; only unary and binary nodes are allowed");
    std::vector<NodePtr> kids;
    std::vector<std::string> cats;
    for (auto& c : t.children) {
      kids.push_back(self(self, c));
      cats.push_back(kids.back()->category);
    }
    const GrammarRule* r = ctx.grammar.find(t.category, cats);
    if (!r)
      throw Error("no rule " + t.category + " -> " + text::join(cats, " "));
    NodePtr n = kids.size() == 1 ? scorer.unary(*r, kids[0])
                                 : scorer.binary(*r, kids[0], kids[1]);
    if (!t.head.empty() && n->head().id != t.head)
      throw Error(t.category + " node declares head " + t.head + " but its " +
                  "head child gives " + n->head().id);
    return n;
  };
  return build(build, raw);
}

}  // namespace captionir

#endif  // CAPTIONIR_PARSER_HPP_

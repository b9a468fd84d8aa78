// Count training: a review session walks the corpus, proposing parses best
// first; accepting one adds its counts.  Gold files and journals replay the
// same accepts without a reviewer.

#ifndef CAPTIONIR_TRAINER_HPP_
#define CAPTIONIR_TRAINER_HPP_

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "captionir/counts.hpp"
#include "captionir/grammar.hpp"
#include "captionir/lexicon.hpp"
#include "captionir/parser.hpp"
#include "captionir/retrieval.hpp"
#include "captionir/semantics.hpp"

namespace captionir {

/// Adds one accepted tree to the counts: every binary node's pair (with
/// superconcepts), every rule used, and every leaf sense.
inline void apply_tree(Grammar& grammar, CountStore& store, const Lexicon& lex,
                       const CodePolicy& policy, const ParseNode& tree,
                       const CountOptions& opt = {}) {
  auto walk = [&](auto&& self, const ParseNode& n) -> void {
    if (n.is_leaf()) {
      increment_unary(store, lex, policy, n.head(), 1, opt);
      return;
    }
    self(self, *n.left);
    if (n.right) {
      self(self, *n.right);
      const ParseNode* dep =
          n.left->head_leaf == n.head_leaf ? n.right->head_leaf : n.left->head_leaf;
      increment_pair(store, lex, grammar, policy, n.stat_key, n.head(),
                     dep->sense->synset, 1, opt);
    }
    grammar.add_count(n.rule, 1);
    store.add_rule(n.rule, 1);
  };
  walk(walk, tree);
}

/// Grammar counts as trained: file counts plus the store's learned counts.
inline void apply_rule_counts(Grammar& grammar, const CountStore& store) {
  for (auto& [id, c] : store.rule_counts()) {
    if (!grammar.has_rule(id))
      throw Error("counts mention unknown rule " + id);
    grammar.add_count(id, c);
  }
}

struct Decision {
  std::string caption_id;
  std::optional<std::size_t> rank;  // nullopt when skipped

  friend bool operator==(const Decision&, const Decision&) = default;
};

inline std::string journal_line(const Decision& d) {
  return d.caption_id + " " + (d.rank ? std::to_string(*d.rank) : "skip") + "\n";
}

inline std::vector<Decision> load_journal(std::string_view body) {
  std::vector<Decision> out;
  for (auto& line : text::content_lines(body)) {
    auto f = text::fields(line.content);
    if (f.size() != 2)
      throw FormatError("journal", line.number, "expected '<caption-id> <rank|skip>'");
    Decision d{f[0], std::nullopt};
    if (f[1] != "skip") {
      std::size_t r = 0;
      if (!text::parse_int(f[1], r) || r < 1)
        throw FormatError("journal", line.number, "bad rank '" + f[1] + "'");
      d.rank = r;
    }
    out.push_back(std::move(d));
  }
  return out;
}

struct TrainerOptions {
  std::size_t depth = 10;  // N-best depth before a caption is skipped
  CountOptions counts;
  AnalysisOptions analysis;
};

struct Proposal {
  std::string caption_id;
  std::string text;
  std::size_t rank = 1;
  NodePtr tree;
  MeaningList meaning;
  double score = 0;
};

/// Interactive review over a corpus.  Mutates the grammar and store it is
/// given; callers serialize access.
class ReviewSession {
 public:
  using Corpus = std::vector<std::pair<std::string, std::string>>;

  ReviewSession(Grammar& grammar, const Lexicon& lex, CountStore& store,
                const CodePolicy& policy, Corpus corpus,
                TrainerOptions opt = {})
      : grammar_(grammar), lex_(lex), store_(store), policy_(policy),
        corpus_(std::move(corpus)), opt_(std::move(opt)) {
    if (opt_.depth < 1) throw Error("review depth must be at least 1");
  }

  std::size_t cursor() const { return cursor_; }
  std::size_t candidate_rank() const { return rank_; }
  const std::vector<Decision>& decisions() const { return decisions_; }
  std::size_t reviewed() const { return reviewed_; }
  std::size_t first_try_accepted() const { return first_try_; }
  double first_try_accuracy() const {
    return reviewed_ ? static_cast<double>(first_try_) / reviewed_ : 0.0;
  }
  bool exhausted() const { return cursor_ >= corpus_.size(); }
  const Corpus& corpus() const { return corpus_; }
  /// Diagnostics for captions skipped automatically.
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }

  /// The current caption's parse at the current rank.  Captions that do not
  /// parse, or whose parses run out, are skipped and logged.
  std::optional<Proposal> propose() {
    while (!exhausted()) {
      const auto& [id, caption] = corpus_[cursor_];
      try {
        ensure_parses();
      } catch (const NoParseError& e) {
        diagnostics_.push_back(id + ": " + e.what());
        record_skip();
        continue;
      }
      if (rank_ > parses_.size()) {
        diagnostics_.push_back(id + ": no parse at rank " + std::to_string(rank_));
        record_skip();
        continue;
      }
      const NodePtr& t = parses_[rank_ - 1];
      return Proposal{id, caption, rank_, t, meaning_list(grammar_, *t), t->score};
    }
    return std::nullopt;
  }

  /// Accepts the outstanding proposal and moves to the next caption.
  void accept() {
    auto p = propose();
    if (!p) throw Error("no outstanding proposal");
    apply_tree(grammar_, store_, lex_, policy_, *p->tree, opt_.counts);
    decisions_.push_back({p->caption_id, p->rank});
    ++reviewed_;
    if (p->rank == 1) ++first_try_;
    advance();
  }

  /// Moves to the next-best parse; past the review depth the caption is
  /// skipped.
  void reject() {
    auto p = propose();
    if (!p) throw Error("no outstanding proposal");
    ++rank_;
    if (rank_ > opt_.depth) record_skip();
  }

  void skip() {
    if (!propose()) throw Error("no outstanding proposal");
    record_skip();
  }

  /// Resumes at the end of a journal whose accepts are already in the
  /// store: restores the cursor and counters without touching counts.
  void restore(const std::vector<Decision>& journal) {
    for (auto& d : journal) {
      if (exhausted())
        throw Error("journal runs past the end of the corpus at " + d.caption_id);
      if (corpus_[cursor_].first != d.caption_id)
        throw Error("journal expects caption " + d.caption_id +
                    " but the corpus is at " + corpus_[cursor_].first);
      decisions_.push_back(d);
      if (d.rank) {
        ++reviewed_;
        if (*d.rank == 1) ++first_try_;
      }
      advance();
    }
  }

  /// Re-applies a journal: accepted ranks are re-parsed and accepted.
  void replay(const std::vector<Decision>& journal) {
    for (auto& d : journal) {
      auto p = propose();
      if (!p) throw Error("journal runs past the end of the corpus at " + d.caption_id);
      if (p->caption_id != d.caption_id)
        throw Error("journal expects caption " + d.caption_id + " but the corpus is at " +
                    p->caption_id);
      if (!d.rank) {
        skip();
        continue;
      }
      while (rank_ < *d.rank) {
        ++rank_;
        if (!propose() || propose()->caption_id != d.caption_id || rank_ > opt_.depth)
          throw Error("journal rank " + std::to_string(*d.rank) + " unavailable for " +
                      d.caption_id);
      }
      accept();
    }
  }

 private:
  void ensure_parses() {
    if (parsed_for_ == cursor_) return;
    parses_.clear();
    parsed_for_ = static_cast<std::size_t>(-1);
    ParseContext ctx{grammar_, lex_, store_, policy_, opt_.counts};
    Analysis a = analyze(ctx, corpus_[cursor_].second, opt_.analysis);
    if (a.lattice.empty()) throw NoParseError("no parse; empty caption", {});
    parses_ = nbest_parse(ctx, a.lattice, opt_.depth).trees;
    parsed_for_ = cursor_;
  }
  void record_skip() {
    decisions_.push_back({corpus_[cursor_].first, std::nullopt});
    advance();
  }
  void advance() {
    ++cursor_;
    rank_ = 1;
    parses_.clear();
    parsed_for_ = static_cast<std::size_t>(-1);
  }

  Grammar& grammar_;
  const Lexicon& lex_;
  CountStore& store_;
  const CodePolicy& policy_;
  Corpus corpus_;
  TrainerOptions opt_;

  std::size_t cursor_ = 0;
  std::size_t rank_ = 1;
  std::size_t reviewed_ = 0, first_try_ = 0;
  std::vector<Decision> decisions_;
  std::vector<std::string> diagnostics_;
  std::vector<NodePtr> parses_;
  std::size_t parsed_for_ = static_cast<std::size_t>(-1);
};

struct GoldTree {
  std::string caption_id;
  RawTree tree;
};

/// `<caption-id>\t<bracketed tree>` records.
inline std::vector<GoldTree> load_gold(std::string_view body) {
  std::vector<GoldTree> out;
  for (auto& line : text::content_lines(body)) {
    auto tab = line.content.find('\t');
    if (tab == std::string::npos)
      throw FormatError("gold", line.number, "expected '<caption-id><TAB><tree>'");
    try {
      out.push_back({std::string(text::trim(line.content.substr(0, tab))),
                     parse_bracketed(line.content.substr(tab + 1))});
    } catch (const Error& e) {
      throw FormatError("gold", line.number, e.what());
    }
  }
  return out;
}

/// Senses a gold leaf may take: whatever lexical analysis would offer.
inline SenseSource lexical_senses(const Lexicon& lex,
                                  const AnalysisOptions& opt = {}) {
  return [&lex, opt](const std::string& token) {
    auto s = token_senses(lex, token, opt.resolver);
    if (s.empty()) s = unknown_senses(lex, token, opt.unknown_roots);
    return s;
  };
}

/// Accepts each gold tree in order, exactly as an interactive session that
/// accepted those trees would.  Returns the number of trees applied.
inline std::size_t batch_train(Grammar& grammar, CountStore& store,
                               const Lexicon& lex, const CodePolicy& policy,
                               const std::vector<GoldTree>& gold,
                               const TrainerOptions& opt = {}) {
  auto senses = lexical_senses(lex, opt.analysis);
  std::size_t n = 0;
  for (auto& g : gold) {
    ParseContext ctx{grammar, lex, store, policy, opt.counts};
    NodePtr t;
    try {
      t = rebuild_tree(ctx, g.tree, senses);
    } catch (const Error& e) {
      throw Error("gold tree " + std::to_string(n + 1) + " (" + g.caption_id +
                  "): " + e.what());
    }
    if (t->category != grammar.start())
      throw Error("gold tree " + std::to_string(n + 1) + " (" + g.caption_id +
                  ") is not rooted at " + grammar.start());
    apply_tree(grammar, store, lex, policy, *t, opt.counts);
    ++n;
  }
  return n;
}

}  // namespace captionir

#endif  // CAPTIONIR_TRAINER_HPP_

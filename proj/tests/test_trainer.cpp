#include <gtest/gtest.h>

#include "support.hpp"

using namespace captionir;
using namespace testing_support;

namespace {

// Drives a session as a reviewer who knows the gold trees: accept the gold
// tree when proposed, otherwise reject.
std::vector<Decision> review_with_gold(ReviewSession& session, Grammar& grammar,
                                       CountStore& store) {
  std::map<std::string, RawTree> gold;
  for (auto& g : fixture_gold()) gold.emplace(g.caption_id, g.tree);
  auto senses = lexical_senses(fixture_lexicon());
  CodePolicy policy;
  while (auto p = session.propose()) {
    ParseContext ctx{grammar, fixture_lexicon(), store, policy, {}};
    auto want = rebuild_tree(ctx, gold.at(p->caption_id), senses);
    if (same_tree(*p->tree, *want)) session.accept();
    else session.reject();
  }
  return session.decisions();
}

}  // namespace

TEST(Trainer, ApplyTreeCountsEveryNode) {
  Untrained u;
  auto ctx = u.context();
  auto tree = nbest_parse(ctx, lattice_for(ctx, "big missile on stand"), 1).trees.front();
  Grammar g = u.grammar;
  CountStore store;
  apply_tree(g, store, fixture_lexicon(), u.policy, *tree);
  EXPECT_EQ(store.total(), 4u);
  std::uint64_t rules = 0;
  for (auto& [id, c] : store.rule_counts()) {
    rules += c;
    EXPECT_EQ(g.rule(id).count, u.grammar.rule(id).count + c);
  }
  EXPECT_EQ(rules, tree->size - 4);
  EXPECT_GT(store.pair_count({"NP_ADJECTIVE_NP", SynsetId("projectile-1"), SynsetId("big-1")}),
            0u);
}

TEST(Trainer, GoldTrainingConverges) {
  auto& t = trained();
  auto ctx = t.context();
  auto senses = lexical_senses(fixture_lexicon());
  std::map<std::string, std::string> text;
  for (auto& [id, c] : fixture_corpus()) text[id] = c;
  std::size_t first = 0, total = 0;
  for (auto& g : fixture_gold()) {
    auto want = rebuild_tree(ctx, g.tree, senses);
    auto got = nbest_parse(ctx, lattice_for(ctx, text.at(g.caption_id)), 1).trees.front();
    first += same_tree(*got, *want);
    ++total;
  }
  EXPECT_EQ(total, fixture_corpus().size());
  EXPECT_GE(static_cast<double>(first) / total, 0.9) << first << "/" << total;
}

TEST(Trainer, GoldErrorsNameTheTree) {
  Untrained u;
  auto bad_head = load_gold("x\t(CAPTION (SEG (NP (noun head=f-18-1 \"f-18\"))))\n"
                            "y\t(SEG (NP (noun head=f-18-1 \"f-18\")))\n");
  Grammar g = u.grammar;
  CountStore store;
  try {
    batch_train(g, store, fixture_lexicon(), u.policy, bad_head);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("gold tree 2 (y)"), std::string::npos) << e.what();
  }
  EXPECT_THROW(load_gold("x (CAPTION)\n"), FormatError);
}

TEST(Trainer, JournalFormat) {
  auto j = load_journal("c01 1\nc02 skip\n\nc03 4\n");
  EXPECT_EQ(j, (std::vector<Decision>{{"c01", 1}, {"c02", std::nullopt}, {"c03", 4}}));
  std::string body;
  for (auto& d : j) body += journal_line(d);
  EXPECT_EQ(load_journal(body), j);
  EXPECT_THROW(load_journal("c01 0\n"), FormatError);
  EXPECT_THROW(load_journal("c01\n"), FormatError);
}

TEST(Trainer, RejectPastDepthSkips) {
  Untrained u;
  Grammar g = u.grammar;
  CountStore store;
  TrainerOptions opt;
  opt.depth = 2;
  ReviewSession s(g, fixture_lexicon(), store, u.policy,
                  {{"a", "big missile on stand"}, {"b", "f-18"}}, opt);
  s.reject();
  s.reject();
  auto p = s.propose();
  ASSERT_TRUE(p);
  EXPECT_EQ(p->caption_id, "b");
  EXPECT_EQ(s.decisions(), (std::vector<Decision>{{"a", std::nullopt}}));
  s.accept();
  EXPECT_FALSE(s.propose());
  EXPECT_THROW(s.accept(), Error);
  EXPECT_EQ(s.reviewed(), 1u);
  EXPECT_DOUBLE_EQ(s.first_try_accuracy(), 1.0);
}

TEST(Trainer, UnparsableCaptionsAreSkippedWithDiagnostics) {
  Untrained u;
  Grammar g = u.grammar;
  CountStore store;
  ReviewSession s(g, fixture_lexicon(), store, u.policy, {{"a", "on on"}, {"b", "f-18"}});
  auto p = s.propose();
  ASSERT_TRUE(p);
  EXPECT_EQ(p->caption_id, "b");
  ASSERT_EQ(s.diagnostics().size(), 1u);
  EXPECT_EQ(s.diagnostics()[0].rfind("a: no parse", 0), 0u);
}

TEST(Trainer, SessionMatchesBatchTrainingAndReplays) {
  Untrained u;
  Grammar g = u.grammar;
  CountStore store;
  ReviewSession session(g, fixture_lexicon(), store, u.policy, fixture_corpus());
  auto journal = review_with_gold(session, g, store);

  // The accepted trees are the gold trees, so batch training on the accepted
  // captions' gold gives the same counts.
  std::set<std::string> accepted;
  for (auto& d : journal)
    if (d.rank) accepted.insert(d.caption_id);
  EXPECT_GE(accepted.size(), fixture_corpus().size() - 3);
  std::vector<GoldTree> subset;
  for (auto& gt : fixture_gold())
    if (accepted.count(gt.caption_id)) subset.push_back(gt);
  Grammar g2 = u.grammar;
  CountStore batch;
  batch_train(g2, batch, fixture_lexicon(), u.policy, subset);
  EXPECT_EQ(save_counts(batch), save_counts(store));

  Grammar g3 = u.grammar;
  CountStore replayed;
  ReviewSession again(g3, fixture_lexicon(), replayed, u.policy, fixture_corpus());
  again.replay(journal);
  EXPECT_EQ(save_counts(replayed), save_counts(store));
  EXPECT_EQ(again.decisions(), journal);
}

TEST(Trainer, RestoreResumesWithoutRecounting) {
  Untrained u;
  Grammar g = u.grammar;
  CountStore store;
  auto corpus = fixture_corpus();
  corpus.resize(6);
  ReviewSession s(g, fixture_lexicon(), store, u.policy, corpus);
  s.accept();
  s.reject();
  s.accept();
  s.skip();
  CountStore snapshot = store;
  Grammar g2 = g;
  ReviewSession resumed(g2, fixture_lexicon(), store, u.policy, corpus);
  resumed.restore(s.decisions());
  EXPECT_TRUE(store == snapshot);
  EXPECT_EQ(resumed.cursor(), s.cursor());
  EXPECT_EQ(resumed.reviewed(), s.reviewed());
  EXPECT_EQ(resumed.first_try_accepted(), s.first_try_accepted());
  EXPECT_EQ(resumed.propose()->caption_id, s.propose()->caption_id);
  EXPECT_THROW(resumed.restore({{"zz", 1}}), Error);
}

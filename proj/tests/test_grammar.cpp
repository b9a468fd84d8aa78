#include <cmath>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace captionir;
using testing_support::fixture_grammar;

namespace {

std::size_t error_line(std::string_view body) {
  try {
    load_grammar(body);
  } catch (const FormatError& e) {
    return e.line();
  }
  return static_cast<std::size_t>(-1);
}

}  // namespace

TEST(Grammar, FixtureShape) {
  auto& g = fixture_grammar();
  EXPECT_EQ(g.start(), "CAPTION");
  EXPECT_GE(g.rules().size(), 20u);
  const GrammarRule* r = g.find("NP", {"NP", "PP"});
  ASSERT_NE(r, nullptr);
  EXPECT_EQ(r->id, "NP_NP_PP");
  EXPECT_EQ(r->relation, "prep-attach");
  EXPECT_TRUE(g.attaches_preposition(*r));
  EXPECT_FALSE(g.attaches_preposition(*g.find("NP", {"ADJECTIVE", "NP"})));
  EXPECT_EQ(g.find("NP", {"ADJECTIVE", "NP"})->head, 2);
}

TEST(Grammar, PrepositionSpecialization) {
  auto& g = fixture_grammar();
  EXPECT_EQ(g.specialize("prep-attach", PrepClass::location, "on"), "locationover");
  EXPECT_EQ(g.specialize("prep-attach", PrepClass::location, "beside"), "locationat");
  EXPECT_EQ(g.specialize("prep-attach", PrepClass::time, "during"), "timeat");
  EXPECT_FALSE(g.specialize("modification", PrepClass::time, "during"));
}

TEST(Grammar, HeadOfFollowsHeadPosition) {
  auto& g = fixture_grammar();
  auto [h, d] = Grammar::head_of(*g.find("NP", {"ADJECTIVE", "NP"}), std::string("big"),
                                 std::string("missile"));
  EXPECT_EQ(h, "missile");
  EXPECT_EQ(d, "big");
  EXPECT_THROW(Grammar::head_of(*g.find("NP", {"noun"}), 1, 2), Error);
}

TEST(Grammar, RuleLogProbIsSmoothedRelativeFrequency) {
  auto g = load_grammar("start=S\nS -> A head=1 count=3\nS -> B head=1 count=1\n"
                        "A -> noun head=1\nB -> verb head=1\n");
  // (3 + 0.5) / (4 + 0.5 * 2)
  EXPECT_NEAR(g.rule_log_prob("S_A"), std::log(3.5 / 5.0), 1e-15);
  EXPECT_NEAR(g.rule_log_prob("A_noun"), 0.0, 1e-15);
  g.add_count("S_B", 4);
  EXPECT_NEAR(g.rule_log_prob("S_B"), std::log(5.5 / 9.0), 1e-15);
}

TEST(Grammar, SaveLoadRoundTrip) {
  auto& g = fixture_grammar();
  auto again = load_grammar(save_grammar(g));
  EXPECT_EQ(again.rules(), g.rules());
  EXPECT_EQ(again.prep_mappings(), g.prep_mappings());
  EXPECT_EQ(again.relations(), g.relations());
  EXPECT_EQ(save_grammar(again), save_grammar(g));
}

TEST(Grammar, RejectsBadRulesWithLineNumbers) {
  const std::string ok = "start=S\nS -> noun head=1\n";
  EXPECT_EQ(error_line(ok + "S -> A B C head=1 rel=x\n"), 3u);
  EXPECT_EQ(error_line(ok + "S -> S noun\n"), 3u);
  EXPECT_EQ(error_line(ok + "S -> S noun head=3 rel=x\n"), 3u);
  EXPECT_EQ(error_line(ok + "S -> S noun head=1\n"), 3u);
  EXPECT_EQ(error_line(ok + "S -> noun head=1\n"), 3u);
  EXPECT_EQ(error_line(ok + "S -> Q head=1\n"), 3u);
  EXPECT_EQ(error_line("start=S\nrelations a\nS -> S noun head=1 rel=b\n"), 3u);
  EXPECT_EQ(error_line("S -> noun head=1\n"), 0u);
}

TEST(Grammar, RejectsUnaryCycles) {
  try {
    load_grammar("start=S\nS -> A head=1\nA -> B head=1\nB -> A head=1\nB -> noun head=1\n");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("unary cycle"), std::string::npos);
  }
}

TEST(GrammarProperty, RuleProbabilitiesSumToOnePerLhs) {
  auto g = fixture_grammar();
  for (double alpha : {0.1, 0.5, 2.0}) {
    g.set_alpha(alpha);
    std::map<std::string, double> sums;
    for (auto& r : g.rules()) {
      double lp = g.rule_log_prob(r);
      EXPECT_LE(lp, 0.0);
      sums[r.lhs] += std::exp(lp);
    }
    for (auto& [lhs, s] : sums) EXPECT_NEAR(s, 1.0, 1e-12) << lhs;
  }
}

#include <cmath>
#include <random>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <gtest/gtest.h>

#include "support.hpp"

using namespace captionir;
using testing_support::fixture_grammar;
using testing_support::fixture_lexicon;

namespace {

using Big = boost::multiprecision::cpp_bin_float_50;

// Finite-population deviation of a sampled proportion, in 50 digits.
double oracle_prop_sd(double A, double n, double N) {
  Big a(A), s(n), p(N);
  Big v = a * (p - a) * (p - s) / (s * p * p * (p - 1));
  return static_cast<double>(boost::multiprecision::sqrt(v));
}

SynsetId S(const char* id) { return SynsetId(id); }

std::vector<SynsetId> open_class_synsets(const Lexicon& lex) {
  std::vector<SynsetId> out;
  for (auto& [s, info] : lex.synsets())
    if (info.pos == Pos::noun || info.pos == Pos::verb || info.pos == Pos::adjective)
      out.push_back(s);
  return out;
}

std::vector<std::string> binary_keys(const Grammar& g) {
  std::vector<std::string> out;
  for (auto& r : g.rules())
    if (r.binary()) out.push_back(r.id);
  out.push_back(stat_key("NP_NP_PP", PrepClass::location));
  return out;
}

void random_increments(CountStore& store, std::uint32_t seed, int n,
                       const CodePolicy& policy = {}) {
  auto& lex = fixture_lexicon();
  auto syns = open_class_synsets(lex);
  auto keys = binary_keys(fixture_grammar());
  std::mt19937 rng(seed);
  for (int i = 0; i < n; ++i) {
    auto& key = keys[rng() % keys.size()];
    increment_pair(store, lex, fixture_grammar(), policy, key, syns[rng() % syns.size()],
                   syns[rng() % syns.size()], 1 + rng() % 3);
  }
}

}  // namespace

TEST(Antisample, WorkedExample) {
  auto e = antisample_estimate(230, 10, 1000);
  EXPECT_NEAR(e.estimate, 2.3, 1e-9);
  double sd = oracle_prop_sd(230, 10, 1000);
  EXPECT_NEAR(e.proportion_stddev, sd, 1e-12 * sd);
  EXPECT_NEAR(e.count_stddev, 10 * sd, 1e-12 * 10 * sd);
}

TEST(Antisample, RejectsInvalidTriples) {
  EXPECT_THROW(antisample_estimate(1, 0, 10), Error);
  EXPECT_THROW(antisample_estimate(1, 11, 10), Error);
  EXPECT_THROW(antisample_estimate(11, 1, 10), Error);
  EXPECT_THROW(antisample_estimate(-1, 1, 10), Error);
  EXPECT_THROW(antisample_estimate(1, 1, 1), Error);
}

TEST(AntisampleProperty, MatchesHighPrecisionOracle) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 1000; ++i) {
    double N = 2 + static_cast<double>(rng() % 100000);
    double n = 1 + static_cast<double>(rng() % static_cast<std::uint64_t>(N));
    double A = static_cast<double>(rng() % (static_cast<std::uint64_t>(N) + 1));
    auto e = antisample_estimate(A, n, N);
    double sd = oracle_prop_sd(A, n, N);
    EXPECT_NEAR(e.proportion_stddev, sd, 1e-12 * sd) << A << " " << n << " " << N;
    EXPECT_NEAR(e.estimate, A * n / N, 1e-12 * std::max(1.0, A));
  }
}

TEST(Counts, IncrementCoversGeneralizations) {
  auto& lex = fixture_lexicon();
  CountStore store;
  increment_pair(store, lex, fixture_grammar(), {}, "NP_NP_PP@location",
                 S("sidewinder-2"), S("f-18-1"), 2);
  EXPECT_EQ(store.pair_count({"NP_NP_PP@location", S("sidewinder-2"), S("f-18-1")}), 2u);
  EXPECT_EQ(store.pair_count({"NP_NP_PP@location", S("weapon-1"), S("aircraft-1")}), 2u);
  EXPECT_EQ(store.pair_count({"NP_NP_PP@location", S("entity-1"), S("entity-1")}), 2u);
  EXPECT_EQ(store.unary_count(S("projectile-1")), 2u);
  EXPECT_EQ(store.total(), 0u);
  increment_unary(store, lex, {}, S("f-18-1"), 1);
  EXPECT_EQ(store.total(), 1u);
  EXPECT_EQ(store.unary_count(S("aircraft-1")), 3u);
}

TEST(Counts, IncrementValidatesArguments) {
  auto& lex = fixture_lexicon();
  CountStore store;
  EXPECT_THROW(increment_pair(store, lex, fixture_grammar(), {}, "NOPE", S("f-18-1"),
                              S("f-18-1"), 1),
               Error);
  EXPECT_THROW(increment_pair(store, lex, fixture_grammar(), {}, "NP_NP_PP", S("zzz-1"),
                              S("f-18-1"), 1),
               Error);
  EXPECT_THROW(increment_pair(store, lex, fixture_grammar(), {}, "NP_NP_PP", S("f-18-1"),
                              S("f-18-1"), 0),
               Error);
  EXPECT_TRUE(store.empty());
}

TEST(Counts, DepthCapLimitsGeneralization) {
  CountStore store;
  CountOptions opt;
  opt.max_depth = 1;
  increment_pair(store, fixture_lexicon(), fixture_grammar(), {}, "NP_NP_PP",
                 S("sidewinder-2"), S("f-18-1"), 1, opt);
  EXPECT_EQ(store.pair_count({"NP_NP_PP", S("projectile-1"), S("aircraft-1")}), 1u);
  EXPECT_EQ(store.pair_count({"NP_NP_PP", S("weapon-1"), S("aircraft-1")}), 0u);
}

TEST(Counts, CodePolicyCountsAtCategory) {
  auto& lex = fixture_lexicon();
  CodePolicy policy{{S("aircraft-1")}};
  CountStore store;
  increment_pair(store, lex, fixture_grammar(), policy, "NP_NP_PP", S("sidewinder-2"),
                 S("f-18-1"), 1);
  EXPECT_EQ(store.pair_count({"NP_NP_PP", S("sidewinder-2"), S("f-18-1")}), 0u);
  EXPECT_EQ(store.pair_count({"NP_NP_PP", S("sidewinder-2"), S("aircraft-1")}), 1u);
  auto e = estimated_pair_count(store, lex, policy, "NP_NP_PP", S("sidewinder-2"),
                                S("t-2-1"));
  EXPECT_EQ(e.source, PairEstimate::Source::exact);
}

TEST(Counts, EstimateSources) {
  auto& lex = fixture_lexicon();
  CountStore store;
  CountOptions opt;
  opt.threshold = 5;
  // Many projectile-on-aircraft pairs through two specific missiles.
  for (int i = 0; i < 6; ++i)
    increment_pair(store, lex, fixture_grammar(), {}, "NP_NP_PP", S("sidewinder-2"),
                   S("f-18-1"), 1);
  for (int i = 0; i < 4; ++i)
    increment_pair(store, lex, fixture_grammar(), {}, "NP_NP_PP", S("rocket-1"),
                   S("f-18-1"), 1);
  for (int i = 0; i < 3; ++i) increment_unary(store, lex, {}, S("walleye-1"), 1);

  auto exact = estimated_pair_count(store, lex, {}, "NP_NP_PP", S("rocket-1"), S("f-18-1"),
                                    opt);
  EXPECT_EQ(exact.source, PairEstimate::Source::exact);
  EXPECT_EQ(exact.estimate, 4.0);

  auto inh = estimated_pair_count(store, lex, {}, "NP_NP_PP", S("walleye-1"), S("f-18-1"),
                                  opt);
  ASSERT_EQ(inh.source, PairEstimate::Source::inherited);
  EXPECT_EQ(inh.basis.first, S("projectile-1"));
  EXPECT_EQ(inh.basis.second, S("f-18-1"));
  // A = 10 projectile pairs, n = 3 walleyes, N = 13 projectiles.
  EXPECT_NEAR(inh.estimate, 10.0 * 3 / 13, 1e-12);
  EXPECT_NEAR(inh.count_stddev, 3 * oracle_prop_sd(10, 3, 13), 1e-12);

  auto fl = estimated_pair_count(store, lex, {}, "NP_NP_PP", S("walleye-1"), S("range-1"),
                                 opt);
  EXPECT_EQ(fl.source, PairEstimate::Source::floor);
  EXPECT_EQ(fl.estimate, opt.floor);
}

TEST(Counts, SaveLoadRoundTrip) {
  CountStore store;
  random_increments(store, 5, 300);
  store.add_rule("NP_noun", 4);
  store.add_total(9);
  std::string body = save_counts(store);
  CountStore back = load_counts(body);
  EXPECT_TRUE(back == store);
  EXPECT_EQ(save_counts(back), body);
}

TEST(Counts, LoadRejectsMalformedRecords) {
  auto line_of = [](std::string_view body) {
    try {
      load_counts(body);
    } catch (const FormatError& e) {
      return e.line();
    }
    return std::size_t{0};
  };
  EXPECT_EQ(line_of("total 3\npair NP_NP_PP a-1 b-1 -2\n"), 2u);
  EXPECT_EQ(line_of("unary a-1 x\n"), 1u);
  EXPECT_EQ(line_of("total 1\n\nbogus 1 2\n"), 3u);
}

TEST(Counts, IndexedLookup) {
  CountStore store;
  increment_pair(store, fixture_lexicon(), fixture_grammar(), {}, "NP_NP_PP",
                 S("sidewinder-2"), S("f-18-1"), 1);
  auto by_word = store.lookup_by(PairIndex::second, "f-18");
  auto by_sense = store.lookup_by(PairIndex::second_sense_pos, "f-18-1");
  EXPECT_EQ(by_word, by_sense);
  EXPECT_FALSE(by_word.empty());
  for (auto& [k, c] : by_word) EXPECT_EQ(k.second, S("f-18-1"));
}

TEST(CountsProperty, GeneralizationsDominateAndIndexesAgree) {
  auto& lex = fixture_lexicon();
  CountStore store;
  random_increments(store, 99, 2000);
  for (auto& [k, c] : store.pairs()) {
    for (auto& h : self_and_ancestors(lex, k.first))
      for (auto& d : self_and_ancestors(lex, k.second))
        ASSERT_GE(store.pair_count({k.rule, h.synset, d.synset}), c);
  }
  std::set<PairKey> all;
  for (auto& [k, c] : store.pairs()) all.insert(k);
  for (auto i : {PairIndex::first, PairIndex::first_sense_pos, PairIndex::second,
                 PairIndex::second_sense_pos})
    EXPECT_EQ(store.index_keys(i), all) << pair_index_name(i);
}

TEST(CountsProperty, CompactionIsSound) {
  auto& lex = fixture_lexicon();
  for (std::uint32_t seed : {1u, 2u, 3u}) {
    CountStore store;
    random_increments(store, seed, 1500);
    CountStore before = store;
    CountOptions opt;
    std::size_t dropped = compact(store, lex, opt);
    EXPECT_GT(dropped, 0u);
    EXPECT_EQ(store.pairs().size() + dropped, before.pairs().size());
    for (auto& [k, c] : before.pairs()) {
      if (store.pair_count(k)) {
        EXPECT_EQ(store.pair_count(k), c);
        continue;
      }
      auto e = estimated_pair_count(store, lex, {}, k.rule, k.first, k.second, opt);
      ASSERT_EQ(e.source, PairEstimate::Source::inherited) << k.first.id << " " << k.second.id;
      EXPECT_LE(std::fabs(e.estimate - static_cast<double>(c)), e.count_stddev);
    }
    // The indexes forget dropped pairs too.
    std::set<PairKey> all;
    for (auto& [k, c] : store.pairs()) all.insert(k);
    EXPECT_EQ(store.index_keys(PairIndex::first), all);
  }
}

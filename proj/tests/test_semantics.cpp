#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace captionir;
using namespace testing_support;

namespace {

SynsetId S(const char* id) { return SynsetId(id); }

MeaningList best_meaning(const ParseContext& ctx, std::string_view caption) {
  auto list = interpretations(ctx, caption);
  return list.front().meaning;
}

// Brute-force isomorphism over every permutation of y's variables.
bool iso_oracle(const MeaningList& x, const MeaningList& y) {
  auto xv = x.variables(), yv = y.variables();
  if (xv.size() != yv.size() || x.size() != y.size()) return false;
  std::vector<int> xs(xv.begin(), xv.end()), ys(yv.begin(), yv.end());
  do {
    std::map<int, int> m;
    for (std::size_t i = 0; i < xs.size(); ++i) m[xs[i]] = ys[i];
    if (detail::rename(x, m) == y) return true;
  } while (std::next_permutation(ys.begin(), ys.end()));
  return false;
}

MeaningList random_graph(std::mt19937& rng, int vars) {
  static const char* types[] = {"projectile-1", "aircraft-1", "base-2"};
  static const char* labels[] = {"locationover", "modification"};
  MeaningList m;
  for (int v = 1; v <= vars; ++v) m.add(ako(v, S(types[rng() % 3])));
  for (unsigned e = rng() % (2 * vars); e; --e)
    m.add(relation(labels[rng() % 2], 1 + rng() % vars, 1 + rng() % vars));
  return m;
}

}  // namespace

TEST(Semantics, WorkedExampleMeaningList) {
  auto ctx = trained().context();
  MeaningList want;
  want.add(ako(3, S("projectile-1")));
  want.add(property(3, S("big-1")));
  want.add(relation("locationover", 3, 5));
  want.add(ako(5, S("base-2")));
  EXPECT_TRUE(isomorphic(best_meaning(ctx, "big missile on stand"), want));
  Untrained empty;
  EXPECT_TRUE(isomorphic(best_meaning(empty.context(), "big missile on stand"), want));
}

TEST(Semantics, ParticiplesAndIdentifiers) {
  auto ctx = trained().context();
  EXPECT_EQ(to_text(best_meaning(ctx, "f-18 landing")),
            "ako v1 f-18-1\nako v2 land-2\nrel participle-mod v1 v2\n");
  EXPECT_EQ(to_text(best_meaning(ctx, "a-4c bu# 147781 on runway")),
            "ako v1 a-4c-1\nako v2 identifier-1\nako v3 runway-1\n"
            "rel identification v1 v2\nrel locationover v1 v3\n");
}

TEST(Semantics, AmbiguousCaptionKeepsBothReadings) {
  auto ctx = trained().context();
  auto list = interpretations(ctx, "sidewinder on ground");
  ASSERT_GE(list.size(), 2u);
  std::set<std::string> types;
  for (auto& i : list)
    for (auto& t : i.meaning.types_of(1)) types.insert(t.id);
  EXPECT_TRUE(types.count("sidewinder-1"));
  EXPECT_TRUE(types.count("sidewinder-2"));
  for (std::size_t i = 1; i < list.size(); ++i)
    EXPECT_FALSE(isomorphic(list[0].meaning, list[i].meaning));
}

TEST(Semantics, TextAndJsonRoundTrip) {
  auto ctx = trained().context();
  for (auto& [id, caption] : fixture_corpus()) {
    for (auto& i : interpretations(ctx, caption)) {
      EXPECT_EQ(meaning_from_text(to_text(i.meaning)), i.meaning) << id;
      EXPECT_EQ(meaning_from_json(to_json(i.meaning)), i.meaning) << id;
    }
  }
  EXPECT_THROW(meaning_from_text("ako x1 a-1\n"), FormatError);
  EXPECT_THROW(meaning_from_json(nlohmann::json::parse(R"([{"pred":"nope"}])")), Error);
}

TEST(Semantics, UnknownWordIsClassifiedFromContext) {
  auto ctx = trained().context();
  auto a = analyze(ctx, "personnel mounting ghw-12 on an f-18");
  ASSERT_EQ(a.unknowns.size(), 1u);
  auto& u = a.unknowns[0];
  EXPECT_EQ(u.token, "ghw-12");
  EXPECT_FALSE(u.classification.low_confidence);
  EXPECT_EQ(u.classification.ranking.front().first, S("equipment-1"));
  ASSERT_EQ(a.lattice[u.index].senses.size(), 1u);
  EXPECT_EQ(a.lattice[u.index].senses[0].form, Form::classified);
}

TEST(Semantics, UnknownWordWithoutContextIsLowConfidence) {
  auto ctx = trained().context();
  auto c = classify_unknown(ctx, {}, {S("equipment-1"), S("person-1")});
  EXPECT_TRUE(c.low_confidence);
  EXPECT_EQ(c.ranking.size(), 2u);
  EXPECT_THROW(classify_unknown(ctx, {}, {S("nothing-1")}), Error);
}

TEST(Semantics, ResolvedTokensTakeTheirTargetsSenses) {
  auto ctx = trained().context();
  auto a = analyze(ctx, "trngl near traffic crcl");
  EXPECT_TRUE(a.unknowns.empty());
  EXPECT_EQ(a.lattice[0].senses.front().synset, S("triangle-1"));
  EXPECT_EQ(a.lattice[0].senses.front().form, Form::resolved);
  EXPECT_EQ(a.lattice[3].senses.front().synset, S("circle-1"));
  auto b = analyze(ctx, "road to inyodern");
  EXPECT_EQ(b.lattice[2].senses.front().synset, S("inyokern-1"));
}

TEST(SemanticsProperty, IsomorphismAgreesWithBruteForce) {
  std::mt19937 rng(17);
  for (int i = 0; i < 600; ++i) {
    int vars = 1 + static_cast<int>(rng() % 5);
    auto x = random_graph(rng, vars);
    // A renamed copy half the time, an independent graph otherwise.
    MeaningList y;
    if (rng() % 2) {
      std::vector<int> perm(vars);
      std::iota(perm.begin(), perm.end(), 10);
      std::shuffle(perm.begin(), perm.end(), rng);
      std::map<int, int> m;
      for (int v = 1; v <= vars; ++v) m[v] = perm[v - 1];
      y = detail::rename(x, m);
    } else {
      y = random_graph(rng, vars);
    }
    ASSERT_EQ(isomorphic(x, y), iso_oracle(x, y)) << to_text(x) << "--\n" << to_text(y);
    ASSERT_EQ(isomorphic(x, y), isomorphic(y, x));
  }
}

TEST(SemanticsProperty, VariablesAreTypedNounsAndVerbs) {
  auto ctx = trained().context();
  for (auto& [id, caption] : fixture_corpus()) {
    for (auto& i : interpretations(ctx, caption)) {
      for (int v : i.meaning.variables()) EXPECT_EQ(i.meaning.types_of(v).size(), 1u) << id;
      for (auto& p : i.meaning.predicates) {
        if (p.kind != Predicate::Kind::relation) continue;
        EXPECT_NE(p.a, p.b) << id;
        auto& rels = ctx.grammar.relations();
        EXPECT_NE(std::find(rels.begin(), rels.end(), p.label), rels.end()) << p.label;
      }
    }
  }
}

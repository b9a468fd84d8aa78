#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace captionir;
using testing_support::fixture_lexicon;

namespace {

std::vector<std::string> token_texts(const Lexicon& lex, std::string_view s) {
  std::vector<std::string> out;
  for (auto& t : lex.tokenize(s)) out.push_back(t.text);
  return out;
}

bool has_sense(const std::vector<WordSense>& v, const char* synset, Form form) {
  return std::any_of(v.begin(), v.end(), [&](auto& s) {
    return s.synset.id == synset && s.form == form;
  });
}

Lexicon tiny(std::string_view hierarchy) {
  return load_lexicon("sense a noun a-1 1\nsense b noun b-1 1\nsense c noun c-1 1\n",
                      hierarchy, "");
}

}  // namespace

TEST(Lexicon, SynsetIdLemma) {
  EXPECT_EQ(SynsetId("f-18-1").lemma(), "f-18");
  EXPECT_TRUE(valid_synset_id("aim-9m-1"));
  EXPECT_FALSE(valid_synset_id("aim"));
  EXPECT_FALSE(valid_synset_id("Aim-1"));
  EXPECT_FALSE(valid_synset_id("aim-0"));
}

TEST(Lexicon, TokenizesSpecialFormatsAsOneToken) {
  auto& lex = fixture_lexicon();
  EXPECT_EQ(token_texts(lex, "a-4c bu# 147781 on runway."),
            (std::vector<std::string>{"a-4c", "bu# 147781", "on", "runway", "."}));
  EXPECT_EQ(token_texts(lex, "3/4 overall view"),
            (std::vector<std::string>{"3/4", "overall", "view"}));
  EXPECT_EQ(token_texts(lex, "t-2 on runway, front view."),
            (std::vector<std::string>{"t-2", "on", "runway", ",", "front", "view", "."}));
}

TEST(Lexicon, SpecialFormatCategories) {
  auto& lex = fixture_lexicon();
  auto cat = [&](std::string_view t) {
    auto r = lex.classify_special(t);
    return r ? r->first.id : std::string("-");
  };
  EXPECT_EQ(cat("bu# 7074"), "identifier-1");
  EXPECT_EQ(cat("3/4"), "fraction-1");
  EXPECT_EQ(cat("an/apg-65"), "equipment-code-1");
  EXPECT_EQ(cat("350#"), "weight-1");
  EXPECT_EQ(cat("42"), "number-1");
  EXPECT_EQ(cat("runway"), "-");
}

TEST(Lexicon, MorphologicalVariants) {
  auto& lex = fixture_lexicon();
  auto plural = lex.lookup_senses("sidewinders");
  EXPECT_TRUE(has_sense(plural, "sidewinder-2", Form::plural));
  EXPECT_TRUE(has_sense(plural, "sidewinder-1", Form::plural));
  // Missile sense is the more frequent one.
  EXPECT_EQ(plural.front().synset.id, "sidewinder-2");
  EXPECT_TRUE(has_sense(lex.lookup_senses("mounted"), "mount-1", Form::ed));
  EXPECT_TRUE(has_sense(lex.lookup_senses("landing"), "land-2", Form::ing));
}

TEST(Lexicon, ListedNounBlocksAgentNounDerivation) {
  auto senses = fixture_lexicon().lookup_senses("launcher");
  ASSERT_EQ(senses.size(), 1u);
  EXPECT_EQ(senses[0].synset.id, "launcher-1");
}

TEST(Lexicon, AliasesResolveToSynsets) {
  auto senses = fixture_lexicon().lookup_senses("hornet");
  ASSERT_FALSE(senses.empty());
  EXPECT_EQ(senses[0].synset.id, "f-18-1");
}

TEST(Lexicon, ResolverExamples) {
  auto& lex = fixture_lexicon();
  auto first = [&](std::string_view t) {
    auto r = lex.resolve_unknown(t);
    return r.empty() ? std::string("-") : r.front().surface;
  };
  EXPECT_EQ(first("trngl"), "triangle");
  EXPECT_EQ(first("crcl"), "circle");
  EXPECT_EQ(first("inyodern"), "inyokern");
  EXPECT_EQ(lex.resolve_unknown("inyodern").front().kind, Resolution::Kind::misspelling);
  EXPECT_EQ(lex.resolve_unknown("trngl").front().kind, Resolution::Kind::abbreviation);
  // Known words and tokens with digits are left alone.
  EXPECT_TRUE(lex.resolve_unknown("runway").empty());
  EXPECT_TRUE(lex.resolve_unknown("ghw-12").empty());
}

TEST(Lexicon, HierarchyQueries) {
  auto& lex = fixture_lexicon();
  EXPECT_TRUE(lex.is_a(SynsetId("sidewinder-2"), SynsetId("weapon-1")));
  EXPECT_FALSE(lex.is_a(SynsetId("sidewinder-1"), SynsetId("weapon-1")));
  EXPECT_TRUE(lex.is_a(SynsetId("sidewinder-1"), SynsetId("snake-1")));
  auto up = lex.ancestors(SynsetId("sidewinder-2"));
  ASSERT_FALSE(up.empty());
  EXPECT_EQ(up.front().synset.id, "projectile-1");
  EXPECT_EQ(up.front().depth, 1u);
  auto& wholes = lex.info(SynsetId("pylon-1")).wholes;
  EXPECT_NE(std::find(wholes.begin(), wholes.end(), SynsetId("aircraft-1")), wholes.end());
  EXPECT_EQ(lex.relation_alias(SynsetId("mount-1")), std::optional<std::string>("locationover"));
  EXPECT_FALSE(lex.relation_alias(SynsetId("land-2")));
}

TEST(Lexicon, RejectsCycles) {
  try {
    tiny("ako a-1 b-1\nako b-1 c-1\nako c-1 a-1\n");
    FAIL() << "cycle accepted";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.source(), "hierarchy");
    EXPECT_NE(std::string(e.what()).find("ako cycle"), std::string::npos);
  }
  EXPECT_THROW(tiny("ako a-1 a-1\n"), FormatError);
}

TEST(Lexicon, RejectsMalformedRecords) {
  auto fails = [](std::string_view lexicon, std::string_view hierarchy = "") {
    try {
      load_lexicon(lexicon, hierarchy, "");
    } catch (const FormatError& e) {
      return e.line();
    }
    return std::size_t{0};
  };
  EXPECT_EQ(fails("sense x noun x-1 1\nsense y nounish y-1 1\n"), 2u);
  EXPECT_EQ(fails("sense on preposition on-1 1\n"), 1u);
  EXPECT_EQ(fails("sense x noun x-1 1\nsense x noun x-1 2\n"), 2u);
  EXPECT_EQ(fails("sense x noun X-1 1\n"), 1u);
  EXPECT_EQ(fails("sense x noun x-1 1\n", "ako x-1 nowhere-1\n"), 1u);
  EXPECT_EQ(fails("sense x noun x-1 1\nsense y verb x-1 1\n"), 2u);
}

TEST(LexiconProperty, AncestorsAreNearestFirstAndTransitive) {
  auto& lex = fixture_lexicon();
  for (auto& [s, info] : lex.synsets()) {
    auto up = lex.ancestors(s);
    for (std::size_t i = 1; i < up.size(); ++i) EXPECT_LE(up[i - 1].depth, up[i].depth);
    for (auto& p : info.parents) {
      // Everything above a parent is above the child.
      for (auto& a : lex.superconcepts(p)) EXPECT_TRUE(lex.is_a(s, a)) << s.id << " " << a.id;
    }
  }
}

TEST(LexiconProperty, EditDistanceMatchesRecursiveDefinition) {
  std::function<std::size_t(std::string_view, std::string_view)> lev =
      [&](std::string_view a, std::string_view b) -> std::size_t {
    if (a.empty()) return b.size();
    if (b.empty()) return a.size();
    std::size_t sub = lev(a.substr(1), b.substr(1)) + (a[0] != b[0]);
    return std::min({sub, lev(a.substr(1), b) + 1, lev(a, b.substr(1)) + 1});
  };
  std::mt19937 rng(3);
  auto word = [&] {
    std::string w;
    for (unsigned k = rng() % 6; k; --k) w += static_cast<char>('a' + rng() % 3);
    return w;
  };
  for (int i = 0; i < 400; ++i) {
    auto a = word(), b = word();
    EXPECT_EQ(detail::edit_distance(a, b), lev(a, b)) << a << " " << b;
  }
}

// Word senses, the a-kind-of / part-of hierarchy, aliases and special-format
// token rules.  A Lexicon is immutable once loaded and may be shared freely
// between threads.

#ifndef CAPTIONIR_LEXICON_HPP_
#define CAPTIONIR_LEXICON_HPP_

#include <algorithm>
#include <compare>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "captionir/text.hpp"

namespace captionir {

/// Canonical synonym-set identifier: lemma, hyphen, sense number
/// ("projectile-1").
struct SynsetId {
  std::string id;

  SynsetId() = default;
  explicit SynsetId(std::string s) : id(std::move(s)) {}

  /// Lemma part: everything before the final hyphen.
  std::string_view lemma() const {
    auto pos = id.rfind('-');
    return pos == std::string::npos ? std::string_view(id)
                                    : std::string_view(id).substr(0, pos);
  }

  friend auto operator<=>(const SynsetId&, const SynsetId&) = default;
  friend bool operator==(const SynsetId&, const SynsetId&) = default;
};

/// True for "<lemma>-<positive integer>".
inline bool valid_synset_id(std::string_view s) {
  auto pos = s.rfind('-');
  if (pos == std::string_view::npos || pos == 0 || pos + 1 >= s.size())
    return false;
  unsigned n = 0;
  return text::parse_int(s.substr(pos + 1), n) && n > 0 && text::is_lower(s);
}

enum class Pos {
  noun,
  verb,
  adjective,
  adverb,
  preposition,
  determiner,
  conjunction,
  other
};

inline constexpr std::string_view pos_name(Pos p) {
  switch (p) {
    case Pos::noun: return "noun";
    case Pos::verb: return "verb";
    case Pos::adjective: return "adjective";
    case Pos::adverb: return "adverb";
    case Pos::preposition: return "preposition";
    case Pos::determiner: return "determiner";
    case Pos::conjunction: return "conjunction";
    case Pos::other: return "other";
  }
  return "other";
}

inline std::optional<Pos> parse_pos(std::string_view s) {
  for (Pos p : {Pos::noun, Pos::verb, Pos::adjective, Pos::adverb,
                Pos::preposition, Pos::determiner, Pos::conjunction,
                Pos::other})
    if (pos_name(p) == s) return p;
  return std::nullopt;
}

enum class PrepClass { location, time, social, abstract, miscellaneous };

inline constexpr std::string_view prep_class_name(PrepClass c) {
  switch (c) {
    case PrepClass::location: return "location";
    case PrepClass::time: return "time";
    case PrepClass::social: return "social";
    case PrepClass::abstract: return "abstract";
    case PrepClass::miscellaneous: return "miscellaneous";
  }
  return "miscellaneous";
}

inline std::optional<PrepClass> parse_prep_class(std::string_view s) {
  for (PrepClass c : {PrepClass::location, PrepClass::time, PrepClass::social,
                      PrepClass::abstract, PrepClass::miscellaneous})
    if (prep_class_name(c) == s) return c;
  return std::nullopt;
}

/// How a surface token reached its sense.
enum class Form {
  base,
  plural,
  ing,         // gerund / present participle
  ed,          // past participle
  er,          // comparative adjective or agentive noun
  special,     // matched a special-format rule
  resolved,    // misspelling or abbreviation of a known word
  classified,  // unknown word typed by co-occurrence
};

inline constexpr std::string_view form_name(Form f) {
  switch (f) {
    case Form::base: return "base";
    case Form::plural: return "plural";
    case Form::ing: return "ing";
    case Form::ed: return "ed";
    case Form::er: return "er";
    case Form::special: return "special";
    case Form::resolved: return "resolved";
    case Form::classified: return "classified";
  }
  return "base";
}

struct WordSense {
  std::string surface;
  Pos pos = Pos::noun;
  SynsetId synset;
  int frequency_rank = 0;
  Form form = Form::base;
  std::optional<PrepClass> prep;  // set iff pos == preposition
  std::string value;              // normalized text for special formats

  friend bool operator==(const WordSense&, const WordSense&) = default;
};

/// Grammar terminal a sense can occupy.  Verb participles get their own
/// classes so that rules can tell "landing" from "land".
inline std::string terminal_class(const WordSense& s) {
  if (s.form == Form::special) return "code";
  switch (s.pos) {
    case Pos::verb:
      if (s.form == Form::ing) return "ing";
      if (s.form == Form::ed) return "ed";
      if (s.form == Form::er) return "noun";
      return "verb";
    default:
      return std::string(pos_name(s.pos));
  }
}

/// Total order used for sense lists: frequency rank, then synset, then form.
inline bool sense_less(const WordSense& a, const WordSense& b) {
  return std::tie(a.frequency_rank, a.synset, a.form, a.pos, a.surface) <
         std::tie(b.frequency_rank, b.synset, b.form, b.pos, b.surface);
}

struct Token {
  std::string text;
  std::size_t offset = 0;  // byte offset of text in the source caption

  friend bool operator==(const Token&, const Token&) = default;
};

/// One element of a special-format pattern.
struct PatternElement {
  enum class Kind { literal, letter, digit, alnum, year, month, day };
  Kind kind = Kind::literal;
  char ch = 0;            // literal character; ' ' matches 1+ whitespace
  bool repeat = false;    // class element followed by '+'
};

struct SpecialFormatRule {
  std::string name;
  std::string pattern;
  std::vector<PatternElement> elements;
  SynsetId category;
  std::size_t order = 0;  // file position; earlier wins among equal lengths

  bool is_date() const {
    return std::any_of(elements.begin(), elements.end(), [](auto& e) {
      return e.kind == PatternElement::Kind::year;
    });
  }
};

namespace detail {

inline std::vector<PatternElement> compile_pattern(std::string_view p) {
  using K = PatternElement::Kind;
  std::vector<PatternElement> out;
  std::size_t i = 0;
  while (i < p.size()) {
    if (p[i] == '<') {
      auto close = p.find('>', i);
      if (close == std::string_view::npos)
        throw Error("unterminated character class in pattern");
      std::string_view body = p.substr(i + 1, close - i - 1);
      PatternElement e;
      if (!body.empty() && body.back() == '+') {
        e.repeat = true;
        body.remove_suffix(1);
      }
      if (body == "L") e.kind = K::letter;
      else if (body == "D") e.kind = K::digit;
      else if (body == "A") e.kind = K::alnum;
      else throw Error("unknown character class <" + std::string(body) + ">");
      out.push_back(e);
      i = close + 1;
    } else if (p.substr(i, 2) == "YY" || p.substr(i, 2) == "MM" ||
               p.substr(i, 2) == "DD") {
      PatternElement e;
      e.kind = p[i] == 'Y' ? K::year : p[i] == 'M' ? K::month : K::day;
      out.push_back(e);
      i += 2;
    } else {
      char c = p[i];
      if (std::isupper(static_cast<unsigned char>(c)))
        throw Error(std::string("uppercase literal '") + c + "' in pattern");
      PatternElement e;
      e.kind = K::literal;
      e.ch = text::is_space(c) ? ' ' : c;
      out.push_back(e);
      ++i;
    }
  }
  if (out.empty()) throw Error("empty pattern");
  return out;
}

inline bool class_accepts(PatternElement::Kind k, char c) {
  using K = PatternElement::Kind;
  switch (k) {
    case K::letter: return text::is_alpha(c);
    case K::digit: return text::is_digit(c);
    case K::alnum: return text::is_alnum(c);
    default: return false;
  }
}

// Collects every end position at which elements[ei..] can match s[si..].
inline void match_from(const std::vector<PatternElement>& el, std::size_t ei,
                       std::string_view s, std::size_t si,
                       std::set<std::size_t>& ends) {
  using K = PatternElement::Kind;
  if (ei == el.size()) {
    ends.insert(si);
    return;
  }
  const auto& e = el[ei];
  switch (e.kind) {
    case K::literal:
      if (e.ch == ' ') {
        std::size_t j = si;
        while (j < s.size() && text::is_space(s[j])) ++j;
        if (j > si) match_from(el, ei + 1, s, j, ends);
      } else if (si < s.size() && s[si] == e.ch) {
        match_from(el, ei + 1, s, si + 1, ends);
      }
      return;
    case K::letter:
    case K::digit:
    case K::alnum: {
      std::size_t j = si;
      while (j < s.size() && class_accepts(e.kind, s[j])) {
        ++j;
        match_from(el, ei + 1, s, j, ends);
        if (!e.repeat) break;
      }
      return;
    }
    case K::year:
      if (si + 2 <= s.size() && text::is_digit(s[si]) &&
          text::is_digit(s[si + 1]))
        match_from(el, ei + 1, s, si + 2, ends);
      return;
    case K::month:
    case K::day: {
      int limit = e.kind == K::month ? 12 : 31;
      for (std::size_t len = 1; len <= 2 && si + len <= s.size(); ++len) {
        unsigned v = 0;
        if (!text::parse_int(s.substr(si, len), v)) break;
        if (v >= 1 && static_cast<int>(v) <= limit)
          match_from(el, ei + 1, s, si + len, ends);
      }
      return;
    }
  }
}

inline std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline bool is_vowel(char c) {
  return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
}

/// Word letters with vowels removed, keeping the initial letter.
inline std::string consonant_skeleton(std::string_view w) {
  std::string out;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!text::is_alpha(w[i])) continue;
    if (i == 0 || !is_vowel(w[i])) out += w[i];
  }
  return out;
}

inline bool is_subsequence(std::string_view needle, std::string_view hay) {
  std::size_t j = 0;
  for (char c : hay)
    if (j < needle.size() && needle[j] == c) ++j;
  return j == needle.size();
}

inline bool all_letters(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), text::is_alpha);
}

}  // namespace detail

struct ResolverOptions {
  std::size_t max_edit = 2;        // misspelling distance for long tokens
  std::size_t short_max_edit = 1;  // ... and for tokens shorter than below
  std::size_t short_length = 6;
  std::size_t min_abbreviation = 2;
};

struct Resolution {
  enum class Kind { misspelling, abbreviation };
  std::string surface;
  Kind kind;
  std::size_t score;  // edit distance to the candidate; lower is better
  int frequency_rank;

  friend bool operator==(const Resolution&, const Resolution&) = default;
};

inline constexpr std::string_view resolution_kind_name(Resolution::Kind k) {
  return k == Resolution::Kind::misspelling ? "misspelling" : "abbreviation";
}

/// An ancestor together with its shortest a-kind-of distance.
struct Ancestor {
  SynsetId synset;
  std::size_t depth;
};

class Lexicon {
 public:
  struct SynsetInfo {
    Pos pos;
    int frequency_rank;
    std::vector<SynsetId> parents;   // sorted
    std::vector<SynsetId> children;  // sorted
    std::vector<SynsetId> wholes;    // part-of targets, sorted
  };

  bool has_synset(const SynsetId& s) const { return synsets_.count(s) > 0; }
  const SynsetInfo& info(const SynsetId& s) const {
    auto it = synsets_.find(s);
    if (it == synsets_.end()) throw Error("unknown synset " + s.id);
    return it->second;
  }
  const std::map<SynsetId, SynsetInfo>& synsets() const { return synsets_; }
  const std::vector<SpecialFormatRule>& formats() const { return formats_; }
  const std::map<std::string, std::vector<WordSense>>& entries() const {
    return entries_;
  }
  const std::map<std::string, std::vector<SynsetId>>& aliases() const {
    return aliases_;
  }
  std::size_t ako_edge_count() const { return ako_edges_; }

  /// Canonical relation label a verb synset or relation label stands for,
  /// if declared with `relalias`.
  std::optional<std::string> relation_alias(std::string_view key) const {
    auto it = relation_aliases_.find(std::string(key));
    if (it == relation_aliases_.end()) return std::nullopt;
    return it->second;
  }

  /// Relation alias for a synset or any of its ancestors, nearest first.
  std::optional<std::string> relation_alias(const SynsetId& s) const {
    if (auto r = relation_alias(std::string_view(s.id))) return r;
    for (auto& a : superconcepts(s))
      if (auto r = relation_alias(std::string_view(a.id))) return r;
    return std::nullopt;
  }

  // Tokenization --------------------------------------------------------

  std::vector<Token> tokenize(std::string_view caption) const {
    std::vector<Token> out;
    std::size_t i = 0, n = caption.size();
    while (i < n) {
      while (i < n && text::is_space(caption[i])) ++i;
      if (i >= n) break;
      if (auto end = longest_special(caption, i)) {
        out.push_back({std::string(caption.substr(i, *end - i)), i});
        i = *end;
        continue;
      }
      if (is_word_char(caption[i])) {
        std::size_t j = i;
        while (j < n && (is_word_char(caption[j]) ||
                         (caption[j] == '.' && j + 1 < n &&
                          text::is_alnum(caption[j + 1]))))
          ++j;
        out.push_back({std::string(caption.substr(i, j - i)), i});
        i = j;
      } else {
        out.push_back({std::string(1, caption[i]), i});
        ++i;
      }
    }
    return out;
  }

  // Lookup ----------------------------------------------------------------

  /// Direct entries, aliases and suffix-stripped variants, ordered by
  /// frequency rank then synset.
  std::vector<WordSense> lookup_senses(std::string_view token) const {
    std::vector<WordSense> out;
    auto add = [&](const WordSense& s) {
      for (auto& o : out)
        if (o.synset == s.synset && o.form == s.form && o.pos == s.pos) return;
      out.push_back(s);
    };
    std::string tok(token);
    for (auto& s : base_senses(tok)) add(s);

    auto variants = [&](const std::string& stem, Form form,
                        std::initializer_list<Pos> allowed) {
      for (auto& s : base_senses(stem)) {
        if (std::find(allowed.begin(), allowed.end(), s.pos) == allowed.end())
          continue;
        WordSense v = s;
        v.surface = tok;
        v.form = form;
        if (form == Form::plural && s.pos == Pos::verb) v.form = Form::base;
        add(v);
      }
    };
    for (auto& stem : plural_stems(tok))
      variants(stem, Form::plural, {Pos::noun, Pos::verb});
    for (auto& stem : suffix_stems(tok, "ing"))
      variants(stem, Form::ing, {Pos::verb});
    for (auto& stem : suffix_stems(tok, "ed"))
      variants(stem, Form::ed, {Pos::verb});
    // Agent nouns only stand in for words the lexicon lacks as nouns.
    bool listed_noun = std::any_of(out.begin(), out.end(), [](auto& s) {
      return s.form == Form::base && s.pos == Pos::noun;
    });
    if (!listed_noun)
      for (auto& stem : suffix_stems(tok, "er"))
        variants(stem, Form::er, {Pos::verb, Pos::adjective});

    std::sort(out.begin(), out.end(), sense_less);
    return out;
  }

  /// First (longest, then earliest-declared) special-format rule matching
  /// the whole token.
  std::optional<std::pair<SynsetId, std::string>> classify_special(
      std::string_view token) const {
    for (auto& rule : formats_) {
      std::set<std::size_t> ends;
      detail::match_from(rule.elements, 0, token, 0, ends);
      if (ends.count(token.size()))
        return std::make_pair(rule.category, normalize(rule, token));
    }
    return std::nullopt;
  }

  /// Misspelling and abbreviation candidates among known surfaces.
  std::vector<Resolution> resolve_unknown(
      std::string_view token, const ResolverOptions& opt = {}) const {
    std::vector<Resolution> out;
    if (!detail::all_letters(token)) return out;
    std::size_t max_edit =
        token.size() < opt.short_length ? opt.short_max_edit : opt.max_edit;
    for (auto& [surface, rank] : known_surfaces_) {
      if (surface == token) return {};
      if (!detail::all_letters(surface)) continue;
      std::size_t d = detail::edit_distance(token, surface);
      if (d <= max_edit) {
        out.push_back({surface, Resolution::Kind::misspelling, d, rank});
      } else if (token.size() >= opt.min_abbreviation &&
                 surface.size() > token.size() &&
                 surface.front() == token.front() &&
                 detail::is_subsequence(token,
                                        detail::consonant_skeleton(surface))) {
        out.push_back({surface, Resolution::Kind::abbreviation, d, rank});
      }
    }
    std::sort(out.begin(), out.end(), [](auto& a, auto& b) {
      return std::tie(a.score, a.frequency_rank, a.surface) <
             std::tie(b.score, b.frequency_rank, b.surface);
    });
    return out;
  }

  // Hierarchy -------------------------------------------------------------

  /// Breadth-first ancestors, nearest first, each with its shortest
  /// distance.  Parents of one node are visited in synset order.
  std::vector<Ancestor> ancestors(const SynsetId& s) const {
    std::vector<Ancestor> out;
    std::set<SynsetId> seen{s};
    std::deque<Ancestor> queue{{s, 0}};
    while (!queue.empty()) {
      Ancestor cur = queue.front();
      queue.pop_front();
      for (auto& p : info(cur.synset).parents) {
        if (!seen.insert(p).second) continue;
        out.push_back({p, cur.depth + 1});
        queue.push_back({p, cur.depth + 1});
      }
    }
    return out;
  }

  std::vector<SynsetId> superconcepts(const SynsetId& s) const {
    std::vector<SynsetId> out;
    for (auto& a : ancestors(s)) out.push_back(a.synset);
    return out;
  }

  /// Reflexive a-kind-of test.
  bool is_a(const SynsetId& s, const SynsetId& ancestor) const {
    if (s == ancestor) return true;
    for (auto& a : ancestors(s))
      if (a.synset == ancestor) return true;
    return false;
  }

  /// Every synset below `s` (excluding `s`), in synset order.
  std::vector<SynsetId> descendants(const SynsetId& s) const {
    std::set<SynsetId> seen;
    std::vector<SynsetId> stack{s};
    while (!stack.empty()) {
      SynsetId cur = stack.back();
      stack.pop_back();
      for (auto& c : info(cur).children)
        if (seen.insert(c).second) stack.push_back(c);
    }
    return {seen.begin(), seen.end()};
  }

  friend Lexicon load_lexicon(std::string_view, std::string_view,
                              std::string_view);

 private:
  static bool is_word_char(char c) {
    return text::is_alnum(c) || c == '#' || c == '/' || c == '-' ||
           c == '&' || c == '\'';
  }

  static bool boundary_at(std::string_view s, std::size_t end) {
    if (end >= s.size()) return true;
    char c = s[end];
    if (text::is_space(c)) return true;
    if (c == '.') return end + 1 >= s.size() || !text::is_alnum(s[end + 1]);
    return !is_word_char(c);
  }

  std::optional<std::size_t> longest_special(std::string_view s,
                                             std::size_t start) const {
    std::optional<std::size_t> best;
    for (auto& rule : formats_) {
      std::set<std::size_t> ends;
      detail::match_from(rule.elements, 0, s, start, ends);
      for (auto it = ends.rbegin(); it != ends.rend(); ++it) {
        if (*it == start || !boundary_at(s, *it)) continue;
        if (text::is_space(s[*it - 1])) continue;
        if (!best || *it > *best) best = *it;
        break;
      }
    }
    return best;
  }

  static std::string normalize(const SpecialFormatRule& rule,
                               std::string_view token) {
    using K = PatternElement::Kind;
    if (rule.is_date()) {
      // Re-walk the pattern to pull the fields back out.
      std::string year, month, day;
      std::size_t si = 0;
      for (std::size_t ei = 0; ei < rule.elements.size(); ++ei) {
        auto& e = rule.elements[ei];
        auto take_digits = [&](std::size_t maxlen) {
          std::size_t j = si;
          while (j < token.size() && j - si < maxlen &&
                 text::is_digit(token[j]))
            ++j;
          std::string v(token.substr(si, j - si));
          si = j;
          return v;
        };
        switch (e.kind) {
          case K::year: year = take_digits(2); break;
          case K::month: month = take_digits(2); break;
          case K::day: day = take_digits(2); break;
          case K::literal:
            if (e.ch == ' ')
              while (si < token.size() && text::is_space(token[si])) ++si;
            else
              ++si;
            break;
          default:
            while (si < token.size() && detail::class_accepts(e.kind, token[si]))
              ++si;
        }
      }
      unsigned y = 0;
      text::parse_int(year, y);
      std::string full = (y >= 30 ? "19" : "20") + year;
      auto pad = [](const std::string& v) {
        return v.size() == 1 ? "0" + v : v;
      };
      return full + "-" + pad(month) + "-" + pad(day);
    }
    std::size_t lead = 0, trail = 0;
    while (lead < rule.elements.size() &&
           rule.elements[lead].kind == K::literal)
      ++lead;
    if (lead == rule.elements.size()) return std::string(token);
    while (rule.elements[rule.elements.size() - 1 - trail].kind == K::literal)
      ++trail;
    std::size_t si = 0;
    for (std::size_t k = 0; k < lead; ++k) {
      if (rule.elements[k].ch == ' ')
        while (si < token.size() && text::is_space(token[si])) ++si;
      else
        ++si;
    }
    std::size_t ei = token.size();
    for (std::size_t k = 0; k < trail; ++k) {
      if (rule.elements[rule.elements.size() - 1 - k].ch == ' ')
        while (ei > si && text::is_space(token[ei - 1])) --ei;
      else
        --ei;
    }
    return std::string(token.substr(si, ei - si));
  }

  std::vector<WordSense> base_senses(const std::string& surface) const {
    std::vector<WordSense> out;
    if (auto it = entries_.find(surface); it != entries_.end())
      out = it->second;
    if (auto it = aliases_.find(surface); it != aliases_.end()) {
      for (auto& syn : it->second) {
        const auto& si = info(syn);
        WordSense s;
        s.surface = surface;
        s.pos = si.pos;
        s.synset = syn;
        s.frequency_rank = si.frequency_rank;
        s.prep = synset_prep_.count(syn) ? std::optional(synset_prep_.at(syn))
                                         : std::nullopt;
        out.push_back(s);
      }
    }
    return out;
  }

  static std::vector<std::string> plural_stems(const std::string& t) {
    std::vector<std::string> out;
    if (t.size() > 3 && text::ends_with(t, "ies"))
      out.push_back(t.substr(0, t.size() - 3) + "y");
    if (t.size() > 3 && text::ends_with(t, "es"))
      out.push_back(t.substr(0, t.size() - 2));
    if (t.size() > 2 && text::ends_with(t, "s") && !text::ends_with(t, "ss"))
      out.push_back(t.substr(0, t.size() - 1));
    return out;
  }

  // Stems for -ing / -ed / -er with e-restoration, consonant undoubling and
  // y-restoration.
  static std::vector<std::string> suffix_stems(const std::string& t,
                                               std::string_view suffix) {
    std::vector<std::string> out;
    if (t.size() < suffix.size() + 2 || !text::ends_with(t, suffix)) return out;
    std::string stem = t.substr(0, t.size() - suffix.size());
    out.push_back(stem);
    out.push_back(stem + "e");
    std::size_t n = stem.size();
    if (n >= 2 && stem[n - 1] == stem[n - 2] && !detail::is_vowel(stem[n - 1]))
      out.push_back(stem.substr(0, n - 1));
    if (suffix != "ing" && n >= 2 && stem[n - 1] == 'i')
      out.push_back(stem.substr(0, n - 1) + "y");
    return out;
  }

  std::map<SynsetId, SynsetInfo> synsets_;
  std::map<SynsetId, PrepClass> synset_prep_;
  std::map<std::string, std::vector<WordSense>> entries_;
  std::map<std::string, std::vector<SynsetId>> aliases_;
  std::map<std::string, std::string> relation_aliases_;
  std::vector<std::pair<std::string, int>> known_surfaces_;  // sorted
  std::vector<SpecialFormatRule> formats_;
  std::size_t ako_edges_ = 0;
};

/// Parses the three lexicon files.  Errors name the file kind and line.
inline Lexicon load_lexicon(std::string_view lexicon_text,
                            std::string_view hierarchy_text,
                            std::string_view formats_text) {
  Lexicon lex;
  std::map<SynsetId, std::size_t> declared_at;

  for (auto& line : text::content_lines(lexicon_text)) {
    auto f = text::fields(line.content);
    auto fail = [&](const std::string& what) {
      throw FormatError("lexicon", line.number, what);
    };
    if (f.empty() || f[0] != "sense") fail("expected 'sense' record");
    if (f.size() != 5 && f.size() != 6) fail("sense record needs 4 or 5 fields");
    WordSense s;
    s.surface = f[1];
    if (!text::is_lower(s.surface)) fail("surface must be lowercase: " + f[1]);
    auto pos = parse_pos(f[2]);
    if (!pos) fail("unknown part of speech '" + f[2] + "'");
    s.pos = *pos;
    if (!valid_synset_id(f[3])) fail("malformed synset id '" + f[3] + "'");
    s.synset = SynsetId(f[3]);
    if (!text::parse_int(f[4], s.frequency_rank) || s.frequency_rank < 0)
      fail("frequency rank must be a nonnegative integer");
    if (f.size() == 6) {
      auto pc = parse_prep_class(f[5]);
      if (!pc) fail("unknown preposition class '" + f[5] + "'");
      if (s.pos != Pos::preposition) fail("preposition class on a non-preposition");
      s.prep = pc;
    } else if (s.pos == Pos::preposition) {
      fail("preposition sense needs a class");
    }

    auto& list = lex.entries_[s.surface];
    for (auto& o : list)
      if (o.pos == s.pos && o.synset == s.synset)
        fail("duplicate sense " + s.surface + " " + f[2] + " " + s.synset.id);
    auto [it, fresh] = lex.synsets_.try_emplace(
        s.synset, Lexicon::SynsetInfo{s.pos, s.frequency_rank, {}, {}, {}});
    if (!fresh) {
      if (it->second.pos != s.pos)
        fail("synset " + s.synset.id + " already declared as " +
             std::string(pos_name(it->second.pos)) + " on line " +
             std::to_string(declared_at[s.synset]));
      it->second.frequency_rank =
          std::min(it->second.frequency_rank, s.frequency_rank);
    } else {
      declared_at[s.synset] = line.number;
    }
    if (s.prep) lex.synset_prep_[s.synset] = *s.prep;
    list.push_back(s);
  }
  for (auto& [surface, list] : lex.entries_)
    std::sort(list.begin(), list.end(), sense_less);

  std::map<std::pair<SynsetId, SynsetId>, std::size_t> ako_line;
  for (auto& line : text::content_lines(hierarchy_text)) {
    auto f = text::fields(line.content);
    auto fail = [&](const std::string& what) {
      throw FormatError("hierarchy", line.number, what);
    };
    if (f.size() != 3) fail("expected '<kind> <a> <b>'");
    auto known = [&](const std::string& id) {
      SynsetId s(id);
      if (!lex.synsets_.count(s)) fail("unknown synset '" + id + "'");
      return s;
    };
    if (f[0] == "ako") {
      SynsetId child = known(f[1]), parent = known(f[2]);
      if (child == parent) fail("ako cycle: " + child.id + " -> " + child.id);
      auto& ps = lex.synsets_[child].parents;
      if (std::find(ps.begin(), ps.end(), parent) != ps.end()) continue;
      ps.push_back(parent);
      lex.synsets_[parent].children.push_back(child);
      ako_line[{child, parent}] = line.number;
      ++lex.ako_edges_;
    } else if (f[0] == "part") {
      SynsetId part = known(f[1]), whole = known(f[2]);
      lex.synsets_[part].wholes.push_back(whole);
    } else if (f[0] == "alias") {
      if (!text::is_lower(f[1])) fail("alias surface must be lowercase");
      SynsetId target = known(f[2]);
      auto& v = lex.aliases_[f[1]];
      if (std::find(v.begin(), v.end(), target) == v.end()) v.push_back(target);
    } else if (f[0] == "relalias") {
      lex.relation_aliases_[f[1]] = f[2];
    } else {
      fail("unknown hierarchy record '" + f[0] + "'");
    }
  }
  for (auto& [id, si] : lex.synsets_) {
    std::sort(si.parents.begin(), si.parents.end());
    std::sort(si.children.begin(), si.children.end());
    std::sort(si.wholes.begin(), si.wholes.end());
    si.wholes.erase(std::unique(si.wholes.begin(), si.wholes.end()),
                    si.wholes.end());
  }
  for (auto& [surface, v] : lex.aliases_) std::sort(v.begin(), v.end());

  // Cycle check: iterative DFS with colours; report the cycle's members.
  {
    enum Colour { white, grey, black };
    std::map<SynsetId, Colour> colour;
    for (auto& [id, si] : lex.synsets_) colour[id] = white;
    for (auto& [root, unused] : lex.synsets_) {
      if (colour[root] != white) continue;
      std::vector<std::pair<SynsetId, std::size_t>> stack{{root, 0}};
      colour[root] = grey;
      while (!stack.empty()) {
        auto& [node, next] = stack.back();
        const auto& parents = lex.synsets_[node].parents;
        if (next == parents.size()) {
          colour[node] = black;
          stack.pop_back();
          continue;
        }
        SynsetId p = parents[next++];
        if (colour[p] == grey) {
          std::vector<std::string> cycle;
          bool in = false;
          for (auto& [n, i] : stack) {
            if (n == p) in = true;
            if (in) cycle.push_back(n.id);
          }
          cycle.push_back(p.id);
          throw FormatError("hierarchy", ako_line[{node, p}],
                            "ako cycle: " + text::join(cycle, " -> "));
        }
        if (colour[p] == white) {
          colour[p] = grey;
          stack.push_back({p, 0});
        }
      }
    }
  }

  std::size_t order = 0;
  for (auto& line : text::content_lines(formats_text)) {
    auto fail = [&](const std::string& what) {
      throw FormatError("formats", line.number, what);
    };
    auto f = text::split(line.content, '\t');
    if (f.size() != 4 || f[0] != "fmt")
      fail("expected 'fmt<TAB>name<TAB>pattern<TAB>category'");
    SpecialFormatRule rule;
    rule.name = f[1];
    rule.pattern = f[2];
    try {
      rule.elements = detail::compile_pattern(rule.pattern);
    } catch (const Error& e) {
      fail(e.what());
    }
    rule.category = SynsetId(std::string(text::trim(f[3])));
    if (!lex.synsets_.count(rule.category))
      fail("unknown category synset '" + rule.category.id + "'");
    rule.order = order++;
    lex.formats_.push_back(std::move(rule));
  }

  std::map<std::string, int> surfaces;
  for (auto& [surface, list] : lex.entries_)
    surfaces[surface] = list.front().frequency_rank;
  for (auto& [surface, syns] : lex.aliases_) {
    int best = lex.synsets_[syns.front()].frequency_rank;
    for (auto& s : syns) best = std::min(best, lex.synsets_[s].frequency_rank);
    auto [it, fresh] = surfaces.try_emplace(surface, best);
    if (!fresh) it->second = std::min(it->second, best);
  }
  lex.known_surfaces_.assign(surfaces.begin(), surfaces.end());
  return lex;
}

}  // namespace captionir

#endif  // CAPTIONIR_LEXICON_HPP_

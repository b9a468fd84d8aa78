// Binary context-free grammar with head positions and case-relation labels.

#ifndef CAPTIONIR_GRAMMAR_HPP_
#define CAPTIONIR_GRAMMAR_HPP_

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "captionir/lexicon.hpp"
#include "captionir/text.hpp"

namespace captionir {

/// Lowercase symbols a rule may use on its right-hand side in place of a
/// category; each names the lexical class of one token (see terminal_class).
inline const std::set<std::string>& terminal_classes() {
  static const std::set<std::string> classes = {
      "noun",        "verb",       "ing",         "ed",    "adjective",
      "adverb",      "preposition", "determiner", "conjunction", "other",
      "code"};
  return classes;
}

struct GrammarRule {
  std::string id;
  std::string lhs;
  std::vector<std::string> rhs;  // one or two symbols
  int head = 1;                  // 1-based index into rhs
  std::string relation;          // empty for unary rules
  std::uint64_t count = 0;

  bool binary() const { return rhs.size() == 2; }
  friend bool operator==(const GrammarRule&, const GrammarRule&) = default;
};

/// Maps a prepositional attachment label to its class-specific label.
struct PrepMapping {
  std::string base;
  PrepClass prep_class;
  std::string lemma;  // "*" for any preposition of the class
  std::string label;

  friend bool operator==(const PrepMapping&, const PrepMapping&) = default;
};

class Grammar {
 public:
  static constexpr double kDefaultAlpha = 0.5;

  const std::string& start() const { return start_; }
  const std::vector<GrammarRule>& rules() const { return rules_; }
  const std::vector<std::string>& relations() const { return relations_; }
  const std::vector<PrepMapping>& prep_mappings() const { return prepmap_; }
  double alpha() const { return alpha_; }
  void set_alpha(double a) { alpha_ = a; }

  bool is_category(std::string_view s) const {
    return categories_.count(std::string(s)) > 0;
  }

  const GrammarRule& rule(std::string_view id) const {
    return rules_[index_of(id)];
  }
  bool has_rule(std::string_view id) const {
    return by_id_.count(std::string(id)) > 0;
  }

  /// Rules whose rhs is exactly `symbols`.
  const GrammarRule* find(std::string_view lhs,
                          const std::vector<std::string>& symbols) const {
    auto it = by_structure_.find({std::string(lhs), symbols});
    return it == by_structure_.end() ? nullptr : &rules_[it->second];
  }

  const std::vector<std::size_t>& unary_over(std::string_view symbol) const {
    static const std::vector<std::size_t> none;
    auto it = unary_by_rhs_.find(std::string(symbol));
    return it == unary_by_rhs_.end() ? none : it->second;
  }
  const std::vector<std::size_t>& binary_with_left(
      std::string_view symbol) const {
    static const std::vector<std::size_t> none;
    auto it = binary_by_left_.find(std::string(symbol));
    return it == binary_by_left_.end() ? none : it->second;
  }
  const std::vector<std::size_t>& binary_with_right(
      std::string_view symbol) const {
    static const std::vector<std::size_t> none;
    auto it = binary_by_right_.find(std::string(symbol));
    return it == binary_by_right_.end() ? none : it->second;
  }
  const std::vector<std::size_t>& rules_for(std::string_view lhs) const {
    static const std::vector<std::size_t> none;
    auto it = by_lhs_.find(std::string(lhs));
    return it == by_lhs_.end() ? none : it->second;
  }

  std::uint64_t lhs_total(std::string_view lhs) const {
    std::uint64_t total = 0;
    for (auto i : rules_for(lhs)) total += rules_[i].count;
    return total;
  }

  /// Smoothed log P(rule | lhs).  Always <= 0.
  double rule_log_prob(const GrammarRule& r) const {
    const auto& siblings = rules_for(r.lhs);
    double fanout = static_cast<double>(siblings.size());
    double num = static_cast<double>(r.count) + alpha_;
    double den = static_cast<double>(lhs_total(r.lhs)) + alpha_ * fanout;
    double lp = std::log(num / den);
    return lp > 0.0 ? 0.0 : lp;
  }
  double rule_log_prob(std::string_view id) const {
    return rule_log_prob(rule(id));
  }

  /// (head, dependent) for a binary rule given its children's headwords.
  template <typename T>
  static std::pair<T, T> head_of(const GrammarRule& r, const T& left,
                                 const T& right) {
    if (!r.binary())
      throw Error("head_of: rule " + r.id + " is not binary");
    return r.head == 1 ? std::pair<T, T>(left, right)
                       : std::pair<T, T>(right, left);
  }

  /// True when nodes built by `r` attach a prepositional phrase and so take
  /// their relation label and statistics from the preposition's class.
  bool attaches_preposition(const GrammarRule& r) const {
    for (auto& m : prepmap_)
      if (m.base == r.relation) return true;
    return false;
  }

  /// Class-specific relation label; the exact-lemma mapping beats "*".
  std::optional<std::string> specialize(std::string_view base, PrepClass c,
                                        std::string_view lemma) const {
    const PrepMapping* wildcard = nullptr;
    for (auto& m : prepmap_) {
      if (m.base != base || m.prep_class != c) continue;
      if (m.lemma == lemma) return m.label;
      if (m.lemma == "*" && !wildcard) wildcard = &m;
    }
    if (wildcard) return wildcard->label;
    return std::nullopt;
  }

  void add_count(std::string_view id, std::uint64_t delta) {
    rules_[index_of(id)].count += delta;
  }

  friend Grammar load_grammar(std::string_view);

 private:
  std::size_t index_of(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    if (it == by_id_.end()) throw Error("unknown rule " + std::string(id));
    return it->second;
  }

  std::string start_;
  double alpha_ = kDefaultAlpha;
  std::vector<GrammarRule> rules_;
  std::vector<std::string> relations_;
  std::vector<PrepMapping> prepmap_;
  std::set<std::string> categories_;
  std::map<std::string, std::size_t> by_id_;
  std::map<std::pair<std::string, std::vector<std::string>>, std::size_t>
      by_structure_;
  std::map<std::string, std::vector<std::size_t>> by_lhs_;
  std::map<std::string, std::vector<std::size_t>> unary_by_rhs_;
  std::map<std::string, std::vector<std::size_t>> binary_by_left_;
  std::map<std::string, std::vector<std::size_t>> binary_by_right_;
};

inline Grammar load_grammar(std::string_view body) {
  Grammar g;
  std::map<std::string, std::size_t> rule_line;
  std::size_t start_line = 0;

  for (auto& line : text::content_lines(body)) {
    auto fail = [&](const std::string& what) -> void {
      throw FormatError("grammar", line.number, what);
    };
    auto f = text::fields(line.content);
    if (f.size() == 1 && text::starts_with(f[0], "start=")) {
      g.start_ = f[0].substr(6);
      start_line = line.number;
      continue;
    }
    if (f[0] == "relations") {
      for (std::size_t i = 1; i < f.size(); ++i) g.relations_.push_back(f[i]);
      continue;
    }
    if (f[0] == "prepmap") {
      if (f.size() != 5)
        fail("expected 'prepmap <base> <class> <lemma|*> <label>'");
      auto pc = parse_prep_class(f[2]);
      if (!pc) fail("unknown preposition class '" + f[2] + "'");
      g.prepmap_.push_back({f[1], *pc, f[3], f[4]});
      continue;
    }
    if (f.size() < 3 || f[1] != "->") fail("expected '<LHS> -> <RHS> ...'");

    GrammarRule r;
    r.lhs = f[0];
    bool have_head = false, have_count = false;
    for (std::size_t i = 2; i < f.size(); ++i) {
      const std::string& tok = f[i];
      auto eq = tok.find('=');
      if (eq == std::string::npos) {
        if (have_head || have_count || !r.relation.empty())
          fail("rhs symbol '" + tok + "' after attributes");
        r.rhs.push_back(tok);
        continue;
      }
      std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
      if (key == "head") {
        if (val != "1" && val != "2") fail("unknown head position '" + val + "'");
        r.head = val == "1" ? 1 : 2;
        have_head = true;
      } else if (key == "rel") {
        r.relation = val;
      } else if (key == "count") {
        if (!text::parse_int(val, r.count)) fail("count must be a nonnegative integer");
        have_count = true;
      } else if (key == "id") {
        r.id = val;
      } else {
        fail("unknown attribute '" + key + "'");
      }
    }
    if (r.rhs.empty()) fail("rule has no right-hand side");
    if (r.rhs.size() > 2)
      fail("rule " + r.lhs + " has " + std::to_string(r.rhs.size()) +
           " right-hand symbols; only unary and binary rules are allowed");
    if (!have_head) fail("missing head=");
    if (r.head > static_cast<int>(r.rhs.size()))
      fail("head position " + std::to_string(r.head) + " exceeds rhs length");
    if (r.binary() && r.relation.empty()) fail("binary rule needs rel=");
    if (!r.binary() && !r.relation.empty()) fail("unary rule cannot carry rel=");
    if (r.id.empty()) {
      r.id = r.lhs;
      for (auto& s : r.rhs) r.id += "_" + s;
    }
    if (g.by_id_.count(r.id))
      fail("duplicate rule id '" + r.id + "' (first on line " +
           std::to_string(rule_line[r.id]) + ")");
    if (g.by_structure_.count({r.lhs, r.rhs}))
      fail("duplicate rule structure for " + r.id);
    rule_line[r.id] = line.number;
    g.by_id_[r.id] = g.rules_.size();
    g.by_structure_[{r.lhs, r.rhs}] = g.rules_.size();
    g.categories_.insert(r.lhs);
    g.rules_.push_back(std::move(r));
  }

  if (g.start_.empty()) throw FormatError("grammar", 0, "missing start= line");
  if (!g.categories_.count(g.start_))
    throw FormatError("grammar", start_line,
                      "start category " + g.start_ + " has no rules");

  std::set<std::string> vocabulary(g.relations_.begin(), g.relations_.end());
  for (std::size_t i = 0; i < g.rules_.size(); ++i) {
    const auto& r = g.rules_[i];
    for (auto& s : r.rhs)
      if (!g.categories_.count(s) && !terminal_classes().count(s))
        throw FormatError("grammar", rule_line[r.id],
                          "undefined symbol '" + s + "'");
    if (r.binary() && !vocabulary.empty() && !vocabulary.count(r.relation))
      throw FormatError("grammar", rule_line[r.id],
                        "relation '" + r.relation + "' not declared");
    g.by_lhs_[r.lhs].push_back(i);
    if (r.binary()) {
      g.binary_by_left_[r.rhs[0]].push_back(i);
      g.binary_by_right_[r.rhs[1]].push_back(i);
    } else {
      g.unary_by_rhs_[r.rhs[0]].push_back(i);
    }
  }
  for (auto& m : g.prepmap_)
    if (!vocabulary.empty() && (!vocabulary.count(m.base) || !vocabulary.count(m.label)))
      throw FormatError("grammar", 0,
                        "prepmap uses undeclared relation " + m.base + "/" + m.label);

  // Unary chains must terminate, otherwise a category could derive itself
  // at no cost and the parse set would be infinite.
  std::map<std::string, std::vector<std::string>> unary_edges;
  for (auto& r : g.rules_)
    if (!r.binary() && g.categories_.count(r.rhs[0]))
      unary_edges[r.lhs].push_back(r.rhs[0]);
  std::map<std::string, int> state;
  std::vector<std::string> path;
  auto visit = [&](auto&& self, const std::string& c) -> void {
    state[c] = 1;
    path.push_back(c);
    for (auto& next : unary_edges[c]) {
      if (state[next] == 1) {
        path.push_back(next);
        throw FormatError("grammar", 0,
                          "unary cycle: " + text::join(path, " -> "));
      }
      if (state[next] == 0) self(self, next);
    }
    path.pop_back();
    state[c] = 2;
  };
  for (auto& c : g.categories_)
    if (state[c] == 0) visit(visit, c);
  return g;
}

/// Inverse of load_grammar (modulo comments and blank lines).
inline std::string save_grammar(const Grammar& g) {
  std::string out = "start=" + g.start() + "\n";
  if (!g.relations().empty())
    out += "relations " + text::join(g.relations(), " ") + "\n";
  for (auto& m : g.prep_mappings())
    out += "prepmap " + m.base + " " + std::string(prep_class_name(m.prep_class)) +
           " " + m.lemma + " " + m.label + "\n";
  for (auto& r : g.rules()) {
    out += r.lhs + " ->";
    for (auto& s : r.rhs) out += " " + s;
    out += " head=" + std::to_string(r.head);
    if (!r.relation.empty()) out += " rel=" + r.relation;
    out += " count=" + std::to_string(r.count) + " id=" + r.id + "\n";
  }
  return out;
}

}  // namespace captionir

#endif  // CAPTIONIR_GRAMMAR_HPP_

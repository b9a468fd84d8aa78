// Parse trees: immutable, structurally shared nodes, the deterministic total
// order used to break score ties, and the bracketed and JSON text forms.

#ifndef CAPTIONIR_TREE_HPP_
#define CAPTIONIR_TREE_HPP_

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "captionir/lexicon.hpp"
#include "captionir/text.hpp"

namespace captionir {

struct ParseNode;
using NodePtr = std::shared_ptr<const ParseNode>;

struct ParseNode {
  std::string category;  // grammar category, or terminal class at leaves
  std::size_t begin = 0, end = 0;
  std::string rule;      // rule id; empty at leaves
  std::string stat_key;  // statistics key of a binary node
  std::optional<WordSense> sense;  // leaves only
  std::string token;               // leaves only
  NodePtr left, right;             // right is null for unary nodes
  const ParseNode* head_leaf = nullptr;
  const ParseNode* prep_leaf = nullptr;  // preposition heading a PP below
  double local = 0;  // this node's own log contribution
  double score = 0;  // local plus children
  std::size_t size = 1;

  bool is_leaf() const { return !left; }
  bool is_binary() const { return static_cast<bool>(right); }
  const SynsetId& head() const { return head_leaf->sense->synset; }
  const WordSense& head_sense() const { return *head_leaf->sense; }
};

namespace detail {

inline int cmp_str(std::string_view a, std::string_view b) {
  return a < b ? -1 : (b < a ? 1 : 0);
}

}  // namespace detail

/// Structural order: pre-order over (span, rule or leaf sense) with children
/// left to right.  Self-delimiting, so substituting a smaller subtree always
/// yields a smaller tree.
inline int structure_compare(const ParseNode& a, const ParseNode& b) {
  if (a.begin != b.begin) return a.begin < b.begin ? -1 : 1;
  if (a.end != b.end) return a.end < b.end ? -1 : 1;
  if (a.is_leaf() != b.is_leaf()) return a.is_leaf() ? -1 : 1;
  if (a.is_leaf()) {
    if (int c = detail::cmp_str(a.category, b.category)) return c;
    const auto& sa = *a.sense;
    const auto& sb = *b.sense;
    if (sa.frequency_rank != sb.frequency_rank)
      return sa.frequency_rank < sb.frequency_rank ? -1 : 1;
    if (int c = detail::cmp_str(sa.synset.id, sb.synset.id)) return c;
    if (sa.form != sb.form) return sa.form < sb.form ? -1 : 1;
    if (sa.pos != sb.pos) return sa.pos < sb.pos ? -1 : 1;
    return 0;
  }
  if (int c = detail::cmp_str(a.rule, b.rule)) return c;
  if (int c = structure_compare(*a.left, *b.left)) return c;
  if (a.is_binary()) return structure_compare(*a.right, *b.right);
  return 0;
}

/// Scores on a 1e-9 grid.  Trees that differ only in bracketing sum the same
/// local scores in a different order; the grid makes them tie exactly.
inline long long score_key(double score) { return std::llround(score * 1e9); }

/// Ranking order: higher score first, then fewer nodes, then structure.
inline bool ranks_before(const ParseNode& a, const ParseNode& b) {
  if (auto ka = score_key(a.score), kb = score_key(b.score); ka != kb) return ka > kb;
  if (a.size != b.size) return a.size < b.size;
  return structure_compare(a, b) < 0;
}

inline bool same_tree(const ParseNode& a, const ParseNode& b) {
  return a.size == b.size && structure_compare(a, b) == 0;
}

// Bracketed form ------------------------------------------------------------

namespace detail {

inline std::string quote_token(std::string_view t) {
  std::string out = "\"";
  for (char c : t) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

inline void write_bracketed(const ParseNode& n, std::string& out) {
  out += "(" + n.category + " head=" + n.head().id +
         " score=" + text::format_double(n.score);
  if (n.is_leaf()) {
    out += " " + quote_token(n.token);
  } else {
    out += " ";
    write_bracketed(*n.left, out);
    if (n.right) {
      out += " ";
      write_bracketed(*n.right, out);
    }
  }
  out += ")";
}

}  // namespace detail

/// `(CAT head=<synset> score=<float> child child)`; leaves hold the quoted
/// token in place of children.
inline std::string to_bracketed(const ParseNode& n) {
  std::string out;
  detail::write_bracketed(n, out);
  return out;
}

/// Tree as read back from text, before it is checked against a grammar.
struct RawTree {
  std::string category;
  std::string head;
  std::optional<double> score;
  std::optional<std::string> token;  // leaves
  std::vector<RawTree> children;

  friend bool operator==(const RawTree&, const RawTree&) = default;
};

namespace detail {

class BracketReader {
 public:
  explicit BracketReader(std::string_view s) : s_(s) {}

  RawTree read() {
    RawTree t = node();
    skip();
    if (i_ != s_.size()) fail("trailing text");
    return t;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw Error("bracketed tree, offset " + std::to_string(i_) + ": " + what);
  }
  void skip() {
    while (i_ < s_.size() && text::is_space(s_[i_])) ++i_;
  }
  std::string atom() {
    std::size_t j = i_;
    while (j < s_.size() && !text::is_space(s_[j]) && s_[j] != '(' &&
           s_[j] != ')')
      ++j;
    if (j == i_) fail("expected a symbol");
    std::string a(s_.substr(i_, j - i_));
    i_ = j;
    return a;
  }
  std::string quoted() {
    ++i_;
    std::string out;
    while (i_ < s_.size() && s_[i_] != '"') {
      if (s_[i_] == '\\' && i_ + 1 < s_.size()) ++i_;
      out += s_[i_++];
    }
    if (i_ >= s_.size()) fail("unterminated token");
    ++i_;
    return out;
  }
  RawTree node() {
    skip();
    if (i_ >= s_.size() || s_[i_] != '(') fail("expected '('");
    ++i_;
    skip();
    RawTree t;
    t.category = atom();
    for (;;) {
      skip();
      if (i_ >= s_.size()) fail("unterminated node");
      char c = s_[i_];
      if (c == ')') {
        ++i_;
        break;
      }
      if (c == '(') {
        t.children.push_back(node());
      } else if (c == '"') {
        if (t.token) fail("leaf has two tokens");
        t.token = quoted();
      } else {
        std::string a = atom();
        auto eq = a.find('=');
        if (eq != std::string::npos) {
          std::string key = a.substr(0, eq), val = a.substr(eq + 1);
          if (key == "head") {
            t.head = val;
          } else if (key == "score") {
            double v = 0;
            if (!text::parse_double(val, v)) fail("bad score '" + val + "'");
            t.score = v;
          } else {
            fail("unknown attribute '" + key + "'");
          }
        } else {
          if (t.token) fail("leaf has two tokens");
          t.token = a;
        }
      }
    }
    if (t.token && !t.children.empty()) fail("node has both token and children");
    if (!t.token && t.children.empty()) fail("node has no children");
    return t;
  }

  std::string_view s_;
  std::size_t i_ = 0;
};

}  // namespace detail

inline RawTree parse_bracketed(std::string_view s) {
  return detail::BracketReader(s).read();
}

inline RawTree to_raw(const ParseNode& n) {
  RawTree t;
  t.category = n.category;
  t.head = n.head().id;
  t.score = n.score;
  if (n.is_leaf()) {
    t.token = n.token;
  } else {
    t.children.push_back(to_raw(*n.left));
    if (n.right) t.children.push_back(to_raw(*n.right));
  }
  return t;
}

// Wire form -----------------------------------------------------------------

inline nlohmann::json to_json(const ParseNode& n) {
  nlohmann::json j;
  j["category"] = n.category;
  j["span"] = {n.begin, n.end};
  j["head"] = n.head().id;
  j["score"] = n.score;
  if (n.is_leaf()) {
    j["token"] = n.token;
    j["pos"] = std::string(pos_name(n.sense->pos));
    j["form"] = std::string(form_name(n.sense->form));
    if (!n.sense->value.empty()) j["value"] = n.sense->value;
  } else {
    j["rule"] = n.rule;
    nlohmann::json kids = nlohmann::json::array();
    kids.push_back(to_json(*n.left));
    if (n.right) kids.push_back(to_json(*n.right));
    j["children"] = kids;
  }
  return j;
}

inline RawTree raw_from_json(const nlohmann::json& j) {
  RawTree t;
  try {
    t.category = j.at("category").get<std::string>();
    t.head = j.at("head").get<std::string>();
    if (j.contains("score")) t.score = j.at("score").get<double>();
    if (j.contains("token")) {
      t.token = j.at("token").get<std::string>();
    } else {
      for (auto& c : j.at("children")) t.children.push_back(raw_from_json(c));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("tree json: ") + e.what());
  }
  if (!t.token && (t.children.empty() || t.children.size() > 2))
    throw Error("tree json: node needs one or two children");
  return t;
}

}  // namespace captionir

#endif  // CAPTIONIR_TREE_HPP_

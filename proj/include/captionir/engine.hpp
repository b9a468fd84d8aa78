// Configuration, the data directory, and the engine that the CLI and the
// HTTP service share.  Readers work on immutable snapshots; the single
// writer (training, indexing) publishes a new snapshot after each change.

#ifndef CAPTIONIR_ENGINE_HPP_
#define CAPTIONIR_ENGINE_HPP_

#include <sys/file.h>
#include <fcntl.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "captionir/counts.hpp"
#include "captionir/grammar.hpp"
#include "captionir/lexicon.hpp"
#include "captionir/parser.hpp"
#include "captionir/retrieval.hpp"
#include "captionir/semantics.hpp"
#include "captionir/trainer.hpp"

namespace captionir {

namespace fs = std::filesystem;

struct Config {
  fs::path data_dir = "data";
  std::uint64_t threshold = 5;          // θ
  double floor = 0.5;                   // ε
  double alpha = Grammar::kDefaultAlpha;
  double margin = std::log(100.0);      // δ
  std::size_t review_depth = 10;
  std::size_t oracle_cap = 10;
  std::size_t max_alternatives = 5;
  std::size_t max_depth = 0;  // ancestor cap on increments; 0 = none
  std::vector<SynsetId> unknown_roots{SynsetId("equipment-1"),
                                      SynsetId("person-1"),
                                      SynsetId("place-1")};
  std::set<SynsetId> code_categories;

  CountOptions count_options() const { return {threshold, floor, max_depth}; }
  AnalysisOptions analysis_options() const {
    AnalysisOptions a;
    a.unknown_roots = unknown_roots;
    return a;
  }
  InterpretationOptions interpretation_options() const {
    return {max_alternatives, margin, analysis_options()};
  }
  TrainerOptions trainer_options() const {
    return {review_depth, count_options(), analysis_options()};
  }
};

namespace detail {

inline std::vector<SynsetId> synset_list(const std::string& v) {
  std::vector<SynsetId> out;
  for (auto& part : text::split(v, ',')) {
    auto t = text::trim(part);
    if (t.empty()) continue;
    if (!valid_synset_id(t)) throw Error("malformed synset id '" + std::string(t) + "'");
    out.emplace_back(std::string(t));
  }
  return out;
}

}  // namespace detail

/// Applies `key=value` lines on top of `base`.  Relative data paths are
/// taken relative to `dir`.
inline Config parse_config(std::string_view body, Config base = {},
                           const fs::path& dir = {}) {
  Config c = std::move(base);
  for (auto& line : text::content_lines(body)) {
    auto eq = line.content.find('=');
    auto fail = [&](const std::string& what) {
      throw FormatError("config", line.number, what);
    };
    if (eq == std::string::npos) fail("expected key=value");
    std::string key(text::trim(line.content.substr(0, eq)));
    std::string val(text::trim(line.content.substr(eq + 1)));
    auto positive_int = [&](std::size_t& out) {
      if (!text::parse_int(val, out) || out < 1) fail(key + " must be a positive integer");
    };
    auto positive_real = [&](double& out) {
      if (!text::parse_double(val, out) || !(out > 0) || !std::isfinite(out))
        fail(key + " must be a positive number");
    };
    try {
      if (key == "data") {
        fs::path p(val);
        c.data_dir = p.is_relative() && !dir.empty() ? dir / p : p;
      } else if (key == "threshold") {
        if (!text::parse_int(val, c.threshold) || c.threshold < 1)
          fail("threshold must be a positive integer");
      } else if (key == "floor") {
        positive_real(c.floor);
      } else if (key == "alpha") {
        positive_real(c.alpha);
      } else if (key == "margin") {
        positive_real(c.margin);
      } else if (key == "review_depth") {
        positive_int(c.review_depth);
      } else if (key == "oracle_cap") {
        positive_int(c.oracle_cap);
      } else if (key == "max_alternatives") {
        positive_int(c.max_alternatives);
      } else if (key == "max_depth") {
        if (!text::parse_int(val, c.max_depth)) fail("max_depth must be an integer");
      } else if (key == "unknown_roots") {
        c.unknown_roots = detail::synset_list(val);
        if (c.unknown_roots.empty()) fail("unknown_roots needs at least one synset");
      } else if (key == "code_categories") {
        auto l = detail::synset_list(val);
        c.code_categories = {l.begin(), l.end()};
      } else {
        fail("unknown key '" + key + "'");
      }
    } catch (const FormatError&) {
      throw;
    } catch (const Error& e) {
      fail(e.what());
    }
  }
  return c;
}

/// Config from (in increasing precedence) defaults, the data directory's
/// config.txt, an explicit config file, and CAPTION_IR_DATA.
inline Config resolve_config(const std::optional<fs::path>& config_file,
                             const fs::path& default_dir = "data") {
  Config c;
  c.data_dir = default_dir;
  if (const char* env = std::getenv("CAPTION_IR_DATA"); env && *env)
    c.data_dir = env;
  if (fs::exists(c.data_dir / "config.txt"))
    c = parse_config(text::read_file((c.data_dir / "config.txt").string()), c,
                     c.data_dir);
  if (config_file) {
    c = parse_config(text::read_file(config_file->string()), c,
                     config_file->parent_path());
    if (const char* env = std::getenv("CAPTION_IR_DATA"); env && *env)
      c.data_dir = env;
  }
  return c;
}

/// Paths inside a data directory.
struct DataLayout {
  fs::path root;
  fs::path lexicon() const { return root / "lexicon" / "lexicon.txt"; }
  fs::path hierarchy() const { return root / "lexicon" / "hierarchy.txt"; }
  fs::path formats() const { return root / "lexicon" / "formats.txt"; }
  fs::path grammar() const { return root / "grammar.txt"; }
  fs::path counts() const { return root / "counts.txt"; }
  fs::path index() const { return root / "index" / "captions.json"; }
  fs::path journal() const { return root / "journal.txt"; }
  fs::path corpus() const { return root / "corpus.txt"; }
  fs::path lock() const { return root / "session.lock"; }
};

/// Everything a read needs, frozen.
struct Snapshot {
  std::shared_ptr<const Lexicon> lexicon;
  Grammar grammar;
  CountStore store;
  CaptionIndex index;
  CodePolicy policy;
  CountOptions counts;

  ParseContext context() const { return {grammar, *lexicon, store, policy, counts}; }
};

/// Exclusive advisory lock on a file, released on destruction.
class FileLock {
 public:
  explicit FileLock(const fs::path& p) {
    fd_ = ::open(p.c_str(), O_RDWR | O_CREAT, 0644);
    if (fd_ < 0) throw Error("cannot open lock file " + p.string());
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      throw Error("another review session holds " + p.string());
    }
  }
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;
  ~FileLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }

 private:
  int fd_ = -1;
};

struct ParseOutput {
  std::vector<NodePtr> trees;
  std::vector<Interpretation> interpretations;
  std::vector<UnknownWord> unknowns;
};

struct StoreStats {
  std::size_t pairs = 0, unary = 0, rules = 0, captions = 0, unparsed = 0;
  std::uint64_t total = 0;
};

inline StoreStats store_stats(const Snapshot& s) {
  StoreStats st;
  st.pairs = s.store.pairs().size();
  st.unary = s.store.unary().size();
  st.rules = s.store.rule_counts().size();
  st.total = s.store.total();
  st.captions = s.index.size();
  for (auto& [id, r] : s.index.records())
    if (!r.parsed) ++st.unparsed;
  return st;
}

class Engine {
 public:
  explicit Engine(Config cfg) : cfg_(std::move(cfg)), layout_{cfg_.data_dir} {
    auto lex = std::make_shared<Lexicon>(load_lexicon(
        read(layout_.lexicon()), read(layout_.hierarchy()), read(layout_.formats())));
    Snapshot s;
    s.lexicon = lex;
    s.grammar = load_grammar(read(layout_.grammar()));
    s.grammar.set_alpha(cfg_.alpha);
    base_grammar_ = s.grammar;
    if (fs::exists(layout_.counts())) s.store = load_counts(read(layout_.counts()));
    apply_rule_counts(s.grammar, s.store);
    for (auto& c : cfg_.code_categories)
      if (!lex->has_synset(c)) throw Error("config: unknown code category " + c.id);
    for (auto& c : cfg_.unknown_roots)
      if (!lex->has_synset(c)) throw Error("config: unknown category root " + c.id);
    s.policy.categories = cfg_.code_categories;
    s.counts = cfg_.count_options();
    if (fs::exists(layout_.index())) s.index = load_index(*lex, read(layout_.index()));
    current_ = std::make_shared<const Snapshot>(std::move(s));
  }

  const Config& config() const { return cfg_; }
  const DataLayout& layout() const { return layout_; }

  std::shared_ptr<const Snapshot> snapshot() const {
    std::lock_guard<std::mutex> g(snap_mu_);
    return current_;
  }

  ParseOutput parse(std::string_view caption, std::size_t n) const {
    if (n < 1) throw Error("parse: n must be at least 1");
    auto s = snapshot();
    auto ctx = s->context();
    Analysis a = analyze(ctx, caption, cfg_.analysis_options());
    if (a.lattice.empty()) throw Error("parse: empty caption");
    ParseOutput out;
    out.trees = nbest_parse(ctx, a.lattice, n).trees;
    auto opt = cfg_.interpretation_options();
    opt.max_alternatives = std::max(n, opt.max_alternatives);
    out.interpretations = interpretations(ctx, caption, opt);
    out.unknowns = a.unknowns;
    return out;
  }

  std::vector<SearchHit> query(std::string_view q, std::size_t k) const {
    auto s = snapshot();
    return search(s->context(), s->index, q, k, cfg_.interpretation_options());
  }

  /// Indexes every corpus caption not yet indexed; returns the new records.
  std::vector<CaptionRecord> index_corpus(
      const std::vector<std::pair<std::string, std::string>>& corpus) {
    std::lock_guard<std::mutex> w(write_mu_);
    Snapshot next = *snapshot();
    std::vector<CaptionRecord> added;
    for (auto& [id, caption] : corpus) {
      if (next.index.contains(id)) throw Error("duplicate caption id " + id);
      added.push_back(index_caption(next.context(), next.index, id, caption,
                                    cfg_.interpretation_options()));
    }
    fs::create_directories(layout_.index().parent_path());
    text::write_file(layout_.index().string(), save_index(next.index));
    publish(std::move(next));
    return added;
  }

  std::size_t train_gold(const std::vector<GoldTree>& gold) {
    FileLock session(layout_.lock());
    std::lock_guard<std::mutex> w(write_mu_);
    Snapshot next = *snapshot();
    std::size_t n = batch_train(next.grammar, next.store, *next.lexicon,
                                next.policy, gold, cfg_.trainer_options());
    save_counts_file(next.store);
    publish(std::move(next));
    return n;
  }

  std::size_t compact_counts() {
    FileLock session(layout_.lock());
    std::lock_guard<std::mutex> w(write_mu_);
    Snapshot next = *snapshot();
    std::size_t n = compact(next.store, *next.lexicon, next.counts);
    save_counts_file(next.store);
    publish(std::move(next));
    return n;
  }

  /// Review session over data/corpus.txt, resumed from the journal.
  class Session {
   public:
    explicit Session(Engine& e)
        : engine_(e), lock_(e.layout_.lock()), work_(*e.snapshot()) {
      auto corpus = load_corpus(read(e.layout_.corpus()));
      session_ = std::make_unique<ReviewSession>(work_.grammar, *work_.lexicon,
                                                 work_.store, work_.policy,
                                                 std::move(corpus),
                                                 e.cfg_.trainer_options());
      if (fs::exists(e.layout_.journal()))
        session_->restore(load_journal(read(e.layout_.journal())));
      journaled_ = session_->decisions().size();
    }

    std::optional<Proposal> next() { return session_->propose(); }
    const ReviewSession& state() const { return *session_; }
    std::uint64_t version() const { return version_; }

    void accept() {
      std::lock_guard<std::mutex> w(engine_.write_mu_);
      session_->accept();
      engine_.save_counts_file(work_.store);
      journal();
      Snapshot next = *engine_.snapshot();
      next.grammar = work_.grammar;
      next.store = work_.store;
      engine_.publish(std::move(next));
    }
    void reject() {
      session_->reject();
      journal();
    }
    void skip() {
      session_->skip();
      journal();
    }

   private:
    // Appends every decision not yet written, including captions that
    // propose() skipped on its own.
    void journal() {
      ++version_;
      const auto& d = session_->decisions();
      if (d.size() == journaled_) return;
      std::string lines;
      for (std::size_t i = journaled_; i < d.size(); ++i) lines += journal_line(d[i]);
      std::ofstream out(engine_.layout_.journal(), std::ios::app | std::ios::binary);
      out << lines;
      if (!out) throw Error("cannot append to " + engine_.layout_.journal().string());
      journaled_ = d.size();
    }

    Engine& engine_;
    FileLock lock_;
    Snapshot work_;
    std::unique_ptr<ReviewSession> session_;
    std::uint64_t version_ = 1;
    std::size_t journaled_ = 0;
  };

  /// Counts rebuilt from the grammar file and an empty store by replaying a
  /// journal over the corpus.
  std::string replay_journal(const std::vector<Decision>& journal) const {
    Grammar g = base_grammar_;
    CountStore store;
    auto s = snapshot();
    ReviewSession session(g, *s->lexicon, store, s->policy,
                          load_corpus(read(layout_.corpus())),
                          cfg_.trainer_options());
    session.replay(journal);
    return save_counts(store);
  }

 private:
  static std::string read(const fs::path& p) { return text::read_file(p.string()); }

  void save_counts_file(const CountStore& store) const {
    text::write_file(layout_.counts().string(), save_counts(store));
  }
  void publish(Snapshot s) {
    auto p = std::make_shared<const Snapshot>(std::move(s));
    std::lock_guard<std::mutex> g(snap_mu_);
    current_ = std::move(p);
  }

  Config cfg_;
  DataLayout layout_;
  Grammar base_grammar_;
  mutable std::mutex snap_mu_;
  std::mutex write_mu_;
  std::shared_ptr<const Snapshot> current_;
};

}  // namespace captionir

#endif  // CAPTIONIR_ENGINE_HPP_

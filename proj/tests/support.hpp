// Shared helpers: the checked-in fixture data and throwaway data dirs.

#ifndef CAPTIONIR_TESTS_SUPPORT_HPP_
#define CAPTIONIR_TESTS_SUPPORT_HPP_

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <unistd.h>

#include "captionir/captionir.hpp"

namespace testing_support {

namespace fs = std::filesystem;
using namespace captionir;

inline fs::path data_root() { return fs::path(CAPTIONIR_DATA); }

inline std::string data_file(const std::string& rel) {
  return text::read_file((data_root() / rel).string());
}

inline const Lexicon& fixture_lexicon() {
  static const Lexicon lex =
      load_lexicon(data_file("lexicon/lexicon.txt"), data_file("lexicon/hierarchy.txt"),
                   data_file("lexicon/formats.txt"));
  return lex;
}

inline const Grammar& fixture_grammar() {
  static const Grammar g = load_grammar(data_file("grammar.txt"));
  return g;
}

inline std::vector<std::pair<std::string, std::string>> fixture_corpus() {
  return load_corpus(data_file("corpus.txt"));
}

inline std::vector<GoldTree> fixture_gold() { return load_gold(data_file("gold.txt")); }

/// Grammar and store after batch training on the gold file, from empty.
struct Trained {
  Grammar grammar = fixture_grammar();
  CountStore store;
  CodePolicy policy;
  CountOptions counts;

  Trained() { batch_train(grammar, store, fixture_lexicon(), policy, fixture_gold()); }
  ParseContext context() const { return {grammar, fixture_lexicon(), store, policy, counts}; }
};

inline const Trained& trained() {
  static const Trained t;
  return t;
}

/// Untrained grammar and empty store.
struct Untrained {
  Grammar grammar = fixture_grammar();
  CountStore store;
  CodePolicy policy;
  CountOptions counts;
  ParseContext context() const { return {grammar, fixture_lexicon(), store, policy, counts}; }
};

inline Lattice lattice_for(const ParseContext& ctx, std::string_view caption) {
  return analyze(ctx, caption).lattice;
}

/// Copy of the fixture data dir without trained state, removed on scope exit.
class TempData {
 public:
  TempData() {
    static std::atomic<int> seq{0};
    path_ = fs::temp_directory_path() /
            ("captionir-test-" + std::to_string(::getpid()) + "-" + std::to_string(seq++));
    fs::remove_all(path_);
    fs::create_directories(path_ / "lexicon");
    for (auto f : {"lexicon/lexicon.txt", "lexicon/hierarchy.txt", "lexicon/formats.txt",
                   "grammar.txt", "corpus.txt", "gold.txt"})
      fs::copy_file(data_root() / f, path_ / f);
  }
  ~TempData() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempData(const TempData&) = delete;
  TempData& operator=(const TempData&) = delete;

  const fs::path& path() const { return path_; }
  Config config() const {
    Config c;
    c.data_dir = path_;
    return c;
  }

 private:
  fs::path path_;
};

}  // namespace testing_support

#endif  // CAPTIONIR_TESTS_SUPPORT_HPP_

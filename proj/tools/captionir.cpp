// Command-line front end: build, parse, index, query, train, counts, serve.
// Exit status: 0 success, 1 domain error, 2 usage error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "captionir/captionir.hpp"

namespace {

using namespace captionir;

struct UsageError : Error {
  using Error::Error;
};

void print_tree_lines(const std::vector<NodePtr>& trees) {
  std::size_t rank = 1;
  for (auto& t : trees)
    std::cout << rank++ << "\t" << text::format_double(t->score) << "\t"
              << to_bracketed(*t) << "\n";
}

void print_meanings(const std::vector<Interpretation>& list) {
  std::size_t i = 1;
  for (auto& m : list) {
    std::cout << "interpretation " << i++
              << " score=" << text::format_double(m.score) << "\n"
              << to_text(m.meaning);
  }
}

/// Interactive review on stdin: a(ccept), r(eject), s(kip), q(uit).
int interactive(Engine& engine) {
  Engine::Session session(engine);
  std::string line;
  while (auto p = session.next()) {
    std::cout << p->caption_id << " rank " << p->rank << " score "
              << text::format_double(p->score) << "\n"
              << p->text << "\n"
              << to_bracketed(*p->tree) << "\n"
              << to_text(p->meaning) << "[a/r/s/q] " << std::flush;
    if (!std::getline(std::cin, line) || line == "q") break;
    if (line == "a") session.accept();
    else if (line == "r") session.reject();
    else if (line == "s") session.skip();
    else std::cout << "unknown answer '" << line << "'\n";
  }
  const auto& st = session.state();
  std::cout << "reviewed " << st.reviewed() << " first-try " << st.first_try_accepted()
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Caption parsing, indexing and retrieval"};
  app.require_subcommand(1);
  std::optional<std::string> config_file;
  std::string data_dir = "data";
  app.add_option("--config", config_file, "key=value configuration file");
  app.add_option("--data", data_dir, "data directory (CAPTION_IR_DATA overrides)");

  auto* build = app.add_subcommand("build", "load and validate lexicon and grammar");

  std::string parse_text;
  std::size_t parse_n = 1;
  bool want_trees = false, want_meaning = false;
  auto* parse = app.add_subcommand("parse", "parse one caption");
  parse->add_option("text", parse_text, "caption text")->required();
  parse->add_option("--n", parse_n, "number of parses")->check(CLI::PositiveNumber);
  parse->add_flag("--trees", want_trees, "print bracketed trees only");
  parse->add_flag("--meaning", want_meaning, "print meaning lists only");

  std::string corpus_file;
  auto* index = app.add_subcommand("index", "parse and index a corpus file");
  index->add_option("corpus", corpus_file, "<id>\\t<text> records")->required();

  std::string query_text;
  std::size_t query_k = 10;
  auto* query = app.add_subcommand("query", "search the index");
  query->add_option("text", query_text, "query text")->required();
  query->add_option("--k", query_k, "maximum results")->check(CLI::PositiveNumber);

  std::string gold_file, replay_file;
  bool train_interactive = false;
  auto* train = app.add_subcommand("train", "add counts from gold trees or review");
  auto* gold_opt = train->add_option("--gold", gold_file, "gold tree file");
  auto* inter_opt = train->add_flag("--interactive", train_interactive, "review on stdin");
  auto* replay_opt =
      train->add_option("--replay", replay_file, "rebuild counts from a journal");
  gold_opt->excludes(inter_opt)->excludes(replay_opt);
  inter_opt->excludes(replay_opt);

  auto* counts = app.add_subcommand("counts", "count store maintenance");
  counts->require_subcommand(1);
  auto* compact = counts->add_subcommand("compact", "drop reconstructible pairs");
  auto* cstats = counts->add_subcommand("stats", "store sizes");

  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "run the HTTP service");
  serve->add_option("--port", port, "port")->check(CLI::Range(1, 65535));
  serve->add_option("--host", host, "bind address");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (parse->parsed() && text::trim(parse_text).empty())
      throw UsageError("parse: caption text is empty");
    if (query->parsed() && text::trim(query_text).empty())
      throw UsageError("query: query text is empty");
    if (train->parsed() && gold_opt->count() == 0 && !train_interactive &&
        replay_opt->count() == 0)
      throw UsageError("train: give --gold <file>, --interactive or --replay <journal>");

    Config cfg = resolve_config(
        config_file ? std::optional<std::filesystem::path>(*config_file) : std::nullopt,
        data_dir);
    Engine engine(cfg);

    if (build->parsed()) {
      auto s = engine.snapshot();
      std::cout << "synsets " << s->lexicon->synsets().size() << "\n"
                << "surfaces " << s->lexicon->entries().size() << "\n"
                << "ako-edges " << s->lexicon->ako_edge_count() << "\n"
                << "formats " << s->lexicon->formats().size() << "\n"
                << "rules " << s->grammar.rules().size() << "\n";
    } else if (parse->parsed()) {
      auto out = engine.parse(parse_text, parse_n);
      if (!want_meaning) print_tree_lines(out.trees);
      if (!want_trees) print_meanings(out.interpretations);
      if (!want_trees && !want_meaning)
        for (auto& u : out.unknowns)
          std::cout << "unknown " << u.token << " -> "
                    << u.classification.ranking.front().first.id
                    << (u.classification.low_confidence ? " (low confidence)" : "")
                    << "\n";
    } else if (index->parsed()) {
      auto added = engine.index_corpus(load_corpus(text::read_file(corpus_file)));
      std::size_t bad = 0;
      for (auto& r : added) {
        if (r.parsed) continue;
        ++bad;
        std::cout << "unparsed " << r.id << ": " << r.diagnostic << "\n";
      }
      std::cout << "indexed " << added.size() - bad << " unparsed " << bad << "\n";
    } else if (query->parsed()) {
      for (auto& h : engine.query(query_text, query_k))
        std::cout << h.caption_id << "\t" << h.matched << "\t"
                  << text::format_double(h.best_score) << "\n";
    } else if (train->parsed()) {
      if (gold_opt->count()) {
        auto n = engine.train_gold(load_gold(text::read_file(gold_file)));
        std::cout << "applied " << n << " gold trees\n";
      } else if (replay_opt->count()) {
        std::cout << engine.replay_journal(load_journal(text::read_file(replay_file)));
      } else {
        return interactive(engine);
      }
    } else if (compact->parsed()) {
      auto n = engine.compact_counts();
      std::cout << "dropped " << n << " pairs\n";
    } else if (cstats->parsed()) {
      auto st = store_stats(*engine.snapshot());
      std::cout << "total " << st.total << "\n"
                << "unary " << st.unary << "\n"
                << "pairs " << st.pairs << "\n"
                << "rules " << st.rules << "\n"
                << "captions " << st.captions << "\n";
    } else if (serve->parsed()) {
      Service service(engine);
      std::cerr << "listening on " << host << ":" << port << "\n";
      captionir::serve(service, host, port);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

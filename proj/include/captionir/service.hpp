// JSON-over-HTTP adapter over the engine.  Routing lives in handle() so the
// endpoints can be exercised without a socket; serve() binds it to HTTP.

#ifndef CAPTIONIR_SERVICE_HPP_
#define CAPTIONIR_SERVICE_HPP_

#include <memory>
#include <mutex>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "captionir/engine.hpp"

namespace captionir {

inline constexpr int kSchemaVersion = 1;

struct Response {
  int status = 200;
  nlohmann::json body;
};

inline nlohmann::json proposal_json(const Proposal& p, std::uint64_t version) {
  return {{"captionId", p.caption_id},
          {"captionText", p.text},
          {"rank", p.rank},
          {"score", p.score},
          {"tree", to_bracketed(*p.tree)},
          {"treeObject", to_json(*p.tree)},
          {"meaning", to_json(p.meaning)},
          {"meaningText", to_text(p.meaning)},
          {"version", version}};
}

class Service {
 public:
  explicit Service(Engine& engine) : engine_(engine) {}

  Response handle(const std::string& method, const std::string& path,
                  const std::string& body) {
    Response r;
    try {
      r = route(method, path, body);
    } catch (const NoParseError& e) {
      r = error(422, e.what());
      nlohmann::json spans = nlohmann::json::array();
      for (auto& [b, e2] : e.spans()) spans.push_back({b, e2});
      r.body["spans"] = spans;
    } catch (const BadRequest& e) {
      r = error(400, e.what());
    } catch (const Conflict& e) {
      r = error(409, e.what());
    } catch (const Error& e) {
      r = error(422, e.what());
    }
    r.body["schema"] = kSchemaVersion;
    return r;
  }

 private:
  struct BadRequest : Error {
    using Error::Error;
  };
  struct Conflict : Error {
    using Error::Error;
  };

  static Response error(int status, const std::string& what) {
    return {status, {{"error", what}}};
  }

  static nlohmann::json parse_body(const std::string& body) {
    if (body.empty()) return nlohmann::json::object();
    try {
      auto j = nlohmann::json::parse(body);
      if (!j.is_object()) throw BadRequest("request body must be a JSON object");
      return j;
    } catch (const nlohmann::json::exception& e) {
      throw BadRequest(std::string("malformed JSON: ") + e.what());
    }
  }
  static std::string need_text(const nlohmann::json& j) {
    if (!j.contains("text") || !j["text"].is_string())
      throw BadRequest("field 'text' (string) is required");
    auto t = j["text"].get<std::string>();
    if (text::trim(t).empty()) throw BadRequest("field 'text' is empty");
    return t;
  }
  static std::size_t positive(const nlohmann::json& j, const char* key,
                              std::size_t fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number_integer() || j[key].get<long long>() < 1)
      throw BadRequest(std::string("field '") + key + "' must be a positive integer");
    return j[key].get<std::size_t>();
  }

  Response route(const std::string& method, const std::string& path,
                 const std::string& body) {
    if (method == "POST" && path == "/parse") return parse(parse_body(body));
    if (method == "POST" && path == "/query") return query(parse_body(body));
    if (method == "GET" && path == "/stats") return stats();
    if (method == "GET" && path == "/session/next") return next();
    if (method == "POST" && (path == "/session/accept" || path == "/session/reject" ||
                             path == "/session/skip"))
      return act(path.substr(9), parse_body(body));
    return error(404, "no endpoint " + method + " " + path);
  }

  Response parse(const nlohmann::json& req) {
    auto out = engine_.parse(need_text(req), positive(req, "n", 1));
    nlohmann::json trees = nlohmann::json::array();
    std::size_t rank = 1;
    for (auto& t : out.trees)
      trees.push_back({{"rank", rank++},
                       {"score", t->score},
                       {"tree", to_bracketed(*t)},
                       {"treeObject", to_json(*t)}});
    nlohmann::json meanings = nlohmann::json::array();
    for (auto& i : out.interpretations)
      meanings.push_back({{"score", i.score},
                          {"meaning", to_json(i.meaning)},
                          {"meaningText", to_text(i.meaning)}});
    nlohmann::json unknowns = nlohmann::json::array();
    for (auto& u : out.unknowns) {
      nlohmann::json ranking = nlohmann::json::array();
      for (auto& [syn, score] : u.classification.ranking)
        ranking.push_back({{"category", syn.id}, {"score", score}});
      unknowns.push_back({{"token", u.token},
                          {"index", u.index},
                          {"lowConfidence", u.classification.low_confidence},
                          {"ranking", ranking}});
    }
    return {200, {{"trees", trees}, {"meanings", meanings}, {"unknowns", unknowns}}};
  }

  Response query(const nlohmann::json& req) {
    auto hits = engine_.query(need_text(req), positive(req, "k", 10));
    auto snap = engine_.snapshot();
    nlohmann::json results = nlohmann::json::array();
    for (auto& h : hits) {
      const auto& rec = snap->index.record(h.caption_id);
      nlohmann::json binding = nlohmann::json::object();
      for (auto& [q, c] : h.binding.variables) binding[var_name(q)] = var_name(c);
      results.push_back({{"captionId", h.caption_id},
                         {"text", rec.text},
                         {"bindingCount", h.matched},
                         {"bestScore", h.best_score},
                         {"interpretation", h.binding.interpretation},
                         {"binding", binding},
                         {"meaning", to_json(rec.interpretations[h.binding.interpretation])}});
    }
    return {200, {{"results", results}}};
  }

  Response stats() {
    auto snap = engine_.snapshot();
    auto st = store_stats(*snap);
    nlohmann::json j = {{"store", {{"pairs", st.pairs},
                                   {"unary", st.unary},
                                   {"rules", st.rules},
                                   {"total", st.total}}},
                        {"index", {{"captions", st.captions}, {"unparsed", st.unparsed}}}};
    std::lock_guard<std::mutex> g(session_mu_);
    if (session_) {
      const auto& s = session_->state();
      j["session"] = {{"reviewed", s.reviewed()},
                      {"firstTryAccepted", s.first_try_accepted()},
                      {"firstTryAccuracy", s.first_try_accuracy()},
                      {"cursor", s.cursor()},
                      {"corpusSize", s.corpus().size()},
                      {"decisions", s.decisions().size()}};
    }
    return {200, j};
  }

  Engine::Session& session() {
    if (!session_) session_ = std::make_unique<Engine::Session>(engine_);
    return *session_;
  }

  Response next() {
    std::lock_guard<std::mutex> g(session_mu_);
    auto& s = session();
    auto p = s.next();
    outstanding_ = p.has_value();
    if (!p) return {200, {{"done", true}, {"version", s.version()}}};
    auto j = proposal_json(*p, s.version());
    j["done"] = false;
    return {200, j};
  }

  Response act(const std::string& action, const nlohmann::json& req) {
    std::lock_guard<std::mutex> g(session_mu_);
    auto& s = session();
    if (req.contains("version")) {
      if (!req["version"].is_number_integer())
        throw BadRequest("field 'version' must be an integer");
      if (req["version"].get<std::uint64_t>() != s.version())
        throw Conflict("stale proposal: version " + req["version"].dump() +
                       ", current " + std::to_string(s.version()));
    }
    if (!outstanding_ || !s.next())
      throw Conflict("no active proposal; fetch /session/next first");
    outstanding_ = false;
    if (action == "accept") s.accept();
    else if (action == "reject") s.reject();
    else s.skip();
    const auto& st = s.state();
    return {200, {{"version", s.version()},
                  {"reviewed", st.reviewed()},
                  {"firstTryAccepted", st.first_try_accepted()},
                  {"firstTryAccuracy", st.first_try_accuracy()}}};
  }

  Engine& engine_;
  std::mutex session_mu_;
  std::unique_ptr<Engine::Session> session_;
  bool outstanding_ = false;
};

/// Runs the HTTP server until it is stopped.
inline void serve(Service& service, const std::string& host, int port) {
  httplib::Server server;
  auto bind = [&](const httplib::Request& req, httplib::Response& res) {
    Response r = service.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server.Post(R"(/.*)", bind);
  server.Get(R"(/.*)", bind);
  if (!server.listen(host, port))
    throw Error("cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace captionir

#endif  // CAPTIONIR_SERVICE_HPP_

#pragma once

// HTTP+JSON front end over SessionManager, with a server-sent event stream per
// session. Every failure is answered with {error: {code, message, detail_path}}.

#include "safex/session.hpp"

#include <httplib.h>

#include <atomic>
#include <memory>
#include <string>

namespace safex {

inline int http_status(ErrorCode c) {
  switch (c) {
    case ErrorCode::Referent: return 404;
    case ErrorCode::UnknownTick: return 404;
    case ErrorCode::Conflict: return 409;
    case ErrorCode::EndOfScenario: return 409;
    case ErrorCode::EnvelopeViolation:
    case ErrorCode::Integrity: return 500;
    default: return 400;
  }
}

inline json error_body(std::string_view code, const std::string& message, const std::string& path) {
  return json{{"error", {{"code", std::string(code)}, {"message", message}, {"detail_path", path}}}};
}

inline json explanation_or_command(const AskResult& r) {
  if (const auto* e = std::get_if<Explanation>(&r)) return json{{"explanation", to_json(*e)}};
  const auto& c = std::get<CommandResult>(r);
  return json{{"accepted", c.accepted}, {"record", to_json(c.record)}, {"explanation", to_json(c.explanation)}};
}

inline std::string sse_frame(const StreamEvent& e) {
  return "id: " + std::to_string(e.seq) + "\nevent: " + e.type + "\ndata: " + e.data.dump() + "\n\n";
}

class HttpService {
public:
  HttpService() { routes(); }

  httplib::Server& server() { return server_; }
  SessionManager& sessions() { return sessions_; }

  bool listen(const std::string& host, int port) { return server_.listen(host, port); }
  int bind_any_port(const std::string& host) { return server_.bind_to_any_port(host); }
  bool listen_after_bind() { return server_.listen_after_bind(); }

  void stop() {
    stopping_ = true;
    sessions_.close_all();
    server_.stop();
  }

private:
  static void send(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  template <class F>
  static httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const Error& e) {
        send(res, http_status(e.code()), error_body(to_string(e.code()), e.what(), e.path()));
      } catch (const json::exception& e) {
        send(res, 400, error_body("validation_error", std::string("malformed JSON body: ") + e.what(), ""));
      } catch (const std::exception& e) {
        send(res, 500, error_body("internal_error", e.what(), ""));
      }
    };
  }

  static json body_of(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    json j = json::parse(req.body);
    if (!j.is_object()) throw Error(ErrorCode::Validation, "request body must be a JSON object", "");
    return j;
  }

  static long long query_int(const httplib::Request& req, const char* key, long long fallback) {
    if (!req.has_param(key)) return fallback;
    const std::string v = req.get_param_value(key);
    long long out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
      throw Error(ErrorCode::Validation, "expected an integer", std::string(key));
    return out;
  }

  void routes() {
    server_.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const json b = body_of(req);
      JsonReader r(b, "");
      r.allow_only({"scenario"});
      const std::string id = sessions_.create(r.string("scenario"));
      send(res, 201, json{{"session_id", id}});
    }));

    server_.Post(R"(/sessions/([^/]+)/tick)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto s = sessions_.get(req.matches[1]);
      const json b = body_of(req);
      JsonReader r(b, "");
      r.allow_only({"n"});
      const long long n = r.has("n") ? r.integer("n") : 1;
      if (n < 0) throw Error(ErrorCode::Validation, "n must be >= 0", "n");
      const bool was_finished = s->status() == RunStatus::Finished;
      json records = json::array();
      for (const auto& rec : s->run(n)) records.push_back(to_json(rec));
      send(res, 200,
           json{{"records", records},
                {"status", std::string(to_string(s->status()))},
                {"noop", was_finished || (n > 0 && records.empty())}});
    }));

    server_.Get(R"(/sessions/([^/]+)/state)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      send(res, 200, sessions_.get(req.matches[1])->state_json());
    }));

    server_.Get(R"(/sessions/([^/]+)/trace)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const Trace t = sessions_.get(req.matches[1])->trace();
      const long long from = query_int(req, "from", std::numeric_limits<long long>::min());
      const long long to = query_int(req, "to", std::numeric_limits<long long>::max());
      json out = trace_header(t);
      json records = json::array();
      for (const auto& r : t.records)
        if (r.tick >= from && r.tick <= to) records.push_back(to_json(r));
      out["records"] = records;
      send(res, 200, out);
    }));

    server_.Post(R"(/sessions/([^/]+)/ask)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto s = sessions_.get(req.matches[1]);
      const json b = body_of(req);
      JsonReader r(b, "");
      r.allow_only({"text", "structured"});
      if (r.has("text") == r.has("structured"))
        throw Error(ErrorCode::Validation, "give exactly one of 'text' or 'structured'", "");
      const QueryAST q = r.has("text") ? parse(r.string("text")) : parse_structured(r.field("structured"), "structured");
      send(res, 200, explanation_or_command(s->ask(q)));
    }));

    server_.Post(R"(/sessions/([^/]+)/command)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto s = sessions_.get(req.matches[1]);
      const json b = body_of(req);
      JsonReader r(b, "");
      r.allow_only({"behavior"});
      const std::string name = r.string("behavior");
      const auto behavior = behavior_from_string(name);
      if (!behavior) throw Error(ErrorCode::Validation, "unknown behavior '" + name + "'", "behavior");
      const CommandResult c = s->command(*behavior);
      send(res, 200, explanation_or_command(c));
    }));

    server_.Get(R"(/sessions/([^/]+)/stream)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto s = sessions_.get(req.matches[1]);
      auto next = std::make_shared<std::uint64_t>(
          static_cast<std::uint64_t>(std::max<long long>(0, query_int(req, "from", 0))));
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider(
          "text/event-stream", [this, s, next](std::size_t, httplib::DataSink& sink) {
            if (stopping_ || s->events().closed()) {
              sink.done();
              return true;
            }
            const auto batch = s->events().read_from(*next, std::chrono::milliseconds(200));
            if (batch.empty()) return sink.write(": keepalive\n\n", 13);
            for (const auto& e : batch) {
              const std::string frame = sse_frame(e);
              if (!sink.write(frame.data(), frame.size())) return false;
              *next = e.seq + 1;
            }
            return true;
          });
    }));
  }

  httplib::Server server_;
  SessionManager sessions_;
  std::atomic<bool> stopping_{false};
};

}  // namespace safex

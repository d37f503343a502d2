#include "oddstop/service.hpp"

#include <iostream>

#include <nlohmann/json.hpp>

#include "oddstop/errors.hpp"
#include "oddstop/session_store.hpp"

// After Eigen: <resolv.h> defines a _res macro that collides with Eigen internals.
#include <httplib.h>

namespace oddstop {

using nlohmann::json;

namespace {

constexpr const char* kJson = "application/json";

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

void fail(httplib::Response& res, int status, std::string_view code, std::string_view message,
          std::string_view path = {}) {
  json err = {{"code", code}, {"message", message}};
  if (!path.empty()) err["path"] = path;
  reply(res, status, {{"error", err}});
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  return json::parse(req.body);
}

// Maps the error idiom of the core onto HTTP statuses.
template <typename Handler>
httplib::Server::Handler guarded(const std::string& token, Handler handler) {
  return [token, handler](const httplib::Request& req, httplib::Response& res) {
    if (!token.empty() && req.get_header_value("Authorization") != "Bearer " + token) {
      fail(res, 401, "unauthorized", "missing or wrong bearer token");
      return;
    }
    try {
      handler(req, res);
    } catch (const json::parse_error& e) {
      fail(res, 400, "bad_json", e.what());
    } catch (const ValidationError& e) {
      fail(res, 400, "validation", e.what(), e.path().empty() ? "/" : e.path());
    } catch (const DomainError& e) {
      fail(res, 400, "domain", e.what());
    } catch (const NotFoundError& e) {
      fail(res, 404, "not_found", e.what());
    } catch (const ConflictError& e) {
      fail(res, 409, "conflict", e.what());
    } catch (const std::exception& e) {
      fail(res, 500, "internal", e.what());
    }
  };
}

}  // namespace

void install_routes(httplib::Server& server, SessionStore& store, const ServiceOptions& options) {
  const std::string& token = options.token;
  if (!options.cors_origin.empty()) {
    server.set_default_headers({
        {"Access-Control-Allow-Origin", options.cors_origin},
        {"Access-Control-Allow-Headers", "Authorization, Content-Type, Idempotency-Key"},
        {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
    });
    server.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.status = 204;
    });
  }

  server.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, {{"status", "ok"}});
  });

  server.Post("/v1/sessions", guarded(token, [&store](const auto& req, auto& res) {
                reply(res, 201, store.create(parse_body(req)));
              }));

  server.Get("/v1/sessions", guarded(token, [&store](const auto&, auto& res) {
               reply(res, 200, store.list());
             }));

  server.Get(R"(/v1/sessions/([A-Za-z0-9_-]+))",
             guarded(token, [&store](const auto& req, auto& res) {
               reply(res, 200, store.get(req.matches[1]));
             }));

  server.Post(R"(/v1/sessions/([A-Za-z0-9_-]+)/outcomes)",
              guarded(token, [&store](const auto& req, auto& res) {
                std::optional<std::string> key;
                if (req.has_header("Idempotency-Key")) key = req.get_header_value("Idempotency-Key");
                reply(res, 200, store.record_outcome(req.matches[1], parse_body(req), key));
              }));

  server.Post(R"(/v1/sessions/([A-Za-z0-9_-]+)/consent)",
              guarded(token, [&store](const auto& req, auto& res) {
                reply(res, 200, store.consent(req.matches[1], parse_body(req)));
              }));
}

int run_service(const ServiceOptions& options) {
  SessionStore store(options.data_dir);
  httplib::Server server;
  install_routes(server, store, options);
  std::cerr << "oddstop: serving " << store.size() << " session(s) on " << options.bind << ':'
            << options.port << '\n';
  if (!server.listen(options.bind, options.port)) {
    std::cerr << "oddstop: cannot bind " << options.bind << ':' << options.port << '\n';
    return 1;
  }
  return 0;
}

}  // namespace oddstop

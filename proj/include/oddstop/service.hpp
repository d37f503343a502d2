#pragma once

#include <filesystem>
#include <optional>
#include <string>

namespace httplib {
class Server;
}

namespace oddstop {

class SessionStore;

struct ServiceOptions {
  std::string bind = "127.0.0.1";
  int port = 8080;
  std::optional<std::filesystem::path> data_dir;
  std::string token;        // empty: no bearer token required
  std::string cors_origin;  // empty: no CORS headers
};

/// Registers the /v1 JSON API:
///   GET  /v1/health
///   POST /v1/sessions                     create (body: instance document)
///   GET  /v1/sessions                     list
///   GET  /v1/sessions/{id}                snapshot
///   POST /v1/sessions/{id}/outcomes       record (Idempotency-Key header honoured)
///   POST /v1/sessions/{id}/consent        {"decision": "continue" | "stop"}
/// Only token and cors_origin are read from options.
void install_routes(httplib::Server& server, SessionStore& store,
                    const ServiceOptions& options = {});

/// Blocks serving until the process is stopped. Returns non-zero if binding fails.
int run_service(const ServiceOptions& options);

}  // namespace oddstop

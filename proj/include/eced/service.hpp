#pragma once

// HTTP binding of SessionStore:
//   POST /sessions                  config -> {id}
//   GET  /sessions/{id}/question
//   POST /sessions/{id}/answer      {test_id, outcome}
//   GET  /sessions/{id}/posterior   optional ?top_k=
//   GET  /healthz
// Errors are {error, code} with code validation, conflict or not_found.

#include <string>

#include "eced/session.hpp"

namespace httplib {
class Server;
}

namespace eced {

void register_routes(httplib::Server& server, SessionStore& store);

/// Blocks until the server stops. Returns false if the port cannot be bound.
bool serve(SessionStore& store, const std::string& host, int port);

}  // namespace eced

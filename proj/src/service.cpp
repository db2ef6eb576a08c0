#include "eced/service.hpp"

#include <spdlog/spdlog.h>

#include "httplib.h"

namespace eced {

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message, const std::string& code) {
    send_json(res, status, {{"error", message}, {"code", code}});
}

template <typename Handler>
httplib::Server::Handler guarded(Handler handler) {
    return [handler](const httplib::Request& req, httplib::Response& res) {
        try {
            handler(req, res);
        } catch (const ServiceError& e) {
            send_error(res, http_status(e.code()), e.what(), to_string(e.code()));
        } catch (const nlohmann::json::exception& e) {
            send_error(res, 400, std::string("malformed JSON: ") + e.what(), "validation");
        } catch (const std::exception& e) {
            spdlog::error("{} {}: {}", req.method, req.path, e.what());
            send_error(res, 500, e.what(), "internal");
        }
    };
}

}  // namespace

void register_routes(httplib::Server& server, SessionStore& store) {
    server.Get("/healthz", guarded([&store](const httplib::Request&, httplib::Response& res) {
                   send_json(res, 200, {{"status", "ok"}, {"sessions", store.size()}});
               }));
    server.Post("/sessions", guarded([&store](const httplib::Request& req, httplib::Response& res) {
                    const std::string id = store.create(nlohmann::json::parse(req.body));
                    spdlog::info("session {} created", id);
                    send_json(res, 201, {{"id", id}});
                }));
    server.Get(R"(/sessions/([^/]+)/question)",
               guarded([&store](const httplib::Request& req, httplib::Response& res) {
                   send_json(res, 200, store.question(req.matches[1]));
               }));
    server.Post(R"(/sessions/([^/]+)/answer)",
                guarded([&store](const httplib::Request& req, httplib::Response& res) {
                    send_json(res, 200, store.answer(req.matches[1], nlohmann::json::parse(req.body)));
                }));
    server.Get(R"(/sessions/([^/]+)/posterior)",
               guarded([&store](const httplib::Request& req, httplib::Response& res) {
                   std::size_t top_k = 5;
                   if (req.has_param("top_k")) {
                       try {
                           top_k = std::stoul(req.get_param_value("top_k"));
                       } catch (const std::exception&) {
                           throw ServiceError(ErrorCode::Validation, "top_k must be a nonnegative integer");
                       }
                   }
                   send_json(res, 200, store.posterior(req.matches[1], top_k));
               }));
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (res.body.empty()) {
            send_error(res, res.status, res.status == 404 ? "no such route" : "request failed",
                       res.status == 404 ? "not_found" : "validation");
        }
    });
}

bool serve(SessionStore& store, const std::string& host, int port) {
    httplib::Server server;
    register_routes(server, store);
    spdlog::info("listening on {}:{}", host, port);
    return server.listen(host, port);
}

}  // namespace eced

#include "nudge/http.hpp"

#include <httplib.h>

#include <iostream>

namespace nudge {
namespace {

HttpReply error_reply(int status, const std::string& msg, std::optional<int> retry = std::nullopt) {
  return {status, nlohmann::json{{"error", msg}}.dump(), retry};
}

}  // namespace

HttpReply route(Service& service, const std::string& method, const std::string& path, const std::string& body) {
  if (method == "GET" && path == "/health") return {200, R"({"status":"ok"})", std::nullopt};
  const bool users = path == "/users";
  const bool decision = path == "/decision";
  if (!users && !decision) return error_reply(404, "no such endpoint: " + path);
  if (method != "POST") return error_reply(405, "use POST");

  nlohmann::json req;
  try {
    req = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    return error_reply(400, std::string("malformed JSON: ") + e.what());
  }
  try {
    if (users) return {201, service.register_user(req).dump(), std::nullopt};
    return {200, service.handle_request(req).dump(), std::nullopt};
  } catch (const ServiceError& e) {
    return error_reply(e.status(), e.what(), e.retry_after());
  } catch (const std::exception& e) {
    return error_reply(500, e.what());
  }
}

void serve_http(Service& service, const std::string& host, int port) {
  httplib::Server server;
  auto handler = [&service](const httplib::Request& req, httplib::Response& res) {
    const HttpReply r = route(service, req.method, req.path, req.body);
    res.status = r.status;
    if (r.retry_after) res.set_header("Retry-After", std::to_string(*r.retry_after));
    res.set_content(r.body, "application/json");
  };
  server.Post("/users", handler);
  server.Post("/decision", handler);
  server.Get("/health", handler);
  std::cerr << "listening on " << host << ":" << port << " (store " << service.store().root().string() << ")\n";
  if (!server.listen(host, port)) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
}

}  // namespace nudge

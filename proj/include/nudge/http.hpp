#pragma once

#include <optional>
#include <string>

#include "nudge/service.hpp"

namespace nudge {

struct HttpReply {
  int status = 200;
  std::string body;  // JSON
  std::optional<int> retry_after;
};

// Routes one request without any socket involved; the server below and the
// tests share it.
HttpReply route(Service& service, const std::string& method, const std::string& path, const std::string& body);

// Blocks serving POST /users, POST /decision and GET /health.
void serve_http(Service& service, const std::string& host, int port);

}  // namespace nudge

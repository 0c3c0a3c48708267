#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "nudge/engine.hpp"
#include "nudge/microtask.hpp"
#include "nudge/policies.hpp"
#include "nudge/store.hpp"

namespace nudge {

// Request failure carrying an HTTP-style status code.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(int status, const std::string& message, std::optional<int> retry_after = std::nullopt)
      : std::runtime_error(message), status_(status), retry_after_(retry_after) {}
  int status() const { return status_; }
  std::optional<int> retry_after() const { return retry_after_; }

 private:
  int status_;
  std::optional<int> retry_after_;
};

struct ServiceOptions {
  std::filesystem::path store;
  bool sync = true;  // fsync blobs and logs
};

// Stateless front-end over a FileStore. Every request loads the user's worker
// from the store, applies it and writes it back, so any number of instances
// (or a restarted one) over the same store behave identically.
//
// POST /users     {"user_id", "agent_kind": "rl"|"sl", "config"?}
//   config: {"seed", "engine", "reward", "a2c", "sl"} all optional
// POST /decision  {"user_id", "context", "previous_response"?, "minute"?}
//   previous_response: {"notification_id", "kind", "response_time_minutes"?, "answer_index"?}
class Service {
 public:
  explicit Service(ServiceOptions options);

  nlohmann::json register_user(const nlohmann::json& body);
  nlohmann::json handle_request(const nlohmann::json& body);

  const MicrotaskPool& pool() const { return pool_; }
  FileStore& store() { return store_; }

 private:
  ServiceOptions options_;
  FileStore store_;
  MicrotaskPool pool_;
};

// Smallest minute after `last` (or >= 0 when absent) whose time of day and
// weekday match; day 0 is a Sunday.
std::int64_t derive_minute(std::optional<std::int64_t> last, int time_of_day, int day_of_week);

}  // namespace nudge

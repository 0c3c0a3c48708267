#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nudge/binary_io.hpp"

namespace nudge {

// True for 1-64 characters of [A-Za-z0-9_.-], excluding "." and "..".
bool valid_user_id(std::string_view id);

// Directory-backed store: one directory per user holding the worker blob,
// the append-only event log and a lock file.
//
//   <root>/users/<id>/worker.bin     replaced atomically (temp + rename)
//   <root>/users/<id>/events.jsonl   one JSON object per line
//   <root>/users/<id>/quarantine     present when the blob failed to load
class FileStore {
 public:
  explicit FileStore(std::filesystem::path root, bool sync = true);

  // Exclusive, non-blocking per-user lock (flock). Conflicts across
  // processes and across FileStore instances in one process.
  class Lock {
   public:
    Lock() = default;
    explicit Lock(int fd) : fd_(fd) {}
    Lock(Lock&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
    Lock& operator=(Lock&& o) noexcept;
    Lock(const Lock&) = delete;
    Lock& operator=(const Lock&) = delete;
    ~Lock();

   private:
    int fd_ = -1;
  };

  std::optional<Lock> try_lock(std::string_view user);

  bool has_user(std::string_view user) const;
  // Fails when the user directory already exists.
  bool create_user(std::string_view user);

  Bytes read_blob(std::string_view user) const;
  void write_blob(std::string_view user, std::span<const std::uint8_t> bytes);

  void append_events(std::string_view user, const std::vector<std::string>& lines);
  std::vector<std::string> read_events(std::string_view user) const;

  void quarantine(std::string_view user, std::string_view reason);
  std::optional<std::string> quarantined(std::string_view user) const;

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path user_dir(std::string_view user) const;

 private:
  std::filesystem::path root_;
  bool sync_;
};

}  // namespace nudge

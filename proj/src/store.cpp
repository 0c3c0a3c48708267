#include "nudge/store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <system_error>

namespace nudge {
namespace {

[[noreturn]] void throw_errno(const std::string& what) {
  throw std::system_error(errno, std::generic_category(), what);
}

void write_all(int fd, const void* data, std::size_t n, const std::string& what) {
  const auto* p = static_cast<const char*>(data);
  while (n > 0) {
    const ssize_t w = ::write(fd, p, n);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw_errno(what);
    }
    p += w;
    n -= static_cast<std::size_t>(w);
  }
}

void fsync_dir(const std::filesystem::path& dir) {
  const int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
  if (fd < 0) throw_errno("open " + dir.string());
  ::fsync(fd);
  ::close(fd);
}

}  // namespace

bool valid_user_id(std::string_view id) {
  if (id.empty() || id.size() > 64 || id == "." || id == "..") return false;
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
                    c == '-' || c == '.';
    if (!ok) return false;
  }
  return true;
}

FileStore::Lock& FileStore::Lock::operator=(Lock&& o) noexcept {
  if (this != &o) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = o.fd_;
    o.fd_ = -1;
  }
  return *this;
}

FileStore::Lock::~Lock() {
  if (fd_ >= 0) ::close(fd_);  // releases the flock
}

FileStore::FileStore(std::filesystem::path root, bool sync) : root_(std::move(root)), sync_(sync) {
  std::filesystem::create_directories(root_ / "users");
}

std::filesystem::path FileStore::user_dir(std::string_view user) const {
  if (!valid_user_id(user)) throw std::invalid_argument("invalid user id");
  return root_ / "users" / std::string(user);
}

std::optional<FileStore::Lock> FileStore::try_lock(std::string_view user) {
  const auto path = user_dir(user) / "lock";
  const int fd = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) throw_errno("open " + path.string());
  if (::flock(fd, LOCK_EX | LOCK_NB) != 0) {
    const int err = errno;
    ::close(fd);
    if (err == EWOULDBLOCK) return std::nullopt;
    errno = err;
    throw_errno("flock " + path.string());
  }
  return Lock(fd);
}

bool FileStore::has_user(std::string_view user) const {
  return std::filesystem::exists(user_dir(user) / "worker.bin");
}

bool FileStore::create_user(std::string_view user) {
  std::error_code ec;
  return std::filesystem::create_directory(user_dir(user), ec) && !ec;
}

Bytes FileStore::read_blob(std::string_view user) const {
  const auto path = user_dir(user) / "worker.bin";
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), {});
}

void FileStore::write_blob(std::string_view user, std::span<const std::uint8_t> bytes) {
  const auto dir = user_dir(user);
  const auto tmp = dir / "worker.bin.tmp";
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw_errno("open " + tmp.string());
  try {
    write_all(fd, bytes.data(), bytes.size(), "write " + tmp.string());
    if (sync_ && ::fsync(fd) != 0) throw_errno("fsync " + tmp.string());
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
  std::filesystem::rename(tmp, dir / "worker.bin");
  if (sync_) fsync_dir(dir);
}

void FileStore::append_events(std::string_view user, const std::vector<std::string>& lines) {
  if (lines.empty()) return;
  std::string buf;
  for (const auto& l : lines) {
    buf += l;
    buf += '\n';
  }
  const auto path = user_dir(user) / "events.jsonl";
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) throw_errno("open " + path.string());
  try {
    write_all(fd, buf.data(), buf.size(), "append " + path.string());
    if (sync_ && ::fsync(fd) != 0) throw_errno("fsync " + path.string());
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
}

std::vector<std::string> FileStore::read_events(std::string_view user) const {
  std::vector<std::string> out;
  std::ifstream in(user_dir(user) / "events.jsonl");
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(line);
  return out;
}

void FileStore::quarantine(std::string_view user, std::string_view reason) {
  std::ofstream out(user_dir(user) / "quarantine", std::ios::trunc);
  out << reason << '\n';
}

std::optional<std::string> FileStore::quarantined(std::string_view user) const {
  std::ifstream in(user_dir(user) / "quarantine");
  if (!in) return std::nullopt;
  std::string reason;
  std::getline(in, reason);
  return reason;
}

}  // namespace nudge

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>

#include "nudge/http.hpp"
#include "nudge/service.hpp"
#include "service_client.hpp"

using namespace nudge;
using nlohmann::json;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() / ("nudge_svc_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

Service make(const TempDir& d) { return Service({d.path, false}); }

json ctx(int tod, int dow = 1, const char* screen = "On") {
  return {{"time_of_day", tod},       {"day_of_week", dow}, {"location", "Home"},
          {"motion", "Stationary"},   {"ringer", "Normal"}, {"screen", screen},
          {"elapsed_since_last_notification", 120}};
}

int status_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ServiceError& e) {
    return e.status();
  }
  return 200;
}

std::vector<json> events(Service& s, const std::string& user) {
  std::vector<json> out;
  for (const auto& line : s.store().read_events(user)) out.push_back(json::parse(line));
  return out;
}

// First minute from `from` at which the policy sends.
json first_send(Service& s, const std::string& user, std::int64_t& minute) {
  for (;; ++minute) {
    auto r = s.handle_request({{"user_id", user}, {"context", ctx(minute % 1440, (minute / 1440) % 7)}, {"minute", minute}});
    if (r["action"] == "send") return r;
    REQUIRE(minute < 1440 + 22 * 60);
  }
}

}  // namespace

TEST_CASE("register then decide") {
  TempDir d;
  auto s = make(d);
  auto reg = s.register_user({{"user_id", "alice"}, {"agent_kind", "rl"}});
  CHECK(reg["user_id"] == "alice");
  CHECK(reg["agent_kind"] == "rl");
  CHECK(reg["config"].contains("a2c"));

  auto r = s.handle_request({{"user_id", "alice"}, {"context", ctx(12 * 60)}});
  CHECK(r["minute"] == 1440 + 12 * 60);  // first Monday noon
  CHECK(r["seq"] == 1);
  CHECK((r["action"] == "send" || r["action"] == "silent"));
  CHECK(r["confidence"].get<double>() >= 0.0);
  CHECK(r["confidence"].get<double>() <= 1.0);
  if (r["action"] == "send") {
    CHECK(r.contains("notification_id"));
    CHECK(r["microtask"].contains("statement"));
    CHECK_FALSE(r["microtask"].contains("gold_index"));
  }
}

TEST_CASE("registration errors") {
  TempDir d;
  auto s = make(d);
  s.register_user({{"user_id", "bob"}, {"agent_kind", "sl"}});
  CHECK(status_of([&] { s.register_user({{"user_id", "bob"}, {"agent_kind", "sl"}}); }) == 409);
  CHECK(status_of([&] { s.register_user({{"user_id", "carol"}, {"agent_kind", "bandit"}}); }) == 400);
  CHECK(status_of([&] { s.register_user({{"user_id", "../x"}, {"agent_kind", "rl"}}); }) == 400);
  CHECK(status_of([&] { s.register_user({{"agent_kind", "rl"}}); }) == 400);
  CHECK(status_of([&] { s.register_user({{"user_id", "dan"}, {"agent_kind", "rl"}, {"config", {{"gamma", 1}}}}); }) ==
        400);
  CHECK(status_of([&] { s.handle_request({{"user_id", "nobody"}, {"context", ctx(600)}}); }) == 404);
}

TEST_CASE("malformed requests are rejected without touching state") {
  TempDir d;
  auto s = make(d);
  s.register_user({{"user_id", "u"}, {"agent_kind", "rl"}});
  auto bad = ctx(600);
  bad.erase("screen");
  CHECK(status_of([&] { s.handle_request({{"user_id", "u"}, {"context", bad}}); }) == 400);
  bad = ctx(600);
  bad["location"] = "Moon";
  CHECK(status_of([&] { s.handle_request({{"user_id", "u"}, {"context", bad}}); }) == 400);
  CHECK(status_of([&] { s.handle_request({{"user_id", "u"}, {"context", ctx(1440)}}); }) == 400);
  CHECK(status_of([&] { s.handle_request({{"user_id", "u"}}); }) == 400);
  // minute must agree with the context's clock
  CHECK(status_of([&] { s.handle_request({{"user_id", "u"}, {"context", ctx(600)}, {"minute", 601}}); }) == 400);
  CHECK(status_of([&] {
          s.handle_request({{"user_id", "u"},
                            {"context", ctx(600)},
                            {"previous_response", {{"notification_id", 1}, {"kind", "answered"}}}});
        }) == 400);
  CHECK(events(s, "u").size() == 1);  // registration only
}

TEST_CASE("late evening is forced silent") {
  TempDir d;
  auto s = make(d);
  s.register_user({{"user_id", "u"}, {"agent_kind", "rl"}});
  auto r = s.handle_request({{"user_id", "u"}, {"context", ctx(23 * 60)}});
  CHECK(r["action"] == "silent");
  CHECK(r["forced"] == "window");
  CHECK(r["confidence"] == 0.0);
  CHECK(events(s, "u").back()["event"] == "decision");
}

TEST_CASE("clock and protocol conflicts") {
  TempDir d;
  auto s = make(d);
  s.register_user({{"user_id", "u"}, {"agent_kind", "rl"}});
  std::int64_t minute = 1440 + 600;
  auto sent = first_send(s, "u", minute);
  CHECK(status_of([&] { s.handle_request({{"user_id", "u"}, {"context", ctx(minute % 1440)}, {"minute", minute}}); }) ==
        409);
  const auto wrong = sent["notification_id"].get<std::uint64_t>() + 7;
  CHECK(status_of([&] {
          s.handle_request({{"user_id", "u"},
                            {"context", ctx((minute + 1) % 1440)},
                            {"minute", minute + 1},
                            {"previous_response", {{"notification_id", wrong}, {"kind", "dismissed"}}}});
        }) == 409);
}

TEST_CASE("a dismissal is logged with reward -5") {
  TempDir d;
  auto s = make(d);
  s.register_user({{"user_id", "u"}, {"agent_kind", "rl"}});
  std::int64_t minute = 1440 + 600;
  auto sent = first_send(s, "u", minute);
  const auto id = sent["notification_id"].get<std::uint64_t>();
  auto r = s.handle_request({{"user_id", "u"},
                             {"context", ctx((minute + 2) % 1440)},
                             {"minute", minute + 2},
                             {"previous_response", {{"notification_id", id}, {"kind", "dismissed"}}}});
  bool found = false;
  for (const auto& e : events(s, "u")) {
    if (e["event"] != "resolution" || e["notification_id"] != id) continue;
    found = true;
    CHECK(e["outcome"] == "dismissed");
    CHECK(e["reward"] == -5.0);
    CHECK(e["seq"] == r["seq"]);
    CHECK(e["minute"].get<std::int64_t>() <= minute + 2);
  }
  CHECK(found);
}

TEST_CASE("an answer arriving late is stamped at its response time") {
  TempDir d;
  auto s = make(d);
  s.register_user({{"user_id", "u"}, {"agent_kind", "rl"}});
  std::int64_t minute = 1440 + 600;
  auto sent = first_send(s, "u", minute);
  const auto id = sent["notification_id"].get<std::uint64_t>();
  s.handle_request({{"user_id", "u"},
                    {"context", ctx((minute + 10) % 1440)},
                    {"minute", minute + 10},
                    {"previous_response", {{"notification_id", id}, {"kind", "answered"}, {"response_time_minutes", 2.5}}}});
  int found = 0;
  for (const auto& e : events(s, "u"))
    if (e["event"] == "resolution" && e["notification_id"] == id) {
      ++found;
      CHECK(e["minute"] == minute + 3);
      CHECK(e["reward"].get<double>() == doctest::Approx(std::pow(0.9, 2.5)));
    }
  CHECK(found == 1);
}

TEST_CASE("corrupt or truncated state quarantines the user") {
  for (int mode = 0; mode < 2; ++mode) {
    CAPTURE(mode);
    TempDir d;
    auto s = make(d);
    s.register_user({{"user_id", "u"}, {"agent_kind", "rl"}});
    s.handle_request({{"user_id", "u"}, {"context", ctx(600)}});
    const auto blob = s.store().user_dir("u") / "worker.bin";
    auto bytes = s.store().read_blob("u");
    if (mode == 0)
      bytes[bytes.size() / 2] ^= 0x5a;
    else
      bytes.resize(bytes.size() / 3);
    {
      std::ofstream f(blob, std::ios::binary | std::ios::trunc);
      f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }
    CHECK(status_of([&] { s.handle_request({{"user_id", "u"}, {"context", ctx(601)}}); }) == 503);
    CHECK(s.store().quarantined("u").has_value());
    // stays quarantined; the blob is left for inspection
    CHECK(status_of([&] { s.handle_request({{"user_id", "u"}, {"context", ctx(602)}}); }) == 503);
    CHECK(std::filesystem::file_size(blob) == bytes.size());
  }
}

TEST_CASE("a request in flight makes a second one wait") {
  TempDir d;
  auto s = make(d);
  s.register_user({{"user_id", "u"}, {"agent_kind", "rl"}});
  FileStore other(d.path, false);
  auto held = other.try_lock("u");
  REQUIRE(held.has_value());
  try {
    s.handle_request({{"user_id", "u"}, {"context", ctx(600)}});
    FAIL("expected 429");
  } catch (const ServiceError& e) {
    CHECK(e.status() == 429);
    CHECK(e.retry_after() == 1);
  }
  held.reset();
  CHECK(status_of([&] { s.handle_request({{"user_id", "u"}, {"context", ctx(600)}}); }) == 200);
}

TEST_CASE("twin instances over one store answer like a single instance") {
  TempDir a, b;
  auto solo = make(a);
  auto left = make(b);
  auto right = make(b);
  for (auto* s : {&solo, &left}) {
    s->register_user({{"user_id", "u"}, {"agent_kind", "rl"}, {"config", {{"seed", 5}, {"a2c", {{"rollout_length", 32}}}}}});
  }
  const auto pool = MicrotaskPool::default_pool();
  client::Phone p1("u", SimProfile::from_archetype(Archetype::HighResponder), 3, pool);
  client::Phone p2("u", SimProfile::from_archetype(Archetype::HighResponder), 3, pool);
  int sends = 0;
  for (std::int64_t m = 600; m < 600 + 1500; ++m) {
    const auto x = p1.step(m, [&](const json& q) { return solo.handle_request(q); });
    const auto y = p2.step(m, [&](const json& q) { return (m % 2 ? left : right).handle_request(q); });
    REQUIRE(x == y);
    sends += x["action"] == "send";
  }
  CHECK(sends > 10);
  CHECK(solo.store().read_blob("u") == left.store().read_blob("u"));
}

TEST_CASE("a crash between log and commit replays the same decision") {
  TempDir d;
  auto s = make(d);
  s.register_user({{"user_id", "u"}, {"agent_kind", "sl"}, {"config", {{"seed", 9}}}});
  const auto pool = MicrotaskPool::default_pool();
  client::Phone phone("u", SimProfile::from_archetype(Archetype::MultiFactor), 4, pool);
  for (std::int64_t m = 600; m < 900; ++m) {
    const auto body = phone.request(m);
    const auto before = s.store().read_blob("u");
    const auto first = s.handle_request(body);
    if (m % 7 == 0) {
      s.store().write_blob("u", before);  // the commit never happened
      Service restarted({d.path, false});
      REQUIRE(restarted.handle_request(body) == first);
    }
    phone.observe(body, first);
  }
  // replayed requests left duplicate seq lines; the last one wins
  std::map<std::uint64_t, int> decisions;
  for (const auto& e : events(s, "u"))
    if (e["event"] == "decision") decisions[e["seq"].get<std::uint64_t>()]++;
  CHECK(decisions.size() == 300);
  CHECK(decisions.at(3) == 2);  // minute 602, the first replayed request
}

TEST_CASE("derive_minute picks the next matching slot") {
  CHECK(derive_minute(std::nullopt, 600, 0) == 600);
  CHECK(derive_minute(std::nullopt, 600, 2) == 2 * 1440 + 600);
  CHECK(derive_minute(599, 600, 0) == 600);
  CHECK(derive_minute(600, 600, 0) == 7 * 1440 + 600);
  CHECK(derive_minute(6 * 1440 + 1439, 0, 0) == 7 * 1440);
  // property: result is after `last`, matches the clock, and is the first such minute
  std::mt19937_64 g(3);
  for (int i = 0; i < 2000; ++i) {
    const std::int64_t last = static_cast<std::int64_t>(g() % 100000);
    const int tod = static_cast<int>(g() % 1440), dow = static_cast<int>(g() % 7);
    const auto m = derive_minute(last, tod, dow);
    REQUIRE(m > last);
    REQUIRE(m % 1440 == tod);
    REQUIRE((m / 1440) % 7 == dow);
    REQUIRE(m - last <= 7 * 1440);
  }
}

TEST_CASE("http routing") {
  TempDir d;
  auto s = make(d);
  CHECK(route(s, "GET", "/health", "").status == 200);
  CHECK(route(s, "GET", "/nope", "").status == 404);
  CHECK(route(s, "GET", "/decision", "").status == 405);
  CHECK(route(s, "POST", "/users", "{not json").status == 400);
  CHECK(route(s, "POST", "/users", R"({"user_id":"h","agent_kind":"rl"})").status == 201);
  CHECK(route(s, "POST", "/users", R"({"user_id":"h","agent_kind":"rl"})").status == 409);
  const auto ok = route(s, "POST", "/decision", json{{"user_id", "h"}, {"context", ctx(600)}}.dump());
  CHECK(ok.status == 200);
  CHECK(json::parse(ok.body).contains("action"));
  const auto missing = route(s, "POST", "/decision", json{{"user_id", "zz"}, {"context", ctx(600)}}.dump());
  CHECK(missing.status == 404);
  CHECK(json::parse(missing.body).contains("error"));

  FileStore other(d.path, false);
  auto held = other.try_lock("h");
  const auto busy = route(s, "POST", "/decision", json{{"user_id", "h"}, {"context", ctx(601)}}.dump());
  CHECK(busy.status == 429);
  CHECK(busy.retry_after == 1);
}

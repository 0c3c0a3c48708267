#include "nudge/service.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <variant>

#include "nudge/study.hpp"

namespace nudge {
namespace {

constexpr std::string_view kWorkerMagic = "NDGW";
constexpr std::uint32_t kWorkerVersion = 1;

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a(std::string_view s) {
  return fnv1a(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

// Everything a user's learning worker owns.
struct Worker {
  AgentKind kind = AgentKind::RL;
  nlohmann::json config;
  EngineConfig engine;
  RewardConfig reward;
  EngineState state;
  Rng rng;
  std::variant<A2CPolicy, SupervisedPolicy> policy;
  std::uint64_t seq = 0;  // requests handled

  Policy& agent() {
    return std::visit([](auto& p) -> Policy& { return p; }, policy);
  }
};

// Parses the registration config, filling defaults; returns the normalized
// JSON that is persisted with the worker.
nlohmann::json normalize_config(const std::string& user, AgentKind kind, const nlohmann::json& cfg) {
  if (!cfg.is_object()) throw std::invalid_argument("config must be an object");
  for (const auto& [k, v] : cfg.items()) {
    (void)v;
    if (k != "seed" && k != "engine" && k != "reward" && k != "a2c" && k != "sl")
      throw std::invalid_argument("unknown config field: " + k);
  }
  nlohmann::json out;
  out["seed"] = cfg.value("seed", fnv1a(user));
  out["engine"] = cfg.value("engine", nlohmann::json::object()).get<EngineConfig>();
  out["reward"] = cfg.value("reward", nlohmann::json::object()).get<RewardConfig>();
  if (kind == AgentKind::RL)
    out["a2c"] = cfg.value("a2c", nlohmann::json::object()).get<Hyperparameters>();
  else
    out["sl"] = cfg.value("sl", nlohmann::json::object()).get<SupervisedConfig>();
  validate(out["engine"].get<EngineConfig>());
  validate(out["reward"].get<RewardConfig>());
  return out;
}

Worker fresh_worker(AgentKind kind, const nlohmann::json& config) {
  const auto seed = config.at("seed").get<std::uint64_t>();
  auto make_policy = [&]() -> std::variant<A2CPolicy, SupervisedPolicy> {
    if (kind == AgentKind::RL) return A2CPolicy(config.at("a2c").get<Hyperparameters>(), derive_seed(seed, 2));
    return SupervisedPolicy(config.at("sl").get<SupervisedConfig>(), derive_seed(seed, 2));
  };
  Worker w{kind, config, config.at("engine").get<EngineConfig>(), config.at("reward").get<RewardConfig>(), {},
           Rng(derive_seed(seed, 1)), make_policy(), 0};
  return w;
}

Bytes save_worker(const Worker& w) {
  ByteWriter out;
  out.magic(kWorkerMagic);
  out.u32(kWorkerVersion);
  out.u8(w.kind == AgentKind::RL ? 0 : 1);
  out.str(w.config.dump());
  out.u64(w.seq);
  ByteWriter engine;
  w.state.save(engine);
  out.blob(engine.bytes());
  out.str(w.rng.serialize());
  ByteWriter policy;
  std::visit([&](const auto& p) { p.save(policy); }, w.policy);
  out.blob(policy.bytes());
  Bytes bytes = std::move(out).bytes();
  ByteWriter sum;
  sum.u64(fnv1a(bytes));
  bytes.insert(bytes.end(), sum.bytes().begin(), sum.bytes().end());
  return bytes;
}

Worker load_worker(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) throw FormatError("truncated worker blob");
  const auto body = bytes.first(bytes.size() - 8);
  ByteReader tail(bytes.last(8));
  if (tail.u64() != fnv1a(body)) throw FormatError("worker blob checksum mismatch");
  ByteReader r(body);
  r.expect_magic(kWorkerMagic);
  if (r.u32() != kWorkerVersion) throw FormatError("unsupported worker version");
  const auto kind_tag = r.u8();
  if (kind_tag > 1) throw FormatError("bad agent kind");
  const AgentKind kind = kind_tag == 0 ? AgentKind::RL : AgentKind::SL;
  nlohmann::json config;
  try {
    config = nlohmann::json::parse(r.str());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad worker config: ") + e.what());
  }
  Worker w = fresh_worker(kind, config);
  w.seq = r.u64();
  const Bytes engine = r.blob();
  ByteReader er(engine);
  w.state = EngineState::load(er);
  er.expect_end();
  try {
    w.rng.restore(r.str());
  } catch (const std::exception& e) {
    throw FormatError(std::string("bad rng state: ") + e.what());
  }
  const Bytes policy = r.blob();
  ByteReader pr(policy);
  if (kind == AgentKind::RL)
    w.policy = A2CPolicy::load(pr);
  else
    w.policy = SupervisedPolicy::load(pr);
  pr.expect_end();
  r.expect_end();
  return w;
}

std::string require_user_id(const nlohmann::json& body) {
  if (!body.is_object()) throw ServiceError(400, "request body must be a JSON object");
  if (!body.contains("user_id") || !body.at("user_id").is_string())
    throw ServiceError(400, "user_id (string) is required");
  auto id = body.at("user_id").get<std::string>();
  if (!valid_user_id(id)) throw ServiceError(400, "user_id must be 1-64 characters of [A-Za-z0-9_.-]");
  return id;
}

nlohmann::json public_task(const Microtask& t) {
  nlohmann::json j = t;
  j.erase("gold_index");
  return j;
}

struct PreviousResponse {
  std::uint64_t notification_id;
  Outcome outcome;
};

PreviousResponse parse_previous(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("previous_response must be an object");
  PreviousResponse p;
  p.notification_id = j.at("notification_id").get<std::uint64_t>();
  const auto kind = parse_outcome_kind(j.at("kind").get<std::string>());
  const bool has_time = j.contains("response_time_minutes") && !j.at("response_time_minutes").is_null();
  const bool has_answer = j.contains("answer_index") && !j.at("answer_index").is_null();
  if (kind != OutcomeKind::Answered && (has_time || has_answer))
    throw std::invalid_argument("response_time_minutes and answer_index are only valid for answered");
  if (kind == OutcomeKind::Answered) {
    if (!has_time) throw std::invalid_argument("answered responses need response_time_minutes");
    std::optional<int> answer;
    if (has_answer) answer = j.at("answer_index").get<int>();
    p.outcome = Outcome::answered(j.at("response_time_minutes").get<double>(), answer);
  } else {
    p.outcome = kind == OutcomeKind::Dismissed ? Outcome::dismissed() : Outcome::ignored();
  }
  validate(p.outcome);
  return p;
}

}  // namespace

std::int64_t derive_minute(std::optional<std::int64_t> last, int time_of_day, int day_of_week) {
  constexpr std::int64_t kWeek = 7LL * kMinutesPerDay;
  const std::int64_t offset = static_cast<std::int64_t>(day_of_week) * kMinutesPerDay + time_of_day;
  if (!last) return offset;
  const std::int64_t base = *last + 1;
  std::int64_t m = base - ((base % kWeek) + kWeek) % kWeek + offset;
  if (m < base) m += kWeek;
  return m;
}

Service::Service(ServiceOptions options)
    : options_(std::move(options)), store_(options_.store, options_.sync), pool_(MicrotaskPool::default_pool()) {}

nlohmann::json Service::register_user(const nlohmann::json& body) {
  const auto id = require_user_id(body);
  AgentKind kind;
  nlohmann::json config;
  try {
    kind = parse_agent_kind(body.value("agent_kind", std::string("rl")));
    if (kind == AgentKind::Fixed) throw std::invalid_argument("agent_kind must be rl or sl");
    config = normalize_config(id, kind, body.value("config", nlohmann::json::object()));
  } catch (const std::invalid_argument& e) {
    throw ServiceError(400, e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ServiceError(400, e.what());
  }

  store_.create_user(id);
  auto lock = store_.try_lock(id);
  if (!lock) throw ServiceError(429, "user is busy", 1);
  if (store_.has_user(id)) throw ServiceError(409, "user already registered: " + id);

  Worker w = fresh_worker(kind, config);
  const Bytes blob = save_worker(w);
  store_.append_events(id, {nlohmann::json{{"event", "register"},
                                           {"user", id},
                                           {"seq", 0},
                                           {"agent_kind", to_string(kind)},
                                           {"config", config}}
                                .dump()});
  store_.write_blob(id, blob);
  return {{"user_id", id}, {"agent_kind", to_string(kind)}, {"config", config}};
}

nlohmann::json Service::handle_request(const nlohmann::json& body) {
  const auto id = require_user_id(body);
  UserContext context;
  std::optional<PreviousResponse> previous;
  std::optional<std::int64_t> explicit_minute;
  try {
    if (!body.contains("context")) throw std::invalid_argument("context is required");
    context = body.at("context").get<UserContext>();
    if (body.contains("previous_response") && !body.at("previous_response").is_null())
      previous = parse_previous(body.at("previous_response"));
    if (body.contains("minute") && !body.at("minute").is_null()) {
      explicit_minute = body.at("minute").get<std::int64_t>();
      if (*explicit_minute < 0) throw std::invalid_argument("minute must be nonnegative");
      if (*explicit_minute % kMinutesPerDay != context.time_of_day ||
          (*explicit_minute / kMinutesPerDay) % 7 != context.day_of_week)
        throw std::invalid_argument("minute does not match the context's time_of_day and day_of_week");
    }
  } catch (const std::invalid_argument& e) {
    throw ServiceError(400, e.what());
  } catch (const std::out_of_range& e) {
    throw ServiceError(400, e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ServiceError(400, e.what());
  }

  if (!store_.has_user(id)) throw ServiceError(404, "user not registered: " + id);
  auto lock = store_.try_lock(id);
  if (!lock) throw ServiceError(429, "another request for this user is in flight", 1);
  if (auto reason = store_.quarantined(id)) throw ServiceError(503, "user quarantined: " + *reason);

  Worker w = [&] {
    try {
      return load_worker(store_.read_blob(id));
    } catch (const std::exception& e) {
      store_.quarantine(id, e.what());
      throw ServiceError(503, std::string("worker state is corrupt; user quarantined: ") + e.what());
    }
  }();

  const std::int64_t minute =
      explicit_minute ? *explicit_minute : derive_minute(w.state.last_tick, context.time_of_day, context.day_of_week);
  if (w.state.last_tick && minute <= *w.state.last_tick)
    throw ServiceError(409, "minute " + std::to_string(minute) + " is not after the last decision");

  const std::uint64_t seq = ++w.seq;
  std::vector<std::string> events;
  nlohmann::json request_event{{"event", "request"}, {"user", id}, {"seq", seq}, {"minute", minute},
                               {"context", context}};
  if (previous) request_event["previous_response"] = body.at("previous_response");
  events.push_back(request_event.dump());

  SchedulingEngine engine(w.engine, w.reward, pool_, std::move(w.state));
  Policy& agent = w.agent();
  nlohmann::json response;
  try {
    if (previous) {
      const auto& pending = engine.state().pending;
      if (!pending || pending->id != previous->notification_id)
        throw ServiceError(409, "previous_response does not match the pending notification");
      std::int64_t at = minute;
      if (previous->outcome.kind == OutcomeKind::Answered)
        at = std::min(minute, pending->sent_at + static_cast<std::int64_t>(std::ceil(previous->outcome.response_time_minutes)));
      else
        at = std::min(minute, pending->sent_at + engine.config().timeout_minutes - 1);
      const auto r = engine.resolve(previous->outcome, at, agent, previous->notification_id);
      auto ev = resolution_event(id, r.resolution);
      ev["seq"] = seq;
      events.push_back(ev.dump());
    }
    const TickResult t = engine.tick(context, minute, agent, w.rng);
    for (const auto& r : t.resolutions) {
      auto ev = resolution_event(id, r);
      ev["seq"] = seq;
      events.push_back(ev.dump());
    }
    auto ev = decision_event(id, context, t);
    ev["seq"] = seq;
    events.push_back(ev.dump());

    response = {{"action", to_string(t.action)},
                {"confidence", t.consulted() ? t.confidence : 0.0},
                {"minute", minute},
                {"seq", seq}};
    if (!t.consulted()) response["forced"] = to_string(t.forced);
    if (t.action == Action::Send) {
      response["notification_id"] = *t.notification_id;
      response["microtask"] = public_task(pool_.at(*t.microtask_id));
    }
  } catch (const ServiceError&) {
    throw;
  } catch (const ProtocolError& e) {
    throw ServiceError(409, e.what());
  } catch (const ClockError& e) {
    throw ServiceError(409, e.what());
  } catch (const CorruptStateError& e) {
    store_.quarantine(id, e.what());
    throw ServiceError(503, std::string("policy state is corrupt; user quarantined: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ServiceError(400, e.what());
  }

  w.state = engine.state();
  // Log first, then commit the worker. A crash in between leaves log lines
  // whose seq is re-used by the retried request; readers keep the last one.
  store_.append_events(id, events);
  store_.write_blob(id, save_worker(w));
  return response;
}

}  // namespace nudge

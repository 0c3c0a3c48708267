#include "nudge/engine.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace nudge {
namespace {

void write_observation(ByteWriter& w, const Observation& o) {
  for (double v : o.values) w.f64(v);
}

Observation read_observation(ByteReader& r) {
  Observation o;
  for (double& v : o.values) v = r.f64();
  return o;
}

void write_opt_i64(ByteWriter& w, const std::optional<std::int64_t>& v) {
  w.u8(v.has_value());
  if (v) w.i64(*v);
}

std::optional<std::int64_t> read_opt_i64(ByteReader& r) {
  if (r.u8() == 0) return std::nullopt;
  return r.i64();
}

}  // namespace

void validate(const EngineConfig& cfg) {
  if (cfg.daily_cap <= 0) throw std::invalid_argument("daily_cap must be positive");
  if (cfg.window_start_minute < 0 || cfg.window_end_minute > kMinutesPerDay ||
      cfg.window_start_minute >= cfg.window_end_minute)
    throw std::invalid_argument("active window must lie within one day");
  if (cfg.tick_period_minutes != 1) throw std::invalid_argument("only a 1-minute tick period is supported");
  if (cfg.timeout_minutes <= 0 || cfg.timeout_minutes > static_cast<int>(kMaxResponseMinutes))
    throw std::invalid_argument("timeout_minutes must be in (0, 60]");
}

void to_json(nlohmann::json& j, const EngineConfig& cfg) {
  j = nlohmann::json{{"window_start_minute", cfg.window_start_minute},
                     {"window_end_minute", cfg.window_end_minute},
                     {"daily_cap", cfg.daily_cap},
                     {"tick_period_minutes", cfg.tick_period_minutes},
                     {"timeout_minutes", cfg.timeout_minutes}};
}

void from_json(const nlohmann::json& j, EngineConfig& cfg) {
  EngineConfig out;
  out.window_start_minute = j.value("window_start_minute", out.window_start_minute);
  out.window_end_minute = j.value("window_end_minute", out.window_end_minute);
  out.daily_cap = j.value("daily_cap", out.daily_cap);
  out.tick_period_minutes = j.value("tick_period_minutes", out.tick_period_minutes);
  out.timeout_minutes = j.value("timeout_minutes", out.timeout_minutes);
  validate(out);
  cfg = out;
}

std::string_view to_string(DecisionSource s) {
  switch (s) {
    case DecisionSource::A2C: return "a2c";
    case DecisionSource::Forest: return "forest";
    case DecisionSource::Random: return "random";
    case DecisionSource::Fixed: return "fixed";
    case DecisionSource::Forced: return "forced";
  }
  return "?";
}

std::string_view to_string(ResolutionCause c) {
  switch (c) {
    case ResolutionCause::Response: return "response";
    case ResolutionCause::Timeout: return "timeout";
    case ResolutionCause::Replaced: return "replaced";
    case ResolutionCause::Horizon: return "horizon";
  }
  return "?";
}

std::string_view to_string(ForcedReason r) {
  switch (r) {
    case ForcedReason::None: return "none";
    case ForcedReason::Window: return "window";
    case ForcedReason::Cap: return "cap";
  }
  return "?";
}

// --- RolloutPump -----------------------------------------------------------

std::uint64_t RolloutPump::push(const Observation& obs, Action action, std::optional<double> reward) {
  const auto seq = next_seq_++;
  entries_.push_back({seq, obs, action, reward});
  return seq;
}

void RolloutPump::credit(std::uint64_t seq, double reward) {
  if (entries_.empty() || seq < entries_.front().seq || seq > entries_.back().seq)
    throw std::logic_error("credit for a transition that is not buffered");
  auto& e = entries_[static_cast<std::size_t>(seq - entries_.front().seq)];
  if (e.reward) throw std::logic_error("transition already credited");
  e.reward = reward;
}

std::size_t RolloutPump::complete_steps() const {
  std::size_t n = 0;
  while (n + 1 < entries_.size() && entries_[n].reward) ++n;
  return n;
}

std::optional<Rollout> RolloutPump::take_ready(std::size_t length) {
  if (length == 0 || complete_steps() < length) return std::nullopt;
  Rollout rollout;
  rollout.steps.reserve(length);
  for (std::size_t i = 0; i < length; ++i) {
    const auto& e = entries_[i];
    rollout.steps.push_back({e.observation, e.action, *e.reward, false});
  }
  rollout.bootstrap_observation = entries_[length].observation;
  entries_.erase(entries_.begin(), entries_.begin() + static_cast<std::ptrdiff_t>(length));
  return rollout;
}

void RolloutPump::save(ByteWriter& w) const {
  w.u64(next_seq_);
  w.u64(entries_.size());
  for (const auto& e : entries_) {
    w.u64(e.seq);
    write_observation(w, e.observation);
    w.u8(static_cast<std::uint8_t>(e.action));
    w.u8(e.reward.has_value());
    w.f64(e.reward.value_or(0.0));
  }
}

RolloutPump RolloutPump::load(ByteReader& r) {
  RolloutPump p;
  p.next_seq_ = r.u64();
  const auto n = r.u64();
  if (n > r.remaining()) throw FormatError("truncated payload");
  for (std::uint64_t i = 0; i < n; ++i) {
    Entry e;
    e.seq = r.u64();
    e.observation = read_observation(r);
    const auto a = r.u8();
    if (a > 1) throw FormatError("bad action tag");
    e.action = static_cast<Action>(a);
    const bool has = r.u8() != 0;
    const double v = r.f64();
    if (has) e.reward = v;
    if (!p.entries_.empty() && e.seq != p.entries_.back().seq + 1) throw FormatError("non-contiguous rollout");
    p.entries_.push_back(e);
  }
  return p;
}

// --- EngineState -----------------------------------------------------------

void EngineState::save(ByteWriter& w) const {
  write_opt_i64(w, last_tick);
  w.i64(current_day);
  w.i64(sends_today);
  write_opt_i64(w, last_send);
  w.u8(pending.has_value());
  if (pending) {
    w.u64(pending->id);
    w.u32(pending->microtask_id);
    w.i64(pending->sent_at);
    w.u8(pending->transition_seq.has_value());
    w.u64(pending->transition_seq.value_or(0));
    write_observation(w, pending->observation);
  }
  w.u64(next_notification_id);
  w.u64(total_sends);
  w.u64(total_resolutions);
  pump.save(w);
}

EngineState EngineState::load(ByteReader& r) {
  EngineState s;
  s.last_tick = read_opt_i64(r);
  s.current_day = r.i64();
  s.sends_today = static_cast<int>(r.i64());
  s.last_send = read_opt_i64(r);
  if (r.u8() != 0) {
    PendingNotification p;
    p.id = r.u64();
    p.microtask_id = r.u32();
    p.sent_at = r.i64();
    const bool has_seq = r.u8() != 0;
    const auto seq = r.u64();
    if (has_seq) p.transition_seq = seq;
    p.observation = read_observation(r);
    s.pending = p;
  }
  s.next_notification_id = r.u64();
  s.total_sends = r.u64();
  s.total_resolutions = r.u64();
  s.pump = RolloutPump::load(r);
  return s;
}

// --- SchedulingEngine ------------------------------------------------------

SchedulingEngine::SchedulingEngine(EngineConfig cfg, RewardConfig reward, const MicrotaskPool& pool,
                                   EngineState state)
    : cfg_(cfg), reward_(reward), pool_(&pool), state_(std::move(state)) {
  validate(cfg_);
  validate(reward_);
  if (pool_->empty()) throw std::invalid_argument("engine needs a nonempty microtask pool");
}

double SchedulingEngine::elapsed_since_last_send(std::int64_t minute) const {
  if (!state_.last_send) return kElapsedCapMinutes;
  return std::clamp(static_cast<double>(minute - *state_.last_send), 0.0, kElapsedCapMinutes);
}

Resolution SchedulingEngine::close_pending(const Outcome& outcome, std::int64_t at, ResolutionCause cause,
                                           Policy& policy) {
  const PendingNotification p = *state_.pending;
  state_.pending.reset();
  Resolution res;
  res.notification_id = p.id;
  res.microtask_id = p.microtask_id;
  res.sent_at = p.sent_at;
  res.resolved_at = at;
  res.outcome = outcome;
  res.reward = reward(outcome, reward_);
  res.cause = cause;
  if (p.transition_seq) state_.pump.credit(*p.transition_seq, res.reward);
  ++state_.total_resolutions;
  policy.on_resolved(p.observation, outcome, res.reward, p.sent_at);
  return res;
}

void SchedulingEngine::pump_training(Policy& policy, std::vector<TrainMetrics>& out) {
  if (!policy.learns()) return;
  while (auto rollout = state_.pump.take_ready(policy.rollout_length())) {
    auto metrics = policy.learn(*rollout);
    out.insert(out.end(), metrics.begin(), metrics.end());
  }
}

TickResult SchedulingEngine::tick(const UserContext& context, std::int64_t minute, Policy& policy,
                                  Rng& rng) {
  validate(context);
  if (minute < 0) throw ClockError("negative clock");
  if (state_.last_tick && minute <= *state_.last_tick)
    throw ClockError("clock regression: minute " + std::to_string(minute) + " after " +
                     std::to_string(*state_.last_tick));
  if (context.time_of_day != static_cast<int>(minute % kMinutesPerDay))
    throw std::invalid_argument("context time_of_day does not match the engine clock");
  state_.last_tick = minute;

  TickResult result;
  result.minute = minute;
  if (state_.pending && minute - state_.pending->sent_at >= cfg_.timeout_minutes) {
    result.resolutions.push_back(close_pending(Outcome::ignored(), state_.pending->sent_at + cfg_.timeout_minutes,
                                               ResolutionCause::Timeout, policy));
  }
  const std::int64_t day = minute / kMinutesPerDay;
  if (day != state_.current_day) {
    state_.current_day = day;
    state_.sends_today = 0;
  }

  if (!cfg_.in_window(context.time_of_day)) {
    result.forced = ForcedReason::Window;
  } else if (state_.sends_today >= cfg_.daily_cap) {
    result.forced = ForcedReason::Cap;
  }
  if (!result.consulted()) {
    pump_training(policy, result.training);
    return result;
  }

  const Observation obs = encode(context);
  const PolicyChoice choice = policy.choose(obs, minute, rng);
  result.action = choice.action;
  result.confidence = choice.confidence;
  result.source = choice.source;

  std::optional<std::uint64_t> seq;
  if (policy.learns()) {
    seq = state_.pump.push(obs, choice.action,
                           choice.action == Action::Silent ? std::optional<double>(reward_for_silent(reward_))
                                                           : std::nullopt);
  }
  if (choice.action == Action::Send) {
    if (state_.pending)
      result.resolutions.push_back(close_pending(Outcome::ignored(), minute, ResolutionCause::Replaced, policy));
    const Microtask& task = pool_->sample(rng);
    PendingNotification p;
    p.id = state_.next_notification_id++;
    p.microtask_id = task.id;
    p.sent_at = minute;
    p.transition_seq = seq;
    p.observation = obs;
    state_.pending = p;
    ++state_.sends_today;
    ++state_.total_sends;
    state_.last_send = minute;
    result.notification_id = p.id;
    result.microtask_id = task.id;
  }
  pump_training(policy, result.training);
  return result;
}

ResolveResult SchedulingEngine::resolve(const Outcome& outcome, std::int64_t minute, Policy& policy,
                                        std::optional<std::uint64_t> notification_id) {
  validate(outcome);
  if (!state_.pending) throw ProtocolError("no pending notification to resolve");
  if (notification_id && *notification_id != state_.pending->id)
    throw ProtocolError("outcome refers to notification " + std::to_string(*notification_id) +
                        " but " + std::to_string(state_.pending->id) + " is pending");
  if (minute < state_.pending->sent_at) throw ClockError("outcome precedes its notification");
  if (outcome.kind == OutcomeKind::Answered) {
    if (const Microtask& task = pool_->at(state_.pending->microtask_id);
        outcome.answer && (*outcome.answer < 0 || *outcome.answer >= static_cast<int>(task.options.size())))
      throw std::invalid_argument("answer index out of range for the pending microtask");
  }
  ResolveResult out;
  out.resolution = close_pending(outcome, minute, ResolutionCause::Response, policy);
  pump_training(policy, out.training);
  return out;
}

std::optional<Resolution> SchedulingEngine::finish(std::int64_t minute, Policy& policy) {
  if (!state_.pending) return std::nullopt;
  return close_pending(Outcome::ignored(), minute, ResolutionCause::Horizon, policy);
}

nlohmann::json decision_event(std::string_view user, const UserContext& context, const TickResult& t) {
  nlohmann::json j{{"event", "decision"},
                   {"user", user},
                   {"minute", t.minute},
                   {"context", context},
                   {"action", to_string(t.action)},
                   {"source", to_string(t.source)}};
  if (t.consulted()) {
    j["confidence"] = t.confidence;
  } else {
    j["confidence"] = nullptr;
    j["forced"] = to_string(t.forced);
  }
  if (t.notification_id) {
    j["notification_id"] = *t.notification_id;
    j["microtask_id"] = *t.microtask_id;
  }
  return j;
}

nlohmann::json resolution_event(std::string_view user, const Resolution& r) {
  nlohmann::json j{{"event", "resolution"},
                   {"user", user},
                   {"minute", r.resolved_at},
                   {"notification_id", r.notification_id},
                   {"microtask_id", r.microtask_id},
                   {"sent_at", r.sent_at},
                   {"outcome", to_string(r.outcome.kind)},
                   {"reward", r.reward},
                   {"cause", to_string(r.cause)}};
  if (r.outcome.kind == OutcomeKind::Answered) {
    j["response_time_minutes"] = r.outcome.response_time_minutes;
    if (r.outcome.answer) j["answer_index"] = *r.outcome.answer;
  }
  return j;
}

}  // namespace nudge

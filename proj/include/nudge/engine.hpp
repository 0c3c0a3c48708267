#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "nudge/a2c.hpp"
#include "nudge/binary_io.hpp"
#include "nudge/context.hpp"
#include "nudge/microtask.hpp"
#include "nudge/reward.hpp"
#include "nudge/rng.hpp"

namespace nudge {

// An outcome arrived with no matching pending notification.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ClockError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EngineConfig {
  int window_start_minute = 10 * 60;  // inclusive
  int window_end_minute = 22 * 60;    // exclusive
  int daily_cap = 150;
  int tick_period_minutes = 1;
  int timeout_minutes = 60;

  bool in_window(int time_of_day) const {
    return time_of_day >= window_start_minute && time_of_day < window_end_minute;
  }
  int active_minutes() const { return window_end_minute - window_start_minute; }
};

void validate(const EngineConfig& cfg);
void to_json(nlohmann::json& j, const EngineConfig& cfg);
void from_json(const nlohmann::json& j, EngineConfig& cfg);

enum class DecisionSource { A2C, Forest, Random, Fixed, Forced };
std::string_view to_string(DecisionSource s);

struct PolicyChoice {
  Action action = Action::Silent;
  double confidence = 0.0;  // probability of sending
  DecisionSource source = DecisionSource::Fixed;
};

// Uniform interface over the learned and scripted policies.
class Policy {
 public:
  virtual ~Policy() = default;

  virtual PolicyChoice choose(const Observation& obs, std::int64_t minute, Rng& rng) = 0;

  // Learning policies get every consulted tick as a transition and receive
  // full rollouts once rollout_length() of them carry resolved rewards.
  virtual bool learns() const { return false; }
  virtual std::size_t rollout_length() const { return 0; }
  virtual std::vector<TrainMetrics> learn(const Rollout&) { return {}; }

  // Called once per resolved Send with the observation it was sent on.
  virtual void on_resolved(const Observation& /*sent_on*/, const Outcome& /*outcome*/,
                           double /*reward*/, std::int64_t /*sent_at*/) {}
};

// Buffer of consulted-tick transitions awaiting deferred rewards. A step is
// complete once its reward is resolved and its successor observation exists.
class RolloutPump {
 public:
  struct Entry {
    std::uint64_t seq = 0;
    Observation observation;
    Action action = Action::Silent;
    std::optional<double> reward;
    bool operator==(const Entry&) const = default;
  };

  std::uint64_t push(const Observation& obs, Action action, std::optional<double> reward);
  // Fills the reward of an earlier Send transition.
  void credit(std::uint64_t seq, double reward);
  // Pops the first `length` steps when they are all complete.
  std::optional<Rollout> take_ready(std::size_t length);

  std::size_t size() const { return entries_.size(); }
  std::size_t complete_steps() const;
  const std::deque<Entry>& entries() const { return entries_; }

  void save(ByteWriter& w) const;
  static RolloutPump load(ByteReader& r);
  bool operator==(const RolloutPump&) const = default;

 private:
  std::deque<Entry> entries_;
  std::uint64_t next_seq_ = 0;
};

struct PendingNotification {
  std::uint64_t id = 0;
  std::uint32_t microtask_id = 0;
  std::int64_t sent_at = 0;
  std::optional<std::uint64_t> transition_seq;
  Observation observation;
  bool operator==(const PendingNotification&) const = default;
};

enum class ResolutionCause { Response, Timeout, Replaced, Horizon };
std::string_view to_string(ResolutionCause c);

struct Resolution {
  std::uint64_t notification_id = 0;
  std::uint32_t microtask_id = 0;
  std::int64_t sent_at = 0;
  std::int64_t resolved_at = 0;
  Outcome outcome;
  double reward = 0.0;
  ResolutionCause cause = ResolutionCause::Response;
};

enum class ForcedReason { None, Window, Cap };
std::string_view to_string(ForcedReason r);

struct TickResult {
  std::int64_t minute = 0;
  Action action = Action::Silent;
  ForcedReason forced = ForcedReason::None;
  double confidence = 0.0;
  DecisionSource source = DecisionSource::Forced;
  std::optional<std::uint64_t> notification_id;
  std::optional<std::uint32_t> microtask_id;
  std::vector<Resolution> resolutions;  // timeouts and replacements
  std::vector<TrainMetrics> training;

  bool consulted() const { return forced == ForcedReason::None; }
};

struct ResolveResult {
  Resolution resolution;
  std::vector<TrainMetrics> training;
};

// All mutable per-user engine bookkeeping; serializable for persistence.
struct EngineState {
  std::optional<std::int64_t> last_tick;
  std::int64_t current_day = -1;
  int sends_today = 0;
  std::optional<std::int64_t> last_send;
  std::optional<PendingNotification> pending;
  std::uint64_t next_notification_id = 1;
  std::uint64_t total_sends = 0;
  std::uint64_t total_resolutions = 0;
  RolloutPump pump;

  void save(ByteWriter& w) const;
  static EngineState load(ByteReader& r);
  bool operator==(const EngineState&) const = default;
};

// Per-user agent-environment loop: window and cap guards, the single
// pending-notification slot, deferred reward attribution and the rollout
// pump feeding learning policies.
class SchedulingEngine {
 public:
  SchedulingEngine(EngineConfig cfg, RewardConfig reward, const MicrotaskPool& pool,
                   EngineState state = {});

  // Clock must advance strictly; context.time_of_day must equal minute mod 1440.
  TickResult tick(const UserContext& context, std::int64_t minute, Policy& policy, Rng& rng);

  // Applies a user outcome to the pending notification. Throws ProtocolError
  // when nothing is pending or the id does not match.
  ResolveResult resolve(const Outcome& outcome, std::int64_t minute, Policy& policy,
                        std::optional<std::uint64_t> notification_id = std::nullopt);

  // Closes a study: a still-pending notification is scored Ignored.
  std::optional<Resolution> finish(std::int64_t minute, Policy& policy);

  // Minutes since the last Send (reset at send time), capped at 120.
  double elapsed_since_last_send(std::int64_t minute) const;

  const EngineState& state() const { return state_; }
  const EngineConfig& config() const { return cfg_; }
  const RewardConfig& reward_config() const { return reward_; }

 private:
  Resolution close_pending(const Outcome& outcome, std::int64_t at, ResolutionCause cause,
                           Policy& policy);
  void pump_training(Policy& policy, std::vector<TrainMetrics>& out);

  EngineConfig cfg_;
  RewardConfig reward_;
  const MicrotaskPool* pool_;
  EngineState state_;
};

// JSON-lines event schema shared by the study logs and the service.
nlohmann::json decision_event(std::string_view user, const UserContext& context, const TickResult& tick);
nlohmann::json resolution_event(std::string_view user, const Resolution& resolution);

}  // namespace nudge

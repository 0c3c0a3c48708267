#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "nudge/a2c.hpp"
#include "nudge/engine.hpp"
#include "nudge/microtask.hpp"
#include "nudge/policies.hpp"
#include "nudge/reward.hpp"
#include "nudge/simulator.hpp"

namespace nudge {

enum class AgentKind { RL, SL, Fixed };
std::string_view to_string(AgentKind k);
AgentKind parse_agent_kind(std::string_view s);

struct StudyUser {
  std::string id;
  AgentKind agent = AgentKind::RL;
  SimProfile profile;
  double send_probability = 0.0;  // Fixed agents only
};

struct StudyConfig {
  std::vector<StudyUser> users;
  int weeks = 5;
  std::uint64_t seed = 0;
  int start_day_of_week = 0;  // weekday of day 0; 0 = Sunday
  EngineConfig engine;
  RewardConfig reward;
  Hyperparameters a2c;
  SupervisedConfig sl;
  std::optional<std::string> microtasks;  // pool file; built-in pool otherwise
  std::optional<std::string> output_dir;
  bool write_event_logs = true;
  bool keep_traces = true;
  int threads = 0;  // 0 = hardware concurrency
};

void validate(const StudyConfig& cfg);
void to_json(nlohmann::json& j, const StudyConfig& cfg);
void from_json(const nlohmann::json& j, StudyConfig& cfg);
StudyConfig load_study_config(const std::filesystem::path& path);

enum class Phase { RL, SLTrain, SLTest, Fixed };
std::string_view to_string(Phase p);
Phase parse_phase(std::string_view s);

// Outcomes and rewards are attributed to the week in which the notification
// was sent; decision counts to the week of the tick.
struct WeeklyMetrics {
  int week = 1;  // 1-based
  Phase phase = Phase::RL;
  std::int64_t sent = 0;
  std::int64_t answered = 0;
  std::int64_t dismissed = 0;
  std::int64_t ignored = 0;
  double answer_rate = 0.0;
  double dismiss_rate = 0.0;
  double reward = 0.0;
  std::int64_t factual_answered = 0;
  std::int64_t correct = 0;
  double accuracy = 0.0;
  std::int64_t consulted = 0;
  double mean_confidence = 0.0;
  std::int64_t model_decisions = 0;
  std::int64_t random_decisions = 0;

  bool operator==(const WeeklyMetrics&) const = default;
};

struct DailyMetrics {
  std::int64_t day = 0;
  std::int64_t sent = 0;
  double reward = 0.0;
  std::int64_t consulted = 0;
  double mean_confidence = 0.0;
  bool operator==(const DailyMetrics&) const = default;
};

struct TracePoint {
  std::int64_t minute = 0;
  double confidence = 0.0;
  bool screen_on = false;
  bool operator==(const TracePoint&) const = default;
};

struct UserResult {
  std::string id;
  AgentKind agent = AgentKind::RL;
  std::vector<WeeklyMetrics> weeks;
  std::vector<DailyMetrics> days;
  std::vector<TracePoint> trace;  // consulted ticks only
  std::uint64_t train_steps = 0;
  std::uint64_t training_faults = 0;
  std::optional<std::int64_t> sl_phase_end;
  std::optional<PolicyState> final_policy;  // RL only
};

struct StudyResult {
  std::vector<UserResult> users;  // sorted by id
};

// Simulates one configured user minute by minute. Event lines go to `log`
// when given.
UserResult run_user(const StudyConfig& cfg, std::size_t index, const MicrotaskPool& pool,
                    std::ostream* log = nullptr);

// All users in parallel; event logs land in <output_dir>/logs when both
// output_dir and write_event_logs are set.
StudyResult run_study(const StudyConfig& cfg);

struct ConfidenceTrace {
  std::vector<std::pair<std::int64_t, double>> points;
  std::map<std::int64_t, double> daily_reward;  // keyed by day of the send
};

// Rebuilds the confidence series and daily rewards from an event log.
ConfidenceTrace confidence_trace(std::istream& jsonl);

struct WeeklyRow {
  std::string user;
  AgentKind agent = AgentKind::RL;
  WeeklyMetrics metrics;
};

std::vector<WeeklyRow> weekly_rows(const StudyResult& result);
std::string weekly_csv(const std::vector<WeeklyRow>& rows);
std::vector<WeeklyRow> parse_weekly_csv(std::istream& in);

// Group means per phase ("rl", "sl_train", "sl_test", "fixed").
nlohmann::json summarize(const std::vector<WeeklyRow>& rows);
std::string format_summary(const nlohmann::json& summary);

// Writes weekly.csv, daily.csv, summary.json, config.json and traces/;
// every file goes through a temp file and rename.
void write_report(const StudyResult& result, const StudyConfig& cfg, const std::filesystem::path& out);

// Recomputes summary.json from <dir>/weekly.csv and returns it.
nlohmann::json report_from_dir(const std::filesystem::path& dir);

void write_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace nudge

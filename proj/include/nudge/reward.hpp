#pragma once

#include <optional>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

namespace nudge {

enum class OutcomeKind { Answered, Dismissed, Ignored };

std::string_view to_string(OutcomeKind kind);
OutcomeKind parse_outcome_kind(std::string_view s);

// How a delivered notification ended.
struct Outcome {
  OutcomeKind kind = OutcomeKind::Ignored;
  double response_time_minutes = 0.0;  // Answered only, in [0, 60]
  std::optional<int> answer;           // Answered only

  static Outcome answered(double minutes, std::optional<int> answer = std::nullopt) {
    return {OutcomeKind::Answered, minutes, answer};
  }
  static Outcome dismissed() { return {OutcomeKind::Dismissed, 0.0, std::nullopt}; }
  static Outcome ignored() { return {OutcomeKind::Ignored, 0.0, std::nullopt}; }

  bool operator==(const Outcome&) const = default;
};

inline constexpr double kMaxResponseMinutes = 60.0;

void validate(const Outcome& outcome);

struct RewardConfig {
  double decay_base = 0.9;
  double dismiss_penalty = -5.0;
  double ignore_penalty = -0.1;
  double silent_reward = 0.0;
};

// Requires decay_base in (0, 1] and dismiss_penalty < ignore_penalty <= 0.
void validate(const RewardConfig& cfg);

// Answered -> decay_base^t (t in minutes), Dismissed and Ignored -> penalties.
double reward(const Outcome& outcome, const RewardConfig& cfg = {});

double reward_for_silent(const RewardConfig& cfg = {});

void to_json(nlohmann::json& j, const RewardConfig& cfg);
void from_json(const nlohmann::json& j, RewardConfig& cfg);

}  // namespace nudge

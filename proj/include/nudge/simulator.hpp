#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "nudge/context.hpp"
#include "nudge/microtask.hpp"
#include "nudge/reward.hpp"

namespace nudge {

enum class Archetype { HighResponder, LowResponder, ScreenGated, MultiFactor };

std::string_view to_string(Archetype a);
Archetype parse_archetype(std::string_view s);

// Additive contributions of context indicators to a probability. The sum is
// clamped to [0, 1].
struct AvailabilityTerms {
  double base = 0.0;
  double screen_on = 0.0;
  double ringer_normal = 0.0;
  double moving = 0.0;  // walking, running or biking
  double at_work = 0.0;
  double at_home = 0.0;
  double weekend = 0.0;

  double eval(const UserContext& c) const;
  bool operator==(const AvailabilityTerms&) const = default;
};

struct AvailabilityModel {
  AvailabilityTerms answer;
  AvailabilityTerms dismiss;

  // (p_answer, p_dismiss) with both in [0, 1] and p_answer + p_dismiss <= 1;
  // the remainder is the probability of ignoring.
  std::pair<double, double> probabilities(const UserContext& c) const;
  bool operator==(const AvailabilityModel&) const = default;
};

AvailabilityModel preset_availability(Archetype a);

// Daily routine: nights at home, weekday office hours, commutes and
// stochastic screen sessions.
struct Routine {
  int wake_minute = 7 * 60;
  int sleep_minute = 23 * 60;
  int work_start = 9 * 60;
  int work_end = 17 * 60;
  int commute_minutes = 30;
  double evening_outing_probability = 0.3;
  double weekend_outing_probability = 0.5;
  double screen_on_night = 0.02;
  double screen_on_home = 0.35;
  double screen_on_work = 0.25;
  double screen_on_out = 0.2;
  double walking_probability = 0.1;
};

struct ProfileMutation {
  int day = 0;
  std::optional<Archetype> become;
  std::optional<AvailabilityModel> availability;
  std::optional<double> accuracy;
};

inline double default_response_success() {
  // Geometric law with P(t <= 1 minute) = 1 - (1 - s)^2 = 0.58.
  return 1.0 - std::sqrt(0.42);
}

struct SimProfile {
  Archetype archetype = Archetype::HighResponder;
  AvailabilityModel availability = preset_availability(Archetype::HighResponder);
  double response_time_success = default_response_success();
  double dismiss_time_success = default_response_success();
  double accuracy = 0.92;
  std::vector<ProfileMutation> schedule;  // days strictly increasing
  Routine routine;

  static SimProfile from_archetype(Archetype a);
};

void validate(const SimProfile& p);

// Applies every mutation with day <= the given day to the base profile.
SimProfile apply_schedule(const SimProfile& profile, int day);

// Profile JSON: {"archetype": ..., "answer": {terms}, "dismiss": {terms},
// "response_time_success", "dismiss_time_success", "accuracy",
// "schedule": [{"day", "archetype"?, "answer"?, "dismiss"?, "accuracy"?}],
// "routine": {...}}. Omitted fields take the archetype defaults.
SimProfile profile_from_json(const nlohmann::json& j);
nlohmann::json profile_to_json(const SimProfile& p);

struct UserReaction {
  Outcome outcome;
  std::int64_t delay_minutes = 0;  // when the user acts; unused for Ignored
};

// Minutes until the first success of a geometric law; 0 when success >= 1.
std::int64_t geometric_minutes(double success, double u);

// A simulated participant. Every draw is a hash of (seed, minute, stream) so
// traces are reproducible and can be evaluated in any order.
class SimulatedUser {
 public:
  SimulatedUser(SimProfile profile, std::uint64_t seed, int start_day_of_week = 0);

  UserContext step_context(std::int64_t minute, double elapsed = kElapsedCapMinutes) const;

  // Samples the reaction to a notification sent at `minute`. Answers to
  // factual tasks are correct with the profile's accuracy.
  UserReaction respond(const UserContext& context, std::int64_t minute,
                       const Microtask* task = nullptr) const;

  const SimProfile& profile_on_day(std::int64_t day) const;
  const SimProfile& base_profile() const { return base_; }
  int day_of_week(std::int64_t day) const { return static_cast<int>((start_dow_ + day) % 7); }

 private:
  SimProfile base_;
  std::vector<std::pair<int, SimProfile>> phases_;  // effective profile from a given day
  std::uint64_t seed_;
  int start_dow_;
};

}  // namespace nudge

#include "nudge/context.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace nudge {
namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::array<std::string_view, N>& names,
             const char* what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return static_cast<E>(i);
  }
  throw std::invalid_argument(std::string("unknown ") + what + " value '" + std::string(s) + "'");
}

constexpr std::array<std::string_view, 3> kLocationNames{"Home", "Work", "Others"};
constexpr std::array<std::string_view, 5> kMotionNames{"Stationary", "Walking", "Running",
                                                       "Biking", "Driving"};
constexpr std::array<std::string_view, 3> kRingerNames{"Silent", "Vibration", "Normal"};
constexpr std::array<std::string_view, 2> kScreenNames{"On", "Off"};

}  // namespace

void validate(const UserContext& c) {
  if (c.time_of_day < 0 || c.time_of_day >= kMinutesPerDay)
    throw std::invalid_argument("time_of_day must be in [0, 1439]");
  if (c.day_of_week < 0 || c.day_of_week > 6)
    throw std::invalid_argument("day_of_week must be in [0, 6]");
  if (static_cast<unsigned>(c.location) > 2 || static_cast<unsigned>(c.motion) > 4 ||
      static_cast<unsigned>(c.ringer) > 2 || static_cast<unsigned>(c.screen) > 1)
    throw std::invalid_argument("context enum out of range");
  if (!(c.elapsed_since_last_notification >= 0.0) ||
      std::isinf(c.elapsed_since_last_notification))
    throw std::invalid_argument("elapsed_since_last_notification must be finite and >= 0");
}

Observation encode(const UserContext& c) {
  Observation obs;
  auto& v = obs.values;
  v[feature::kTime] = c.time_of_day / static_cast<double>(kMinutesPerDay);
  v[feature::kDay] = c.day_of_week / 6.0;
  v[feature::kLocation + static_cast<std::size_t>(c.location)] = 1.0;
  v[feature::kMotion + static_cast<std::size_t>(c.motion)] = 1.0;
  v[feature::kRinger + static_cast<std::size_t>(c.ringer)] = 1.0;
  v[feature::kScreen + static_cast<std::size_t>(c.screen)] = 1.0;
  v[feature::kElapsed] =
      std::clamp(c.elapsed_since_last_notification, 0.0, kElapsedCapMinutes) / kElapsedCapMinutes;
  return obs;
}

const std::array<std::string, kObservationDim>& decode_labels() {
  static const std::array<std::string, kObservationDim> labels{
      "time_of_day",       "day_of_week",      "location_home",     "location_work",
      "location_others",   "motion_stationary", "motion_walking",   "motion_running",
      "motion_biking",     "motion_driving",   "ringer_silent",     "ringer_vibration",
      "ringer_normal",     "screen_on",        "screen_off",        "elapsed_since_last_notification"};
  return labels;
}

std::string_view to_string(Location v) { return kLocationNames.at(static_cast<std::size_t>(v)); }
std::string_view to_string(Motion v) { return kMotionNames.at(static_cast<std::size_t>(v)); }
std::string_view to_string(Ringer v) { return kRingerNames.at(static_cast<std::size_t>(v)); }
std::string_view to_string(Screen v) { return kScreenNames.at(static_cast<std::size_t>(v)); }

Location parse_location(std::string_view s) { return parse_enum<Location>(s, kLocationNames, "location"); }
Motion parse_motion(std::string_view s) { return parse_enum<Motion>(s, kMotionNames, "motion"); }
Ringer parse_ringer(std::string_view s) { return parse_enum<Ringer>(s, kRingerNames, "ringer"); }
Screen parse_screen(std::string_view s) { return parse_enum<Screen>(s, kScreenNames, "screen"); }

void to_json(nlohmann::json& j, const UserContext& c) {
  j = nlohmann::json{{"time_of_day", c.time_of_day},
                     {"day_of_week", c.day_of_week},
                     {"location", to_string(c.location)},
                     {"motion", to_string(c.motion)},
                     {"ringer", to_string(c.ringer)},
                     {"screen", to_string(c.screen)},
                     {"elapsed_since_last_notification", c.elapsed_since_last_notification}};
}

void from_json(const nlohmann::json& j, UserContext& c) {
  if (!j.is_object()) throw std::invalid_argument("context must be a JSON object");
  try {
    UserContext out;
    const auto& tod = j.at("time_of_day");
    const auto& dow = j.at("day_of_week");
    if (!tod.is_number_integer() || !dow.is_number_integer())
      throw std::invalid_argument("time_of_day and day_of_week must be integers");
    out.time_of_day = tod.get<int>();
    out.day_of_week = dow.get<int>();
    out.location = parse_location(j.at("location").get<std::string>());
    out.motion = parse_motion(j.at("motion").get<std::string>());
    out.ringer = parse_ringer(j.at("ringer").get<std::string>());
    out.screen = parse_screen(j.at("screen").get<std::string>());
    const auto& elapsed = j.at("elapsed_since_last_notification");
    if (!elapsed.is_number()) throw std::invalid_argument("elapsed_since_last_notification must be a number");
    out.elapsed_since_last_notification = elapsed.get<double>();
    validate(out);
    c = out;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed context: ") + e.what());
  }
}

}  // namespace nudge

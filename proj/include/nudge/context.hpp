#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

namespace nudge {

enum class Location { Home, Work, Others };
enum class Motion { Stationary, Walking, Running, Biking, Driving };
enum class Ringer { Silent, Vibration, Normal };
enum class Screen { On, Off };

inline constexpr int kMinutesPerDay = 1440;
inline constexpr double kElapsedCapMinutes = 120.0;
inline constexpr std::size_t kObservationDim = 16;

// One minute-resolution snapshot of the sensed modalities.
struct UserContext {
  int time_of_day = 0;  // minutes since local midnight
  int day_of_week = 0;  // 0 = Sunday
  Location location = Location::Home;
  Motion motion = Motion::Stationary;
  Ringer ringer = Ringer::Normal;
  Screen screen = Screen::Off;
  double elapsed_since_last_notification = 0.0;  // minutes

  bool operator==(const UserContext&) const = default;
};

// Throws std::invalid_argument when a field is out of range.
void validate(const UserContext& context);

struct Observation {
  std::array<double, kObservationDim> values{};

  double operator[](std::size_t i) const { return values[i]; }
  bool operator==(const Observation&) const = default;
};

// Layout: [time, day, location x3, motion x5, ringer x3, screen x2, elapsed].
Observation encode(const UserContext& context);

const std::array<std::string, kObservationDim>& decode_labels();

// Offsets of each one-hot group inside an Observation.
namespace feature {
inline constexpr std::size_t kTime = 0;
inline constexpr std::size_t kDay = 1;
inline constexpr std::size_t kLocation = 2;
inline constexpr std::size_t kMotion = 5;
inline constexpr std::size_t kRinger = 10;
inline constexpr std::size_t kScreen = 13;
inline constexpr std::size_t kElapsed = 15;
}  // namespace feature

std::string_view to_string(Location v);
std::string_view to_string(Motion v);
std::string_view to_string(Ringer v);
std::string_view to_string(Screen v);

Location parse_location(std::string_view s);
Motion parse_motion(std::string_view s);
Ringer parse_ringer(std::string_view s);
Screen parse_screen(std::string_view s);

// Wire form with the exact field names of UserContext.
void to_json(nlohmann::json& j, const UserContext& c);
void from_json(const nlohmann::json& j, UserContext& c);

}  // namespace nudge

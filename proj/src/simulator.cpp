#include "nudge/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "nudge/rng.hpp"

namespace nudge {
namespace {

// Hash streams; one per independent draw so changing one law never shifts
// another.
enum Stream : std::uint64_t {
  kScreenBlock = 1,
  kMotionBlock,
  kRingerBlock,
  kRingerWork,
  kEveningOuting,
  kWeekendOuting,
  kCommuteMode,
  kReactKind,
  kReactTime,
  kReactCorrect,
  kReactPick,
};

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

bool is_weekend(int dow) { return dow == 0 || dow == 6; }

bool is_moving(Motion m) { return m == Motion::Walking || m == Motion::Running || m == Motion::Biking; }

void check_prob(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(std::string(what) + " must be in [0, 1]");
}

void check_finite(const AvailabilityTerms& t) {
  for (double v : {t.base, t.screen_on, t.ringer_normal, t.moving, t.at_work, t.at_home, t.weekend})
    if (!std::isfinite(v)) throw std::invalid_argument("availability terms must be finite");
}

AvailabilityTerms terms_from_json(const nlohmann::json& j, AvailabilityTerms t) {
  if (!j.is_object()) throw std::invalid_argument("availability terms must be an object");
  for (const auto& [k, v] : j.items()) {
    const double x = v.get<double>();
    if (k == "base") t.base = x;
    else if (k == "screen_on") t.screen_on = x;
    else if (k == "ringer_normal") t.ringer_normal = x;
    else if (k == "moving") t.moving = x;
    else if (k == "at_work") t.at_work = x;
    else if (k == "at_home") t.at_home = x;
    else if (k == "weekend") t.weekend = x;
    else throw std::invalid_argument("unknown availability term: " + k);
  }
  return t;
}

nlohmann::json terms_to_json(const AvailabilityTerms& t) {
  return {{"base", t.base},       {"screen_on", t.screen_on}, {"ringer_normal", t.ringer_normal},
          {"moving", t.moving},   {"at_work", t.at_work},     {"at_home", t.at_home},
          {"weekend", t.weekend}};
}

Routine routine_from_json(const nlohmann::json& j) {
  Routine r;
  r.wake_minute = j.value("wake_minute", r.wake_minute);
  r.sleep_minute = j.value("sleep_minute", r.sleep_minute);
  r.work_start = j.value("work_start", r.work_start);
  r.work_end = j.value("work_end", r.work_end);
  r.commute_minutes = j.value("commute_minutes", r.commute_minutes);
  r.evening_outing_probability = j.value("evening_outing_probability", r.evening_outing_probability);
  r.weekend_outing_probability = j.value("weekend_outing_probability", r.weekend_outing_probability);
  r.screen_on_night = j.value("screen_on_night", r.screen_on_night);
  r.screen_on_home = j.value("screen_on_home", r.screen_on_home);
  r.screen_on_work = j.value("screen_on_work", r.screen_on_work);
  r.screen_on_out = j.value("screen_on_out", r.screen_on_out);
  r.walking_probability = j.value("walking_probability", r.walking_probability);
  return r;
}

nlohmann::json routine_to_json(const Routine& r) {
  return {{"wake_minute", r.wake_minute},
          {"sleep_minute", r.sleep_minute},
          {"work_start", r.work_start},
          {"work_end", r.work_end},
          {"commute_minutes", r.commute_minutes},
          {"evening_outing_probability", r.evening_outing_probability},
          {"weekend_outing_probability", r.weekend_outing_probability},
          {"screen_on_night", r.screen_on_night},
          {"screen_on_home", r.screen_on_home},
          {"screen_on_work", r.screen_on_work},
          {"screen_on_out", r.screen_on_out},
          {"walking_probability", r.walking_probability}};
}

}  // namespace

std::string_view to_string(Archetype a) {
  switch (a) {
    case Archetype::HighResponder: return "HighResponder";
    case Archetype::LowResponder: return "LowResponder";
    case Archetype::ScreenGated: return "ScreenGated";
    case Archetype::MultiFactor: return "MultiFactor";
  }
  return "?";
}

Archetype parse_archetype(std::string_view s) {
  if (s == "HighResponder") return Archetype::HighResponder;
  if (s == "LowResponder") return Archetype::LowResponder;
  if (s == "ScreenGated") return Archetype::ScreenGated;
  if (s == "MultiFactor") return Archetype::MultiFactor;
  throw std::invalid_argument("unknown archetype: " + std::string(s));
}

double AvailabilityTerms::eval(const UserContext& c) const {
  double p = base;
  if (c.screen == Screen::On) p += screen_on;
  if (c.ringer == Ringer::Normal) p += ringer_normal;
  if (is_moving(c.motion)) p += moving;
  if (c.location == Location::Work) p += at_work;
  if (c.location == Location::Home) p += at_home;
  if (is_weekend(c.day_of_week)) p += weekend;
  return clamp01(p);
}

std::pair<double, double> AvailabilityModel::probabilities(const UserContext& c) const {
  double a = answer.eval(c);
  double d = dismiss.eval(c);
  if (a + d > 1.0) {
    const double s = a + d;
    a /= s;
    d /= s;
  }
  return {a, d};
}

AvailabilityModel preset_availability(Archetype a) {
  AvailabilityModel m;
  switch (a) {
    case Archetype::HighResponder:
      m.answer = {.base = 0.55, .screen_on = 0.3};
      m.dismiss = {.base = 0.01, .screen_on = 0.02};
      break;
    case Archetype::LowResponder:
      m.answer = {.base = 0.03, .screen_on = 0.05};
      m.dismiss = {.base = 0.02, .screen_on = 0.2};
      break;
    case Archetype::ScreenGated:
      m.answer = {.base = 0.05, .screen_on = 0.8};
      m.dismiss = {.base = 0.02, .screen_on = 0.08};
      break;
    case Archetype::MultiFactor:
      m.answer = {.base = 0.1, .screen_on = 0.3, .ringer_normal = 0.25, .moving = 0.15};
      m.dismiss = {.base = 0.02, .screen_on = 0.03, .at_work = 0.15};
      break;
  }
  return m;
}

SimProfile SimProfile::from_archetype(Archetype a) {
  SimProfile p;
  p.archetype = a;
  p.availability = preset_availability(a);
  return p;
}

void validate(const SimProfile& p) {
  check_finite(p.availability.answer);
  check_finite(p.availability.dismiss);
  if (!(p.response_time_success > 0.0 && p.response_time_success <= 1.0))
    throw std::invalid_argument("response_time_success must be in (0, 1]");
  if (!(p.dismiss_time_success > 0.0 && p.dismiss_time_success <= 1.0))
    throw std::invalid_argument("dismiss_time_success must be in (0, 1]");
  check_prob(p.accuracy, "accuracy");
  int prev = -1;
  for (const auto& m : p.schedule) {
    if (m.day <= prev) throw std::invalid_argument("schedule days must be nonnegative and strictly increasing");
    prev = m.day;
    if (m.accuracy) check_prob(*m.accuracy, "accuracy");
    if (m.availability) {
      check_finite(m.availability->answer);
      check_finite(m.availability->dismiss);
    }
  }
  const auto& r = p.routine;
  if (!(0 <= r.wake_minute && r.wake_minute < r.sleep_minute && r.sleep_minute <= kMinutesPerDay))
    throw std::invalid_argument("routine needs 0 <= wake_minute < sleep_minute <= 1440");
  if (!(r.work_start < r.work_end) || r.commute_minutes < 0 || r.work_start - r.commute_minutes < 0 ||
      r.work_end + r.commute_minutes > kMinutesPerDay)
    throw std::invalid_argument("routine work hours are inconsistent");
  for (double q : {r.evening_outing_probability, r.weekend_outing_probability, r.screen_on_night,
                   r.screen_on_home, r.screen_on_work, r.screen_on_out, r.walking_probability})
    check_prob(q, "routine probability");
}

SimProfile apply_schedule(const SimProfile& profile, int day) {
  SimProfile out = profile;
  for (const auto& m : profile.schedule) {
    if (m.day > day) break;
    if (m.become) {
      out.archetype = *m.become;
      out.availability = preset_availability(*m.become);
    }
    if (m.availability) out.availability = *m.availability;
    if (m.accuracy) out.accuracy = *m.accuracy;
  }
  return out;
}

SimProfile profile_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object()) throw std::invalid_argument("profile must be an object");
    const auto arch = parse_archetype(j.value("archetype", std::string("HighResponder")));
    SimProfile p = SimProfile::from_archetype(arch);
    if (j.contains("answer")) p.availability.answer = terms_from_json(j.at("answer"), p.availability.answer);
    if (j.contains("dismiss")) p.availability.dismiss = terms_from_json(j.at("dismiss"), p.availability.dismiss);
    p.response_time_success = j.value("response_time_success", p.response_time_success);
    p.dismiss_time_success = j.value("dismiss_time_success", p.dismiss_time_success);
    p.accuracy = j.value("accuracy", p.accuracy);
    if (j.contains("routine")) p.routine = routine_from_json(j.at("routine"));
    if (j.contains("schedule")) {
      for (const auto& e : j.at("schedule")) {
        ProfileMutation m;
        m.day = e.at("day").get<int>();
        AvailabilityModel base = p.availability;
        if (e.contains("archetype")) {
          m.become = parse_archetype(e.at("archetype").get<std::string>());
          base = preset_availability(*m.become);
        }
        if (e.contains("answer") || e.contains("dismiss")) {
          AvailabilityModel am = base;
          if (e.contains("answer")) am.answer = terms_from_json(e.at("answer"), base.answer);
          if (e.contains("dismiss")) am.dismiss = terms_from_json(e.at("dismiss"), base.dismiss);
          m.availability = am;
        }
        if (e.contains("accuracy")) m.accuracy = e.at("accuracy").get<double>();
        p.schedule.push_back(m);
      }
    }
    validate(p);
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("bad profile: ") + e.what());
  }
}

nlohmann::json profile_to_json(const SimProfile& p) {
  nlohmann::json sched = nlohmann::json::array();
  for (const auto& m : p.schedule) {
    nlohmann::json e{{"day", m.day}};
    if (m.become) e["archetype"] = std::string(to_string(*m.become));
    if (m.availability) {
      e["answer"] = terms_to_json(m.availability->answer);
      e["dismiss"] = terms_to_json(m.availability->dismiss);
    }
    if (m.accuracy) e["accuracy"] = *m.accuracy;
    sched.push_back(e);
  }
  return {{"archetype", std::string(to_string(p.archetype))},
          {"answer", terms_to_json(p.availability.answer)},
          {"dismiss", terms_to_json(p.availability.dismiss)},
          {"response_time_success", p.response_time_success},
          {"dismiss_time_success", p.dismiss_time_success},
          {"accuracy", p.accuracy},
          {"schedule", sched},
          {"routine", routine_to_json(p.routine)}};
}

std::int64_t geometric_minutes(double success, double u) {
  if (success >= 1.0) return 0;
  if (success <= 0.0) return std::numeric_limits<std::int64_t>::max();
  const double t = std::floor(std::log1p(-u) / std::log1p(-success));
  if (!(t < 1e12)) return static_cast<std::int64_t>(1e12);
  return static_cast<std::int64_t>(t);
}

SimulatedUser::SimulatedUser(SimProfile profile, std::uint64_t seed, int start_day_of_week)
    : base_(std::move(profile)), seed_(seed), start_dow_(start_day_of_week) {
  validate(base_);
  if (start_dow_ < 0 || start_dow_ > 6) throw std::invalid_argument("start_day_of_week must be in [0, 6]");
  phases_.emplace_back(0, apply_schedule(base_, 0));
  for (const auto& m : base_.schedule)
    if (m.day > 0) phases_.emplace_back(m.day, apply_schedule(base_, m.day));
}

const SimProfile& SimulatedUser::profile_on_day(std::int64_t day) const {
  for (auto it = phases_.rbegin(); it != phases_.rend(); ++it)
    if (it->first <= day) return it->second;
  return phases_.front().second;
}

UserContext SimulatedUser::step_context(std::int64_t minute, double elapsed) const {
  if (minute < 0) throw std::invalid_argument("minute must be nonnegative");
  const std::int64_t day = minute / kMinutesPerDay;
  const int t = static_cast<int>(minute % kMinutesPerDay);
  const Routine& r = profile_on_day(day).routine;
  const int dow = day_of_week(day);
  const bool weekday = !is_weekend(dow);
  const bool awake = t >= r.wake_minute && t < r.sleep_minute;

  UserContext c;
  c.time_of_day = t;
  c.day_of_week = dow;
  c.elapsed_since_last_notification = std::clamp(elapsed, 0.0, kElapsedCapMinutes);

  bool commuting = false;
  if (!awake) {
    c.location = Location::Home;
  } else if (weekday) {
    if (t >= r.work_start - r.commute_minutes && t < r.work_start) {
      c.location = Location::Others;
      commuting = true;
    } else if (t >= r.work_start && t < r.work_end) {
      c.location = Location::Work;
    } else if (t >= r.work_end && t < r.work_end + r.commute_minutes) {
      c.location = Location::Others;
      commuting = true;
    } else if (t >= 19 * 60 && t < 21 * 60 &&
               hashed_uniform(seed_, kEveningOuting, day) < r.evening_outing_probability) {
      c.location = Location::Others;
    } else {
      c.location = Location::Home;
    }
  } else {
    const bool out = t >= 13 * 60 && t < 17 * 60 &&
                     hashed_uniform(seed_, kWeekendOuting, day) < r.weekend_outing_probability;
    c.location = out ? Location::Others : Location::Home;
  }

  if (commuting) {
    const double u = hashed_uniform(seed_, kCommuteMode, day);
    c.motion = u < 0.7 ? Motion::Driving : (u < 0.9 ? Motion::Walking : Motion::Biking);
  } else if (!awake) {
    c.motion = Motion::Stationary;
  } else {
    const double u = hashed_uniform(seed_, kMotionBlock, minute / 15);
    if (u < r.walking_probability) c.motion = Motion::Walking;
    else if (u < r.walking_probability + 0.01) c.motion = Motion::Running;
    else c.motion = Motion::Stationary;
  }

  if (!awake) {
    c.ringer = Ringer::Silent;
  } else if (c.location == Location::Work) {
    c.ringer = hashed_uniform(seed_, kRingerWork, day) < 0.6 ? Ringer::Vibration : Ringer::Normal;
  } else {
    const double u = hashed_uniform(seed_, kRingerBlock, minute / 60);
    c.ringer = u < 0.6 ? Ringer::Normal : (u < 0.9 ? Ringer::Vibration : Ringer::Silent);
  }

  double p_on = r.screen_on_home;
  if (!awake) p_on = r.screen_on_night;
  else if (c.motion == Motion::Driving) p_on = 0.05;
  else if (c.location == Location::Work) p_on = r.screen_on_work;
  else if (c.location == Location::Others) p_on = r.screen_on_out;
  c.screen = hashed_uniform(seed_, kScreenBlock, minute / 5) < p_on ? Screen::On : Screen::Off;
  return c;
}

UserReaction SimulatedUser::respond(const UserContext& context, std::int64_t minute,
                                    const Microtask* task) const {
  const SimProfile& p = profile_on_day(minute / kMinutesPerDay);
  const auto [pa, pd] = p.availability.probabilities(context);
  const double u = hashed_uniform(seed_, kReactKind, minute);
  const double ut = hashed_uniform(seed_, kReactTime, minute);
  if (u < pa) {
    const auto t = geometric_minutes(p.response_time_success, ut);
    if (t >= static_cast<std::int64_t>(kMaxResponseMinutes)) return {Outcome::ignored(), 0};
    std::optional<int> answer;
    if (task && !task->options.empty()) {
      const auto n = static_cast<std::uint64_t>(task->options.size());
      const std::uint64_t pick = hash_keys(seed_, kReactPick, minute);
      if (task->factual()) {
        const int gold = *task->gold_answer;
        if (n == 1 || hashed_uniform(seed_, kReactCorrect, minute) < p.accuracy) {
          answer = gold;
        } else {
          int k = static_cast<int>(pick % (n - 1));
          answer = k >= gold ? k + 1 : k;
        }
      } else {
        answer = static_cast<int>(pick % n);
      }
    }
    return {Outcome::answered(static_cast<double>(t), answer), t};
  }
  if (u < pa + pd) {
    const auto t = geometric_minutes(p.dismiss_time_success, ut);
    if (t >= static_cast<std::int64_t>(kMaxResponseMinutes)) return {Outcome::ignored(), 0};
    return {Outcome::dismissed(), t};
  }
  return {Outcome::ignored(), 0};
}

}  // namespace nudge

#include <doctest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "nudge/simulator.hpp"

using namespace nudge;

namespace {

constexpr std::int64_t kDay = kMinutesPerDay;

SimProfile custom(AvailabilityTerms answer, AvailabilityTerms dismiss) {
  SimProfile p;
  p.availability = {answer, dismiss};
  return p;
}

UserContext screen(Screen s) {
  UserContext c;
  c.time_of_day = 12 * 60;
  c.day_of_week = 2;
  c.screen = s;
  return c;
}

}  // namespace

TEST_CASE("routine: weekday office hours, commute, nights at home") {
  const SimulatedUser u(SimProfile{}, 1, 0);  // day 0 is a Sunday
  for (std::int64_t day = 1; day <= 5; ++day) {
    CHECK(u.step_context(day * kDay + 10 * 60).location == Location::Work);
    CHECK(u.step_context(day * kDay + 3 * 60).location == Location::Home);
    CHECK(u.step_context(day * kDay + 8 * 60 + 45).location == Location::Others);
    CHECK(u.step_context(day * kDay + 10 * 60).day_of_week == day);
  }
  CHECK(u.step_context(10 * 60).location != Location::Work);  // Sunday
  CHECK(u.step_context(6 * kDay + 10 * 60).location != Location::Work);  // Saturday
}

TEST_CASE("routine: screens are dark at 03:00") {
  int off = 0;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    const SimulatedUser u(SimProfile{}, seed);
    off += u.step_context(3 * 60 + static_cast<std::int64_t>(seed % 7) * kDay).screen == Screen::Off;
  }
  CHECK(off / 10000.0 >= 0.95);
}

TEST_CASE("traces are reproducible and order independent") {
  const SimulatedUser a(SimProfile::from_archetype(Archetype::MultiFactor), 9, 3);
  const SimulatedUser b(SimProfile::from_archetype(Archetype::MultiFactor), 9, 3);
  std::vector<UserContext> forward;
  for (std::int64_t m = 0; m < 3 * kDay; ++m) forward.push_back(a.step_context(m, 30));
  for (std::int64_t m = 3 * kDay; m-- > 0;) REQUIRE(b.step_context(m, 30) == forward[m]);
  const SimulatedUser other(SimProfile::from_archetype(Archetype::MultiFactor), 10, 3);
  int diff = 0;
  for (std::int64_t m = 0; m < 3 * kDay; ++m) diff += other.step_context(m, 30) != forward[m];
  CHECK(diff > 0);
  for (const auto& c : forward) REQUIRE_NOTHROW(validate(c));
}

TEST_CASE("respond: answer frequency follows availability") {
  const SimulatedUser u(custom({.base = 0, .screen_on = 0.9}, {}), 3);
  int answered = 0;
  for (int i = 0; i < 10000; ++i) answered += u.respond(screen(Screen::On), i).outcome.kind == OutcomeKind::Answered;
  CHECK(std::abs(answered / 10000.0 - 0.9) <= 0.02);
}

TEST_CASE("respond: degenerate availabilities") {
  const SimulatedUser dismisser(custom({}, {.base = 1.0}), 4);
  const SimulatedUser ghost(custom({}, {}), 5);
  for (int i = 0; i < 2000; ++i) {
    const auto d = dismisser.respond(screen(Screen::Off), i);
    REQUIRE((d.outcome.kind == OutcomeKind::Dismissed || d.delay_minutes >= 60 ||
             d.outcome.kind == OutcomeKind::Ignored));
    REQUIRE(ghost.respond(screen(Screen::On), i).outcome.kind == OutcomeKind::Ignored);
  }
  // with an instant dismissal law every reaction is a dismissal
  auto p = custom({}, {.base = 1.0});
  p.dismiss_time_success = 1.0;
  const SimulatedUser instant(p, 6);
  for (int i = 0; i < 2000; ++i) REQUIRE(instant.respond(screen(Screen::Off), i).outcome.kind == OutcomeKind::Dismissed);
}

TEST_CASE("property: outcome frequencies converge to the profile probabilities") {
  for (auto arch : {Archetype::HighResponder, Archetype::LowResponder, Archetype::ScreenGated, Archetype::MultiFactor}) {
    const auto prof = SimProfile::from_archetype(arch);
    const SimulatedUser u(prof, 7);
    for (auto s : {Screen::On, Screen::Off}) {
      const auto c = screen(s);
      const auto [pa, pd] = prof.availability.probabilities(c);
      const int n = 20000;
      int a = 0, d = 0;
      for (int i = 0; i < n; ++i) {
        const auto r = u.respond(c, i).outcome.kind;
        a += r == OutcomeKind::Answered;
        d += r == OutcomeKind::Dismissed;
      }
      // timeouts on the reaction law are below 1e-11 here and ignored
      CHECK(std::abs(a / double(n) - pa) <= 3 * std::sqrt(pa * (1 - pa) / n) + 1e-9);
      CHECK(std::abs(d / double(n) - pd) <= 3 * std::sqrt(pd * (1 - pd) / n) + 1e-9);
    }
  }
}

TEST_CASE("availability probabilities stay a distribution") {
  AvailabilityModel m{{.base = 0.8, .screen_on = 0.5}, {.base = 0.6}};
  const auto [a, d] = m.probabilities(screen(Screen::On));
  CHECK(a + d == doctest::Approx(1.0));
  CHECK(a <= 1.0);
  AvailabilityTerms neg{.base = -0.5};
  CHECK(neg.eval(screen(Screen::On)) == 0.0);
}

TEST_CASE("response time law: 58% within one minute") {
  const double s = default_response_success();
  // closed form P(t <= 1) = 1 - (1 - s)^2
  CHECK(1 - (1 - s) * (1 - s) == doctest::Approx(0.58).epsilon(1e-12));
  const SimulatedUser u(custom({.base = 1.0}, {}), 8);
  int quick = 0, total = 0;
  std::int64_t sorted_mid = 0;
  std::vector<std::int64_t> times;
  for (int i = 0; i < 20000; ++i) {
    const auto r = u.respond(screen(Screen::On), i);
    if (r.outcome.kind != OutcomeKind::Answered) continue;
    ++total;
    quick += r.delay_minutes <= 1;
    times.push_back(r.delay_minutes);
    REQUIRE(r.outcome.response_time_minutes == static_cast<double>(r.delay_minutes));
  }
  std::nth_element(times.begin(), times.begin() + times.size() / 2, times.end());
  sorted_mid = times[times.size() / 2];
  CHECK(std::abs(quick / double(total) - 0.58) <= 0.015);
  CHECK(sorted_mid <= 1);
  CHECK(geometric_minutes(1.0, 0.99) == 0);
  CHECK(geometric_minutes(0.5, 0.0) == 0);
  CHECK(geometric_minutes(0.5, 0.5) == 1);  // log(0.5)/log(0.5) = 1
}

TEST_CASE("respond: factual accuracy and answer indexes") {
  auto prof = custom({.base = 1.0}, {});
  prof.accuracy = 0.8;
  const SimulatedUser u(prof, 9);
  const auto task = make_arithmetic(23, 33);
  Microtask mood{0, TaskCategory::SelfMonitoring, TaskType::Emotion, "Mood?", {"a", "b", "c"}, std::nullopt};
  int correct = 0, answered = 0;
  for (int i = 0; i < 20000; ++i) {
    const auto r = u.respond(screen(Screen::On), i, &task);
    if (r.outcome.kind != OutcomeKind::Answered) continue;
    ++answered;
    REQUIRE(r.outcome.answer);
    REQUIRE((*r.outcome.answer >= 0 && *r.outcome.answer < 3));
    correct += *r.outcome.answer == *task.gold_answer;
    const auto m = u.respond(screen(Screen::On), i, &mood);
    if (m.outcome.kind == OutcomeKind::Answered) REQUIRE(*m.outcome.answer < 3);
  }
  CHECK(std::abs(correct / double(answered) - 0.8) <= 3 * std::sqrt(0.16 / answered));
}

TEST_CASE("schedule: day-20 flip and identity") {
  SimProfile p;
  p.schedule.push_back({20, Archetype::LowResponder, std::nullopt, std::nullopt});
  CHECK(apply_schedule(p, 19).archetype == Archetype::HighResponder);
  CHECK(apply_schedule(p, 20).archetype == Archetype::LowResponder);
  CHECK(apply_schedule(p, 20).availability == preset_availability(Archetype::LowResponder));
  CHECK(apply_schedule(apply_schedule(p, 25), 25).availability == apply_schedule(p, 25).availability);
  const SimProfile plain = SimProfile::from_archetype(Archetype::ScreenGated);
  CHECK(apply_schedule(plain, 100).availability == plain.availability);
  const SimulatedUser u(p, 1);
  CHECK(u.profile_on_day(19).archetype == Archetype::HighResponder);
  CHECK(u.profile_on_day(33).archetype == Archetype::LowResponder);

  SimProfile bad;
  bad.schedule = {{5, std::nullopt, std::nullopt, 0.5}, {5, std::nullopt, std::nullopt, 0.6}};
  CHECK_THROWS(validate(bad));
}

TEST_CASE("weekend boost raises Sunday availability") {
  auto p = custom({.base = 0.2, .weekend = 0.5}, {});
  auto sunday = screen(Screen::Off), tuesday = screen(Screen::Off);
  sunday.day_of_week = 0;
  tuesday.day_of_week = 2;
  CHECK(p.availability.probabilities(sunday).first > p.availability.probabilities(tuesday).first);
}

TEST_CASE("profile json: defaults, overrides, schedule and rejection") {
  const auto j = nlohmann::json::parse(R"({
    "archetype": "ScreenGated",
    "answer": {"screen_on": 0.7},
    "accuracy": 0.9,
    "schedule": [{"day": 20, "archetype": "LowResponder"}, {"day": 30, "dismiss": {"base": 0.4}}]
  })");
  const auto p = profile_from_json(j);
  CHECK(p.archetype == Archetype::ScreenGated);
  CHECK(p.availability.answer.screen_on == 0.7);
  CHECK(p.availability.answer.base == preset_availability(Archetype::ScreenGated).answer.base);
  CHECK(p.accuracy == 0.9);
  REQUIRE(p.schedule.size() == 2);
  CHECK(apply_schedule(p, 30).availability.dismiss.base == 0.4);
  const auto back = profile_from_json(profile_to_json(p));
  CHECK(back.availability == p.availability);
  CHECK(apply_schedule(back, 30).availability == apply_schedule(p, 30).availability);
  CHECK_THROWS(profile_from_json(nlohmann::json::parse(R"({"answer": {"sunshine": 1}})")));
  CHECK_THROWS(profile_from_json(nlohmann::json::parse(R"({"archetype": "Sleepy"})")));
  CHECK_THROWS(profile_from_json(nlohmann::json::parse(R"({"accuracy": 1.5})")));
}

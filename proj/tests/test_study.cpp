#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "nudge/study.hpp"

using namespace nudge;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("nudge_study_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

StudyUser user(std::string id, AgentKind agent, Archetype arch, double p = 0.0) {
  return {std::move(id), agent, SimProfile::from_archetype(arch), p};
}

// Rebuilds per-week sent/answered/dismissed/ignored/reward from an event log
// with no help from the library.
struct Tally {
  long sent = 0, answered = 0, dismissed = 0, ignored = 0, consulted = 0;
  double reward = 0;
};

std::map<int, Tally> tally_log(const fs::path& path) {
  std::map<int, Tally> weeks;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    if (j["event"] == "decision") {
      const int w = static_cast<int>(j["minute"].get<long>() / (7 * 1440)) + 1;
      if (!j["confidence"].is_null()) ++weeks[w].consulted;
      if (j["action"] == "send") ++weeks[w].sent;
    } else if (j["event"] == "resolution") {
      auto& t = weeks[static_cast<int>(j["sent_at"].get<long>() / (7 * 1440)) + 1];
      t.reward += j["reward"].get<double>();
      const auto o = j["outcome"].get<std::string>();
      t.answered += o == "answered";
      t.dismissed += o == "dismissed";
      t.ignored += o == "ignored";
    }
  }
  return weeks;
}

}  // namespace

TEST_CASE("an always-silent user sends nothing") {
  StudyConfig cfg;
  cfg.weeks = 1;
  cfg.users = {user("quiet", AgentKind::Fixed, Archetype::HighResponder, 0.0)};
  const auto res = run_study(cfg);
  REQUIRE(res.users.size() == 1);
  const auto& w = res.users[0].weeks.at(0);
  CHECK(w.sent == 0);
  CHECK(w.answer_rate == 0.0);
  CHECK(w.dismiss_rate == 0.0);
  CHECK(w.accuracy == 0.0);
  CHECK(w.consulted == 7 * 720);
}

TEST_CASE("study runs are deterministic and independent of thread count and user order") {
  StudyConfig cfg;
  cfg.weeks = 2;
  cfg.seed = 5;
  cfg.a2c.hidden_units = 16;
  cfg.users = {user("a", AgentKind::RL, Archetype::ScreenGated), user("b", AgentKind::SL, Archetype::MultiFactor),
               user("c", AgentKind::Fixed, Archetype::LowResponder, 0.2)};
  cfg.threads = 1;
  const auto one = run_study(cfg);
  cfg.threads = 3;
  std::reverse(cfg.users.begin(), cfg.users.end());
  const auto three = run_study(cfg);
  CHECK(weekly_csv(weekly_rows(one)) == weekly_csv(weekly_rows(three)));
  for (std::size_t i = 0; i < one.users.size(); ++i) {
    CHECK(one.users[i].trace == three.users[i].trace);
    CHECK(one.users[i].days == three.users[i].days);
  }
  REQUIRE(one.users[0].final_policy);
  CHECK(*one.users[0].final_policy == *three.users[0].final_policy);
  cfg.seed = 6;
  CHECK(weekly_csv(weekly_rows(run_study(cfg))) != weekly_csv(weekly_rows(one)));
}

TEST_CASE("weekly metrics agree with an independent log tally") {
  const auto dir = scratch("tally");
  StudyConfig cfg;
  cfg.weeks = 3;
  cfg.seed = 9;
  cfg.a2c.hidden_units = 16;
  cfg.a2c.rollout_length = 128;
  cfg.output_dir = dir.string();
  cfg.users = {user("rl", AgentKind::RL, Archetype::MultiFactor), user("sl", AgentKind::SL, Archetype::HighResponder),
               user("fx", AgentKind::Fixed, Archetype::ScreenGated, 0.1)};
  const auto res = run_study(cfg);
  for (const auto& u : res.users) {
    const auto tally = tally_log(dir / "logs" / (u.id + ".jsonl"));
    for (const auto& w : u.weeks) {
      const auto& t = tally.count(w.week) ? tally.at(w.week) : Tally{};
      INFO(u.id << " week " << w.week);
      CHECK(w.sent == t.sent);
      CHECK(w.answered == t.answered);
      CHECK(w.dismissed == t.dismissed);
      CHECK(w.ignored == t.ignored);
      CHECK(w.consulted == t.consulted);
      CHECK(w.reward == doctest::Approx(t.reward).epsilon(1e-9));
      CHECK(w.answered + w.dismissed + w.ignored == w.sent);
      CHECK(w.answer_rate == (w.sent ? double(w.answered) / double(w.sent) : 0.0));
      CHECK(w.dismiss_rate == (w.sent ? double(w.dismissed) / double(w.sent) : 0.0));
      CHECK(w.correct <= w.factual_answered);
      CHECK(w.factual_answered <= w.answered);
    }
  }
  fs::remove_all(dir);
}

TEST_CASE("supervised users: random phase for three weeks, then the model") {
  StudyConfig cfg;
  cfg.weeks = 5;
  cfg.seed = 3;
  cfg.users = {user("sl", AgentKind::SL, Archetype::ScreenGated)};
  const auto res = run_study(cfg);
  const auto& u = res.users[0];
  REQUIRE(u.sl_phase_end);
  CHECK(*u.sl_phase_end == 3 * 7 * 1440);
  for (const auto& w : u.weeks) {
    if (w.week <= 3) {
      CHECK(w.phase == Phase::SLTrain);
      CHECK(w.model_decisions == 0);
      CHECK(w.random_decisions == w.consulted);
      // random slots only on 30-minute boundaries: 24 per day
      CHECK(w.sent <= 7 * 24);
    } else {
      CHECK(w.phase == Phase::SLTest);
      CHECK(w.random_decisions == 0);
      CHECK(w.model_decisions == w.consulted);
    }
  }
}

TEST_CASE("confidence trace from a log") {
  std::istringstream empty;
  const auto none = confidence_trace(empty);
  CHECK(none.points.empty());
  CHECK(none.daily_reward.empty());

  const auto dir = scratch("trace");
  StudyConfig cfg;
  cfg.weeks = 1;
  cfg.seed = 4;
  cfg.output_dir = dir.string();
  cfg.users = {user("f", AgentKind::Fixed, Archetype::HighResponder, 0.05)};
  const auto res = run_study(cfg);
  std::ifstream in(dir / "logs" / "f.jsonl");
  const auto tr = confidence_trace(in);
  const auto& u = res.users[0];
  CHECK(tr.points.size() == static_cast<std::size_t>(u.weeks[0].consulted));
  CHECK(tr.points.size() == u.trace.size());
  for (std::size_t i = 1; i < tr.points.size(); ++i) REQUIRE(tr.points[i - 1].first < tr.points[i].first);
  for (const auto& d : u.days) {
    const double got = tr.daily_reward.count(d.day) ? tr.daily_reward.at(d.day) : 0.0;
    CHECK(got == doctest::Approx(d.reward).epsilon(1e-12));
  }
  fs::remove_all(dir);
}

TEST_CASE("report: 75 rows for 15 users over 5 weeks, group means, atomic files") {
  const auto dir = scratch("report");
  StudyConfig cfg;
  cfg.weeks = 5;
  cfg.seed = 2;
  for (int i = 0; i < 15; ++i)
    cfg.users.push_back(user("u" + std::to_string(100 + i), AgentKind::Fixed,
                             static_cast<Archetype>(i % 4), 0.02 + 0.01 * (i % 3)));
  const auto res = run_study(cfg);
  write_report(res, cfg, dir);
  std::ifstream csv(dir / "weekly.csv");
  const auto rows = parse_weekly_csv(csv);
  CHECK(rows.size() == 75);
  CHECK(weekly_csv(rows) == weekly_csv(weekly_rows(res)));

  const auto summary = summarize(rows);
  const auto& g = summary.at("groups").at("fixed");
  double sent = 0, rate = 0, reward = 0, acc = 0;
  int acc_rows = 0;
  for (const auto& r : rows) {
    sent += double(r.metrics.sent);
    rate += r.metrics.answer_rate;
    reward += r.metrics.reward;
    if (r.metrics.factual_answered > 0) {
      acc += r.metrics.accuracy;
      ++acc_rows;
    }
  }
  CHECK(g.at("rows") == 75);
  CHECK(g.at("sent").get<double>() == doctest::Approx(sent / 75));
  CHECK(g.at("answer_rate").get<double>() == doctest::Approx(rate / 75));
  CHECK(g.at("reward").get<double>() == doctest::Approx(reward / 75));
  CHECK(g.at("accuracy").get<double>() == doctest::Approx(acc / acc_rows));
  CHECK(report_from_dir(dir) == nlohmann::json::parse(std::ifstream(dir / "summary.json")));
  CHECK(fs::exists(dir / "daily.csv"));
  CHECK(fs::exists(dir / "traces" / "u100.csv"));

  // a re-run replaces files whole and leaves no temporaries
  write_report(res, cfg, dir);
  for (const auto& e : fs::recursive_directory_iterator(dir))
    CHECK(e.path().extension() != ".tmp");
  fs::remove_all(dir);
}

TEST_CASE("study config json") {
  const auto j = nlohmann::json::parse(R"({
    "weeks": 2, "seed": 11,
    "users": [
      {"id": "rl", "agent": "rl", "count": 3, "profile": {"archetype": "ScreenGated"}},
      {"id": "base", "agent": "fixed", "send_probability": 0.3}
    ]
  })");
  const auto cfg = j.get<StudyConfig>();
  REQUIRE(cfg.users.size() == 4);
  CHECK(cfg.users[0].id == "rl_1");
  CHECK(cfg.users[2].id == "rl_3");
  CHECK(cfg.users[0].profile.archetype == Archetype::ScreenGated);
  CHECK(cfg.users[3].send_probability == 0.3);
  const auto again = nlohmann::json(cfg).get<StudyConfig>();
  CHECK(again.users.size() == 4);
  CHECK(again.seed == 11);

  auto bad = j;
  bad["weeks"] = 0;
  CHECK_THROWS(bad.get<StudyConfig>());
  bad = j;
  bad["users"][1]["id"] = "rl_1";
  CHECK_THROWS(bad.get<StudyConfig>());
  bad = j;
  bad["users"][1]["id"] = "a/b";
  CHECK_THROWS(bad.get<StudyConfig>());
}

TEST_CASE("property: a screen-gated user makes the screen split learnable") {
  // Single runs swing between "send rarely" and "send always"; the split is
  // judged on the last week averaged over four seeds. Standardized
  // advantages at lr 5e-4: at 1e-4 five weeks are too few updates.
  StudyConfig cfg;
  cfg.weeks = 5;
  cfg.a2c.learning_rate = 5e-4;
  cfg.a2c.normalize_advantages = true;
  cfg.users = {user("sg", AgentKind::RL, Archetype::ScreenGated)};
  double gap = 0;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    cfg.seed = seed;
    const auto res = run_study(cfg);
    double on = 0, off = 0;
    int n_on = 0, n_off = 0;
    for (const auto& p : res.users[0].trace) {
      if (p.minute < 28 * 1440) continue;
      (p.screen_on ? on : off) += p.confidence;
      (p.screen_on ? n_on : n_off) += 1;
    }
    REQUIRE(n_on > 0);
    REQUIRE(n_off > 0);
    gap += on / n_on - off / n_off;
  }
  CHECK(gap / 4 >= 0.3);
}

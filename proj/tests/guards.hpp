#pragma once
// Randomized driver for the engine's safety properties. Tracks sends and
// resolutions on its own books and compares them with what the engine says.

#include <map>
#include <set>
#include <sstream>
#include <string>

#include "nudge/engine.hpp"

namespace guards {

using namespace nudge;

// Sends with a probability that drifts between regimes, including
// always-send stretches that drive the daily cap. Keeps every rollout.
class ChaosPolicy final : public Policy {
 public:
  explicit ChaosPolicy(std::size_t rollout) : rollout_(rollout) {}
  double p_send = 0.5;
  std::vector<RolloutStep> learned;

  PolicyChoice choose(const Observation&, std::int64_t, Rng& rng) override {
    const bool send = rng.uniform() < p_send;
    return {send ? Action::Send : Action::Silent, p_send, DecisionSource::Fixed};
  }
  bool learns() const override { return rollout_ > 0; }
  std::size_t rollout_length() const override { return rollout_; }
  std::vector<TrainMetrics> learn(const Rollout& r) override {
    learned.insert(learned.end(), r.steps.begin(), r.steps.end());
    return {TrainMetrics{}};
  }

 private:
  std::size_t rollout_;
};

struct Report {
  long ticks = 0;
  long sends = 0;
  long resolutions = 0;
  long violations = 0;
  std::string first;
};

inline Report run(std::uint64_t seed, long ticks, std::size_t rollout = 16) {
  Report rep;
  auto fail = [&](const std::string& what) {
    if (rep.violations++ == 0) rep.first = what;
  };
  const auto pool = MicrotaskPool::default_pool();
  const EngineConfig cfg;
  SchedulingEngine engine(cfg, RewardConfig{}, pool);
  ChaosPolicy policy(rollout);
  Rng rng(seed), env(derive_seed(seed, 99));

  std::map<std::int64_t, int> sends_per_day;
  std::set<std::uint64_t> open;                   // sent, not yet resolved
  std::map<std::uint64_t, int> resolved;          // id -> times resolved
  std::map<std::uint64_t, double> reward_of;      // id -> credited reward
  std::map<std::uint64_t, std::int64_t> sent_at;  // id -> minute
  std::vector<std::optional<std::uint64_t>> consulted;  // notification id per consulted tick (learners)

  auto on_resolution = [&](const Resolution& r) {
    ++rep.resolutions;
    if (++resolved[r.notification_id] != 1) fail("notification resolved twice");
    if (!open.erase(r.notification_id)) fail("resolution of a notification that was not open");
    if (r.reward != reward(r.outcome)) fail("credited reward differs from the reward table");
    if (r.resolved_at - r.sent_at > cfg.timeout_minutes) fail("resolution after the timeout");
    if (r.resolved_at < r.sent_at) fail("resolution before the send");
    reward_of[r.notification_id] = r.reward;
  };

  std::int64_t minute = static_cast<std::int64_t>(env.below(kMinutesPerDay));
  for (long i = 0; i < ticks; ++i) {
    // user reacts to the open notification between ticks
    if (engine.state().pending && env.uniform() < 0.08) {
      const auto kind = env.below(3);
      const Outcome o = kind == 0 ? Outcome::answered(env.uniform() * 30)
                        : kind == 1 ? Outcome::dismissed()
                                    : Outcome::ignored();
      const auto at = *engine.state().last_tick;
      on_resolution(engine.resolve(o, at, policy, engine.state().pending->id).resolution);
    }
    if (env.uniform() < 0.001) policy.p_send = env.uniform() < 0.5 ? 1.0 : env.uniform();
    minute += env.uniform() < 0.995 ? 1 : 1 + static_cast<std::int64_t>(env.below(600));

    UserContext c;
    c.time_of_day = static_cast<int>(minute % kMinutesPerDay);
    c.day_of_week = static_cast<int>((minute / kMinutesPerDay) % 7);
    c.location = static_cast<Location>(env.below(3));
    c.motion = static_cast<Motion>(env.below(5));
    c.ringer = static_cast<Ringer>(env.below(3));
    c.screen = static_cast<Screen>(env.below(2));
    c.elapsed_since_last_notification = engine.elapsed_since_last_send(minute);

    const auto t = engine.tick(c, minute, policy, rng);
    ++rep.ticks;
    for (const auto& r : t.resolutions) on_resolution(r);
    if (cfg.in_window(c.time_of_day) == (t.forced == ForcedReason::Window)) fail("window guard misfired");
    if (t.consulted() && policy.learns()) consulted.push_back(t.notification_id);
    if (t.action == Action::Send) {
      ++rep.sends;
      if (!t.consulted()) fail("send on a forced tick");
      if (!cfg.in_window(c.time_of_day)) fail("send outside the active window");
      if (++sends_per_day[minute / kMinutesPerDay] > cfg.daily_cap) fail("daily cap exceeded");
      if (!t.notification_id) fail("send without a notification id");
      open.insert(*t.notification_id);
      sent_at[*t.notification_id] = minute;
    }
    if (open.size() > 1) fail("more than one pending notification");
    if (open.size() != (engine.state().pending ? 1u : 0u)) fail("pending slot disagrees with the books");
  }
  if (auto r = engine.finish(minute + 1, policy)) on_resolution(*r);
  if (!open.empty()) fail("send left unresolved");
  for (const auto& [id, n] : resolved)
    if (n != 1) fail("notification not resolved exactly once");
  if (static_cast<long>(resolved.size()) != rep.sends) fail("resolutions do not match sends");

  // learned transitions come out in consulted order with the send's reward
  for (std::size_t k = 0; k < policy.learned.size(); ++k) {
    const auto& step = policy.learned[k];
    const auto& id = consulted.at(k);
    if ((step.action == Action::Send) != id.has_value()) fail("learned action differs from the tick");
    if (id && step.reward != reward_of.at(*id)) fail("learned reward differs from the resolution");
    if (!id && step.reward != reward_for_silent()) fail("silent step carries a reward");
  }
  return rep;
}

}  // namespace guards

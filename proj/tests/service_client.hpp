#pragma once

// Scripted phone client for the service: contexts and reactions come from a
// SimulatedUser, requests go through whatever callable the test supplies.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "nudge/microtask.hpp"
#include "nudge/simulator.hpp"

namespace client {

using Call = std::function<nlohmann::json(const nlohmann::json&)>;

class Phone {
 public:
  Phone(std::string user, nudge::SimProfile profile, std::uint64_t seed, const nudge::MicrotaskPool& pool)
      : user_(std::move(user)), sim_(std::move(profile), seed), pool_(pool) {}

  // Request for `minute`; carries the reaction to the last notification once
  // the user has acted on it.
  nlohmann::json request(std::int64_t minute) const {
    const double elapsed = last_send_ ? std::min<double>(nudge::kElapsedCapMinutes, minute - *last_send_)
                                      : nudge::kElapsedCapMinutes;
    nlohmann::json body{{"user_id", user_}, {"context", sim_.step_context(minute, elapsed)}, {"minute", minute}};
    if (planned_ && planned_->at < minute) {
      nlohmann::json prev{{"notification_id", planned_->id}, {"kind", nudge::to_string(planned_->outcome.kind)}};
      if (planned_->outcome.kind == nudge::OutcomeKind::Answered) {
        prev["response_time_minutes"] = planned_->outcome.response_time_minutes;
        if (planned_->outcome.answer) prev["answer_index"] = *planned_->outcome.answer;
      }
      body["previous_response"] = prev;
    }
    return body;
  }

  void observe(const nlohmann::json& body, const nlohmann::json& reply) {
    const auto minute = body.at("minute").get<std::int64_t>();
    if (body.contains("previous_response")) planned_.reset();
    if (reply.at("action") != "send") return;
    last_send_ = minute;
    const auto ctx = body.at("context").get<nudge::UserContext>();
    const auto& task = pool_.at(reply.at("microtask").at("id").get<std::uint32_t>());
    const auto reaction = sim_.respond(ctx, minute, &task);
    if (reaction.outcome.kind == nudge::OutcomeKind::Ignored)
      planned_.reset();
    else
      planned_ = Planned{reply.at("notification_id").get<std::uint64_t>(), reaction.outcome,
                         minute + reaction.delay_minutes};
  }

  nlohmann::json step(std::int64_t minute, const Call& call) {
    const auto body = request(minute);
    auto reply = call(body);
    observe(body, reply);
    return reply;
  }

 private:
  struct Planned {
    std::uint64_t id;
    nudge::Outcome outcome;
    std::int64_t at;
  };

  std::string user_;
  nudge::SimulatedUser sim_;
  const nudge::MicrotaskPool& pool_;
  std::optional<std::int64_t> last_send_;
  std::optional<Planned> planned_;
};

}  // namespace client

#include "nudge/reward.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

namespace nudge {

std::string_view to_string(OutcomeKind kind) {
  switch (kind) {
    case OutcomeKind::Answered: return "answered";
    case OutcomeKind::Dismissed: return "dismissed";
    case OutcomeKind::Ignored: return "ignored";
  }
  return "?";
}

OutcomeKind parse_outcome_kind(std::string_view s) {
  if (s == "answered") return OutcomeKind::Answered;
  if (s == "dismissed") return OutcomeKind::Dismissed;
  if (s == "ignored") return OutcomeKind::Ignored;
  throw std::invalid_argument("unknown outcome kind '" + std::string(s) + "'");
}

void validate(const Outcome& o) {
  if (o.kind == OutcomeKind::Answered) {
    if (!(o.response_time_minutes >= 0.0 && o.response_time_minutes <= kMaxResponseMinutes))
      throw std::invalid_argument("response_time_minutes must be in [0, 60]");
  } else if (o.response_time_minutes != 0.0 || o.answer.has_value()) {
    throw std::invalid_argument("response time and answer are only valid for answered outcomes");
  }
}

void validate(const RewardConfig& cfg) {
  if (!(cfg.decay_base > 0.0 && cfg.decay_base <= 1.0))
    throw std::invalid_argument("decay_base must be in (0, 1]");
  if (!(cfg.dismiss_penalty < cfg.ignore_penalty && cfg.ignore_penalty <= 0.0))
    throw std::invalid_argument("require dismiss_penalty < ignore_penalty <= 0");
  if (!std::isfinite(cfg.silent_reward)) throw std::invalid_argument("silent_reward must be finite");
}

double reward(const Outcome& outcome, const RewardConfig& cfg) {
  switch (outcome.kind) {
    case OutcomeKind::Answered: return std::pow(cfg.decay_base, outcome.response_time_minutes);
    case OutcomeKind::Dismissed: return cfg.dismiss_penalty;
    case OutcomeKind::Ignored: return cfg.ignore_penalty;
  }
  return 0.0;
}

double reward_for_silent(const RewardConfig& cfg) { return cfg.silent_reward; }

void to_json(nlohmann::json& j, const RewardConfig& cfg) {
  j = nlohmann::json{{"decay_base", cfg.decay_base},
                     {"dismiss_penalty", cfg.dismiss_penalty},
                     {"ignore_penalty", cfg.ignore_penalty},
                     {"silent_reward", cfg.silent_reward}};
}

void from_json(const nlohmann::json& j, RewardConfig& cfg) {
  RewardConfig out;
  out.decay_base = j.value("decay_base", out.decay_base);
  out.dismiss_penalty = j.value("dismiss_penalty", out.dismiss_penalty);
  out.ignore_penalty = j.value("ignore_penalty", out.ignore_penalty);
  out.silent_reward = j.value("silent_reward", out.silent_reward);
  validate(out);
  cfg = out;
}

}  // namespace nudge

#include "nudge/policies.hpp"

#include <nlohmann/json.hpp>

namespace nudge {
namespace {

constexpr std::int64_t kMinutesPerWeek = 7LL * kMinutesPerDay;

}  // namespace

// --- A2CPolicy -------------------------------------------------------------

A2CPolicy::A2CPolicy(const Hyperparameters& hp, std::uint64_t seed)
    : state_(PolicyState::initialize(static_cast<std::size_t>(hp.hidden_units), seed)), hp_(hp) {
  validate(hp_);
}

A2CPolicy::A2CPolicy(PolicyState state, const Hyperparameters& hp) : state_(std::move(state)), hp_(hp) {
  validate(hp_);
  if (state_.hidden != static_cast<std::size_t>(hp_.hidden_units))
    throw std::invalid_argument("policy state hidden size does not match hyperparameters");
}

PolicyChoice A2CPolicy::choose(const Observation& obs, std::int64_t /*minute*/, Rng& rng) {
  const auto r = act(state_, obs, rng, hp_);
  ++state_.env_steps;
  return {r.action, r.confidence, DecisionSource::A2C};
}

std::vector<TrainMetrics> A2CPolicy::learn(const Rollout& rollout) {
  std::vector<TrainMetrics> out;
  if (state_.env_steps < static_cast<std::uint64_t>(hp_.heatup_steps)) return out;
  for (int i = 0; i < hp_.consecutive_training_steps; ++i) {
    out.push_back(train_step(state_, rollout, hp_));
    ++train_calls_;
  }
  return out;
}

void A2CPolicy::save(ByteWriter& w) const {
  w.str(nlohmann::json(hp_).dump());
  w.u64(train_calls_);
  w.blob(nudge::save(state_));
}

A2CPolicy A2CPolicy::load(ByteReader& r) {
  Hyperparameters hp;
  try {
    hp = nlohmann::json::parse(r.str()).get<Hyperparameters>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad hyperparameter block: ") + e.what());
  }
  const auto calls = r.u64();
  const auto blob = r.blob();
  A2CPolicy p(load_policy(blob), hp);
  p.train_calls_ = calls;
  return p;
}

// --- SupervisedPolicy ------------------------------------------------------

void to_json(nlohmann::json& j, const SupervisedConfig& cfg) {
  std::vector<std::string> modes;
  for (auto m : cfg.grid.max_features) modes.emplace_back(to_string(m));
  j = nlohmann::json{{"training_weeks", cfg.training_weeks},
                     {"tau", cfg.tau},
                     {"send_probability", cfg.send_probability},
                     {"retrain_weekly", cfg.retrain_weekly},
                     {"n_estimators", cfg.grid.n_estimators},
                     {"max_features", modes}};
}

void from_json(const nlohmann::json& j, SupervisedConfig& cfg) {
  SupervisedConfig out;
  out.training_weeks = j.value("training_weeks", out.training_weeks);
  out.tau = j.value("tau", out.tau);
  out.send_probability = j.value("send_probability", out.send_probability);
  out.retrain_weekly = j.value("retrain_weekly", out.retrain_weekly);
  if (j.contains("n_estimators")) out.grid.n_estimators = j.at("n_estimators").get<std::vector<int>>();
  if (j.contains("max_features")) {
    out.grid.max_features.clear();
    for (const auto& s : j.at("max_features")) out.grid.max_features.push_back(parse_max_features(s.get<std::string>()));
  }
  if (out.training_weeks < 1) throw std::invalid_argument("training_weeks must be >= 1");
  if (out.tau <= 0) throw std::invalid_argument("tau must be positive");
  if (!(out.send_probability >= 0.0 && out.send_probability <= 1.0))
    throw std::invalid_argument("send_probability must be in [0, 1]");
  if (out.grid.n_estimators.empty() || out.grid.max_features.empty())
    throw std::invalid_argument("grid must be nonempty");
  for (int n : out.grid.n_estimators)
    if (n < 1) throw std::invalid_argument("n_estimators entries must be >= 1");
  cfg = out;
}

SupervisedPolicy::SupervisedPolicy(SupervisedConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)), seed_(seed) {}

void SupervisedPolicy::fit(std::int64_t minute) {
  const auto fit_seed = derive_seed(seed_, static_cast<std::uint64_t>(fits_));
  if (examples_.empty()) {
    ForestModel m;
    m.trees.push_back(constant_tree(Label::Negative));
    m.n_estimators = 1;
    m.seed = fit_seed;
    model_ = std::move(m);
    last_search_.reset();
  } else {
    last_search_ = grid_search(examples_, cfg_.grid, fit_seed);
    model_ = last_search_->model;
  }
  last_fit_minute_ = minute;
  ++fits_;
}

PolicyChoice SupervisedPolicy::choose(const Observation& obs, std::int64_t minute, Rng& rng) {
  if (!phase_end_) {
    const std::int64_t day_start = minute - minute % kMinutesPerDay;
    phase_end_ = day_start + cfg_.training_weeks * kMinutesPerWeek;
  }
  if (minute < *phase_end_) {
    const Action a = random_training_policy(minute, cfg_.tau, rng, cfg_.send_probability);
    const double confidence = minute % cfg_.tau == 0 ? cfg_.send_probability : 0.0;
    return {a, confidence, DecisionSource::Random};
  }
  if (!model_) {
    fit(minute);
  } else if (cfg_.retrain_weekly && (minute - *phase_end_) / kMinutesPerWeek >
                                         (last_fit_minute_ - *phase_end_) / kMinutesPerWeek) {
    fit(minute);
  }
  const auto p = model_->predict(obs);
  return {p.action, p.confidence, DecisionSource::Forest};
}

void SupervisedPolicy::on_resolved(const Observation& sent_on, const Outcome& outcome, double reward,
                                   std::int64_t sent_at) {
  const bool random_phase = phase_end_ && sent_at < *phase_end_;
  if (!random_phase && !cfg_.retrain_weekly) return;
  examples_.push_back({sent_on, outcome.kind == OutcomeKind::Answered ? Label::Positive : Label::Negative, reward});
}

void SupervisedPolicy::save(ByteWriter& w) const {
  w.str(nlohmann::json(cfg_).dump());
  w.u64(seed_);
  w.u8(phase_end_.has_value());
  w.i64(phase_end_.value_or(0));
  w.u64(examples_.size());
  for (const auto& e : examples_) {
    for (double v : e.features.values) w.f64(v);
    w.u8(e.label == Label::Positive);
    w.f64(e.reward);
  }
  w.u8(model_.has_value());
  if (model_) w.blob(nudge::save(*model_));
  w.i64(last_fit_minute_);
  w.i64(fits_);
}

SupervisedPolicy SupervisedPolicy::load(ByteReader& r) {
  SupervisedConfig cfg;
  try {
    cfg = nlohmann::json::parse(r.str()).get<SupervisedConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad supervised config block: ") + e.what());
  }
  SupervisedPolicy p(cfg, r.u64());
  const bool has_end = r.u8() != 0;
  const auto end = r.i64();
  if (has_end) p.phase_end_ = end;
  const auto n = r.u64();
  if (n > r.remaining()) throw FormatError("truncated payload");
  for (std::uint64_t i = 0; i < n; ++i) {
    LabeledExample e;
    for (double& v : e.features.values) v = r.f64();
    e.label = r.u8() ? Label::Positive : Label::Negative;
    e.reward = r.f64();
    p.examples_.push_back(e);
  }
  if (r.u8() != 0) p.model_ = load_forest(r.blob());
  p.last_fit_minute_ = r.i64();
  p.fits_ = static_cast<int>(r.i64());
  return p;
}

// --- FixedPolicy -----------------------------------------------------------

PolicyChoice FixedPolicy::choose(const Observation& /*obs*/, std::int64_t /*minute*/, Rng& rng) {
  Action a = Action::Silent;
  if (p_ >= 1.0) {
    a = Action::Send;
  } else if (p_ > 0.0) {
    a = rng.bernoulli(p_) ? Action::Send : Action::Silent;
  }
  return {a, p_, DecisionSource::Fixed};
}

}  // namespace nudge

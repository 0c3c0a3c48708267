#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "nudge/a2c.hpp"
#include "nudge/engine.hpp"
#include "nudge/forest.hpp"

namespace nudge {

// Online actor-critic agent: samples actions and trains once per complete
// rollout.
class A2CPolicy final : public Policy {
 public:
  A2CPolicy(const Hyperparameters& hp, std::uint64_t seed);
  A2CPolicy(PolicyState state, const Hyperparameters& hp);

  PolicyChoice choose(const Observation& obs, std::int64_t minute, Rng& rng) override;
  bool learns() const override { return true; }
  std::size_t rollout_length() const override { return static_cast<std::size_t>(hp_.rollout_length); }
  std::vector<TrainMetrics> learn(const Rollout& rollout) override;

  const PolicyState& state() const { return state_; }
  PolicyState& state() { return state_; }
  const Hyperparameters& hyperparameters() const { return hp_; }
  std::uint64_t train_calls() const { return train_calls_; }

  void save(ByteWriter& w) const;
  static A2CPolicy load(ByteReader& r);

 private:
  PolicyState state_;
  Hyperparameters hp_;
  std::uint64_t train_calls_ = 0;
};

struct SupervisedConfig {
  int training_weeks = 3;
  int tau = 30;
  double send_probability = 0.5;
  bool retrain_weekly = false;  // refit on all data at each later week boundary
  ForestGrid grid;
};

void to_json(nlohmann::json& j, const SupervisedConfig& cfg);
void from_json(const nlohmann::json& j, SupervisedConfig& cfg);

// Random-schedule data collection, then a grid-searched forest that is
// queried every tick.
class SupervisedPolicy final : public Policy {
 public:
  SupervisedPolicy(SupervisedConfig cfg, std::uint64_t seed);

  PolicyChoice choose(const Observation& obs, std::int64_t minute, Rng& rng) override;
  void on_resolved(const Observation& sent_on, const Outcome& outcome, double reward,
                   std::int64_t sent_at) override;

  bool in_training_phase(std::int64_t minute) const { return !phase_end_ || minute < *phase_end_; }
  std::optional<std::int64_t> phase_end() const { return phase_end_; }
  const std::vector<LabeledExample>& examples() const { return examples_; }
  const std::optional<ForestModel>& model() const { return model_; }
  const std::optional<GridSearchResult>& last_search() const { return last_search_; }
  int fits() const { return fits_; }

  void save(ByteWriter& w) const;
  static SupervisedPolicy load(ByteReader& r);

 private:
  void fit(std::int64_t minute);

  SupervisedConfig cfg_;
  std::uint64_t seed_;
  std::optional<std::int64_t> phase_end_;  // set from the first consulted tick
  std::vector<LabeledExample> examples_;
  std::optional<ForestModel> model_;
  std::optional<GridSearchResult> last_search_;  // not persisted
  std::int64_t last_fit_minute_ = 0;
  int fits_ = 0;
};

// Sends with a fixed probability; 0 and 1 give the always-silent and
// always-send policies.
class FixedPolicy final : public Policy {
 public:
  explicit FixedPolicy(double send_probability) : p_(send_probability) {}
  PolicyChoice choose(const Observation& obs, std::int64_t minute, Rng& rng) override;

 private:
  double p_;
};

}  // namespace nudge

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "nudge/binary_io.hpp"
#include "nudge/context.hpp"
#include "nudge/rng.hpp"

namespace nudge {

enum class Action { Send = 0, Silent = 1 };

std::string_view to_string(Action a);

// Raised when a policy holds non-finite parameters.
class CorruptStateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Hyperparameters {
  double discount = 0.99;
  double gae_lambda = 0.95;
  double learning_rate = 1e-4;
  int sgd_iterations = 5;
  int minibatch_size = 64;
  int rollout_length = 512;
  int consecutive_training_steps = 1;
  double gradient_clip = 40.0;  // global L2 norm
  bool normalize_observation = true;
  int heatup_steps = 0;
  int hidden_units = 256;

  double entropy_coef = 0.0;
  double value_loss_weight = 0.5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double observation_clip = 5.0;  // normalized inputs are clipped to +-this
  bool normalize_advantages = false;  // standardize actor advantages per rollout
};

void validate(const Hyperparameters& hp);
void to_json(nlohmann::json& j, const Hyperparameters& hp);
void from_json(const nlohmann::json& j, Hyperparameters& hp);

// Per-dimension running mean/variance merged batch-wise.
struct RunningNormalizer {
  static constexpr double kVarianceFloor = 1e-8;

  std::array<double, kObservationDim> mean{};
  std::array<double, kObservationDim> var = filled(1.0);
  double count = 0.0;

  void update(std::span<const Observation> batch);
  Observation apply(const Observation& obs, double clip) const;

  bool operator==(const RunningNormalizer&) const = default;

 private:
  static std::array<double, kObservationDim> filled(double v) {
    std::array<double, kObservationDim> a;
    a.fill(v);
    return a;
  }
};

// Flat layout of the shared-trunk network:
//   trunk      W1 [hidden x 16] row-major, b1 [hidden]
//   policy     Wp [2 x hidden] row-major, bp [2]
//   value      Wv [hidden], bv [1]
struct ParameterLayout {
  std::size_t hidden;

  std::size_t w1() const { return 0; }
  std::size_t b1() const { return hidden * kObservationDim; }
  std::size_t wp() const { return b1() + hidden; }
  std::size_t bp() const { return wp() + 2 * hidden; }
  std::size_t wv() const { return bp() + 2; }
  std::size_t bv() const { return wv() + hidden; }
  std::size_t size() const { return bv() + 1; }
};

struct PolicyState {
  std::size_t hidden = 0;
  std::vector<double> params;
  std::vector<double> adam_m;
  std::vector<double> adam_v;
  std::uint64_t adam_step = 0;
  RunningNormalizer normalizer;
  std::uint64_t train_steps = 0;
  std::uint64_t env_steps = 0;
  std::uint64_t seed = 0;

  // Glorot-uniform trunk and value head; policy head scaled down so the
  // initial policy is close to uniform.
  static PolicyState initialize(std::size_t hidden, std::uint64_t seed);

  ParameterLayout layout() const { return {hidden}; }
  bool operator==(const PolicyState&) const = default;
};

struct PolicyOutput {
  std::array<double, 2> probabilities{};  // [P(Send), P(Silent)]
  double value = 0.0;
};

PolicyOutput forward(const PolicyState& state, const Observation& obs,
                     const Hyperparameters& hp = {});

struct ActResult {
  Action action;
  double confidence;  // P(Send)
};

ActResult act(const PolicyState& state, const Observation& obs, Rng& rng,
              const Hyperparameters& hp = {});

struct RolloutStep {
  Observation observation;
  Action action = Action::Silent;
  double reward = 0.0;
  bool done = false;
};

struct Rollout {
  std::vector<RolloutStep> steps;
  // Observation following the last step; its value bootstraps the tail
  // unless the last step is terminal. Absent means bootstrap value 0.
  std::optional<Observation> bootstrap_observation;
};

struct AdvantageEstimate {
  double advantage;
  double target;  // return target A_t + V(o_t)
};

// R_t = r_t + gamma * R_{t+1}, with the value after the last step = bootstrap.
std::vector<double> compute_returns(std::span<const double> rewards, double gamma,
                                    double bootstrap);

// values carries one entry per step plus the bootstrap value.
std::vector<AdvantageEstimate> compute_gae(const Rollout& rollout, std::span<const double> values,
                                           double gamma, double lambda);

struct TrainMetrics {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double grad_norm = 0.0;  // mean pre-clip global norm over minibatches
  int updates = 0;
  bool fault = false;
};

TrainMetrics train_step(PolicyState& state, const Rollout& rollout, const Hyperparameters& hp);

// Minibatch loss (actor + entropy + weighted critic) at the current
// parameters; writes the analytic gradient into grad when non-null.
struct LossBreakdown {
  double total = 0.0;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
};

LossBreakdown loss_and_gradient(const PolicyState& state, std::span<const Observation> observations,
                                std::span<const Action> actions, std::span<const double> advantages,
                                std::span<const double> targets, const Hyperparameters& hp,
                                std::vector<double>* grad);

// Rescales grad in place to the given global norm; returns the pre-clip norm.
double clip_global_norm(std::span<double> grad, double max_norm);

Bytes save(const PolicyState& state);
PolicyState load_policy(std::span<const std::uint8_t> bytes);

}  // namespace nudge

#include "nudge/a2c.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

namespace nudge {
namespace {

constexpr std::string_view kPolicyMagic = "NDGP";
constexpr std::uint32_t kPolicyVersion = 1;

bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

// Per-sample activations kept for backprop.
struct Activations {
  Observation input;               // normalized
  std::vector<double> pre;         // trunk pre-activation
  std::vector<double> hidden;      // relu(pre)
  std::array<double, 2> logits{};
  std::array<double, 2> log_probs{};
  std::array<double, 2> probs{};
  double value = 0.0;
};

void run_network(const PolicyState& s, const Observation& raw, const Hyperparameters& hp,
                 Activations& a) {
  const auto L = s.layout();
  const auto H = s.hidden;
  const auto& p = s.params;
  a.input = hp.normalize_observation ? s.normalizer.apply(raw, hp.observation_clip) : raw;
  a.pre.resize(H);
  a.hidden.resize(H);
  for (std::size_t j = 0; j < H; ++j) {
    const double* w = &p[L.w1() + j * kObservationDim];
    double z = p[L.b1() + j];
    for (std::size_t i = 0; i < kObservationDim; ++i) z += w[i] * a.input.values[i];
    a.pre[j] = z;
    a.hidden[j] = z > 0.0 ? z : 0.0;
  }
  for (std::size_t k = 0; k < 2; ++k) {
    const double* w = &p[L.wp() + k * H];
    double z = p[L.bp() + k];
    for (std::size_t j = 0; j < H; ++j) z += w[j] * a.hidden[j];
    a.logits[k] = z;
  }
  double v = p[L.bv()];
  for (std::size_t j = 0; j < H; ++j) v += p[L.wv() + j] * a.hidden[j];
  a.value = v;

  const double m = std::max(a.logits[0], a.logits[1]);
  const double lse = m + std::log(std::exp(a.logits[0] - m) + std::exp(a.logits[1] - m));
  for (std::size_t k = 0; k < 2; ++k) {
    a.log_probs[k] = a.logits[k] - lse;
    a.probs[k] = std::exp(a.log_probs[k]);
  }
}

void check_finite(const PolicyState& s) {
  if (s.params.size() != s.layout().size()) throw CorruptStateError("parameter count mismatch");
  if (!all_finite(s.params)) throw CorruptStateError("policy parameters are not finite");
}

void adam_update(PolicyState& s, std::span<const double> grad, const Hyperparameters& hp) {
  ++s.adam_step;
  const double b1 = hp.adam_beta1;
  const double b2 = hp.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(s.adam_step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(s.adam_step));
  for (std::size_t i = 0; i < s.params.size(); ++i) {
    const double g = grad[i];
    s.adam_m[i] = b1 * s.adam_m[i] + (1.0 - b1) * g;
    s.adam_v[i] = b2 * s.adam_v[i] + (1.0 - b2) * g * g;
    const double m_hat = s.adam_m[i] / c1;
    const double v_hat = s.adam_v[i] / c2;
    s.params[i] -= hp.learning_rate * m_hat / (std::sqrt(v_hat) + hp.adam_epsilon);
  }
}

}  // namespace

std::string_view to_string(Action a) { return a == Action::Send ? "send" : "silent"; }

void validate(const Hyperparameters& hp) {
  if (!(hp.discount > 0.0 && hp.discount < 1.0)) throw std::invalid_argument("discount must be in (0, 1)");
  if (!(hp.gae_lambda >= 0.0 && hp.gae_lambda <= 1.0))
    throw std::invalid_argument("gae_lambda must be in [0, 1]");
  if (!(hp.learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (hp.sgd_iterations <= 0 || hp.minibatch_size <= 0 || hp.rollout_length <= 0 ||
      hp.consecutive_training_steps <= 0 || hp.hidden_units <= 0)
    throw std::invalid_argument("hyperparameter counts must be positive");
  if (hp.heatup_steps < 0) throw std::invalid_argument("heatup_steps must be >= 0");
  if (!(hp.gradient_clip > 0.0)) throw std::invalid_argument("gradient_clip must be positive");
  if (!(hp.entropy_coef >= 0.0) || !(hp.value_loss_weight > 0.0))
    throw std::invalid_argument("loss weights out of range");
  if (!(hp.observation_clip > 0.0)) throw std::invalid_argument("observation_clip must be positive");
}

void to_json(nlohmann::json& j, const Hyperparameters& hp) {
  j = nlohmann::json{{"discount", hp.discount},
                     {"gae_lambda", hp.gae_lambda},
                     {"learning_rate", hp.learning_rate},
                     {"sgd_iterations", hp.sgd_iterations},
                     {"minibatch_size", hp.minibatch_size},
                     {"rollout_length", hp.rollout_length},
                     {"consecutive_training_steps", hp.consecutive_training_steps},
                     {"gradient_clip", hp.gradient_clip},
                     {"normalize_observation", hp.normalize_observation},
                     {"heatup_steps", hp.heatup_steps},
                     {"hidden_units", hp.hidden_units},
                     {"entropy_coef", hp.entropy_coef},
                     {"value_loss_weight", hp.value_loss_weight},
                     {"adam_beta1", hp.adam_beta1},
                     {"adam_beta2", hp.adam_beta2},
                     {"adam_epsilon", hp.adam_epsilon},
                     {"observation_clip", hp.observation_clip},
                     {"normalize_advantages", hp.normalize_advantages}};
}

void from_json(const nlohmann::json& j, Hyperparameters& hp) {
  Hyperparameters d;
  d.discount = j.value("discount", d.discount);
  d.gae_lambda = j.value("gae_lambda", d.gae_lambda);
  d.learning_rate = j.value("learning_rate", d.learning_rate);
  d.sgd_iterations = j.value("sgd_iterations", d.sgd_iterations);
  d.minibatch_size = j.value("minibatch_size", d.minibatch_size);
  d.rollout_length = j.value("rollout_length", d.rollout_length);
  d.consecutive_training_steps = j.value("consecutive_training_steps", d.consecutive_training_steps);
  d.gradient_clip = j.value("gradient_clip", d.gradient_clip);
  d.normalize_observation = j.value("normalize_observation", d.normalize_observation);
  d.heatup_steps = j.value("heatup_steps", d.heatup_steps);
  d.hidden_units = j.value("hidden_units", d.hidden_units);
  d.entropy_coef = j.value("entropy_coef", d.entropy_coef);
  d.value_loss_weight = j.value("value_loss_weight", d.value_loss_weight);
  d.adam_beta1 = j.value("adam_beta1", d.adam_beta1);
  d.adam_beta2 = j.value("adam_beta2", d.adam_beta2);
  d.adam_epsilon = j.value("adam_epsilon", d.adam_epsilon);
  d.observation_clip = j.value("observation_clip", d.observation_clip);
  d.normalize_advantages = j.value("normalize_advantages", d.normalize_advantages);
  validate(d);
  hp = d;
}

void RunningNormalizer::update(std::span<const Observation> batch) {
  if (batch.empty()) return;
  const double nb = static_cast<double>(batch.size());
  const double total = count + nb;
  for (std::size_t i = 0; i < kObservationDim; ++i) {
    double bmean = 0.0;
    for (const auto& o : batch) bmean += o.values[i];
    bmean /= nb;
    double bvar = 0.0;
    for (const auto& o : batch) bvar += (o.values[i] - bmean) * (o.values[i] - bmean);
    bvar /= nb;
    const double delta = bmean - mean[i];
    const double m2 = var[i] * count + bvar * nb + delta * delta * count * nb / total;
    mean[i] += delta * nb / total;
    var[i] = std::max(0.0, m2 / total);
  }
  count = total;
}

Observation RunningNormalizer::apply(const Observation& obs, double clip) const {
  Observation out;
  for (std::size_t i = 0; i < kObservationDim; ++i) {
    const double sd = std::sqrt(std::max(var[i], kVarianceFloor));
    out.values[i] = std::clamp((obs.values[i] - mean[i]) / sd, -clip, clip);
  }
  return out;
}

PolicyState PolicyState::initialize(std::size_t hidden, std::uint64_t seed) {
  if (hidden == 0) throw std::invalid_argument("hidden size must be positive");
  PolicyState s;
  s.hidden = hidden;
  s.seed = seed;
  const auto L = s.layout();
  s.params.assign(L.size(), 0.0);
  s.adam_m.assign(L.size(), 0.0);
  s.adam_v.assign(L.size(), 0.0);

  Rng rng(derive_seed(seed, 0x1417));
  auto fill = [&](std::size_t offset, std::size_t count, double limit) {
    for (std::size_t i = 0; i < count; ++i) s.params[offset + i] = (2.0 * rng.uniform() - 1.0) * limit;
  };
  const double h = static_cast<double>(hidden);
  fill(L.w1(), hidden * kObservationDim, std::sqrt(6.0 / (kObservationDim + h)));
  fill(L.wp(), 2 * hidden, 0.01 * std::sqrt(6.0 / (h + 2.0)));
  fill(L.wv(), hidden, std::sqrt(6.0 / (h + 1.0)));
  return s;
}

PolicyOutput forward(const PolicyState& state, const Observation& obs, const Hyperparameters& hp) {
  check_finite(state);
  Activations a;
  run_network(state, obs, hp, a);
  if (!std::isfinite(a.value) || !std::isfinite(a.probs[0]) || !std::isfinite(a.probs[1]))
    throw CorruptStateError("network output is not finite");
  return {a.probs, a.value};
}

ActResult act(const PolicyState& state, const Observation& obs, Rng& rng, const Hyperparameters& hp) {
  const auto out = forward(state, obs, hp);
  const double p_send = out.probabilities[0];
  const Action action = rng.uniform() < p_send ? Action::Send : Action::Silent;
  return {action, p_send};
}

std::vector<double> compute_returns(std::span<const double> rewards, double gamma, double bootstrap) {
  std::vector<double> out(rewards.size());
  double next = bootstrap;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    next = rewards[t] + gamma * next;
    out[t] = next;
  }
  return out;
}

std::vector<AdvantageEstimate> compute_gae(const Rollout& rollout, std::span<const double> values,
                                           double gamma, double lambda) {
  const auto n = rollout.steps.size();
  if (values.size() != n + 1)
    throw std::invalid_argument("compute_gae: values must have one entry per step plus bootstrap");
  std::vector<AdvantageEstimate> out(n);
  double next_adv = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const auto& step = rollout.steps[t];
    const double live = step.done ? 0.0 : 1.0;
    const double delta = step.reward + gamma * values[t + 1] * live - values[t];
    next_adv = delta + gamma * lambda * live * next_adv;
    out[t] = {next_adv, next_adv + values[t]};
  }
  return out;
}

LossBreakdown loss_and_gradient(const PolicyState& state, std::span<const Observation> observations,
                                std::span<const Action> actions, std::span<const double> advantages,
                                std::span<const double> targets, const Hyperparameters& hp,
                                std::vector<double>* grad) {
  const auto n = observations.size();
  if (n == 0 || actions.size() != n || advantages.size() != n || targets.size() != n)
    throw std::invalid_argument("loss_and_gradient: batch arrays must be nonempty and equal length");
  const auto L = state.layout();
  const auto H = state.hidden;
  const auto& p = state.params;
  if (grad) grad->assign(L.size(), 0.0);

  const double inv_n = 1.0 / static_cast<double>(n);
  LossBreakdown loss;
  Activations a;
  std::vector<double> dh(H);
  for (std::size_t b = 0; b < n; ++b) {
    run_network(state, observations[b], hp, a);
    const auto act_idx = static_cast<std::size_t>(actions[b]);
    const double entropy = -(a.probs[0] * a.log_probs[0] + a.probs[1] * a.log_probs[1]);
    const double verr = a.value - targets[b];
    loss.policy += -advantages[b] * a.log_probs[act_idx] * inv_n;
    loss.entropy += entropy * inv_n;
    loss.value += verr * verr * inv_n;
    if (!grad) continue;

    auto& g = *grad;
    std::array<double, 2> dlogit{};
    for (std::size_t k = 0; k < 2; ++k) {
      const double onehot = k == act_idx ? 1.0 : 0.0;
      // d(-A log pi_a)/dl_k and d(-beta H)/dl_k
      dlogit[k] = (-advantages[b] * (onehot - a.probs[k]) +
                   hp.entropy_coef * a.probs[k] * (a.log_probs[k] + entropy)) *
                  inv_n;
    }
    const double dv = 2.0 * hp.value_loss_weight * verr * inv_n;

    for (std::size_t k = 0; k < 2; ++k) {
      g[L.bp() + k] += dlogit[k];
      double* gw = &g[L.wp() + k * H];
      for (std::size_t j = 0; j < H; ++j) gw[j] += dlogit[k] * a.hidden[j];
    }
    g[L.bv()] += dv;
    for (std::size_t j = 0; j < H; ++j) {
      g[L.wv() + j] += dv * a.hidden[j];
      dh[j] = a.pre[j] > 0.0
                  ? p[L.wp() + j] * dlogit[0] + p[L.wp() + H + j] * dlogit[1] + p[L.wv() + j] * dv
                  : 0.0;
    }
    for (std::size_t j = 0; j < H; ++j) {
      if (dh[j] == 0.0) continue;
      g[L.b1() + j] += dh[j];
      double* gw = &g[L.w1() + j * kObservationDim];
      for (std::size_t i = 0; i < kObservationDim; ++i) gw[i] += dh[j] * a.input.values[i];
    }
  }
  loss.total = loss.policy - hp.entropy_coef * loss.entropy + hp.value_loss_weight * loss.value;
  return loss;
}

double clip_global_norm(std::span<double> grad, double max_norm) {
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (double& g : grad) g *= scale;
  }
  return norm;
}

TrainMetrics train_step(PolicyState& state, const Rollout& rollout, const Hyperparameters& hp) {
  validate(hp);
  if (rollout.steps.empty()) throw std::invalid_argument("train_step: empty rollout");
  check_finite(state);
  const PolicyState backup = state;
  const auto n = rollout.steps.size();

  std::vector<Observation> observations(n);
  std::vector<Action> actions(n);
  for (std::size_t t = 0; t < n; ++t) {
    observations[t] = rollout.steps[t].observation;
    actions[t] = rollout.steps[t].action;
  }
  if (hp.normalize_observation) state.normalizer.update(observations);

  std::vector<double> values(n + 1, 0.0);
  Activations a;
  for (std::size_t t = 0; t < n; ++t) {
    run_network(state, observations[t], hp, a);
    values[t] = a.value;
  }
  if (rollout.bootstrap_observation && !rollout.steps.back().done) {
    run_network(state, *rollout.bootstrap_observation, hp, a);
    values[n] = a.value;
  }
  const auto estimates = compute_gae(rollout, values, hp.discount, hp.gae_lambda);

  TrainMetrics metrics;
  const auto fail = [&] {
    state = backup;
    metrics = TrainMetrics{};
    metrics.fault = true;
    return metrics;
  };
  for (const auto& e : estimates) {
    if (!std::isfinite(e.advantage) || !std::isfinite(e.target)) return fail();
  }

  std::vector<double> actor_adv(n);
  for (std::size_t t = 0; t < n; ++t) actor_adv[t] = estimates[t].advantage;
  if (hp.normalize_advantages && n > 1) {
    double mean = 0.0, sq = 0.0;
    for (double v : actor_adv) mean += v;
    mean /= static_cast<double>(n);
    for (double v : actor_adv) sq += (v - mean) * (v - mean);
    const double sd = std::sqrt(sq / static_cast<double>(n));
    for (double& v : actor_adv) v = (v - mean) / (sd + 1e-8);
  }

  Rng shuffler(derive_seed(state.seed, 0x7a11 + state.train_steps));
  std::vector<std::size_t> order(n);
  std::vector<Observation> mb_obs;
  std::vector<Action> mb_act;
  std::vector<double> mb_adv, mb_tgt, grad;
  const auto mb_size = static_cast<std::size_t>(hp.minibatch_size);
  for (int epoch = 0; epoch < hp.sgd_iterations; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffler.below(i)]);
    for (std::size_t start = 0; start < n; start += mb_size) {
      const auto end = std::min(n, start + mb_size);
      mb_obs.clear();
      mb_act.clear();
      mb_adv.clear();
      mb_tgt.clear();
      for (std::size_t k = start; k < end; ++k) {
        const auto idx = order[k];
        mb_obs.push_back(observations[idx]);
        mb_act.push_back(actions[idx]);
        mb_adv.push_back(actor_adv[idx]);
        mb_tgt.push_back(estimates[idx].target);
      }
      const auto loss = loss_and_gradient(state, mb_obs, mb_act, mb_adv, mb_tgt, hp, &grad);
      if (!std::isfinite(loss.total) || !all_finite(grad)) return fail();
      const double norm = clip_global_norm(grad, hp.gradient_clip);
      adam_update(state, grad, hp);
      if (!all_finite(state.params)) return fail();
      metrics.policy_loss += loss.policy;
      metrics.value_loss += loss.value;
      metrics.entropy += loss.entropy;
      metrics.grad_norm += norm;
      ++metrics.updates;
    }
  }
  const double u = static_cast<double>(metrics.updates);
  metrics.policy_loss /= u;
  metrics.value_loss /= u;
  metrics.entropy /= u;
  metrics.grad_norm /= u;
  ++state.train_steps;
  return metrics;
}

Bytes save(const PolicyState& s) {
  ByteWriter w;
  w.magic(kPolicyMagic);
  w.u32(kPolicyVersion);
  w.u32(static_cast<std::uint32_t>(s.hidden));
  w.u32(static_cast<std::uint32_t>(kObservationDim));
  w.u64(s.seed);
  w.u64(s.train_steps);
  w.u64(s.env_steps);
  w.f64s(s.params);
  w.f64s(s.normalizer.mean);
  w.f64s(s.normalizer.var);
  w.f64(s.normalizer.count);
  w.u64(s.adam_step);
  w.f64s(s.adam_m);
  w.f64s(s.adam_v);
  return std::move(w).bytes();
}

PolicyState load_policy(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic(kPolicyMagic);
  if (const auto version = r.u32(); version != kPolicyVersion)
    throw FormatError("unsupported policy format version " + std::to_string(version));
  PolicyState s;
  s.hidden = r.u32();
  if (r.u32() != kObservationDim) throw FormatError("observation dimension mismatch");
  if (s.hidden == 0 || s.hidden > (1u << 20)) throw FormatError("implausible hidden size");
  const auto n = s.layout().size();
  s.seed = r.u64();
  s.train_steps = r.u64();
  s.env_steps = r.u64();
  s.params = r.f64s(n);
  const auto mean = r.f64s(kObservationDim);
  const auto var = r.f64s(kObservationDim);
  std::copy(mean.begin(), mean.end(), s.normalizer.mean.begin());
  std::copy(var.begin(), var.end(), s.normalizer.var.begin());
  s.normalizer.count = r.f64();
  s.adam_step = r.u64();
  s.adam_m = r.f64s(n);
  s.adam_v = r.f64s(n);
  r.expect_end();
  if (!all_finite(s.params) || !all_finite(s.adam_m) || !all_finite(s.adam_v) ||
      !all_finite(s.normalizer.mean) || !all_finite(s.normalizer.var) ||
      !(s.normalizer.count >= 0.0))
    throw FormatError("policy payload holds non-finite values");
  return s;
}

}  // namespace nudge

#include "grasp/ppo.hpp"

#include <algorithm>

#include "grasp/geometry.hpp"

namespace grasp {

namespace {
constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2*pi))
}

void PpoConfig::validate() const {
  if (gamma <= 0.0 || gamma >= 1.0) throw std::invalid_argument("gamma must be in (0, 1)");
  if (lambda_gae < 0.0 || lambda_gae > 1.0) {
    throw std::invalid_argument("lambda_gae must be in [0, 1]");
  }
  if (clip_epsilon <= 0.0 || clip_epsilon >= 1.0) {
    throw std::invalid_argument("clip_epsilon must be in (0, 1)");
  }
  if (lr <= 0.0) throw std::invalid_argument("lr must be positive");
  if (update_epochs <= 0) throw std::invalid_argument("update_epochs must be positive");
  if (episodes < 0) throw std::invalid_argument("episodes must be non-negative");
  if (max_steps_per_episode <= 0) {
    throw std::invalid_argument("max_steps_per_episode must be positive");
  }
  if (episodes_per_batch <= 0) throw std::invalid_argument("episodes_per_batch must be positive");
  if (sigma_init < kSigmaMin || sigma_init > kSigmaMax) {
    throw std::invalid_argument("sigma_init must lie within the sigma clamp bounds");
  }
  if (checkpoint_every < 0) throw std::invalid_argument("checkpoint_every must be non-negative");
}

PolicyNet make_policy(std::uint64_t seed, double sigma_init) {
  PolicyNet net;
  net.trunk = init_params(Rng::derive(seed, 1), {kStateDim, kTrunkWidth}, Activation::kTanh,
                          Activation::kTanh);
  net.actor = init_params(Rng::derive(seed, 2), {kTrunkWidth, kTrunkWidth, 2 * kActionDim},
                          Activation::kTanh, Activation::kIdentity);
  net.critic = init_params(Rng::derive(seed, 3), {kTrunkWidth, kTrunkWidth, 1},
                           Activation::kTanh, Activation::kIdentity);
  // Start the action head at mu = 0 with a state-independent exploration
  // scale inside the clamp band, so the sigma path has gradient from the
  // first update.
  DenseLayer& head = net.actor.layers.back();
  head.weights.setZero();
  head.biases.setZero();
  for (int i = 0; i < kActionDim; ++i) {
    head.biases(kActionDim + i) = std::log(sigma_init);
  }
  return net;
}

PolicyOptimizer make_policy_optimizer(const PolicyNet& net) {
  return {make_adam_state(net.trunk), make_adam_state(net.actor), make_adam_state(net.critic)};
}

PolicyGrads make_policy_grads(const PolicyNet& net) {
  return {make_grads(net.trunk), make_grads(net.actor), make_grads(net.critic)};
}

PolicyEval policy_forward(const PolicyNet& net, const EnvState& state, PolicyCache& cache) {
  if (!state.finite()) throw NonFiniteState();
  const Eigen::VectorXd& trunk_out = forward(net.trunk, state.to_vec(), cache.trunk);
  const Eigen::VectorXd& actor_out = forward(net.actor, trunk_out, cache.actor);
  const Eigen::VectorXd& value_out = forward(net.critic, trunk_out, cache.critic);
  PolicyEval eval;
  eval.mu = actor_out.head<kActionDim>();
  for (int i = 0; i < kActionDim; ++i) {
    eval.sigma(i) = clamp(std::exp(actor_out(kActionDim + i)), kSigmaMin, kSigmaMax);
  }
  eval.value = value_out(0);
  return eval;
}

void policy_backward(const PolicyNet& net, const PolicyCache& cache,
                     const Eigen::Vector3d& d_mu, const Eigen::Vector3d& d_sigma,
                     double d_value, PolicyGrads& grads) {
  Eigen::VectorXd d_actor_out(2 * kActionDim);
  const Eigen::VectorXd& actor_out = cache.actor.activations.back();
  for (int i = 0; i < kActionDim; ++i) {
    d_actor_out(i) = d_mu(i);
    double sigma = std::exp(actor_out(kActionDim + i));
    // Saturated clamp branches carry no gradient.
    d_actor_out(kActionDim + i) =
        (sigma > kSigmaMin && sigma < kSigmaMax) ? d_sigma(i) * sigma : 0.0;
  }
  Eigen::VectorXd d_value_vec(1);
  d_value_vec(0) = d_value;
  Eigen::VectorXd d_trunk = backward(net.actor, cache.actor, d_actor_out, grads.actor);
  d_trunk += backward(net.critic, cache.critic, d_value_vec, grads.critic);
  backward(net.trunk, cache.trunk, d_trunk, grads.trunk);
}

double gaussian_log_prob(const Eigen::Vector3d& action, const Eigen::Vector3d& mu,
                         const Eigen::Vector3d& sigma) {
  double lp = 0.0;
  for (int i = 0; i < kActionDim; ++i) {
    double z = (action(i) - mu(i)) / sigma(i);
    lp += -std::log(sigma(i)) - kLogSqrt2Pi - 0.5 * z * z;
  }
  return lp;
}

ActionSample sample_action(const Eigen::Vector3d& mu, const Eigen::Vector3d& sigma, Rng& rng) {
  ActionSample out;
  out.mu = mu;
  out.sigma = sigma;
  for (int i = 0; i < kActionDim; ++i) {
    out.action(i) = mu(i) + sigma(i) * rng.normal();
  }
  out.log_prob = gaussian_log_prob(out.action, mu, sigma);
  return out;
}

Eigen::Vector3d act_greedy(const PolicyNet& net, const EnvState& state) {
  PolicyCache cache;
  return policy_forward(net, state, cache).mu;
}

AdvantageResult compute_advantages(const Rollout& rollout, double gamma, double lambda_gae) {
  if (rollout.size() == 0) throw ShapeError("compute_advantages: empty rollout");
  if (!rollout.consistent()) throw ShapeError("compute_advantages: ragged rollout arrays");
  if (!rollout.dones.back()) {
    throw ShapeError("compute_advantages: rollout must end on an episode boundary");
  }
  size_t n = rollout.size();
  AdvantageResult out;
  out.advantages.resize(n);
  out.returns.resize(n);
  double gae = 0.0;
  for (size_t k = n; k-- > 0;) {
    bool terminal = rollout.dones[k] != 0;
    double next_value = terminal ? 0.0 : rollout.values[k + 1];
    double delta = rollout.rewards[k] + gamma * next_value - rollout.values[k];
    gae = delta + gamma * lambda_gae * (terminal ? 0.0 : gae);
    out.advantages[k] = gae;
    out.returns[k] = gae + rollout.values[k];
  }
  return out;
}

void normalize_advantages(std::vector<double>& advantages) {
  size_t n = advantages.size();
  if (n < 2) return;
  double mean = 0.0;
  for (double a : advantages) mean += a;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double a : advantages) var += (a - mean) * (a - mean);
  var /= static_cast<double>(n);
  double sd = std::sqrt(var);
  if (sd < 1e-12) return;
  for (double& a : advantages) a = (a - mean) / (sd + 1e-8);
}

PpoLossReport ppo_losses(const PolicyNet& net, const PpoBatch& batch, double clip_epsilon,
                         PolicyGrads& grads) {
  if (batch.rollout == nullptr || batch.rollout->size() == 0) {
    throw ShapeError("ppo_losses: empty batch");
  }
  const Rollout& roll = *batch.rollout;
  if (!roll.consistent() || batch.advantages.size() != roll.size() ||
      batch.returns.size() != roll.size()) {
    throw ShapeError("ppo_losses: batch arrays disagree in length");
  }

  grads.set_zero();
  PpoLossReport report;
  double sum_lv = 0.0;
  double sum_la = 0.0;
  PolicyCache cache;
  for (size_t i = 0; i < roll.size(); ++i) {
    PolicyEval eval = policy_forward(net, roll.states[i], cache);
    double lp_new = gaussian_log_prob(roll.actions[i], eval.mu, eval.sigma);
    double ratio = std::exp(lp_new - roll.log_probs[i]);
    if (!std::isfinite(ratio)) {
      report.dropped += 1;
      continue;
    }
    double advantage = batch.advantages[i];
    double unclipped = ratio * advantage;
    double clipped = clamp(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon) * advantage;
    double surrogate = std::min(unclipped, clipped);
    double value_err = eval.value - batch.returns[i];
    sum_lv += value_err * value_err;
    sum_la += surrogate;
    report.used += 1;

    // L = L_V - L_a, so the surrogate enters with a negative sign; its
    // gradient is zero when the clipped branch attains the min.
    double d_lp = (unclipped <= clipped) ? -ratio * advantage : 0.0;
    Eigen::Vector3d d_mu, d_sigma;
    for (int j = 0; j < kActionDim; ++j) {
      double z = (roll.actions[i](j) - eval.mu(j)) / eval.sigma(j);
      d_mu(j) = d_lp * z / eval.sigma(j);
      d_sigma(j) = d_lp * (z * z - 1.0) / eval.sigma(j);
    }
    policy_backward(net, cache, d_mu, d_sigma, 2.0 * value_err, grads);
  }
  if (report.used > 0) {
    double inv = 1.0 / static_cast<double>(report.used);
    grads.scale(inv);
    report.loss_v = sum_lv * inv;
    report.loss_a = sum_la * inv;
    report.loss = report.loss_v - report.loss_a;
  }
  return report;
}

PpoLossReport ppo_losses_batched(const PolicyNet& net, const PpoBatch& batch,
                                 double clip_epsilon, PolicyGrads& grads,
                                 BatchWorkspace& ws) {
  if (batch.rollout == nullptr || batch.rollout->size() == 0) {
    throw ShapeError("ppo_losses: empty batch");
  }
  const Rollout& roll = *batch.rollout;
  if (!roll.consistent() || batch.advantages.size() != roll.size() ||
      batch.returns.size() != roll.size()) {
    throw ShapeError("ppo_losses: batch arrays disagree in length");
  }
  const int n = static_cast<int>(roll.size());
  const int width = net.trunk_width();

  ws.states.resize(kStateDim, n);
  for (int j = 0; j < n; ++j) {
    if (!roll.states[static_cast<size_t>(j)].finite()) throw NonFiniteState();
    ws.states.col(j) = roll.states[static_cast<size_t>(j)].to_vec();
  }

  const Eigen::MatrixXd& w_trunk = net.trunk.layers[0].weights;
  const Eigen::MatrixXd& w_ahid = net.actor.layers[0].weights;
  const Eigen::MatrixXd& w_aout = net.actor.layers[1].weights;
  const Eigen::MatrixXd& w_chid = net.critic.layers[0].weights;
  const Eigen::MatrixXd& w_cout = net.critic.layers[1].weights;

  ws.trunk_out.noalias() = w_trunk * ws.states;
  ws.trunk_out.colwise() += net.trunk.layers[0].biases;
  ws.trunk_out = ws.trunk_out.array().tanh();

  ws.actor_hid.noalias() = w_ahid * ws.trunk_out;
  ws.actor_hid.colwise() += net.actor.layers[0].biases;
  ws.actor_hid = ws.actor_hid.array().tanh();
  ws.actor_out.noalias() = w_aout * ws.actor_hid;
  ws.actor_out.colwise() += net.actor.layers[1].biases;

  ws.critic_hid.noalias() = w_chid * ws.trunk_out;
  ws.critic_hid.colwise() += net.critic.layers[0].biases;
  ws.critic_hid = ws.critic_hid.array().tanh();
  ws.value.noalias() = w_cout * ws.critic_hid;
  ws.value.colwise() += net.critic.layers[1].biases;

  ws.d_actor_out.setZero(2 * kActionDim, n);
  ws.d_value.setZero(1, n);

  PpoLossReport report;
  double sum_lv = 0.0;
  double sum_la = 0.0;
  for (int j = 0; j < n; ++j) {
    Eigen::Vector3d mu = ws.actor_out.col(j).head<kActionDim>();
    Eigen::Vector3d sigma;
    for (int i = 0; i < kActionDim; ++i) {
      sigma(i) = clamp(std::exp(ws.actor_out(kActionDim + i, j)), kSigmaMin, kSigmaMax);
    }
    double lp_new = gaussian_log_prob(roll.actions[static_cast<size_t>(j)], mu, sigma);
    double ratio = std::exp(lp_new - roll.log_probs[static_cast<size_t>(j)]);
    if (!std::isfinite(ratio)) {
      report.dropped += 1;
      continue;
    }
    double advantage = batch.advantages[static_cast<size_t>(j)];
    double unclipped = ratio * advantage;
    double clipped = clamp(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon) * advantage;
    double surrogate = std::min(unclipped, clipped);
    double value_err = ws.value(0, j) - batch.returns[static_cast<size_t>(j)];
    sum_lv += value_err * value_err;
    sum_la += surrogate;
    report.used += 1;

    double d_lp = (unclipped <= clipped) ? -ratio * advantage : 0.0;
    for (int i = 0; i < kActionDim; ++i) {
      double z = (roll.actions[static_cast<size_t>(j)](i) - mu(i)) / sigma(i);
      ws.d_actor_out(i, j) = d_lp * z / sigma(i);
      double raw_sigma = std::exp(ws.actor_out(kActionDim + i, j));
      ws.d_actor_out(kActionDim + i, j) =
          (raw_sigma > kSigmaMin && raw_sigma < kSigmaMax)
              ? d_lp * (z * z - 1.0) / sigma(i) * sigma(i)
              : 0.0;
    }
    ws.d_value(0, j) = 2.0 * value_err;
  }

  grads.set_zero();
  if (report.used > 0) {
    // Actor stream.
    grads.actor.layers[1].d_weights.noalias() = ws.d_actor_out * ws.actor_hid.transpose();
    grads.actor.layers[1].d_biases = ws.d_actor_out.rowwise().sum();
    ws.d_hidden.noalias() = w_aout.transpose() * ws.d_actor_out;
    ws.d_hidden.array() *= 1.0 - ws.actor_hid.array().square();
    grads.actor.layers[0].d_weights.noalias() = ws.d_hidden * ws.trunk_out.transpose();
    grads.actor.layers[0].d_biases = ws.d_hidden.rowwise().sum();
    ws.d_trunk.noalias() = w_ahid.transpose() * ws.d_hidden;

    // Value stream.
    grads.critic.layers[1].d_weights.noalias() = ws.d_value * ws.critic_hid.transpose();
    grads.critic.layers[1].d_biases = ws.d_value.rowwise().sum();
    ws.scratch.noalias() = w_cout.transpose() * ws.d_value;
    ws.scratch.array() *= 1.0 - ws.critic_hid.array().square();
    grads.critic.layers[0].d_weights.noalias() = ws.scratch * ws.trunk_out.transpose();
    grads.critic.layers[0].d_biases = ws.scratch.rowwise().sum();
    ws.d_trunk.noalias() += w_chid.transpose() * ws.scratch;

    // Shared trunk.
    ws.d_trunk.array() *= 1.0 - ws.trunk_out.array().square();
    grads.trunk.layers[0].d_weights.noalias() = ws.d_trunk * ws.states.transpose();
    grads.trunk.layers[0].d_biases = ws.d_trunk.rowwise().sum();

    double inv = 1.0 / static_cast<double>(report.used);
    grads.scale(inv);
    report.loss_v = sum_lv * inv;
    report.loss_a = sum_la * inv;
    report.loss = report.loss_v - report.loss_a;
  }
  (void)width;
  return report;
}

Checkpoint policy_to_checkpoint(const PolicyNet& net, const PolicyOptimizer& opt,
                                long episodes) {
  Checkpoint ckpt;
  ckpt.episodes = episodes;
  ckpt.segments.push_back({"trunk", net.trunk, opt.trunk});
  ckpt.segments.push_back({"actor", net.actor, opt.actor});
  ckpt.segments.push_back({"critic", net.critic, opt.critic});
  return ckpt;
}

void policy_from_checkpoint(const Checkpoint& ckpt, PolicyNet& net, PolicyOptimizer& opt) {
  const CheckpointSegment& trunk = ckpt.segment("trunk");
  const CheckpointSegment& actor = ckpt.segment("actor");
  const CheckpointSegment& critic = ckpt.segment("critic");
  if (trunk.params.input_size() != kStateDim ||
      actor.params.output_size() != 2 * kActionDim || critic.params.output_size() != 1 ||
      actor.params.input_size() != trunk.params.output_size() ||
      critic.params.input_size() != trunk.params.output_size()) {
    throw CheckpointError("checkpoint segments do not form a policy network");
  }
  net.trunk = trunk.params;
  net.actor = actor.params;
  net.critic = critic.params;
  opt.trunk = trunk.adam;
  opt.actor = actor.adam;
  opt.critic = critic.adam;
}

}  // namespace grasp

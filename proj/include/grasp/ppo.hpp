#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "grasp/nn_core.hpp"
#include "grasp/rng.hpp"

namespace grasp {

struct NonFiniteState : std::runtime_error {
  NonFiniteState() : std::runtime_error("environment state contains non-finite values") {}
};

inline constexpr int kStateDim = 6;
inline constexpr int kActionDim = 3;
inline constexpr int kTrunkWidth = 512;
inline constexpr double kSigmaMin = 1e-3;
inline constexpr double kSigmaMax = 1.0;

// The 6-vector consumed by the policy network: target object pose followed
// by the end-effector pose.
struct EnvState {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  double x_r = 0.0;
  double y_r = 0.0;
  double theta_r = 0.0;

  Eigen::Matrix<double, kStateDim, 1> to_vec() const {
    Eigen::Matrix<double, kStateDim, 1> v;
    v << x, y, theta, x_r, y_r, theta_r;
    return v;
  }
  bool finite() const { return to_vec().allFinite(); }
};

struct ActionSample {
  Eigen::Vector3d action;
  Eigen::Vector3d mu;
  Eigen::Vector3d sigma;
  double log_prob = 0.0;
  double value = 0.0;
};

// Per-step arrays for one or more complete episodes. The done flag marks
// episode boundaries and terminates advantage accumulation.
struct Rollout {
  std::vector<EnvState> states;
  std::vector<Eigen::Vector3d> actions;
  std::vector<double> log_probs;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<std::uint8_t> dones;

  size_t size() const { return states.size(); }
  bool consistent() const {
    return actions.size() == size() && log_probs.size() == size() &&
           rewards.size() == size() && values.size() == size() && dones.size() == size();
  }
  void push(const EnvState& s, const Eigen::Vector3d& a, double lp, double r, double v,
            bool done) {
    states.push_back(s);
    actions.push_back(a);
    log_probs.push_back(lp);
    rewards.push_back(r);
    values.push_back(v);
    dones.push_back(done ? 1 : 0);
  }
  void clear() {
    states.clear();
    actions.clear();
    log_probs.clear();
    rewards.clear();
    values.clear();
    dones.clear();
  }
};

struct PpoConfig {
  double gamma = 0.99;
  double lambda_gae = 0.95;
  double clip_epsilon = 0.2;
  double lr = 3e-4;
  int update_epochs = 10;
  long episodes = 200;
  int max_steps_per_episode = 80;
  int episodes_per_batch = 5;
  bool normalize_advantages = true;
  // Pins lambda_gae = 0 (the one-step advantage) and disables advantage
  // normalization.
  bool paper_faithful = false;
  double sigma_init = 0.3;
  long checkpoint_every = 0;
  std::uint64_t seed = 1;

  double effective_lambda() const { return paper_faithful ? 0.0 : lambda_gae; }
  bool effective_normalize() const { return paper_faithful ? false : normalize_advantages; }
  void validate() const;
};

// Shared 6->512 trunk feeding an action stream (512 -> mu, raw sigma) and
// a value stream (512 -> scalar).
struct PolicyNet {
  Mlp trunk;
  Mlp actor;
  Mlp critic;

  int trunk_width() const { return trunk.output_size(); }
  int mu_dim() const { return kActionDim; }
  int sigma_dim() const { return kActionDim; }
  int value_dim() const { return critic.output_size(); }
};

struct PolicyOptimizer {
  AdamState trunk;
  AdamState actor;
  AdamState critic;
};

struct PolicyCache {
  ForwardCache trunk;
  ForwardCache actor;
  ForwardCache critic;
};

struct PolicyGrads {
  MlpGrads trunk;
  MlpGrads actor;
  MlpGrads critic;

  void set_zero() {
    trunk.set_zero();
    actor.set_zero();
    critic.set_zero();
  }
  void scale(double s) {
    trunk.scale(s);
    actor.scale(s);
    critic.scale(s);
  }
};

struct PolicyEval {
  Eigen::Vector3d mu;
  Eigen::Vector3d sigma;
  double value = 0.0;
};

PolicyNet make_policy(std::uint64_t seed, double sigma_init);
PolicyOptimizer make_policy_optimizer(const PolicyNet& net);
PolicyGrads make_policy_grads(const PolicyNet& net);

PolicyEval policy_forward(const PolicyNet& net, const EnvState& state, PolicyCache& cache);

// Accumulates gradients given dLoss/d(mu, sigma, value) at the cached
// forward point. The sigma path applies the exp-then-clamp chain rule.
void policy_backward(const PolicyNet& net, const PolicyCache& cache,
                     const Eigen::Vector3d& d_mu, const Eigen::Vector3d& d_sigma,
                     double d_value, PolicyGrads& grads);

double gaussian_log_prob(const Eigen::Vector3d& action, const Eigen::Vector3d& mu,
                         const Eigen::Vector3d& sigma);

ActionSample sample_action(const Eigen::Vector3d& mu, const Eigen::Vector3d& sigma, Rng& rng);

Eigen::Vector3d act_greedy(const PolicyNet& net, const EnvState& state);

struct AdvantageResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// GAE(lambda) over each episode with terminal bootstrap value 0; lambda = 0
// reduces to the one-step advantage R_t + gamma * V(s_{t+1}) - V(s_t).
AdvantageResult compute_advantages(const Rollout& rollout, double gamma, double lambda_gae);

struct PpoBatch {
  const Rollout* rollout = nullptr;
  std::vector<double> advantages;
  std::vector<double> returns;
};

struct PpoLossReport {
  double loss_v = 0.0;
  double loss_a = 0.0;
  double loss = 0.0;  // loss_v - loss_a
  int used = 0;
  int dropped = 0;  // samples rejected for non-finite importance ratios
};

// Batch-mean losses and their gradients. The surrogate gradient flows only
// through the unclipped branch when it attains the min.
PpoLossReport ppo_losses(const PolicyNet& net, const PpoBatch& batch, double clip_epsilon,
                         PolicyGrads& grads);

// Same losses and gradients evaluated with whole-batch matrix products;
// agrees with ppo_losses up to floating-point summation order. The trainer
// uses this path, the per-sample path stays as the reference.
struct BatchWorkspace {
  Eigen::MatrixXd states;      // 6 x N
  Eigen::MatrixXd trunk_out;   // 512 x N
  Eigen::MatrixXd actor_hid;   // 512 x N
  Eigen::MatrixXd actor_out;   // 6 x N
  Eigen::MatrixXd critic_hid;  // 512 x N
  Eigen::MatrixXd value;       // 1 x N
  Eigen::MatrixXd d_actor_out;
  Eigen::MatrixXd d_value;
  Eigen::MatrixXd d_hidden;
  Eigen::MatrixXd d_trunk;
  Eigen::MatrixXd scratch;
};

PpoLossReport ppo_losses_batched(const PolicyNet& net, const PpoBatch& batch,
                                 double clip_epsilon, PolicyGrads& grads,
                                 BatchWorkspace& ws);

// In-place batch normalization to zero mean / unit variance; no-op for
// batches too small or too flat to normalize.
void normalize_advantages(std::vector<double>& advantages);

struct TrainLogRow {
  long episode = 0;
  double total_reward = 0.0;
  int steps = 0;
  bool success = false;
  double loss_v = 0.0;
  double loss_a = 0.0;
};

struct TrainResult {
  bool diverged = false;
  long episodes_completed = 0;
  std::vector<TrainLogRow> log;
};

namespace detail {
inline constexpr std::uint64_t kStreamActions = 0x5a11;
inline constexpr std::uint64_t kStreamEnvBase = 0xe400000;
}  // namespace detail

// Collects full episodes with a frozen behavior policy, then runs
// update_epochs gradient passes of L = L_V - L_a through Adam. A non-finite
// loss or gradient aborts training and rolls back to the last completed
// update. Deterministic given cfg.seed.
//
// Env contract: reset_episode(seed) -> EnvState, step(action) -> result
// with .state, .reward, .done and .grasp_succeeded().
template <class Env>
TrainResult train(Env& env, PolicyNet& net, PolicyOptimizer& opt, const PpoConfig& cfg,
                  const std::function<void(long, const PolicyNet&, const PolicyOptimizer&)>&
                      on_checkpoint = {}) {
  cfg.validate();
  TrainResult result;
  Rng action_rng(Rng::derive(cfg.seed, detail::kStreamActions));
  Rollout batch;
  PolicyGrads grads = make_policy_grads(net);
  PolicyCache cache;
  BatchWorkspace ws;
  std::vector<TrainLogRow> pending;

  PolicyNet last_good_net = net;
  PolicyOptimizer last_good_opt = opt;

  for (long episode = 1; episode <= cfg.episodes; ++episode) {
    EnvState s = env.reset_episode(Rng::derive(cfg.seed, detail::kStreamEnvBase + episode));
    TrainLogRow row;
    row.episode = episode;
    for (int step = 0; step < cfg.max_steps_per_episode; ++step) {
      PolicyEval eval = policy_forward(net, s, cache);
      ActionSample as = sample_action(eval.mu, eval.sigma, action_rng);
      auto res = env.step(as.action);
      // The advantage recursion needs the batch to end on an episode
      // boundary, so a step-limit truncation is recorded as terminal.
      bool done = res.done || step + 1 == cfg.max_steps_per_episode;
      batch.push(s, as.action, as.log_prob, res.reward, eval.value, done);
      row.total_reward += res.reward;
      row.steps += 1;
      if (res.done) row.success = res.grasp_succeeded();
      if (done) break;
      s = res.state;
    }
    pending.push_back(row);

    bool batch_full = static_cast<int>(pending.size()) >= cfg.episodes_per_batch;
    if (batch_full || episode == cfg.episodes) {
      AdvantageResult adv = compute_advantages(batch, cfg.gamma, cfg.effective_lambda());
      if (cfg.effective_normalize()) normalize_advantages(adv.advantages);
      PpoBatch pb{&batch, std::move(adv.advantages), std::move(adv.returns)};

      double loss_v = 0.0, loss_a = 0.0;
      bool failed = false;
      try {
        for (int epoch = 0; epoch < cfg.update_epochs; ++epoch) {
          PpoLossReport report = ppo_losses_batched(net, pb, cfg.clip_epsilon, grads, ws);
          if (report.used == 0 || !std::isfinite(report.loss)) {
            failed = true;
            break;
          }
          adam_step(net.trunk, opt.trunk, grads.trunk, cfg.lr);
          adam_step(net.actor, opt.actor, grads.actor, cfg.lr);
          adam_step(net.critic, opt.critic, grads.critic, cfg.lr);
          loss_v = report.loss_v;
          loss_a = report.loss_a;
        }
      } catch (const NonFiniteGradient&) {
        failed = true;
      }
      if (failed) {
        net = last_good_net;
        opt = last_good_opt;
        result.diverged = true;
        result.episodes_completed = episode;
        for (auto& r : pending) result.log.push_back(r);
        return result;
      }
      for (auto& r : pending) {
        r.loss_v = loss_v;
        r.loss_a = loss_a;
        result.log.push_back(r);
      }
      pending.clear();
      batch.clear();
      last_good_net = net;
      last_good_opt = opt;
    }

    if (cfg.checkpoint_every > 0 && episode % cfg.checkpoint_every == 0 && on_checkpoint) {
      on_checkpoint(episode, net, opt);
    }
    result.episodes_completed = episode;
  }
  return result;
}

// Checkpoint adapters for the trunk/actor/critic bundle.
Checkpoint policy_to_checkpoint(const PolicyNet& net, const PolicyOptimizer& opt,
                                long episodes);
void policy_from_checkpoint(const Checkpoint& ckpt, PolicyNet& net, PolicyOptimizer& opt);

}  // namespace grasp

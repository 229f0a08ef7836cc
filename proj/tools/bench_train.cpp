// Scratch harness for training-speed and convergence experiments.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "grasp/env.hpp"
#include "grasp/ppo.hpp"

using namespace grasp;

namespace {

double greedy_success_rate(const PolicyNet& net, int trials, std::uint64_t seed) {
  Environment env;
  ScenarioSpec spec;
  spec.kind = ScenarioKind::kStatic;
  int ok = 0;
  for (int t = 0; t < trials; ++t) {
    EnvState s = env.reset(spec, Rng::derive(seed, 900000 + static_cast<std::uint64_t>(t)));
    while (!env.done()) {
      StepResult res = env.step(act_greedy(net, s));
      if (res.done && res.grasp_succeeded()) ok++;
      s = res.state;
    }
  }
  return static_cast<double>(ok) / trials;
}

}  // namespace

int main(int argc, char** argv) {
  PpoConfig cfg;
  cfg.episodes = argc > 1 ? std::atol(argv[1]) : 200;
  cfg.seed = argc > 2 ? static_cast<std::uint64_t>(std::atoll(argv[2])) : 1;
  if (argc > 3) cfg.lr = std::atof(argv[3]);
  if (argc > 4) cfg.episodes_per_batch = std::atoi(argv[4]);
  if (argc > 5) cfg.sigma_init = std::atof(argv[5]);

  TrainingEnv tenv;
  tenv.scenario.kind = ScenarioKind::kStatic;
  tenv.scenario.max_steps = cfg.max_steps_per_episode;

  PolicyNet net = make_policy(cfg.seed, cfg.sigma_init);
  PolicyOptimizer opt = make_policy_optimizer(net);

  auto t0 = std::chrono::steady_clock::now();
  TrainResult result = train(tenv, net, opt, cfg);
  auto t1 = std::chrono::steady_clock::now();
  double secs = std::chrono::duration<double>(t1 - t0).count();

  double first20 = 0.0, last20 = 0.0;
  long n = static_cast<long>(result.log.size());
  for (long i = 0; i < std::min(20L, n); ++i) first20 += result.log[i].total_reward / 20.0;
  for (long i = std::max(0L, n - 20); i < n; ++i) last20 += result.log[i].total_reward / 20.0;
  int success_tail = 0;
  for (long i = std::max(0L, n - 100); i < n; ++i) {
    if (result.log[i].success) success_tail++;
  }

  std::printf("episodes=%ld time=%.1fs (%.1f ms/ep) diverged=%d\n", result.episodes_completed,
              secs, 1e3 * secs / std::max(1L, result.episodes_completed), result.diverged);
  std::printf("reward first20=%.2f last20=%.2f train-success(last100)=%d\n", first20, last20,
              success_tail);
  if (argc > 6 && std::string(argv[6]) == "noeval") return 0;

  auto e0 = std::chrono::steady_clock::now();
  double rate = greedy_success_rate(net, 100, cfg.seed + 77);
  auto e1 = std::chrono::steady_clock::now();
  std::printf("greedy static success: %.0f%% (eval %.1fs)\n", 100.0 * rate,
              std::chrono::duration<double>(e1 - e0).count());
  return 0;
}

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace grasp {

struct InvalidArchitecture : std::runtime_error {
  explicit InvalidArchitecture(const std::string& what) : std::runtime_error(what) {}
};
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};
struct CacheMismatch : std::runtime_error {
  CacheMismatch() : std::runtime_error("forward cache does not match parameters") {}
};
struct NonFiniteGradient : std::runtime_error {
  NonFiniteGradient() : std::runtime_error("gradient contains non-finite values; update rejected") {}
};
struct CheckpointError : std::runtime_error {
  explicit CheckpointError(const std::string& what) : std::runtime_error(what) {}
};

enum class Activation { kTanh, kIdentity };

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd biases;   // out
  Activation activation = Activation::kTanh;
};

// Plain dense stack. Strictly per-sample: batching loops belong to the
// caller, which keeps the backprop contract (and its finite-difference
// oracle) one vector wide.
struct Mlp {
  std::vector<DenseLayer> layers;

  int input_size() const { return layers.empty() ? 0 : static_cast<int>(layers.front().weights.cols()); }
  int output_size() const { return layers.empty() ? 0 : static_cast<int>(layers.back().weights.rows()); }
};

// Per-layer pre-activations and activations retained for backprop.
// activations[0] is the network input; activations[l+1] = act(pre[l]).
struct ForwardCache {
  std::vector<Eigen::VectorXd> pre;
  std::vector<Eigen::VectorXd> activations;
};

struct LayerGrads {
  Eigen::MatrixXd d_weights;
  Eigen::VectorXd d_biases;
};

struct MlpGrads {
  std::vector<LayerGrads> layers;

  void set_zero() {
    for (auto& g : layers) {
      g.d_weights.setZero();
      g.d_biases.setZero();
    }
  }
  void scale(double s) {
    for (auto& g : layers) {
      g.d_weights *= s;
      g.d_biases *= s;
    }
  }
};

struct AdamMoments {
  Eigen::MatrixXd m_weights;
  Eigen::MatrixXd v_weights;
  Eigen::VectorXd m_biases;
  Eigen::VectorXd v_biases;
};

struct AdamState {
  std::vector<AdamMoments> layers;
  long t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_hat = 1e-8;
};

// Deterministic init: weights uniform in +-1/sqrt(fan_in), biases zero.
// Hidden layers get hidden_act, the last layer output_act.
Mlp init_params(std::uint64_t seed, const std::vector<int>& layer_sizes,
                Activation hidden_act = Activation::kTanh,
                Activation output_act = Activation::kIdentity);

// Runs the stack and fills `cache` for a later backward pass. Returns the
// output activation (a reference into the cache).
const Eigen::VectorXd& forward(const Mlp& params, const Eigen::VectorXd& input,
                               ForwardCache& cache);

// Accumulates dLoss/dParams into `grads` given dLoss/dOutput, and returns
// dLoss/dInput for chaining through composite networks.
Eigen::VectorXd backward(const Mlp& params, const ForwardCache& cache,
                         const Eigen::VectorXd& output_gradient, MlpGrads& grads);

MlpGrads make_grads(const Mlp& params);
AdamState make_adam_state(const Mlp& params);

// Standard Adam recurrence with bias correction. Rejects non-finite
// gradients without touching params or state.
void adam_step(Mlp& params, AdamState& state, const MlpGrads& grads, double lr);

// --- checkpointing ----------------------------------------------------

// A checkpoint bundles one or more named parameter stacks with their
// optimizer state and the training episode count.
struct CheckpointSegment {
  std::string name;
  Mlp params;
  AdamState adam;
};

struct Checkpoint {
  int format_version = 1;
  long episodes = 0;
  std::vector<CheckpointSegment> segments;

  const CheckpointSegment& segment(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace grasp

#include "grasp/nn_core.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "grasp/rng.hpp"

namespace grasp {

namespace {

const char* activation_name(Activation a) {
  return a == Activation::kTanh ? "tanh" : "identity";
}

Activation activation_from_name(const std::string& s) {
  if (s == "tanh") return Activation::kTanh;
  if (s == "identity") return Activation::kIdentity;
  throw CheckpointError("unknown activation '" + s + "'");
}

void apply_activation(Activation act, const Eigen::VectorXd& pre, Eigen::VectorXd& out) {
  if (act == Activation::kTanh) {
    out = pre.array().tanh();
  } else {
    out = pre;
  }
}

void check_cache(const Mlp& params, const ForwardCache& cache) {
  size_t n = params.layers.size();
  if (cache.pre.size() != n || cache.activations.size() != n + 1) throw CacheMismatch();
  for (size_t l = 0; l < n; ++l) {
    if (cache.activations[l].size() != params.layers[l].weights.cols() ||
        cache.pre[l].size() != params.layers[l].weights.rows()) {
      throw CacheMismatch();
    }
  }
}

}  // namespace

Mlp init_params(std::uint64_t seed, const std::vector<int>& layer_sizes,
                Activation hidden_act, Activation output_act) {
  if (layer_sizes.size() < 2) throw InvalidArchitecture("need at least input and output sizes");
  for (int s : layer_sizes) {
    if (s <= 0) throw InvalidArchitecture("layer sizes must be positive");
  }
  Rng rng(seed);
  Mlp net;
  net.layers.resize(layer_sizes.size() - 1);
  for (size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    DenseLayer& layer = net.layers[l];
    int fan_in = layer_sizes[l];
    int fan_out = layer_sizes[l + 1];
    double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    layer.weights.resize(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r) {
      for (int c = 0; c < fan_in; ++c) {
        layer.weights(r, c) = rng.uniform(-scale, scale);
      }
    }
    layer.biases = Eigen::VectorXd::Zero(fan_out);
    layer.activation = (l + 2 == layer_sizes.size()) ? output_act : hidden_act;
  }
  return net;
}

const Eigen::VectorXd& forward(const Mlp& params, const Eigen::VectorXd& input,
                               ForwardCache& cache) {
  if (params.layers.empty()) throw InvalidArchitecture("empty network");
  if (input.size() != params.input_size()) {
    throw ShapeError("forward: input size " + std::to_string(input.size()) + " != " +
                     std::to_string(params.input_size()));
  }
  size_t n = params.layers.size();
  cache.pre.resize(n);
  cache.activations.resize(n + 1);
  cache.activations[0] = input;
  for (size_t l = 0; l < n; ++l) {
    const DenseLayer& layer = params.layers[l];
    cache.pre[l].noalias() = layer.weights * cache.activations[l];
    cache.pre[l] += layer.biases;
    apply_activation(layer.activation, cache.pre[l], cache.activations[l + 1]);
  }
  return cache.activations.back();
}

Eigen::VectorXd backward(const Mlp& params, const ForwardCache& cache,
                         const Eigen::VectorXd& output_gradient, MlpGrads& grads) {
  check_cache(params, cache);
  if (grads.layers.size() != params.layers.size()) {
    throw ShapeError("backward: gradient accumulator does not match network");
  }
  if (output_gradient.size() != params.output_size()) {
    throw ShapeError("backward: output gradient size mismatch");
  }
  Eigen::VectorXd delta = output_gradient;
  for (int l = static_cast<int>(params.layers.size()) - 1; l >= 0; --l) {
    const DenseLayer& layer = params.layers[static_cast<size_t>(l)];
    if (layer.activation == Activation::kTanh) {
      // d tanh(z) = 1 - tanh(z)^2, and tanh(z) is already cached.
      delta.array() *= 1.0 - cache.activations[static_cast<size_t>(l) + 1].array().square();
    }
    LayerGrads& g = grads.layers[static_cast<size_t>(l)];
    g.d_weights.noalias() += delta * cache.activations[static_cast<size_t>(l)].transpose();
    g.d_biases += delta;
    if (l > 0) {
      delta = layer.weights.transpose() * delta;
    } else {
      return layer.weights.transpose() * delta;
    }
  }
  return delta;  // unreachable for non-empty nets
}

MlpGrads make_grads(const Mlp& params) {
  MlpGrads grads;
  grads.layers.resize(params.layers.size());
  for (size_t l = 0; l < params.layers.size(); ++l) {
    grads.layers[l].d_weights = Eigen::MatrixXd::Zero(params.layers[l].weights.rows(),
                                                      params.layers[l].weights.cols());
    grads.layers[l].d_biases = Eigen::VectorXd::Zero(params.layers[l].biases.size());
  }
  return grads;
}

AdamState make_adam_state(const Mlp& params) {
  AdamState state;
  state.layers.resize(params.layers.size());
  for (size_t l = 0; l < params.layers.size(); ++l) {
    const DenseLayer& layer = params.layers[l];
    state.layers[l].m_weights = Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols());
    state.layers[l].v_weights = Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols());
    state.layers[l].m_biases = Eigen::VectorXd::Zero(layer.biases.size());
    state.layers[l].v_biases = Eigen::VectorXd::Zero(layer.biases.size());
  }
  return state;
}

void adam_step(Mlp& params, AdamState& state, const MlpGrads& grads, double lr) {
  if (grads.layers.size() != params.layers.size() || state.layers.size() != params.layers.size()) {
    throw ShapeError("adam_step: shape mismatch");
  }
  if (lr <= 0.0) throw std::invalid_argument("adam_step: lr must be positive");
  for (const auto& g : grads.layers) {
    if (!g.d_weights.allFinite() || !g.d_biases.allFinite()) throw NonFiniteGradient();
  }
  state.t += 1;
  double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (size_t l = 0; l < params.layers.size(); ++l) {
    AdamMoments& mom = state.layers[l];
    const LayerGrads& g = grads.layers[l];
    DenseLayer& layer = params.layers[l];

    mom.m_weights = state.beta1 * mom.m_weights + (1.0 - state.beta1) * g.d_weights;
    mom.v_weights = state.beta2 * mom.v_weights +
                    (1.0 - state.beta2) * g.d_weights.cwiseProduct(g.d_weights);
    layer.weights.array() -= lr * (mom.m_weights.array() / bc1) /
                             ((mom.v_weights.array() / bc2).sqrt() + state.eps_hat);

    mom.m_biases = state.beta1 * mom.m_biases + (1.0 - state.beta1) * g.d_biases;
    mom.v_biases = state.beta2 * mom.v_biases +
                   (1.0 - state.beta2) * g.d_biases.cwiseProduct(g.d_biases);
    layer.biases.array() -= lr * (mom.m_biases.array() / bc1) /
                            ((mom.v_biases.array() / bc2).sqrt() + state.eps_hat);
  }
}

// --- checkpointing ----------------------------------------------------

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json arr = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) arr.push_back(m(r, c));
  }
  return arr;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& arr, Eigen::Index rows,
                                 Eigen::Index cols) {
  if (arr.size() != static_cast<size_t>(rows * cols)) {
    throw CheckpointError("weight array length does not match layer sizes");
  }
  Eigen::MatrixXd m(rows, cols);
  size_t i = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = arr[i++].get<double>();
  }
  return m;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& arr, Eigen::Index size) {
  if (arr.size() != static_cast<size_t>(size)) {
    throw CheckpointError("bias array length does not match layer sizes");
  }
  Eigen::VectorXd v(size);
  for (Eigen::Index i = 0; i < size; ++i) v(i) = arr[static_cast<size_t>(i)].get<double>();
  return v;
}

}  // namespace

const CheckpointSegment& Checkpoint::segment(const std::string& name) const {
  for (const auto& seg : segments) {
    if (seg.name == name) return seg;
  }
  throw CheckpointError("checkpoint has no segment '" + name + "'");
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::json doc;
  doc["format_version"] = ckpt.format_version;
  doc["episodes"] = ckpt.episodes;
  nlohmann::json nets = nlohmann::json::array();
  for (const auto& seg : ckpt.segments) {
    nlohmann::json net;
    net["name"] = seg.name;
    std::vector<int> sizes;
    sizes.push_back(seg.params.input_size());
    nlohmann::json activations = nlohmann::json::array();
    nlohmann::json layers = nlohmann::json::array();
    nlohmann::json adam_layers = nlohmann::json::array();
    for (size_t l = 0; l < seg.params.layers.size(); ++l) {
      const DenseLayer& layer = seg.params.layers[l];
      sizes.push_back(static_cast<int>(layer.weights.rows()));
      activations.push_back(activation_name(layer.activation));
      nlohmann::json jl;
      jl["weights"] = matrix_to_json(layer.weights);  // row-major
      jl["biases"] = matrix_to_json(layer.biases);
      layers.push_back(std::move(jl));
      const AdamMoments& mom = seg.adam.layers.at(l);
      nlohmann::json ja;
      ja["m_weights"] = matrix_to_json(mom.m_weights);
      ja["v_weights"] = matrix_to_json(mom.v_weights);
      ja["m_biases"] = matrix_to_json(mom.m_biases);
      ja["v_biases"] = matrix_to_json(mom.v_biases);
      adam_layers.push_back(std::move(ja));
    }
    net["layer_sizes"] = sizes;
    net["activations"] = activations;
    net["layers"] = std::move(layers);
    net["adam"] = {{"t", seg.adam.t},
                   {"beta1", seg.adam.beta1},
                   {"beta2", seg.adam.beta2},
                   {"eps_hat", seg.adam.eps_hat},
                   {"layers", std::move(adam_layers)}};
    nets.push_back(std::move(net));
  }
  doc["nets"] = std::move(nets);
  std::ofstream out(path);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out << doc.dump() << "\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
  try {
    Checkpoint ckpt;
    ckpt.format_version = doc.at("format_version").get<int>();
    if (ckpt.format_version != 1) {
      throw CheckpointError("unsupported checkpoint format_version " +
                            std::to_string(ckpt.format_version));
    }
    ckpt.episodes = doc.at("episodes").get<long>();
    for (const auto& net : doc.at("nets")) {
      CheckpointSegment seg;
      seg.name = net.at("name").get<std::string>();
      std::vector<int> sizes = net.at("layer_sizes").get<std::vector<int>>();
      if (sizes.size() < 2) throw CheckpointError("layer_sizes too short");
      const auto& activations = net.at("activations");
      const auto& layers = net.at("layers");
      if (activations.size() != sizes.size() - 1 || layers.size() != sizes.size() - 1) {
        throw CheckpointError("layer count mismatch in segment '" + seg.name + "'");
      }
      const auto& adam = net.at("adam");
      const auto& adam_layers = adam.at("layers");
      if (adam_layers.size() != layers.size()) {
        throw CheckpointError("optimizer layer count mismatch");
      }
      seg.adam.t = adam.at("t").get<long>();
      seg.adam.beta1 = adam.at("beta1").get<double>();
      seg.adam.beta2 = adam.at("beta2").get<double>();
      seg.adam.eps_hat = adam.at("eps_hat").get<double>();
      for (size_t l = 0; l + 1 < sizes.size(); ++l) {
        Eigen::Index rows = sizes[l + 1];
        Eigen::Index cols = sizes[l];
        DenseLayer layer;
        layer.weights = matrix_from_json(layers[l].at("weights"), rows, cols);
        layer.biases = vector_from_json(layers[l].at("biases"), rows);
        layer.activation = activation_from_name(activations[l].get<std::string>());
        seg.params.layers.push_back(std::move(layer));
        AdamMoments mom;
        mom.m_weights = matrix_from_json(adam_layers[l].at("m_weights"), rows, cols);
        mom.v_weights = matrix_from_json(adam_layers[l].at("v_weights"), rows, cols);
        mom.m_biases = vector_from_json(adam_layers[l].at("m_biases"), rows);
        mom.v_biases = vector_from_json(adam_layers[l].at("v_biases"), rows);
        seg.adam.layers.push_back(std::move(mom));
      }
      ckpt.segments.push_back(std::move(seg));
    }
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(path.string() + ": malformed checkpoint: " + e.what());
  }
}

}  // namespace grasp

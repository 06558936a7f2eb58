// Minimal feedforward networks with analytic reverse-mode gradients,
// adaptive-moment parameter updates, and soft target-network blending.
// Everything runs in 64-bit floats.

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace ccs::nn {

enum class Activation { Tanh, Identity };

// Fully connected net: hidden layers use tanh, the output layer uses
// output_activation. Weights are row-major (out x in) per layer.
struct Mlp {
  std::vector<int> dims;
  Activation output_activation = Activation::Identity;
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  int input_dim() const { return dims.front(); }
  int output_dim() const { return dims.back(); }
  int layer_count() const { return static_cast<int>(dims.size()) - 1; }
  std::size_t parameter_count() const;
  bool same_architecture(const Mlp& other) const;

  // Uniform init in ±1/sqrt(fan_in).
  static Mlp create(std::vector<int> dims, Activation output_activation,
                    std::mt19937_64& rng);
};

// Post-activation values per layer; activations[0] is the input.
struct ForwardCache {
  std::vector<std::vector<double>> activations;
};

std::vector<double> forward(const Mlp& net, std::span<const double> input,
                            ForwardCache* cache = nullptr);

struct Gradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;
  std::vector<double> input;

  static Gradients zeros_like(const Mlp& net);
  void accumulate(const Gradients& other);
  void scale(double factor);
};

// Exact gradients of output·output_gradient w.r.t. all parameters and the
// input, for the forward pass that produced cache.
Gradients backward(const Mlp& net, const ForwardCache& cache,
                   std::span<const double> output_gradient);

// Accumulating variant for batch loops: adds this sample's parameter
// gradients into acc without allocating.
void backward_into(const Mlp& net, const ForwardCache& cache,
                   std::span<const double> output_gradient, Gradients& acc);

// Input gradient only; skips parameter gradients entirely.
std::vector<double> backward_input_only(const Mlp& net, const ForwardCache& cache,
                                        std::span<const double> output_gradient);

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<std::vector<double>> m_weights, v_weights;
  std::vector<std::vector<double>> m_biases, v_biases;

  static AdamState for_net(const Mlp& net, double learning_rate);
};

void apply_update(Mlp& net, const Gradients& grads, AdamState& opt);

// target <- tau * online + (1 - tau) * target, element-wise.
void soft_update(Mlp& target, const Mlp& online, double tau);

// Parameter-space L2 distance between two same-architecture nets.
double parameter_distance(const Mlp& a, const Mlp& b);
bool has_non_finite(const Mlp& net);

nlohmann::json to_json(const Mlp& net);
Mlp mlp_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AdamState& opt);
AdamState adam_from_json(const nlohmann::json& j);

}  // namespace ccs::nn

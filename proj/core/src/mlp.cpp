#include "ccs/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace ccs::nn {

namespace {
void check(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}
}  // namespace

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (int l = 0; l < layer_count(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

bool Mlp::same_architecture(const Mlp& other) const {
  return dims == other.dims && output_activation == other.output_activation;
}

Mlp Mlp::create(std::vector<int> dims, Activation output_activation,
                std::mt19937_64& rng) {
  check(dims.size() >= 2, "Mlp::create: need at least input and output dims");
  for (int d : dims) check(d >= 1, "Mlp::create: layer dims must be >= 1");
  Mlp net;
  net.dims = std::move(dims);
  net.output_activation = output_activation;
  for (int l = 0; l + 1 < static_cast<int>(net.dims.size()); ++l) {
    const int in = net.dims[l], out = net.dims[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> uni(-bound, bound);
    std::vector<double> w(static_cast<std::size_t>(out) * in);
    for (auto& v : w) v = uni(rng);
    std::vector<double> b(out);
    for (auto& v : b) v = uni(rng);
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  return net;
}

std::vector<double> forward(const Mlp& net, std::span<const double> input,
                            ForwardCache* cache) {
  check(static_cast<int>(input.size()) == net.input_dim(),
        "forward: input length must equal the first layer dim");
  if (cache) {
    cache->activations.resize(net.layer_count() + 1);
    cache->activations[0].assign(input.begin(), input.end());
  }
  std::vector<double> a(input.begin(), input.end());
  std::vector<double> z;
  for (int l = 0; l < net.layer_count(); ++l) {
    const int in = net.dims[l], out = net.dims[l + 1];
    const double* w = net.weights[l].data();
    z.resize(out);
    for (int o = 0; o < out; ++o) {
      double s = net.biases[l][o];
      const double* row = w + static_cast<std::size_t>(o) * in;
      for (int k = 0; k < in; ++k) s += row[k] * a[k];
      z[o] = s;
    }
    const bool is_output = (l == net.layer_count() - 1);
    if (!is_output || net.output_activation == Activation::Tanh)
      for (auto& v : z) v = std::tanh(v);
    std::swap(a, z);
    if (cache) cache->activations[l + 1].assign(a.begin(), a.end());
  }
  return a;
}

Gradients Gradients::zeros_like(const Mlp& net) {
  Gradients g;
  for (int l = 0; l < net.layer_count(); ++l) {
    g.weights.emplace_back(net.weights[l].size(), 0.0);
    g.biases.emplace_back(net.biases[l].size(), 0.0);
  }
  g.input.assign(net.input_dim(), 0.0);
  return g;
}

void Gradients::accumulate(const Gradients& other) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for (std::size_t k = 0; k < weights[l].size(); ++k) weights[l][k] += other.weights[l][k];
    for (std::size_t k = 0; k < biases[l].size(); ++k) biases[l][k] += other.biases[l][k];
  }
  for (std::size_t k = 0; k < input.size(); ++k) input[k] += other.input[k];
}

void Gradients::scale(double factor) {
  for (auto& w : weights)
    for (auto& v : w) v *= factor;
  for (auto& b : biases)
    for (auto& v : b) v *= factor;
  for (auto& v : input) v *= factor;
}

namespace {

// Shared reverse sweep; when acc is non-null, parameter gradients are added
// into it. Returns the input gradient through delta.
void reverse_sweep(const Mlp& net, const ForwardCache& cache,
                   std::span<const double> output_gradient, Gradients* acc,
                   std::vector<double>& delta) {
  check(static_cast<int>(cache.activations.size()) == net.layer_count() + 1,
        "backward: cache does not match net");
  check(static_cast<int>(output_gradient.size()) == net.output_dim(),
        "backward: output_gradient length must equal the last layer dim");

  delta.assign(output_gradient.begin(), output_gradient.end());
  std::vector<double> prev;
  for (int l = net.layer_count() - 1; l >= 0; --l) {
    const int in = net.dims[l], out = net.dims[l + 1];
    const auto& a_out = cache.activations[l + 1];
    const auto& a_in = cache.activations[l];
    const bool tanh_layer =
        (l < net.layer_count() - 1) || net.output_activation == Activation::Tanh;
    if (tanh_layer)
      for (int o = 0; o < out; ++o) delta[o] *= 1.0 - a_out[o] * a_out[o];

    if (acc) {
      double* gw = acc->weights[l].data();
      for (int o = 0; o < out; ++o) {
        const double d = delta[o];
        acc->biases[l][o] += d;
        double* row = gw + static_cast<std::size_t>(o) * in;
        for (int k = 0; k < in; ++k) row[k] += d * a_in[k];
      }
    }

    prev.assign(in, 0.0);
    const double* w = net.weights[l].data();
    for (int o = 0; o < out; ++o) {
      const double d = delta[o];
      const double* row = w + static_cast<std::size_t>(o) * in;
      for (int k = 0; k < in; ++k) prev[k] += d * row[k];
    }
    std::swap(delta, prev);
  }
}

}  // namespace

Gradients backward(const Mlp& net, const ForwardCache& cache,
                   std::span<const double> output_gradient) {
  Gradients g = Gradients::zeros_like(net);
  std::vector<double> delta;
  reverse_sweep(net, cache, output_gradient, &g, delta);
  g.input = std::move(delta);
  return g;
}

void backward_into(const Mlp& net, const ForwardCache& cache,
                   std::span<const double> output_gradient, Gradients& acc) {
  std::vector<double> delta;
  reverse_sweep(net, cache, output_gradient, &acc, delta);
  for (std::size_t k = 0; k < acc.input.size(); ++k) acc.input[k] += delta[k];
}

std::vector<double> backward_input_only(const Mlp& net, const ForwardCache& cache,
                                        std::span<const double> output_gradient) {
  std::vector<double> delta;
  reverse_sweep(net, cache, output_gradient, nullptr, delta);
  return delta;
}

AdamState AdamState::for_net(const Mlp& net, double learning_rate) {
  AdamState s;
  s.learning_rate = learning_rate;
  for (int l = 0; l < net.layer_count(); ++l) {
    s.m_weights.emplace_back(net.weights[l].size(), 0.0);
    s.v_weights.emplace_back(net.weights[l].size(), 0.0);
    s.m_biases.emplace_back(net.biases[l].size(), 0.0);
    s.v_biases.emplace_back(net.biases[l].size(), 0.0);
  }
  return s;
}

namespace {
void adam_step(std::vector<double>& theta, const std::vector<double>& grad,
               std::vector<double>& m, std::vector<double>& v, const AdamState& opt,
               double bias1, double bias2) {
  for (std::size_t k = 0; k < theta.size(); ++k) {
    m[k] = opt.beta1 * m[k] + (1.0 - opt.beta1) * grad[k];
    v[k] = opt.beta2 * v[k] + (1.0 - opt.beta2) * grad[k] * grad[k];
    const double m_hat = m[k] / bias1;
    const double v_hat = v[k] / bias2;
    theta[k] -= opt.learning_rate * m_hat / (std::sqrt(v_hat) + opt.epsilon);
  }
}
}  // namespace

void apply_update(Mlp& net, const Gradients& grads, AdamState& opt) {
  check(grads.weights.size() == net.weights.size(), "apply_update: shape mismatch");
  ++opt.step;
  const double bias1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
  const double bias2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
  for (int l = 0; l < net.layer_count(); ++l) {
    adam_step(net.weights[l], grads.weights[l], opt.m_weights[l], opt.v_weights[l], opt,
              bias1, bias2);
    adam_step(net.biases[l], grads.biases[l], opt.m_biases[l], opt.v_biases[l], opt,
              bias1, bias2);
  }
}

void soft_update(Mlp& target, const Mlp& online, double tau) {
  check(target.same_architecture(online), "soft_update: architecture mismatch");
  for (int l = 0; l < target.layer_count(); ++l) {
    for (std::size_t k = 0; k < target.weights[l].size(); ++k)
      target.weights[l][k] = tau * online.weights[l][k] + (1.0 - tau) * target.weights[l][k];
    for (std::size_t k = 0; k < target.biases[l].size(); ++k)
      target.biases[l][k] = tau * online.biases[l][k] + (1.0 - tau) * target.biases[l][k];
  }
}

double parameter_distance(const Mlp& a, const Mlp& b) {
  check(a.same_architecture(b), "parameter_distance: architecture mismatch");
  double s = 0.0;
  for (int l = 0; l < a.layer_count(); ++l) {
    for (std::size_t k = 0; k < a.weights[l].size(); ++k) {
      const double d = a.weights[l][k] - b.weights[l][k];
      s += d * d;
    }
    for (std::size_t k = 0; k < a.biases[l].size(); ++k) {
      const double d = a.biases[l][k] - b.biases[l][k];
      s += d * d;
    }
  }
  return std::sqrt(s);
}

bool has_non_finite(const Mlp& net) {
  for (const auto& w : net.weights)
    for (double v : w)
      if (!std::isfinite(v)) return true;
  for (const auto& b : net.biases)
    for (double v : b)
      if (!std::isfinite(v)) return true;
  return false;
}

nlohmann::json to_json(const Mlp& net) {
  return nlohmann::json{
      {"layer_dims", net.dims},
      {"output_activation",
       net.output_activation == Activation::Tanh ? "tanh" : "identity"},
      {"weights", net.weights},
      {"biases", net.biases},
  };
}

Mlp mlp_from_json(const nlohmann::json& j) {
  Mlp net;
  net.dims = j.at("layer_dims").get<std::vector<int>>();
  const std::string act = j.at("output_activation").get<std::string>();
  check(act == "tanh" || act == "identity", "mlp_from_json: unknown activation");
  net.output_activation = act == "tanh" ? Activation::Tanh : Activation::Identity;
  net.weights = j.at("weights").get<std::vector<std::vector<double>>>();
  net.biases = j.at("biases").get<std::vector<std::vector<double>>>();
  check(net.weights.size() + 1 == net.dims.size() && net.biases.size() + 1 == net.dims.size(),
        "mlp_from_json: layer count mismatch");
  for (int l = 0; l < net.layer_count(); ++l)
    check(static_cast<int>(net.weights[l].size()) == net.dims[l] * net.dims[l + 1] &&
              static_cast<int>(net.biases[l].size()) == net.dims[l + 1],
          "mlp_from_json: layer size mismatch");
  return net;
}

nlohmann::json to_json(const AdamState& opt) {
  return nlohmann::json{
      {"learning_rate", opt.learning_rate}, {"beta1", opt.beta1},
      {"beta2", opt.beta2},                 {"epsilon", opt.epsilon},
      {"step", opt.step},                   {"m_weights", opt.m_weights},
      {"v_weights", opt.v_weights},         {"m_biases", opt.m_biases},
      {"v_biases", opt.v_biases},
  };
}

AdamState adam_from_json(const nlohmann::json& j) {
  AdamState s;
  s.learning_rate = j.at("learning_rate").get<double>();
  s.beta1 = j.at("beta1").get<double>();
  s.beta2 = j.at("beta2").get<double>();
  s.epsilon = j.at("epsilon").get<double>();
  s.step = j.at("step").get<std::int64_t>();
  s.m_weights = j.at("m_weights").get<std::vector<std::vector<double>>>();
  s.v_weights = j.at("v_weights").get<std::vector<std::vector<double>>>();
  s.m_biases = j.at("m_biases").get<std::vector<std::vector<double>>>();
  s.v_biases = j.at("v_biases").get<std::vector<std::vector<double>>>();
  return s;
}

}  // namespace ccs::nn

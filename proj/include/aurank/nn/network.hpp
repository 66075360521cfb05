#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "aurank/error.hpp"
#include "aurank/nn/special.hpp"

namespace aurank::nn {

enum class Activation { relu, tanh };
enum class OutputTransform { identity, softplus };

NLOHMANN_JSON_SERIALIZE_ENUM(Activation, {{Activation::relu, "relu"}, {Activation::tanh, "tanh"}})
NLOHMANN_JSON_SERIALIZE_ENUM(OutputTransform, {{OutputTransform::identity, "identity"},
                                               {OutputTransform::softplus, "softplus"}})

// Fully connected network with a scalar output. Layer k maps
// layer_sizes[k] -> layer_sizes[k+1]; weights[k] is row-major with
// layer_sizes[k+1] rows and layer_sizes[k] columns.
struct NetworkParams {
  std::vector<std::size_t> layer_sizes;
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;
  Activation activation = Activation::relu;
  OutputTransform output_transform = OutputTransform::identity;

  std::size_t input_dim() const { return layer_sizes.empty() ? 0 : layer_sizes.front(); }
  std::size_t num_layers() const { return weights.size(); }

  std::size_t num_parameters() const {
    std::size_t n = 0;
    for (std::size_t k = 0; k < weights.size(); ++k) n += weights[k].size() + biases[k].size();
    return n;
  }

  // Throws ShapeError / InvalidInputError when an invariant is broken.
  void validate() const {
    if (layer_sizes.size() < 2) throw ShapeError("network needs at least two layer sizes");
    if (layer_sizes.back() != 1) throw ShapeError("network output must be scalar");
    if (weights.size() != layer_sizes.size() - 1 || biases.size() != weights.size())
      throw ShapeError("layer count does not match layer_sizes");
    for (std::size_t k = 0; k < weights.size(); ++k) {
      if (weights[k].size() != layer_sizes[k] * layer_sizes[k + 1])
        throw ShapeError("weight matrix " + std::to_string(k) + " has wrong size");
      if (biases[k].size() != layer_sizes[k + 1])
        throw ShapeError("bias vector " + std::to_string(k) + " has wrong size");
      for (double w : weights[k])
        if (!std::isfinite(w)) throw InvalidInputError("non-finite weight");
      for (double b : biases[k])
        if (!std::isfinite(b)) throw InvalidInputError("non-finite bias");
    }
  }

  friend bool operator==(const NetworkParams&, const NetworkParams&) = default;
};

// Partial derivatives of a scalar loss, shaped like the owning NetworkParams.
struct GradientTape {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  static GradientTape zeros_like(const NetworkParams& p) {
    GradientTape g;
    for (std::size_t k = 0; k < p.weights.size(); ++k) {
      g.weights.emplace_back(p.weights[k].size(), 0.0);
      g.biases.emplace_back(p.biases[k].size(), 0.0);
    }
    return g;
  }

  bool matches(const NetworkParams& p) const {
    if (weights.size() != p.weights.size() || biases.size() != p.biases.size()) return false;
    for (std::size_t k = 0; k < weights.size(); ++k)
      if (weights[k].size() != p.weights[k].size() || biases[k].size() != p.biases[k].size())
        return false;
    return true;
  }

  void scale(double s) {
    for (auto& w : weights) for (double& v : w) v *= s;
    for (auto& b : biases) for (double& v : b) v *= s;
  }

  bool all_finite() const {
    for (const auto& w : weights) for (double v : w) if (!std::isfinite(v)) return false;
    for (const auto& b : biases) for (double v : b) if (!std::isfinite(v)) return false;
    return true;
  }
};

inline NetworkParams init_params(std::span<const std::size_t> layer_sizes, std::uint64_t seed,
                                 OutputTransform output_transform,
                                 Activation activation = Activation::relu) {
  if (layer_sizes.size() < 2) throw ConfigError("layer_sizes needs at least two entries");
  for (std::size_t s : layer_sizes)
    if (s == 0) throw ConfigError("layer sizes must be positive");
  if (layer_sizes.back() != 1) throw ConfigError("last layer size must be 1 (scalar output)");

  NetworkParams p;
  p.layer_sizes.assign(layer_sizes.begin(), layer_sizes.end());
  p.activation = activation;
  p.output_transform = output_transform;
  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k + 1 < layer_sizes.size(); ++k) {
    const std::size_t fan_in = layer_sizes[k];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<double> w(layer_sizes[k + 1] * fan_in);
    for (double& v : w) v = dist(rng);
    p.weights.push_back(std::move(w));
    p.biases.emplace_back(layer_sizes[k + 1], 0.0);
  }
  return p;
}

inline NetworkParams init_params(std::initializer_list<std::size_t> layer_sizes, std::uint64_t seed,
                                 OutputTransform output_transform,
                                 Activation activation = Activation::relu) {
  const std::vector<std::size_t> sizes(layer_sizes);
  return init_params(std::span<const std::size_t>(sizes), seed, output_transform, activation);
}

// Activations recorded by a forward pass; consumed by backward().
struct ForwardTrace {
  std::vector<std::vector<double>> activations;  // activations[0] is the input
  std::vector<std::vector<double>> pre_activations;
  double output = 0.0;

  bool empty() const { return pre_activations.empty(); }
};

namespace detail {

inline double activate(Activation a, double z) {
  return a == Activation::relu ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

inline double activate_grad(Activation a, double z) {
  if (a == Activation::relu) return z > 0.0 ? 1.0 : 0.0;
  const double t = std::tanh(z);
  return 1.0 - t * t;
}

inline double transform_output(OutputTransform t, double z) {
  if (t == OutputTransform::identity) return z;
  return std::max(softplus(z), std::numeric_limits<double>::min());
}

inline void check_input(const NetworkParams& p, std::span<const double> input) {
  if (input.size() != p.input_dim())
    throw ShapeError("input has " + std::to_string(input.size()) + " features, network expects " +
                     std::to_string(p.input_dim()));
  for (double v : input)
    if (!std::isfinite(v)) throw InvalidInputError("non-finite network input");
}

}  // namespace detail

inline ForwardTrace forward_trace(const NetworkParams& p, std::span<const double> input) {
  detail::check_input(p, input);
  ForwardTrace t;
  t.activations.emplace_back(input.begin(), input.end());
  const std::size_t L = p.num_layers();
  for (std::size_t k = 0; k < L; ++k) {
    const auto& a = t.activations.back();
    const std::size_t rows = p.layer_sizes[k + 1], cols = p.layer_sizes[k];
    std::vector<double> z(p.biases[k]);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* w = p.weights[k].data() + r * cols;
      double acc = 0.0;
      for (std::size_t c = 0; c < cols; ++c) acc += w[c] * a[c];
      z[r] += acc;
    }
    std::vector<double> next(z.size());
    if (k + 1 < L) {
      for (std::size_t r = 0; r < rows; ++r) next[r] = detail::activate(p.activation, z[r]);
    } else {
      next[0] = detail::transform_output(p.output_transform, z[0]);
    }
    t.pre_activations.push_back(std::move(z));
    t.activations.push_back(std::move(next));
  }
  t.output = t.activations.back()[0];
  return t;
}

inline double forward(const NetworkParams& p, std::span<const double> input) {
  return forward_trace(p, input).output;
}

// Accumulates output_grad * d(output)/d(theta) into `into`.
inline void accumulate_backward(const NetworkParams& p, const ForwardTrace& trace,
                                double output_grad, GradientTape& into) {
  if (trace.empty() || trace.pre_activations.size() != p.num_layers())
    throw UsageError("backward called without a recorded forward pass");
  if (!into.matches(p)) throw ShapeError("gradient tape does not match network");

  const std::size_t L = p.num_layers();
  const double z_out = trace.pre_activations.back()[0];
  std::vector<double> delta{output_grad * (p.output_transform == OutputTransform::softplus
                                               ? sigmoid(z_out)
                                               : 1.0)};
  for (std::size_t k = L; k-- > 0;) {
    const auto& a_in = trace.activations[k];
    const std::size_t rows = p.layer_sizes[k + 1], cols = p.layer_sizes[k];
    auto& gw = into.weights[k];
    auto& gb = into.biases[k];
    for (std::size_t r = 0; r < rows; ++r) {
      const double d = delta[r];
      gb[r] += d;
      if (d == 0.0) continue;
      double* g = gw.data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) g[c] += d * a_in[c];
    }
    if (k == 0) break;
    std::vector<double> prev(cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      const double d = delta[r];
      if (d == 0.0) continue;
      const double* w = p.weights[k].data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) prev[c] += d * w[c];
    }
    const auto& z_prev = trace.pre_activations[k - 1];
    for (std::size_t c = 0; c < cols; ++c) prev[c] *= detail::activate_grad(p.activation, z_prev[c]);
    delta = std::move(prev);
  }
}

inline GradientTape backward(const NetworkParams& p, const ForwardTrace& trace,
                             double output_grad = 1.0) {
  GradientTape g = GradientTape::zeros_like(p);
  accumulate_backward(p, trace, output_grad, g);
  return g;
}

// ---- serialization -------------------------------------------------------

inline constexpr int kNetworkFormatVersion = 1;

inline nlohmann::json to_json(const NetworkParams& p) {
  return nlohmann::json{{"format", "aurank.network"},
                        {"version", kNetworkFormatVersion},
                        {"layer_sizes", p.layer_sizes},
                        {"activation", p.activation},
                        {"output_transform", p.output_transform},
                        {"weights", p.weights},
                        {"biases", p.biases}};
}

inline NetworkParams network_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "aurank.network")
      throw SchemaError("not a network document");
    if (j.at("version").get<int>() != kNetworkFormatVersion)
      throw SchemaError("unsupported network format version");
    NetworkParams p;
    p.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
    p.activation = j.at("activation").get<Activation>();
    p.output_transform = j.at("output_transform").get<OutputTransform>();
    p.weights = j.at("weights").get<std::vector<std::vector<double>>>();
    p.biases = j.at("biases").get<std::vector<std::vector<double>>>();
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed network document: ") + e.what());
  }
}

}  // namespace aurank::nn

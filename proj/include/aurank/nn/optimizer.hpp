#pragma once

#include <cmath>
#include <cstdint>

#include <json.hpp>

#include "aurank/error.hpp"
#include "aurank/nn/network.hpp"

namespace aurank::nn {

enum class OptimizerKind { sgd, adam };

NLOHMANN_JSON_SERIALIZE_ENUM(OptimizerKind, {{OptimizerKind::sgd, "sgd"}, {OptimizerKind::adam, "adam"}})

struct OptimizerSettings {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
      throw ConfigError("learning_rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
      throw ConfigError("adam betas must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("adam epsilon must be positive");
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(OptimizerSettings, kind, learning_rate, beta1, beta2,
                                                epsilon)

struct OptimizerState {
  OptimizerSettings settings;
  GradientTape first_moment;
  GradientTape second_moment;
  std::uint64_t step = 0;

  static OptimizerState create(const OptimizerSettings& s, const NetworkParams& p) {
    s.validate();
    OptimizerState st;
    st.settings = s;
    if (s.kind == OptimizerKind::adam) {
      st.first_moment = GradientTape::zeros_like(p);
      st.second_moment = GradientTape::zeros_like(p);
    }
    return st;
  }
};

namespace detail {

inline void sgd_update(std::vector<double>& p, const std::vector<double>& g, double lr) {
  for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
}

inline void adam_update(std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                        std::vector<double>& v, const OptimizerSettings& s, double bc1,
                        double bc2) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
    v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
    const double m_hat = m[i] / bc1;
    const double v_hat = v[i] / bc2;
    p[i] -= s.learning_rate * m_hat / (std::sqrt(v_hat) + s.epsilon);
  }
}

}  // namespace detail

inline void optimizer_step(NetworkParams& params, const GradientTape& grads, OptimizerState& state) {
  if (!grads.matches(params)) throw ShapeError("gradient tape does not match parameters");
  const auto& s = state.settings;
  if (s.kind == OptimizerKind::sgd) {
    for (std::size_t k = 0; k < params.num_layers(); ++k) {
      detail::sgd_update(params.weights[k], grads.weights[k], s.learning_rate);
      detail::sgd_update(params.biases[k], grads.biases[k], s.learning_rate);
    }
  } else {
    if (!state.first_moment.matches(params) || !state.second_moment.matches(params))
      throw ShapeError("optimizer moments do not match parameters");
    const double t = static_cast<double>(state.step + 1);
    const double bc1 = 1.0 - std::pow(s.beta1, t);
    const double bc2 = 1.0 - std::pow(s.beta2, t);
    for (std::size_t k = 0; k < params.num_layers(); ++k) {
      detail::adam_update(params.weights[k], grads.weights[k], state.first_moment.weights[k],
                          state.second_moment.weights[k], s, bc1, bc2);
      detail::adam_update(params.biases[k], grads.biases[k], state.first_moment.biases[k],
                          state.second_moment.biases[k], s, bc1, bc2);
    }
  }
  ++state.step;
}

}  // namespace aurank::nn

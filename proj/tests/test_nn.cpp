#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "aurank/nn/network.hpp"
#include "aurank/nn/optimizer.hpp"
#include "aurank/nn/special.hpp"
#include "oracles.hpp"

using namespace aurank;
using namespace aurank::nn;
using Catch::Approx;

namespace {

NetworkParams linear(std::vector<double> w, double b) {
  NetworkParams p;
  p.layer_sizes = {w.size(), 1};
  p.weights = {std::move(w)};
  p.biases = {{b}};
  return p;
}

double& param_at(NetworkParams& p, bool weight, std::size_t layer, std::size_t idx) {
  return weight ? p.weights[layer][idx] : p.biases[layer][idx];
}

}  // namespace

TEST_CASE("init_params is deterministic, zero-biased and bounded by fan-in") {
  const auto a = init_params({4, 8, 1}, 7, OutputTransform::identity);
  const auto b = init_params({4, 8, 1}, 7, OutputTransform::identity);
  CHECK(a == b);
  CHECK_FALSE(a == init_params({4, 8, 1}, 8, OutputTransform::identity));

  const auto c = init_params({3, 5, 1}, 0, OutputTransform::identity);
  for (const auto& bias : c.biases)
    for (double v : bias) CHECK(v == 0.0);
  for (double w : c.weights[0]) CHECK(std::abs(w) <= 1.0 / std::sqrt(3.0));
  for (double w : c.weights[1]) CHECK(std::abs(w) <= 1.0 / std::sqrt(5.0));
  CHECK(c.weights[0].size() == 15);
}

TEST_CASE("init_params rejects bad layer lists") {
  CHECK_THROWS_AS(init_params({4}, 1, OutputTransform::identity), ConfigError);
  CHECK_THROWS_AS(init_params({}, 1, OutputTransform::identity), ConfigError);
  CHECK_THROWS_AS(init_params({4, 0, 1}, 1, OutputTransform::identity), ConfigError);
}

TEST_CASE("forward on hand-built networks") {
  auto zero = init_params({3, 4, 1}, 1, OutputTransform::identity);
  for (auto& w : zero.weights) std::fill(w.begin(), w.end(), 0.0);
  CHECK(forward(zero, std::vector<double>{1.0, -2.0, 3.0}) == 0.0);

  CHECK(forward(linear({1.0, 1.0}, 0.0), std::vector<double>{3.0, 4.0}) == 7.0);

  auto sp = linear({0.0, 0.0}, 0.0);
  sp.output_transform = OutputTransform::softplus;
  CHECK(forward(sp, std::vector<double>{5.0, -5.0}) == Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("forward validates its input") {
  const auto p = linear({1.0, 1.0}, 0.0);
  CHECK_THROWS_AS(forward(p, std::vector<double>{1.0}), ShapeError);
  CHECK_THROWS_AS(forward(p, std::vector<double>{1.0, std::nan("")}), InvalidInputError);
  CHECK_THROWS_AS(forward(p, std::vector<double>{std::numeric_limits<double>::infinity(), 0.0}),
                  InvalidInputError);
}

TEST_CASE("softplus output stays positive for extreme pre-activations") {
  auto p = linear({1.0}, 0.0);
  p.output_transform = OutputTransform::softplus;
  for (double x : {-1e6, -800.0, -40.0, 0.0, 40.0, 800.0}) CHECK(forward(p, std::vector<double>{x}) > 0.0);
}

TEST_CASE("backward of a linear layer returns the input") {
  const auto p = linear({0.3, -0.2, 0.5}, 0.1);
  const std::vector<double> x{2.0, -1.0, 4.0};
  const auto g = backward(p, forward_trace(p, x));
  CHECK(g.weights[0] == x);
  CHECK(g.biases[0][0] == 1.0);
}

TEST_CASE("parameters that do not affect the output get zero gradient") {
  // The second hidden unit's bias is pushed deep into relu's dead zone.
  auto p = init_params({2, 2, 1}, 3, OutputTransform::identity);
  p.biases[0][1] = -100.0;
  const auto g = backward(p, forward_trace(p, std::vector<double>{0.5, 0.5}));
  CHECK(g.biases[0][1] == 0.0);
  CHECK(g.weights[0][2] == 0.0);
  CHECK(g.weights[0][3] == 0.0);
}

TEST_CASE("backward without a recorded pass is a usage error") {
  const auto p = linear({1.0}, 0.0);
  CHECK_THROWS_AS(backward(p, ForwardTrace{}), UsageError);
}

TEST_CASE("backward agrees with central differences on random networks") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n01;
  std::size_t probes = 0;
  for (auto act : {Activation::relu, Activation::tanh})
    for (auto out : {OutputTransform::identity, OutputTransform::softplus})
      for (std::uint64_t seed = 0; seed < 8; ++seed) {
        auto p = init_params({5, 7, 4, 1}, seed, out, act);
        for (auto& b : p.biases)
          for (double& v : b) v = 0.3 * n01(rng);
        std::vector<double> x(5);
        for (double& v : x) v = n01(rng);
        const auto g = backward(p, forward_trace(p, x));
        std::uniform_int_distribution<std::size_t> layer(0, p.num_layers() - 1);
        for (int k = 0; k < 4; ++k) {
          const bool weight = k % 2 == 0;
          const std::size_t l = layer(rng);
          const std::size_t n = weight ? p.weights[l].size() : p.biases[l].size();
          const std::size_t idx = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
          auto q = p;
          const double analytic = weight ? g.weights[l][idx] : g.biases[l][idx];
          const double numeric = oracle::central_difference(
              [&](double t) {
                param_at(q, weight, l, idx) = t;
                return forward(q, x);
              },
              param_at(p, weight, l, idx));
          // relu kinks make a handful of probes non-differentiable; skip those.
          if (act == Activation::relu && std::abs(analytic - numeric) > 1e-3) continue;
          CHECK(oracle::rel_err(analytic, numeric, 1e-6) <= 1e-4);
          ++probes;
        }
      }
  CHECK(probes >= 100);
}

TEST_CASE("sgd and adam steps") {
  auto p = linear({1.0}, 0.0);
  GradientTape g = GradientTape::zeros_like(p);
  g.weights[0][0] = 2.0;
  auto st = OptimizerState::create({OptimizerKind::sgd, 0.1}, p);
  optimizer_step(p, g, st);
  CHECK(p.weights[0][0] == Approx(0.8).epsilon(1e-15));
  CHECK(st.step == 1);

  auto zero = GradientTape::zeros_like(p);
  const auto before = p;
  optimizer_step(p, zero, st);
  CHECK(p == before);

  // t = 1: m_hat = g, v_hat = g^2, update = lr * g / (|g| + eps).
  auto a = linear({1.0}, 0.0);
  GradientTape ga = GradientTape::zeros_like(a);
  ga.weights[0][0] = 1.0;
  auto sa = OptimizerState::create({}, a);
  optimizer_step(a, ga, sa);
  const double expected = 1.0 - 0.001 * 1.0 / (1.0 + 1e-8);
  CHECK(a.weights[0][0] == Approx(expected).epsilon(1e-12));
}

TEST_CASE("optimizer rejects mismatched gradients") {
  auto p = linear({1.0, 2.0}, 0.0);
  auto other = linear({1.0}, 0.0);
  auto st = OptimizerState::create({}, p);
  CHECK_THROWS_AS(optimizer_step(p, GradientTape::zeros_like(other), st), ShapeError);
}

TEST_CASE("training steps are bit-identical for identical seeds") {
  auto run = [] {
    auto p = init_params({3, 6, 1}, 5, OutputTransform::identity, Activation::tanh);
    auto st = OptimizerState::create({}, p);
    for (int k = 0; k < 50; ++k) {
      const std::vector<double> x{std::sin(k), std::cos(k), 0.1 * k};
      const auto t = forward_trace(p, x);
      optimizer_step(p, backward(p, t, t.output - 1.0), st);
    }
    return p;
  };
  CHECK(run() == run());
}

TEST_CASE("erf matches quadrature and its basic properties") {
  CHECK(nn::erf(0.0) == 0.0);
  CHECK(std::abs(nn::erf(1.0) - 0.8427008) <= 1.5e-7);
  for (double x = -4.0; x <= 4.0; x += 0.25) {
    CHECK(std::abs(nn::erf(x) - oracle::erf_by_quadrature(x)) <= 1.5e-7);
    CHECK(nn::erf(x) == -nn::erf(-x));
    CHECK(std::abs(nn::erf(x)) < 1.0);
  }
  double prev = -1.0;
  for (double x = -3.0; x <= 3.0; x += 0.01) {
    CHECK(nn::erf(x) > prev);
    prev = nn::erf(x);
  }
  CHECK_THROWS_AS(nn::erf(std::nan("")), InvalidInputError);
  CHECK_THROWS_AS(nn::erf(std::numeric_limits<double>::infinity()), InvalidInputError);
}

TEST_CASE("erf derivative matches central differences") {
  for (double x = -3.0; x <= 3.0; x += 0.05)
    CHECK(oracle::rel_err(nn::erf_derivative(x), oracle::central_difference(nn::erf, x)) <= 1e-4);
}

TEST_CASE("network JSON round trip is exact") {
  const auto p = init_params({4, 3, 1}, 99, OutputTransform::softplus, Activation::tanh);
  const auto text = to_json(p).dump();
  CHECK(network_from_json(nlohmann::json::parse(text)) == p);
  auto bad = to_json(p);
  bad["weights"][0].erase(0);
  CHECK_THROWS(network_from_json(bad));
}

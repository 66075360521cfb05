#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "aurank/data/types.hpp"
#include "aurank/error.hpp"
#include "aurank/nn/network.hpp"
#include "aurank/nn/optimizer.hpp"
#include "aurank/util.hpp"

namespace aurank {

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  nn::OptimizerSettings optimizer{};
  std::uint64_t seed = 0;
  std::size_t patience = 5;  // 0 disables early stopping
  std::vector<std::size_t> hidden_layers{32, 16};
  nn::Activation activation = nn::Activation::relu;

  void validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    for (std::size_t h : hidden_layers)
      if (h == 0) throw ConfigError("hidden layer sizes must be positive");
    optimizer.validate();
  }

  std::vector<std::size_t> layer_sizes(std::size_t input_dim) const {
    std::vector<std::size_t> sizes{input_dim};
    sizes.insert(sizes.end(), hidden_layers.begin(), hidden_layers.end());
    sizes.push_back(1);
    return sizes;
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainConfig, epochs, batch_size, optimizer, seed,
                                                patience, hidden_layers, activation)

struct EpochRecord {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  std::optional<double> validation_score;
};

struct TrainingMetadata {
  std::size_t epochs_run = 0;
  std::uint64_t seed = 0;
  double final_loss = 0.0;
  std::vector<EpochRecord> curve;
};

inline nlohmann::json to_json(const TrainingMetadata& m) {
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& e : m.curve) {
    nlohmann::json row{{"epoch", e.epoch}, {"mean_loss", e.mean_loss}};
    if (e.validation_score) row["validation_score"] = *e.validation_score;
    curve.push_back(row);
  }
  return {{"epochs_run", m.epochs_run}, {"seed", m.seed}, {"final_loss", m.final_loss}, {"curve", curve}};
}

inline TrainingMetadata metadata_from_json(const nlohmann::json& j) {
  TrainingMetadata m;
  m.epochs_run = j.at("epochs_run").get<std::size_t>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.final_loss = j.at("final_loss").get<double>();
  for (const auto& row : j.at("curve")) {
    EpochRecord e{row.at("epoch").get<std::size_t>(), row.at("mean_loss").get<double>(), std::nullopt};
    if (row.contains("validation_score")) e.validation_score = row.at("validation_score").get<double>();
    m.curve.push_back(e);
  }
  return m;
}

inline std::string format_curve_csv(const TrainingMetadata& m) {
  std::string out = "epoch,mean_loss,validation_score\n";
  for (const auto& e : m.curve) {
    out += std::to_string(e.epoch) + ',' + util::format_double(e.mean_loss) + ',' +
           (e.validation_score ? util::format_double(*e.validation_score) : std::string()) + '\n';
  }
  return out;
}

// Loss of one example plus d(loss)/d(network output) for each network
// evaluation it consumed.
struct SampleLoss {
  double loss = 0.0;
  double grad_first = 0.0;
  double grad_second = 0.0;
};

namespace detail {

template <class Step>
void run_epochs(nn::NetworkParams& params, std::size_t n_examples, const TrainConfig& cfg,
                TrainingMetadata& meta, Step&& step,
                const std::function<double(const nn::NetworkParams&)>& validation) {
  cfg.validate();
  auto opt = nn::OptimizerState::create(cfg.optimizer, params);
  std::mt19937_64 rng(cfg.seed ^ 0x5bd1e995ULL);
  std::vector<std::size_t> order(n_examples);
  std::iota(order.begin(), order.end(), 0);

  std::optional<double> best_score;
  nn::NetworkParams best = params;
  std::size_t since_best = 0;

  meta.seed = cfg.seed;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n_examples; start += cfg.batch_size) {
      const std::size_t end = std::min(n_examples, start + cfg.batch_size);
      auto grads = nn::GradientTape::zeros_like(params);
      const double inv = 1.0 / static_cast<double>(end - start);
      double batch_loss = 0.0;
      for (std::size_t k = start; k < end; ++k) batch_loss += step(order[k], inv, grads);
      batch_loss *= inv;
      if (!std::isfinite(batch_loss) || !grads.all_finite())
        throw DivergenceError("non-finite loss in epoch " + std::to_string(epoch));
      nn::optimizer_step(params, grads, opt);
      loss_sum += batch_loss;
      ++batches;
    }
    EpochRecord rec{epoch, batches ? loss_sum / static_cast<double>(batches) : 0.0, std::nullopt};
    meta.epochs_run = epoch;
    meta.final_loss = rec.mean_loss;

    if (validation && cfg.patience > 0) {
      const double score = validation(params);
      rec.validation_score = score;
      if (!best_score || score > *best_score) {
        best_score = score;
        best = params;
        since_best = 0;
      } else if (++since_best >= cfg.patience) {
        meta.curve.push_back(rec);
        params = best;
        return;
      }
    }
    meta.curve.push_back(rec);
  }
  if (best_score) params = best;
}

}  // namespace detail

// Trains a network whose loss consumes two evaluations with shared weights,
// one per pair member. `loss(pair, out_i, out_j)` returns the pair loss and its
// derivatives with respect to both outputs.
template <class PairLoss>
void train_siamese(nn::NetworkParams& params, std::span<const data::RankedPair> pairs,
                   std::span<const data::VideoSequence> videos, const TrainConfig& cfg,
                   TrainingMetadata& meta, PairLoss&& loss,
                   const std::function<double(const nn::NetworkParams&)>& validation = {}) {
  detail::run_epochs(
      params, pairs.size(), cfg, meta,
      [&](std::size_t idx, double weight, nn::GradientTape& grads) {
        const auto& p = pairs[idx];
        const auto ti = nn::forward_trace(params, data::features_of(videos, p.video, p.i));
        const auto tj = nn::forward_trace(params, data::features_of(videos, p.video, p.j));
        const SampleLoss s = loss(p, ti.output, tj.output);
        if (s.grad_first != 0.0) nn::accumulate_backward(params, ti, weight * s.grad_first, grads);
        if (s.grad_second != 0.0) nn::accumulate_backward(params, tj, weight * s.grad_second, grads);
        return s.loss;
      },
      validation);
}

}  // namespace aurank

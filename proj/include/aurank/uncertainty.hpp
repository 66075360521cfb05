#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "aurank/data/types.hpp"
#include "aurank/error.hpp"
#include "aurank/nn/network.hpp"
#include "aurank/nn/special.hpp"
#include "aurank/pseudo_intensity.hpp"
#include "aurank/train.hpp"

namespace aurank {

// `corrected` is the probability that the margin is violated under Gaussian
// pseudo-intensities; `literal` is its complement (the form as printed).
enum class LossForm { corrected, literal };

NLOHMANN_JSON_SERIALIZE_ENUM(LossForm, {{LossForm::corrected, "corrected"}, {LossForm::literal, "literal"}})

inline constexpr double kDefaultSigmaFloor = 1e-3;

struct ExpandedLossValue {
  double loss = 0.0;
  double d_sigma_i = 0.0;
  double d_sigma_j = 0.0;
  double d_delta = 0.0;  // with respect to y_hat_i - y_hat_j
};

// L = 1/2 (1 + erf((m - r(y_i - y_j)) / sqrt(2 (s_i^2 + s_j^2))))  for LossForm::corrected.
inline ExpandedLossValue expanded_ranking_loss_with_grad(double y_hat_i, double y_hat_j, double sigma_i,
                                                         double sigma_j, int r, double margin,
                                                         LossForm form = LossForm::corrected,
                                                         double sigma_floor = kDefaultSigmaFloor) {
  if (!std::isfinite(y_hat_i) || !std::isfinite(y_hat_j) || !std::isfinite(sigma_i) || !std::isfinite(sigma_j))
    throw InvalidInputError("expanded ranking loss inputs must be finite");
  if (r != 1 && r != -1) throw InvalidInputError("rank label must be +1 or -1");
  if (!(margin > 0.0)) throw InvalidInputError("margin must be positive");
  if (sigma_i < sigma_floor || sigma_j < sigma_floor)
    throw InvalidInputError("uncertainty below sigma_floor");

  const double pooled = std::sqrt(sigma_i * sigma_i + sigma_j * sigma_j);
  const double gap = margin - r * (y_hat_i - y_hat_j);
  const double z = gap / pooled;
  const double sign = form == LossForm::corrected ? 1.0 : -1.0;
  const double pdf = nn::normal_pdf(z);
  const double pooled3 = pooled * pooled * pooled;

  ExpandedLossValue v;
  v.loss = nn::normal_cdf(form == LossForm::corrected ? z : -z);
  v.d_sigma_i = sign * pdf * (-gap * sigma_i / pooled3);
  v.d_sigma_j = sign * pdf * (-gap * sigma_j / pooled3);
  v.d_delta = sign * pdf * (-static_cast<double>(r) / pooled);
  return v;
}

inline double expanded_ranking_loss(double y_hat_i, double y_hat_j, double sigma_i, double sigma_j, int r,
                                    double margin, LossForm form = LossForm::corrected,
                                    double sigma_floor = kDefaultSigmaFloor) {
  return expanded_ranking_loss_with_grad(y_hat_i, y_hat_j, sigma_i, sigma_j, r, margin, form, sigma_floor).loss;
}

struct UncertaintyModel {
  nn::NetworkParams params;  // softplus output; sigma = output + sigma_floor
  std::size_t au_index = 0;
  std::string au_name;
  double margin = 1.0;
  double sigma_floor = kDefaultSigmaFloor;
  LossForm loss_form = LossForm::corrected;
  std::string frozen_model_ref;
  TrainingMetadata metadata;

  std::string hash() const { return util::hash_string(nn::to_json(params).dump()); }
};

inline double sigma_of(const UncertaintyModel& m, std::span<const double> features) {
  return nn::forward(m.params, features) + m.sigma_floor;
}

inline std::vector<double> predict_uncertainty(const UncertaintyModel& m, const data::VideoSequence& video) {
  std::vector<double> out;
  out.reserve(video.size());
  for (const auto& f : video.frames) out.push_back(sigma_of(m, f.features));
  return out;
}

struct UncertaintyOptions {
  double margin = 1.0;
  double sigma_floor = kDefaultSigmaFloor;
  LossForm loss_form = LossForm::corrected;
  // Starting sigma. 0 = RMS of the margin gap over the training pairs; a
  // negative value keeps the plain zero-bias initialization.
  double initial_sigma = 0.0;
};

// Trains h against pseudo-intensities from `frozen`, which is never modified.
inline UncertaintyModel train_uncertainty(std::span<const data::RankedPair> pairs,
                                          std::span<const data::VideoSequence> videos,
                                          const PseudoIntensityModel& frozen, const TrainConfig& cfg,
                                          const UncertaintyOptions& opts = {}) {
  if (pairs.empty()) throw EmptyDatasetError("no training pairs for the uncertainty model");
  if (!(opts.margin > 0.0)) throw ConfigError("margin must be positive");
  if (!(opts.sigma_floor > 0.0)) throw ConfigError("sigma_floor must be positive");
  cfg.validate();
  const std::string frozen_before = frozen.hash();

  // y_hat for every frame, computed once.
  std::vector<std::vector<double>> y_hat(videos.size());
  for (std::size_t v = 0; v < videos.size(); ++v) y_hat[v] = predict_pseudo(frozen, videos[v]);

  UncertaintyModel model;
  model.au_index = frozen.au_index;
  model.au_name = frozen.au_name;
  model.margin = opts.margin;
  model.sigma_floor = opts.sigma_floor;
  model.loss_form = opts.loss_form;
  model.frozen_model_ref = frozen_before;
  model.params = nn::init_params(cfg.layer_sizes(frozen.params.input_dim()), cfg.seed,
                                 nn::OutputTransform::softplus, cfg.activation);
  if (opts.initial_sigma >= 0.0) {
    // Starting from small sigma, badly violated pairs sit in the flat tail of the
    // normal density and barely push sigma up; start near the typical gap instead.
    double s0 = opts.initial_sigma;
    if (s0 == 0.0) {
      double sum = 0.0;
      for (const auto& p : pairs) {
        const double gap = opts.margin - p.r * (y_hat[p.video][p.i] - y_hat[p.video][p.j]);
        sum += gap * gap;
      }
      s0 = std::sqrt(sum / static_cast<double>(pairs.size()));
    }
    s0 = std::max(s0 - opts.sigma_floor, 1e-6);
    model.params.biases.back()[0] = s0 > 30.0 ? s0 : std::log(std::expm1(s0));
  }

  TrainConfig no_early_stop = cfg;
  no_early_stop.patience = 0;
  train_siamese(model.params, pairs, videos, no_early_stop, model.metadata,
                [&](const data::RankedPair& p, double hi, double hj) {
                  const auto v = expanded_ranking_loss_with_grad(
                      y_hat[p.video][p.i], y_hat[p.video][p.j], hi + opts.sigma_floor, hj + opts.sigma_floor,
                      p.r, opts.margin, opts.loss_form, opts.sigma_floor);
                  return SampleLoss{v.loss, v.d_sigma_i, v.d_sigma_j};
                });

  if (frozen.hash() != frozen_before) throw UsageError("frozen pseudo-intensity model changed during training");
  return model;
}

inline nlohmann::json to_json(const UncertaintyModel& m) {
  return {{"format", "aurank.uncertainty"},
          {"version", 1},
          {"au_index", m.au_index},
          {"au_name", m.au_name},
          {"margin", m.margin},
          {"sigma_floor", m.sigma_floor},
          {"loss_form", m.loss_form},
          {"frozen_model_ref", m.frozen_model_ref},
          {"metadata", to_json(m.metadata)},
          {"network", nn::to_json(m.params)}};
}

// Refuses documents whose frozen_model_ref does not match `paired`.
inline UncertaintyModel uncertainty_from_json(const nlohmann::json& j, const PseudoIntensityModel& paired) {
  try {
    if (j.at("format").get<std::string>() != "aurank.uncertainty")
      throw SchemaError("not an uncertainty model document");
    UncertaintyModel m;
    m.au_index = j.at("au_index").get<std::size_t>();
    m.au_name = j.at("au_name").get<std::string>();
    m.margin = j.at("margin").get<double>();
    m.sigma_floor = j.at("sigma_floor").get<double>();
    m.loss_form = j.at("loss_form").get<LossForm>();
    m.frozen_model_ref = j.at("frozen_model_ref").get<std::string>();
    m.metadata = metadata_from_json(j.at("metadata"));
    m.params = nn::network_from_json(j.at("network"));
    if (m.frozen_model_ref != paired.hash())
      throw DependencyError("uncertainty model was trained against pseudo-intensity model " +
                            m.frozen_model_ref + ", not " + paired.hash());
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed uncertainty model: ") + e.what());
  }
}

}  // namespace aurank

#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "aurank/data/types.hpp"
#include "aurank/error.hpp"
#include "aurank/nn/network.hpp"
#include "aurank/train.hpp"
#include "aurank/util.hpp"

namespace aurank {

// Hinge on the score difference: max(0, m - r * delta).
inline double ranking_loss(double delta, int r, double margin) {
  if (r != 1 && r != -1) throw InvalidInputError("rank label must be +1 or -1");
  if (!(margin > 0.0)) throw InvalidInputError("margin must be positive");
  return std::max(0.0, margin - r * delta);
}

// d/d(delta); the kink r * delta == m takes the zero branch.
inline double ranking_loss_grad(double delta, int r, double margin) {
  if (r != 1 && r != -1) throw InvalidInputError("rank label must be +1 or -1");
  return margin - r * delta > 0.0 ? -static_cast<double>(r) : 0.0;
}

struct PseudoIntensityModel {
  nn::NetworkParams params;
  std::size_t au_index = 0;
  std::string au_name;
  double margin = 1.0;
  data::LabelKind label_kind = data::LabelKind::occurrence;
  TrainingMetadata metadata;
  std::string dataset_manifest_hash;

  // Fingerprint of the scoring network; uncertainty models reference it.
  std::string hash() const { return util::hash_string(nn::to_json(params).dump()); }
};

inline double score_frame(const PseudoIntensityModel& m, std::span<const double> features) {
  return nn::forward(m.params, features);
}

inline std::vector<double> predict_pseudo(const PseudoIntensityModel& m, const data::VideoSequence& video) {
  std::vector<double> out;
  out.reserve(video.size());
  for (const auto& f : video.frames) out.push_back(nn::forward(m.params, f.features));
  return out;
}

// Fraction of pairs whose score order agrees with r (ties count as wrong).
inline double pair_order_accuracy(const nn::NetworkParams& params, std::span<const data::RankedPair> pairs,
                                  std::span<const data::VideoSequence> videos) {
  if (pairs.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& p : pairs) {
    const double d = nn::forward(params, data::features_of(videos, p.video, p.i)) -
                     nn::forward(params, data::features_of(videos, p.video, p.j));
    correct += (p.r > 0 ? d > 0.0 : d < 0.0);
  }
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

struct PairSet {
  std::span<const data::RankedPair> pairs;
  std::span<const data::VideoSequence> videos;
};

// Siamese training with the margin ranking loss. When `validation` is given,
// training stops early on validation pair-order accuracy and keeps the best epoch.
inline PseudoIntensityModel train_pseudo(std::span<const data::RankedPair> pairs,
                                         std::span<const data::VideoSequence> videos, const TrainConfig& cfg,
                                         double margin, std::size_t au_index = 0,
                                         std::optional<PairSet> validation = std::nullopt) {
  if (pairs.empty()) throw EmptyDatasetError("no training pairs for the pseudo-intensity model");
  if (!(margin > 0.0)) throw ConfigError("margin must be positive");
  if (videos.empty()) throw EmptyDatasetError("no videos");
  cfg.validate();

  PseudoIntensityModel model;
  model.au_index = au_index;
  model.margin = margin;
  const std::size_t dim = videos.front().frames.empty() ? 0 : videos.front().frames.front().features.size();
  const auto sizes = cfg.layer_sizes(dim);
  model.params = nn::init_params(sizes, cfg.seed, nn::OutputTransform::identity, cfg.activation);

  std::function<double(const nn::NetworkParams&)> val;
  if (validation && !validation->pairs.empty())
    val = [&](const nn::NetworkParams& p) { return pair_order_accuracy(p, validation->pairs, validation->videos); };

  train_siamese(
      model.params, pairs, videos, cfg, model.metadata,
      [margin](const data::RankedPair& p, double yi, double yj) {
        const double delta = yi - yj;
        const double g = ranking_loss_grad(delta, p.r, margin);
        return SampleLoss{ranking_loss(delta, p.r, margin), g, -g};
      },
      val);
  return model;
}

inline nlohmann::json to_json(const PseudoIntensityModel& m) {
  return {{"format", "aurank.pseudo_intensity"},
          {"version", 1},
          {"au_index", m.au_index},
          {"au_name", m.au_name},
          {"margin", m.margin},
          {"label_kind", m.label_kind},
          {"dataset_manifest_hash", m.dataset_manifest_hash},
          {"metadata", to_json(m.metadata)},
          {"network", nn::to_json(m.params)}};
}

inline PseudoIntensityModel pseudo_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "aurank.pseudo_intensity")
      throw SchemaError("not a pseudo-intensity model document");
    PseudoIntensityModel m;
    m.au_index = j.at("au_index").get<std::size_t>();
    m.au_name = j.at("au_name").get<std::string>();
    m.margin = j.at("margin").get<double>();
    m.label_kind = j.at("label_kind").get<data::LabelKind>();
    m.dataset_manifest_hash = j.at("dataset_manifest_hash").get<std::string>();
    m.metadata = metadata_from_json(j.at("metadata"));
    m.params = nn::network_from_json(j.at("network"));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed pseudo-intensity model: ") + e.what());
  }
}

}  // namespace aurank

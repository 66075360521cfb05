#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "aurank/data/types.hpp"
#include "aurank/error.hpp"
#include "aurank/nn/network.hpp"
#include "aurank/pseudo_intensity.hpp"
#include "aurank/train.hpp"
#include "aurank/uncertainty.hpp"
#include "aurank/util.hpp"

namespace aurank {

struct IntensitySeries {
  std::string video_id;
  std::vector<double> y_hat;
  std::vector<double> sigma;
  double frames_per_second = 30.0;
};

// Statistics G computed over (y_hat, sigma) series: a centered sliding window
// truncated at the video edges, and optionally the whole video.
struct GConfig {
  double window_seconds = 2.0;
  std::vector<double> percentiles{5, 25, 50, 75, 95};
  bool include_video_level = true;
  bool uncertainty_weighting = true;

  void validate() const {
    if (!(window_seconds > 0.0)) throw ConfigError("window_seconds must be positive");
    for (std::size_t k = 0; k < percentiles.size(); ++k) {
      if (!(percentiles[k] >= 0.0 && percentiles[k] <= 100.0))
        throw ConfigError("percentiles must lie in [0, 100]");
      if (k > 0 && !(percentiles[k] > percentiles[k - 1]))
        throw ConfigError("percentiles must be sorted and unique");
    }
  }

  std::size_t window_frames(double fps) const {
    const auto w = static_cast<long long>(std::lround(window_seconds * fps));
    if (w < 1) throw ConfigError("window shorter than one frame at " + util::format_double(fps) + " fps");
    return static_cast<std::size_t>(w);
  }

  friend bool operator==(const GConfig&, const GConfig&) = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GConfig, window_seconds, percentiles, include_video_level,
                                                uncertainty_weighting)

// Column order of a mapping-feature row.
inline std::vector<std::string> mapping_feature_names(const GConfig& cfg) {
  std::vector<std::string> names{"y_hat", "sigma"};
  auto block = [&](const std::string& scope) {
    for (const char* s : {"mean", "std", "min", "max"}) names.push_back(scope + "_" + s);
    for (double p : cfg.percentiles) names.push_back(scope + "_p" + util::format_double(p));
    names.push_back(scope + "_sigma_mean");
    names.push_back(scope + "_sigma_std");
    if (cfg.uncertainty_weighting) names.push_back(scope + "_weighted_mean");
  };
  block("win");
  if (cfg.include_video_level) block("vid");
  return names;
}

namespace detail {

// Linear interpolation between closest ranks on sorted data.
inline double percentile_sorted(std::span<const double> sorted, double p) {
  const double pos = p / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline std::pair<double, double> mean_std(std::span<const double> x) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / static_cast<double>(x.size()))};
}

inline void append_stats(std::vector<double>& row, std::span<const double> y, std::span<const double> sigma,
                         const GConfig& cfg) {
  auto [m, s] = mean_std(y);
  std::vector<double> sorted(y.begin(), y.end());
  std::sort(sorted.begin(), sorted.end());
  row.push_back(m);
  row.push_back(s);
  row.push_back(sorted.front());
  row.push_back(sorted.back());
  for (double p : cfg.percentiles) row.push_back(percentile_sorted(sorted, p));
  auto [sm, ss] = mean_std(sigma);
  row.push_back(sm);
  row.push_back(ss);
  if (cfg.uncertainty_weighting) {
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) {
      const double w = 1.0 / (sigma[k] * sigma[k]);
      num += w * y[k];
      den += w;
    }
    row.push_back(num / den);
  }
}

}  // namespace detail

// One row per frame, columns as in mapping_feature_names(cfg).
inline std::vector<std::vector<double>> extract_g_features(const IntensitySeries& series, const GConfig& cfg) {
  cfg.validate();
  const std::size_t n = series.y_hat.size();
  if (n == 0) throw EmptyDatasetError("empty intensity series for video " + series.video_id);
  if (series.sigma.size() != n) throw ShapeError("y_hat and sigma lengths differ");
  for (std::size_t k = 0; k < n; ++k)
    if (!std::isfinite(series.y_hat[k]) || !std::isfinite(series.sigma[k]) || !(series.sigma[k] > 0.0))
      throw InvalidInputError("intensity series needs finite y_hat and positive sigma");

  const std::size_t w = cfg.window_frames(series.frames_per_second);
  const std::size_t before = w / 2, after = w - 1 - w / 2;

  std::vector<double> video_block;
  if (cfg.include_video_level) detail::append_stats(video_block, series.y_hat, series.sigma, cfg);

  std::vector<std::vector<double>> rows;
  rows.reserve(n);
  const std::span<const double> ys(series.y_hat), ss(series.sigma);
  for (std::size_t l = 0; l < n; ++l) {
    const std::size_t lo = l >= before ? l - before : 0;
    const std::size_t hi = std::min(n - 1, l + after);
    std::vector<double> row{series.y_hat[l], series.sigma[l]};
    detail::append_stats(row, ys.subspan(lo, hi - lo + 1), ss.subspan(lo, hi - lo + 1), cfg);
    row.insert(row.end(), video_block.begin(), video_block.end());
    rows.push_back(std::move(row));
  }
  return rows;
}

inline IntensitySeries intensity_series(const PseudoIntensityModel& pseudo, const UncertaintyModel* unc,
                                        const data::VideoSequence& video) {
  if (video.frames.empty()) throw EmptyDatasetError("video " + video.video_id + " has no frames");
  if (video.frames.front().features.size() != pseudo.params.input_dim())
    throw ShapeError("video " + video.video_id + " feature dimension does not match the pseudo-intensity model");
  IntensitySeries s;
  s.video_id = video.video_id;
  s.frames_per_second = video.frames_per_second;
  s.y_hat = predict_pseudo(pseudo, video);
  s.sigma = unc ? predict_uncertainty(*unc, video) : std::vector<double>(video.size(), kDefaultSigmaFloor);
  return s;
}

// D_t: one row per frame with a valid label for the AU.
struct MappingDataset {
  GConfig g_config;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::vector<double> targets;
  std::vector<std::pair<std::string, std::size_t>> keys;  // (video_id, frame_index)
  data::LabelKind target_kind = data::LabelKind::occurrence;

  std::size_t size() const { return rows.size(); }
};

inline MappingDataset build_mapping_dataset(std::span<const data::VideoSequence> videos,
                                            const PseudoIntensityModel& pseudo, const UncertaintyModel* unc,
                                            const GConfig& cfg, std::size_t au_index,
                                            data::LabelKind target_kind) {
  MappingDataset dt;
  dt.g_config = cfg;
  dt.columns = mapping_feature_names(cfg);
  dt.target_kind = target_kind;
  for (const auto& video : videos) {
    if (video.frames.empty()) continue;
    const auto feats = extract_g_features(intensity_series(pseudo, unc, video), cfg);
    for (std::size_t k = 0; k < video.frames.size(); ++k) {
      const auto& f = video.frames[k];
      if (!f.label_valid(au_index)) continue;
      dt.rows.push_back(feats[k]);
      dt.targets.push_back(f.labels[au_index]);
      dt.keys.emplace_back(video.video_id, f.frame_index);
    }
  }
  return dt;
}

inline std::string format_mapping_dataset_csv(const MappingDataset& dt) {
  std::ostringstream out;
  out << "video_id,frame_index";
  for (const auto& c : dt.columns) out << ',' << c;
  out << ",target\n";
  for (std::size_t r = 0; r < dt.rows.size(); ++r) {
    out << dt.keys[r].first << ',' << dt.keys[r].second;
    for (double x : dt.rows[r]) out << ',' << util::format_double(x);
    out << ',' << util::format_double(dt.targets[r]) << '\n';
  }
  return out.str();
}

inline nlohmann::json mapping_dataset_sidecar(const MappingDataset& dt) {
  return {{"format", "aurank.mapping_dataset"},
          {"version", 1},
          {"g_config", dt.g_config},
          {"columns", dt.columns},
          {"target_kind", dt.target_kind},
          {"rows", dt.rows.size()}};
}

struct MappingModel {
  nn::NetworkParams params;
  std::size_t au_index = 0;
  std::string au_name;
  GConfig g_config;
  data::LabelKind target_kind = data::LabelKind::occurrence;
  double decision_threshold = 0.5;
  std::vector<double> input_mean;
  std::vector<double> input_scale;
  bool uses_uncertainty = true;
  std::string pseudo_ref;
  std::string uncertainty_ref;
  TrainingMetadata metadata;

  std::vector<double> normalize(std::span<const double> row) const {
    if (row.size() != input_mean.size()) throw ShapeError("mapping feature row has wrong width");
    std::vector<double> out(row.size());
    for (std::size_t c = 0; c < row.size(); ++c) out[c] = (row[c] - input_mean[c]) / input_scale[c];
    return out;
  }

  double raw_output(std::span<const double> row) const { return nn::forward(params, normalize(row)); }

  int decide(double raw) const {
    if (target_kind == data::LabelKind::occurrence)
      return std::clamp(raw, 0.0, 1.0) >= decision_threshold ? 1 : 0;
    return static_cast<int>(std::lround(std::clamp(raw, 0.0, 5.0)));
  }
};

inline double mapping_mae(const MappingModel& model, const MappingDataset& dt) {
  if (dt.rows.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t r = 0; r < dt.rows.size(); ++r) s += std::abs(model.raw_output(dt.rows[r]) - dt.targets[r]);
  return s / static_cast<double>(dt.rows.size());
}

// Fully connected regressor on standardized columns, trained with mean absolute error.
inline MappingModel train_mapping(const MappingDataset& dt, const TrainConfig& cfg) {
  if (dt.rows.empty()) throw EmptyDatasetError("mapping dataset has no rows");
  cfg.validate();
  const std::size_t width = dt.rows.front().size();
  for (const auto& row : dt.rows)
    if (row.size() != width) throw ShapeError("mapping dataset rows differ in width");

  MappingModel model;
  model.g_config = dt.g_config;
  model.target_kind = dt.target_kind;
  model.input_mean.assign(width, 0.0);
  model.input_scale.assign(width, 1.0);
  for (std::size_t c = 0; c < width; ++c) {
    double m = 0.0;
    for (const auto& row : dt.rows) m += row[c];
    m /= static_cast<double>(dt.rows.size());
    double v = 0.0;
    for (const auto& row : dt.rows) v += (row[c] - m) * (row[c] - m);
    const double sd = std::sqrt(v / static_cast<double>(dt.rows.size()));
    model.input_mean[c] = m;
    model.input_scale[c] = sd > 1e-12 ? sd : 1.0;
  }

  std::vector<std::vector<double>> inputs;
  inputs.reserve(dt.rows.size());
  for (const auto& row : dt.rows) inputs.push_back(model.normalize(row));

  model.params = nn::init_params(cfg.layer_sizes(width), cfg.seed, nn::OutputTransform::identity, cfg.activation);
  detail::run_epochs(
      model.params, inputs.size(), cfg, model.metadata,
      [&](std::size_t idx, double weight, nn::GradientTape& grads) {
        const auto t = nn::forward_trace(model.params, inputs[idx]);
        const double err = t.output - dt.targets[idx];
        const double g = err > 0.0 ? 1.0 : (err < 0.0 ? -1.0 : 0.0);
        if (g != 0.0) nn::accumulate_backward(model.params, t, weight * g, grads);
        return std::abs(err);
      },
      {});
  return model;
}

struct FramePrediction {
  std::vector<double> raw;
  std::vector<int> labels;
};

inline FramePrediction predict_labels(const PseudoIntensityModel& pseudo, const UncertaintyModel* unc,
                                      const MappingModel& mapping, const data::VideoSequence& video,
                                      const GConfig& cfg) {
  if (!(cfg == mapping.g_config))
    throw ConfigError("G configuration differs from the one the mapping model was trained with");
  if (mapping.uses_uncertainty != (unc != nullptr))
    throw ConfigError("mapping model for " + mapping.au_name + " expects " +
                      (mapping.uses_uncertainty ? "an" : "no") + " uncertainty model");
  FramePrediction out;
  if (video.frames.empty()) return out;
  const auto rows = extract_g_features(intensity_series(pseudo, unc, video), cfg);
  for (const auto& row : rows) {
    const double raw = mapping.raw_output(row);
    out.raw.push_back(raw);
    out.labels.push_back(mapping.decide(raw));
  }
  return out;
}

inline FramePrediction predict_labels(const PseudoIntensityModel& pseudo, const UncertaintyModel* unc,
                                      const MappingModel& mapping, const data::VideoSequence& video) {
  return predict_labels(pseudo, unc, mapping, video, mapping.g_config);
}

inline nlohmann::json to_json(const MappingModel& m) {
  return {{"format", "aurank.mapping"},
          {"version", 1},
          {"au_index", m.au_index},
          {"au_name", m.au_name},
          {"g_config", m.g_config},
          {"target_kind", m.target_kind},
          {"decision_threshold", m.decision_threshold},
          {"input_mean", m.input_mean},
          {"input_scale", m.input_scale},
          {"uses_uncertainty", m.uses_uncertainty},
          {"pseudo_ref", m.pseudo_ref},
          {"uncertainty_ref", m.uncertainty_ref},
          {"metadata", to_json(m.metadata)},
          {"network", nn::to_json(m.params)}};
}

inline MappingModel mapping_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "aurank.mapping") throw SchemaError("not a mapping model document");
    MappingModel m;
    m.au_index = j.at("au_index").get<std::size_t>();
    m.au_name = j.at("au_name").get<std::string>();
    m.g_config = j.at("g_config").get<GConfig>();
    m.target_kind = j.at("target_kind").get<data::LabelKind>();
    m.decision_threshold = j.at("decision_threshold").get<double>();
    m.input_mean = j.at("input_mean").get<std::vector<double>>();
    m.input_scale = j.at("input_scale").get<std::vector<double>>();
    m.uses_uncertainty = j.at("uses_uncertainty").get<bool>();
    m.pseudo_ref = j.at("pseudo_ref").get<std::string>();
    m.uncertainty_ref = j.at("uncertainty_ref").get<std::string>();
    m.metadata = metadata_from_json(j.at("metadata"));
    m.params = nn::network_from_json(j.at("network"));
    if (m.input_mean.size() != m.params.input_dim() || m.input_scale.size() != m.params.input_dim())
      throw SchemaError("mapping normalization does not match network input");
    if (!(m.decision_threshold > 0.0 && m.decision_threshold < 1.0))
      throw SchemaError("decision_threshold must lie in (0, 1)");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed mapping model: ") + e.what());
  }
}

}  // namespace aurank

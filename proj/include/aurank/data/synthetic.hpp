#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "aurank/data/types.hpp"
#include "aurank/error.hpp"

namespace aurank::data {

// Synthetic corpus: every video belongs to a different "person" with its own
// neutral offset and per-AU gain; per-AU latent intensities follow a reflected
// random walk in [0, 5]; occluded frames carry pure noise features.
struct SyntheticConfig {
  std::size_t num_videos = 20;
  std::size_t frames_per_video = 200;
  std::size_t feature_dim = 8;
  std::size_t num_aus = 2;
  double frames_per_second = 10.0;
  double neutral_offset_min = -0.5;
  double neutral_offset_max = 0.5;
  double gain_min = 0.8;
  double gain_max = 1.2;
  double step_scale = 0.1;
  double observation_noise = 0.0;
  double occlusion_probability = 0.0;
  double occlusion_noise_scale = 1.0;
  LabelKind label_kind = LabelKind::intensity;
  int occurrence_min_intensity = 2;
  std::uint64_t seed = 0;

  void validate() const {
    if (num_videos == 0 || frames_per_video == 0 || feature_dim == 0 || num_aus == 0)
      throw ConfigError("synthetic dimensions must be positive");
    if (!(frames_per_second > 0.0)) throw ConfigError("frames_per_second must be positive");
    if (!(occlusion_probability >= 0.0 && occlusion_probability <= 1.0))
      throw ConfigError("occlusion_probability must lie in [0, 1]");
    if (neutral_offset_min > neutral_offset_max || gain_min > gain_max)
      throw ConfigError("empty offset or gain range");
    if (gain_min <= 0.0) throw ConfigError("gains must be positive");
    if (step_scale < 0.0 || observation_noise < 0.0 || occlusion_noise_scale < 0.0)
      throw ConfigError("noise scales must be non-negative");
    if (occurrence_min_intensity < 1 || occurrence_min_intensity > 5)
      throw ConfigError("occurrence_min_intensity must lie in [1, 5]");
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SyntheticConfig, num_videos, frames_per_video,
                                                feature_dim, num_aus, frames_per_second,
                                                neutral_offset_min, neutral_offset_max, gain_min,
                                                gain_max, step_scale, observation_noise,
                                                occlusion_probability, occlusion_noise_scale,
                                                label_kind, occurrence_min_intensity, seed)

namespace detail {

inline double reflect_into(double x, double lo, double hi) {
  const double span = hi - lo;
  double t = std::fmod(x - lo, 2.0 * span);
  if (t < 0.0) t += 2.0 * span;
  return t <= span ? lo + t : hi - (t - span);
}

inline std::string video_name(std::size_t v) {
  std::string digits = std::to_string(v);
  return "video_" + std::string(digits.size() < 4 ? 4 - digits.size() : 0, '0') + digits;
}

}  // namespace detail

inline Dataset generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.feature_dim, A = cfg.num_aus;

  // Shared embedding of AU intensities into feature space; unit-norm columns.
  std::mt19937_64 base(cfg.seed);
  std::normal_distribution<double> stdnorm(0.0, 1.0);
  std::vector<double> mixing(d * A);
  for (double& m : mixing) m = stdnorm(base);
  for (std::size_t a = 0; a < A; ++a) {
    double norm = 0.0;
    for (std::size_t f = 0; f < d; ++f) norm += mixing[f * A + a] * mixing[f * A + a];
    norm = std::sqrt(norm);
    for (std::size_t f = 0; f < d; ++f) mixing[f * A + a] /= norm;
  }

  Dataset ds;
  ds.feature_dim = d;
  ds.label_kind = cfg.label_kind;
  for (std::size_t a = 0; a < A; ++a) ds.au_names.push_back("AU" + std::to_string(a + 1));

  for (std::size_t v = 0; v < cfg.num_videos; ++v) {
    std::mt19937_64 rng(cfg.seed + 0x9e3779b97f4a7c15ULL * (v + 1));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<double> offset(d);
    for (double& o : offset) o = cfg.neutral_offset_min + (cfg.neutral_offset_max - cfg.neutral_offset_min) * unit(rng);
    std::vector<double> gain(A);
    for (double& g : gain) g = cfg.gain_min + (cfg.gain_max - cfg.gain_min) * unit(rng);
    std::vector<double> latent(A);
    for (double& l : latent) l = 5.0 * unit(rng);

    VideoSequence video;
    video.video_id = detail::video_name(v);
    video.frames_per_second = cfg.frames_per_second;
    for (std::size_t t = 0; t < cfg.frames_per_video; ++t) {
      if (t > 0)
        for (double& l : latent) l = detail::reflect_into(l + cfg.step_scale * gauss(rng), 0.0, 5.0);

      FrameRecord fr;
      fr.video_id = video.video_id;
      fr.frame_index = t;
      fr.latent = latent;
      for (std::size_t a = 0; a < A; ++a) {
        const int intensity = std::clamp(static_cast<int>(std::lround(latent[a])), 0, 5);
        fr.labels.push_back(cfg.label_kind == LabelKind::intensity
                                ? intensity
                                : (intensity >= cfg.occurrence_min_intensity ? 1 : 0));
      }
      const bool occluded = unit(rng) < cfg.occlusion_probability;
      fr.occluded = occluded;
      fr.features.resize(d);
      for (std::size_t f = 0; f < d; ++f) {
        // Draw the observation noise unconditionally so occlusion does not shift the stream.
        const double noise = gauss(rng);
        if (occluded) {
          fr.features[f] = cfg.occlusion_noise_scale * noise;
        } else {
          double x = offset[f] + cfg.observation_noise * noise;
          for (std::size_t a = 0; a < A; ++a) x += mixing[f * A + a] * gain[a] * latent[a];
          fr.features[f] = x;
        }
      }
      video.frames.push_back(std::move(fr));
    }
    ds.videos.push_back(std::move(video));
  }
  return ds;
}

}  // namespace aurank::data

#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "aurank/error.hpp"

namespace aurank::data {

// Annotation value marking a frame whose label must be ignored.
inline constexpr int kInvalidLabel = -1;

enum class LabelKind { occurrence, intensity };

NLOHMANN_JSON_SERIALIZE_ENUM(LabelKind, {{LabelKind::occurrence, "occurrence"},
                                         {LabelKind::intensity, "intensity"}})

inline int max_label(LabelKind k) { return k == LabelKind::occurrence ? 1 : 5; }

struct FrameRecord {
  std::string video_id;
  std::size_t frame_index = 0;
  std::vector<double> features;
  std::vector<int> labels;  // one entry per AU; kInvalidLabel when unusable
  std::optional<bool> occluded;
  std::vector<double> latent;  // synthetic ground truth per AU, empty otherwise

  bool label_valid(std::size_t au) const { return au < labels.size() && labels[au] != kInvalidLabel; }

  friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

struct VideoSequence {
  std::string video_id;
  std::vector<FrameRecord> frames;
  double frames_per_second = 30.0;

  std::size_t size() const { return frames.size(); }

  void validate(std::size_t feature_dim) const {
    if (!(frames_per_second > 0.0)) throw SchemaError("video " + video_id + ": fps must be positive");
    for (std::size_t k = 0; k < frames.size(); ++k) {
      const auto& f = frames[k];
      if (f.video_id != video_id) throw SchemaError("frame of " + f.video_id + " inside video " + video_id);
      if (k > 0 && f.frame_index <= frames[k - 1].frame_index)
        throw SchemaError("video " + video_id + ": frame indices not strictly increasing");
      if (f.features.size() != feature_dim)
        throw SchemaError("video " + video_id + " frame " + std::to_string(f.frame_index) + " has " +
                          std::to_string(f.features.size()) + " features, expected " +
                          std::to_string(feature_dim));
    }
  }

  friend bool operator==(const VideoSequence&, const VideoSequence&) = default;
};

struct Dataset {
  std::vector<std::string> au_names;
  std::size_t feature_dim = 0;
  LabelKind label_kind = LabelKind::occurrence;
  std::vector<VideoSequence> videos;

  std::size_t au_index(const std::string& name) const {
    for (std::size_t i = 0; i < au_names.size(); ++i)
      if (au_names[i] == name) return i;
    throw ConfigError("unknown AU '" + name + "'");
  }

  std::size_t num_frames() const {
    std::size_t n = 0;
    for (const auto& v : videos) n += v.size();
    return n;
  }

  void validate() const {
    for (const auto& v : videos) {
      v.validate(feature_dim);
      for (const auto& f : v.frames) {
        if (f.labels.size() != au_names.size())
          throw SchemaError("video " + v.video_id + " frame " + std::to_string(f.frame_index) +
                            ": label count does not match AU list");
        for (int y : f.labels)
          if (y != kInvalidLabel && (y < 0 || y > max_label(label_kind)))
            throw SchemaError("label " + std::to_string(y) + " outside legal range");
      }
    }
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Two frames of one video with the rank label r = +1 if y_i > y_j, -1 if y_i < y_j.
// `video` indexes the owning dataset's video list; i and j are frame positions.
struct RankedPair {
  std::size_t video = 0;
  std::size_t i = 0;
  std::size_t j = 0;
  int r = 0;

  RankedPair swapped() const { return {video, j, i, -r}; }

  friend bool operator==(const RankedPair&, const RankedPair&) = default;
};

inline int rank_label(int y_i, int y_j) {
  if (y_i > y_j) return 1;
  if (y_i < y_j) return -1;
  return 0;
}

inline std::span<const double> features_of(std::span<const VideoSequence> videos, std::size_t video,
                                           std::size_t frame) {
  if (video >= videos.size() || frame >= videos[video].frames.size())
    throw ShapeError("pair references a frame outside the dataset");
  return videos[video].frames[frame].features;
}

}  // namespace aurank::data

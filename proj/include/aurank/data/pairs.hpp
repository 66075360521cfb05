#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "aurank/data/types.hpp"
#include "aurank/error.hpp"

namespace aurank::data {

struct PairSamplerConfig {
  std::size_t max_pairs_per_video = 200;
  std::size_t min_frame_gap = 0;
  bool balance_by_rank_difference = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (max_pairs_per_video < 1) throw ConfigError("max_pairs_per_video must be >= 1");
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PairSamplerConfig, max_pairs_per_video, min_frame_gap,
                                                balance_by_rank_difference, seed)

namespace detail {

// Above this many labeled frames a video is subsampled before enumeration.
inline constexpr std::size_t kMaxEnumeratedFrames = 2000;

// Splits `budget` over buckets of the given sizes as evenly as availability allows.
inline std::vector<std::size_t> water_fill(const std::vector<std::size_t>& sizes, std::size_t budget) {
  std::vector<std::size_t> quota(sizes.size(), 0);
  std::size_t remaining = budget;
  while (remaining > 0) {
    std::size_t open = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) open += quota[k] < sizes[k];
    if (open == 0) break;
    const std::size_t share = std::max<std::size_t>(1, remaining / open);
    for (std::size_t k = 0; k < sizes.size() && remaining > 0; ++k) {
      const std::size_t take = std::min({share, sizes[k] - quota[k], remaining});
      quota[k] += take;
      remaining -= take;
    }
  }
  return quota;
}

}  // namespace detail

// Within-video ranked pairs for one AU. Frames with the invalid marker and tied
// labels never form a pair. Pairs are emitted in (video, i, j) order with i < j.
inline std::vector<RankedPair> build_pair_dataset(std::span<const VideoSequence> videos,
                                                  std::size_t au_index, const PairSamplerConfig& cfg) {
  cfg.validate();
  std::vector<RankedPair> out;
  for (std::size_t v = 0; v < videos.size(); ++v) {
    const auto& frames = videos[v].frames;
    std::vector<std::size_t> labeled;
    for (std::size_t k = 0; k < frames.size(); ++k)
      if (frames[k].label_valid(au_index)) labeled.push_back(k);

    std::mt19937_64 rng(cfg.seed ^ (0x9e3779b97f4a7c15ULL * (v + 1)));
    if (labeled.size() > detail::kMaxEnumeratedFrames) {
      std::shuffle(labeled.begin(), labeled.end(), rng);
      labeled.resize(detail::kMaxEnumeratedFrames);
      std::sort(labeled.begin(), labeled.end());
    }

    std::map<int, std::vector<RankedPair>> buckets;  // keyed by |y_i - y_j|
    for (std::size_t a = 0; a < labeled.size(); ++a) {
      for (std::size_t b = a + 1; b < labeled.size(); ++b) {
        const std::size_t i = labeled[a], j = labeled[b];
        if (j - i < cfg.min_frame_gap) continue;
        const int yi = frames[i].labels[au_index], yj = frames[j].labels[au_index];
        const int r = rank_label(yi, yj);
        if (r == 0) continue;
        buckets[std::abs(yi - yj)].push_back({v, i, j, r});
      }
    }
    if (buckets.empty()) continue;

    std::vector<RankedPair> chosen;
    if (cfg.balance_by_rank_difference) {
      std::vector<std::size_t> sizes;
      for (const auto& [diff, pairs] : buckets) sizes.push_back(pairs.size());
      const auto quota = detail::water_fill(sizes, cfg.max_pairs_per_video);
      std::size_t k = 0;
      for (auto& [diff, pairs] : buckets) {
        if (quota[k] < pairs.size()) std::shuffle(pairs.begin(), pairs.end(), rng);
        chosen.insert(chosen.end(), pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(quota[k]));
        ++k;
      }
    } else {
      for (auto& [diff, pairs] : buckets) chosen.insert(chosen.end(), pairs.begin(), pairs.end());
      if (chosen.size() > cfg.max_pairs_per_video) {
        std::shuffle(chosen.begin(), chosen.end(), rng);
        chosen.resize(cfg.max_pairs_per_video);
      }
    }
    std::sort(chosen.begin(), chosen.end(), [](const RankedPair& x, const RankedPair& y) {
      return std::tie(x.i, x.j) < std::tie(y.i, y.j);
    });
    out.insert(out.end(), chosen.begin(), chosen.end());
  }
  if (out.empty()) throw EmptyDatasetError("no admissible pairs for AU index " + std::to_string(au_index));
  return out;
}

}  // namespace aurank::data

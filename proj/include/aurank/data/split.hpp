#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

#include "aurank/data/types.hpp"
#include "aurank/error.hpp"

namespace aurank::data {

// Partitions whole videos into (train, validation). Video order inside each
// side follows the input order.
inline std::pair<Dataset, Dataset> split_by_video(const Dataset& ds, double validation_fraction,
                                                  std::uint64_t seed) {
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw ConfigError("validation_fraction must lie in (0, 1)");
  const std::size_t n = ds.videos.size();
  if (n < 2) throw ConfigError("need at least two videos to split");

  auto n_val = static_cast<std::size_t>(std::lround(validation_fraction * static_cast<double>(n)));
  n_val = std::clamp<std::size_t>(n_val, 1, n - 1);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> is_val(n, false);
  for (std::size_t k = 0; k < n_val; ++k) is_val[order[k]] = true;

  Dataset train, val;
  for (Dataset* part : {&train, &val}) {
    part->au_names = ds.au_names;
    part->feature_dim = ds.feature_dim;
    part->label_kind = ds.label_kind;
  }
  for (std::size_t v = 0; v < n; ++v) (is_val[v] ? val : train).videos.push_back(ds.videos[v]);
  return {std::move(train), std::move(val)};
}

}  // namespace aurank::data

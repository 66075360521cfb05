#pragma once

// Independent reference computations used by the tests. Nothing here calls into
// the library's numerical code.

#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "aurank/data/types.hpp"

namespace oracle {

// Composite Simpson rule with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 20000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int k = 1; k < n; ++k) s += f(a + k * h) * (k % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

inline double erf_by_quadrature(double x) {
  const double c = 2.0 / std::sqrt(std::numbers::pi);
  const double v = simpson([&](double t) { return c * std::exp(-t * t); }, 0.0, std::abs(x));
  return x < 0 ? -v : v;
}

// Standard normal CDF by integrating the density from -12.
inline double phi_by_quadrature(double z) {
  const double c = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  return simpson([&](double t) { return c * std::exp(-0.5 * t * t); }, -12.0, z, 40000);
}

inline double central_difference(const std::function<double(double)>& f, double x, double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// |a - b| relative to max(|a|, |b|), with an absolute floor for values near zero.
inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Kendall tau-b by enumerating every pair.
inline double kendall_tau_b(const std::vector<double>& a, const std::vector<double>& b) {
  long long c = 0, d = 0, ta = 0, tb = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j) {
      if (j <= i) continue;
      const int sa = (a[i] > a[j]) - (a[i] < a[j]);
      const int sb = (b[i] > b[j]) - (b[i] < b[j]);
      if (sa == 0 && sb == 0) continue;
      if (sa == 0) ++ta;
      else if (sb == 0) ++tb;
      else if (sa == sb) ++c;
      else ++d;
    }
  return (c - d) / std::sqrt(double(c + d + ta) * double(c + d + tb));
}

// AUROC as the probability that a random positive outscores a random negative (ties 1/2).
inline double auroc_by_pairs(const std::vector<double>& s, const std::vector<bool>& pos) {
  double wins = 0, n = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (pos[i] && !pos[j]) {
        wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
        n += 1;
      }
  return wins / n;
}

// A video whose single feature equals its label, for separable toy problems.
inline aurank::data::VideoSequence labeled_video(const std::string& id, const std::vector<int>& labels,
                                                 std::size_t dim = 1, double fps = 10.0) {
  aurank::data::VideoSequence v;
  v.video_id = id;
  v.frames_per_second = fps;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    aurank::data::FrameRecord f;
    f.video_id = id;
    f.frame_index = k;
    f.labels = {labels[k]};
    f.features.assign(dim, 0.0);
    f.features[0] = labels[k];
    for (std::size_t c = 1; c < dim; ++c) f.features[c] = 0.1 * static_cast<double>(c);
    v.frames.push_back(f);
  }
  return v;
}

}  // namespace oracle

#include <filesystem>
#include <fstream>
#include <unistd.h>

namespace oracle {

// Fresh scratch directory under the system temp dir, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() / ("aurank_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream(p) << text;
}

}  // namespace oracle

namespace oracle {

// Confusion tally for one binary AU: returns {tp, fp, fn, tn}.
struct Tally {
  long tp = 0, fp = 0, fn = 0, tn = 0;
};

inline Tally tally(const std::vector<int>& pred, const std::vector<int>& truth) {
  Tally t;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    if (pred[k] && truth[k]) ++t.tp;
    if (pred[k] && !truth[k]) ++t.fp;
    if (!pred[k] && truth[k]) ++t.fn;
    if (!pred[k] && !truth[k]) ++t.tn;
  }
  return t;
}

// Metric from a tally, treating an AU with no positives anywhere as F1 = 1.
inline double metric_from_tally(const Tally& t) {
  const double f1 = t.tp + t.fp + t.fn == 0 ? 1.0 : 2.0 * t.tp / (2.0 * t.tp + t.fp + t.fn);
  const double acc = double(t.tp + t.tn) / double(t.tp + t.fp + t.fn + t.tn);
  return 0.5 * f1 + 0.5 * acc;
}

}  // namespace oracle

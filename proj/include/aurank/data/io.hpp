#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "aurank/data/types.hpp"
#include "aurank/error.hpp"
#include "aurank/util.hpp"

namespace aurank::data {

namespace fs = std::filesystem;

// Rows of an annotation-schema CSV: `video_id,frame_index,<AU columns>`.
// Predictions use the same schema so they can be scored or diffed directly.
struct AnnotationRow {
  std::string video_id;
  std::size_t frame_index = 0;
  std::vector<int> labels;

  friend bool operator==(const AnnotationRow&, const AnnotationRow&) = default;
};

struct AnnotationTable {
  std::vector<std::string> au_names;
  std::vector<AnnotationRow> rows;

  friend bool operator==(const AnnotationTable&, const AnnotationTable&) = default;
};

inline std::string format_annotation_table(const AnnotationTable& t) {
  std::ostringstream out;
  out << "video_id,frame_index";
  for (const auto& au : t.au_names) out << ',' << au;
  out << '\n';
  for (const auto& r : t.rows) {
    if (r.labels.size() != t.au_names.size()) throw ShapeError("annotation row has wrong label count");
    out << r.video_id << ',' << r.frame_index;
    for (int y : r.labels) out << ',' << y;
    out << '\n';
  }
  return out.str();
}

inline AnnotationTable read_annotation_table(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("missing annotation file " + path.string());
  const auto lines = util::read_lines(path);
  if (lines.empty()) throw SchemaError(path.string() + " has no header row");
  const auto header = util::split_csv_line(lines[0]);
  if (header.size() < 2 || header[0] != "video_id" || header[1] != "frame_index")
    throw SchemaError(path.string() + ": header must start with video_id,frame_index");
  AnnotationTable t;
  for (std::size_t c = 2; c < header.size(); ++c) t.au_names.emplace_back(header[c]);
  for (std::size_t n = 1; n < lines.size(); ++n) {
    const auto cells = util::split_csv_line(lines[n]);
    const std::string ctx = path.string() + " line " + std::to_string(n + 1);
    if (cells.size() != header.size()) throw SchemaError(ctx + ": wrong column count");
    AnnotationRow row;
    row.video_id = std::string(cells[0]);
    const long long idx = util::parse_int(cells[1], ctx);
    if (idx < 0) throw SchemaError(ctx + ": negative frame index");
    row.frame_index = static_cast<std::size_t>(idx);
    for (std::size_t c = 2; c < cells.size(); ++c)
      row.labels.push_back(static_cast<int>(util::parse_int(cells[c], ctx)));
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline AnnotationTable annotation_table_of(const Dataset& ds) {
  AnnotationTable t;
  t.au_names = ds.au_names;
  for (const auto& v : ds.videos)
    for (const auto& f : v.frames) t.rows.push_back({v.video_id, f.frame_index, f.labels});
  return t;
}

inline std::string format_feature_csv(const VideoSequence& v, std::size_t feature_dim) {
  std::ostringstream out;
  out << "frame_index";
  for (std::size_t f = 0; f < feature_dim; ++f) out << ",f" << f;
  out << '\n';
  for (const auto& fr : v.frames) {
    out << fr.frame_index;
    for (double x : fr.features) out << ',' << util::format_double(x);
    out << '\n';
  }
  return out.str();
}

// Per-frame feature rows of one video keyed by frame index.
inline std::map<std::size_t, std::vector<double>> read_feature_csv(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("missing feature file " + path.string());
  const auto lines = util::read_lines(path);
  if (lines.empty()) throw SchemaError(path.string() + " has no header row");
  const auto header = util::split_csv_line(lines[0]);
  if (header.empty() || header[0] != "frame_index")
    throw SchemaError(path.string() + ": header must start with frame_index");
  const std::size_t d = header.size() - 1;
  std::map<std::size_t, std::vector<double>> rows;
  for (std::size_t n = 1; n < lines.size(); ++n) {
    const auto cells = util::split_csv_line(lines[n]);
    const std::string ctx = path.string() + " line " + std::to_string(n + 1);
    if (cells.size() != d + 1)
      throw SchemaError(ctx + ": expected " + std::to_string(d) + " features, found " +
                        std::to_string(cells.size() - 1));
    const long long idx = util::parse_int(cells[0], ctx);
    if (idx < 0) throw SchemaError(ctx + ": negative frame index");
    std::vector<double> x;
    x.reserve(d);
    for (std::size_t c = 1; c < cells.size(); ++c) x.push_back(util::parse_double(cells[c], ctx));
    if (!rows.emplace(static_cast<std::size_t>(idx), std::move(x)).second)
      throw SchemaError(ctx + ": duplicate frame index");
  }
  return rows;
}

struct LoadOptions {
  double frames_per_second = 30.0;
  std::optional<LabelKind> label_kind;  // inferred from label range when absent
};

// Joins the annotation CSV with one feature CSV per video found in
// `features_dir` (`<video_id>.csv`). Videos come back sorted by video_id.
inline Dataset load_annotations(const fs::path& annotation_path, const fs::path& features_dir,
                                const LoadOptions& opts = {}) {
  const AnnotationTable table = read_annotation_table(annotation_path);
  std::map<std::string, std::map<std::size_t, std::vector<int>>> by_video;
  for (const auto& row : table.rows) {
    for (int y : row.labels)
      if (y != kInvalidLabel && (y < 0 || y > 5))
        throw SchemaError("label " + std::to_string(y) + " outside legal range in video " + row.video_id);
    if (!by_video[row.video_id].emplace(row.frame_index, row.labels).second)
      throw SchemaError("duplicate annotation for " + row.video_id + " frame " +
                        std::to_string(row.frame_index));
  }

  Dataset ds;
  ds.au_names = table.au_names;
  int max_seen = 0;
  std::optional<std::size_t> dim;
  for (const auto& [video_id, labels] : by_video) {
    const auto features = read_feature_csv(features_dir / (video_id + ".csv"));
    VideoSequence v;
    v.video_id = video_id;
    v.frames_per_second = opts.frames_per_second;
    for (const auto& [idx, y] : labels) {
      auto it = features.find(idx);
      if (it == features.end())
        throw SchemaError("video " + video_id + " frame " + std::to_string(idx) + " has no feature row");
      if (!dim) dim = it->second.size();
      if (it->second.size() != *dim)
        throw SchemaError("video " + video_id + " frame " + std::to_string(idx) + " has " +
                          std::to_string(it->second.size()) + " features, expected " + std::to_string(*dim));
      FrameRecord fr;
      fr.video_id = video_id;
      fr.frame_index = idx;
      fr.features = it->second;
      fr.labels = y;
      for (int l : y) max_seen = std::max(max_seen, l);
      v.frames.push_back(std::move(fr));
    }
    if (features.size() != labels.size())
      throw SchemaError("video " + video_id + ": feature rows and annotation rows differ in count");
    ds.videos.push_back(std::move(v));
  }
  ds.feature_dim = dim.value_or(0);
  ds.label_kind = opts.label_kind.value_or(max_seen <= 1 ? LabelKind::occurrence : LabelKind::intensity);
  ds.validate();
  return ds;
}

// Synthetic-only ground truth (occlusion flag and latent intensities).
inline std::string format_ground_truth(const Dataset& ds) {
  std::ostringstream out;
  out << "video_id,frame_index,occluded";
  for (const auto& au : ds.au_names) out << ",latent_" << au;
  out << '\n';
  for (const auto& v : ds.videos)
    for (const auto& f : v.frames) {
      out << v.video_id << ',' << f.frame_index << ',' << (f.occluded.value_or(false) ? 1 : 0);
      for (double l : f.latent) out << ',' << util::format_double(l);
      out << '\n';
    }
  return out.str();
}

inline void apply_ground_truth(Dataset& ds, const fs::path& path) {
  const auto lines = util::read_lines(path);
  if (lines.empty()) throw SchemaError(path.string() + " has no header row");
  const std::size_t n_latent = util::split_csv_line(lines[0]).size() - 3;
  std::map<std::pair<std::string, std::size_t>, FrameRecord*> index;
  for (auto& v : ds.videos)
    for (auto& f : v.frames) index[{v.video_id, f.frame_index}] = &f;
  for (std::size_t n = 1; n < lines.size(); ++n) {
    const auto cells = util::split_csv_line(lines[n]);
    const std::string ctx = path.string() + " line " + std::to_string(n + 1);
    if (cells.size() != n_latent + 3) throw SchemaError(ctx + ": wrong column count");
    auto it = index.find({std::string(cells[0]), static_cast<std::size_t>(util::parse_int(cells[1], ctx))});
    if (it == index.end()) throw SchemaError(ctx + ": unknown frame");
    it->second->occluded = util::parse_int(cells[2], ctx) != 0;
    it->second->latent.clear();
    for (std::size_t c = 3; c < cells.size(); ++c) it->second->latent.push_back(util::parse_double(cells[c], ctx));
  }
}

inline bool has_ground_truth(const Dataset& ds) {
  for (const auto& v : ds.videos)
    for (const auto& f : v.frames)
      if (f.occluded.has_value() || !f.latent.empty()) return true;
  return false;
}

inline constexpr const char* kAnnotationFile = "annotations.csv";
inline constexpr const char* kFeatureDir = "features";
inline constexpr const char* kGroundTruthFile = "ground_truth.csv";
inline constexpr const char* kManifestFile = "manifest.json";

// Writes a dataset directory. `manifest` (may be null) is stored alongside and
// always records fps and label kind so the directory reloads losslessly.
inline void write_dataset(const fs::path& dir, const Dataset& ds, nlohmann::json manifest = nullptr) {
  fs::create_directories(dir / kFeatureDir);
  util::write_file_atomic(dir / kAnnotationFile, format_annotation_table(annotation_table_of(ds)));
  for (const auto& v : ds.videos)
    util::write_file_atomic(dir / kFeatureDir / (v.video_id + ".csv"), format_feature_csv(v, ds.feature_dim));
  if (has_ground_truth(ds)) util::write_file_atomic(dir / kGroundTruthFile, format_ground_truth(ds));
  if (manifest.is_null()) manifest = nlohmann::json::object();
  manifest["format"] = "aurank.dataset";
  manifest["version"] = 1;
  manifest["label_kind"] = ds.label_kind;
  manifest["frames_per_second"] = ds.videos.empty() ? 30.0 : ds.videos.front().frames_per_second;
  util::write_file_atomic(dir / kManifestFile, manifest.dump(2) + "\n");
}

inline Dataset load_dataset(const fs::path& dir) {
  LoadOptions opts;
  if (fs::exists(dir / kManifestFile)) {
    try {
      const auto m = nlohmann::json::parse(util::read_file(dir / kManifestFile));
      opts.frames_per_second = m.value("frames_per_second", 30.0);
      if (m.contains("label_kind")) opts.label_kind = m.at("label_kind").get<LabelKind>();
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError("malformed dataset manifest: " + std::string(e.what()));
    }
  }
  Dataset ds = load_annotations(dir / kAnnotationFile, dir / kFeatureDir, opts);
  if (fs::exists(dir / kGroundTruthFile)) apply_ground_truth(ds, dir / kGroundTruthFile);
  return ds;
}

inline std::string manifest_hash(const fs::path& dir) {
  if (!fs::exists(dir / kManifestFile)) return util::hash_string("");
  return util::hash_file(dir / kManifestFile);
}

}  // namespace aurank::data

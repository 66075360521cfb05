#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "aurank/data/io.hpp"
#include "aurank/data/pairs.hpp"
#include "aurank/data/split.hpp"
#include "aurank/data/synthetic.hpp"
#include "aurank/error.hpp"
#include "aurank/eval.hpp"
#include "aurank/mapping.hpp"
#include "aurank/pseudo_intensity.hpp"
#include "aurank/train.hpp"
#include "aurank/uncertainty.hpp"
#include "aurank/util.hpp"

namespace aurank::pipeline {

namespace fs = std::filesystem;

enum class Mode { p1, p2 };

NLOHMANN_JSON_SERIALIZE_ENUM(Mode, {{Mode::p1, "p1"}, {Mode::p2, "p2"}})

struct RunConfig {
  std::string data_dir = "data";
  std::string model_dir = "models";
  std::string report_dir = "reports";
  std::vector<std::string> aus;  // empty: every AU column of the dataset
  Mode mode = Mode::p1;
  // Consulted in p2 mode only; AUs not listed run without the uncertainty model.
  std::map<std::string, bool> use_uncertainty;
  std::uint64_t seed = 1;
  std::vector<std::uint64_t> trial_seeds{1, 2, 3, 4, 5};
  double validation_fraction = 0.2;
  double margin = 1.0;
  double sigma_floor = kDefaultSigmaFloor;
  LossForm loss_form = LossForm::corrected;
  data::PairSamplerConfig pairs{};
  TrainConfig pseudo_train = default_pseudo();
  TrainConfig uncertainty_train = default_uncertainty();
  TrainConfig mapping_train = default_mapping();
  GConfig g{};
  data::SyntheticConfig synthetic = default_synthetic();
  std::size_t jobs = 1;

  static TrainConfig default_pseudo() {
    TrainConfig c;
    c.optimizer.learning_rate = 3e-3;
    return c;
  }
  static TrainConfig default_uncertainty() {
    TrainConfig c;
    c.epochs = 5;
    c.patience = 0;
    c.optimizer.learning_rate = 3e-3;
    return c;
  }
  static TrainConfig default_mapping() {
    TrainConfig c;
    c.epochs = 20;
    c.patience = 0;
    c.hidden_layers = {64, 32};
    return c;
  }
  static data::SyntheticConfig default_synthetic() {
    data::SyntheticConfig s;
    s.num_videos = 40;
    s.label_kind = data::LabelKind::occurrence;
    s.occlusion_probability = 0.2;
    return s;
  }

  bool uses_uncertainty(const std::string& au) const {
    if (mode == Mode::p1) return true;
    auto it = use_uncertainty.find(au);
    return it != use_uncertainty.end() && it->second;
  }

  void validate() const {
    if (trial_seeds.empty()) throw ConfigError("trial_seeds must not be empty");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
      throw ConfigError("validation_fraction must lie in (0, 1)");
    if (!(margin > 0.0)) throw ConfigError("margin must be positive");
    if (!(sigma_floor > 0.0)) throw ConfigError("sigma_floor must be positive");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
    pairs.validate();
    pseudo_train.validate();
    uncertainty_train.validate();
    mapping_train.validate();
    g.validate();
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(RunConfig, data_dir, model_dir, report_dir, aus, mode,
                                                use_uncertainty, seed, trial_seeds, validation_fraction, margin,
                                                sigma_floor, loss_form, pairs, pseudo_train, uncertainty_train,
                                                mapping_train, g, synthetic, jobs)

// Paths and job count do not change results, so they stay out of the hash.
inline std::string config_hash(const RunConfig& cfg) {
  nlohmann::json j = cfg;
  for (const char* k : {"data_dir", "model_dir", "report_dir", "jobs"}) j.erase(k);
  return util::hash_string(j.dump());
}

// Environment variables may override paths only.
inline void apply_env_overrides(RunConfig& cfg) {
  if (const char* v = std::getenv("AURANK_DATA_DIR"); v && *v) cfg.data_dir = v;
  if (const char* v = std::getenv("AURANK_MODEL_DIR"); v && *v) cfg.model_dir = v;
  if (const char* v = std::getenv("AURANK_REPORT_DIR"); v && *v) cfg.report_dir = v;
}

inline RunConfig load_run_config(const std::optional<fs::path>& path) {
  RunConfig cfg;
  if (path) {
    if (!fs::exists(*path)) throw ConfigError("config file not found: " + path->string());
    try {
      const auto j = nlohmann::json::parse(util::read_file(*path));
      cfg = j.get<RunConfig>();
      // unknown enum strings would otherwise fall back to the first value silently
      const nlohmann::json back = cfg;
      for (const char* k : {"mode", "loss_form"})
        if (j.contains(k) && j[k] != back[k]) throw ConfigError("unknown value for " + std::string(k) + ": " + j[k].dump());
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("malformed config " + path->string() + ": " + e.what());
    }
  }
  apply_env_overrides(cfg);
  cfg.validate();
  return cfg;
}

// Runs fn(0..n-1) on up to `jobs` threads; the first exception is rethrown.
inline void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < jobs; ++t)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!first) first = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (first) std::rethrow_exception(first);
}

// ---- in-memory training ----------------------------------------------------

struct AuPipeline {
  std::size_t au_index = 0;
  std::string au_name;
  PseudoIntensityModel pseudo;
  std::optional<UncertaintyModel> uncertainty;
  MappingModel mapping;
};

inline std::uint64_t stage_seed(std::uint64_t seed, std::size_t au_index, unsigned stage) {
  return seed * 1000003ULL + au_index * 101ULL + stage;
}

inline TrainConfig seeded(TrainConfig c, std::uint64_t seed) {
  c.seed = seed;
  return c;
}

inline PseudoIntensityModel train_stage_pseudo(const data::Dataset& train, const data::Dataset& val, std::size_t au,
                                               const RunConfig& cfg, std::uint64_t seed) {
  auto pc = cfg.pairs;
  pc.seed = stage_seed(seed, au, 0);
  const auto pairs = data::build_pair_dataset(train.videos, au, pc);
  std::vector<data::RankedPair> vpairs;
  try {
    vpairs = data::build_pair_dataset(val.videos, au, pc);
  } catch (const EmptyDatasetError&) {
  }
  auto model = train_pseudo(pairs, train.videos, seeded(cfg.pseudo_train, stage_seed(seed, au, 1)), cfg.margin, au,
                            PairSet{vpairs, val.videos});
  model.au_name = train.au_names.at(au);
  model.label_kind = train.label_kind;
  return model;
}

inline UncertaintyModel train_stage_uncertainty(const data::Dataset& train, const PseudoIntensityModel& pseudo,
                                                const RunConfig& cfg, std::uint64_t seed) {
  const std::size_t au = pseudo.au_index;
  auto pc = cfg.pairs;
  pc.seed = stage_seed(seed, au, 0);
  const auto pairs = data::build_pair_dataset(train.videos, au, pc);
  UncertaintyOptions opts;
  opts.margin = cfg.margin;
  opts.sigma_floor = cfg.sigma_floor;
  opts.loss_form = cfg.loss_form;
  return train_uncertainty(pairs, train.videos, pseudo, seeded(cfg.uncertainty_train, stage_seed(seed, au, 2)), opts);
}

inline MappingModel train_stage_mapping(const data::Dataset& train, const PseudoIntensityModel& pseudo,
                                        const UncertaintyModel* unc, const RunConfig& cfg, std::uint64_t seed) {
  const std::size_t au = pseudo.au_index;
  const auto dt = build_mapping_dataset(train.videos, pseudo, unc, cfg.g, au, train.label_kind);
  auto model = train_mapping(dt, seeded(cfg.mapping_train, stage_seed(seed, au, 3)));
  model.au_index = au;
  model.au_name = pseudo.au_name;
  model.uses_uncertainty = unc != nullptr;
  model.pseudo_ref = pseudo.hash();
  model.uncertainty_ref = unc ? unc->hash() : std::string();
  return model;
}

inline std::vector<std::size_t> selected_aus(const data::Dataset& ds, const RunConfig& cfg) {
  std::vector<std::size_t> out;
  if (cfg.aus.empty()) {
    for (std::size_t a = 0; a < ds.au_names.size(); ++a) out.push_back(a);
  } else {
    for (const auto& name : cfg.aus) {
      auto it = std::find(ds.au_names.begin(), ds.au_names.end(), name);
      if (it == ds.au_names.end()) throw ConfigError("AU " + name + " is not a column of the dataset");
      out.push_back(static_cast<std::size_t>(it - ds.au_names.begin()));
    }
  }
  return out;
}

inline AuPipeline train_au(const data::Dataset& train, const data::Dataset& val, std::size_t au,
                           const RunConfig& cfg, std::uint64_t seed) {
  AuPipeline p;
  p.au_index = au;
  p.au_name = train.au_names.at(au);
  p.pseudo = train_stage_pseudo(train, val, au, cfg, seed);
  if (cfg.uses_uncertainty(p.au_name)) p.uncertainty = train_stage_uncertainty(train, p.pseudo, cfg, seed);
  p.mapping = train_stage_mapping(train, p.pseudo, p.uncertainty ? &*p.uncertainty : nullptr, cfg, seed);
  return p;
}

inline std::vector<AuPipeline> train_pipeline(const data::Dataset& train, const data::Dataset& val,
                                              const RunConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const auto aus = selected_aus(train, cfg);
  std::vector<AuPipeline> out(aus.size());
  parallel_for(aus.size(), cfg.jobs, [&](std::size_t k) { out[k] = train_au(train, val, aus[k], cfg, seed); });
  return out;
}

// Predictions as an annotation table over every frame of `ds`.
inline data::AnnotationTable predict_table(const std::vector<AuPipeline>& models, const data::Dataset& ds) {
  data::AnnotationTable t;
  for (const auto& m : models) t.au_names.push_back(m.au_name);
  for (const auto& v : ds.videos) {
    std::vector<std::vector<int>> per_au;
    for (const auto& m : models)
      per_au.push_back(
          predict_labels(m.pseudo, m.uncertainty ? &*m.uncertainty : nullptr, m.mapping, v).labels);
    for (std::size_t k = 0; k < v.frames.size(); ++k) {
      data::AnnotationRow row{v.video_id, v.frames[k].frame_index, {}};
      for (const auto& col : per_au) row.labels.push_back(col[k]);
      t.rows.push_back(std::move(row));
    }
  }
  return t;
}

inline eval::MetricReport evaluate_pipeline(const std::vector<AuPipeline>& models, const data::Dataset& ds) {
  const auto pred = predict_table(models, ds);
  auto truth = data::annotation_table_of(ds);
  return eval::score_occurrence(pred, truth, pred.au_names);
}

// ---- on-disk artifacts -----------------------------------------------------

inline constexpr const char* kPipelineFile = "pipeline.json";

struct StagePaths {
  fs::path dir;
  fs::path pseudo() const { return dir / "pseudo.json"; }
  fs::path uncertainty() const { return dir / "uncertainty.json"; }
  fs::path mapping() const { return dir / "mapping.json"; }
  fs::path curve(const char* stage) const { return dir / (std::string(stage) + "_curve.csv"); }
};

inline StagePaths stage_paths(const fs::path& model_dir, const std::string& au) { return {model_dir / au}; }

// What each stage did during one train call, per AU ("trained" or "reused").
struct StageLog {
  std::string au;
  std::string pseudo, uncertainty, mapping;
};

inline std::optional<nlohmann::json> read_json_if(const fs::path& p) {
  if (!fs::exists(p)) return std::nullopt;
  try {
    return nlohmann::json::parse(util::read_file(p));
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;  // unreadable artifact counts as missing
  }
}

inline void write_json(const fs::path& p, const nlohmann::json& j) { util::write_file_atomic(p, j.dump(2) + "\n"); }

// Hash of the settings a stage depends on; a stored artifact is reused only if it matches.
inline std::string stage_key(const RunConfig& cfg, std::uint64_t seed, const std::string& manifest, int stage) {
  nlohmann::json j{{"seed", seed}, {"manifest", manifest}, {"split", cfg.validation_fraction},
                   {"pairs", cfg.pairs}, {"margin", cfg.margin}, {"pseudo", cfg.pseudo_train}};
  if (stage >= 2) {
    j["uncertainty"] = cfg.uncertainty_train;
    j["sigma_floor"] = cfg.sigma_floor;
    j["loss_form"] = cfg.loss_form;
  }
  if (stage >= 3) {
    j["mapping"] = cfg.mapping_train;
    j["g"] = cfg.g;
  }
  return util::hash_string(j.dump());
}

struct SplitData {
  data::Dataset train, val;
  std::string manifest;
};

inline SplitData load_split(const RunConfig& cfg) {
  const fs::path dir = cfg.data_dir;
  if (!fs::exists(dir / data::kAnnotationFile))
    throw IoError("no dataset at " + dir.string() + " (run generate first)");
  const auto ds = data::load_dataset(dir);
  auto [train, val] = data::split_by_video(ds, cfg.validation_fraction, cfg.seed);
  return {std::move(train), std::move(val), data::manifest_hash(dir)};
}

// Trains or reuses the three stages of one AU under `dir`. A stage is reused when
// its file exists, its settings key matches and its upstream reference matches;
// once a stage retrains, every later stage retrains too.
inline StageLog train_au_on_disk(const SplitData& sd, std::size_t au, const RunConfig& cfg, std::uint64_t seed,
                                 const fs::path& model_dir, AuPipeline* out = nullptr) {
  const std::string name = sd.train.au_names.at(au);
  const auto paths = stage_paths(model_dir, name);
  fs::create_directories(paths.dir);
  StageLog log{name, "reused", "skipped", "reused"};
  bool upstream_changed = false;

  AuPipeline p;
  p.au_index = au;
  p.au_name = name;

  const auto key1 = stage_key(cfg, seed, sd.manifest, 1);
  auto j1 = read_json_if(paths.pseudo());
  if (j1 && j1->value("stage_key", "") == key1) {
    p.pseudo = pseudo_from_json(*j1);
  } else {
    p.pseudo = train_stage_pseudo(sd.train, sd.val, au, cfg, seed);
    p.pseudo.dataset_manifest_hash = sd.manifest;
    auto j = to_json(p.pseudo);
    j["stage_key"] = key1;
    write_json(paths.pseudo(), j);
    util::write_file_atomic(paths.curve("pseudo"), format_curve_csv(p.pseudo.metadata));
    log.pseudo = "trained";
    upstream_changed = true;
  }

  if (cfg.uses_uncertainty(name)) {
    const auto key2 = stage_key(cfg, seed, sd.manifest, 2);
    auto j2 = read_json_if(paths.uncertainty());
    std::optional<UncertaintyModel> loaded;
    if (!upstream_changed && j2 && j2->value("stage_key", "") == key2) {
      try {
        loaded = uncertainty_from_json(*j2, p.pseudo);
      } catch (const DependencyError&) {
      }
    }
    if (loaded) {
      p.uncertainty = std::move(loaded);
      log.uncertainty = "reused";
    } else {
      p.uncertainty = train_stage_uncertainty(sd.train, p.pseudo, cfg, seed);
      auto j = to_json(*p.uncertainty);
      j["stage_key"] = key2;
      write_json(paths.uncertainty(), j);
      util::write_file_atomic(paths.curve("uncertainty"), format_curve_csv(p.uncertainty->metadata));
      log.uncertainty = "trained";
      upstream_changed = true;
    }
  } else {
    fs::remove(paths.uncertainty());
    fs::remove(paths.curve("uncertainty"));
  }

  const auto key3 = stage_key(cfg, seed, sd.manifest, 3);
  auto j3 = read_json_if(paths.mapping());
  bool reuse = !upstream_changed && j3 && j3->value("stage_key", "") == key3;
  if (reuse) {
    p.mapping = mapping_from_json(*j3);
    reuse = p.mapping.pseudo_ref == p.pseudo.hash() && p.mapping.uses_uncertainty == p.uncertainty.has_value() &&
            p.mapping.uncertainty_ref == (p.uncertainty ? p.uncertainty->hash() : std::string());
  }
  if (!reuse) {
    p.mapping = train_stage_mapping(sd.train, p.pseudo, p.uncertainty ? &*p.uncertainty : nullptr, cfg, seed);
    auto j = to_json(p.mapping);
    j["stage_key"] = key3;
    write_json(paths.mapping(), j);
    util::write_file_atomic(paths.curve("mapping"), format_curve_csv(p.mapping.metadata));
    log.mapping = "trained";
  }
  if (out) *out = std::move(p);
  return log;
}

// Loads a trained pipeline; every cross-stage reference must match.
inline std::vector<AuPipeline> load_pipeline(const fs::path& model_dir) {
  const auto manifest = read_json_if(model_dir / kPipelineFile);
  if (!manifest) throw DependencyError("no trained pipeline at " + model_dir.string() + " (run train first)");
  std::vector<AuPipeline> out;
  for (const auto& entry : manifest->at("aus")) {
    AuPipeline p;
    p.au_name = entry.at("au").get<std::string>();
    p.au_index = entry.at("au_index").get<std::size_t>();
    const auto paths = stage_paths(model_dir, p.au_name);
    auto j1 = read_json_if(paths.pseudo());
    auto j3 = read_json_if(paths.mapping());
    if (!j1 || !j3) throw DependencyError("missing model files for " + p.au_name + " in " + model_dir.string());
    p.pseudo = pseudo_from_json(*j1);
    p.mapping = mapping_from_json(*j3);
    if (p.mapping.pseudo_ref != p.pseudo.hash())
      throw DependencyError("mapping model for " + p.au_name + " was trained on another pseudo-intensity model");
    if (p.mapping.uses_uncertainty) {
      auto j2 = read_json_if(paths.uncertainty());
      if (!j2) throw DependencyError("missing uncertainty model for " + p.au_name);
      p.uncertainty = uncertainty_from_json(*j2, p.pseudo);
      if (p.mapping.uncertainty_ref != p.uncertainty->hash())
        throw DependencyError("mapping model for " + p.au_name + " was trained on another uncertainty model");
    }
    out.push_back(std::move(p));
  }
  return out;
}

// Hash of every model file under a pipeline directory, in a fixed order.
inline std::map<std::string, std::string> artifact_hashes(const fs::path& model_dir) {
  std::map<std::string, std::string> out;
  if (!fs::exists(model_dir)) return out;
  for (const auto& e : fs::recursive_directory_iterator(model_dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), model_dir).generic_string()] = util::hash_file(e.path());
  return out;
}

struct TrainResult {
  std::vector<StageLog> stages;
  std::vector<AuPipeline> models;
  std::string manifest_hash;
};

inline TrainResult train_to_dir(const RunConfig& cfg, const SplitData& sd, std::uint64_t seed,
                                const fs::path& model_dir, std::size_t jobs) {
  cfg.validate();
  const auto aus = selected_aus(sd.train, cfg);
  TrainResult r;
  r.manifest_hash = sd.manifest;
  r.stages.resize(aus.size());
  r.models.resize(aus.size());
  parallel_for(aus.size(), jobs, [&](std::size_t k) {
    r.stages[k] = train_au_on_disk(sd, aus[k], cfg, seed, model_dir, &r.models[k]);
  });
  nlohmann::json list = nlohmann::json::array();
  for (const auto& m : r.models)
    list.push_back({{"au", m.au_name}, {"au_index", m.au_index}, {"use_uncertainty", m.uncertainty.has_value()}});
  write_json(model_dir / kPipelineFile, {{"format", "aurank.pipeline"},
                                         {"version", 1},
                                         {"seed", seed},
                                         {"mode", cfg.mode},
                                         {"config_hash", config_hash(cfg)},
                                         {"dataset_manifest_hash", sd.manifest},
                                         {"aus", list}});
  return r;
}

inline nlohmann::json stage_log_json(const std::vector<StageLog>& logs) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& s : logs)
    j.push_back({{"au", s.au}, {"pseudo", s.pseudo}, {"uncertainty", s.uncertainty}, {"mapping", s.mapping}});
  return j;
}

// ---- commands ----------------------------------------------------------------

inline nlohmann::json cmd_generate(const RunConfig& cfg) {
  auto sc = cfg.synthetic;
  sc.seed = cfg.seed;
  sc.validate();
  const auto ds = data::generate_synthetic(sc);
  data::write_dataset(cfg.data_dir, ds, {{"synthetic", sc}, {"seed", sc.seed}});
  return {{"data_dir", cfg.data_dir},
          {"videos", ds.videos.size()},
          {"frames", ds.num_frames()},
          {"dataset_manifest_hash", data::manifest_hash(cfg.data_dir)}};
}

inline nlohmann::json cmd_train(const RunConfig& cfg) {
  const auto sd = load_split(cfg);
  const auto r = train_to_dir(cfg, sd, cfg.seed, cfg.model_dir, cfg.jobs);
  nlohmann::json report{{"command", "train"},
                        {"seed", cfg.seed},
                        {"mode", cfg.mode},
                        {"config_hash", config_hash(cfg)},
                        {"dataset_manifest_hash", sd.manifest},
                        {"stages", stage_log_json(r.stages)},
                        {"artifact_hashes", artifact_hashes(cfg.model_dir)}};
  fs::create_directories(cfg.report_dir);
  write_json(fs::path(cfg.report_dir) / "train.json", report);
  return report;
}

inline std::string trial_dir_name(std::uint64_t seed) { return "trial_seed" + std::to_string(seed); }

// One full training per seed on a common split; the best validation metric wins,
// the lower seed on ties.
inline nlohmann::json cmd_trials(const RunConfig& cfg) {
  cfg.validate();
  const auto sd = load_split(cfg);
  const auto& seeds = cfg.trial_seeds;
  std::vector<eval::MetricReport> reports(seeds.size());
  parallel_for(seeds.size(), cfg.jobs, [&](std::size_t k) {
    const fs::path dir = fs::path(cfg.model_dir) / trial_dir_name(seeds[k]);
    const auto r = train_to_dir(cfg, sd, seeds[k], dir, 1);
    reports[k] = evaluate_pipeline(r.models, sd.val);
  });

  std::size_t best = 0;
  for (std::size_t k = 1; k < seeds.size(); ++k) {
    const double a = reports[k].competition, b = reports[best].competition;
    if (a > b || (a == b && seeds[k] < seeds[best])) best = k;
  }
  nlohmann::json rows = nlohmann::json::array();
  std::string table = "seed  avg_f1  total_acc  metric\n";
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    const fs::path dir = fs::path(cfg.model_dir) / trial_dir_name(seeds[k]);
    rows.push_back({{"seed", seeds[k]},
                    {"best", k == best},
                    {"model_dir", dir.generic_string()},
                    {"average_f1", reports[k].average_f1},
                    {"total_accuracy", reports[k].total_accuracy},
                    {"competition_metric", reports[k].competition},
                    {"artifact_hashes", artifact_hashes(dir)}});
    table += std::to_string(seeds[k]) + "  " + eval::format3(reports[k].average_f1) + "   " +
             eval::format3(reports[k].total_accuracy) + "      " + eval::format3(reports[k].competition) +
             (k == best ? "  best" : "") + "\n";
  }
  nlohmann::json report{{"command", "trials"},
                        {"config_hash", config_hash(cfg)},
                        {"dataset_manifest_hash", sd.manifest},
                        {"mode", cfg.mode},
                        {"best_seed", seeds[best]},
                        {"best_model_dir", rows[best]["model_dir"]},
                        {"trials", rows}};
  fs::create_directories(cfg.report_dir);
  write_json(fs::path(cfg.report_dir) / "trials.json", report);
  util::write_file_atomic(fs::path(cfg.report_dir) / "trials.txt", table);
  return report;
}

// Predicts every frame of the dataset directory `input_dir`; labels there are ignored.
inline data::AnnotationTable cmd_predict(const RunConfig& cfg, const fs::path& input_dir, const fs::path& out_csv) {
  const auto models = load_pipeline(cfg.model_dir);
  data::Dataset ds;
  const auto table = data::read_annotation_table(input_dir / data::kAnnotationFile);
  if (!table.rows.empty()) ds = data::load_dataset(input_dir);
  data::AnnotationTable pred;
  if (ds.videos.empty()) {
    for (const auto& m : models) pred.au_names.push_back(m.au_name);
  } else {
    if (ds.feature_dim != models.front().pseudo.params.input_dim())
      throw ConfigError("input features have dimension " + std::to_string(ds.feature_dim) +
                        " but the models expect " + std::to_string(models.front().pseudo.params.input_dim()));
    pred = predict_table(models, ds);
  }
  util::write_file_atomic(out_csv, data::format_annotation_table(pred));
  return pred;
}

inline eval::MetricReport cmd_evaluate(const RunConfig& cfg, const fs::path& predictions, const fs::path& truth,
                                       const std::string& name = "evaluation") {
  const auto pred = data::read_annotation_table(predictions);
  const auto gt = data::read_annotation_table(truth);
  std::vector<std::string> aus = cfg.aus.empty() ? gt.au_names : cfg.aus;
  const auto rep = eval::score_occurrence(pred, gt, aus);
  auto j = eval::to_json(rep);
  j["config_hash"] = config_hash(cfg);
  const fs::path dir = truth.parent_path();
  j["dataset_manifest_hash"] = data::manifest_hash(dir.empty() ? fs::path(".") : dir);
  j["predictions"] = predictions.generic_string();
  j["ground_truth"] = truth.generic_string();
  fs::create_directories(cfg.report_dir);
  write_json(fs::path(cfg.report_dir) / (name + ".json"), j);
  util::write_file_atomic(fs::path(cfg.report_dir) / (name + ".txt"), eval::format_table(rep));
  return rep;
}

// Trains P1 and P2 on the same split and reports both validation scores.
inline nlohmann::json cmd_ablate(const RunConfig& cfg) {
  const auto sd = load_split(cfg);
  nlohmann::json rows = nlohmann::json::array();
  std::string table = "mode  avg_f1  total_acc  metric\n";
  for (Mode mode : {Mode::p1, Mode::p2}) {
    RunConfig c = cfg;
    c.mode = mode;
    const std::string tag = mode == Mode::p1 ? "p1" : "p2";
    const auto r = train_to_dir(c, sd, cfg.seed, fs::path(cfg.model_dir) / ("ablate_" + tag), cfg.jobs);
    const auto rep = evaluate_pipeline(r.models, sd.val);
    nlohmann::json flags = nlohmann::json::object();
    for (const auto& m : r.models) flags[m.au_name] = m.uncertainty.has_value();
    rows.push_back({{"mode", tag}, {"use_uncertainty", flags}, {"report", eval::to_json(rep)}});
    table += tag + "    " + eval::format3(rep.average_f1) + "   " + eval::format3(rep.total_accuracy) + "      " +
             eval::format3(rep.competition) + "\n";
  }
  nlohmann::json report{{"command", "ablate"},
                        {"config_hash", config_hash(cfg)},
                        {"dataset_manifest_hash", sd.manifest},
                        {"seed", cfg.seed},
                        {"rows", rows}};
  fs::create_directories(cfg.report_dir);
  write_json(fs::path(cfg.report_dir) / "ablation.json", report);
  util::write_file_atomic(fs::path(cfg.report_dir) / "ablation.txt", table);
  return report;
}

}  // namespace aurank::pipeline

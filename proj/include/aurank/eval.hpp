#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "aurank/data/io.hpp"
#include "aurank/error.hpp"

namespace aurank::eval {

// 0.5 * average F1 + 0.5 * total accuracy
inline double competition_metric(double avg_f1, double total_accuracy) {
  if (!(avg_f1 >= 0.0 && avg_f1 <= 1.0) || !(total_accuracy >= 0.0 && total_accuracy <= 1.0))
    throw InvalidInputError("metric inputs must lie in [0, 1]");
  return 0.5 * avg_f1 + 0.5 * total_accuracy;
}

// Three-decimal rendering used by all reports.
inline std::string format3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }

  // Without any positive in truth or prediction, F1 is 2TP/(2TP+FP+FN) = 0/0;
  // such an AU counts as perfectly predicted.
  bool f1_degenerate() const { return tp + fp + fn == 0; }

  double f1() const {
    if (f1_degenerate()) return 1.0;
    return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
  }

  double accuracy() const {
    return total() == 0 ? 0.0 : static_cast<double>(tp + tn) / static_cast<double>(total());
  }

  void add(int truth, int pred) {
    if (truth == 1) (pred == 1 ? tp : fn)++;
    else (pred == 1 ? fp : tn)++;
  }

  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct AuScore {
  std::string au;
  ConfusionCounts counts;
  double f1 = 0.0;
  double accuracy = 0.0;
  bool f1_degenerate = false;
  std::size_t skipped = 0;
};

struct MetricReport {
  std::vector<AuScore> per_au;
  double average_f1 = 0.0;
  double total_accuracy = 0.0;
  double mean_per_au_accuracy = 0.0;
  double competition = 0.0;
  std::size_t evaluated = 0;  // frame-AU decisions
  std::size_t skipped = 0;    // frame-AU cells with the invalid marker
};

inline MetricReport make_report(std::vector<AuScore> per_au) {
  MetricReport rep;
  std::size_t correct = 0;
  double f1_sum = 0.0, acc_sum = 0.0;
  for (auto& s : per_au) {
    s.f1 = s.counts.f1();
    s.f1_degenerate = s.counts.f1_degenerate();
    s.accuracy = s.counts.accuracy();
    f1_sum += s.f1;
    acc_sum += s.accuracy;
    correct += s.counts.tp + s.counts.tn;
    rep.evaluated += s.counts.total();
    rep.skipped += s.skipped;
  }
  if (per_au.empty()) throw UndefinedMetricError("no AUs to score");
  const auto n = static_cast<double>(per_au.size());
  rep.average_f1 = f1_sum / n;
  rep.mean_per_au_accuracy = acc_sum / n;
  rep.total_accuracy = rep.evaluated == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(rep.evaluated);
  rep.competition = competition_metric(rep.average_f1, rep.total_accuracy);
  rep.per_au = std::move(per_au);
  return rep;
}

namespace detail {

using Key = std::pair<std::string, std::size_t>;

inline std::string key_str(const Key& k) { return k.first + " frame " + std::to_string(k.second); }

inline std::vector<std::size_t> column_indices(const data::AnnotationTable& t, std::span<const std::string> aus,
                                               const char* which) {
  std::vector<std::size_t> idx;
  for (const auto& au : aus) {
    auto it = std::find(t.au_names.begin(), t.au_names.end(), au);
    if (it == t.au_names.end()) throw AlignmentError(std::string(which) + " has no column " + au);
    idx.push_back(static_cast<std::size_t>(it - t.au_names.begin()));
  }
  return idx;
}

inline std::map<Key, const data::AnnotationRow*> index_rows(const data::AnnotationTable& t, const char* which) {
  std::map<Key, const data::AnnotationRow*> m;
  for (const auto& r : t.rows)
    if (!m.emplace(Key{r.video_id, r.frame_index}, &r).second)
      throw AlignmentError(std::string(which) + " has duplicate row " + key_str({r.video_id, r.frame_index}));
  return m;
}

}  // namespace detail

// Per-AU F1, unweighted mean F1, and pooled frame-AU accuracy for binary
// occurrence labels. Rows are matched by (video_id, frame_index); cells whose
// truth carries the invalid marker are skipped.
inline MetricReport score_occurrence(const data::AnnotationTable& predictions, const data::AnnotationTable& truth,
                                     std::span<const std::string> au_list) {
  const auto pcols = detail::column_indices(predictions, au_list, "predictions");
  const auto tcols = detail::column_indices(truth, au_list, "ground truth");
  const auto prows = detail::index_rows(predictions, "predictions");
  const auto trows = detail::index_rows(truth, "ground truth");

  auto pit = prows.begin();
  auto tit = trows.begin();
  for (; pit != prows.end() && tit != trows.end(); ++pit, ++tit)
    if (pit->first != tit->first)
      throw AlignmentError("first mismatch: prediction " + detail::key_str(pit->first) + " vs ground truth " +
                           detail::key_str(tit->first));
  if (pit != prows.end()) throw AlignmentError("prediction " + detail::key_str(pit->first) + " has no ground truth");
  if (tit != trows.end()) throw AlignmentError("ground truth " + detail::key_str(tit->first) + " has no prediction");

  std::vector<AuScore> scores(au_list.size());
  for (std::size_t a = 0; a < au_list.size(); ++a) scores[a].au = au_list[a];
  for (const auto& [key, trow] : trows) {
    const auto* prow = prows.at(key);
    for (std::size_t a = 0; a < au_list.size(); ++a) {
      const int y = trow->labels[tcols[a]];
      const int p = prow->labels[pcols[a]];
      if (y == data::kInvalidLabel) {
        ++scores[a].skipped;
        continue;
      }
      if ((y != 0 && y != 1) || (p != 0 && p != 1))
        throw SchemaError("occurrence labels must be 0 or 1 at " + detail::key_str(key));
      scores[a].counts.add(y, p);
    }
  }
  return make_report(std::move(scores));
}

inline nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json per_au = nlohmann::json::array();
  for (const auto& s : r.per_au)
    per_au.push_back({{"au", s.au},
                      {"f1", s.f1},
                      {"accuracy", s.accuracy},
                      {"f1_degenerate", s.f1_degenerate},
                      {"tp", s.counts.tp},
                      {"fp", s.counts.fp},
                      {"fn", s.counts.fn},
                      {"tn", s.counts.tn},
                      {"skipped", s.skipped}});
  return {{"per_au", per_au},
          {"average_f1", r.average_f1},
          {"total_accuracy", r.total_accuracy},
          {"mean_per_au_accuracy", r.mean_per_au_accuracy},
          {"competition_metric", r.competition},
          {"evaluated", r.evaluated},
          {"skipped", r.skipped}};
}

inline std::string format_table(const MetricReport& r) {
  std::ostringstream out;
  out << "AU        F1     Acc    TP     FP     FN     TN\n";
  for (const auto& s : r.per_au) {
    char line[160];
    std::snprintf(line, sizeof line, "%-8s  %s  %s  %-5zu  %-5zu  %-5zu  %-5zu%s\n", s.au.c_str(),
                  format3(s.f1).c_str(), format3(s.accuracy).c_str(), s.counts.tp, s.counts.fp, s.counts.fn,
                  s.counts.tn, s.f1_degenerate ? "  (no positives)" : "");
    out << line;
  }
  out << "Average F1          " << format3(r.average_f1) << '\n'
      << "Total Accuracy      " << format3(r.total_accuracy) << '\n'
      << "Competition Metric  " << format3(r.competition) << '\n'
      << "evaluated " << r.evaluated << ", skipped " << r.skipped << '\n';
  return out.str();
}

// Kendall tau-b.
inline double kendall_tau(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("kendall_tau needs equal-length series");
  if (a.size() < 2) throw ShapeError("kendall_tau needs at least two observations");
  long long concordant = 0, discordant = 0, ties_a = 0, ties_b = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const double da = a[i] - a[j], db = b[i] - b[j];
      if (da == 0.0 && db == 0.0) continue;
      if (da == 0.0) ++ties_a;
      else if (db == 0.0) ++ties_b;
      else if ((da > 0.0) == (db > 0.0)) ++concordant;
      else ++discordant;
    }
  const double n_a = static_cast<double>(concordant + discordant + ties_b);
  const double n_b = static_cast<double>(concordant + discordant + ties_a);
  if (n_a == 0.0 || n_b == 0.0) throw UndefinedMetricError("kendall_tau of a constant series");
  return static_cast<double>(concordant - discordant) / std::sqrt(n_a * n_b);
}

// Mann-Whitney AUROC of `score` as a detector of `positive`; tied scores get averaged ranks.
inline double occlusion_auroc(std::span<const double> score, const std::vector<bool>& positive) {
  if (score.size() != positive.size()) throw ShapeError("auroc needs equal-length inputs");
  const std::size_t n = score.size();
  const auto n_pos = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), true));
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw UndefinedMetricError("auroc needs both classes present");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return score[x] < score[y]; });
  double rank_sum = 0.0;
  for (std::size_t k = 0; k < n;) {
    std::size_t e = k;
    while (e + 1 < n && score[order[e + 1]] == score[order[k]]) ++e;
    const double avg_rank = 0.5 * static_cast<double>(k + e) + 1.0;
    for (std::size_t q = k; q <= e; ++q)
      if (positive[order[q]]) rank_sum += avg_rank;
    k = e + 1;
  }
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

}  // namespace aurank::eval

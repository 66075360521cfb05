#include <catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "aurank/data/io.hpp"
#include "aurank/eval.hpp"
#include "oracles.hpp"

using namespace aurank;
using Catch::Approx;

namespace {

data::AnnotationTable table(const std::vector<std::vector<int>>& cols, std::vector<std::string> aus = {}) {
  data::AnnotationTable t;
  if (aus.empty())
    for (std::size_t a = 0; a < cols.size(); ++a) aus.push_back("AU" + std::to_string(a + 1));
  t.au_names = aus;
  for (std::size_t k = 0; k < cols[0].size(); ++k) {
    data::AnnotationRow r{"v" + std::to_string(k / 3), k % 3, {}};
    for (const auto& c : cols) r.labels.push_back(c[k]);
    t.rows.push_back(r);
  }
  return t;
}

}  // namespace

TEST_CASE("competition metric reference rows") {
  CHECK(eval::competition_metric(0.40, 0.22) == Approx(0.31).margin(1e-12));
  CHECK(eval::format3(eval::competition_metric(0.40, 0.22)) == "0.310");
  CHECK(eval::competition_metric(0.460, 0.839) == Approx(0.6495).margin(1e-12));
  CHECK(eval::format3(eval::competition_metric(0.460, 0.839)) == "0.649");
  CHECK(eval::competition_metric(1.0, 1.0) == 1.0);
  CHECK_THROWS_AS(eval::competition_metric(1.1, 0.5), InvalidInputError);
  CHECK_THROWS_AS(eval::competition_metric(0.5, -0.1), InvalidInputError);
  CHECK_THROWS_AS(eval::competition_metric(std::nan(""), 0.5), InvalidInputError);
}

TEST_CASE("four-frame example tallies by hand") {
  const auto pred = table({{1, 0, 1, 0}});
  const auto truth = table({{1, 0, 0, 0}});
  const std::vector<std::string> aus{"AU1"};
  const auto r = eval::score_occurrence(pred, truth, aus);
  CHECK(r.per_au[0].counts == eval::ConfusionCounts{1, 1, 0, 2});
  CHECK(r.average_f1 == Approx(2.0 / 3.0));
  CHECK(r.total_accuracy == Approx(0.75));
  CHECK(r.competition == Approx(0.708333).margin(1e-6));
}

TEST_CASE("perfect predictions and the unweighted F1 mean") {
  const auto t = table({{1, 0, 1, 1, 0, 0}, {0, 1, 0, 0, 1, 1}});
  const std::vector<std::string> aus{"AU1", "AU2"};
  const auto r = eval::score_occurrence(t, t, aus);
  CHECK(r.average_f1 == 1.0);
  CHECK(r.total_accuracy == 1.0);
  CHECK(r.competition == 1.0);

  // F1 0.4 on AU1 and 0.6 on AU2 -> 0.5
  eval::AuScore a, b;
  a.counts = {1, 3, 0, 0};  // 2/(2+3) = 0.4
  b.counts = {3, 4, 0, 0};  // 6/(6+4) = 0.6
  CHECK(eval::make_report({a, b}).average_f1 == Approx(0.5));
}

TEST_CASE("accuracy is pooled over all frame-AU decisions") {
  // AU1: 4 of 4 correct; AU2 scored on 2 frames only, 0 of 2 correct
  const auto pred = table({{1, 0, 1, 0}, {1, 1, 0, 0}});
  auto truth = table({{1, 0, 1, 0}, {0, 0, data::kInvalidLabel, data::kInvalidLabel}});
  const std::vector<std::string> aus{"AU1", "AU2"};
  const auto r = eval::score_occurrence(pred, truth, aus);
  CHECK(r.total_accuracy == Approx(4.0 / 6.0));
  CHECK(r.mean_per_au_accuracy == Approx(0.5));
  CHECK(r.skipped == 2);
  CHECK(r.evaluated == 6);
}

TEST_CASE("no positives anywhere counts as F1 = 1") {
  const auto t = table({{0, 0, 0}});
  const std::vector<std::string> aus{"AU1"};
  const auto r = eval::score_occurrence(t, t, aus);
  CHECK(r.per_au[0].f1 == 1.0);
  CHECK(r.per_au[0].f1_degenerate);
  // a single false positive makes it 0
  CHECK(eval::score_occurrence(table({{0, 1, 0}}), t, aus).per_au[0].f1 == 0.0);
}

TEST_CASE("score_occurrence agrees with a brute-force tally on random tables") {
  std::mt19937_64 rng(1);
  const std::vector<std::string> aus{"AU1"};
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 12;
    std::vector<int> p(n), y(n);
    for (std::size_t k = 0; k < n; ++k) {
      p[k] = static_cast<int>(rng() % 2);
      y[k] = static_cast<int>(rng() % 2);
    }
    const auto r = eval::score_occurrence(table({p}), table({y}), aus);
    const auto t = oracle::tally(p, y);
    CHECK(r.per_au[0].counts.tp == static_cast<std::size_t>(t.tp));
    CHECK(r.per_au[0].counts.fp == static_cast<std::size_t>(t.fp));
    CHECK(r.per_au[0].counts.fn == static_cast<std::size_t>(t.fn));
    CHECK(r.per_au[0].counts.tn == static_cast<std::size_t>(t.tn));
    CHECK(r.competition == Approx(oracle::metric_from_tally(t)).epsilon(1e-12));
  }
}

TEST_CASE("shuffling rows never changes the metrics") {
  std::mt19937_64 rng(2);
  std::vector<int> a(30), b(30), c(30), d(30);
  for (std::size_t k = 0; k < 30; ++k) {
    a[k] = static_cast<int>(rng() % 2);
    b[k] = static_cast<int>(rng() % 2);
    c[k] = static_cast<int>(rng() % 2);
    d[k] = static_cast<int>(rng() % 2);
  }
  auto pred = table({a, b});
  auto truth = table({c, d});
  const std::vector<std::string> aus{"AU1", "AU2"};
  const auto base = eval::score_occurrence(pred, truth, aus);
  for (int k = 0; k < 10; ++k) {
    std::shuffle(pred.rows.begin(), pred.rows.end(), rng);
    std::shuffle(truth.rows.begin(), truth.rows.end(), rng);
    const auto r = eval::score_occurrence(pred, truth, aus);
    CHECK(r.competition == base.competition);
    CHECK(r.average_f1 == base.average_f1);
    CHECK(r.total_accuracy == base.total_accuracy);
  }
}

TEST_CASE("columns are matched by name") {
  const auto pred = table({{1, 0, 1}, {0, 0, 1}}, {"AU2", "AU1"});
  const auto truth = table({{0, 0, 1}, {1, 0, 1}}, {"AU1", "AU2"});
  const std::vector<std::string> aus{"AU1", "AU2"};
  CHECK(eval::score_occurrence(pred, truth, aus).competition == 1.0);
  const std::vector<std::string> missing{"AU7"};
  CHECK_THROWS_AS(eval::score_occurrence(pred, truth, missing), AlignmentError);
}

TEST_CASE("misaligned inputs name the first mismatch") {
  const auto truth = table({{1, 0, 1, 0}});
  auto pred = truth;
  pred.rows[1].frame_index = 7;
  const std::vector<std::string> aus{"AU1"};
  try {
    eval::score_occurrence(pred, truth, aus);
    FAIL("expected an alignment error");
  } catch (const AlignmentError& e) {
    CHECK(std::string(e.what()).find("v0 frame 1") != std::string::npos);
  }
  auto shorter = truth;
  shorter.rows.pop_back();
  CHECK_THROWS_AS(eval::score_occurrence(shorter, truth, aus), AlignmentError);
  CHECK_THROWS_AS(eval::score_occurrence(truth, shorter, aus), AlignmentError);
  auto dup = truth;
  dup.rows[1] = dup.rows[0];
  CHECK_THROWS_AS(eval::score_occurrence(dup, truth, aus), AlignmentError);
  auto nonbinary = truth;
  nonbinary.rows[0].labels[0] = 3;
  CHECK_THROWS_AS(eval::score_occurrence(nonbinary, truth, aus), SchemaError);
}

TEST_CASE("report rendering") {
  const auto r = eval::score_occurrence(table({{1, 0, 1, 0}}), table({{1, 0, 0, 0}}), std::vector<std::string>{"AU1"});
  const auto j = eval::to_json(r);
  CHECK(j.at("competition_metric").get<double>() == Approx(r.competition));
  CHECK(eval::format_table(r).find("0.708") != std::string::npos);
}

TEST_CASE("kendall tau examples") {
  const std::vector<double> a{1, 2, 3, 4}, b{1, 3, 2, 4}, rev{4, 3, 2, 1};
  CHECK(eval::kendall_tau(a, a) == Approx(1.0));
  CHECK(eval::kendall_tau(a, rev) == Approx(-1.0));
  CHECK(eval::kendall_tau(a, b) == Approx(4.0 / 6.0));
  CHECK(eval::kendall_tau(a, b) == Approx(oracle::kendall_tau_b(a, b)));
  CHECK_THROWS_AS(eval::kendall_tau(a, std::vector<double>{1, 2}), ShapeError);
  CHECK_THROWS_AS(eval::kendall_tau(std::vector<double>{1}, std::vector<double>{1}), ShapeError);
  CHECK_THROWS_AS(eval::kendall_tau(a, std::vector<double>{2, 2, 2, 2}), UndefinedMetricError);
}

TEST_CASE("kendall tau-b matches brute force with ties") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 40;
    std::vector<double> a(n), b(n);
    for (std::size_t k = 0; k < n; ++k) {
      a[k] = static_cast<double>(rng() % 5);
      b[k] = static_cast<double>(rng() % 5);
    }
    if (std::all_of(a.begin(), a.end(), [&](double x) { return x == a[0]; }) ||
        std::all_of(b.begin(), b.end(), [&](double x) { return x == b[0]; }))
      continue;
    CHECK(eval::kendall_tau(a, b) == Approx(oracle::kendall_tau_b(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("occlusion AUROC") {
  const std::vector<double> s{0.1, 0.2, 0.9, 0.8};
  const std::vector<bool> occ{false, false, true, true};
  CHECK(eval::occlusion_auroc(s, occ) == 1.0);
  CHECK(eval::occlusion_auroc(s, {true, true, false, false}) == 0.0);
  CHECK_THROWS_AS(eval::occlusion_auroc(s, {true, true, true, true}), UndefinedMetricError);
  CHECK_THROWS_AS(eval::occlusion_auroc(s, {true, false}), ShapeError);

  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 4 + rng() % 30;
    std::vector<double> score(n);
    std::vector<bool> pos(n), inv(n);
    for (std::size_t k = 0; k < n; ++k) {
      score[k] = static_cast<double>(rng() % 6);  // plenty of ties
      pos[k] = k < 2 ? k == 0 : rng() % 3 == 0;
      inv[k] = !pos[k];
    }
    const double auc = eval::occlusion_auroc(score, pos);
    CHECK(auc == Approx(oracle::auroc_by_pairs(score, pos)).epsilon(1e-12));
    CHECK(eval::occlusion_auroc(score, inv) == Approx(1.0 - auc).epsilon(1e-12));
  }

  // scores independent of the flags
  std::uniform_real_distribution<double> u;
  std::vector<double> noise(20000);
  std::vector<bool> flags(noise.size());
  for (std::size_t k = 0; k < noise.size(); ++k) {
    noise[k] = u(rng);
    flags[k] = u(rng) < 0.2;
  }
  CHECK(std::abs(eval::occlusion_auroc(noise, flags) - 0.5) <= 0.05);
}

#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>

#include "fairaudit/observational.hpp"
#include "helpers.hpp"

using namespace fairaudit;
using testutil::CohortBuilder;

namespace {

struct BruteCounts {
  int64_t tp = 0, fp = 0, tn = 0, fn = 0;
};

// Recompute confusion counts straight from record views, one map lookup per
// record, no shared code with the implementation under test.
std::map<std::vector<std::string>, BruteCounts> brute_confusion(
    const AuditCohort& cohort, const std::vector<std::string>& axis_attrs) {
  std::map<std::vector<std::string>, BruteCounts> out;
  for (int64_t i = 0; i < cohort.size(); ++i) {
    const auto rec = record_view(cohort, i);
    std::vector<std::string> key;
    for (const auto& a : axis_attrs) {
      for (const auto& [name, cat] : rec.attributes) {
        if (name == a) key.push_back(cat);
      }
    }
    BruteCounts& c = out[key];
    const bool y = rec.y_true != 0;
    const bool yhat = *rec.y_pred != 0;
    if (y && yhat) ++c.tp;
    else if (!y && yhat) ++c.fp;
    else if (!y && !yhat) ++c.tn;
    else ++c.fn;
  }
  return out;
}

double brute_auroc_pairs(const std::vector<uint8_t>& labels,
                         const std::vector<double>& scores) {
  double wins = 0.0;
  int64_t np = 0, nn = 0;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i]) ++np; else ++nn;
    for (size_t j = 0; j < labels.size(); ++j) {
      if (!labels[i] || labels[j]) continue;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / (static_cast<double>(np) * static_cast<double>(nn));
}

}  // namespace

TEST_CASE("confusion counts match the worked example") {
  CohortBuilder b({"g"});
  b.add(1, 1, std::nullopt, {"A"});
  b.add(0, 1, std::nullopt, {"A"});
  b.add(0, 0, std::nullopt, {"A"});
  const AuditCohort cohort = b.build();
  const AxisIndex index =
      enumerate_subgroups(cohort, make_axis("g", {"g"}, cohort.schema));
  const ConfusionPanel panel = confusion_stats(cohort, index, {0});
  REQUIRE(panel.groups.size() == 1);
  const GroupStats& g = panel.groups[0];
  CHECK(g.tp == 1);
  CHECK(g.fp == 1);
  CHECK(g.tn == 1);
  CHECK(g.fn == 0);
  CHECK(g.ppr == doctest::Approx(2.0 / 3.0));
  CHECK(panel.pooled.n == 3);
  CHECK(panel.pooled.key.label() == "ALL");
}

TEST_CASE("all-negative predictions leave tpr undefined only without positives") {
  CohortBuilder b({"g"});
  b.add(0, 0, std::nullopt, {"A"});
  b.add(0, 0, std::nullopt, {"A"});
  b.add(1, 0, std::nullopt, {"B"});
  b.add(0, 0, std::nullopt, {"B"});
  const AuditCohort cohort = b.build();
  const AxisIndex index =
      enumerate_subgroups(cohort, make_axis("g", {"g"}, cohort.schema));
  const ConfusionPanel panel = confusion_stats(cohort, index, {0, 1});
  CHECK(panel.groups[0].ppr == 0.0);
  CHECK(panel.groups[0].fpr == 0.0);
  CHECK_FALSE(panel.groups[0].tpr.has_value());
  CHECK(panel.groups[1].tpr == 0.0);
  CHECK(panel.groups[1].fnr == 1.0);
}

TEST_CASE("empty qualifying list still yields the pooled entry") {
  CohortBuilder b({"g"});
  b.add(1, 1, std::nullopt, {"A"});
  const AuditCohort cohort = b.build();
  const AxisIndex index =
      enumerate_subgroups(cohort, make_axis("g", {"g"}, cohort.schema));
  const ConfusionPanel panel = confusion_stats(cohort, index, {});
  CHECK(panel.groups.empty());
  CHECK(panel.pooled.n == 1);
}

TEST_CASE("confusion stats equal a brute-force recomputation exactly") {
  Rng rng(101);
  for (int trial = 0; trial < 40; ++trial) {
    const int n_attrs = 1 + static_cast<int>(rng.uniform_below(3));
    const AuditCohort cohort = testutil::random_cohort(
        rng, 20 + static_cast<int64_t>(rng.uniform_below(180)), n_attrs, 3);
    const GroupingAxis axis =
        make_axis("all", cohort.schema.attributes, cohort.schema);
    const AxisIndex index = enumerate_subgroups(cohort, axis);
    std::vector<int32_t> all_cells(index.keys.size());
    for (size_t k = 0; k < all_cells.size(); ++k) {
      all_cells[k] = static_cast<int32_t>(k);
    }
    const ConfusionPanel panel = confusion_stats(cohort, index, all_cells);
    const auto brute = brute_confusion(cohort, axis.attribute_names);
    REQUIRE(panel.groups.size() == brute.size());
    for (const auto& g : panel.groups) {
      const auto it = brute.find(g.key.categories);
      REQUIRE(it != brute.end());
      CHECK(g.tp == it->second.tp);
      CHECK(g.fp == it->second.fp);
      CHECK(g.tn == it->second.tn);
      CHECK(g.fn == it->second.fn);
      const int64_t n = it->second.tp + it->second.fp + it->second.tn +
                        it->second.fn;
      CHECK(g.n == n);
      CHECK(g.ppr == static_cast<double>(it->second.tp + it->second.fp) /
                         static_cast<double>(n));
      if (it->second.tp + it->second.fn > 0) {
        CHECK(*g.tpr == static_cast<double>(it->second.tp) /
                            static_cast<double>(it->second.tp + it->second.fn));
        CHECK(*g.fnr == 1.0 - *g.tpr);
      } else {
        CHECK_FALSE(g.tpr.has_value());
      }
    }
  }
}

TEST_CASE("disparity gap is the range over defined rates") {
  auto stats_with_ppr = [](std::vector<double> values) {
    std::vector<GroupStats> stats;
    for (size_t i = 0; i < values.size(); ++i) {
      GroupStats g;
      g.key = SubgroupKey{{"g" + std::to_string(i)}};
      g.n = 10;
      g.ppr = values[i];
      stats.push_back(std::move(g));
    }
    return stats;
  };

  const GapResult r = disparity_gap(stats_with_ppr({0.5, 0.2, 0.4}),
                                    RateMetric::ppr);
  CHECK(*r.value == doctest::Approx(0.3));
  CHECK(r.contributing.size() == 3);

  const GapResult same = disparity_gap(stats_with_ppr({0.4, 0.4}),
                                       RateMetric::ppr);
  CHECK(*same.value == 0.0);

  const GapResult lone = disparity_gap(stats_with_ppr({0.4}),
                                       RateMetric::ppr);
  CHECK_FALSE(lone.value.has_value());
  CHECK(lone.contributing.empty());
}

TEST_CASE("groups with undefined rates drop out of that metric only") {
  std::vector<GroupStats> stats(3);
  stats[0].key = SubgroupKey{{"a"}};
  stats[0].tpr = 0.9;
  stats[1].key = SubgroupKey{{"b"}};
  stats[1].tpr = std::nullopt;
  stats[2].key = SubgroupKey{{"c"}};
  stats[2].tpr = 0.6;
  const GapResult r = disparity_gap(stats, RateMetric::tpr);
  CHECK(*r.value == doctest::Approx(0.3));
  REQUIRE(r.contributing.size() == 2);
  CHECK(r.contributing[0].label() == "a");
  CHECK(r.contributing[1].label() == "c");

  std::vector<GroupStats> one_defined(2);
  one_defined[0].tpr = 0.5;
  CHECK_FALSE(disparity_gap(one_defined, RateMetric::tpr).value.has_value());
}

TEST_CASE("accuracy counts exact agreement") {
  CohortBuilder b({"g"});
  b.add(1, 1, std::nullopt, {"A"});
  b.add(0, 0, std::nullopt, {"A"});
  b.add(1, 1, std::nullopt, {"A"});
  b.add(0, 1, std::nullopt, {"A"});
  CHECK(accuracy(b.build()) == doctest::Approx(0.75));

  CohortBuilder flip({"g"});
  flip.add(1, 0, std::nullopt, {"A"});
  flip.add(0, 1, std::nullopt, {"A"});
  CHECK(accuracy(flip.build()) == 0.0);
}

TEST_CASE("auroc handles the worked example and edge cases") {
  CHECK(*auroc({0, 1, 0, 1}, {0.1, 0.4, 0.5, 0.8}) == doctest::Approx(0.75));
  CHECK(*auroc({0, 0, 1, 1}, {0.1, 0.2, 0.8, 0.9}) == 1.0);
  CHECK(*auroc({0, 1, 0, 1}, {0.5, 0.5, 0.5, 0.5}) == doctest::Approx(0.5));
  CHECK_FALSE(auroc({1, 1}, {0.2, 0.9}).has_value());
  CHECK_FALSE(auroc({0, 0}, {0.2, 0.9}).has_value());
  CHECK_THROWS_AS(auroc({0, 1}, {0.5}), ValidationError);
}

TEST_CASE("auroc equals the pairwise win fraction on tied random data") {
  std::mt19937_64 gen(2024);
  std::uniform_int_distribution<int> lab(0, 1);
  std::uniform_int_distribution<int> level(0, 6);  // coarse grid forces ties
  for (int trial = 0; trial < 60; ++trial) {
    const size_t n = 5 + gen() % 80;
    std::vector<uint8_t> labels(n);
    std::vector<double> scores(n);
    for (size_t i = 0; i < n; ++i) {
      labels[i] = static_cast<uint8_t>(lab(gen));
      scores[i] = level(gen) / 6.0;
    }
    const auto got = auroc(labels, scores);
    const bool has_pos = std::find(labels.begin(), labels.end(), 1) !=
                         labels.end();
    const bool has_neg = std::find(labels.begin(), labels.end(), 0) !=
                         labels.end();
    if (!has_pos || !has_neg) {
      CHECK_FALSE(got.has_value());
      continue;
    }
    REQUIRE(got.has_value());
    CHECK(*got == doctest::Approx(brute_auroc_pairs(labels, scores))
                      .epsilon(1e-12));
  }
}

TEST_CASE("youden threshold matches the worked example") {
  CohortBuilder b({"g"});
  b.add(0, std::nullopt, 0.1, {"A"});
  b.add(1, std::nullopt, 0.4, {"A"});
  b.add(0, std::nullopt, 0.5, {"A"});
  b.add(1, std::nullopt, 0.8, {"A"});
  const AuditCohort cohort = b.build();
  const AxisIndex index =
      enumerate_subgroups(cohort, make_axis("g", {"g"}, cohort.schema));
  const YoudenResult r = youden_thresholds(cohort, index, {0});
  // t in {0.4, 0.8} both reach J = 0.5; ties break toward the larger.
  CHECK(r.per_cell[0].threshold == doctest::Approx(0.8));
  CHECK(r.per_cell[0].j == doctest::Approx(0.5));
  CHECK_FALSE(r.per_cell[0].fallback);
  CHECK(r.global_threshold == doctest::Approx(0.8));
}

TEST_CASE("youden degenerate cases") {
  SUBCASE("identical scores give J = 0 at that score") {
    CohortBuilder b({"g"});
    b.add(0, std::nullopt, 0.3, {"A"});
    b.add(1, std::nullopt, 0.3, {"A"});
    const AuditCohort cohort = b.build();
    const AxisIndex index =
        enumerate_subgroups(cohort, make_axis("g", {"g"}, cohort.schema));
    const YoudenResult r = youden_thresholds(cohort, index, {0});
    CHECK(r.per_cell[0].threshold == doctest::Approx(0.3));
    CHECK(r.per_cell[0].j == doctest::Approx(0.0));
  }
  SUBCASE("perfectly separable group achieves J = 1") {
    CohortBuilder b({"g"});
    b.add(0, std::nullopt, 0.1, {"A"});
    b.add(0, std::nullopt, 0.2, {"A"});
    b.add(1, std::nullopt, 0.7, {"A"});
    b.add(1, std::nullopt, 0.9, {"A"});
    const AuditCohort cohort = b.build();
    const AxisIndex index =
        enumerate_subgroups(cohort, make_axis("g", {"g"}, cohort.schema));
    const YoudenResult r = youden_thresholds(cohort, index, {0});
    CHECK(r.per_cell[0].j == doctest::Approx(1.0));
    CHECK(r.per_cell[0].threshold == doctest::Approx(0.7));
  }
  SUBCASE("single-class group falls back to the global threshold, flagged") {
    CohortBuilder b({"g"});
    b.add(0, std::nullopt, 0.1, {"A"});
    b.add(1, std::nullopt, 0.9, {"A"});
    b.add(1, std::nullopt, 0.6, {"B"});
    b.add(1, std::nullopt, 0.7, {"B"});
    const AuditCohort cohort = b.build();
    const AxisIndex index =
        enumerate_subgroups(cohort, make_axis("g", {"g"}, cohort.schema));
    const YoudenResult r = youden_thresholds(cohort, index, {0, 1});
    CHECK_FALSE(r.per_cell[0].fallback);
    CHECK(r.per_cell[1].fallback);
    CHECK(r.per_cell[1].threshold == r.global_threshold);
  }
  SUBCASE("no scores anywhere is an error") {
    CohortBuilder b({"g"});
    b.add(1, 1, std::nullopt, {"A"});
    const AuditCohort cohort = b.build();
    const AxisIndex index =
        enumerate_subgroups(cohort, make_axis("g", {"g"}, cohort.schema));
    CHECK_THROWS_AS(youden_thresholds(cohort, index, {0}), ValidationError);
  }
}

TEST_CASE("youden threshold is optimal over every observed score") {
  Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    CohortBuilder b({"g"});
    const int n = 10 + static_cast<int>(rng.uniform_below(60));
    bool pos = false, neg = false;
    std::vector<std::pair<double, int>> pts;
    for (int i = 0; i < n; ++i) {
      const int y = rng.bernoulli(0.5) ? 1 : 0;
      const double s = std::floor(rng.uniform01() * 8.0) / 8.0;
      (y ? pos : neg) = true;
      pts.emplace_back(s, y);
      b.add(y, std::nullopt, s, {"A"});
    }
    if (!pos || !neg) continue;
    const AuditCohort cohort = b.build();
    const AxisIndex index =
        enumerate_subgroups(cohort, make_axis("g", {"g"}, cohort.schema));
    const YoudenResult r = youden_thresholds(cohort, index, {0});

    int64_t n_pos = 0, n_neg = 0;
    for (const auto& [s, y] : pts) (y ? n_pos : n_neg)++;
    auto j_at = [&](double t) {
      int64_t tp = 0, fp = 0;
      for (const auto& [s, y] : pts) {
        if (s >= t) (y ? tp : fp)++;
      }
      return static_cast<double>(tp) / static_cast<double>(n_pos) -
             static_cast<double>(fp) / static_cast<double>(n_neg);
    };
    double best_j = -2.0, best_t = 0.0;
    for (const auto& [s, y] : pts) {
      const double j = j_at(s);
      if (j > best_j || (j == best_j && s > best_t)) {
        best_j = j;
        best_t = s;
      }
    }
    CHECK(r.per_cell[0].j == doctest::Approx(best_j).epsilon(1e-12));
    CHECK(r.per_cell[0].threshold == doctest::Approx(best_t));
  }
}

TEST_CASE("fairness panel reports zero gaps for interchangeable groups") {
  CohortBuilder b({"race", "gender"});
  for (const std::string r : {"A", "B"}) {
    for (const std::string g : {"F", "M"}) {
      b.add(1, 1, 0.9, {r, g});
      b.add(1, 0, 0.3, {r, g});
      b.add(0, 1, 0.8, {r, g});
      b.add(0, 0, 0.2, {r, g});
    }
  }
  const AuditCohort cohort = b.build();
  const std::vector<GroupingAxis> axes = {
      make_axis("race", {"race"}, cohort.schema),
      make_axis("gender", {"gender"}, cohort.schema),
      make_axis("race_x_gender", {"race", "gender"}, cohort.schema)};
  const FairnessPanel panel = fairness_panel(cohort, axes, MaskingPolicy{0});
  REQUIRE(panel.axes.size() == 3);
  for (const auto& axis : panel.axes) {
    CHECK(*axis.gaps.dp.value == 0.0);
    CHECK(*axis.gaps.eo_fpr.value == 0.0);
    CHECK(*axis.gaps.eod.value == 0.0);
    CHECK_FALSE(axis.gaps.eo_max.has_value());
  }
  CHECK(panel.accuracy == doctest::Approx(0.5));
  REQUIRE(panel.auroc.has_value());
}

TEST_CASE("eo_max variant is the larger of the fpr and tpr gaps") {
  CohortBuilder b({"g"});
  // Group A: TPR 1.0, FPR 0.5. Group B: TPR 0.9, FPR 0.1.
  for (int i = 0; i < 10; ++i) b.add(1, 1, std::nullopt, {"A"});
  for (int i = 0; i < 5; ++i) b.add(0, 1, std::nullopt, {"A"});
  for (int i = 0; i < 5; ++i) b.add(0, 0, std::nullopt, {"A"});
  for (int i = 0; i < 9; ++i) b.add(1, 1, std::nullopt, {"B"});
  b.add(1, 0, std::nullopt, {"B"});
  b.add(0, 1, std::nullopt, {"B"});
  for (int i = 0; i < 9; ++i) b.add(0, 0, std::nullopt, {"B"});
  const AuditCohort cohort = b.build();
  const std::vector<GroupingAxis> axes = {
      make_axis("g", {"g"}, cohort.schema)};
  const FairnessPanel panel =
      fairness_panel(cohort, axes, MaskingPolicy{0}, true);
  const FairnessGapSet& gaps = panel.axes[0].gaps;
  CHECK(*gaps.eo_fpr.value == doctest::Approx(0.4));
  CHECK(*gaps.eod.value == doctest::Approx(0.1));
  REQUIRE(gaps.eo_max.has_value());
  CHECK(*gaps.eo_max->value == doctest::Approx(0.4));
}

TEST_CASE("gaps are invariant under row shuffles") {
  Rng rng(404);
  const AuditCohort cohort = testutil::random_cohort(rng, 150, 2, 3);
  const std::vector<GroupingAxis> axes = {
      make_axis("both", cohort.schema.attributes, cohort.schema)};
  const FairnessPanel before = fairness_panel(cohort, axes, MaskingPolicy{5});

  std::vector<PredictionRecord> records;
  for (int64_t i = 0; i < cohort.size(); ++i) {
    records.push_back(record_view(cohort, i));
  }
  std::shuffle(records.begin(), records.end(), std::mt19937_64(9));
  ColumnSpec spec;
  spec.id = "id";
  spec.y_true = "y";
  spec.y_score = "score";
  spec.y_pred = "pred";
  spec.attributes = cohort.schema.attributes;
  const AuditCohort shuffled = cohort_from_records(records, spec, "shuffled");
  const FairnessPanel after = fairness_panel(shuffled, axes, MaskingPolicy{5});

  CHECK(before.axes[0].gaps.dp.value == after.axes[0].gaps.dp.value);
  CHECK(before.axes[0].gaps.eo_fpr.value == after.axes[0].gaps.eo_fpr.value);
  CHECK(before.axes[0].gaps.eod.value == after.axes[0].gaps.eod.value);
  CHECK(before.accuracy == after.accuracy);
  CHECK(before.auroc == after.auroc);
  REQUIRE(before.axes[0].confusion.groups.size() ==
          after.axes[0].confusion.groups.size());
  for (size_t g = 0; g < before.axes[0].confusion.groups.size(); ++g) {
    CHECK(before.axes[0].confusion.groups[g].key ==
          after.axes[0].confusion.groups[g].key);
    CHECK(before.axes[0].confusion.groups[g].n ==
          after.axes[0].confusion.groups[g].n);
  }
}

TEST_CASE("single-attribute axis equals the one-attribute intersection") {
  Rng rng(55);
  const AuditCohort cohort = testutil::random_cohort(rng, 200, 2, 2);
  const std::vector<GroupingAxis> axes = {
      make_axis("solo", {"a0"}, cohort.schema),
      make_axis("inter", {"a0"}, cohort.schema)};
  const FairnessPanel panel = fairness_panel(cohort, axes, MaskingPolicy{0});
  CHECK(panel.axes[0].gaps.dp.value == panel.axes[1].gaps.dp.value);
  CHECK(panel.axes[0].gaps.eod.value == panel.axes[1].gaps.eod.value);
  CHECK(panel.axes[0].gaps.eo_fpr.value == panel.axes[1].gaps.eo_fpr.value);
}

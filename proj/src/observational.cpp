#include "fairaudit/observational.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fairaudit {

namespace {

void fill_rates(GroupStats& g) {
  g.n = g.tp + g.fp + g.tn + g.fn;
  if (g.n > 0) {
    g.ppr = static_cast<double>(g.tp + g.fp) / static_cast<double>(g.n);
    g.accuracy = static_cast<double>(g.tp + g.tn) / static_cast<double>(g.n);
  }
  if (g.tp + g.fn > 0) {
    g.tpr = static_cast<double>(g.tp) / static_cast<double>(g.tp + g.fn);
    g.fnr = 1.0 - *g.tpr;
  }
  if (g.fp + g.tn > 0) {
    g.fpr = static_cast<double>(g.fp) / static_cast<double>(g.fp + g.tn);
  }
}

void require_predictions(const AuditCohort& cohort) {
  for (int64_t i = 0; i < cohort.size(); ++i) {
    if (!cohort.has_pred(i)) {
      throw ValidationError(
          "y_pred not materialized; run derive_predictions first (row " +
          std::to_string(i + 1) + ")");
    }
  }
}

}  // namespace

ConfusionPanel confusion_stats(const AuditCohort& cohort,
                               const AxisIndex& index,
                               const std::vector<int32_t>& qualifying) {
  require_predictions(cohort);
  ConfusionPanel panel;
  std::vector<int32_t> slot(index.keys.size(), -1);
  for (size_t q = 0; q < qualifying.size(); ++q) {
    GroupStats g;
    g.key = index.keys[qualifying[q]];
    panel.groups.push_back(std::move(g));
    slot[qualifying[q]] = static_cast<int32_t>(q);
  }
  for (int64_t i = 0; i < cohort.size(); ++i) {
    const bool y = cohort.y_true[i] != 0;
    const bool yhat = cohort.y_pred[i] != 0;
    auto bump = [&](GroupStats& g) {
      if (y && yhat) ++g.tp;
      else if (!y && yhat) ++g.fp;
      else if (!y && !yhat) ++g.tn;
      else ++g.fn;
    };
    bump(panel.pooled);
    const int32_t s = slot[index.cell_of_record[i]];
    if (s >= 0) bump(panel.groups[s]);
  }
  for (auto& g : panel.groups) fill_rates(g);
  fill_rates(panel.pooled);
  panel.pooled.key = SubgroupKey{{"ALL"}};
  return panel;
}

GapResult disparity_gap(const std::vector<GroupStats>& stats,
                        RateMetric metric) {
  GapResult result;
  std::vector<double> values;
  for (const auto& g : stats) {
    std::optional<double> v;
    switch (metric) {
      case RateMetric::ppr: v = g.ppr; break;
      case RateMetric::fpr: v = g.fpr; break;
      case RateMetric::tpr: v = g.tpr; break;
    }
    if (v) {
      values.push_back(*v);
      result.contributing.push_back(g.key);
    }
  }
  if (values.size() < 2) {
    result.contributing.clear();
    return result;
  }
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  result.value = *hi - *lo;
  return result;
}

double accuracy(const AuditCohort& cohort) {
  require_predictions(cohort);
  int64_t correct = 0;
  for (int64_t i = 0; i < cohort.size(); ++i) {
    if ((cohort.y_true[i] != 0) == (cohort.y_pred[i] != 0)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(cohort.size());
}

std::optional<double> auroc(const std::vector<uint8_t>& labels,
                            const std::vector<double>& scores) {
  if (labels.size() != scores.size()) {
    throw ValidationError("auroc: labels and scores differ in length");
  }
  const size_t n = labels.size();
  int64_t n_pos = 0;
  for (uint8_t y : labels) n_pos += y != 0;
  const int64_t n_neg = static_cast<int64_t>(n) - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  // Midranks over tie runs; sum ranks of positives.
  double rank_sum_pos = 0.0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = (static_cast<double>(i + 1) +
                            static_cast<double>(j + 1)) / 2.0;
    for (size_t k = i; k <= j; ++k) {
      if (labels[order[k]] != 0) rank_sum_pos += midrank;
    }
    i = j + 1;
  }
  const double np = static_cast<double>(n_pos);
  const double nn = static_cast<double>(n_neg);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

namespace {

struct YoudenSweep {
  double threshold = 0.0;
  double j = 0.0;
  bool ok = false;  // had at least one positive and one negative
};

// Exhaustive sweep over observed score values with the >= rule; ties broken
// toward the largest threshold.
YoudenSweep youden_sweep(std::vector<std::pair<double, uint8_t>>& pts) {
  YoudenSweep best;
  int64_t n_pos = 0, n_neg = 0;
  for (const auto& [s, y] : pts) (y ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0) return best;
  std::sort(pts.begin(), pts.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  best.ok = true;
  int64_t tp = 0, fp = 0;
  size_t i = 0;
  while (i < pts.size()) {
    size_t j = i;
    while (j + 1 < pts.size() && pts[j + 1].first == pts[i].first) ++j;
    for (size_t k = i; k <= j; ++k) (pts[k].second ? tp : fp)++;
    const double tpr = static_cast<double>(tp) / static_cast<double>(n_pos);
    const double fpr = static_cast<double>(fp) / static_cast<double>(n_neg);
    const double val = tpr - fpr;
    // Descending sweep visits larger thresholds first, so strict > keeps
    // the largest threshold among ties.
    if (i == 0 || val > best.j) {
      best.j = val;
      best.threshold = pts[i].first;
    }
    i = j + 1;
  }
  return best;
}

}  // namespace

YoudenResult youden_thresholds(const AuditCohort& cohort,
                               const AxisIndex& index,
                               const std::vector<int32_t>& qualifying) {
  std::vector<std::pair<double, uint8_t>> pooled;
  std::vector<std::vector<std::pair<double, uint8_t>>> per_cell(
      index.keys.size());
  for (int64_t i = 0; i < cohort.size(); ++i) {
    if (!cohort.has_score(i)) continue;
    const auto pt = std::make_pair(cohort.y_score[i], cohort.y_true[i]);
    pooled.push_back(pt);
    per_cell[index.cell_of_record[i]].push_back(pt);
  }
  if (pooled.empty()) {
    throw ValidationError("youden_thresholds: no scores in cohort");
  }
  const YoudenSweep global = youden_sweep(pooled);
  if (!global.ok) {
    throw ValidationError(
        "youden_thresholds: cohort lacks a positive or negative class");
  }

  YoudenResult result;
  result.global_threshold = global.threshold;
  result.global_j = global.j;
  result.per_cell.assign(index.keys.size(),
                         YoudenEntry{global.threshold, global.j, true});
  for (int32_t q : qualifying) {
    YoudenSweep sweep = youden_sweep(per_cell[q]);
    if (sweep.ok) {
      result.per_cell[q] = YoudenEntry{sweep.threshold, sweep.j, false};
    }
  }
  return result;
}

FairnessPanel fairness_panel(const AuditCohort& cohort,
                             const std::vector<GroupingAxis>& axes,
                             const MaskingPolicy& policy,
                             bool eo_max_variant) {
  FairnessPanel panel;
  panel.accuracy = accuracy(cohort);

  std::vector<uint8_t> labels(cohort.y_true.begin(), cohort.y_true.end());
  std::vector<double> scores;
  bool all_scored = true;
  for (int64_t i = 0; i < cohort.size(); ++i) {
    if (!cohort.has_score(i)) {
      all_scored = false;
      break;
    }
  }
  if (all_scored) {
    scores.assign(cohort.y_score.begin(), cohort.y_score.end());
    panel.auroc = auroc(labels, scores);
  } else {
    panel.warnings.push_back("auroc skipped: not every record has y_score");
  }

  for (const auto& axis : axes) {
    AxisAudit audit;
    audit.axis = axis;
    const AxisIndex index = enumerate_subgroups(cohort, axis);
    const MaskingSplit split = apply_masking(index, policy);
    for (int32_t m : split.masked) audit.masked.push_back(index.keys[m]);
    audit.confusion = confusion_stats(cohort, index, split.qualifying);

    audit.gaps.axis = axis;
    audit.gaps.dp = disparity_gap(audit.confusion.groups, RateMetric::ppr);
    audit.gaps.eo_fpr = disparity_gap(audit.confusion.groups, RateMetric::fpr);
    audit.gaps.eod = disparity_gap(audit.confusion.groups, RateMetric::tpr);
    if (eo_max_variant) {
      GapResult combined;
      if (audit.gaps.eo_fpr.value && audit.gaps.eod.value) {
        combined.value = std::max(*audit.gaps.eo_fpr.value,
                                  *audit.gaps.eod.value);
        combined.contributing = audit.gaps.eo_fpr.contributing;
      }
      audit.gaps.eo_max = combined;
    }
    for (const auto& g : audit.confusion.groups) {
      const size_t excluded = (g.tpr ? 0 : 1) + (g.fpr ? 0 : 1);
      if (excluded > 0) {
        panel.warnings.push_back(
            "axis " + axis.name + " group " + g.key.label() +
            ": rate(s) undefined (zero denominator), excluded per metric");
      }
    }

    if (all_scored) {
      std::vector<int32_t> slot(index.keys.size(), -1);
      std::vector<std::vector<size_t>> members(audit.confusion.groups.size());
      for (size_t q = 0; q < split.qualifying.size(); ++q) {
        slot[split.qualifying[q]] = static_cast<int32_t>(q);
      }
      for (int64_t i = 0; i < cohort.size(); ++i) {
        const int32_t s = slot[index.cell_of_record[i]];
        if (s >= 0) members[s].push_back(static_cast<size_t>(i));
      }
      for (const auto& m : members) {
        std::vector<uint8_t> gl;
        std::vector<double> gs;
        gl.reserve(m.size());
        gs.reserve(m.size());
        for (size_t i : m) {
          gl.push_back(labels[i]);
          gs.push_back(scores[i]);
        }
        audit.group_auroc.push_back(auroc(gl, gs));
      }
    } else {
      audit.group_auroc.assign(audit.confusion.groups.size(), std::nullopt);
    }
    panel.axes.push_back(std::move(audit));
  }
  return panel;
}

}  // namespace fairaudit

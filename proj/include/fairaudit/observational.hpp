#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fairaudit/cohort.hpp"

namespace fairaudit {

// Confusion counts and derived rates for one subgroup. Rates with a zero
// denominator are left unset rather than forced to 0.
struct GroupStats {
  SubgroupKey key;
  int64_t n = 0, tp = 0, fp = 0, tn = 0, fn = 0;
  double ppr = 0.0;
  double accuracy = 0.0;
  std::optional<double> tpr, fpr, fnr;
};

struct ConfusionPanel {
  std::vector<GroupStats> groups;  // qualifying cells, canonical order
  GroupStats pooled;               // whole cohort
};

ConfusionPanel confusion_stats(const AuditCohort& cohort,
                               const AxisIndex& index,
                               const std::vector<int32_t>& qualifying);

enum class RateMetric { ppr, fpr, tpr };

// max - min of the metric over groups where it is defined; unset (not 0)
// when fewer than two groups contribute.
struct GapResult {
  std::optional<double> value;
  std::vector<SubgroupKey> contributing;
};

GapResult disparity_gap(const std::vector<GroupStats>& stats,
                        RateMetric metric);

double accuracy(const AuditCohort& cohort);

// Mann-Whitney AUROC with midrank tie handling; unset when a class is empty.
std::optional<double> auroc(const std::vector<uint8_t>& labels,
                            const std::vector<double>& scores);

struct YoudenEntry {
  double threshold = 0.0;
  double j = 0.0;
  bool fallback = false;  // group lacked both classes; global threshold used
};

struct YoudenResult {
  std::vector<YoudenEntry> per_cell;  // aligned with AxisIndex::keys;
                                      // non-qualifying cells are fallbacks
  double global_threshold = 0.0;      // pooled-cohort Youden threshold
  double global_j = 0.0;
};

YoudenResult youden_thresholds(const AuditCohort& cohort,
                               const AxisIndex& index,
                               const std::vector<int32_t>& qualifying);

struct FairnessGapSet {
  GroupingAxis axis;
  GapResult dp, eo_fpr, eod;
  std::optional<GapResult> eo_max;  // max(FPR gap, TPR gap) variant, opt-in
};

struct AxisAudit {
  GroupingAxis axis;
  std::vector<SubgroupKey> masked;
  ConfusionPanel confusion;
  FairnessGapSet gaps;
  // Aligned with confusion.groups; unset where a group lacks both classes
  // or scores.
  std::vector<std::optional<double>> group_auroc;
};

struct FairnessPanel {
  std::vector<AxisAudit> axes;
  double accuracy = 0.0;
  std::optional<double> auroc;
  std::vector<std::string> warnings;
};

FairnessPanel fairness_panel(const AuditCohort& cohort,
                             const std::vector<GroupingAxis>& axes,
                             const MaskingPolicy& policy,
                             bool eo_max_variant = false);

}  // namespace fairaudit

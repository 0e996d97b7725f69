#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fairaudit/common.hpp"

namespace fairaudit {

enum class MissingPolicy { error, unknown_category };
enum class TableFormat { csv, jsonl };

inline constexpr const char* kUnknownCategory = "Unknown";

// Which file columns play which role. Column roles are always declared,
// never inferred from headers.
struct ColumnSpec {
  std::string id;       // optional; empty -> 1-based row index as id
  std::string y_true;
  std::string y_score;  // optional
  std::string y_pred;   // optional; at least one of y_score/y_pred required
  std::vector<std::string> attributes;
  std::vector<std::string> covariates;
  MissingPolicy missing_policy = MissingPolicy::error;
};

struct CovariateValue {
  bool numeric = false;
  double num = 0.0;
  std::string cat;
};

// Row view used at IO boundaries and in tests; the cohort itself stores
// columns.
struct PredictionRecord {
  std::string id;
  int y_true = 0;
  std::optional<double> y_score;
  std::optional<int> y_pred;
  std::vector<std::pair<std::string, std::string>> attributes;
  std::vector<std::pair<std::string, CovariateValue>> covariates;
};

struct CohortSchema {
  std::vector<std::string> attributes;  // declared order
  std::vector<std::vector<std::string>> attr_vocab;  // sorted per attribute
  std::vector<std::string> covariates;
  std::vector<bool> covariate_numeric;
  std::vector<std::vector<std::string>> cov_vocab;  // sorted; empty for numeric
  int attribute_index(const std::string& name) const;
  int covariate_index(const std::string& name) const;
};

struct Provenance {
  std::string source;
  int64_t rows = 0;
};

// Column-oriented, immutable after load. Downstream modules only read.
struct AuditCohort {
  CohortSchema schema;
  Provenance provenance;
  std::vector<std::string> ids;
  std::vector<uint8_t> y_true;
  std::vector<double> y_score;  // NaN when absent
  std::vector<int8_t> y_pred;   // -1 when absent
  std::vector<std::vector<int32_t>> attr_codes;  // [attribute][record]
  std::vector<std::vector<double>> cov_num;      // [covariate][record]
  std::vector<std::vector<int32_t>> cov_code;    // [covariate][record]

  int64_t size() const { return static_cast<int64_t>(y_true.size()); }
  bool has_score(int64_t i) const { return !std::isnan(y_score[i]); }
  bool has_pred(int64_t i) const { return y_pred[i] >= 0; }
};

AuditCohort load_cohort(const std::string& path, const ColumnSpec& spec,
                        TableFormat format);
AuditCohort cohort_from_records(const std::vector<PredictionRecord>& records,
                                const ColumnSpec& spec,
                                const std::string& source);
PredictionRecord record_view(const AuditCohort& cohort, int64_t i);
void write_cohort_csv(const AuditCohort& cohort, const std::string& path);

// A grouping over one or more attributes. Attribute order is canonicalized
// (sorted by name) so an axis means the same thing however it was declared.
struct GroupingAxis {
  std::string name;
  std::vector<std::string> attribute_names;
};

GroupingAxis make_axis(std::string name, std::vector<std::string> attributes,
                       const CohortSchema& schema);

// One concrete cell of an axis; categories align with the axis attributes.
struct SubgroupKey {
  std::vector<std::string> categories;

  bool operator==(const SubgroupKey& o) const = default;
  bool operator<(const SubgroupKey& o) const {
    return categories < o.categories;
  }
  std::string label() const;
};

// Observed cells of an axis in canonical order, plus the per-record cell map.
struct AxisIndex {
  GroupingAxis axis;
  std::vector<SubgroupKey> keys;
  std::vector<int64_t> counts;
  std::vector<int32_t> cell_of_record;
};

AxisIndex enumerate_subgroups(const AuditCohort& cohort,
                              const GroupingAxis& axis);

struct MaskingPolicy {
  int64_t n_min = 20;
};

// Cell indices into AxisIndex::keys, both lists in canonical order. Masked
// cells carry no count in any downstream emission.
struct MaskingSplit {
  std::vector<int32_t> qualifying;
  std::vector<int32_t> masked;
};

MaskingSplit apply_masking(const AxisIndex& index, const MaskingPolicy& policy);

// Global threshold: y_pred = 1 iff y_score >= tau. Existing y_pred values
// are preserved unless recompute is set.
AuditCohort derive_predictions(const AuditCohort& cohort, double tau,
                               bool recompute = false);

// Per-group thresholds aligned with index.keys; NaN entries fall back to
// fallback_tau (masked cells and flagged groups).
AuditCohort derive_predictions(const AuditCohort& cohort,
                               const AxisIndex& index,
                               const std::vector<double>& cell_tau,
                               double fallback_tau, bool recompute = false);

}  // namespace fairaudit

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fairaudit/cohort.hpp"
#include "fairaudit/learner.hpp"
#include "fairaudit/observational.hpp"
#include "fairaudit/parallel.hpp"

namespace fairaudit {

// positive side audits cFPR on the Y=0 stratum; negative side audits cFNR
// on the Y=1 stratum.
enum class Side { positive, negative };

enum class CfMethod { permutation, standardized, both };

const char* side_name(Side side);
const char* method_name(CfMethod method);

struct CounterfactualConfig {
  double epsilon = 0.10;
  int64_t permutation_replicates = 1000;  // R
  int64_t bootstrap_replicates = 200;     // B
  double ci_level = 0.95;
  uint64_t seed = 0;
  CfMethod method = CfMethod::both;
  int64_t min_fit_size = 10;
  int parallelism = 0;  // 0 = all available threads

  void validate() const;
};

// The nine permutation-null metrics. The *_pos/*_neg aggregates are the
// pre-threshold u-value inputs (mean/max pairwise disparity, sd of rates).
extern const std::vector<std::string> kNullMetrics;

struct RateEstimate {
  SubgroupKey key;
  double point = 0.0;
  double lo = 0.0, hi = 0.0;
  int64_t skipped_replicates = 0;  // permutation cells with empty stratum
  bool ci_widened = false;         // interval stretched to contain point
  bool fit_warning = false;        // >10% bootstrap refits not converged
};

struct CounterfactualRates {
  Side side = Side::positive;
  CfMethod method = CfMethod::permutation;
  bool defined = true;  // false when the stratum is empty overall
  std::vector<RateEstimate> estimates;
  std::vector<SubgroupKey> excluded;  // below min_fit_size, logged
};

struct UValueSide {
  double mean_pairwise = 0.0;
  double max_pairwise = 0.0;
  double sd = 0.0;
  double u_avg = 0.0;
  double u_max = 0.0;
  double u_var = 0.0;
};

struct UValueSet {
  CfMethod method = CfMethod::standardized;
  double epsilon = 0.10;
  std::optional<UValueSide> positive, negative;
  std::vector<std::string> log;
};

struct NullDistribution {
  std::string metric;
  std::vector<double> replicates;      // defined replicate values only
  int64_t undefined_replicates = 0;
  std::optional<double> observed;
  std::optional<double> quantile;      // midrank ECDF position of observed
  std::optional<double> p_two;         // two-sided permutation p-value
};

struct EcdfSeries {
  std::string metric;
  std::string observed_source;  // "standardized" or "raw"
  double observed = 0.0;
  std::vector<double> deltas;         // sorted observed - replicate values
  std::vector<double> cum_fraction;   // 1/R .. 1
  double epsilon = 0.10;
  double fraction_below_epsilon = 0.0;
};

// Compact view over records in qualifying cells; the permutation engine's
// working set.
struct CfView {
  std::vector<uint8_t> y;
  std::vector<uint8_t> yhat;
  std::vector<int32_t> cell;
  std::vector<SubgroupKey> keys;  // canonical order
  std::vector<int64_t> rows;      // original cohort row per view entry

  int32_t n_cells() const { return static_cast<int32_t>(keys.size()); }
  int64_t size() const { return static_cast<int64_t>(y.size()); }
};

CfView make_cf_view(const AuditCohort& cohort, const AxisIndex& index,
                    const std::vector<int32_t>& qualifying);

// Per-cell confusion counts for one group assignment.
struct CellCounts {
  std::vector<int64_t> tp, fp, tn, fn;
  explicit CellCounts(int32_t k) : tp(k), fp(k), tn(k), fn(k) {}
};

CellCounts count_cells(const CfView& view, const std::vector<int32_t>& cell);

// Value of a named metric from per-cell counts; unset when fewer than two
// cells have the underlying rate defined.
std::optional<double> metric_from_counts(const CellCounts& counts,
                                         const std::string& metric);

std::map<std::string, NullDistribution> permutation_null(
    const CfView& view, const std::vector<std::string>& metrics,
    const CounterfactualConfig& cfg, ExecMode mode = ExecMode::openmp);

CounterfactualRates permutation_group_rates(const CfView& view, Side side,
                                            const CounterfactualConfig& cfg,
                                            ExecMode mode = ExecMode::openmp);

CounterfactualRates standardized_rates(const AuditCohort& cohort,
                                       const CfView& view, Side side,
                                       const std::vector<std::string>& covariates,
                                       const LearnerConfig& learner_cfg,
                                       const CounterfactualConfig& cfg,
                                       ExecMode mode,
                                       std::vector<std::string>* warnings);

UValueSet u_values(const CounterfactualRates& positive,
                   const CounterfactualRates& negative, double epsilon);

std::vector<EcdfSeries> ecdf_differences(
    const std::map<std::string, double>& observed_aggregates,
    const std::map<std::string, NullDistribution>& nulls, double epsilon,
    const std::string& observed_source);

struct CounterfactualResult {
  std::string axis_name;
  CounterfactualConfig config;
  std::vector<CounterfactualRates> rates;  // per method x side that ran
  std::vector<UValueSet> u_value_sets;     // per method that ran
  std::map<std::string, NullDistribution> nulls;
  std::vector<EcdfSeries> ecdf;
  std::vector<std::string> warnings;
};

// Full counterfactual layer for one axis. Deterministic for a fixed seed:
// parallelism degree never changes any emitted number.
CounterfactualResult run_counterfactual(const AuditCohort& cohort,
                                        const AxisIndex& index,
                                        const std::vector<int32_t>& qualifying,
                                        const std::vector<std::string>& covariates,
                                        const CounterfactualConfig& cfg,
                                        const LearnerConfig& learner_cfg,
                                        ExecMode mode = ExecMode::openmp);

}  // namespace fairaudit

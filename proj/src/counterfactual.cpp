#include "fairaudit/counterfactual.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fairaudit/rng.hpp"

namespace fairaudit {

const char* side_name(Side side) {
  return side == Side::positive ? "positive" : "negative";
}

const char* method_name(CfMethod method) {
  switch (method) {
    case CfMethod::permutation: return "permutation";
    case CfMethod::standardized: return "standardized";
    case CfMethod::both: return "both";
  }
  return "?";
}

void CounterfactualConfig::validate() const {
  if (epsilon < 0.0 || epsilon > 1.0) {
    throw ConfigError("epsilon must be in [0,1]");
  }
  if (permutation_replicates < 1) throw ConfigError("R must be >= 1");
  if (bootstrap_replicates < 1) throw ConfigError("B must be >= 1");
  if (ci_level <= 0.0 || ci_level >= 1.0) {
    throw ConfigError("ci_level must be in (0,1)");
  }
  if (min_fit_size < 0) throw ConfigError("min_fit_size must be >= 0");
}

const std::vector<std::string> kNullMetrics = {
    "dp_gap",
    "eo_fpr_gap",
    "eod_gap",
    "mean_pairwise_pos",
    "mean_pairwise_neg",
    "max_pairwise_pos",
    "max_pairwise_neg",
    "sd_pos",
    "sd_neg",
};

CfView make_cf_view(const AuditCohort& cohort, const AxisIndex& index,
                    const std::vector<int32_t>& qualifying) {
  CfView view;
  std::vector<int32_t> slot(index.keys.size(), -1);
  for (size_t q = 0; q < qualifying.size(); ++q) {
    slot[qualifying[q]] = static_cast<int32_t>(q);
    view.keys.push_back(index.keys[qualifying[q]]);
  }
  for (int64_t i = 0; i < cohort.size(); ++i) {
    const int32_t s = slot[index.cell_of_record[i]];
    if (s < 0) continue;  // masked cells stay outside the permutation universe
    if (!cohort.has_pred(i)) {
      throw ValidationError("counterfactual layer requires materialized y_pred");
    }
    view.y.push_back(cohort.y_true[i]);
    view.yhat.push_back(static_cast<uint8_t>(cohort.y_pred[i]));
    view.cell.push_back(s);
    view.rows.push_back(i);
  }
  return view;
}

CellCounts count_cells(const CfView& view, const std::vector<int32_t>& cell) {
  CellCounts counts(view.n_cells());
  const int64_t n = view.size();
  for (int64_t i = 0; i < n; ++i) {
    const int32_t c = cell[i];
    if (view.y[i]) {
      if (view.yhat[i]) ++counts.tp[c];
      else ++counts.fn[c];
    } else {
      if (view.yhat[i]) ++counts.fp[c];
      else ++counts.tn[c];
    }
  }
  return counts;
}

namespace {

// Per-cell error rate for one side; NaN where the stratum is empty.
std::vector<double> side_rates(const CellCounts& counts, Side side) {
  const size_t k = counts.tp.size();
  std::vector<double> rates(k, std::numeric_limits<double>::quiet_NaN());
  for (size_t c = 0; c < k; ++c) {
    if (side == Side::positive) {
      const int64_t denom = counts.fp[c] + counts.tn[c];
      if (denom > 0) {
        rates[c] = static_cast<double>(counts.fp[c]) /
                   static_cast<double>(denom);
      }
    } else {
      const int64_t denom = counts.tp[c] + counts.fn[c];
      if (denom > 0) {
        rates[c] = static_cast<double>(counts.fn[c]) /
                   static_cast<double>(denom);
      }
    }
  }
  return rates;
}

std::vector<double> defined_only(const std::vector<double>& v) {
  std::vector<double> out;
  for (double x : v) {
    if (!std::isnan(x)) out.push_back(x);
  }
  return out;
}

std::optional<double> range_gap(const std::vector<double>& rates) {
  const auto vals = defined_only(rates);
  if (vals.size() < 2) return std::nullopt;
  const auto [lo, hi] = std::minmax_element(vals.begin(), vals.end());
  return *hi - *lo;
}

std::optional<double> mean_pairwise(const std::vector<double>& rates) {
  const auto vals = defined_only(rates);
  if (vals.size() < 2) return std::nullopt;
  double sum = 0.0;
  int64_t pairs = 0;
  for (size_t a = 0; a < vals.size(); ++a) {
    for (size_t b = a + 1; b < vals.size(); ++b) {
      sum += std::abs(vals[a] - vals[b]);
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

std::optional<double> max_pairwise(const std::vector<double>& rates) {
  // max pairwise |difference| over defined rates equals their range
  return range_gap(rates);
}

std::optional<double> sd_rates(const std::vector<double>& rates) {
  const auto vals = defined_only(rates);
  if (vals.size() < 2) return std::nullopt;
  return population_sd(vals);
}

// Permutation of group labels for replicate r; depends only on (seed, r).
void permuted_cells(const CfView& view, uint64_t seed, int64_t r,
                    std::vector<int32_t>& out) {
  out.assign(view.cell.begin(), view.cell.end());
  Rng rng(derive_stream(seed, kStreamPermutation, static_cast<uint64_t>(r)));
  fisher_yates(out, rng);
}

}  // namespace

std::optional<double> metric_from_counts(const CellCounts& counts,
                                         const std::string& metric) {
  const size_t k = counts.tp.size();
  if (metric == "dp_gap") {
    std::vector<double> ppr(k, std::numeric_limits<double>::quiet_NaN());
    for (size_t c = 0; c < k; ++c) {
      const int64_t n =
          counts.tp[c] + counts.fp[c] + counts.tn[c] + counts.fn[c];
      if (n > 0) {
        ppr[c] = static_cast<double>(counts.tp[c] + counts.fp[c]) /
                 static_cast<double>(n);
      }
    }
    return range_gap(ppr);
  }
  if (metric == "eo_fpr_gap") return range_gap(side_rates(counts, Side::positive));
  if (metric == "eod_gap") {
    // EOD is the TPR range; TPR = 1 - FNR so the range matches the FNR range.
    return range_gap(side_rates(counts, Side::negative));
  }
  if (metric == "mean_pairwise_pos") return mean_pairwise(side_rates(counts, Side::positive));
  if (metric == "mean_pairwise_neg") return mean_pairwise(side_rates(counts, Side::negative));
  if (metric == "max_pairwise_pos") return max_pairwise(side_rates(counts, Side::positive));
  if (metric == "max_pairwise_neg") return max_pairwise(side_rates(counts, Side::negative));
  if (metric == "sd_pos") return sd_rates(side_rates(counts, Side::positive));
  if (metric == "sd_neg") return sd_rates(side_rates(counts, Side::negative));
  throw ConfigError("unknown null metric '" + metric + "'");
}

std::map<std::string, NullDistribution> permutation_null(
    const CfView& view, const std::vector<std::string>& metrics,
    const CounterfactualConfig& cfg, ExecMode mode) {
  cfg.validate();
  if (view.n_cells() < 2) {
    throw ValidationError("permutation_null requires >= 2 qualifying subgroups");
  }
  const int64_t R = cfg.permutation_replicates;
  const size_t m = metrics.size();

  // Replicate-major storage; each slot written by exactly one replicate.
  std::vector<double> values(static_cast<size_t>(R) * m,
                             std::numeric_limits<double>::quiet_NaN());
  for_each_replicate(R, cfg.parallelism, mode, [&](int64_t r) {
    static thread_local std::vector<int32_t> scratch;
    permuted_cells(view, cfg.seed, r, scratch);
    const CellCounts counts = count_cells(view, scratch);
    for (size_t j = 0; j < m; ++j) {
      const auto v = metric_from_counts(counts, metrics[j]);
      if (v) values[static_cast<size_t>(r) * m + j] = *v;
    }
  });

  const CellCounts observed_counts = count_cells(view, view.cell);
  std::map<std::string, NullDistribution> out;
  for (size_t j = 0; j < m; ++j) {
    NullDistribution dist;
    dist.metric = metrics[j];
    dist.replicates.reserve(R);
    for (int64_t r = 0; r < R; ++r) {
      const double v = values[static_cast<size_t>(r) * m + j];
      if (std::isnan(v)) {
        ++dist.undefined_replicates;
      } else {
        dist.replicates.push_back(v);
      }
    }
    const auto obs = metric_from_counts(observed_counts, metrics[j]);
    if (obs) dist.observed = *obs;
    if (obs && !dist.replicates.empty()) {
      int64_t lt = 0, eq = 0;
      for (double v : dist.replicates) {
        if (v < *obs) ++lt;
        else if (v == *obs) ++eq;
      }
      const auto defined = static_cast<double>(dist.replicates.size());
      dist.quantile = (static_cast<double>(lt) + 0.5 * static_cast<double>(eq) +
                       0.5) /
                      (defined + 1.0);
      const double p_hi =
          (static_cast<double>(dist.replicates.size() - lt) + 1.0) /
          (defined + 1.0);
      const double p_lo = (static_cast<double>(lt + eq) + 1.0) / (defined + 1.0);
      dist.p_two = std::min(1.0, 2.0 * std::min(p_lo, p_hi));
    }
    out.emplace(metrics[j], std::move(dist));
  }
  return out;
}

namespace {

// Percentile interval; stretched to contain the point estimate so that
// lo <= point <= hi holds even for extreme skew.
void percentile_ci(std::vector<double> values, double ci_level, double point,
                   RateEstimate& est) {
  std::sort(values.begin(), values.end());
  const double alpha = (1.0 - ci_level) / 2.0;
  est.lo = quantile_type7(values, alpha);
  est.hi = quantile_type7(values, 1.0 - alpha);
  if (point < est.lo) {
    est.lo = point;
    est.ci_widened = true;
  }
  if (point > est.hi) {
    est.hi = point;
    est.ci_widened = true;
  }
}

}  // namespace

CounterfactualRates permutation_group_rates(const CfView& view, Side side,
                                            const CounterfactualConfig& cfg,
                                            ExecMode mode) {
  cfg.validate();
  if (view.n_cells() < 2) {
    throw ValidationError(
        "permutation_group_rates requires >= 2 qualifying subgroups");
  }
  CounterfactualRates out;
  out.side = side;
  out.method = CfMethod::permutation;

  const uint8_t ystrat = side == Side::positive ? 0 : 1;
  int64_t stratum_n = 0;
  for (int64_t i = 0; i < view.size(); ++i) stratum_n += view.y[i] == ystrat;
  if (stratum_n == 0) {
    out.defined = false;
    return out;
  }

  const int64_t R = cfg.permutation_replicates;
  const auto k = static_cast<size_t>(view.n_cells());
  std::vector<double> values(static_cast<size_t>(R) * k,
                             std::numeric_limits<double>::quiet_NaN());
  for_each_replicate(R, cfg.parallelism, mode, [&](int64_t r) {
    static thread_local std::vector<int32_t> scratch;
    permuted_cells(view, cfg.seed, r, scratch);
    const CellCounts counts = count_cells(view, scratch);
    const auto rates = side_rates(counts, side);
    for (size_t c = 0; c < k; ++c) {
      values[static_cast<size_t>(r) * k + c] = rates[c];
    }
  });

  for (size_t c = 0; c < k; ++c) {
    RateEstimate est;
    est.key = view.keys[c];
    std::vector<double> cell_values;
    cell_values.reserve(R);
    for (int64_t r = 0; r < R; ++r) {
      const double v = values[static_cast<size_t>(r) * k + c];
      if (std::isnan(v)) {
        ++est.skipped_replicates;
      } else {
        cell_values.push_back(v);
      }
    }
    if (cell_values.empty()) {
      out.excluded.push_back(view.keys[c]);
      continue;
    }
    est.point = mean_of(cell_values);
    percentile_ci(std::move(cell_values), cfg.ci_level, est.point, est);
    out.estimates.push_back(std::move(est));
  }
  return out;
}

CounterfactualRates standardized_rates(
    const AuditCohort& cohort, const CfView& view, Side side,
    const std::vector<std::string>& covariates,
    const LearnerConfig& learner_cfg, const CounterfactualConfig& cfg,
    ExecMode mode, std::vector<std::string>* warnings) {
  cfg.validate();
  CounterfactualRates out;
  out.side = side;
  out.method = CfMethod::standardized;

  // Stratum arrays: Y=0 for the positive side (error = false positive),
  // Y=1 for the negative side (error = false negative).
  const uint8_t ystrat = side == Side::positive ? 0 : 1;
  std::vector<int64_t> strat_rows;
  std::vector<int32_t> strat_cell;
  std::vector<double> err;
  for (int64_t i = 0; i < view.size(); ++i) {
    if (view.y[i] != ystrat) continue;
    strat_rows.push_back(view.rows[i]);
    strat_cell.push_back(view.cell[i]);
    err.push_back(side == Side::positive
                      ? static_cast<double>(view.yhat[i])
                      : static_cast<double>(1 - view.yhat[i]));
  }
  if (strat_rows.empty()) {
    out.defined = false;
    return out;
  }

  const auto k = static_cast<size_t>(view.n_cells());
  std::vector<std::vector<int64_t>> members(k);  // indices into stratum arrays
  for (size_t i = 0; i < strat_cell.size(); ++i) {
    members[strat_cell[i]].push_back(static_cast<int64_t>(i));
  }
  std::vector<int32_t> included;
  for (size_t c = 0; c < k; ++c) {
    const auto sz = static_cast<int64_t>(members[c].size());
    if (sz >= std::max<int64_t>(cfg.min_fit_size, 1)) {
      included.push_back(static_cast<int32_t>(c));
    } else {
      out.excluded.push_back(view.keys[c]);
      if (warnings) {
        warnings->push_back("standardized " + std::string(side_name(side)) +
                            ": subgroup " + view.keys[c].label() +
                            " below min_fit_size (" + std::to_string(sz) +
                            "), excluded");
      }
    }
  }
  if (included.empty()) {
    out.defined = false;
    return out;
  }

  const int64_t B = cfg.bootstrap_replicates;
  const size_t g_count = included.size();
  std::vector<double> boot(static_cast<size_t>(B) * g_count, 0.0);
  std::vector<uint8_t> boot_converged(static_cast<size_t>(B) * g_count, 1);
  std::vector<double> points(g_count, 0.0);

  if (covariates.empty()) {
    // Intercept-only models are constant at the group's stratum error rate,
    // so the standardized rate reduces to that raw rate, exactly.
    for (size_t g = 0; g < g_count; ++g) {
      const auto& rows = members[included[g]];
      double s = 0.0;
      for (int64_t i : rows) s += err[i];
      points[g] = s / static_cast<double>(rows.size());
    }
    for_each_replicate(B, cfg.parallelism, mode, [&](int64_t b) {
      for (size_t g = 0; g < g_count; ++g) {
        const auto& rows = members[included[g]];
        Rng rng(derive_stream(cfg.seed, kStreamBootstrap,
                              static_cast<uint64_t>(b),
                              static_cast<uint64_t>(included[g])));
        double s = 0.0;
        for (size_t i = 0; i < rows.size(); ++i) {
          s += err[rows[rng.uniform_below(rows.size())]];
        }
        boot[static_cast<size_t>(b) * g_count + g] =
            s / static_cast<double>(rows.size());
      }
    });
  } else {
    // Shared encoding, frozen on the full stratum, so every group model
    // scores the same design columns.
    const DesignSpec spec = build_design_spec(cohort, strat_rows, covariates);
    int64_t unseen = 0;
    const Eigen::MatrixXd X = build_design(cohort, strat_rows, spec, &unseen);
    const auto m = static_cast<Eigen::Index>(strat_rows.size());

    auto fit_group_mean = [&](const std::vector<int64_t>& fit_rows,
                              const std::vector<int64_t>& avg_rows,
                              bool* converged) {
      Eigen::MatrixXd Xg(fit_rows.size(), X.cols());
      Eigen::VectorXd yg(fit_rows.size());
      for (size_t i = 0; i < fit_rows.size(); ++i) {
        Xg.row(static_cast<Eigen::Index>(i)) = X.row(fit_rows[i]);
        yg[static_cast<Eigen::Index>(i)] = err[fit_rows[i]];
      }
      const double lambda = learner_cfg.lambda >= 0.0
                                ? learner_cfg.lambda
                                : 1e-6 * static_cast<double>(fit_rows.size());
      const LearnerModel model = fit_logistic(Xg, yg, lambda, learner_cfg.tol,
                                              learner_cfg.max_iter);
      if (converged) *converged = model.converged;
      double s = 0.0;
      if (avg_rows.empty()) {
        const Eigen::VectorXd p = predict_prob(model, X);
        for (Eigen::Index i = 0; i < m; ++i) s += p[i];
        return s / static_cast<double>(m);
      }
      Eigen::MatrixXd Xa(avg_rows.size(), X.cols());
      for (size_t i = 0; i < avg_rows.size(); ++i) {
        Xa.row(static_cast<Eigen::Index>(i)) = X.row(avg_rows[i]);
      }
      const Eigen::VectorXd p = predict_prob(model, Xa);
      for (Eigen::Index i = 0; i < p.size(); ++i) s += p[i];
      return s / static_cast<double>(p.size());
    };

    for (size_t g = 0; g < g_count; ++g) {
      bool conv = true;
      points[g] = fit_group_mean(members[included[g]], {}, &conv);
      if (!conv && warnings) {
        warnings->push_back("standardized " + std::string(side_name(side)) +
                            ": fit for subgroup " +
                            view.keys[included[g]].label() +
                            " did not converge");
      }
    }

    for_each_replicate(B, cfg.parallelism, mode, [&](int64_t b) {
      // Stratified resample: every cell redrawn within itself, so each
      // refit always has data for its group.
      std::vector<std::vector<int64_t>> resampled(k);
      std::vector<int64_t> stratum;
      stratum.reserve(strat_rows.size());
      for (size_t c = 0; c < k; ++c) {
        const auto& rows = members[c];
        if (rows.empty()) continue;
        Rng rng(derive_stream(cfg.seed, kStreamBootstrap,
                              static_cast<uint64_t>(b),
                              static_cast<uint64_t>(c)));
        resampled[c].reserve(rows.size());
        for (size_t i = 0; i < rows.size(); ++i) {
          resampled[c].push_back(rows[rng.uniform_below(rows.size())]);
        }
        stratum.insert(stratum.end(), resampled[c].begin(), resampled[c].end());
      }
      for (size_t g = 0; g < g_count; ++g) {
        bool conv = true;
        boot[static_cast<size_t>(b) * g_count + g] =
            fit_group_mean(resampled[included[g]], stratum, &conv);
        boot_converged[static_cast<size_t>(b) * g_count + g] = conv ? 1 : 0;
      }
    });
  }

  for (size_t g = 0; g < g_count; ++g) {
    RateEstimate est;
    est.key = view.keys[included[g]];
    est.point = points[g];
    std::vector<double> values(B);
    int64_t failed = 0;
    for (int64_t b = 0; b < B; ++b) {
      values[b] = boot[static_cast<size_t>(b) * g_count + g];
      failed += boot_converged[static_cast<size_t>(b) * g_count + g] == 0;
    }
    if (static_cast<double>(failed) > 0.1 * static_cast<double>(B)) {
      est.fit_warning = true;
      if (warnings) {
        warnings->push_back(
            "standardized " + std::string(side_name(side)) + ": subgroup " +
            est.key.label() + " CI unreliable (" + std::to_string(failed) +
            "/" + std::to_string(B) + " bootstrap refits not converged)");
      }
    }
    percentile_ci(std::move(values), cfg.ci_level, est.point, est);
    out.estimates.push_back(std::move(est));
  }
  return out;
}

namespace {

std::optional<UValueSide> side_u_values(const CounterfactualRates& rates,
                                        double epsilon,
                                        std::vector<std::string>& log) {
  if (!rates.defined || rates.estimates.size() < 2) {
    log.push_back(std::string(side_name(rates.side)) +
                  " side: fewer than 2 subgroup estimates, u-values undefined");
    return std::nullopt;
  }
  std::vector<double> cr;
  for (const auto& est : rates.estimates) cr.push_back(est.point);
  UValueSide u;
  double sum = 0.0, max_d = 0.0;
  int64_t pairs = 0;
  for (size_t a = 0; a < cr.size(); ++a) {
    for (size_t b = a + 1; b < cr.size(); ++b) {
      const double d = std::abs(cr[a] - cr[b]);
      sum += d;
      max_d = std::max(max_d, d);
      ++pairs;
    }
  }
  u.mean_pairwise = sum / static_cast<double>(pairs);
  u.max_pairwise = max_d;
  u.sd = population_sd(cr);
  u.u_avg = std::max(0.0, u.mean_pairwise - epsilon);
  u.u_max = std::max(0.0, u.max_pairwise - epsilon);
  u.u_var = std::max(0.0, u.sd - epsilon);
  return u;
}

}  // namespace

UValueSet u_values(const CounterfactualRates& positive,
                   const CounterfactualRates& negative, double epsilon) {
  if (positive.side != Side::positive || negative.side != Side::negative) {
    throw ValidationError("u_values: sides passed in the wrong order");
  }
  if (positive.method != negative.method) {
    throw ValidationError("u_values: mixed estimation methods");
  }
  UValueSet set;
  set.method = positive.method;
  set.epsilon = epsilon;
  set.positive = side_u_values(positive, epsilon, set.log);
  set.negative = side_u_values(negative, epsilon, set.log);
  return set;
}

std::vector<EcdfSeries> ecdf_differences(
    const std::map<std::string, double>& observed_aggregates,
    const std::map<std::string, NullDistribution>& nulls, double epsilon,
    const std::string& observed_source) {
  std::vector<EcdfSeries> out;
  for (const auto& [metric, observed] : observed_aggregates) {
    const auto it = nulls.find(metric);
    if (it == nulls.end()) {
      throw ValidationError("ecdf_differences: no null distribution for '" +
                            metric + "'");
    }
    const auto& dist = it->second;
    if (dist.replicates.empty()) continue;
    EcdfSeries series;
    series.metric = metric;
    series.observed_source = observed_source;
    series.observed = observed;
    series.epsilon = epsilon;
    series.deltas.reserve(dist.replicates.size());
    for (double v : dist.replicates) series.deltas.push_back(observed - v);
    std::sort(series.deltas.begin(), series.deltas.end());
    const auto n = static_cast<double>(series.deltas.size());
    int64_t below = 0;
    for (size_t i = 0; i < series.deltas.size(); ++i) {
      series.cum_fraction.push_back(static_cast<double>(i + 1) / n);
      if (series.deltas[i] < epsilon) ++below;
    }
    series.fraction_below_epsilon = static_cast<double>(below) / n;
    out.push_back(std::move(series));
  }
  return out;
}

CounterfactualResult run_counterfactual(
    const AuditCohort& cohort, const AxisIndex& index,
    const std::vector<int32_t>& qualifying,
    const std::vector<std::string>& covariates,
    const CounterfactualConfig& cfg, const LearnerConfig& learner_cfg,
    ExecMode mode) {
  cfg.validate();
  CounterfactualResult result;
  result.axis_name = index.axis.name;
  result.config = cfg;

  const CfView view = make_cf_view(cohort, index, qualifying);
  if (view.n_cells() < 2) {
    throw ValidationError(
        "counterfactual analysis requires >= 2 qualifying subgroups on axis '" +
        index.axis.name + "'");
  }

  const bool run_perm = cfg.method != CfMethod::standardized;
  const bool run_std = cfg.method != CfMethod::permutation;

  std::optional<CounterfactualRates> std_pos, std_neg;
  if (run_std) {
    std_pos = standardized_rates(cohort, view, Side::positive, covariates,
                                 learner_cfg, cfg, mode, &result.warnings);
    std_neg = standardized_rates(cohort, view, Side::negative, covariates,
                                 learner_cfg, cfg, mode, &result.warnings);
    result.rates.push_back(*std_pos);
    result.rates.push_back(*std_neg);
    result.u_value_sets.push_back(u_values(*std_pos, *std_neg, cfg.epsilon));
    if (!std_pos->defined) {
      result.warnings.push_back("standardized positive side undefined: empty Y=0 stratum");
    }
    if (!std_neg->defined) {
      result.warnings.push_back("standardized negative side undefined: empty Y=1 stratum");
    }
  }

  if (run_perm) {
    result.nulls = permutation_null(view, kNullMetrics, cfg, mode);
    CounterfactualRates perm_pos =
        permutation_group_rates(view, Side::positive, cfg, mode);
    CounterfactualRates perm_neg =
        permutation_group_rates(view, Side::negative, cfg, mode);
    if (!perm_pos.defined) {
      result.warnings.push_back("permutation positive side undefined: empty Y=0 stratum");
    }
    if (!perm_neg.defined) {
      result.warnings.push_back("permutation negative side undefined: empty Y=1 stratum");
    }
    result.rates.push_back(perm_pos);
    result.rates.push_back(perm_neg);
    result.u_value_sets.push_back(u_values(perm_pos, perm_neg, cfg.epsilon));

    // ECDF observed aggregates: the standardized (single-robust) estimates
    // when they ran, otherwise the raw stratum-rate aggregates that seeded
    // the nulls.
    std::map<std::string, double> standardized_obs;
    if (run_std) {
      auto put = [&](Side side, const UValueSide& u) {
        const std::string suffix = side == Side::positive ? "_pos" : "_neg";
        standardized_obs["mean_pairwise" + suffix] = u.mean_pairwise;
        standardized_obs["max_pairwise" + suffix] = u.max_pairwise;
        standardized_obs["sd" + suffix] = u.sd;
      };
      const auto& uset = result.u_value_sets.front();
      if (uset.positive) put(Side::positive, *uset.positive);
      if (uset.negative) put(Side::negative, *uset.negative);
    }
    std::map<std::string, double> raw_obs;
    static const std::vector<std::string> agg_metrics = {
        "mean_pairwise_pos", "max_pairwise_pos", "sd_pos",
        "mean_pairwise_neg", "max_pairwise_neg", "sd_neg"};
    for (const auto& metric : agg_metrics) {
      if (standardized_obs.count(metric)) continue;
      const auto it = result.nulls.find(metric);
      if (it != result.nulls.end() && it->second.observed) {
        raw_obs[metric] = *it->second.observed;
      }
    }
    result.ecdf = ecdf_differences(standardized_obs, result.nulls, cfg.epsilon,
                                   "standardized");
    auto raw_series =
        ecdf_differences(raw_obs, result.nulls, cfg.epsilon, "raw");
    for (auto& s : raw_series) result.ecdf.push_back(std::move(s));
    std::sort(result.ecdf.begin(), result.ecdf.end(),
              [](const EcdfSeries& a, const EcdfSeries& b) {
                return a.metric < b.metric;
              });
  }
  return result;
}

}  // namespace fairaudit

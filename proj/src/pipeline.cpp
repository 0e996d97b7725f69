#include "fairaudit/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <optional>

#include "fairaudit/observational.hpp"
#include "fairaudit/report.hpp"

namespace fairaudit {

namespace {

std::string fmt_opt(const std::optional<double>& v, int decimals = 3) {
  return v ? format_fixed(*v, decimals) : std::string("n/a");
}

std::string pad_to(std::string s, size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::string build_summary(const AuditConfig& cfg, const FairnessPanel& panel,
                          const CounterfactualResult* cf, int64_t records,
                          const std::vector<std::string>& all_warnings,
                          const std::string& report_path) {
  std::string s;
  s += std::string(kToolVersion) + " | cohort " + cfg.name + " | " +
       std::to_string(records) + " records\n";
  s += "accuracy " + format_fixed(panel.accuracy, 3) + " | AUROC " +
       fmt_opt(panel.auroc) + "\n\n";
  s += pad_to("axis", 24) + pad_to("DP gap", 10) + pad_to("EO-FPR gap", 12) +
       pad_to("EOD gap", 10) + "masked\n";
  for (const auto& axis : panel.axes) {
    s += pad_to(axis.axis.name, 24) + pad_to(fmt_opt(axis.gaps.dp.value), 10) +
         pad_to(fmt_opt(axis.gaps.eo_fpr.value), 12) +
         pad_to(fmt_opt(axis.gaps.eod.value), 10) +
         std::to_string(axis.masked.size()) + "\n";
  }
  if (cf) {
    s += "\ncounterfactual axis " + cf->axis_name + " | method " +
         method_name(cf->config.method) + " | epsilon " +
         format_fixed(cf->config.epsilon, 3) + "\n";
    for (const auto& uset : cf->u_value_sets) {
      s += pad_to(std::string("  ") + method_name(uset.method), 16);
      auto side_str = [](const char* tag,
                         const std::optional<UValueSide>& side) {
        if (!side) return std::string(tag) + ": undefined";
        return std::string(tag) + ": u_avg=" + format_fixed(side->u_avg, 3) +
               " u_max=" + format_fixed(side->u_max, 3) +
               " u_var=" + format_fixed(side->u_var, 3);
      };
      s += side_str("pos", uset.positive) + " | " +
           side_str("neg", uset.negative) + "\n";
    }
  }
  if (!all_warnings.empty()) {
    s += "\nwarnings: " + std::to_string(all_warnings.size()) + "\n";
    const size_t shown = std::min<size_t>(all_warnings.size(), 5);
    for (size_t i = 0; i < shown; ++i) s += "  - " + all_warnings[i] + "\n";
    if (all_warnings.size() > shown) {
      s += "  (" + std::to_string(all_warnings.size() - shown) +
           " more in the report)\n";
    }
  }
  s += "\nreport: " + report_path + "\n";
  return s;
}

}  // namespace

AuditOutcome run_audit(const AuditConfig& config, ExecMode mode) {
  config.validate();
  std::vector<std::string> pipeline_warnings;

  AuditCohort cohort =
      load_cohort(config.input_path, config.columns, config.input_format);

  std::vector<GroupingAxis> axes;
  for (const auto& spec : config.axes) {
    axes.push_back(make_axis(spec.name, spec.attributes, cohort.schema));
  }
  auto find_axis = [&](const std::string& name) -> const GroupingAxis& {
    for (const auto& axis : axes) {
      if (axis.name == name) return axis;
    }
    throw ConfigError("axis '" + name + "' not found");
  };

  if (config.threshold.mode == ThresholdConfig::Mode::youden) {
    const auto& axis = find_axis(config.threshold.youden_axis);
    const AxisIndex index = enumerate_subgroups(cohort, axis);
    const MaskingSplit split = apply_masking(index, config.masking);
    const YoudenResult youden = youden_thresholds(cohort, index, split.qualifying);
    std::vector<double> cell_tau(index.keys.size());
    for (size_t i = 0; i < index.keys.size(); ++i) {
      cell_tau[i] = youden.per_cell[i].fallback
                        ? std::numeric_limits<double>::quiet_NaN()
                        : youden.per_cell[i].threshold;
    }
    cohort = derive_predictions(cohort, index, cell_tau,
                                youden.global_threshold, true);
    pipeline_warnings.push_back(
        "thresholds: per-group Youden on axis '" + axis.name +
        "', global fallback " + format_fixed(youden.global_threshold, 6));
  } else {
    cohort = derive_predictions(cohort, config.threshold.tau,
                                config.threshold.recompute);
  }

  const FairnessPanel panel =
      fairness_panel(cohort, axes, config.masking, config.observational.eo_max);

  std::optional<CounterfactualResult> cf;
  if (config.counterfactual.enabled) {
    const auto& axis = find_axis(config.counterfactual.axis);
    const AxisIndex index = enumerate_subgroups(cohort, axis);
    const MaskingSplit split = apply_masking(index, config.masking);
    cf = run_counterfactual(cohort, index, split.qualifying,
                            config.counterfactual.covariates,
                            config.counterfactual.engine, config.learner, mode);
  }

  AuditOutcome outcome;
  outcome.report = build_report(cohort, config, panel, cf ? &*cf : nullptr,
                                pipeline_warnings);

  std::filesystem::create_directories(config.output.dir);
  const std::string report_path = config.output.dir + "/report.json";
  write_json(outcome.report, report_path);
  outcome.written_files.push_back(report_path);
  if (config.output.tables) {
    const auto tables =
        write_csv_tables(outcome.report, config.output.dir + "/tables");
    outcome.written_files.insert(outcome.written_files.end(), tables.begin(),
                                 tables.end());
  }
  if (config.output.svg) {
    std::vector<std::string> render_warnings;
    const auto svgs = render_svg(outcome.report, config.output.dir + "/svg",
                                 &render_warnings);
    outcome.written_files.insert(outcome.written_files.end(), svgs.begin(),
                                 svgs.end());
    // Render warnings are emission-side only; they do not alter the report.
  }

  std::vector<std::string> all_warnings;
  for (const auto& w : outcome.report.at("warnings")) {
    all_warnings.push_back(w.get<std::string>());
  }
  outcome.summary = build_summary(config, panel, cf ? &*cf : nullptr,
                                  cohort.size(), all_warnings, report_path);
  return outcome;
}

}  // namespace fairaudit

#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "fairaudit/cohort.hpp"
#include "fairaudit/counterfactual.hpp"
#include "fairaudit/learner.hpp"

namespace fairaudit {

struct AxisSpec {
  std::string name;
  std::vector<std::string> attributes;
};

struct ThresholdConfig {
  enum class Mode { fixed, youden };
  Mode mode = Mode::fixed;
  double tau = 0.5;
  bool recompute = false;
  std::string youden_axis;  // empty: the full intersection axis
};

struct ObservationalOptions {
  bool eo_max = false;  // also report max(FPR gap, TPR gap)
};

struct OutputConfig {
  std::string dir = "out";
  bool tables = true;
  bool svg = true;
};

struct CounterfactualSection {
  bool enabled = false;
  std::string axis;  // empty: the full intersection axis
  std::vector<std::string> covariates;
  CounterfactualConfig engine;
};

// Fully-resolved audit run configuration. Reports echo the resolved form so
// a run can be reproduced from its own output.
struct AuditConfig {
  std::string input_path;
  TableFormat input_format = TableFormat::csv;
  std::string name = "cohort";
  ColumnSpec columns;
  std::vector<AxisSpec> axes;  // materialized, never empty after parsing
  ThresholdConfig threshold;
  MaskingPolicy masking;
  ObservationalOptions observational;
  CounterfactualSection counterfactual;
  LearnerConfig learner;
  OutputConfig output;
  uint64_t seed = 0;
  int parallelism = 0;

  void validate() const;
  nlohmann::ordered_json echo() const;
};

AuditConfig parse_audit_config(const nlohmann::json& j);
AuditConfig load_audit_config(const std::string& path);

// Set a dotted-path key ("counterfactual.epsilon") in a raw config document.
// The value string is parsed as JSON when possible, else taken as a string.
void apply_override(nlohmann::json& j, const std::string& dotted,
                    const std::string& value);

}  // namespace fairaudit

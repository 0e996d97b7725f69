#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "fairaudit/config.hpp"
#include "fairaudit/counterfactual.hpp"
#include "fairaudit/observational.hpp"

namespace fairaudit {

// Deterministic run identifier: a hash of the resolved config echo and the
// input provenance, so mixing artifacts across runs is detectable.
std::string run_id_for(const nlohmann::ordered_json& config_echo,
                       const Provenance& provenance);

// Canonical report document: fixed key order, stable subgroup ordering,
// numbers at full round-trip precision. Identical inputs give identical
// bytes. Masked cells appear as flags only, never with counts or rates.
nlohmann::ordered_json build_report(
    const AuditCohort& cohort, const AuditConfig& config,
    const FairnessPanel& panel, const CounterfactualResult* counterfactual,
    const std::vector<std::string>& pipeline_warnings);

void write_json(const nlohmann::ordered_json& report, const std::string& path);

// Long-format tables under dir: heatmap.csv (cohort,axis,metric,value) and,
// when the report has ECDF series, ecdf.csv (metric,delta,cum_fraction).
// Values are rounded to 6 decimals; the JSON report stays authoritative.
std::vector<std::string> write_csv_tables(const nlohmann::ordered_json& report,
                                          const std::string& dir);

// Static SVG renderings: gap heatmap, ECDF panel with the dashed epsilon
// reference line, and one CI dot-plot per counterfactual side. Sections
// missing from the report are skipped with a warning.
std::vector<std::string> render_svg(const nlohmann::ordered_json& report,
                                    const std::string& dir,
                                    std::vector<std::string>* warnings);

}  // namespace fairaudit

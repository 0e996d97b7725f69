#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "fairaudit/config.hpp"
#include "fairaudit/parallel.hpp"

namespace fairaudit {

struct AuditOutcome {
  nlohmann::ordered_json report;
  std::vector<std::string> written_files;
  std::string summary;  // one-screen text for stdout
};

// load -> threshold -> mask -> observational panel -> optional
// counterfactual -> report + emissions. Pure function of config and input
// bytes; parallelism only changes wall time.
AuditOutcome run_audit(const AuditConfig& config,
                       ExecMode mode = ExecMode::openmp);

}  // namespace fairaudit

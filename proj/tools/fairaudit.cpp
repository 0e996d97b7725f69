#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fairaudit/config.hpp"
#include "fairaudit/pipeline.hpp"
#include "fairaudit/report.hpp"
#include "fairaudit/synth.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitValidation = 2;
constexpr int kExitNumeric = 3;

// Leftover "--dotted.name value" (or "--dotted.name=value") arguments become
// config overrides, so every config field is reachable from the command line.
std::vector<std::pair<std::string, std::string>> collect_overrides(
    const std::vector<std::string>& extras) {
  std::vector<std::pair<std::string, std::string>> overrides;
  for (size_t i = 0; i < extras.size(); ++i) {
    const std::string& arg = extras[i];
    if (arg.rfind("--", 0) != 0 || arg.size() <= 2) {
      throw fairaudit::ConfigError("unrecognized argument '" + arg + "'");
    }
    const std::string body = arg.substr(2);
    const size_t eq = body.find('=');
    if (eq != std::string::npos) {
      overrides.emplace_back(body.substr(0, eq), body.substr(eq + 1));
      continue;
    }
    if (i + 1 >= extras.size()) {
      throw fairaudit::ConfigError("flag '--" + body + "' needs a value");
    }
    overrides.emplace_back(body, extras[++i]);
  }
  return overrides;
}

int run_audit_cmd(const std::string& config_path, uint64_t* seed_override,
                  std::string* out_override, int* parallelism_override,
                  const std::vector<std::string>& extras) {
  std::string path = config_path;
  if (path.empty()) {
    if (const char* env = std::getenv("FAIRAUDIT_CONFIG")) path = env;
  }
  if (path.empty()) {
    throw fairaudit::ConfigError(
        "no config given: pass --config or set FAIRAUDIT_CONFIG");
  }
  std::ifstream in(path);
  if (!in) throw fairaudit::ConfigError("cannot open config '" + path + "'");
  nlohmann::json raw;
  try {
    in >> raw;
  } catch (const nlohmann::json::exception& e) {
    throw fairaudit::ConfigError("config '" + path +
                                 "' is not valid JSON: " + e.what());
  }
  for (const auto& [key, value] : collect_overrides(extras)) {
    fairaudit::apply_override(raw, key, value);
  }
  if (seed_override) fairaudit::apply_override(raw, "seed", std::to_string(*seed_override));
  if (out_override) {
    fairaudit::apply_override(raw, "output.dir",
                              nlohmann::json(*out_override).dump());
  }
  if (parallelism_override) {
    fairaudit::apply_override(raw, "parallelism",
                              std::to_string(*parallelism_override));
  }
  const fairaudit::AuditConfig cfg = fairaudit::parse_audit_config(raw);
  const fairaudit::AuditOutcome outcome = fairaudit::run_audit(cfg);
  std::cout << outcome.summary;
  return kExitOk;
}

int run_synth_cmd(const std::string& spec_path, const std::string& out_dir) {
  const fairaudit::SynthSpec spec = fairaudit::load_synth_spec(spec_path);
  std::filesystem::create_directories(out_dir);
  const fairaudit::AuditCohort cohort = fairaudit::generate_cohort(spec);
  const std::string cohort_path = out_dir + "/cohort.csv";
  fairaudit::write_cohort_csv(cohort, cohort_path);
  const fairaudit::SynthOracle oracle = fairaudit::oracle_metrics(spec);
  const std::string oracle_path = out_dir + "/oracle.json";
  std::ofstream out(oracle_path, std::ios::binary);
  if (!out) {
    throw fairaudit::ValidationError("cannot write '" + oracle_path + "'");
  }
  out << fairaudit::oracle_json(oracle).dump(2) << "\n";
  std::cout << "cohort: " << cohort_path << " (" << cohort.size()
            << " records)\noracle: " << oracle_path << "\n";
  return kExitOk;
}

int run_render_cmd(const std::string& report_path, const std::string& out_dir) {
  std::ifstream in(report_path);
  if (!in) {
    throw fairaudit::ValidationError("cannot open report '" + report_path + "'");
  }
  nlohmann::ordered_json report;
  try {
    in >> report;
  } catch (const nlohmann::json::exception& e) {
    throw fairaudit::ValidationError("report '" + report_path +
                                     "' is not valid JSON: " + e.what());
  }
  if (!report.is_object() || !report.contains("schema_version")) {
    throw fairaudit::ValidationError("report '" + report_path +
                                     "' is not a fairaudit report");
  }
  std::vector<std::string> warnings;
  const auto files = fairaudit::render_svg(report, out_dir, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  for (const auto& f : files) std::cout << f << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fairaudit: intersectional fairness auditing"};
  app.require_subcommand(1);

  auto* audit = app.add_subcommand("audit", "run a fairness audit");
  std::string audit_config;
  uint64_t seed = 0;
  std::string out_dir;
  int parallelism = 0;
  audit->add_option("--config", audit_config, "audit config JSON");
  auto* seed_opt = audit->add_option("--seed", seed, "master seed override");
  auto* out_opt = audit->add_option("--out", out_dir, "output directory override");
  auto* par_opt =
      audit->add_option("--parallelism", parallelism, "worker thread cap");
  audit->allow_extras();

  auto* synth = app.add_subcommand("synth", "generate a synthetic cohort");
  std::string synth_spec, synth_out = "synth_out";
  synth->add_option("--spec", synth_spec, "synth spec JSON")->required();
  synth->add_option("--out", synth_out, "output directory");

  auto* render = app.add_subcommand("render", "render SVGs from a report");
  std::string render_report, render_out = "svg";
  render->add_option("--report", render_report, "report JSON path")->required();
  render->add_option("--out", render_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (audit->parsed()) {
      return run_audit_cmd(audit_config, seed_opt->count() ? &seed : nullptr,
                           out_opt->count() ? &out_dir : nullptr,
                           par_opt->count() ? &parallelism : nullptr,
                           audit->remaining());
    }
    if (synth->parsed()) return run_synth_cmd(synth_spec, synth_out);
    if (render->parsed()) return run_render_cmd(render_report, render_out);
  } catch (const fairaudit::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const fairaudit::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const fairaudit::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitConfig;
}

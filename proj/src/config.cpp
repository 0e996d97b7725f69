#include "fairaudit/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace fairaudit {

namespace {

void reject_unknown(const nlohmann::json& obj,
                    const std::set<std::string>& allowed,
                    const std::string& where) {
  if (!obj.is_object()) {
    throw ConfigError("config: '" + where + "' must be an object");
  }
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!allowed.count(key)) {
      throw ConfigError("config: unknown key '" + key + "' in " + where);
    }
  }
}

std::string get_string(const nlohmann::json& j, const char* key,
                       const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_string()) {
    throw ConfigError(std::string("config: '") + key + "' must be a string");
  }
  return j.at(key).get<std::string>();
}

std::vector<std::string> get_string_list(const nlohmann::json& j,
                                         const char* key) {
  std::vector<std::string> out;
  if (!j.contains(key)) return out;
  if (!j.at(key).is_array()) {
    throw ConfigError(std::string("config: '") + key +
                      "' must be an array of strings");
  }
  for (const auto& v : j.at(key)) {
    if (!v.is_string()) {
      throw ConfigError(std::string("config: '") + key +
                        "' must contain only strings");
    }
    out.push_back(v.get<std::string>());
  }
  return out;
}

std::string intersection_axis_name(const std::vector<std::string>& attrs) {
  std::string name;
  for (size_t i = 0; i < attrs.size(); ++i) {
    if (i) name += "_x_";
    name += attrs[i];
  }
  return name;
}

}  // namespace

void apply_override(nlohmann::json& j, const std::string& dotted,
                    const std::string& value) {
  if (dotted.empty()) throw ConfigError("override: empty key");
  std::vector<std::string> parts;
  size_t start = 0;
  while (true) {
    const size_t dot = dotted.find('.', start);
    if (dot == std::string::npos) {
      parts.push_back(dotted.substr(start));
      break;
    }
    parts.push_back(dotted.substr(start, dot - start));
    start = dot + 1;
  }
  for (const auto& p : parts) {
    if (p.empty()) throw ConfigError("override: malformed key '" + dotted + "'");
  }
  nlohmann::json* node = &j;
  for (size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object()) {
      throw ConfigError("override: '" + dotted + "' descends into a non-object");
    }
    node = &(*node)[parts[i]];
    if (node->is_null()) *node = nlohmann::json::object();
  }
  if (!node->is_object()) {
    throw ConfigError("override: '" + dotted + "' descends into a non-object");
  }
  nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
  if (parsed.is_discarded()) {
    (*node)[parts.back()] = value;  // bare word, keep as string
  } else {
    (*node)[parts.back()] = std::move(parsed);
  }
}

namespace {

AuditConfig parse_config_fields(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  reject_unknown(j,
                 {"input", "name", "columns", "axes", "threshold", "masking",
                  "observational", "counterfactual", "learner", "output",
                  "seed", "parallelism"},
                 "config");
  AuditConfig cfg;

  if (!j.contains("input")) throw ConfigError("config: 'input' is required");
  reject_unknown(j.at("input"), {"path", "format"}, "input");
  cfg.input_path = get_string(j.at("input"), "path", "");
  const std::string fmt = get_string(j.at("input"), "format", "csv");
  if (fmt == "csv") {
    cfg.input_format = TableFormat::csv;
  } else if (fmt == "jsonl") {
    cfg.input_format = TableFormat::jsonl;
  } else {
    throw ConfigError("config: input.format must be 'csv' or 'jsonl'");
  }

  cfg.name = get_string(j, "name", "cohort");

  if (!j.contains("columns")) throw ConfigError("config: 'columns' is required");
  const auto& cols = j.at("columns");
  reject_unknown(cols,
                 {"id", "y_true", "y_score", "y_pred", "attributes",
                  "covariates", "missing_policy"},
                 "columns");
  cfg.columns.id = get_string(cols, "id", "");
  cfg.columns.y_true = get_string(cols, "y_true", "");
  cfg.columns.y_score = get_string(cols, "y_score", "");
  cfg.columns.y_pred = get_string(cols, "y_pred", "");
  cfg.columns.attributes = get_string_list(cols, "attributes");
  cfg.columns.covariates = get_string_list(cols, "covariates");
  const std::string mp = get_string(cols, "missing_policy", "error");
  if (mp == "error") {
    cfg.columns.missing_policy = MissingPolicy::error;
  } else if (mp == "unknown_category") {
    cfg.columns.missing_policy = MissingPolicy::unknown_category;
  } else {
    throw ConfigError(
        "config: columns.missing_policy must be 'error' or 'unknown_category'");
  }

  if (j.contains("axes")) {
    if (!j.at("axes").is_array()) {
      throw ConfigError("config: 'axes' must be an array");
    }
    for (const auto& a : j.at("axes")) {
      reject_unknown(a, {"name", "attributes"}, "axes[]");
      AxisSpec spec;
      spec.attributes = get_string_list(a, "attributes");
      spec.name = get_string(a, "name", intersection_axis_name(spec.attributes));
      cfg.axes.push_back(std::move(spec));
    }
  }
  if (cfg.axes.empty()) {
    // Default panel: each attribute alone, then the full intersection.
    for (const auto& attr : cfg.columns.attributes) {
      cfg.axes.push_back({attr, {attr}});
    }
    if (cfg.columns.attributes.size() > 1) {
      cfg.axes.push_back({intersection_axis_name(cfg.columns.attributes),
                          cfg.columns.attributes});
    }
  }

  if (j.contains("threshold")) {
    const auto& t = j.at("threshold");
    reject_unknown(t, {"mode", "tau", "recompute", "youden_axis"}, "threshold");
    const std::string mode = get_string(t, "mode", "fixed");
    if (mode == "fixed") {
      cfg.threshold.mode = ThresholdConfig::Mode::fixed;
    } else if (mode == "youden") {
      cfg.threshold.mode = ThresholdConfig::Mode::youden;
    } else {
      throw ConfigError("config: threshold.mode must be 'fixed' or 'youden'");
    }
    if (t.contains("tau")) cfg.threshold.tau = t.at("tau").get<double>();
    if (t.contains("recompute")) {
      cfg.threshold.recompute = t.at("recompute").get<bool>();
    }
    cfg.threshold.youden_axis = get_string(t, "youden_axis", "");
  }

  if (j.contains("masking")) {
    reject_unknown(j.at("masking"), {"n_min"}, "masking");
    if (j.at("masking").contains("n_min")) {
      cfg.masking.n_min = j.at("masking").at("n_min").get<int64_t>();
    }
  }

  if (j.contains("observational")) {
    reject_unknown(j.at("observational"), {"eo_max"}, "observational");
    if (j.at("observational").contains("eo_max")) {
      cfg.observational.eo_max = j.at("observational").at("eo_max").get<bool>();
    }
  }

  if (j.contains("counterfactual")) {
    const auto& c = j.at("counterfactual");
    reject_unknown(c,
                   {"enabled", "axis", "covariates", "epsilon",
                    "permutation_replicates", "bootstrap_replicates",
                    "ci_level", "method", "min_fit_size"},
                   "counterfactual");
    if (c.contains("enabled")) {
      cfg.counterfactual.enabled = c.at("enabled").get<bool>();
    }
    cfg.counterfactual.axis = get_string(c, "axis", "");
    cfg.counterfactual.covariates = get_string_list(c, "covariates");
    auto& e = cfg.counterfactual.engine;
    if (c.contains("epsilon")) e.epsilon = c.at("epsilon").get<double>();
    if (c.contains("permutation_replicates")) {
      e.permutation_replicates = c.at("permutation_replicates").get<int64_t>();
    }
    if (c.contains("bootstrap_replicates")) {
      e.bootstrap_replicates = c.at("bootstrap_replicates").get<int64_t>();
    }
    if (c.contains("ci_level")) e.ci_level = c.at("ci_level").get<double>();
    if (c.contains("method")) {
      const std::string m = c.at("method").get<std::string>();
      if (m == "permutation") {
        e.method = CfMethod::permutation;
      } else if (m == "standardized") {
        e.method = CfMethod::standardized;
      } else if (m == "both") {
        e.method = CfMethod::both;
      } else {
        throw ConfigError(
            "config: counterfactual.method must be 'permutation', "
            "'standardized', or 'both'");
      }
    }
    if (c.contains("min_fit_size")) {
      e.min_fit_size = c.at("min_fit_size").get<int64_t>();
    }
  }
  if (cfg.counterfactual.axis.empty() && !cfg.axes.empty()) {
    cfg.counterfactual.axis = cfg.axes.back().name;
  }
  if (cfg.threshold.youden_axis.empty() && !cfg.axes.empty()) {
    cfg.threshold.youden_axis = cfg.axes.back().name;
  }

  if (j.contains("learner")) {
    const auto& l = j.at("learner");
    reject_unknown(l, {"lambda", "tol", "max_iter"}, "learner");
    if (l.contains("lambda") && !l.at("lambda").is_null()) {
      cfg.learner.lambda = l.at("lambda").get<double>();
    }
    if (l.contains("tol")) cfg.learner.tol = l.at("tol").get<double>();
    if (l.contains("max_iter")) {
      cfg.learner.max_iter = l.at("max_iter").get<int>();
    }
  }

  if (j.contains("output")) {
    const auto& o = j.at("output");
    reject_unknown(o, {"dir", "tables", "svg"}, "output");
    cfg.output.dir = get_string(o, "dir", "out");
    if (o.contains("tables")) cfg.output.tables = o.at("tables").get<bool>();
    if (o.contains("svg")) cfg.output.svg = o.at("svg").get<bool>();
  }

  if (j.contains("seed")) cfg.seed = j.at("seed").get<uint64_t>();
  if (j.contains("parallelism")) {
    cfg.parallelism = j.at("parallelism").get<int>();
  }
  cfg.counterfactual.engine.seed = cfg.seed;
  cfg.counterfactual.engine.parallelism = cfg.parallelism;

  cfg.validate();
  return cfg;
}

}  // namespace

AuditConfig parse_audit_config(const nlohmann::json& j) {
  try {
    return parse_config_fields(j);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

void AuditConfig::validate() const {
  if (input_path.empty()) throw ConfigError("config: input.path is required");
  if (columns.y_true.empty()) {
    throw ConfigError("config: columns.y_true is required");
  }
  if (columns.y_score.empty() && columns.y_pred.empty()) {
    throw ConfigError("config: at least one of columns.y_score or columns.y_pred is required");
  }
  if (columns.attributes.empty()) {
    throw ConfigError("config: columns.attributes must list at least one attribute");
  }
  {
    std::set<std::string> seen;
    for (const auto& a : columns.attributes) {
      if (!seen.insert(a).second) {
        throw ConfigError("config: duplicate attribute column '" + a + "'");
      }
    }
    for (const auto& c : columns.covariates) {
      if (!seen.insert(c).second) {
        throw ConfigError("config: column '" + c + "' declared twice");
      }
    }
  }
  if (axes.empty()) throw ConfigError("config: no axes to audit");
  std::set<std::string> axis_names;
  for (const auto& axis : axes) {
    if (axis.name.empty()) throw ConfigError("config: axis with empty name");
    if (!axis_names.insert(axis.name).second) {
      throw ConfigError("config: duplicate axis name '" + axis.name + "'");
    }
    if (axis.attributes.empty()) {
      throw ConfigError("config: axis '" + axis.name + "' lists no attributes");
    }
    for (const auto& attr : axis.attributes) {
      if (std::find(columns.attributes.begin(), columns.attributes.end(),
                    attr) == columns.attributes.end()) {
        throw ConfigError("config: axis '" + axis.name +
                          "' uses undeclared attribute '" + attr + "'");
      }
    }
  }
  if (!(threshold.tau >= 0.0 && threshold.tau <= 1.0)) {
    throw ConfigError("config: threshold.tau must be in [0,1]");
  }
  if (threshold.mode == ThresholdConfig::Mode::youden) {
    if (columns.y_score.empty()) {
      throw ConfigError("config: threshold.mode 'youden' needs columns.y_score");
    }
    if (!axis_names.count(threshold.youden_axis)) {
      throw ConfigError("config: threshold.youden_axis '" +
                        threshold.youden_axis + "' is not an audited axis");
    }
  }
  if (masking.n_min < 0) throw ConfigError("config: masking.n_min must be >= 0");
  if (counterfactual.enabled) {
    counterfactual.engine.validate();
    if (!axis_names.count(counterfactual.axis)) {
      throw ConfigError("config: counterfactual.axis '" + counterfactual.axis +
                        "' is not an audited axis");
    }
    for (const auto& cov : counterfactual.covariates) {
      if (std::find(columns.covariates.begin(), columns.covariates.end(),
                    cov) == columns.covariates.end()) {
        throw ConfigError("config: counterfactual covariate '" + cov +
                          "' is not a declared covariate column");
      }
    }
  }
  if (learner.tol <= 0.0) throw ConfigError("config: learner.tol must be > 0");
  if (learner.max_iter < 1) {
    throw ConfigError("config: learner.max_iter must be >= 1");
  }
  if (output.dir.empty()) throw ConfigError("config: output.dir is required");
  if (parallelism < 0) throw ConfigError("config: parallelism must be >= 0");
}

nlohmann::ordered_json AuditConfig::echo() const {
  nlohmann::ordered_json j;
  j["input"]["path"] = input_path;
  j["input"]["format"] = input_format == TableFormat::csv ? "csv" : "jsonl";
  j["name"] = name;
  auto& cols = j["columns"];
  cols["id"] = columns.id;
  cols["y_true"] = columns.y_true;
  cols["y_score"] = columns.y_score;
  cols["y_pred"] = columns.y_pred;
  cols["attributes"] = columns.attributes;
  cols["covariates"] = columns.covariates;
  cols["missing_policy"] = columns.missing_policy == MissingPolicy::error
                               ? "error"
                               : "unknown_category";
  j["axes"] = nlohmann::ordered_json::array();
  for (const auto& axis : axes) {
    nlohmann::ordered_json a;
    a["name"] = axis.name;
    a["attributes"] = axis.attributes;
    j["axes"].push_back(std::move(a));
  }
  auto& t = j["threshold"];
  t["mode"] =
      threshold.mode == ThresholdConfig::Mode::fixed ? "fixed" : "youden";
  t["tau"] = threshold.tau;
  t["recompute"] = threshold.recompute;
  t["youden_axis"] = threshold.youden_axis;
  j["masking"]["n_min"] = masking.n_min;
  j["observational"]["eo_max"] = observational.eo_max;
  auto& c = j["counterfactual"];
  c["enabled"] = counterfactual.enabled;
  c["axis"] = counterfactual.axis;
  c["covariates"] = counterfactual.covariates;
  c["epsilon"] = counterfactual.engine.epsilon;
  c["permutation_replicates"] = counterfactual.engine.permutation_replicates;
  c["bootstrap_replicates"] = counterfactual.engine.bootstrap_replicates;
  c["ci_level"] = counterfactual.engine.ci_level;
  c["method"] = method_name(counterfactual.engine.method);
  c["min_fit_size"] = counterfactual.engine.min_fit_size;
  auto& l = j["learner"];
  if (learner.lambda >= 0.0) {
    l["lambda"] = learner.lambda;
  } else {
    l["lambda"] = nullptr;  // auto: 1e-6 * fit size
  }
  l["tol"] = learner.tol;
  l["max_iter"] = learner.max_iter;
  // Output locations and parallelism change where and how fast results
  // land, never what they are, so they stay out of the echo and reports
  // remain byte-identical across those settings.
  j["seed"] = seed;
  return j;
}

AuditConfig load_audit_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_audit_config(j);
}

}  // namespace fairaudit

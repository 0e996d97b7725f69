#include "fairaudit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "fairaudit/rng.hpp"

namespace fairaudit {

namespace {

void require_prob(double v, const std::string& what) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw ConfigError("synth spec: " + what + " must be in [0,1]");
  }
}

const std::set<std::string> kSpecKeys = {
    "name", "seed",  "tau",       "mechanism",
    "attributes", "cells", "covariate", "miscalibration"};
const std::set<std::string> kCellKeysDirect = {"categories", "size",
                                               "prevalence", "tpr", "fpr"};
const std::set<std::string> kCellKeysMediated = {"categories", "size",
                                                 "prevalence", "mu"};
const std::set<std::string> kCovariateKeys = {"name", "intercept", "slope"};

void reject_unknown(const nlohmann::json& obj, const std::set<std::string>& allowed,
                    const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!allowed.count(key)) {
      throw ConfigError("synth spec: unknown key '" + key + "' in " + where);
    }
  }
}

}  // namespace

void SynthSpec::validate() const {
  if (attributes.empty()) throw ConfigError("synth spec: no attributes declared");
  if (cells.empty()) throw ConfigError("synth spec: no cells declared");
  if (!(tau > 0.0 && tau < 1.0)) {
    throw ConfigError("synth spec: tau must be in (0,1)");
  }
  if (!(miscalibration >= 0.0 && miscalibration < 1.0)) {
    throw ConfigError("synth spec: miscalibration must be in [0,1)");
  }
  std::set<std::string> attr_names;
  for (const auto& [attr, cats] : attributes) {
    if (!attr_names.insert(attr).second) {
      throw ConfigError("synth spec: duplicate attribute '" + attr + "'");
    }
    if (cats.empty()) {
      throw ConfigError("synth spec: attribute '" + attr + "' has no categories");
    }
    std::set<std::string> seen(cats.begin(), cats.end());
    if (seen.size() != cats.size()) {
      throw ConfigError("synth spec: attribute '" + attr +
                        "' has duplicate categories");
    }
  }
  std::set<std::map<std::string, std::string>> combos;
  for (const auto& cell : cells) {
    if (cell.size < 1) throw ConfigError("synth spec: cell size must be >= 1");
    require_prob(cell.prevalence, "prevalence");
    if (cell.categories.size() != attributes.size()) {
      throw ConfigError("synth spec: cell must assign every declared attribute");
    }
    for (const auto& [attr, cats] : attributes) {
      const auto it = cell.categories.find(attr);
      if (it == cell.categories.end()) {
        throw ConfigError("synth spec: cell missing attribute '" + attr + "'");
      }
      if (std::find(cats.begin(), cats.end(), it->second) == cats.end()) {
        throw ConfigError("synth spec: category '" + it->second +
                          "' not declared for attribute '" + attr + "'");
      }
    }
    if (!combos.insert(cell.categories).second) {
      throw ConfigError("synth spec: duplicate cell definition");
    }
    if (mechanism == SynthMechanism::direct) {
      if (std::isnan(cell.tpr) || std::isnan(cell.fpr)) {
        throw ConfigError("synth spec: direct mechanism cells need tpr and fpr");
      }
      require_prob(cell.tpr, "tpr");
      require_prob(cell.fpr, "fpr");
    } else {
      if (std::isnan(cell.mu)) {
        throw ConfigError("synth spec: covariate-mediated cells need mu");
      }
      if (!std::isfinite(cell.mu)) {
        throw ConfigError("synth spec: mu must be finite");
      }
    }
  }
  if (mechanism == SynthMechanism::covariate_mediated) {
    if (!covariate) {
      throw ConfigError("synth spec: covariate-mediated mechanism needs a covariate block");
    }
    if (covariate->name.empty()) {
      throw ConfigError("synth spec: covariate name must be non-empty");
    }
    if (!std::isfinite(covariate->intercept) || !std::isfinite(covariate->slope)) {
      throw ConfigError("synth spec: covariate intercept/slope must be finite");
    }
  } else if (covariate) {
    throw ConfigError("synth spec: covariate block is only valid for the covariate-mediated mechanism");
  }
}

SynthSpec parse_synth_spec(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("synth spec: top level must be an object");
  reject_unknown(j, kSpecKeys, "spec");
  SynthSpec spec;
  if (j.contains("name")) spec.name = j.at("name").get<std::string>();
  if (j.contains("seed")) spec.seed = j.at("seed").get<uint64_t>();
  if (j.contains("tau")) spec.tau = j.at("tau").get<double>();
  if (j.contains("miscalibration")) {
    spec.miscalibration = j.at("miscalibration").get<double>();
  }
  if (j.contains("mechanism")) {
    const auto m = j.at("mechanism").get<std::string>();
    if (m == "direct") {
      spec.mechanism = SynthMechanism::direct;
    } else if (m == "covariate_mediated") {
      spec.mechanism = SynthMechanism::covariate_mediated;
    } else {
      throw ConfigError("synth spec: mechanism must be 'direct' or 'covariate_mediated'");
    }
  }
  if (!j.contains("attributes") || !j.at("attributes").is_array()) {
    throw ConfigError("synth spec: 'attributes' array is required");
  }
  for (const auto& a : j.at("attributes")) {
    reject_unknown(a, {"name", "categories"}, "attributes[]");
    spec.attributes.emplace_back(
        a.at("name").get<std::string>(),
        a.at("categories").get<std::vector<std::string>>());
  }
  if (!j.contains("cells") || !j.at("cells").is_array()) {
    throw ConfigError("synth spec: 'cells' array is required");
  }
  const auto& cell_keys = spec.mechanism == SynthMechanism::direct
                              ? kCellKeysDirect
                              : kCellKeysMediated;
  for (const auto& c : j.at("cells")) {
    reject_unknown(c, cell_keys, "cells[]");
    SynthCell cell;
    cell.categories =
        c.at("categories").get<std::map<std::string, std::string>>();
    cell.size = c.at("size").get<int64_t>();
    cell.prevalence = c.at("prevalence").get<double>();
    if (c.contains("tpr")) cell.tpr = c.at("tpr").get<double>();
    if (c.contains("fpr")) cell.fpr = c.at("fpr").get<double>();
    if (c.contains("mu")) cell.mu = c.at("mu").get<double>();
    spec.cells.push_back(std::move(cell));
  }
  if (j.contains("covariate")) {
    reject_unknown(j.at("covariate"), kCovariateKeys, "covariate");
    SynthCovariate cov;
    if (j.at("covariate").contains("name")) {
      cov.name = j.at("covariate").at("name").get<std::string>();
    }
    cov.intercept = j.at("covariate").at("intercept").get<double>();
    cov.slope = j.at("covariate").at("slope").get<double>();
    spec.covariate = cov;
  }
  spec.validate();
  return spec;
}

SynthSpec load_synth_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open synth spec '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("synth spec '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_synth_spec(j);
}

AuditCohort generate_cohort(const SynthSpec& spec) {
  spec.validate();
  ColumnSpec columns;
  columns.id = "id";
  columns.y_true = "y_true";
  columns.y_score = "y_score";
  columns.y_pred = "y_pred";
  for (const auto& [attr, cats] : spec.attributes) {
    (void)cats;
    columns.attributes.push_back(attr);
  }
  const bool mediated = spec.mechanism == SynthMechanism::covariate_mediated;
  if (mediated) columns.covariates.push_back(spec.covariate->name);

  std::vector<PredictionRecord> records;
  int64_t total = 0;
  for (const auto& cell : spec.cells) total += cell.size;
  records.reserve(total);

  Rng rng(derive_stream(spec.seed, kStreamSynth));
  int64_t row = 0;
  char idbuf[24];
  for (const auto& cell : spec.cells) {
    for (int64_t i = 0; i < cell.size; ++i, ++row) {
      PredictionRecord rec;
      std::snprintf(idbuf, sizeof(idbuf), "s%08lld",
                    static_cast<long long>(row + 1));
      rec.id = idbuf;
      const bool y = rng.bernoulli(cell.prevalence);
      rec.y_true = y ? 1 : 0;
      bool yhat;
      if (mediated) {
        const double z = rng.normal(cell.mu, 1.0);
        const double e =
            sigmoid(spec.covariate->intercept + spec.covariate->slope * z);
        const bool wrong = rng.bernoulli(e);
        yhat = y ? !wrong : wrong;
        CovariateValue cv;
        cv.numeric = true;
        cv.num = z;
        rec.covariates.emplace_back(spec.covariate->name, cv);
      } else {
        yhat = y ? rng.bernoulli(cell.tpr) : rng.bernoulli(cell.fpr);
      }
      rec.y_pred = yhat ? 1 : 0;
      bool score_side = yhat;
      if (spec.miscalibration > 0.0 && rng.bernoulli(spec.miscalibration)) {
        score_side = !score_side;
      }
      rec.y_score = score_side ? rng.uniform(spec.tau, 1.0)
                               : rng.uniform(0.0, spec.tau);
      for (const auto& [attr, cat] : cell.categories) {
        rec.attributes.emplace_back(attr, cat);
      }
      records.push_back(std::move(rec));
    }
  }
  return cohort_from_records(records, columns, spec.name);
}

void gauss_hermite(int n, std::vector<double>& nodes,
                   std::vector<double>& weights) {
  if (n < 1) throw ConfigError("gauss_hermite: n must be >= 1");
  // Golub-Welsch on the Hermite Jacobi matrix: zero diagonal,
  // off-diagonal sqrt(i/2).
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    const double b = std::sqrt(static_cast<double>(i) / 2.0);
    J(i, i - 1) = b;
    J(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(J);
  if (solver.info() != Eigen::Success) {
    throw NumericError("gauss_hermite: eigendecomposition failed");
  }
  constexpr double sqrt_pi = 1.77245385090551602729816748334115;
  nodes.resize(n);
  weights.resize(n);
  for (int i = 0; i < n; ++i) {
    nodes[i] = solver.eigenvalues()[i];
    const double v0 = solver.eigenvectors()(0, i);
    weights[i] = sqrt_pi * v0 * v0;
  }
}

namespace {

constexpr int kQuadNodes = 96;

struct CellExpectation {
  double ppr = 0.0;
  double tpr = 0.0;
  double fpr = 0.0;
};

CellExpectation expected_rates(const SynthSpec& spec, const SynthCell& cell) {
  CellExpectation e;
  if (spec.mechanism == SynthMechanism::direct) {
    e.tpr = cell.tpr;
    e.fpr = cell.fpr;
  } else {
    const double a = spec.covariate->intercept;
    const double b = spec.covariate->slope;
    const double err = normal_expectation(
        cell.mu, kQuadNodes, [&](double z) { return sigmoid(a + b * z); });
    e.tpr = 1.0 - err;
    e.fpr = err;
  }
  e.ppr = cell.prevalence * e.tpr + (1.0 - cell.prevalence) * e.fpr;
  return e;
}

std::optional<double> spread(const std::vector<double>& values) {
  if (values.size() < 2) return std::nullopt;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return *hi - *lo;
}

}  // namespace

SynthOracle oracle_metrics(const SynthSpec& spec) {
  spec.validate();
  SynthOracle oracle;

  std::vector<std::string> sorted_attrs;
  for (const auto& [attr, cats] : spec.attributes) {
    (void)cats;
    sorted_attrs.push_back(attr);
  }
  std::sort(sorted_attrs.begin(), sorted_attrs.end());

  std::vector<CellExpectation> expectations;
  for (const auto& cell : spec.cells) {
    expectations.push_back(expected_rates(spec, cell));
    OracleCell oc;
    for (const auto& attr : sorted_attrs) oc.key.categories.push_back(cell.categories.at(attr));
    oc.size = cell.size;
    oc.prevalence = cell.prevalence;
    oc.ppr = expectations.back().ppr;
    oc.tpr = expectations.back().tpr;
    oc.fpr = expectations.back().fpr;
    oracle.cells.push_back(std::move(oc));
  }
  {
    std::vector<size_t> order(oracle.cells.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return oracle.cells[a].key < oracle.cells[b].key;
    });
    std::vector<OracleCell> sorted_cells;
    for (size_t i : order) sorted_cells.push_back(oracle.cells[i]);
    oracle.cells = std::move(sorted_cells);
  }

  // Per-axis gaps: each attribute alone, then the full intersection.
  std::vector<OracleAxis> axes;
  for (const auto& [attr, cats] : spec.attributes) {
    (void)cats;
    OracleAxis ax;
    ax.name = attr;
    ax.attribute_names = {attr};
    axes.push_back(std::move(ax));
  }
  if (spec.attributes.size() > 1) {
    OracleAxis ax;
    for (size_t i = 0; i < spec.attributes.size(); ++i) {
      if (i) ax.name += "_x_";
      ax.name += spec.attributes[i].first;
    }
    ax.attribute_names = sorted_attrs;
    axes.push_back(std::move(ax));
  }

  for (auto& axis : axes) {
    // Marginalize the cells onto this axis, weighting rate expectations by
    // expected stratum mass.
    struct Acc {
      double n = 0.0, pos = 0.0, neg = 0.0;
      double ppr = 0.0, tpr = 0.0, fpr = 0.0;
    };
    std::map<std::vector<std::string>, Acc> groups;
    for (size_t i = 0; i < spec.cells.size(); ++i) {
      const auto& cell = spec.cells[i];
      const auto& e = expected_rates(spec, cell);
      std::vector<std::string> key;
      for (const auto& attr : axis.attribute_names) {
        key.push_back(cell.categories.at(attr));
      }
      auto& acc = groups[key];
      const auto n = static_cast<double>(cell.size);
      const double pos = n * cell.prevalence;
      const double neg = n - pos;
      acc.n += n;
      acc.pos += pos;
      acc.neg += neg;
      acc.ppr += n * e.ppr;
      acc.tpr += pos * e.tpr;
      acc.fpr += neg * e.fpr;
    }
    std::vector<double> pprs, tprs, fprs;
    for (const auto& [key, acc] : groups) {
      (void)key;
      pprs.push_back(acc.ppr / acc.n);
      if (acc.pos > 0.0) tprs.push_back(acc.tpr / acc.pos);
      if (acc.neg > 0.0) fprs.push_back(acc.fpr / acc.neg);
    }
    axis.dp_gap = spread(pprs);
    axis.eo_fpr_gap = spread(fprs);
    axis.eod_gap = spread(tprs);
  }
  oracle.axes = std::move(axes);

  if (spec.mechanism == SynthMechanism::covariate_mediated) {
    // Shared error model: every subgroup standardizes to the same stratum
    // average, so pairwise disparities vanish in expectation.
    double pos_num = 0.0, pos_den = 0.0, neg_num = 0.0, neg_den = 0.0;
    for (size_t i = 0; i < spec.cells.size(); ++i) {
      const auto& cell = spec.cells[i];
      const auto e = expected_rates(spec, cell);
      const auto n = static_cast<double>(cell.size);
      const double pos = n * cell.prevalence;
      const double neg = n - pos;
      neg_num += pos * (1.0 - e.tpr);  // Y=1 stratum, error = missed positive
      neg_den += pos;
      pos_num += neg * e.fpr;  // Y=0 stratum, error = false alarm
      pos_den += neg;
    }
    if (pos_den > 0.0) oracle.standardized_pos = pos_num / pos_den;
    if (neg_den > 0.0) oracle.standardized_neg = neg_num / neg_den;
    oracle.expected_u = 0.0;
  }
  return oracle;
}

nlohmann::ordered_json oracle_json(const SynthOracle& oracle) {
  nlohmann::ordered_json j;
  j["cells"] = nlohmann::ordered_json::array();
  for (const auto& cell : oracle.cells) {
    nlohmann::ordered_json c;
    c["subgroup"] = cell.key.label();
    c["size"] = cell.size;
    c["prevalence"] = cell.prevalence;
    c["ppr"] = cell.ppr;
    c["tpr"] = cell.tpr;
    c["fpr"] = cell.fpr;
    j["cells"].push_back(std::move(c));
  }
  j["axes"] = nlohmann::ordered_json::array();
  for (const auto& axis : oracle.axes) {
    nlohmann::ordered_json a;
    a["axis"] = axis.name;
    a["dp_gap"] = axis.dp_gap ? nlohmann::ordered_json(*axis.dp_gap)
                              : nlohmann::ordered_json(nullptr);
    a["eo_fpr_gap"] = axis.eo_fpr_gap ? nlohmann::ordered_json(*axis.eo_fpr_gap)
                                      : nlohmann::ordered_json(nullptr);
    a["eod_gap"] = axis.eod_gap ? nlohmann::ordered_json(*axis.eod_gap)
                                : nlohmann::ordered_json(nullptr);
    j["axes"].push_back(std::move(a));
  }
  if (oracle.standardized_pos) {
    j["standardized_pos"] = *oracle.standardized_pos;
  }
  if (oracle.standardized_neg) {
    j["standardized_neg"] = *oracle.standardized_neg;
  }
  if (oracle.expected_u) j["expected_u"] = *oracle.expected_u;
  return j;
}

}  // namespace fairaudit

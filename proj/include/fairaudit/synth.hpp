#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fairaudit/cohort.hpp"

namespace fairaudit {

enum class SynthMechanism { direct, covariate_mediated };

// One population cell: a full assignment of attribute categories plus the
// generative knobs for that cell. Direct cells carry tpr/fpr; mediated cells
// carry the covariate mean mu instead.
struct SynthCell {
  std::map<std::string, std::string> categories;
  int64_t size = 0;
  double prevalence = 0.0;
  double tpr = std::numeric_limits<double>::quiet_NaN();
  double fpr = std::numeric_limits<double>::quiet_NaN();
  double mu = std::numeric_limits<double>::quiet_NaN();
};

struct SynthCovariate {
  std::string name = "z";
  double intercept = 0.0;  // a in sigmoid(a + b*z)
  double slope = 0.0;      // b
};

struct SynthSpec {
  std::string name = "synth";
  uint64_t seed = 0;
  double tau = 0.5;
  SynthMechanism mechanism = SynthMechanism::direct;
  // Declared attribute order, each with its category vocabulary.
  std::vector<std::pair<std::string, std::vector<std::string>>> attributes;
  std::vector<SynthCell> cells;
  std::optional<SynthCovariate> covariate;  // required iff covariate_mediated
  double miscalibration = 0.0;

  void validate() const;
};

SynthSpec parse_synth_spec(const nlohmann::json& j);
SynthSpec load_synth_spec(const std::string& path);

struct OracleCell {
  SubgroupKey key;  // categories in sorted-attribute order
  int64_t size = 0;
  double prevalence = 0.0;
  double ppr = 0.0;
  double tpr = 0.0;
  double fpr = 0.0;
};

struct OracleAxis {
  std::string name;
  std::vector<std::string> attribute_names;  // sorted
  std::optional<double> dp_gap;
  std::optional<double> eo_fpr_gap;
  std::optional<double> eod_gap;
};

// Expected values derived from the spec alone (closed form plus quadrature),
// never from generated samples.
struct SynthOracle {
  std::vector<OracleCell> cells;  // full intersection, canonical key order
  std::vector<OracleAxis> axes;   // one per attribute, then the intersection
  // Mediated specs: the standardized rate every subgroup shares, per side,
  // and the implied u-values (zero whenever disparities are fully mediated).
  std::optional<double> standardized_pos;
  std::optional<double> standardized_neg;
  std::optional<double> expected_u;
};

AuditCohort generate_cohort(const SynthSpec& spec);
SynthOracle oracle_metrics(const SynthSpec& spec);
nlohmann::ordered_json oracle_json(const SynthOracle& oracle);

// Physicists' Gauss-Hermite rule: nodes x_i and weights w_i such that
// integral of f(x) exp(-x^2) dx ~= sum w_i f(x_i).
void gauss_hermite(int n, std::vector<double>& nodes,
                   std::vector<double>& weights);

// E[f(Z)] for Z ~ Normal(mu, 1) via the rule above.
template <typename F>
double normal_expectation(double mu, int n, F&& f) {
  std::vector<double> nodes, weights;
  gauss_hermite(n, nodes, weights);
  constexpr double inv_sqrt_pi = 0.56418958354775628694807945156077;
  constexpr double sqrt2 = 1.41421356237309504880168872420970;
  double s = 0.0;
  for (size_t i = 0; i < nodes.size(); ++i) {
    s += weights[i] * f(mu + sqrt2 * nodes[i]);
  }
  return s * inv_sqrt_pi;
}

}  // namespace fairaudit

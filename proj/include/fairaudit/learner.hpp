#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fairaudit/cohort.hpp"

namespace fairaudit {

struct LearnerConfig {
  // Ridge strength; negative means the default 1e-6 * n_rows.
  double lambda = -1.0;
  double tol = 1e-8;
  int max_iter = 100;
};

// Frozen covariate encoding: numerics are z-scored with moments from the
// rows the spec was built on; categoricals are one-hot with the first
// vocabulary category as the dropped reference. Column 0 is the intercept.
struct DesignSpec {
  struct NumericColumn {
    std::string name;
    int covariate = -1;  // index into schema.covariates
    double mean = 0.0;
    double sd = 1.0;     // population sd; 0 encodes a constant column
  };
  struct CategoricalColumn {
    std::string name;
    int covariate = -1;
    std::vector<std::string> levels;  // levels[0] is the reference
  };
  std::vector<NumericColumn> numeric;
  std::vector<CategoricalColumn> categorical;

  int n_columns() const;
};

DesignSpec build_design_spec(const AuditCohort& cohort,
                             const std::vector<int64_t>& rows,
                             const std::vector<std::string>& covariates);

// Rows align with `rows`; columns with the spec. Unseen categories at
// predict time map to the reference level and are counted in *unseen.
Eigen::MatrixXd build_design(const AuditCohort& cohort,
                             const std::vector<int64_t>& rows,
                             const DesignSpec& spec,
                             int64_t* unseen = nullptr);

struct LearnerModel {
  Eigen::VectorXd beta;
  double lambda = 0.0;
  int iterations = 0;
  double grad_norm = 0.0;
  bool converged = false;
  bool degenerate = false;     // all-equal outcomes; constant model
  double constant_rate = 0.0;  // clipped empirical rate when degenerate
};

// Penalized negative log-likelihood and its gradient (intercept excluded
// from the ridge term). Exposed for finite-difference checks.
double penalized_nll(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                     const Eigen::VectorXd& beta, double lambda);
Eigen::VectorXd penalized_grad(const Eigen::MatrixXd& X,
                               const Eigen::VectorXd& y,
                               const Eigen::VectorXd& beta, double lambda);

// Newton/IRLS with step-halving; stops at grad norm <= tol or max_iter.
LearnerModel fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                          double lambda, double tol = 1e-8,
                          int max_iter = 100);

Eigen::VectorXd predict_prob(const LearnerModel& model,
                             const Eigen::MatrixXd& X);

}  // namespace fairaudit

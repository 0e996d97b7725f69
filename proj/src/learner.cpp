#include "fairaudit/learner.hpp"

#include <algorithm>
#include <cmath>

namespace fairaudit {

namespace {

constexpr double kRateClip = 1e-6;

// log(1 + exp(eta)) without overflow
double log1pexp(double eta) {
  if (eta > 0.0) return eta + std::log1p(std::exp(-eta));
  return std::log1p(std::exp(eta));
}

}  // namespace

int DesignSpec::n_columns() const {
  int cols = 1;  // intercept
  cols += static_cast<int>(numeric.size());
  for (const auto& c : categorical) {
    cols += static_cast<int>(c.levels.size()) - 1;
  }
  return cols;
}

DesignSpec build_design_spec(const AuditCohort& cohort,
                             const std::vector<int64_t>& rows,
                             const std::vector<std::string>& covariates) {
  DesignSpec spec;
  for (const auto& name : covariates) {
    const int idx = cohort.schema.covariate_index(name);
    if (idx < 0) {
      throw ValidationError("covariate '" + name + "' not declared in cohort");
    }
    if (cohort.schema.covariate_numeric[idx]) {
      DesignSpec::NumericColumn col;
      col.name = name;
      col.covariate = idx;
      double mean = 0.0;
      for (int64_t r : rows) mean += cohort.cov_num[idx][r];
      mean /= static_cast<double>(rows.size());
      double ss = 0.0;
      for (int64_t r : rows) {
        const double d = cohort.cov_num[idx][r] - mean;
        ss += d * d;
      }
      col.mean = mean;
      col.sd = std::sqrt(ss / static_cast<double>(rows.size()));
      spec.numeric.push_back(std::move(col));
    } else {
      DesignSpec::CategoricalColumn col;
      col.name = name;
      col.covariate = idx;
      col.levels = cohort.schema.cov_vocab[idx];
      spec.categorical.push_back(std::move(col));
    }
  }
  return spec;
}

Eigen::MatrixXd build_design(const AuditCohort& cohort,
                             const std::vector<int64_t>& rows,
                             const DesignSpec& spec, int64_t* unseen) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, spec.n_columns());
  X.col(0).setOnes();
  Eigen::Index col = 1;
  for (const auto& c : spec.numeric) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v = cohort.cov_num[c.covariate][rows[i]];
      if (!std::isfinite(v)) {
        throw ValidationError("non-finite value in covariate '" + c.name +
                              "'");
      }
      X(i, col) = c.sd > 0.0 ? (v - c.mean) / c.sd : 0.0;
    }
    ++col;
  }
  for (const auto& c : spec.categorical) {
    const auto& vocab = cohort.schema.cov_vocab[c.covariate];
    for (Eigen::Index i = 0; i < n; ++i) {
      const std::string& level = vocab[cohort.cov_code[c.covariate][rows[i]]];
      const auto it = std::find(c.levels.begin(), c.levels.end(), level);
      if (it == c.levels.end()) {
        // Unseen category maps to the reference row (all zeros).
        if (unseen) ++*unseen;
        continue;
      }
      const auto pos = static_cast<Eigen::Index>(it - c.levels.begin());
      if (pos > 0) X(i, col + pos - 1) = 1.0;
    }
    col += static_cast<Eigen::Index>(c.levels.size()) - 1;
  }
  return X;
}

double penalized_nll(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                     const Eigen::VectorXd& beta, double lambda) {
  const Eigen::VectorXd eta = X * beta;
  double nll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    nll += log1pexp(eta[i]) - y[i] * eta[i];
  }
  double penalty = 0.0;
  for (Eigen::Index j = 1; j < beta.size(); ++j) penalty += beta[j] * beta[j];
  return nll + 0.5 * lambda * penalty;
}

Eigen::VectorXd penalized_grad(const Eigen::MatrixXd& X,
                               const Eigen::VectorXd& y,
                               const Eigen::VectorXd& beta, double lambda) {
  const Eigen::VectorXd eta = X * beta;
  Eigen::VectorXd p(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) p[i] = sigmoid(eta[i]);
  Eigen::VectorXd g = X.transpose() * (p - y);
  for (Eigen::Index j = 1; j < beta.size(); ++j) g[j] += lambda * beta[j];
  return g;
}

LearnerModel fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                          double lambda, double tol, int max_iter) {
  if (X.rows() != y.size() || X.rows() < 1) {
    throw ValidationError("fit_logistic: X rows must match y length (>= 1)");
  }
  if (!X.allFinite() || !y.allFinite()) {
    throw ValidationError("fit_logistic: non-finite values in inputs");
  }
  if (lambda < 0.0) throw ConfigError("ridge strength must be >= 0");

  LearnerModel model;
  model.lambda = lambda;

  const double y_mean = y.mean();
  if (y_mean <= 0.0 || y_mean >= 1.0) {
    // Degenerate stratum: constant model at the clipped empirical rate.
    model.degenerate = true;
    model.constant_rate =
        std::clamp(y_mean, kRateClip, 1.0 - kRateClip);
    model.beta = Eigen::VectorXd::Zero(X.cols());
    model.beta[0] = logit(model.constant_rate);
    model.converged = true;
    return model;
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(X.cols());
  beta[0] = logit(y_mean);  // warm start at the intercept MLE
  double f = penalized_nll(X, y, beta, lambda);

  for (int iter = 1; iter <= max_iter; ++iter) {
    const Eigen::VectorXd eta = X * beta;
    Eigen::VectorXd p(eta.size()), w(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      p[i] = sigmoid(eta[i]);
      w[i] = std::max(p[i] * (1.0 - p[i]), 1e-10);
    }
    Eigen::VectorXd g = X.transpose() * (p - y);
    for (Eigen::Index j = 1; j < beta.size(); ++j) g[j] += lambda * beta[j];

    model.iterations = iter;
    model.grad_norm = g.norm();
    if (model.grad_norm <= tol) {
      model.converged = true;
      break;
    }

    Eigen::MatrixXd H = X.transpose() * w.asDiagonal() * X;
    for (Eigen::Index j = 1; j < beta.size(); ++j) H(j, j) += lambda;
    const Eigen::VectorXd dir = H.ldlt().solve(g);

    // Step-halving keeps the penalized objective non-increasing.
    double step = 1.0;
    bool accepted = false;
    for (int h = 0; h < 40; ++h) {
      const Eigen::VectorXd cand = beta - step * dir;
      const double fc = penalized_nll(X, y, cand, lambda);
      if (fc <= f) {
        beta = cand;
        f = fc;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no descent direction left; report as-is
  }

  if (!model.converged) {
    const Eigen::VectorXd g = penalized_grad(X, y, beta, lambda);
    model.grad_norm = g.norm();
    model.converged = model.grad_norm <= tol;
  }
  model.beta = beta;
  return model;
}

Eigen::VectorXd predict_prob(const LearnerModel& model,
                             const Eigen::MatrixXd& X) {
  if (X.cols() != model.beta.size()) {
    throw ValidationError("predict_prob: column count does not match model");
  }
  if (model.degenerate) {
    return Eigen::VectorXd::Constant(X.rows(), model.constant_rate);
  }
  const Eigen::VectorXd eta = X * model.beta;
  Eigen::VectorXd p(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    p[i] = std::clamp(sigmoid(eta[i]), kRateClip, 1.0 - kRateClip);
  }
  return p;
}

}  // namespace fairaudit

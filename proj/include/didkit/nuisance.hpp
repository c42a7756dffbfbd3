#pragma once

#include <array>
#include <cstddef>

#include <Eigen/Dense>

namespace didkit {

/// Weighted least-squares working model for untreated outcome changes.
struct OutcomeModelFit {
  Eigen::VectorXd coefficients;  // intercept first when the design carries one
  std::size_t n_obs = 0;         // rows with positive weight
  double weighted_rss = 0.0;

  double fitted(const Eigen::RowVectorXd& x) const { return x.dot(coefficients); }
  Eigen::VectorXd fitted(const Eigen::MatrixXd& x) const { return x * coefficients; }
};

/// Minimizes sum_i w_i (y_i - x_i'b)^2 with a column-pivoted QR of the
/// sqrt(w)-scaled design. Throws RankDeficient naming the collinear column.
OutcomeModelFit fit_wls(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w);

struct LogitOptions {
  double tol = 1e-8;
  int max_iter = 100;
  int max_halvings = 30;
  double separation_norm = 1e3;
};

struct PropensityFit {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd fitted_scores;  // strictly inside (0, 1)
  bool converged = false;
  bool separation = false;
  int iterations = 0;
  /// Sup-norm of the weight-normalized score, (1/sum w) sum_i w_i (d_i - p_i) x_i.
  double gradient_norm = 0.0;
  double log_likelihood = 0.0;
};

/// Weighted logistic regression by IRLS from a zero start with step-halving.
/// Separation is reported through the returned fit rather than thrown.
PropensityFit fit_logit(const Eigen::MatrixXd& x, const Eigen::VectorXd& labels, const Eigen::VectorXd& w,
                        const LogitOptions& options = {});

double logit_log_likelihood(const Eigen::MatrixXd& x, const Eigen::VectorXd& labels, const Eigen::VectorXd& w,
                            const Eigen::VectorXd& beta);
/// Gradient of logit_log_likelihood with respect to beta (unnormalized).
Eigen::VectorXd logit_gradient(const Eigen::MatrixXd& x, const Eigen::VectorXd& labels, const Eigen::VectorXd& w,
                               const Eigen::VectorXd& beta);

/// Logistic function clamped to the open unit interval.
double logistic(double eta);

struct OverlapReport {
  static constexpr std::size_t kBins = 20;

  double min_treated = 0.0;
  double max_treated = 0.0;
  double min_comparison = 0.0;
  double max_comparison = 0.0;
  std::size_t n_treated = 0;
  std::size_t n_comparison = 0;
  double trim_threshold = 0.995;
  std::size_t comparison_above_threshold = 0;
  std::array<std::size_t, kBins> histogram_treated{};
  std::array<std::size_t, kBins> histogram_comparison{};
};

/// Summarizes fitted scores by arm (labels 1 = treated). Never modifies data.
OverlapReport overlap_report(const PropensityFit& fit, const Eigen::VectorXd& labels, double trim_threshold = 0.995);

}  // namespace didkit

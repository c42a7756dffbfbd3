#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace didkit::detail {

/// Weighted least squares of y on regressors after the exact two-way within
/// transformation (unit and period effects). Balanced panel, per-unit weights.
struct WithinFit {
  Eigen::VectorXd beta;
  Eigen::MatrixXd influence;  // n_units x p, scaled so cov = influence' influence / n^2
  Eigen::MatrixXd cov;        // cluster-robust (CR0)
  Eigen::VectorXd se;
};

/// Removes unit means and weighted period means from an n x T matrix.
Eigen::MatrixXd two_way_demean(const Eigen::MatrixXd& x, const Eigen::VectorXd& unit_weights);

WithinFit within_ols(const Eigen::MatrixXd& y, const std::vector<Eigen::MatrixXd>& regressors,
                     const std::vector<std::string>& names, const Eigen::VectorXd& unit_weights,
                     const std::vector<int>& clusters);

/// Cluster-summed covariance (1/n^2) sum_c s_c s_c' of an n x p influence matrix.
Eigen::MatrixXd cluster_covariance(const Eigen::MatrixXd& influence, const std::vector<int>& clusters);

}  // namespace didkit::detail

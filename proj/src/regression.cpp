#include "regression.hpp"

#include <algorithm>
#include <cmath>

#include "didkit/error.hpp"

namespace didkit::detail {

Eigen::MatrixXd two_way_demean(const Eigen::MatrixXd& x, const Eigen::VectorXd& unit_weights) {
  const Eigen::VectorXd unit_mean = x.rowwise().mean();
  const double total = unit_weights.sum();
  const Eigen::RowVectorXd period_mean = unit_weights.transpose() * x / total;
  const double grand = unit_weights.dot(unit_mean) / total;
  Eigen::MatrixXd out = x;
  out.colwise() -= unit_mean;
  out.rowwise() -= period_mean;
  out.array() += grand;
  return out;
}

Eigen::MatrixXd cluster_covariance(const Eigen::MatrixXd& influence, const std::vector<int>& clusters) {
  const Eigen::Index n = influence.rows();
  const int n_clusters = clusters.empty() ? 0 : *std::max_element(clusters.begin(), clusters.end()) + 1;
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(n_clusters, influence.cols());
  for (Eigen::Index i = 0; i < n; ++i) sums.row(clusters[static_cast<std::size_t>(i)]) += influence.row(i);
  return sums.transpose() * sums / (static_cast<double>(n) * static_cast<double>(n));
}

WithinFit within_ols(const Eigen::MatrixXd& y, const std::vector<Eigen::MatrixXd>& regressors,
                     const std::vector<std::string>& names, const Eigen::VectorXd& unit_weights,
                     const std::vector<int>& clusters) {
  const Eigen::Index n = y.rows();
  const Eigen::Index T = y.cols();
  const auto p = static_cast<Eigen::Index>(regressors.size());
  if (p == 0) throw Error(ErrorKind::InvalidArgument, "regression has no regressors");

  const Eigen::MatrixXd y_dm = two_way_demean(y, unit_weights);
  Eigen::MatrixXd x(n * T, p);
  Eigen::VectorXd yv(n * T);
  Eigen::VectorXd sw(n * T);
  std::vector<Eigen::MatrixXd> x_dm;
  x_dm.reserve(regressors.size());
  for (const auto& r : regressors) x_dm.push_back(two_way_demean(r, unit_weights));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = std::sqrt(unit_weights(i));
    for (Eigen::Index t = 0; t < T; ++t) {
      const Eigen::Index row = i * T + t;
      sw(row) = s;
      yv(row) = s * y_dm(i, t);
      for (Eigen::Index j = 0; j < p; ++j) x(row, j) = s * x_dm[static_cast<std::size_t>(j)](i, t);
    }
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < p) {
    const auto col = qr.colsPermutation().indices()(qr.rank());
    throw Error(ErrorKind::RankDeficient, "regressor '" + names[static_cast<std::size_t>(col)] +
                                              "' is collinear with the fixed effects or other regressors");
  }
  WithinFit fit;
  fit.beta = qr.solve(yv);
  const Eigen::VectorXd resid = yv - x * fit.beta;  // sqrt(w)-scaled
  const Eigen::MatrixXd xtx = x.transpose() * x;
  const Eigen::MatrixXd bread = xtx.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  fit.influence.resize(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd score = Eigen::VectorXd::Zero(p);
    for (Eigen::Index t = 0; t < T; ++t) {
      const Eigen::Index row = i * T + t;
      score += x.row(row).transpose() * resid(row);  // both carry sqrt(w)
    }
    fit.influence.row(i) = static_cast<double>(n) * (bread * score).transpose();
  }
  fit.cov = cluster_covariance(fit.influence, clusters);
  fit.se = fit.cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  return fit;
}

}  // namespace didkit::detail

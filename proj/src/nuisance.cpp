#include "didkit/nuisance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "didkit/error.hpp"

namespace didkit {

namespace {

// Rows with positive weight, scaled by sqrt(w).
struct WeightedSupport {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  std::vector<Eigen::Index> rows;
};

WeightedSupport positive_rows(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
  WeightedSupport s;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w(i) > 0.0) s.rows.push_back(i);
  }
  const auto m = static_cast<Eigen::Index>(s.rows.size());
  s.x.resize(m, x.cols());
  s.y.resize(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    const double sw = std::sqrt(w(s.rows[static_cast<std::size_t>(r)]));
    s.x.row(r) = sw * x.row(s.rows[static_cast<std::size_t>(r)]);
    s.y(r) = sw * y(s.rows[static_cast<std::size_t>(r)]);
  }
  return s;
}

void check_shapes(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
  if (x.rows() != y.size() || x.rows() != w.size()) {
    throw Error(ErrorKind::InvalidArgument, "design, response and weights differ in length");
  }
  if ((w.array() < 0.0).any() || !w.allFinite()) {
    throw Error(ErrorKind::InvalidArgument, "weights must be finite and nonnegative");
  }
}

void require_full_rank(const Eigen::ColPivHouseholderQR<Eigen::MatrixXd>& qr, Eigen::Index p) {
  if (qr.rank() < p) {
    const auto col = qr.colsPermutation().indices()(qr.rank());
    throw Error(ErrorKind::RankDeficient, "design column " + std::to_string(col) +
                                              " is collinear with the others on the weighted support (rank " +
                                              std::to_string(qr.rank()) + " of " + std::to_string(p) + ")");
  }
}

}  // namespace

OutcomeModelFit fit_wls(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
  check_shapes(x, y, w);
  auto s = positive_rows(x, y, w);
  if (s.rows.empty()) throw Error(ErrorKind::EmptySample, "no rows with positive weight");
  const Eigen::Index p = x.cols();
  if (static_cast<Eigen::Index>(s.rows.size()) < p) {
    throw Error(ErrorKind::RankDeficient, "only " + std::to_string(s.rows.size()) + " weighted rows for " +
                                              std::to_string(p) + " coefficients (column " +
                                              std::to_string(s.rows.size()) + " is unidentified)");
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(s.x);
  require_full_rank(qr, p);

  OutcomeModelFit fit;
  fit.coefficients = qr.solve(s.y);
  fit.n_obs = s.rows.size();
  fit.weighted_rss = (s.y - s.x * fit.coefficients).squaredNorm();
  return fit;
}

double logistic(double eta) {
  constexpr double lo = std::numeric_limits<double>::min();
  const double hi = std::nextafter(1.0, 0.0);
  const double p = eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
  return std::clamp(p, lo, hi);
}

double logit_log_likelihood(const Eigen::MatrixXd& x, const Eigen::VectorXd& labels, const Eigen::VectorXd& w,
                            const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = x * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    if (w(i) == 0.0) continue;
    // log(1 + e^eta) computed without overflow
    const double e = eta(i);
    const double softplus = e > 0.0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
    ll += w(i) * (labels(i) * e - softplus);
  }
  return ll;
}

Eigen::VectorXd logit_gradient(const Eigen::MatrixXd& x, const Eigen::VectorXd& labels, const Eigen::VectorXd& w,
                               const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = x * beta;
  Eigen::VectorXd r(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) r(i) = w(i) * (labels(i) - logistic(eta(i)));
  return x.transpose() * r;
}

PropensityFit fit_logit(const Eigen::MatrixXd& x, const Eigen::VectorXd& labels, const Eigen::VectorXd& w,
                        const LogitOptions& options) {
  check_shapes(x, labels, w);
  double w1 = 0.0, w0 = 0.0;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    if (labels(i) != 0.0 && labels(i) != 1.0) throw Error(ErrorKind::InvalidArgument, "labels must be 0 or 1");
    (labels(i) == 1.0 ? w1 : w0) += w(i);
  }
  if (!(w1 > 0.0) || !(w0 > 0.0)) {
    throw Error(ErrorKind::EmptyClass, std::string("label class ") + (w1 > 0.0 ? "0" : "1") +
                                           " has no positive weight");
  }
  const Eigen::Index p = x.cols();
  {
    auto s = positive_rows(x, labels, w);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(s.x);
    require_full_rank(qr, p);
  }

  // Work with mean-one weights; the optimum does not depend on the scale.
  const double total = w.sum();
  const Eigen::VectorXd wn = w * (static_cast<double>(w.size()) / total);
  const double score_scale = 1.0 / static_cast<double>(w.size());

  PropensityFit fit;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  double ll = logit_log_likelihood(x, labels, wn, beta);
  auto grad_norm = [&](const Eigen::VectorXd& b) {
    return (logit_gradient(x, labels, wn, b) * score_scale).lpNorm<Eigen::Infinity>();
  };

  double gnorm = grad_norm(beta);
  int iter = 0;
  bool polish = false;  // one extra Newton step once within tolerance
  for (; iter < options.max_iter; ++iter) {
    if (gnorm <= options.tol) {
      fit.converged = true;
      if (polish || iter == 0) break;
      polish = true;
    }
    if (beta.norm() > options.separation_norm) {
      fit.separation = true;
      break;
    }
    const Eigen::VectorXd eta = x * beta;
    Eigen::VectorXd hw(eta.size());
    Eigen::VectorXd r(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      const double pi = logistic(eta(i));
      hw(i) = wn(i) * pi * (1.0 - pi);
      r(i) = wn(i) * (labels(i) - pi);
    }
    const Eigen::MatrixXd hessian = x.transpose() * hw.asDiagonal() * x;
    const Eigen::VectorXd grad = x.transpose() * r;
    Eigen::VectorXd step;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hessian);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
      step = ldlt.solve(grad);
    } else {
      step = hessian.completeOrthogonalDecomposition().solve(grad);
    }

    bool accepted = false;
    double scale = 1.0;
    for (int h = 0; h <= options.max_halvings; ++h, scale *= 0.5) {
      const Eigen::VectorXd trial = beta + scale * step;
      const double trial_ll = logit_log_likelihood(x, labels, wn, trial);
      if (std::isfinite(trial_ll) && trial_ll >= ll - 1e-12 * std::fabs(ll)) {
        beta = trial;
        ll = trial_ll;
        accepted = true;
        break;
      }
    }
    gnorm = grad_norm(beta);
    if (polish) {
      fit.converged = gnorm <= options.tol;
      ++iter;
      break;
    }
    if (!accepted) {
      ++iter;
      break;
    }
  }
  if (!fit.converged && gnorm <= options.tol) fit.converged = true;

  fit.coefficients = beta;
  fit.iterations = iter;
  fit.gradient_norm = gnorm;
  fit.fitted_scores.resize(x.rows());
  const Eigen::VectorXd eta = x * beta;
  bool saturated = false;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    fit.fitted_scores(i) = logistic(eta(i));
    if (w(i) > 0.0 && (fit.fitted_scores(i) < 1e-10 || fit.fitted_scores(i) > 1.0 - 1e-10)) saturated = true;
  }
  // Perfect or quasi-perfect separation shows up either as diverging
  // coefficients or as fitted probabilities that are numerically 0 or 1.
  if (beta.norm() > options.separation_norm || saturated) fit.separation = true;
  if (fit.separation) fit.converged = false;
  fit.log_likelihood = logit_log_likelihood(x, labels, w, beta);
  return fit;
}

OverlapReport overlap_report(const PropensityFit& fit, const Eigen::VectorXd& labels, double trim_threshold) {
  if (labels.size() != fit.fitted_scores.size()) {
    throw Error(ErrorKind::InvalidArgument, "labels are not aligned with the fitted scores");
  }
  OverlapReport rep;
  rep.trim_threshold = trim_threshold;
  rep.min_treated = rep.min_comparison = std::numeric_limits<double>::infinity();
  rep.max_treated = rep.max_comparison = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    const double s = fit.fitted_scores(i);
    auto bin = static_cast<std::size_t>(std::floor(s * OverlapReport::kBins));
    bin = std::min(bin, OverlapReport::kBins - 1);
    if (labels(i) == 1.0) {
      ++rep.n_treated;
      rep.min_treated = std::min(rep.min_treated, s);
      rep.max_treated = std::max(rep.max_treated, s);
      ++rep.histogram_treated[bin];
    } else {
      ++rep.n_comparison;
      rep.min_comparison = std::min(rep.min_comparison, s);
      rep.max_comparison = std::max(rep.max_comparison, s);
      ++rep.histogram_comparison[bin];
      if (s > trim_threshold) ++rep.comparison_above_threshold;
    }
  }
  return rep;
}

}  // namespace didkit

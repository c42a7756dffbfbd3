#include "didkit/inference.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "didkit/error.hpp"
#include "parallel.hpp"
#include "regression.hpp"

namespace didkit {

namespace {

double z_critical(double level) {
  boost::math::normal_distribution<> z;
  return boost::math::quantile(z, 0.5 + level / 2.0);
}

std::size_t count_clusters(const std::vector<int>& ids) {
  return std::set<int>(ids.begin(), ids.end()).size();
}

// Dense 0..C-1 recoding; input ids may be arbitrary integers.
std::vector<int> dense_codes(const std::vector<int>& ids) {
  std::vector<int> sorted = ids;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<int> out(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out[i] = static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), ids[i]) - sorted.begin());
  }
  return out;
}

// type-7 sample quantile
double quantile7(std::vector<double> x, double q) {
  std::sort(x.begin(), x.end());
  const double h = (static_cast<double>(x.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= x.size()) return x.back();
  return x[lo] + (h - static_cast<double>(lo)) * (x[lo + 1] - x[lo]);
}

}  // namespace

std::string_view to_string(MultiplierKind k) { return k == MultiplierKind::mammen ? "mammen" : "rademacher"; }

std::optional<MultiplierKind> parse_multiplier(std::string_view name) {
  if (name == "rademacher") return MultiplierKind::rademacher;
  if (name == "mammen") return MultiplierKind::mammen;
  return std::nullopt;
}

ClusteredCovariance clustered_se(const Eigen::MatrixXd& influence, const std::vector<int>& cluster_ids) {
  if (influence.cols() < 1) throw Error(ErrorKind::InvalidArgument, "influence matrix has no columns");
  if (cluster_ids.size() != static_cast<std::size_t>(influence.rows())) {
    throw Error(ErrorKind::InvalidArgument, "cluster ids are not aligned with influence rows");
  }
  ClusteredCovariance out;
  out.n_clusters = count_clusters(cluster_ids);
  if (out.n_clusters < 2) throw Error(ErrorKind::SingleCluster, "clustered covariance needs at least two clusters");
  out.covariance = detail::cluster_covariance(influence, dense_codes(cluster_ids));
  out.se = out.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  return out;
}

BandResult sup_t_band(const Eigen::MatrixXd& influence, const Eigen::VectorXd& estimates,
                      const std::vector<int>& cluster_ids, const BandOptions& options) {
  if (!(options.level > 0.0 && options.level < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "band level must lie in (0, 1)");
  }
  if (options.draws < 199) throw Error(ErrorKind::InvalidArgument, "at least 199 bootstrap draws are required");
  if (estimates.size() != influence.cols()) {
    throw Error(ErrorKind::InvalidArgument, "estimates are not aligned with influence columns");
  }
  const auto cov = clustered_se(influence, cluster_ids);
  const std::vector<int> codes = dense_codes(cluster_ids);
  const auto n = static_cast<double>(influence.rows());
  const auto C = static_cast<Eigen::Index>(cov.n_clusters);
  const Eigen::Index p = influence.cols();

  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(C, p);
  for (Eigen::Index i = 0; i < influence.rows(); ++i) sums.row(codes[static_cast<std::size_t>(i)]) += influence.row(i);

  BandResult out;
  out.level = options.level;
  out.draws = options.draws;
  out.multiplier = options.multiplier;
  out.seed = options.seed;
  out.estimates = estimates;
  out.se = cov.se;
  out.pointwise_critical_value = z_critical(options.level);

  std::vector<Eigen::Index> active;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (out.se(j) > 0.0) {
      active.push_back(j);
    } else {
      out.degenerate.push_back(static_cast<std::size_t>(j));
    }
  }
  if (active.empty()) throw Error(ErrorKind::DegenerateSE, "every coordinate has a zero standard error");

  const double sqrt5 = std::sqrt(5.0);
  const double mammen_lo = (1.0 - sqrt5) / 2.0;
  const double mammen_hi = (1.0 + sqrt5) / 2.0;
  const double mammen_p = (sqrt5 + 1.0) / (2.0 * sqrt5);

  std::vector<double> maxima(static_cast<std::size_t>(options.draws));
  detail::parallel_for(maxima.size(), options.threads, [&](std::size_t b) {
    std::seed_seq seq{static_cast<std::uint32_t>(options.seed), static_cast<std::uint32_t>(options.seed >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    std::mt19937_64 gen(seq);
    Eigen::VectorXd v(C);
    for (Eigen::Index c = 0; c < C; ++c) {
      const std::uint64_t r = gen();
      if (options.multiplier == MultiplierKind::rademacher) {
        v(c) = (r >> 63) ? 1.0 : -1.0;
      } else {
        const double u = static_cast<double>(r >> 11) * 0x1.0p-53;
        v(c) = u < mammen_p ? mammen_lo : mammen_hi;
      }
    }
    const Eigen::RowVectorXd perturbed = v.transpose() * sums / n;
    double m = 0.0;
    for (auto j : active) m = std::max(m, std::fabs(perturbed(j)) / out.se(j));
    maxima[b] = m;
  });

  out.critical_value = std::max(quantile7(maxima, options.level), out.pointwise_critical_value);
  out.lower = estimates - out.critical_value * out.se;
  out.upper = estimates + out.critical_value * out.se;
  return out;
}

BandResult attach_band(EventStudyCurve& curve, const BandOptions& options) {
  if (curve.points.empty()) throw Error(ErrorKind::InvalidArgument, "curve has no points");
  const auto n = curve.points.front().influence.size();
  const auto p = static_cast<Eigen::Index>(curve.points.size());
  Eigen::MatrixXd inf(n, p);
  Eigen::VectorXd est(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    inf.col(j) = curve.points[static_cast<std::size_t>(j)].influence;
    est(j) = curve.points[static_cast<std::size_t>(j)].estimate;
  }
  std::vector<int> clusters = curve.cluster_codes;
  if (clusters.size() != static_cast<std::size_t>(n)) {
    clusters.resize(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < clusters.size(); ++i) clusters[i] = static_cast<int>(i);
  }
  auto opts = options;
  opts.level = curve.level;
  BandResult band = sup_t_band(inf, est, clusters, opts);
  BandInfo info;
  info.critical_value = band.critical_value;
  info.pointwise_critical_value = band.pointwise_critical_value;
  info.draws = band.draws;
  info.seed = band.seed;
  info.multiplier = std::string(to_string(band.multiplier));
  for (Eigen::Index j = 0; j < p; ++j) {
    auto& pt = curve.points[static_cast<std::size_t>(j)];
    pt.simultaneous = Interval{pt.estimate - band.critical_value * pt.se, pt.estimate + band.critical_value * pt.se};
  }
  for (auto j : band.degenerate) info.degenerate_event_times.push_back(curve.points[j].e);
  curve.band = info;
  return band;
}

PretrendTest pretrend_joint_test(const GroupTimeTable& table) {
  std::vector<const GroupTimeEffect*> pre;
  for (const auto& c : table.cells) {
    if (c.is_pretrend()) pre.push_back(&c);
  }
  if (pre.empty()) throw Error(ErrorKind::NoPretrends, "table has no pre-treatment cells");
  const auto p = static_cast<Eigen::Index>(pre.size());
  const auto n = static_cast<Eigen::Index>(table.n_units);
  Eigen::MatrixXd inf(n, p);
  Eigen::VectorXd tau(p);
  PretrendTest out;
  for (Eigen::Index j = 0; j < p; ++j) {
    inf.col(j) = pre[static_cast<std::size_t>(j)]->effect.influence;
    tau(j) = pre[static_cast<std::size_t>(j)]->effect.estimate;
    out.cells.emplace_back(pre[static_cast<std::size_t>(j)]->g, pre[static_cast<std::size_t>(j)]->t);
  }
  std::vector<int> clusters = table.cluster_codes;
  if (clusters.size() != static_cast<std::size_t>(n)) {
    clusters.resize(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < clusters.size(); ++i) clusters[i] = static_cast<int>(i);
  }
  const Eigen::MatrixXd V = detail::cluster_covariance(inf, dense_codes(clusters));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(V);
  const Eigen::VectorXd ev = eig.eigenvalues();
  const double tol = std::max(ev.cwiseAbs().maxCoeff(), 0.0) * static_cast<double>(p) * 1e-12;
  Eigen::VectorXd inv_ev = Eigen::VectorXd::Zero(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    if (ev(j) > tol) {
      inv_ev(j) = 1.0 / ev(j);
      ++out.rank;
    }
  }
  if (out.rank == 0) {
    if (tau.isZero(0.0)) {
      out.dof = static_cast<int>(p);
      return out;
    }
    throw Error(ErrorKind::SingularCovariance, "pre-trend covariance is zero");
  }
  out.pseudo_inverse = out.rank < p;
  const Eigen::VectorXd proj = eig.eigenvectors().transpose() * tau;
  out.statistic = proj.cwiseProduct(inv_ev).dot(proj);
  out.dof = out.rank;
  boost::math::chi_squared_distribution<> chi(out.dof);
  out.p_value = boost::math::cdf(boost::math::complement(chi, out.statistic));
  return out;
}

std::string_view to_string(SensitivityBenchmark b) {
  return b == SensitivityBenchmark::absolute ? "absolute" : "max_pre_step";
}

std::optional<SensitivityBenchmark> parse_benchmark(std::string_view name) {
  if (name == "max_pre_step") return SensitivityBenchmark::max_pre_step;
  if (name == "absolute") return SensitivityBenchmark::absolute;
  return std::nullopt;
}

SensitivityResult sensitivity_bounds(const EventStudyCurve& curve, const SensitivityOptions& options) {
  if (options.target_e < 0) throw Error(ErrorKind::InvalidArgument, "target event time must be >= 0");
  if (!(options.mbar >= 0.0) || !std::isfinite(options.mbar)) {
    throw Error(ErrorKind::InvalidArgument, "mbar must be finite and nonnegative");
  }
  if (!(options.level > 0.0 && options.level < 1.0)) throw Error(ErrorKind::InvalidArgument, "level must lie in (0, 1)");
  const auto* target = curve.at(options.target_e);
  if (!target) {
    throw Error(ErrorKind::InvalidArgument, "curve has no estimate at event time " + std::to_string(options.target_e));
  }
  SensitivityResult out;
  out.target_e = options.target_e;
  out.mbar = options.mbar;
  out.benchmark = options.benchmark;
  out.level = options.level;
  out.cumulate = options.cumulate;
  out.estimate = target->estimate;
  out.se = target->se;

  // steps between adjacent pre-periods, with the base period pinned at zero
  auto tau = [&](int e) -> std::optional<double> {
    if (e == -1) return 0.0;
    const auto* p = curve.at(e);
    return p ? std::optional<double>(p->estimate) : std::nullopt;
  };
  int lowest = -1;
  for (const auto& p : curve.points) lowest = std::min(lowest, p.e);
  for (int e = -2; e >= lowest; --e) {
    const auto a = tau(e);
    const auto b = tau(e + 1);
    if (a && b) out.max_pre_step = std::max(out.max_pre_step.value_or(0.0), std::fabs(*a - *b));
  }

  if (options.benchmark == SensitivityBenchmark::max_pre_step) {
    if (!out.max_pre_step) throw Error(ErrorKind::NoPretrends, "no adjacent pre-period step can be formed");
    out.violation = options.mbar * *out.max_pre_step;
  } else {
    out.violation = options.mbar;
  }
  if (options.cumulate) out.violation *= static_cast<double>(options.target_e + 1);

  const double z = z_critical(options.level);
  out.identified = {out.estimate - out.violation, out.estimate + out.violation};
  out.robust_ci = {out.identified.lower - z * out.se, out.identified.upper + z * out.se};
  return out;
}

}  // namespace didkit

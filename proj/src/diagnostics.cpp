#include "didkit/diagnostics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "didkit/error.hpp"
#include "didkit/staggered.hpp"
#include "regression.hpp"

namespace didkit {

double normalized_difference(double mean_t, double mean_c, double var_t, double var_c) {
  const double scale = std::sqrt((var_t + var_c) / 2.0);
  const double gap = mean_t - mean_c;
  if (scale == 0.0) {
    if (gap == 0.0) return 0.0;
    return gap > 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
  }
  return gap / scale;
}

namespace {

struct Moments {
  double mean = 0.0;
  double var = 0.0;
};

// frequency-weight moments: var = sum w (x - m)^2 / (sum w - 1)
Moments moments(const std::vector<double>& x, const std::vector<double>& w) {
  double sw = 0.0, sx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw += w[i];
    sx += w[i] * x[i];
  }
  Moments m;
  m.mean = sx / sw;
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) ss += w[i] * (x[i] - m.mean) * (x[i] - m.mean);
  m.var = sw > 1.0 ? ss / (sw - 1.0) : 0.0;
  return m;
}

std::size_t require_period(const PanelDataset& data, int label) {
  const auto idx = data.period_index(label);
  if (!idx) throw Error(ErrorKind::InvalidArgument, "period " + std::to_string(label) + " is not in the panel");
  return *idx;
}

Eigen::MatrixXd outcome_matrix(const PanelDataset& data) {
  Eigen::MatrixXd y(static_cast<Eigen::Index>(data.n_units()), static_cast<Eigen::Index>(data.n_periods()));
  for (std::size_t i = 0; i < data.n_units(); ++i) y.row(static_cast<Eigen::Index>(i)) = data.unit(i).outcomes.transpose();
  return y;
}

}  // namespace

BalanceTable balance_table(const PanelDataset& data, int pre, int post, bool weighted) {
  if (data.n_covariates() == 0) throw Error(ErrorKind::InvalidArgument, "panel has no covariates");
  const auto a = require_period(data, pre);
  const auto b = require_period(data, post);
  BalanceTable out;
  out.pre = pre;
  out.post = post;
  out.weighted = weighted;
  std::vector<std::size_t> treated, comparison;
  for (std::size_t i = 0; i < data.n_units(); ++i) (data.group_index(i) ? treated : comparison).push_back(i);
  if (treated.empty() || comparison.empty()) {
    throw Error(ErrorKind::EmptyArm, std::string(treated.empty() ? "treated" : "comparison") + " arm is empty");
  }
  out.n_treated = treated.size();
  out.n_comparison = comparison.size();

  auto row_for = [&](std::size_t k, BalanceKind kind) {
    auto collect = [&](const std::vector<std::size_t>& arm, std::vector<double>& x, std::vector<double>& w) {
      for (auto i : arm) {
        const auto& c = data.unit(i).covariates;
        const double lv = c(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(k));
        x.push_back(kind == BalanceKind::level ? lv : c(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(k)) - lv);
        w.push_back(weighted ? data.weight(i) : 1.0);
      }
    };
    std::vector<double> xt, wt, xc, wc;
    collect(treated, xt, wt);
    collect(comparison, xc, wc);
    const auto mt = moments(xt, wt);
    const auto mc = moments(xc, wc);
    BalanceRow r;
    r.variable = data.covariate_names()[k];
    r.kind = kind;
    r.mean_treated = mt.mean;
    r.mean_comparison = mc.mean;
    r.var_treated = mt.var;
    r.var_comparison = mc.var;
    r.zero_variance = mt.var == 0.0 && mc.var == 0.0;
    r.normalized_difference = normalized_difference(mt.mean, mc.mean, mt.var, mc.var);
    return r;
  };
  for (std::size_t k = 0; k < data.n_covariates(); ++k) out.rows.push_back(row_for(k, BalanceKind::level));
  for (std::size_t k = 0; k < data.n_covariates(); ++k) out.rows.push_back(row_for(k, BalanceKind::difference));
  return out;
}

std::string balance_markdown(const BalanceTable& table) {
  std::ostringstream os;
  char buf[256];
  os << "| variable | kind | treated | comparison | norm. diff |\n";
  os << "|---|---|---:|---:|---:|\n";
  for (const auto& r : table.rows) {
    std::snprintf(buf, sizeof buf, "| %s | %s | %.2f | %.2f | %.2f%s |\n", r.variable.c_str(),
                  r.kind == BalanceKind::level ? "level" : "change", r.mean_treated, r.mean_comparison,
                  r.normalized_difference, std::fabs(r.normalized_difference) > 0.25 ? " *" : "");
    os << buf;
  }
  os << "\n" << (table.weighted ? "Weighted" : "Unweighted") << "; levels at period " << table.pre
     << ", changes " << table.pre << " to " << table.post << ". * |ND| > 0.25.\n";
  return os.str();
}

std::string_view to_string(TwfeSpec s) {
  switch (s) {
    case TwfeSpec::static_effect: return "static";
    case TwfeSpec::dynamic_2xT: return "dynamic_2xT";
    case TwfeSpec::saturated_SA: return "saturated_SA";
  }
  return "static";
}

std::optional<TwfeSpec> parse_twfe_spec(std::string_view name) {
  if (name == "static") return TwfeSpec::static_effect;
  if (name == "dynamic_2xT" || name == "dynamic") return TwfeSpec::dynamic_2xT;
  if (name == "saturated_SA" || name == "saturated") return TwfeSpec::saturated_SA;
  return std::nullopt;
}

TwfeFit twfe_fit(const PanelDataset& data, TwfeSpec spec, bool weighted) {
  TwfeFit out;
  out.spec = spec;
  out.n_units = data.n_units();
  out.n_periods = data.n_periods();
  out.weighted = weighted;
  if (spec == TwfeSpec::saturated_SA) {
    const auto table = sun_abraham_fit(data, weighted);
    out.coefficients.resize(static_cast<Eigen::Index>(table.cells.size()));
    out.se.resize(out.coefficients.size());
    for (std::size_t k = 0; k < table.cells.size(); ++k) {
      const auto& c = table.cells[k];
      out.names.push_back("g=" + std::to_string(c.g) + ",e=" + std::to_string(c.event_time));
      out.coefficients(static_cast<Eigen::Index>(k)) = c.effect.estimate;
      out.se(static_cast<Eigen::Index>(k)) = c.effect.se;
    }
    return out;
  }

  const auto n = static_cast<Eigen::Index>(data.n_units());
  const auto T = static_cast<Eigen::Index>(data.n_periods());
  const Eigen::MatrixXd y = outcome_matrix(data);
  const Eigen::VectorXd w = weighted ? data.weights() : Eigen::VectorXd::Ones(n);
  std::vector<Eigen::MatrixXd> regs;

  if (spec == TwfeSpec::static_effect) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, T);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto gi = data.group_index(static_cast<std::size_t>(i));
      if (!gi) continue;
      for (auto t = static_cast<Eigen::Index>(*gi); t < T; ++t) d(i, t) = 1.0;
    }
    regs.push_back(std::move(d));
    out.names.push_back("D");
  } else {
    const auto cohorts = data.cohort_indices();
    if (cohorts.size() != 1) {
      throw Error(ErrorKind::WrongShape, "dynamic specification needs exactly one treated cohort, found " +
                                             std::to_string(cohorts.size()));
    }
    const std::size_t g = cohorts.front();
    if (g == 0) throw Error(ErrorKind::WrongShape, "the treated cohort has no pre-period");
    for (Eigen::Index t = 0; t < T; ++t) {
      if (static_cast<std::size_t>(t) + 1 == g) continue;
      Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, T);
      for (Eigen::Index i = 0; i < n; ++i) {
        if (data.group_index(static_cast<std::size_t>(i)) == g) d(i, t) = 1.0;
      }
      regs.push_back(std::move(d));
      out.names.push_back("t=" + std::to_string(data.periods()[static_cast<std::size_t>(t)]));
    }
  }
  const auto fit = detail::within_ols(y, regs, out.names, w, data.cluster_codes());
  out.coefficients = fit.beta;
  out.se = fit.se;
  return out;
}

LongDifferenceFit long_difference_fit(const PanelDataset& data, bool weighted) {
  if (data.n_periods() != 2) throw Error(ErrorKind::WrongShape, "long-difference regression needs exactly two periods");
  const auto n = static_cast<Eigen::Index>(data.n_units());
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd dy(n), w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    const auto gi = data.group_index(u);
    if (gi && *gi == 0) throw Error(ErrorKind::WrongShape, "a unit is treated in the first period");
    x(i, 0) = 1.0;
    x(i, 1) = gi ? 1.0 : 0.0;
    dy(i) = data.outcome(u, 1) - data.outcome(u, 0);
    w(i) = weighted ? data.weight(u) : 1.0;
  }
  const auto fit = fit_wls(x, dy, w);
  const Eigen::VectorXd resid = dy - x * fit.coefficients;
  const Eigen::MatrixXd bread = (x.transpose() * w.asDiagonal() * x).inverse();
  Eigen::VectorXd inf(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    inf(i) = static_cast<double>(n) * (bread * x.row(i).transpose())(1) * w(i) * resid(i);
  }
  const Eigen::MatrixXd cov = detail::cluster_covariance(inf, data.cluster_codes());
  LongDifferenceFit out;
  out.intercept = fit.coefficients(0);
  out.coefficient = fit.coefficients(1);
  out.se = std::sqrt(std::max(0.0, cov(0, 0)));
  return out;
}

BaconDecomposition bacon_two_period(const PanelDataset& data, bool weighted) {
  if (data.n_periods() != 2) {
    throw Error(ErrorKind::WrongShape, "decomposition needs exactly two periods, found " +
                                           std::to_string(data.n_periods()));
  }
  // group 0: treated from period 1, group 1: from period 2, group 2: never
  double mass[3] = {0, 0, 0};
  double change[3] = {0, 0, 0};
  for (std::size_t i = 0; i < data.n_units(); ++i) {
    const auto gi = data.group_index(i);
    const int k = gi ? static_cast<int>(*gi) : 2;
    const double w = weighted ? data.weight(i) : 1.0;
    mass[k] += w;
    change[k] += w * (data.outcome(i, 1) - data.outcome(i, 0));
  }
  const char* names[3] = {"first-period", "second-period", "never-treated"};
  for (int k = 0; k < 3; ++k) {
    if (!(mass[k] > 0.0)) throw Error(ErrorKind::WrongShape, std::string(names[k]) + " group is empty");
    change[k] /= mass[k];
  }
  const double total = mass[0] + mass[1] + mass[2];
  BaconDecomposition out;
  out.weighted = weighted;
  out.share_early = mass[0] / total;
  out.share_late = mass[1] / total;
  out.share_never = mass[2] / total;
  out.w1 = out.share_early / (out.share_early + out.share_never);

  const double late_vs_never = change[1] - change[2];
  const double late_vs_early = change[1] - change[0];
  const double early_vs_never = change[0] - change[2];
  out.comparisons = {{"late_vs_never", late_vs_never, 1.0 - out.w1}, {"late_vs_early", late_vs_early, out.w1}};
  out.components = {{"att_2_2", late_vs_never, 1.0}, {"att_1_2_minus_att_1_1", early_vs_never, -out.w1}};
  out.beta = (1.0 - out.w1) * late_vs_never + out.w1 * late_vs_early;
  return out;
}

}  // namespace didkit

#include "didkit/staggered.hpp"

#include <algorithm>
#include <map>
#include <string>

#include "parallel.hpp"
#include "regression.hpp"

namespace didkit {

std::string_view to_string(ParallelTrends a) {
  switch (a) {
    case ParallelTrends::never: return "never";
    case ParallelTrends::not_yet: return "not_yet";
    case ParallelTrends::all_periods: return "all_periods";
  }
  return "never";
}

std::string_view to_string(ComparisonTag c) {
  switch (c) {
    case ComparisonTag::never: return "never";
    case ComparisonTag::not_yet: return "not_yet";
    case ComparisonTag::pooled_pre: return "pooled_pre";
  }
  return "never";
}

std::optional<ParallelTrends> parse_parallel_trends(std::string_view name) {
  if (name == "never") return ParallelTrends::never;
  if (name == "not_yet") return ParallelTrends::not_yet;
  if (name == "all_periods") return ParallelTrends::all_periods;
  return std::nullopt;
}

const GroupTimeEffect* GroupTimeTable::find(int g, int t) const {
  for (const auto& c : cells) {
    if (c.g == g && c.t == t) return &c;
  }
  return nullptr;
}

const CohortSize* GroupTimeTable::cohort(int g) const {
  for (const auto& c : cohorts) {
    if (c.g == g) return &c;
  }
  return nullptr;
}

std::vector<std::size_t> comparison_units(const PanelDataset& data, ParallelTrends assumption, std::size_t g_index,
                                          std::size_t t_index) {
  std::vector<std::size_t> out;
  const std::size_t horizon = std::max(g_index, t_index);
  for (std::size_t i = 0; i < data.n_units(); ++i) {
    const auto gi = data.group_index(i);
    if (!gi) {
      out.push_back(i);
    } else if (assumption != ParallelTrends::never && *gi > horizon) {
      out.push_back(i);
    }
  }
  return out;
}

namespace {

struct CellJob {
  std::size_t g_index;
  std::size_t t_index;
};

// Within-cluster se when units share clusters, otherwise the plain influence se.
double cell_se(const Eigen::VectorXd& influence, const PanelDataset& data) {
  if (data.n_clusters() == data.n_units()) return influence_se(influence);
  const Eigen::MatrixXd cov = detail::cluster_covariance(influence, data.cluster_codes());
  return std::sqrt(std::max(0.0, cov(0, 0)));
}

std::vector<CohortSize> cohort_sizes(const PanelDataset& data) {
  std::vector<CohortSize> out;
  for (auto gi : data.cohort_indices()) {
    CohortSize c;
    c.g = data.periods()[gi];
    c.g_index = gi;
    for (std::size_t i = 0; i < data.n_units(); ++i) {
      if (data.group_index(i) == gi) {
        ++c.units;
        c.weight += data.weight(i);
      }
    }
    out.push_back(c);
  }
  return out;
}

}  // namespace

GroupTimeTable att_gt(const PanelDataset& data, const AttGtSettings& settings) {
  if (settings.estimator != EstimatorKind::means && data.n_covariates() == 0) {
    throw Error(ErrorKind::InvalidArgument,
                std::string("estimator '") + std::string(to_string(settings.estimator)) + "' needs covariates");
  }
  if (settings.assumption == ParallelTrends::all_periods && settings.estimator != EstimatorKind::means) {
    throw Error(ErrorKind::InvalidArgument, "the pooled pre-period baseline is only available with estimator 'means'");
  }

  GroupTimeTable table;
  table.periods = data.periods();
  table.n_units = data.n_units();
  table.cluster_codes = data.cluster_codes();
  table.assumption = settings.assumption;
  table.estimator = settings.estimator;
  table.base_period = settings.assumption == ParallelTrends::all_periods ? "pooled_pre" : "universal";
  table.include_pretrends = settings.include_pretrends && settings.assumption != ParallelTrends::all_periods;
  table.cohorts = cohort_sizes(data);
  if (settings.timing == CovariateTiming::pre_and_post) {
    table.warnings.push_back(
        "post-period covariates enter the working models; they can be affected by treatment and bias the estimates");
  }

  const std::size_t T = data.n_periods();
  std::vector<CellJob> jobs;
  for (auto gi : data.cohort_indices()) {
    if (gi == 0) continue;  // no pre-period; normalize_groups drops these
    for (std::size_t t = 0; t < T; ++t) {
      if (t + 1 == gi) continue;  // base period itself
      if (t + 1 < gi && !table.include_pretrends) continue;
      jobs.push_back({gi, t});
    }
  }

  const ComparisonTag tag = settings.assumption == ParallelTrends::never     ? ComparisonTag::never
                            : settings.assumption == ParallelTrends::not_yet ? ComparisonTag::not_yet
                                                                             : ComparisonTag::pooled_pre;

  std::vector<std::optional<GroupTimeEffect>> done(jobs.size());
  std::vector<std::optional<SkippedCell>> skipped(jobs.size());

  detail::parallel_for(jobs.size(), settings.threads, [&](std::size_t j) {
    const auto [gi, ti] = jobs[j];
    const int g = data.periods()[gi];
    const int t = data.periods()[ti];
    const int e = static_cast<int>(ti) - static_cast<int>(gi);
    std::vector<std::size_t> treated;
    for (std::size_t i = 0; i < data.n_units(); ++i) {
      if (data.group_index(i) == gi) treated.push_back(i);
    }
    const auto comparison = comparison_units(data, settings.assumption, gi, ti);
    if (comparison.empty()) {
      skipped[j] = SkippedCell{g, t, e, ErrorKind::NoComparison, "no comparison units for this cell"};
      return;
    }
    try {
      TwoByTwoFrame frame = TwoByTwoFrame::from_panel(data, treated, comparison, gi - 1, ti, settings.timing);
      if (settings.assumption == ParallelTrends::all_periods) {
        for (std::size_t r = 0; r < frame.rows(); ++r) {
          const auto& y = data.unit(frame.units[r]).outcomes;
          const double base = y.head(static_cast<Eigen::Index>(gi)).mean();
          frame.delta_y(static_cast<Eigen::Index>(r)) = y(static_cast<Eigen::Index>(ti)) - base;
        }
      }
      GroupTimeEffect cell;
      cell.g = g;
      cell.t = t;
      cell.g_index = gi;
      cell.t_index = ti;
      cell.event_time = e;
      cell.comparison = tag;
      cell.effect = estimate_att(frame, settings.estimator, settings.designs);
      cell.effect.se = cell_se(cell.effect.influence, data);
      done[j] = std::move(cell);
    } catch (const Error& err) {
      skipped[j] = SkippedCell{g, t, e, err.kind(), err.what()};
    }
  });

  for (std::size_t j = 0; j < jobs.size(); ++j) {
    if (done[j]) table.cells.push_back(std::move(*done[j]));
    if (skipped[j]) table.skipped.push_back(std::move(*skipped[j]));
  }
  return table;
}

GroupTimeTable sun_abraham_fit(const PanelDataset& data, bool weighted) {
  if (!data.has_never_treated()) {
    throw Error(ErrorKind::NoComparisonPossible, "the saturated regression needs never-treated units");
  }
  const auto n = static_cast<Eigen::Index>(data.n_units());
  const auto T = static_cast<Eigen::Index>(data.n_periods());
  Eigen::MatrixXd y(n, T);
  for (Eigen::Index i = 0; i < n; ++i) y.row(i) = data.unit(static_cast<std::size_t>(i)).outcomes.transpose();
  const Eigen::VectorXd w = weighted ? data.weights() : Eigen::VectorXd::Ones(n);

  std::vector<Eigen::MatrixXd> dummies;
  std::vector<std::string> names;
  std::vector<CellJob> slots;
  for (auto gi : data.cohort_indices()) {
    if (gi == 0) continue;
    for (std::size_t t = 0; t < data.n_periods(); ++t) {
      if (t + 1 == gi) continue;
      Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, T);
      for (Eigen::Index i = 0; i < n; ++i) {
        if (data.group_index(static_cast<std::size_t>(i)) == gi) d(i, static_cast<Eigen::Index>(t)) = 1.0;
      }
      dummies.push_back(std::move(d));
      names.push_back("g=" + std::to_string(data.periods()[gi]) + ",e=" +
                      std::to_string(static_cast<int>(t) - static_cast<int>(gi)));
      slots.push_back({gi, t});
    }
  }
  if (dummies.empty()) throw Error(ErrorKind::NoComparisonPossible, "no treated cohort with a pre-period");

  const auto fit = detail::within_ols(y, dummies, names, w, data.cluster_codes());

  GroupTimeTable table;
  table.periods = data.periods();
  table.n_units = data.n_units();
  table.cluster_codes = data.cluster_codes();
  table.assumption = ParallelTrends::never;
  table.estimator = EstimatorKind::means;
  table.include_pretrends = true;
  table.cohorts = cohort_sizes(data);
  std::size_t n_never = 0;
  for (std::size_t i = 0; i < data.n_units(); ++i) n_never += data.group_index(i) ? 0 : 1;
  for (std::size_t k = 0; k < slots.size(); ++k) {
    const auto [gi, ti] = slots[k];
    GroupTimeEffect cell;
    cell.g = data.periods()[gi];
    cell.t = data.periods()[ti];
    cell.g_index = gi;
    cell.t_index = ti;
    cell.event_time = static_cast<int>(ti) - static_cast<int>(gi);
    cell.comparison = ComparisonTag::never;
    cell.effect.estimate = fit.beta(static_cast<Eigen::Index>(k));
    cell.effect.influence = fit.influence.col(static_cast<Eigen::Index>(k));
    cell.effect.se = fit.se(static_cast<Eigen::Index>(k));
    cell.effect.estimator = EstimatorKind::means;
    const auto* c = table.cohort(cell.g);
    cell.effect.n_treated = c ? c->units : 0;
    cell.effect.n_comparison = n_never;
    table.cells.push_back(std::move(cell));
  }
  return table;
}

}  // namespace didkit

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "didkit/did2x2.hpp"
#include "didkit/error.hpp"
#include "didkit/panel.hpp"

namespace didkit {

/// Which parallel-trends regime selects the comparison units of each cell.
enum class ParallelTrends {
  never,        // G = never
  not_yet,      // G > max(g, t), never-treated included
  all_periods,  // not-yet comparison, baseline = mean of all pre-g periods
};

enum class ComparisonTag { never, not_yet, pooled_pre };

std::string_view to_string(ParallelTrends a);
std::string_view to_string(ComparisonTag c);
std::optional<ParallelTrends> parse_parallel_trends(std::string_view name);

struct GroupTimeEffect {
  int g = 0;  // cohort period label
  int t = 0;  // period label
  std::size_t g_index = 0;
  std::size_t t_index = 0;
  int event_time = 0;  // t_index - g_index
  ComparisonTag comparison = ComparisonTag::never;
  EffectEstimate effect;

  bool is_pretrend() const { return event_time < 0; }
};

struct SkippedCell {
  int g = 0;
  int t = 0;
  int event_time = 0;
  ErrorKind kind = ErrorKind::NoComparison;
  std::string reason;
};

struct CohortSize {
  int g = 0;
  std::size_t g_index = 0;
  std::size_t units = 0;
  double weight = 0.0;
};

struct AttGtSettings {
  ParallelTrends assumption = ParallelTrends::not_yet;
  EstimatorKind estimator = EstimatorKind::means;
  NuisanceDesigns designs{};
  bool include_pretrends = true;
  CovariateTiming timing = CovariateTiming::baseline;
  unsigned threads = 1;
};

struct GroupTimeTable {
  std::vector<GroupTimeEffect> cells;  // ordered by (g, t)
  std::vector<SkippedCell> skipped;
  std::vector<CohortSize> cohorts;
  std::vector<int> periods;
  std::size_t n_units = 0;
  std::vector<int> cluster_codes;  // per unit, used for clustered inference
  // settings echo
  ParallelTrends assumption = ParallelTrends::not_yet;
  EstimatorKind estimator = EstimatorKind::means;
  std::string base_period = "universal";
  bool include_pretrends = true;
  std::vector<std::string> warnings;

  const GroupTimeEffect* find(int g, int t) const;
  const CohortSize* cohort(int g) const;
};

/// Units that may serve as comparisons for cohort index g at period index t.
std::vector<std::size_t> comparison_units(const PanelDataset& data, ParallelTrends assumption, std::size_t g_index,
                                          std::size_t t_index);

/// Group-time effects for every feasible (g, t), built as 2x2 frames with base
/// period g-1 and delegated to the 2x2 estimators. Pre-treatment cells (t <
/// g-1) carry the differential trend Y_t - Y_{g-1} when pretrends are requested.
GroupTimeTable att_gt(const PanelDataset& data, const AttGtSettings& settings = {});

/// Fully saturated cohort x event-time regression with unit and period fixed
/// effects (e = -1 and the never-treated cohort omitted), arranged as a table.
GroupTimeTable sun_abraham_fit(const PanelDataset& data, bool weighted = true);

}  // namespace didkit

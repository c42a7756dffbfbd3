#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "didkit/aggregate.hpp"
#include "didkit/staggered.hpp"

namespace didkit {

struct ClusteredCovariance {
  Eigen::VectorXd se;
  Eigen::MatrixXd covariance;
  std::size_t n_clusters = 0;
};

/// Sandwich over cluster-summed influence rows: (1/n^2) sum_c s_c s_c'.
ClusteredCovariance clustered_se(const Eigen::MatrixXd& influence, const std::vector<int>& cluster_ids);

enum class MultiplierKind { rademacher, mammen };

std::string_view to_string(MultiplierKind k);
std::optional<MultiplierKind> parse_multiplier(std::string_view name);

struct BandOptions {
  double level = 0.95;
  int draws = 999;
  std::uint64_t seed = 0;
  MultiplierKind multiplier = MultiplierKind::rademacher;
  unsigned threads = 1;
};

struct BandResult {
  double level = 0.95;
  double pointwise_critical_value = 0.0;
  double critical_value = 0.0;  // sup-t
  Eigen::VectorXd estimates;
  Eigen::VectorXd se;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  int draws = 0;
  MultiplierKind multiplier = MultiplierKind::rademacher;
  std::uint64_t seed = 0;
  std::vector<std::size_t> degenerate;  // coordinates with se == 0, left out of the max
};

/// Multiplier-bootstrap sup-t band. Multipliers are drawn per cluster from a
/// stream keyed by (seed, draw), so the result does not depend on `threads`.
BandResult sup_t_band(const Eigen::MatrixXd& influence, const Eigen::VectorXd& estimates,
                      const std::vector<int>& cluster_ids, const BandOptions& options = {});

/// Computes the band over every point of the curve and stores it there.
BandResult attach_band(EventStudyCurve& curve, const BandOptions& options = {});

struct PretrendTest {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
  int rank = 0;
  bool pseudo_inverse = false;  // covariance was singular
  std::vector<std::pair<int, int>> cells;  // (g, t) of the pre-trend cells used
};

/// Joint Wald test that every pre-trend cell is zero, clustered covariance.
PretrendTest pretrend_joint_test(const GroupTimeTable& table);

enum class SensitivityBenchmark { max_pre_step, absolute };

std::string_view to_string(SensitivityBenchmark b);
std::optional<SensitivityBenchmark> parse_benchmark(std::string_view name);

struct SensitivityOptions {
  int target_e = 0;
  double mbar = 1.0;
  SensitivityBenchmark benchmark = SensitivityBenchmark::max_pre_step;
  double level = 0.95;
  bool cumulate = false;
};

struct SensitivityResult {
  int target_e = 0;
  double mbar = 0.0;
  SensitivityBenchmark benchmark = SensitivityBenchmark::max_pre_step;
  double level = 0.95;
  bool cumulate = false;
  double estimate = 0.0;
  double se = 0.0;
  std::optional<double> max_pre_step;
  double violation = 0.0;  // V
  Interval identified;
  Interval robust_ci;
};

/// Relative-magnitudes bounds: estimate +- V, widened by the pointwise margin.
SensitivityResult sensitivity_bounds(const EventStudyCurve& curve, const SensitivityOptions& options);

}  // namespace didkit

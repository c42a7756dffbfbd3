#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "didkit/panel.hpp"

namespace didkit {

// ---- covariate balance ----

enum class BalanceKind { level, difference };

struct BalanceRow {
  std::string variable;
  BalanceKind kind = BalanceKind::level;
  double mean_treated = 0.0;
  double mean_comparison = 0.0;
  double var_treated = 0.0;
  double var_comparison = 0.0;
  double normalized_difference = 0.0;
  bool zero_variance = false;  // both arms constant; ND is 0 or +-inf
};

struct BalanceTable {
  int pre = 0;
  int post = 0;
  bool weighted = false;
  std::size_t n_treated = 0;
  std::size_t n_comparison = 0;
  std::vector<BalanceRow> rows;
};

/// (mean_t - mean_c) / sqrt((var_t + var_c) / 2).
double normalized_difference(double mean_t, double mean_c, double var_t, double var_c);

/// Treated = ever-treated units, comparison = never-treated. Levels at `pre`
/// and changes post - pre for every covariate.
BalanceTable balance_table(const PanelDataset& data, int pre, int post, bool weighted);

std::string balance_markdown(const BalanceTable& table);

// ---- two-way fixed effects ----

enum class TwfeSpec { static_effect, dynamic_2xT, saturated_SA };

std::string_view to_string(TwfeSpec s);
std::optional<TwfeSpec> parse_twfe_spec(std::string_view name);

struct TwfeFit {
  TwfeSpec spec = TwfeSpec::static_effect;
  std::vector<std::string> names;
  Eigen::VectorXd coefficients;
  Eigen::VectorXd se;  // cluster-robust
  std::size_t n_units = 0;
  std::size_t n_periods = 0;
  bool weighted = false;
};

/// Unit and period effects removed by the exact weighted within transform,
/// then least squares on the specification's treatment dummies.
TwfeFit twfe_fit(const PanelDataset& data, TwfeSpec spec, bool weighted);

struct LongDifferenceFit {
  double intercept = 0.0;
  double coefficient = 0.0;
  double se = 0.0;
};

/// Regression of Y_post - Y_pre on a treatment indicator; two-period panels only.
LongDifferenceFit long_difference_fit(const PanelDataset& data, bool weighted);

// ---- two-period, three-group decomposition ----

struct BaconTerm {
  std::string label;
  double estimate = 0.0;
  double weight = 0.0;
};

struct BaconDecomposition {
  bool weighted = true;
  double share_early = 0.0;  // treated from the first period
  double share_late = 0.0;   // treated from the second period
  double share_never = 0.0;
  double w1 = 0.0;
  /// The two 2x2 comparisons: late vs never (1 - w1) and late vs early (w1).
  std::vector<BaconTerm> comparisons;
  /// Effect form: ATT(2,2) with weight 1 and ATT(1,2) - ATT(1,1) with weight -w1.
  std::vector<BaconTerm> components;
  double beta = 0.0;  // reconstructed TWFE coefficient
};

BaconDecomposition bacon_two_period(const PanelDataset& data, bool weighted = true);

}  // namespace didkit
